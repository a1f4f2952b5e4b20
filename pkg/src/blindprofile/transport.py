"""Framed wire protocol, channels, handshake, and session multiplexing.

One frame per message: length u32 BE (covering type + sub-session id +
payload), type u8, sub-session id u16 BE, payload. The same byte layout
travels over TCP and over the in-memory channel pair used by tests, so
transcripts are comparable byte for byte.

Frame types:
    0x01 HELLO           session negotiation (client first, server echoes)
    0x02 OPEN            masked openings (the only share-bearing frames)
    0x03 RESULT          a final comparison-bit share
    0x04 CLEAR_FEATURES  clear mode only: raw feature vectors
    0x05 CLEAR_RESULT    clear mode only: labels and display margins
    0x0E ERROR           code + utf-8 message, then the session dies
    0x0F BYE             orderly shutdown

OPEN payloads embed the sub-session round counter; both parties must open
in lockstep or the receiver aborts with RoundDesync.
"""

from __future__ import annotations

import hashlib
import queue
import socket
import struct
from dataclasses import dataclass, field

from .errors import (
    ChannelClosed,
    Oversize,
    ProtocolError,
    RoundDesync,
    TripleExhausted,
    Truncated,
    UnknownType,
)
from .ring import (
    Party,
    RingParams,
    decode_elements,
    encode_elements,
    pack_bits,
    unpack_bits,
)
from .triples import Bundle, TripleShape

MAX_PAYLOAD = 16 * 1024 * 1024
RECV_TIMEOUT = 60.0

HELLO = 0x01
OPEN = 0x02
RESULT = 0x03
CLEAR_FEATURES = 0x04
CLEAR_RESULT = 0x05
ERROR = 0x0E
BYE = 0x0F

FRAME_TYPES = {HELLO, OPEN, RESULT, CLEAR_FEATURES, CLEAR_RESULT, ERROR, BYE}

OPEN_RING = 0
OPEN_BITS = 1

MODE_PRIVATE = 0
MODE_CLEAR = 1
MODE_COMPARE = 2
MODES = {MODE_PRIVATE: "private", MODE_CLEAR: "clear", MODE_COMPARE: "compare"}

PROTOCOL_VERSION = 1

ERR_HANDSHAKE = 1
ERR_DESYNC = 2
ERR_TRIPLES = 3
ERR_MODE = 4
ERR_BANK = 5
ERR_INTERNAL = 6
ERR_DEALER = 7


@dataclass(frozen=True)
class Frame:
    ftype: int
    sub_id: int
    payload: bytes


def encode_frame(ftype: int, sub_id: int, payload: bytes) -> bytes:
    if len(payload) > MAX_PAYLOAD:
        raise Oversize(f"payload of {len(payload)} bytes exceeds {MAX_PAYLOAD}")
    return struct.pack(">IBH", len(payload) + 3, ftype, sub_id) + payload


def decode_frame(buf: bytes) -> Frame:
    if len(buf) < 7:
        raise Truncated(f"frame buffer of {len(buf)} bytes, need at least 7")
    length, ftype, sub_id = struct.unpack_from(">IBH", buf)
    if length < 3:
        raise Truncated(f"declared length {length} below header size")
    if length - 3 > MAX_PAYLOAD:
        raise Oversize(f"declared payload {length - 3} exceeds {MAX_PAYLOAD}")
    if len(buf) != 4 + length:
        raise Truncated(f"declared length {length}, buffer holds {len(buf) - 4}")
    if ftype not in FRAME_TYPES:
        raise UnknownType(f"frame type 0x{ftype:02x}")
    return Frame(ftype, sub_id, buf[7:])


# --- channels: carry whole frames as byte strings ---

class InMemoryChannel:
    """One endpoint of an in-process pair; see make_memory_pair()."""

    def __init__(self, inbox: "queue.Queue[bytes | None]", outbox: "queue.Queue[bytes | None]"):
        self._inbox = inbox
        self._outbox = outbox
        self._closed = False

    def send_frame(self, data: bytes) -> None:
        if self._closed:
            raise ChannelClosed("channel closed")
        self._outbox.put(data)

    def recv_frame(self) -> bytes:
        if self._closed:
            raise ChannelClosed("channel closed")
        try:
            data = self._inbox.get(timeout=RECV_TIMEOUT)
        except queue.Empty:
            raise ChannelClosed("receive timed out") from None
        if data is None:
            self._inbox.put(None)  # keep the sentinel for later reads
            raise ChannelClosed("peer closed channel")
        return data

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            self._outbox.put(None)


def make_memory_pair() -> tuple[InMemoryChannel, InMemoryChannel]:
    a_to_b: "queue.Queue[bytes | None]" = queue.Queue()
    b_to_a: "queue.Queue[bytes | None]" = queue.Queue()
    return InMemoryChannel(b_to_a, a_to_b), InMemoryChannel(a_to_b, b_to_a)


class TcpChannel:
    def __init__(self, sock: socket.socket):
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        sock.settimeout(RECV_TIMEOUT)
        self._sock = sock

    def send_frame(self, data: bytes) -> None:
        try:
            self._sock.sendall(data)
        except OSError as exc:
            raise ChannelClosed(f"send failed: {exc}") from exc

    def _read_exact(self, n: int) -> bytes:
        buf = bytearray()
        while len(buf) < n:
            try:
                chunk = self._sock.recv(n - len(buf))
            except socket.timeout:
                raise ChannelClosed("receive timed out") from None
            except OSError as exc:
                raise ChannelClosed(f"recv failed: {exc}") from exc
            if not chunk:
                raise ChannelClosed("peer closed connection")
            buf += chunk
        return bytes(buf)

    def recv_frame(self) -> bytes:
        header = self._read_exact(4)
        (length,) = struct.unpack(">I", header)
        if length < 3 or length - 3 > MAX_PAYLOAD:
            raise Truncated(f"bad declared length {length}")
        return header + self._read_exact(length)

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass


class RecordingChannel:
    """Wraps a channel, recording the raw byte stream in each direction."""

    def __init__(self, inner):
        self._inner = inner
        self.sent = bytearray()
        self.received = bytearray()

    def send_frame(self, data: bytes) -> None:
        self._inner.send_frame(data)
        self.sent += data

    def recv_frame(self) -> bytes:
        data = self._inner.recv_frame()
        self.received += data
        return data

    def close(self) -> None:
        self._inner.close()


def iter_frames(stream: bytes) -> list[Frame]:
    """Split one direction's recorded byte stream back into frames."""
    frames = []
    pos = 0
    while pos < len(stream):
        if len(stream) - pos < 4:
            raise Truncated("stream ends inside a frame header")
        (length,) = struct.unpack_from(">I", stream, pos)
        end = pos + 4 + length
        if end > len(stream):
            raise Truncated("stream ends inside a frame body")
        frames.append(decode_frame(stream[pos:end]))
        pos = end
    return frames


# --- handshake ---

@dataclass(frozen=True)
class Handshake:
    version: int
    ell: int
    frac_bits: int
    mode: int
    variant: int  # 0 = basic circuits, 1 = log-round circuits
    pair_id: int
    catalog_hash: bytes
    catalog: bytes

    def encode(self) -> bytes:
        return (
            struct.pack(
                ">BBBBBI", self.version, self.ell, self.frac_bits, self.mode, self.variant,
                self.pair_id,
            )
            + self.catalog_hash
            + struct.pack(">I", len(self.catalog))
            + self.catalog
        )

    @classmethod
    def decode(cls, payload: bytes) -> "Handshake":
        if len(payload) < 9 + 32 + 4:
            raise Truncated("hello payload too short")
        version, ell, frac, mode, variant, pair_id = struct.unpack_from(">BBBBBI", payload)
        h = payload[9:41]
        (clen,) = struct.unpack_from(">I", payload, 41)
        catalog = payload[45 : 45 + clen]
        if len(catalog) != clen:
            raise Truncated("hello catalog truncated")
        return cls(version, ell, frac, mode, variant, pair_id, h, catalog)


def catalog_digest(catalog: bytes) -> bytes:
    return hashlib.sha256(catalog).digest()


# --- session: sub-session demultiplexing and the opening primitive ---

@dataclass
class Session:
    """One party's end of a running protocol session.

    Frames from different sub-sessions may interleave arbitrarily; they are
    routed into per-sub queues here. Within a sub-session the order is
    strict and every opening carries the round counter.
    """

    channel: object
    party: Party
    ring: RingParams
    bundle: Bundle | None = None
    rounds: dict[int, int] = field(default_factory=dict)
    _pending: dict[int, list[Frame]] = field(default_factory=dict)
    started: bool = False

    def round_of(self, sub_id: int) -> int:
        return self.rounds.get(sub_id, 0)

    def _send(self, ftype: int, sub_id: int, payload: bytes) -> None:
        self.channel.send_frame(encode_frame(ftype, sub_id, payload))

    def _recv_for(self, sub_id: int, expected: set[int]) -> Frame:
        pending = self._pending.setdefault(sub_id, [])
        while not pending:
            frame = decode_frame(self.channel.recv_frame())
            if frame.ftype == ERROR:
                code = frame.payload[0] if frame.payload else 0
                msg = frame.payload[1:].decode("utf-8", "replace")
                raise ProtocolError(f"peer error {code}: {msg}")
            self._pending.setdefault(frame.sub_id, []).append(frame)
            pending = self._pending.setdefault(sub_id, [])
        frame = pending.pop(0)
        if frame.ftype not in expected:
            self.abort(ERR_INTERNAL, f"unexpected frame type 0x{frame.ftype:02x}")
            raise ProtocolError(f"expected {expected}, got type 0x{frame.ftype:02x}")
        return frame

    def abort(self, code: int, message: str) -> None:
        try:
            self._send(ERROR, 0, bytes([code]) + message.encode())
        except ChannelClosed:
            pass

    # The single primitive every kernel uses: both parties symmetrically
    # exchange their shares of designated values; one frame per direction.

    def open_values(self, sub_id: int, values: list[int], kind: int) -> list[int]:
        self.started = True
        rnd = self.rounds.get(sub_id, 0)
        if kind == OPEN_RING:
            body = encode_elements(values, self.ring)
        else:
            body = pack_bits(values)
        head = struct.pack(">IBI", rnd, kind, len(values))
        self._send(OPEN, sub_id, head + body)
        frame = self._recv_for(sub_id, {OPEN})
        if len(frame.payload) < 9:
            raise Truncated("open payload too short")
        peer_round, peer_kind, peer_count = struct.unpack_from(">IBI", frame.payload)
        if peer_round != rnd:
            self.abort(ERR_DESYNC, f"round {peer_round} != {rnd} on sub {sub_id}")
            raise RoundDesync(
                f"sub {sub_id}: peer opened round {peer_round}, we are at {rnd}"
            )
        if peer_kind != kind or peer_count != len(values):
            self.abort(ERR_DESYNC, "open shape mismatch")
            raise RoundDesync(
                f"sub {sub_id}: peer opened kind={peer_kind} count={peer_count}, "
                f"expected kind={kind} count={len(values)}"
            )
        data = frame.payload[9:]
        if kind == OPEN_RING:
            peer_values = decode_elements(data, self.ring, peer_count)
        else:
            peer_values = unpack_bits(data, peer_count)
        self.rounds[sub_id] = rnd + 1
        return peer_values

    # Final comparison bits travel as RESULT frames, never as OPENs, so a
    # transcript inspector can tell masked openings from revealed outputs.

    def send_result_bit(self, sub_id: int, bit: int) -> None:
        self._send(RESULT, sub_id, bytes([bit & 1]))

    def recv_result_bit(self, sub_id: int) -> int:
        frame = self._recv_for(sub_id, {RESULT})
        if len(frame.payload) != 1:
            raise Truncated("result payload must be one byte")
        return frame.payload[0] & 1

    def exchange_result_bit(self, sub_id: int, bit: int) -> int:
        """Open a result bit to both parties (the age-cascade pivot)."""
        self.send_result_bit(sub_id, bit)
        return self.recv_result_bit(sub_id)

    # Triple draws route through the session so the cursor is global.

    def take_matrix(self, shape: TripleShape):
        if self.bundle is None:
            raise TripleExhausted("session has no randomness bundle")
        return self.bundle.take_matrix(shape)

    def take_bits(self, n: int):
        if self.bundle is None:
            raise TripleExhausted("session has no randomness bundle")
        return self.bundle.take_bits(n)

    def send_bye(self) -> None:
        self._send(BYE, 0, b"")

    def recv_bye(self) -> None:
        self._recv_for(0, {BYE})
