"""Wire delivery for dealt bundles: a one-shot dealer service.

Request: HELLO frame with (party u8, pair id u32 BE). Response: RESULT
frame carrying the bundle file bytes. Every half is served at most once;
the service exits when all halves are claimed. Parties may only fetch
before their first session starts (the dealer never participates in the
online phase).
"""

from __future__ import annotations

import logging
import socket
import struct
import threading

from .errors import BlindProfileError, ChannelClosed, ProtocolError
from .ring import Party
from .transport import ERR_DEALER, HELLO, RESULT, TcpChannel, decode_frame, encode_frame
from .triples import Bundle, bundle_from_bytes, bundle_to_bytes

log = logging.getLogger("blindprofile.dealer")

DEFAULT_PORT = 7312


class DealerService:
    def __init__(self, bundles: dict[tuple[Party, int], Bundle], port: int = 0):
        self._stock = {key: bundle_to_bytes(b) for key, b in bundles.items()}
        self._lock = threading.Lock()
        self.port = port
        self._listener: socket.socket | None = None

    def serve(self, ready: threading.Event | None = None) -> None:
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind(("0.0.0.0", self.port))
        listener.listen(4)
        self.port = listener.getsockname()[1]
        self._listener = listener
        if ready is not None:
            ready.set()
        log.info("dealer serving %d bundle halves on port %d", len(self._stock), self.port)
        while True:
            with self._lock:
                if not self._stock:
                    break
            try:
                conn, _ = listener.accept()
            except OSError:
                break
            self._serve_one(TcpChannel(conn))
        listener.close()

    def _serve_one(self, channel) -> None:
        try:
            frame = decode_frame(channel.recv_frame())
            if frame.ftype != HELLO or len(frame.payload) != 5:
                raise ProtocolError("bad dealer request")
            party_tag, pair_id = struct.unpack(">BI", frame.payload)
            key = (Party(party_tag), pair_id)
            with self._lock:
                data = self._stock.pop(key, None)
            if data is None:
                channel.send_frame(
                    encode_frame(0x0E, 0, bytes([ERR_DEALER]) + b"bundle already claimed or unknown")
                )
                return
            channel.send_frame(encode_frame(RESULT, 0, data))
        except BlindProfileError as exc:
            log.warning("dealer request failed: %s", exc)
        finally:
            channel.close()


def start_in_thread(bundles: dict[tuple[Party, int], Bundle], port: int = 0) -> DealerService:
    service = DealerService(bundles, port)
    ready = threading.Event()
    t = threading.Thread(target=service.serve, args=(ready,), daemon=True)
    t.start()
    ready.wait(timeout=10)
    return service


def fetch_bundle(host: str, port: int, party: Party, pair_id: int) -> Bundle:
    try:
        sock = socket.create_connection((host, port), timeout=30)
    except OSError as exc:
        raise ChannelClosed(f"cannot reach dealer at {host}:{port}: {exc}") from exc
    channel = TcpChannel(sock)
    try:
        channel.send_frame(
            encode_frame(HELLO, 0, struct.pack(">BI", party.value, pair_id))
        )
        frame = decode_frame(channel.recv_frame())
        if frame.ftype != RESULT:
            raise ProtocolError(
                f"dealer refused: {frame.payload[1:].decode('utf-8', 'replace')}"
            )
        return bundle_from_bytes(frame.payload)
    finally:
        channel.close()
