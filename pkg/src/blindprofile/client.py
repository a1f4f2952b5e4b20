"""The client side: feature extraction, handshake, and session driving.

Feature extraction happens before any connection is opened, so input
errors never leak a session attempt. In compare mode the clear exchange
runs first, then the private pipelines, over the same connection.
"""

from __future__ import annotations

import hashlib
import socket
import time
from dataclasses import dataclass

from .errors import (
    ChannelClosed,
    DealerUnavailable,
    EmptyText,
    HandshakeMismatch,
    ProtocolError,
)
from .features import (
    MrcLexicon,
    NrcLexicon,
    load_landmarks,
    text_features,
    tokenize,
)
from .ring import Party, RingParams
from .svm import (
    ProfileResult,
    parse_catalog,
    require_profile_catalog,
    run_clear_client,
    run_profile_client,
)
from .transport import (
    ERROR,
    HELLO,
    MODE_CLEAR,
    MODE_COMPARE,
    MODE_PRIVATE,
    PROTOCOL_VERSION,
    Handshake,
    Session,
    TcpChannel,
    decode_frame,
    encode_frame,
)
from .triples import BASIC, Bundle, pair_id_from_path, plan_session, read_bundle


@dataclass
class ClientOutcome:
    clear: ProfileResult | None = None
    clear_margins: dict[str, float] | None = None
    private: ProfileResult | None = None
    clear_seconds: float | None = None
    private_seconds: float | None = None


def extract_inputs(text: str, landmarks_path: str, mrc_path: str, nrc_path: str):
    tokens, _ = tokenize(text)
    if not tokens:
        raise EmptyText("input text contains no words")
    mrc = MrcLexicon.load(mrc_path)
    nrc = NrcLexicon.load(nrc_path)
    return load_landmarks(landmarks_path), text_features(text, mrc, nrc)


class ProfileClient:
    def __init__(
        self,
        mode: int,
        ell: int = 64,
        frac_bits: int = 16,
        variant: str = BASIC,
        bundle_path: str | None = None,
        expected_catalog_hash: bytes | None = None,
    ):
        self.mode = mode
        self.ring = RingParams(ell)
        self.frac_bits = frac_bits
        self.variant = variant
        self.bundle: Bundle | None = None
        self.pair_id = 0
        self.expected_catalog_hash = expected_catalog_hash
        self._session_started = False
        if bundle_path is not None:
            self.bundle = read_bundle(bundle_path)
            self.pair_id = pair_id_from_path(bundle_path)

    def fetch_bundle_from_dealer(self, host: str, port: int, pair_id: int = 0) -> None:
        if self._session_started:
            raise DealerUnavailable("session already started; dealer is offline")
        from .dealersvc import fetch_bundle

        self.bundle = fetch_bundle(host, port, Party.ALICE, pair_id)
        self.pair_id = pair_id

    def _handshake(self, channel) -> list:
        hello = Handshake(
            version=PROTOCOL_VERSION,
            ell=self.ring.ell,
            frac_bits=self.frac_bits,
            mode=self.mode,
            variant=0 if self.variant == BASIC else 1,
            pair_id=self.pair_id,
            catalog_hash=self.expected_catalog_hash or bytes(32),
            catalog=b"",
        )
        channel.send_frame(encode_frame(HELLO, 0, hello.encode()))
        frame = decode_frame(channel.recv_frame())
        if frame.ftype == ERROR:
            code = frame.payload[0] if frame.payload else 0
            raise HandshakeMismatch(
                f"server refused session ({code}): {frame.payload[1:].decode('utf-8', 'replace')}"
            )
        if frame.ftype != HELLO:
            raise ProtocolError(f"expected HELLO reply, got type 0x{frame.ftype:02x}")
        reply = Handshake.decode(frame.payload)
        if (reply.version, reply.ell, reply.frac_bits, reply.mode, reply.variant) != (
            PROTOCOL_VERSION,
            self.ring.ell,
            self.frac_bits,
            self.mode,
            hello.variant,
        ):
            raise HandshakeMismatch("server echoed different session parameters")
        if hashlib.sha256(reply.catalog).digest() != reply.catalog_hash:
            raise HandshakeMismatch("catalog does not match its hash")
        if self.expected_catalog_hash and reply.catalog_hash != self.expected_catalog_hash:
            raise HandshakeMismatch("server catalog differs from the pinned one")
        entries = require_profile_catalog(parse_catalog(reply.catalog))
        if self.mode in (MODE_PRIVATE, MODE_COMPARE):
            if self.bundle is None:
                raise HandshakeMismatch("private mode requires a randomness bundle")
            plan = plan_session([e.dim for e in entries], self.ring, self.variant)
            if (
                len(self.bundle.matrix) != len(plan.shapes)
                or len(self.bundle.bits) != plan.bit_count
                or [t.shape for t in self.bundle.matrix] != list(plan.shapes)
            ):
                raise HandshakeMismatch(
                    "bundle does not match the advertised model catalog"
                )
        return entries

    def run_channel(self, channel, landmarks, text_vec) -> ClientOutcome:
        """Drive one full session on an established channel."""
        self._session_started = True
        entries = self._handshake(channel)
        session = Session(
            channel=channel, party=Party.ALICE, ring=self.ring, bundle=self.bundle
        )
        outcome = ClientOutcome()
        if self.mode in (MODE_CLEAR, MODE_COMPARE):
            t0 = time.perf_counter()
            outcome.clear, outcome.clear_margins = run_clear_client(
                session, entries, landmarks, text_vec
            )
            outcome.clear_seconds = time.perf_counter() - t0
        if self.mode in (MODE_PRIVATE, MODE_COMPARE):
            t0 = time.perf_counter()
            outcome.private = run_profile_client(
                session, entries, landmarks, text_vec, self.variant
            )
            outcome.private_seconds = time.perf_counter() - t0
        else:
            session.send_bye()
            session.recv_bye()
        return outcome

    def run_tcp(self, host: str, port: int, landmarks, text_vec) -> ClientOutcome:
        try:
            sock = socket.create_connection((host, port), timeout=30)
        except OSError as exc:
            raise ChannelClosed(f"cannot connect to {host}:{port}: {exc}") from exc
        channel = TcpChannel(sock)
        try:
            return self.run_channel(channel, landmarks, text_vec)
        finally:
            channel.close()
