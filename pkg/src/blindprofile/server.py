"""The model-bank server: accepts profile sessions and plays Bob.

Each connection is one session. Private and compare sessions claim one
dealt bundle, matched by the pair id the client announces in its HELLO
(bundle files carry the pair id in their name); a bundle is never shared
between sessions. Clear sessions need no randomness.
"""

from __future__ import annotations

import logging
import socket
import threading
from dataclasses import dataclass, field

from .errors import (
    BlindProfileError,
    ChannelClosed,
    DealerUnavailable,
    HandshakeMismatch,
)
from .models import ModelBank
from .ring import Party, RingParams
from .svm import run_clear_server, run_profile_server
from .transport import (
    ERR_BANK,
    ERR_HANDSHAKE,
    ERR_INTERNAL,
    ERR_MODE,
    ERR_TRIPLES,
    HELLO,
    MODE_CLEAR,
    MODE_COMPARE,
    MODE_PRIVATE,
    MODES,
    PROTOCOL_VERSION,
    Handshake,
    Session,
    TcpChannel,
    decode_frame,
    encode_frame,
)
from .triples import BASIC, Bundle, pair_id_from_path, read_bundle

log = logging.getLogger("blindprofile.server")

DEFAULT_PORT = 7311


@dataclass
class ServerConfig:
    bank_dir: str
    bundle_paths: list[str] = field(default_factory=list)
    port: int = DEFAULT_PORT
    ell: int = 64
    frac_bits: int = 16
    variant: str = BASIC


class BundlePool:
    """Pair-id keyed one-shot bundle store."""

    def __init__(self, paths: list[str]):
        self._lock = threading.Lock()
        self._paths: dict[int, str] = {}
        for p in paths:
            pid = pair_id_from_path(p)
            if pid in self._paths:
                raise HandshakeMismatch(f"two bundles claim pair id {pid}: {p}")
            self._paths[pid] = p

    def add(self, pair_id: int, bundle: Bundle) -> None:
        with self._lock:
            self._paths[pair_id] = bundle  # already materialized

    def claim(self, pair_id: int) -> Bundle:
        with self._lock:
            entry = self._paths.pop(pair_id, None)
        if entry is None:
            raise HandshakeMismatch(f"no unused bundle for pair id {pair_id}")
        if isinstance(entry, Bundle):
            return entry
        return read_bundle(entry)

    def __len__(self) -> int:
        return len(self._paths)


class ProfileServer:
    def __init__(self, config: ServerConfig, bank: ModelBank | None = None):
        self.config = config
        self.bank = bank if bank is not None else ModelBank.load_dir(config.bank_dir)
        self.pool = BundlePool(config.bundle_paths)
        self.ring = RingParams(config.ell)
        self._session_started = False
        self._listener: socket.socket | None = None
        self._stop = threading.Event()

    # dealing is offline: once any session ran, the dealer may not be used
    def fetch_bundles_from_dealer(self, host: str, port: int, pair_ids: list[int]) -> None:
        if self._session_started:
            raise DealerUnavailable("sessions already started; dealer is offline")
        from .dealersvc import fetch_bundle

        for pid in pair_ids:
            self.pool.add(pid, fetch_bundle(host, port, Party.BOB, pid))

    def handle_channel(self, channel) -> None:
        """Run one full session on an established channel."""
        self._session_started = True
        try:
            frame = decode_frame(channel.recv_frame())
        except BlindProfileError:
            channel.close()
            return
        try:
            if frame.ftype != HELLO:
                raise HandshakeMismatch("expected HELLO")
            hello = Handshake.decode(frame.payload)
            cfg = self.config
            if hello.version != PROTOCOL_VERSION:
                raise HandshakeMismatch(f"protocol version {hello.version}")
            if hello.ell != cfg.ell or hello.frac_bits != cfg.frac_bits:
                raise HandshakeMismatch(
                    f"ring/scale mismatch: client ell={hello.ell} f={hello.frac_bits}, "
                    f"server ell={cfg.ell} f={cfg.frac_bits}"
                )
            if hello.variant != (0 if cfg.variant == BASIC else 1):
                raise HandshakeMismatch("circuit variant mismatch")
            if hello.mode not in MODES:
                self._refuse(channel, ERR_MODE, f"unknown mode {hello.mode}")
                return
            if not self.bank.complete:
                self._refuse(channel, ERR_BANK, "model bank cannot serve full profiles")
                return
            catalog = self.bank.catalog_bytes()
            digest = self.bank.catalog_hash()
            if hello.catalog_hash != bytes(32) and hello.catalog_hash != digest:
                raise HandshakeMismatch("client pinned a different model catalog")
            bundle = None
            if hello.mode in (MODE_PRIVATE, MODE_COMPARE):
                try:
                    bundle = self.pool.claim(hello.pair_id)
                except HandshakeMismatch:
                    self._refuse(channel, ERR_TRIPLES, f"no bundle for pair {hello.pair_id}")
                    return
                if bundle.ring.ell != cfg.ell:
                    self._refuse(channel, ERR_TRIPLES, "bundle ring mismatch")
                    return
            reply = Handshake(
                version=PROTOCOL_VERSION,
                ell=cfg.ell,
                frac_bits=cfg.frac_bits,
                mode=hello.mode,
                variant=hello.variant,
                pair_id=hello.pair_id,
                catalog_hash=digest,
                catalog=catalog,
            )
            channel.send_frame(encode_frame(HELLO, 0, reply.encode()))
            session = Session(channel=channel, party=Party.BOB, ring=self.ring, bundle=bundle)
            if hello.mode in (MODE_CLEAR, MODE_COMPARE):
                run_clear_server(session, self.bank)
            if hello.mode in (MODE_PRIVATE, MODE_COMPARE):
                run_profile_server(session, self.bank, self.config.variant)
            else:
                session.recv_bye()
                session.send_bye()
            log.info("session complete (mode=%s)", MODES[hello.mode])
        except HandshakeMismatch as exc:
            self._refuse(channel, ERR_HANDSHAKE, str(exc))
        except ChannelClosed:
            log.warning("peer vanished mid-session")
        except BlindProfileError as exc:
            log.warning("session failed: %s", exc)
            try:
                Session(channel=channel, party=Party.BOB, ring=self.ring).abort(
                    ERR_INTERNAL, str(exc)
                )
            except BlindProfileError:
                pass
        finally:
            channel.close()

    def _refuse(self, channel, code: int, message: str) -> None:
        try:
            channel.send_frame(encode_frame(0x0E, 0, bytes([code]) + message.encode()))
        except BlindProfileError:
            pass

    # --- TCP front end ---

    def serve(self, ready: threading.Event | None = None) -> None:
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind(("0.0.0.0", self.config.port))
        listener.listen(8)
        self._listener = listener
        self.config.port = listener.getsockname()[1]
        if ready is not None:
            ready.set()
        log.info("serving %d models on port %d", len(self.bank), self.config.port)
        while not self._stop.is_set():
            try:
                conn, _ = listener.accept()
            except OSError:
                break
            t = threading.Thread(
                target=self.handle_channel, args=(TcpChannel(conn),), daemon=True
            )
            t.start()

    def stop(self) -> None:
        self._stop.set()
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass


def start_in_thread(config: ServerConfig, bank: ModelBank | None = None) -> ProfileServer:
    """Spin up a server on an ephemeral port; used by tests and the bench."""
    if config.port == DEFAULT_PORT:
        config.port = 0
    server = ProfileServer(config, bank)
    ready = threading.Event()
    t = threading.Thread(target=server.serve, args=(ready,), daemon=True)
    t.start()
    ready.wait(timeout=10)
    return server
