"""Deterministic randomness for dealing and tests.

A SHA-256 counter-mode generator: cryptographic quality, reproducible for
a fixed seed, and unbiased for power-of-two ranges (we only ever mask).
Unseeded instances pull their seed from the OS entropy pool.
"""

from __future__ import annotations

import hashlib
import secrets

_BLOCKS_PER_REFILL = 64


class Drbg:
    def __init__(self, seed: bytes | int | None = None):
        if seed is None:
            seed = secrets.token_bytes(32)
        elif isinstance(seed, int):
            seed = seed.to_bytes(32, "big", signed=False)
        self._key = hashlib.sha256(b"blindprofile.drbg.v1" + seed).digest()
        self._counter = 0
        self._buf = b""
        self._pos = 0

    def _refill(self) -> None:
        chunks = []
        for _ in range(_BLOCKS_PER_REFILL):
            chunks.append(
                hashlib.sha256(self._key + self._counter.to_bytes(8, "big")).digest()
            )
            self._counter += 1
        self._buf = b"".join(chunks)
        self._pos = 0

    def take(self, n: int) -> bytes:
        out = bytearray()
        while n > 0:
            if self._pos >= len(self._buf):
                self._refill()
            step = min(n, len(self._buf) - self._pos)
            out += self._buf[self._pos : self._pos + step]
            self._pos += step
            n -= step
        return bytes(out)

    def element(self, ell: int) -> int:
        """One uniform element of Z_{2^ell}."""
        nbytes = (ell + 7) // 8
        v = int.from_bytes(self.take(nbytes), "little")
        return v & ((1 << ell) - 1)

    def bit(self) -> int:
        return self.take(1)[0] & 1
