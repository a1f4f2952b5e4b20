"""Arithmetic over Z_{2^ell}, additive secret sharing, fixed-point encoding.

Shares are additive: a value x in Z_q (q = 2^ell) is held as uniformly
random x_A, x_B with x_A + x_B = x mod q. Bit shares live in Z_2 and
reconstruct by XOR. Negative reals are carried in two's complement after
fixed-point scaling by 2^frac_bits.

Wire conventions (also used by the bundle file format): ring elements are
ell/8 bytes little-endian; bit vectors pack LSB-first, so bit index 1 of
x = x_ell..x_1 is the lowest bit of the first byte.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from enum import Enum

from .errors import OutOfRange, PartyMismatch
from .rng import Drbg

SESSION_BIT_LENGTHS = (8, 16, 32, 64)


class Party(Enum):
    ALICE = 0
    BOB = 1

    def other(self) -> "Party":
        return Party.BOB if self is Party.ALICE else Party.ALICE


@dataclass(frozen=True)
class RingParams:
    """The ring Z_{2^ell}. Sessions restrict ell to SESSION_BIT_LENGTHS;
    smaller rings are allowed here so exhaustive tests stay feasible."""

    ell: int = 64

    def __post_init__(self):
        if not 1 <= self.ell <= 64:
            raise OutOfRange(f"ring bit length {self.ell} outside 1..64")

    @property
    def q(self) -> int:
        return 1 << self.ell

    @property
    def mask(self) -> int:
        return (1 << self.ell) - 1

    @property
    def half(self) -> int:
        """2^(ell-1): the signed/unsigned pivot."""
        return 1 << (self.ell - 1)

    @property
    def nbytes(self) -> int:
        return (self.ell + 7) // 8


@dataclass(frozen=True)
class Share:
    value: int
    party: Party


@dataclass(frozen=True)
class BitShare:
    value: int
    party: Party


@dataclass(frozen=True)
class FixedPointParams:
    frac_bits: int = 16
    bound_bits: int = 24

    def headroom_ok(self, ring: RingParams, max_dim: int) -> bool:
        """Inner products of max_dim encoded values must not wrap:
        2*bound_bits + ceil(log2(max_dim)) < ell - 1."""
        return 2 * self.bound_bits + math.ceil(math.log2(max(max_dim, 1))) < ring.ell - 1


def share(value: int, ring: RingParams, rng: Drbg) -> tuple[Share, Share]:
    """Split value into (alice, bob) shares; alice's share is the mask."""
    if not 0 <= value < ring.q:
        raise OutOfRange(f"value {value} not in Z_{{2^{ring.ell}}}")
    r = rng.element(ring.ell)
    return Share(r, Party.ALICE), Share((value - r) & ring.mask, Party.BOB)


def share_bit(value: int, rng: Drbg) -> tuple[BitShare, BitShare]:
    r = rng.bit()
    return BitShare(r, Party.ALICE), BitShare((value ^ r) & 1, Party.BOB)


def reconstruct(a: Share, b: Share, ring: RingParams) -> int:
    if a.party is b.party:
        raise PartyMismatch(f"both shares held by {a.party.name}")
    return (a.value + b.value) & ring.mask


def reconstruct_bit(a: BitShare, b: BitShare) -> int:
    if a.party is b.party:
        raise PartyMismatch(f"both bit shares held by {a.party.name}")
    return (a.value ^ b.value) & 1


def _round_half_away(x: float) -> int:
    m = math.floor(abs(x) + 0.5)
    return m if x >= 0 else -m


def fxp_encode(x: float, params: FixedPointParams, ring: RingParams) -> int:
    """Two's-complement representative of round(x * 2^frac_bits) in Z_q.

    Rounding is half-away-from-zero, so encoding is sign-symmetric.
    """
    limit = 1 << (params.bound_bits - params.frac_bits)
    if not math.isfinite(x) or abs(x) >= limit:
        raise OutOfRange(f"{x!r} outside (+/-){limit} for {params}")
    v = _round_half_away(x * (1 << params.frac_bits))
    return v & ring.mask


def fxp_decode(v: int, params: FixedPointParams, ring: RingParams) -> float:
    return to_signed(v, ring) / (1 << params.frac_bits)


def to_signed(v: int, ring: RingParams) -> int:
    """Interpret a ring element as a two's-complement integer."""
    return v - ring.q if v >= ring.half else v


def to_offset(s: Share, ring: RingParams) -> Share:
    """Order-preserving signed -> unsigned map: add 2^(ell-1).

    One party (Alice) adds the pivot to its share locally, so the
    reconstructed value becomes v + 2^(ell-1) mod q, which is strictly
    increasing over the signed range.
    """
    if s.party is Party.ALICE:
        return Share((s.value + ring.half) & ring.mask, s.party)
    return s


def bits_of(value: int, ell: int) -> list[int]:
    """LSB-first bit list (index 0 holds bit x_1)."""
    return [(value >> i) & 1 for i in range(ell)]


def from_bits(bits: list[int]) -> int:
    v = 0
    for i, b in enumerate(bits):
        v |= (b & 1) << i
    return v


# --- wire helpers ---

def encode_elements(values: list[int], ring: RingParams) -> bytes:
    n = ring.nbytes
    return b"".join(v.to_bytes(n, "little") for v in values)


def decode_elements(data: bytes, ring: RingParams, count: int) -> list[int]:
    n = ring.nbytes
    if len(data) != n * count:
        raise ValueError(f"expected {n * count} bytes, got {len(data)}")
    return [int.from_bytes(data[i * n : (i + 1) * n], "little") for i in range(count)]


def pack_bits(bits: list[int]) -> bytes:
    out = bytearray((len(bits) + 7) // 8)
    for i, b in enumerate(bits):
        if b & 1:
            out[i // 8] |= 1 << (i % 8)
    return bytes(out)


def unpack_bits(data: bytes, count: int) -> list[int]:
    if len(data) != (count + 7) // 8:
        raise ValueError(f"expected {(count + 7) // 8} bytes for {count} bits")
    return [(data[i // 8] >> (i % 8)) & 1 for i in range(count)]


def encode_f64(values: list[float]) -> bytes:
    return struct.pack(f">{len(values)}d", *values)


def decode_f64(data: bytes, count: int) -> list[float]:
    return list(struct.unpack(f">{count}d", data))
