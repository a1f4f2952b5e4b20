"""Trusted-dealer correlated randomness: triples, session plans, bundle files.

The dealer samples multiplication triples offline (matrix triples over
Z_{2^ell} for inner products, bit triples over Z_2 for the comparison and
decomposition circuits), splits every component into additive shares, and
writes one bundle file per party. Both bundles are index-aligned; the
protocols consume them in a fixed schedule order, so no per-triple IDs are
needed. A bundle must never be shared across sessions: triples are
one-time pads.

Bundle file layout (little-endian counts, see ``BUNDLE_MAGIC``):

    magic "VIT1" | version u8 | party u8 | ell u8 | reserved u8
    matrix-triple count u32 | bit-triple count u32
    per matrix triple: i u16, j u16, k u16, then row-major U, V, W shares
        (each element ell/8 bytes little-endian)
    bit triples: u, v, w interleaved per triple, packed LSB-first
"""

from __future__ import annotations

import io
import math
import os
import re
import struct
from dataclasses import dataclass, field

from .errors import (
    BundleFormatError,
    DimensionMismatch,
    IoFailure,
    TripleExhausted,
    UnsupportedRing,
)
from .ring import (
    SESSION_BIT_LENGTHS,
    Party,
    RingParams,
    pack_bits,
    unpack_bits,
)
from .rng import Drbg

BUNDLE_MAGIC = b"VIT1"
BUNDLE_VERSION = 1

BASIC = "basic"
LOG = "log"
VARIANTS = (BASIC, LOG)


@dataclass(frozen=True)
class TripleShape:
    rows: int
    inner: int
    cols: int


@dataclass
class MatrixTripleShare:
    """One party's share of (U, V, W = U V): flat row-major lists."""

    shape: TripleShape
    u: list[int]
    v: list[int]
    w: list[int]


@dataclass
class Bundle:
    party: Party
    ring: RingParams
    matrix: list[MatrixTripleShare] = field(default_factory=list)
    bits: list[tuple[int, int, int]] = field(default_factory=list)
    _matrix_pos: int = 0
    _bits_pos: int = 0

    def take_matrix(self, shape: TripleShape) -> MatrixTripleShare:
        if self._matrix_pos >= len(self.matrix):
            raise TripleExhausted("no matrix triple left in bundle")
        t = self.matrix[self._matrix_pos]
        if t.shape != shape:
            raise DimensionMismatch(f"next triple is {t.shape}, requested {shape}")
        self._matrix_pos += 1
        return t

    def take_bits(self, n: int) -> list[tuple[int, int, int]]:
        if self._bits_pos + n > len(self.bits):
            raise TripleExhausted(
                f"need {n} bit triples, {len(self.bits) - self._bits_pos} left"
            )
        out = self.bits[self._bits_pos : self._bits_pos + n]
        self._bits_pos += n
        return out

    @property
    def fully_consumed(self) -> bool:
        return self._matrix_pos == len(self.matrix) and self._bits_pos == len(self.bits)

    @property
    def cursor(self) -> tuple[int, int]:
        return (self._matrix_pos, self._bits_pos)


def gen_matrix_triple(
    shape: TripleShape, ring: RingParams, rng: Drbg
) -> tuple[MatrixTripleShare, MatrixTripleShare]:
    """Uniform U (i x j), V (j x k), W = U V mod q, each additively shared."""
    i, j, k = shape.rows, shape.inner, shape.cols
    if min(i, j, k) < 1:
        raise DimensionMismatch(f"triple dims must be >= 1, got {shape}")
    mask = ring.mask
    u = [rng.element(ring.ell) for _ in range(i * j)]
    v = [rng.element(ring.ell) for _ in range(j * k)]
    w = [0] * (i * k)
    for r in range(i):
        for c in range(k):
            acc = 0
            for m in range(j):
                acc += u[r * j + m] * v[m * k + c]
            w[r * k + c] = acc & mask

    def split(vals: list[int]) -> tuple[list[int], list[int]]:
        a = [rng.element(ring.ell) for _ in vals]
        b = [(x - y) & mask for x, y in zip(vals, a)]
        return a, b

    ua, ub = split(u)
    va, vb = split(v)
    wa, wb = split(w)
    return (
        MatrixTripleShare(shape, ua, va, wa),
        MatrixTripleShare(shape, ub, vb, wb),
    )


def gen_bit_triple(rng: Drbg) -> tuple[tuple[int, int, int], tuple[int, int, int]]:
    u, v = rng.bit(), rng.bit()
    w = u & v
    ua, va, wa = rng.bit(), rng.bit(), rng.bit()
    return (ua, va, wa), (u ^ ua, v ^ va, w ^ wa)


# --- triple budgets ---
#
# Basic circuits (normative): decomposition spends one multiplication for
# the first carry plus three per subsequent carry position; comparison
# spends one per bit position, ell-1 along the suffix-product chain, and
# ell-1 for the final per-position products.

def decomp_triple_cost(ell: int, variant: str = BASIC) -> int:
    if variant == BASIC:
        return 3 * (ell - 1) + 1
    # log variant: per-position generate products, then a doubling carry
    # scan where each step updates positions above the stride with two
    # products (carry and propagate).
    steps = max(0, math.ceil(math.log2(ell))) if ell > 1 else 0
    return ell + sum(2 * (ell - (1 << t)) for t in range(steps))


def compare_triple_cost(ell: int, variant: str = BASIC) -> int:
    if variant == BASIC:
        return ell + (ell - 1) + (ell - 1)
    # log variant: doubling suffix scan over the ell-1 upper equality bits.
    n = ell - 1
    steps = max(0, math.ceil(math.log2(n))) if n > 1 else 0
    return ell + sum(max(0, n - (1 << t)) for t in range(steps)) + (ell - 1)


def svm_triple_cost(ell: int, variant: str = BASIC) -> int:
    return decomp_triple_cost(ell, variant) + compare_triple_cost(ell, variant)


@dataclass(frozen=True)
class SessionPlan:
    ring: RingParams
    variant: str
    shapes: tuple[TripleShape, ...]
    bit_count: int


def plan_session(dims: list[int], ring: RingParams, variant: str = BASIC) -> SessionPlan:
    """Exact triple budget for one profile session over the given models.

    ``dims`` lists the model dimensions in schedule order; each model costs
    one (1 x n)(n x 1) matrix triple plus the decomposition and comparison
    bit triples for the agreed circuit variant.
    """
    if ring.ell not in SESSION_BIT_LENGTHS:
        raise UnsupportedRing(f"ell={ring.ell} not in {SESSION_BIT_LENGTHS}")
    if variant not in VARIANTS:
        raise ValueError(f"unknown circuit variant {variant!r}")
    if not dims:
        raise ValueError("at least one model required")
    shapes = tuple(TripleShape(1, n, 1) for n in dims)
    return SessionPlan(
        ring=ring,
        variant=variant,
        shapes=shapes,
        bit_count=len(dims) * svm_triple_cost(ring.ell, variant),
    )


def deal(plan: SessionPlan, rng: Drbg) -> tuple[Bundle, Bundle]:
    """Sample every triple in the plan; the dealer keeps nothing."""
    alice = Bundle(Party.ALICE, plan.ring)
    bob = Bundle(Party.BOB, plan.ring)
    for shape in plan.shapes:
        ta, tb = gen_matrix_triple(shape, plan.ring, rng)
        alice.matrix.append(ta)
        bob.matrix.append(tb)
    for _ in range(plan.bit_count):
        ba, bb = gen_bit_triple(rng)
        alice.bits.append(ba)
        bob.bits.append(bb)
    return alice, bob


# --- serialization ---

def bundle_to_bytes(bundle: Bundle) -> bytes:
    ring = bundle.ring
    if ring.ell % 8 != 0:
        raise UnsupportedRing("bundle files require ell divisible by 8")
    out = io.BytesIO()
    out.write(BUNDLE_MAGIC)
    out.write(
        struct.pack(
            "<BBBBII",
            BUNDLE_VERSION,
            bundle.party.value,
            ring.ell,
            0,
            len(bundle.matrix),
            len(bundle.bits),
        )
    )
    nb = ring.nbytes
    for t in bundle.matrix:
        out.write(struct.pack("<HHH", t.shape.rows, t.shape.inner, t.shape.cols))
        for vals in (t.u, t.v, t.w):
            for v in vals:
                out.write(v.to_bytes(nb, "little"))
    flat: list[int] = []
    for u, v, w in bundle.bits:
        flat += [u, v, w]
    out.write(pack_bits(flat))
    return out.getvalue()


def bundle_from_bytes(data: bytes) -> Bundle:
    buf = io.BytesIO(data)

    def need(n: int) -> bytes:
        chunk = buf.read(n)
        if len(chunk) != n:
            raise BundleFormatError("bundle truncated")
        return chunk

    if need(4) != BUNDLE_MAGIC:
        raise BundleFormatError("bad magic")
    version, party, ell, reserved, n_matrix, n_bits = struct.unpack(
        "<BBBBII", need(12)
    )
    if version != BUNDLE_VERSION:
        raise BundleFormatError(f"unsupported bundle version {version}")
    if party not in (0, 1):
        raise BundleFormatError(f"bad party tag {party}")
    if ell not in SESSION_BIT_LENGTHS:
        raise BundleFormatError(f"bad ring bit length {ell}")
    if reserved != 0:
        raise BundleFormatError("reserved byte not zero")
    ring = RingParams(ell)
    bundle = Bundle(Party(party), ring)
    nb = ring.nbytes
    for _ in range(n_matrix):
        i, j, k = struct.unpack("<HHH", need(6))
        if min(i, j, k) < 1:
            raise BundleFormatError("zero triple dimension")
        shape = TripleShape(i, j, k)
        sizes = (i * j, j * k, i * k)
        parts = []
        for size in sizes:
            raw = need(size * nb)
            parts.append(
                [int.from_bytes(raw[p * nb : (p + 1) * nb], "little") for p in range(size)]
            )
        bundle.matrix.append(MatrixTripleShare(shape, *parts))
    packed = need((3 * n_bits + 7) // 8)
    if buf.read(1):
        raise BundleFormatError("trailing bytes after bit triples")
    flat = unpack_bits(packed, 3 * n_bits) if n_bits else []
    bundle.bits = [tuple(flat[3 * t : 3 * t + 3]) for t in range(n_bits)]
    return bundle


def indexed_bundle_path(path: str, pair_id: int, sessions: int) -> str:
    """File name for one pair of a multi-session dealing: a.vit -> a-2.vit.
    Single-session dealings keep the given name (pair id 0)."""
    if sessions <= 1:
        return path
    root, ext = os.path.splitext(path)
    return f"{root}-{pair_id}{ext}"


def pair_id_from_path(path: str) -> int:
    """Inverse of indexed_bundle_path: trailing -N before the extension."""
    root, _ = os.path.splitext(os.path.basename(path))
    m = re.search(r"-(\d+)$", root)
    return int(m.group(1)) if m else 0


def write_bundle(bundle: Bundle, path: str) -> None:
    try:
        with open(path, "wb") as fh:
            fh.write(bundle_to_bytes(bundle))
    except OSError as exc:
        raise IoFailure(f"cannot write bundle {path}: {exc}") from exc


def read_bundle(path: str) -> Bundle:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read bundle {path}: {exc}") from exc
    return bundle_from_bytes(data)
