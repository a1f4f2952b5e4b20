"""The three two-party kernels plus the signed comparison wrapper.

All kernels run symmetrically on both parties: the same function, the
same schedule, over a Session that exchanges masked openings. Only
derandomized differences (D = X - U, E = Y - V over the ring; d = x + u,
e = y + v over Z_2) ever cross the wire, so every transmitted value is a
one-time-pad masking of an input.

Party asymmetry is confined to public constants: Alice's share absorbs
any public addend (adding 1 over Z_2 flips Alice's bit), and Alice alone
adds the public D*E term of the multiplication.

Round schedules (asserted by tests via the session round counters):

* shared multiplication / inner product: 1 round (D and E open together).
* bit decomposition, basic: exactly ell rounds. The first round batches
  every a_i*b_i product; the second batches the y_i*d_i "propagate"
  products; each later round advances the carry chain by one position.
  The figure-order carry recurrence c_i = (y_i c_{i-1} + 1) d_i + 1 is
  reassociated as c_i = (y_i d_i) c_{i-1} + d_i + 1, which is the same
  function of the same values but needs only one sequential product per
  position. The top position's third product (whose carry no output ever
  reads) is scheduled in the last round against c_{ell-2}, keeping the
  published triple budget of 3(ell-1)+1 without an extra round.
* comparison, basic: at most ell+1 rounds (difference products, then the
  suffix equality chain, then all final per-position products at once),
  using ell + (ell-1) + (ell-1) triples.
* both log-round variants: a doubling tree over the same relations,
  within 2 + ceil(log2 ell) rounds; validated purely by the oracles.
"""

from __future__ import annotations

import math

from .errors import DimensionMismatch, OutOfRange
from .ring import Party, RingParams, bits_of
from .transport import OPEN_BITS, OPEN_RING, Session
from .triples import BASIC, LOG, TripleShape


def _matmul(a: list[int], b: list[int], i: int, j: int, k: int, mask: int) -> list[int]:
    out = [0] * (i * k)
    for r in range(i):
        base = r * j
        for c in range(k):
            acc = 0
            for m in range(j):
                acc += a[base + m] * b[m * k + c]
            out[r * k + c] = acc & mask
    return out


def shared_matmul(
    session: Session,
    sub_id: int,
    x: list[int],
    y: list[int],
    shape: TripleShape,
) -> list[int]:
    """Multiply secret-shared matrices X (i x j) and Y (j x k).

    Consumes one matrix triple; opens D = X - U and E = Y - V together in
    a single round; returns this party's share of Z = X Y mod q.
    """
    i, j, k = shape.rows, shape.inner, shape.cols
    if len(x) != i * j or len(y) != j * k:
        raise DimensionMismatch(
            f"operands {len(x)}/{len(y)} do not match shape {shape}"
        )
    triple = session.take_matrix(shape)
    mask = session.ring.mask
    d = [(xv - uv) & mask for xv, uv in zip(x, triple.u)]
    e = [(yv - vv) & mask for yv, vv in zip(y, triple.v)]
    peer = session.open_values(sub_id, d + e, OPEN_RING)
    d_open = [(a + b) & mask for a, b in zip(d, peer[: i * j])]
    e_open = [(a + b) & mask for a, b in zip(e, peer[i * j :])]

    z = list(triple.w)
    ue = _matmul(triple.u, e_open, i, j, k, mask)
    dv = _matmul(d_open, triple.v, i, j, k, mask)
    for p in range(i * k):
        z[p] = (z[p] + ue[p] + dv[p]) & mask
    if session.party is Party.ALICE:
        de = _matmul(d_open, e_open, i, j, k, mask)
        for p in range(i * k):
            z[p] = (z[p] + de[p]) & mask
    return z


def shared_inner_product(
    session: Session, sub_id: int, x: list[int], y: list[int]
) -> int:
    if len(x) != len(y):
        raise DimensionMismatch(f"vectors of length {len(x)} and {len(y)}")
    return shared_matmul(session, sub_id, x, y, TripleShape(1, len(x), 1))[0]


def mul_shared_bits(
    session: Session, sub_id: int, pairs: list[tuple[int, int]]
) -> list[int]:
    """Batched products of shared bits; one round, one triple per pair."""
    if not pairs:
        return []
    triples = session.take_bits(len(pairs))
    d = [(x ^ t[0]) & 1 for (x, _), t in zip(pairs, triples)]
    e = [(y ^ t[1]) & 1 for (_, y), t in zip(pairs, triples)]
    peer = session.open_values(sub_id, d + e, OPEN_BITS)
    n = len(pairs)
    out = []
    alice = session.party is Party.ALICE
    for idx, (u, v, w) in enumerate(triples):
        do = d[idx] ^ peer[idx]
        eo = e[idx] ^ peer[n + idx]
        z = w ^ (do & v) ^ (eo & u)
        if alice:
            z ^= do & eo
        out.append(z)
    return out


def _const_one(session: Session) -> int:
    """Share of the public bit 1: Alice holds it, Bob holds 0."""
    return 1 if session.party is Party.ALICE else 0


def _flip(session: Session, bit: int) -> int:
    """Add the public constant 1 over Z_2."""
    return bit ^ 1 if session.party is Party.ALICE else bit


def decompose_shared(
    session: Session, sub_id: int, value_share: int, variant: str = BASIC
) -> list[int]:
    """Re-share a Z_{2^ell} value as ell bit shares (LSB first).

    Each party feeds the bits of its own additive share into a joint
    binary addition; the carries are computed with shared multiplications
    and the output bits fall out as y_i + c_{i-1}.
    """
    ell = session.ring.ell
    own = bits_of(value_share, ell)
    alice = session.party is Party.ALICE
    # operand shares of the one-party-known bit vectors a and b
    a_sh = own if alice else [0] * ell
    b_sh = [0] * ell if alice else own
    y = own  # share of y_i = a_i + b_i mod 2

    if variant == LOG:
        return _decompose_log(session, sub_id, a_sh, b_sh, y, ell)

    # round 1: c_1 = a_1 b_1 plus every per-position a_i b_i product
    first = mul_shared_bits(
        session, sub_id, [(a_sh[i], b_sh[i]) for i in range(ell)]
    )
    if ell == 1:
        return [y[0]]
    c = [0] * ell  # c[i] holds the carry out of position i+1
    c[0] = first[0]
    d = [0] * ell
    for i in range(1, ell):
        d[i] = _flip(session, first[i])

    # round 2: the figure's e_2 product plus the propagate products y_i d_i
    pairs = [(y[1], c[0])]
    rest = range(2, ell) if ell > 2 else [1]
    for i in rest:
        pairs.append((y[i], d[i]))
    second = mul_shared_bits(session, sub_id, pairs)
    e2 = _flip(session, second[0])
    g = [0] * ell
    for pos, i in enumerate(rest):
        g[i] = second[pos + 1]
    if ell == 2:
        return [y[0], y[1] ^ c[0]]

    # rounds 3..ell: one carry position per round; the final round also
    # burns the top position's dead product to match the triple budget
    for rnd in range(3, ell + 1):
        if rnd == 3:
            pairs = [(e2, d[1])]
        else:
            pairs = [(g[rnd - 2], c[rnd - 3])]
        if rnd == ell:
            pairs.append((g[ell - 1], c[max(ell - 4, 0)]))
        prod = mul_shared_bits(session, sub_id, pairs)
        if rnd == 3:
            c[1] = _flip(session, prod[0])
        else:
            c[rnd - 2] = _flip(session, prod[0] ^ d[rnd - 2])

    return [y[0]] + [y[i] ^ c[i - 1] for i in range(1, ell)]


def _decompose_log(session, sub_id, a_sh, b_sh, y, ell) -> list[int]:
    # carry lookahead: generate g_i = a_i b_i, propagate p_i = y_i, then a
    # doubling scan with (g, p) o (g', p') = (g + p g', p p')
    g = mul_shared_bits(session, sub_id, [(a_sh[i], b_sh[i]) for i in range(ell)])
    p = list(y)
    steps = math.ceil(math.log2(ell)) if ell > 1 else 0
    for t in range(steps):
        s = 1 << t
        idx = list(range(s, ell))
        pairs = [(p[i], g[i - s]) for i in idx] + [(p[i], p[i - s]) for i in idx]
        prod = mul_shared_bits(session, sub_id, pairs)
        n = len(idx)
        for pos, i in enumerate(idx):
            g[i] = g[i] ^ prod[pos]
            p[i] = prod[n + pos]
    return [y[0]] + [y[i] ^ g[i - 1] for i in range(1, ell)]


def compare_ge_shared(
    session: Session,
    sub_id: int,
    x_bits: list[int],
    y_bits: list[int],
    variant: str = BASIC,
) -> int:
    """Shared bit of [x >= y] from bitwise shares (LSB first).

    d_i = y_i (1 - x_i) marks positions where y wins; e_i = x_i + y_i + 1
    marks equality; c_i = d_i * prod_{j>i} e_j fires for at most one i
    exactly when x < y; the result is 1 + sum c_i.
    """
    ell = len(x_bits)
    if len(y_bits) != ell:
        raise DimensionMismatch(f"bit vectors of length {ell} and {len(y_bits)}")

    not_x = [_flip(session, b) for b in x_bits]
    d = mul_shared_bits(
        session, sub_id, [(y_bits[i], not_x[i]) for i in range(ell)]
    )
    e = [_flip(session, x_bits[i] ^ y_bits[i]) for i in range(ell)]

    if variant == LOG:
        f = _suffix_products_log(session, sub_id, e, ell)
    else:
        # suffix chain f_i = prod_{j>i} e_j, seeded with a shared public 1
        f = [0] * (ell + 1)
        f[ell] = _const_one(session)
        for i in range(ell - 1, 0, -1):
            f[i] = mul_shared_bits(session, sub_id, [(e[i], f[i + 1])])[0]

    c_top = d[ell - 1]
    if ell > 1:
        finals = mul_shared_bits(
            session, sub_id, [(d[i - 1], f[i]) for i in range(1, ell)]
        )
    else:
        finals = []
    w = _const_one(session) ^ c_top
    for bit in finals:
        w ^= bit
    return w


def _suffix_products_log(session, sub_id, e, ell) -> list[int]:
    # doubling scan over e_2..e_ell; returns f with f[i] = prod_{j>i} e_j
    # (1-based positions, f[ell] = public 1)
    n = ell - 1
    if n == 0:
        return [0, _const_one(session)]
    suf = e[1:]  # positions 2..ell, 0-based
    steps = math.ceil(math.log2(n)) if n > 1 else 0
    for t in range(steps):
        s = 1 << t
        idx = [i for i in range(n) if i + s < n]
        prod = mul_shared_bits(
            session, sub_id, [(suf[i], suf[i + s]) for i in idx]
        )
        for pos, i in enumerate(idx):
            suf[i] = prod[pos]
    f = [0] * (ell + 1)
    f[ell] = _const_one(session)
    for i in range(1, ell):
        f[i] = suf[i - 1]
    return f


def greater_than_const(
    session: Session,
    sub_id: int,
    value_share: int,
    threshold: int,
    variant: str = BASIC,
) -> int:
    """Shared bit of [s > t] for a shared two's-complement s and public t.

    Both values are mapped to unsigned order by adding 2^(ell-1) (Alice
    adds it to her share; t is shifted in the clear), then s > t becomes
    offset(s) >= offset(t) + 1 on the decomposed bits. The constant side
    is shared trivially as (bit, 0).
    """
    ring = session.ring
    lo, hi = -ring.half, ring.half - 1
    if not lo <= threshold < hi:
        raise OutOfRange(f"threshold {threshold} outside [{lo}, {hi})")
    offset_share = value_share
    if session.party is Party.ALICE:
        offset_share = (value_share + ring.half) & ring.mask
    x_bits = decompose_shared(session, sub_id, offset_share, variant)
    const = (threshold + ring.half + 1) & ring.mask
    y_bits = bits_of(const, ring.ell)
    if session.party is not Party.ALICE:
        y_bits = [0] * ring.ell
    return compare_ge_shared(session, sub_id, x_bits, y_bits, variant)
