import math

import pytest
from helpers import Pair, forced_matrix_bundles, split_bits

from blindprofile.errors import (
    DimensionMismatch,
    OutOfRange,
    ProtocolError,
    RoundDesync,
    TripleExhausted,
)
from blindprofile.protocols import (
    compare_ge_shared,
    decompose_shared,
    greater_than_const,
    mul_shared_bits,
    shared_inner_product,
    shared_matmul,
)
from blindprofile.ring import RingParams, bits_of, from_bits, to_signed
from blindprofile.rng import Drbg
from blindprofile.triples import (
    BASIC,
    LOG,
    TripleShape,
    compare_triple_cost,
    decomp_triple_cost,
)


def rec_elems(a, b, mask):
    return [(x + y) & mask for x, y in zip(a, b)]


def rec_bits(a, b):
    if isinstance(a, list):
        return [x ^ y for x, y in zip(a, b)]
    return a ^ b


# --- shared matrix multiplication ---

def test_matmul_hand_example_small_ring():
    # x=4 shared (1,3), y=5 shared (2,3); triple U=7, V=2, W=14 over Z_16
    ring = RingParams(4)
    shape = TripleShape(1, 1, 1)
    bundles = forced_matrix_bundles(ring, shape, [7], [2], [14])
    pair = Pair(ell=4, bundles=bundles)
    za, zb = pair.run(
        lambda s: shared_matmul(s, 0, [1], [2], shape),
        lambda s: shared_matmul(s, 0, [3], [3], shape),
    )
    assert rec_elems(za, zb, ring.mask) == [20 % 16]


def test_matmul_opens_expected_masked_values():
    # same instance: D = x - U = -3 = 13 mod 16, E = y - V = 3
    ring = RingParams(4)
    shape = TripleShape(1, 1, 1)
    bundles = forced_matrix_bundles(ring, shape, [7], [2], [14])
    pair = Pair(ell=4, bundles=bundles, record=True)
    pair.run(
        lambda s: shared_matmul(s, 0, [1], [2], shape),
        lambda s: shared_matmul(s, 0, [3], [3], shape),
    )
    from blindprofile.transport import iter_frames

    sent_a = iter_frames(bytes(pair.alice_chan.sent))
    sent_b = iter_frames(bytes(pair.bob_chan.sent))
    da = int.from_bytes(sent_a[0].payload[9:10], "little")
    db = int.from_bytes(sent_b[0].payload[9:10], "little")
    ea = int.from_bytes(sent_a[0].payload[10:11], "little")
    eb = int.from_bytes(sent_b[0].payload[10:11], "little")
    assert (da + db) % 16 == 13
    assert (ea + eb) % 16 == 3


def test_matmul_zero_matrix():
    pair = Pair(ell=64, shapes=(TripleShape(2, 3, 2),), seed=5)
    rng = Drbg(seed=6)
    y = [rng.element(64) for _ in range(6)]
    ya = [rng.element(64) for _ in range(6)]
    yb = [(v - a) & pair.ring.mask for v, a in zip(y, ya)]
    shape = TripleShape(2, 3, 2)
    za, zb = pair.run(
        lambda s: shared_matmul(s, 0, [0] * 6, ya, shape),
        lambda s: shared_matmul(s, 0, [0] * 6, yb, shape),
    )
    assert rec_elems(za, zb, pair.ring.mask) == [0] * 4


def test_matmul_random_oracle():
    mask = (1 << 64) - 1
    rng = Drbg(seed=77)
    shape = TripleShape(3, 2, 4)
    for trial in range(100):
        pair = Pair(ell=64, shapes=(shape,), seed=1000 + trial)
        x = [rng.element(64) for _ in range(6)]
        y = [rng.element(64) for _ in range(8)]
        xa = [rng.element(64) for _ in range(6)]
        xb = [(v - a) & mask for v, a in zip(x, xa)]
        ya = [rng.element(64) for _ in range(8)]
        yb = [(v - a) & mask for v, a in zip(y, ya)]
        za, zb = pair.run(
            lambda s: shared_matmul(s, 0, xa, ya, shape),
            lambda s: shared_matmul(s, 0, xb, yb, shape),
        )
        expect = [
            sum(x[r * 2 + m] * y[m * 4 + c] for m in range(2)) & mask
            for r in range(3)
            for c in range(4)
        ]
        assert rec_elems(za, zb, mask) == expect


def test_matmul_single_round():
    shape = TripleShape(1, 43, 1)
    pair = Pair(ell=64, shapes=(shape,), seed=9)
    x = list(range(43))
    pair.run(
        lambda s: shared_matmul(s, 0, x, [1] * 43, shape),
        lambda s: shared_matmul(s, 0, [0] * 43, [0] * 43, shape),
    )
    assert pair.alice.round_of(0) == 1
    assert pair.bob.round_of(0) == 1


def test_matmul_dimension_mismatch():
    shape = TripleShape(1, 2, 1)
    pair = Pair(ell=64, shapes=(shape,), seed=3)
    with pytest.raises(DimensionMismatch):
        pair.run(
            lambda s: shared_matmul(s, 0, [1, 2, 3], [1, 2], shape),
            lambda s: None,
        )


def test_triple_exhausted():
    pair = Pair(ell=64, shapes=(), seed=3)
    with pytest.raises(TripleExhausted):
        pair.run(
            lambda s: shared_matmul(s, 0, [1], [1], TripleShape(1, 1, 1)),
            lambda s: None,
        )


# --- inner product ---

def test_inner_product_basis_vector():
    n = 8
    shape = TripleShape(1, n, 1)
    pair = Pair(ell=64, shapes=(shape,), seed=13)
    mask = pair.ring.mask
    c = 123456789
    x = [1] + [0] * (n - 1)
    y = [c] + [7] * (n - 1)
    za, zb = pair.run(
        lambda s: shared_inner_product(s, 0, x, [0] * n),
        lambda s: shared_inner_product(s, 0, [0] * n, y),
    )
    assert (za + zb) & mask == c


def test_inner_product_small():
    shape = TripleShape(1, 2, 1)
    pair = Pair(ell=64, shapes=(shape,), seed=14)
    za, zb = pair.run(
        lambda s: shared_inner_product(s, 0, [2, 3], [0, 0]),
        lambda s: shared_inner_product(s, 0, [0, 0], [4, 5]),
    )
    assert (za + zb) & pair.ring.mask == 23


def test_inner_product_random_43():
    mask = (1 << 64) - 1
    rng = Drbg(seed=15)
    shape = TripleShape(1, 43, 1)
    for trial in range(100):
        pair = Pair(ell=64, shapes=(shape,), seed=2000 + trial)
        x = [rng.element(64) for _ in range(43)]
        y = [rng.element(64) for _ in range(43)]
        za, zb = pair.run(
            lambda s: shared_inner_product(s, 0, x, [0] * 43),
            lambda s: shared_inner_product(s, 0, [0] * 43, y),
        )
        assert (za + zb) & mask == sum(a * b for a, b in zip(x, y)) & mask


# --- batched bit multiplication ---

def test_bit_products_exhaustive():
    rng = Drbg(seed=21)
    for x in (0, 1):
        for y in (0, 1):
            for _ in range(4):
                xa, xb = rng.bit(), 0
                xb = xa ^ x
                ya = rng.bit()
                yb = ya ^ y
                pair = Pair(ell=8, bits=1, seed=rng.element(16))
                za, zb = pair.run(
                    lambda s: mul_shared_bits(s, 0, [(xa, ya)]),
                    lambda s: mul_shared_bits(s, 0, [(xb, yb)]),
                )
                assert rec_bits(za, zb) == [x & y]


def test_bit_products_batch_one_round():
    rng = Drbg(seed=22)
    n = 32
    xs = [rng.bit() for _ in range(n)]
    ys = [rng.bit() for _ in range(n)]
    xa = [rng.bit() for _ in range(n)]
    xb = [a ^ b for a, b in zip(xs, xa)]
    ya = [rng.bit() for _ in range(n)]
    yb = [a ^ b for a, b in zip(ys, ya)]
    pair = Pair(ell=8, bits=n, seed=23)
    za, zb = pair.run(
        lambda s: mul_shared_bits(s, 0, list(zip(xa, ya))),
        lambda s: mul_shared_bits(s, 0, list(zip(xb, yb))),
    )
    assert rec_bits(za, zb) == [a & b for a, b in zip(xs, ys)]
    assert pair.alice.round_of(0) == 1


# --- bit decomposition ---

def run_decomp(pair, share_a, share_b, variant=BASIC):
    return pair.run(
        lambda s: decompose_shared(s, 0, share_a, variant),
        lambda s: decompose_shared(s, 0, share_b, variant),
    )


def test_decompose_hand_trace():
    # shares 3 (011) and 6 (110) over Z_8: value 9 mod 8 = 1 -> bits 1,0,0
    pair = Pair(ell=8, bits=decomp_triple_cost(8), seed=31)
    # use an 8-bit ring but check via a 3-bit instance is not possible
    # through plan gating, so replicate the trace at ell=8 with the same
    # low bits: shares 3 and 6 give value 9 with identical low carries.
    ba, bb = run_decomp(pair, 3, 6)
    assert rec_bits(ba, bb) == bits_of(9, 8)


def test_decompose_small_ring_trace():
    ring = RingParams(3)
    pair = Pair(ell=3, bits=decomp_triple_cost(3), seed=32)
    ba, bb = run_decomp(pair, 3, 6)
    assert rec_bits(ba, bb) == [1, 0, 0]


def test_decompose_zero_share():
    rng = Drbg(seed=33)
    for _ in range(20):
        v = rng.element(8)
        pair = Pair(ell=8, bits=decomp_triple_cost(8), seed=rng.element(32))
        ba, bb = run_decomp(pair, 0, v)
        assert rec_bits(ba, bb) == bits_of(v, 8)


@pytest.mark.parametrize("variant", [BASIC, LOG])
def test_decompose_exhaustive_small(variant):
    ell = 4
    mask = (1 << ell) - 1
    rng = Drbg(seed=34)
    for value in range(1 << ell):
        for _ in range(2):
            a = rng.element(ell)
            b = (value - a) & mask
            pair = Pair(ell=ell, bits=decomp_triple_cost(ell, variant), seed=rng.element(32), variant=variant)
            ba, bb = run_decomp(pair, a, b, variant)
            assert rec_bits(ba, bb) == bits_of(value, ell), (value, a, b, variant)


@pytest.mark.parametrize("variant,rounds", [(BASIC, 8), (LOG, 1 + 3)])
def test_decompose_round_and_triple_counts(variant, rounds):
    ell = 8
    pair = Pair(ell=ell, bits=decomp_triple_cost(ell, variant), seed=35, variant=variant)
    run_decomp(pair, 5, 9, variant)
    assert pair.alice.round_of(0) == rounds
    assert pair.bob.round_of(0) == rounds
    assert pair.alice.bundle.fully_consumed
    assert pair.bob.bundle.fully_consumed


# --- comparison ---

def run_compare(pair, x, y, ell, seed, variant=BASIC):
    rng = Drbg(seed=seed)
    xa, xb = split_bits(x, ell, rng)
    ya, yb = split_bits(y, ell, rng)
    wa, wb = pair.run(
        lambda s: compare_ge_shared(s, 0, xa, ya, variant),
        lambda s: compare_ge_shared(s, 0, xb, yb, variant),
    )
    return wa ^ wb


def test_compare_hand_trace():
    # x=5 (101), y=3 (011): d=(0,1,0), e=(1,0,0), all c_i=0, w=1
    pair = Pair(ell=3, bits=compare_triple_cost(3), seed=41)
    assert run_compare(pair, 5, 3, 3, seed=42) == 1


def test_compare_equal_values():
    pair = Pair(ell=6, bits=compare_triple_cost(6), seed=43)
    assert run_compare(pair, 37, 37, 6, seed=44) == 1


@pytest.mark.parametrize("variant", [BASIC, LOG])
def test_compare_exhaustive_small(variant):
    ell = 3
    rng = Drbg(seed=45)
    for x in range(8):
        for y in range(8):
            pair = Pair(
                ell=8, bits=compare_triple_cost(ell, variant), seed=rng.element(32), variant=variant
            )
            got = run_compare(pair, x, y, ell, seed=rng.element(32), variant=variant)
            assert got == int(x >= y), (x, y, variant)


@pytest.mark.parametrize(
    "variant,max_rounds", [(BASIC, 9), (LOG, 2 + 3)]
)
def test_compare_round_and_triple_counts(variant, max_rounds):
    ell = 8
    pair = Pair(ell=ell, bits=compare_triple_cost(ell, variant), seed=46, variant=variant)
    run_compare(pair, 200, 100, ell, seed=47, variant=variant)
    assert pair.alice.round_of(0) <= max_rounds
    assert pair.alice.bundle.fully_consumed
    assert pair.bob.bundle.fully_consumed


# --- signed comparison against a public constant ---

def svm_bits(ell, variant=BASIC):
    return decomp_triple_cost(ell, variant) + compare_triple_cost(ell, variant)


def run_signed(pair, share_a, share_b, t, variant=BASIC):
    wa, wb = pair.run(
        lambda s: greater_than_const(s, 0, share_a, t, variant),
        lambda s: greater_than_const(s, 0, share_b, t, variant),
    )
    return wa ^ wb


def test_signed_zero_not_greater_than_zero():
    pair = Pair(ell=8, bits=svm_bits(8), seed=51)
    assert run_signed(pair, 0, 0, 0) == 0


def test_signed_one_greater_than_zero():
    pair = Pair(ell=8, bits=svm_bits(8), seed=52)
    assert run_signed(pair, 1, 0, 0) == 1


@pytest.mark.parametrize("variant", [BASIC, LOG])
def test_signed_random_sample(variant):
    ring = RingParams(8)
    rng = Drbg(seed=53)
    for t in (-3, 0, 5):
        for _ in range(24):
            value = rng.element(8)
            a = rng.element(8)
            b = (value - a) & ring.mask
            pair = Pair(ell=8, bits=svm_bits(8, variant), seed=rng.element(32), variant=variant)
            got = run_signed(pair, a, b, t, variant)
            assert got == int(to_signed(value, ring) > t), (value, t, variant)


def test_signed_threshold_range_checked():
    pair = Pair(ell=8, bits=svm_bits(8), seed=54)
    with pytest.raises(OutOfRange):
        pair.run(
            lambda s: greater_than_const(s, 0, 0, 127),
            lambda s: None,
        )


# --- desync detection ---

def test_round_desync_detected():
    pair = Pair(ell=8, bits=4, seed=61)

    def alice(s):
        s.rounds[0] = 1  # pretend a round already happened
        return mul_shared_bits(s, 0, [(1, 0)])

    def bob(s):
        return mul_shared_bits(s, 0, [(0, 1)])

    pair.run(alice, bob, raise_errors=False)
    kinds = {name: type(exc) for name, exc in pair.errors.items()}
    assert kinds.get("bob") is RoundDesync
    assert kinds.get("alice") in (ProtocolError, RoundDesync)
