"""Shared test machinery: an in-process two-party harness."""

from __future__ import annotations

import threading

from blindprofile.ring import Party, RingParams
from blindprofile.rng import Drbg
from blindprofile.transport import (
    InMemoryChannel,
    RecordingChannel,
    Session,
    make_memory_pair,
)
from blindprofile.triples import BASIC, Bundle, SessionPlan, TripleShape, deal


class Pair:
    """Two linked sessions over an in-memory channel pair.

    Either pass explicit bundles or let the constructor deal a fresh pair
    for the given shapes and bit-triple count.
    """

    def __init__(
        self,
        ell: int = 64,
        shapes: tuple = (),
        bits: int = 0,
        seed: int = 1,
        variant: str = BASIC,
        record: bool = False,
        bundles: tuple[Bundle, Bundle] | None = None,
    ):
        self.ring = RingParams(ell)
        if bundles is None:
            plan = SessionPlan(
                ring=self.ring,
                variant=variant,
                shapes=tuple(shapes),
                bit_count=bits,
            )
            bundles = deal(plan, Drbg(seed=seed))
        ca, cb = make_memory_pair()
        if record:
            ca, cb = RecordingChannel(ca), RecordingChannel(cb)
        self.alice_chan, self.bob_chan = ca, cb
        self.alice = Session(channel=ca, party=Party.ALICE, ring=self.ring, bundle=bundles[0])
        self.bob = Session(channel=cb, party=Party.BOB, ring=self.ring, bundle=bundles[1])
        self.errors: dict[str, BaseException] = {}

    def run(self, alice_fn, bob_fn, raise_errors: bool = True):
        results: dict[str, object] = {}
        errors: dict[str, BaseException] = {}

        def wrap(name, fn, session, chan):
            try:
                results[name] = fn(session)
            except BaseException as exc:  # noqa: BLE001 - reported to the test
                errors[name] = exc
                chan.close()

        t = threading.Thread(
            target=wrap, args=("bob", bob_fn, self.bob, self.bob_chan), daemon=True
        )
        t.start()
        wrap("alice", alice_fn, self.alice, self.alice_chan)
        t.join(timeout=120)
        self.errors = errors
        if raise_errors and errors:
            raise errors.get("alice") or errors.get("bob")
        return results.get("alice"), results.get("bob")


def forced_matrix_bundles(ring, shape, u, v, w):
    """Bundles holding exactly one matrix triple with chosen values;
    Alice's share carries the value, Bob's share is zero."""
    from blindprofile.triples import MatrixTripleShare

    zeros = lambda vals: [0] * len(vals)
    a = Bundle(Party.ALICE, ring, matrix=[MatrixTripleShare(shape, list(u), list(v), list(w))])
    b = Bundle(Party.BOB, ring, matrix=[MatrixTripleShare(shape, zeros(u), zeros(v), zeros(w))])
    return a, b


def split_bits(value: int, ell: int, rng: Drbg) -> tuple[list[int], list[int]]:
    """Random XOR sharing of each bit of value (LSB first)."""
    from blindprofile.ring import bits_of

    bits = bits_of(value, ell)
    a = [rng.bit() for _ in range(ell)]
    b = [x ^ y for x, y in zip(bits, a)]
    return a, b


def profile_pair(bank, ell=64, seed=1, variant=BASIC, record=False):
    """Pair provisioned for a full profile over the given bank, plus the
    catalog entries a client would receive in the handshake."""
    from blindprofile.ring import RingParams
    from blindprofile.svm import parse_catalog
    from blindprofile.triples import plan_session

    dims = [m.dim for m in bank.models]
    plan = plan_session(dims, RingParams(ell), variant)
    bundles = deal(plan, Drbg(seed=seed))
    pair = Pair(ell=ell, bundles=bundles, record=record, variant=variant)
    catalog = parse_catalog(bank.catalog_bytes())
    return pair, catalog


def analyze_profile_transcript(client_sent: bytes, server_sent: bytes, ell, dims, variant=BASIC):
    """Whitelist check over a recorded private-profile transcript.

    Every frame must be an expected masked opening, an allowed result
    share, or a BYE; anything else fails the session's privacy contract.
    Returns per-direction RESULT placement for the selective-opening
    assertions.
    """
    from blindprofile.transport import BYE, OPEN, OPEN_BITS, OPEN_RING, RESULT, iter_frames
    from blindprofile.triples import compare_triple_cost, decomp_triple_cost
    import struct

    per_svm_bits = 2 * (decomp_triple_cost(ell, variant) + compare_triple_cost(ell, variant))
    report = {"client_results": [], "server_results": []}
    for label, stream in (("client", client_sent), ("server", server_sent)):
        opens_ring = {}
        opens_bits = {}
        rounds_seen = {}
        byes = 0
        for frame in iter_frames(stream):
            if frame.ftype == BYE:
                byes += 1
                continue
            if frame.ftype == RESULT:
                assert len(frame.payload) == 1
                report[f"{label}_results"].append(frame.sub_id)
                continue
            assert frame.ftype == OPEN, f"unexpected frame type 0x{frame.ftype:02x}"
            rnd, kind, count = struct.unpack_from(">IBI", frame.payload)
            seq = rounds_seen.setdefault(frame.sub_id, [])
            assert rnd == len(seq), "rounds must be sequential per sub-session"
            seq.append(rnd)
            if kind == OPEN_RING:
                opens_ring[frame.sub_id] = opens_ring.get(frame.sub_id, 0) + count
            else:
                assert kind == OPEN_BITS
                opens_bits[frame.sub_id] = opens_bits.get(frame.sub_id, 0) + count
        assert byes == 1, f"{label} must send exactly one BYE"
        for sub, dim in enumerate(dims):
            assert opens_ring.get(sub) == 2 * dim, (
                f"{label} sub {sub}: ring openings {opens_ring.get(sub)} != {2 * dim}"
            )
            assert opens_bits.get(sub) == per_svm_bits, (
                f"{label} sub {sub}: bit openings {opens_bits.get(sub)} != {per_svm_bits}"
            )
        assert set(opens_ring) == set(range(len(dims)))
    return report
