"""Loopback benchmark: clear vs private full-profile latency.

Self-contained: builds a synthetic nine-model bank, deals bundles in
memory, starts a local server, and times compare-mode sessions. The
report includes the measured private/clear slowdown next to a reference
slowdown of 3x quoted for comparable two-party deployments; nothing is
asserted about their equality.
"""

from __future__ import annotations

from .features import LANDMARK_SCHEMA, TEXT_SCHEMA
from .models import LABEL_VOCABULARY, TASK_ORDER, ModelBank, SvmModel
from .ring import RingParams
from .rng import Drbg
from .server import ServerConfig, start_in_thread
from .transport import MODE_COMPARE
from .triples import BASIC, deal, plan_session

REFERENCE_SLOWDOWN = 3.0

_POSITIVE = {
    "age1": "under-27",
    "age2": "under-35",
    "age3": "44-plus",
    "gender": "female",
}


def synthetic_bank(seed: int = 1, frac_bits: int = 16, bound_bits: int = 24) -> ModelBank:
    rng = Drbg(seed=seed)

    def uniform(lo, hi):
        return lo + (hi - lo) * (rng.element(53) / (1 << 53))

    models = []
    for task in TASK_ORDER:
        landmarks = task in ("age1", "age2", "age3", "gender")
        dim = 136 if landmarks else 43
        positive = _POSITIVE.get(task, "present")
        (negative,) = LABEL_VOCABULARY[task] - {positive}
        models.append(
            SvmModel(
                id=f"bench-{task}",
                task=task,
                dim=dim,
                frac_bits=frac_bits,
                bound_bits=bound_bits,
                schema=LANDMARK_SCHEMA if landmarks else TEXT_SCHEMA,
                positive=positive,
                negative=negative,
                weights=tuple(uniform(-0.5, 0.5) for _ in range(dim)),
                bias=uniform(-0.5, 0.5),
                means=tuple(uniform(-1.0, 1.0) for _ in range(dim)),
                stds=tuple(uniform(0.5, 2.0) for _ in range(dim)),
            )
        )
    return ModelBank(models)


def synthetic_inputs(seed: int = 2) -> tuple[list[float], list[float]]:
    rng = Drbg(seed=seed)
    draw = lambda: (rng.element(53) / (1 << 53)) * 4.0 - 2.0
    return [draw() for _ in range(136)], [draw() for _ in range(43)]


def _stats(samples: list[float]) -> dict:
    ordered = sorted(samples)

    def pct(p):
        return ordered[min(len(ordered) - 1, int(p * (len(ordered) - 1)))]

    return {
        "mean_s": sum(ordered) / len(ordered),
        "p50_s": pct(0.5),
        "p90_s": pct(0.9),
        "min_s": ordered[0],
        "max_s": ordered[-1],
    }


def run_bench(runs: int, ells: list[int], variant: str = BASIC, seed: int = 7) -> dict:
    report = {
        "runs": runs,
        "variant": variant,
        "reference": {
            "slowdown_clear_vs_private": REFERENCE_SLOWDOWN,
            "note": "reference slowdown for comparable two-party deployments; "
            "reported for context, not asserted",
        },
        "results": [],
    }
    if runs <= 0:
        return report
    from .client import ProfileClient

    landmarks, text_vec = synthetic_inputs()
    for ell in ells:
        ring = RingParams(ell)
        # small rings cannot hold a 136-dim inner product without wrapping;
        # those rows measure protocol cost only
        frac = min(16, max(1, ell // 4))
        bound = min(24, ell - 2)
        bank = synthetic_bank(seed=seed, frac_bits=frac, bound_bits=bound)
        server = start_in_thread(
            ServerConfig(bank_dir="", ell=ell, frac_bits=frac, variant=variant), bank=bank
        )
        try:
            plan = plan_session([m.dim for m in bank.models], ring, variant)
            rng = Drbg(seed=seed + ell)
            clear_times, private_times = [], []
            for k in range(runs):
                alice, bob = deal(plan, rng)
                server.pool.add(k, bob)
                client = ProfileClient(
                    mode=MODE_COMPARE, ell=ell, frac_bits=frac, variant=variant
                )
                client.bundle = alice
                client.pair_id = k
                outcome = client.run_tcp("127.0.0.1", server.config.port, landmarks, text_vec)
                clear_times.append(outcome.clear_seconds)
                private_times.append(outcome.private_seconds)
            entry = {
                "ell": ell,
                "clear": _stats(clear_times),
                "private": _stats(private_times),
            }
            entry["slowdown_private_over_clear"] = (
                entry["private"]["mean_s"] / max(entry["clear"]["mean_s"], 1e-9)
            )
            report["results"].append(entry)
        finally:
            server.stop()
    return report
