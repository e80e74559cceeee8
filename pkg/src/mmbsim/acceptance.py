"""The acceptance suite: eleven executable criteria with fixed tolerances.

Each ``criterion_N`` returns a :class:`CriterionResult`; ``seeds`` and
similar arguments default to the full-scale values and may be reduced for
quick smoke runs.  The same functions back ``tests/test_acceptance.py`` and
``mmbsim bench criterion-NN``.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .adversary import crossing_lower_bound, eager_contrast, run_lower_bound, star_lower_bound
from .bmmb import assert_arbitrary_bound, assert_r_restricted_bound, bmmb_automata, t_bound
from .checker import check, progress_nodes, progress_oracle
from .engine import run
from .experiments import RunConfig, bench, execute, load_sweep
from .faults import FAULTS, base_trace, inject
from .fmmb import FmmbParams, gather, mis, fmmb_run, round_budget, verify_mis
from .graph import make_grey_zone, make_random_dual, metrics, restrict_to_power
from .rational import fmt_time
from .rounds import SpitefulAdversary, lower_to_trace
from .schedulers import SCHEDULERS, RandomScheduler, make_scheduler
from .trace import ENHANCED, EngineConfig

CFG = EngineConfig(8, 1)
ENH = EngineConfig(8, 1, model=ENHANCED)


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    summary: str
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.number:2d} {self.title}: {self.summary}"


def grey_zone_side(n: int) -> float:
    """Square side giving the same density as 100 nodes on a 7 x 7 square."""
    return 7.0 * math.sqrt(n / 100)


def singleton_arrivals(n: int, k: int, seed) -> dict[int, list]:
    nodes = random.Random(f"{seed}/arrivals").sample(range(n), k)
    return {v: [i] for i, v in enumerate(nodes)}


# 1 ---------------------------------------------------------------------------


def criterion_1(seeds: int = 10) -> CriterionResult:
    budget = t_bound(63, 8, 1, CFG) + CFG.f_ack
    worst, bad = Fraction(0), []
    base = RunConfig(graph="line", n=64, k=8, arrivals="prefix", scheduler="eager")
    for seed in range(seeds):
        res = execute(base.replace(seed=seed))
        t = Fraction(res.row["completion_time"]) if res.row["completion_time"] else None
        if t is None or t > budget or res.row["checker_violations"]:
            bad.append(seed)
        else:
            worst = max(worst, t)
    return CriterionResult(1, "BMMB r=1 budget on line(64)", not bad,
                           f"max completion {fmt_time(worst)} <= {fmt_time(budget)} over {seeds} seeds"
                           + (f"; failing seeds {bad}" if bad else ""),
                           {"budget": fmt_time(budget), "max": fmt_time(worst), "failing": bad})


# 2, 3 ------------------------------------------------------------------------


def _random_case(seed: int):
    rng = random.Random(f"{seed}/case")
    n = rng.randint(8, 64)
    g = make_random_dual(n, p_edge=rng.uniform(2.0, 4.0) / n, p_extra=rng.uniform(0.02, 0.2), seed=seed)
    k = rng.randint(1, min(8, n))
    return g, singleton_arrivals(n, k, seed)


def criterion_2(seeds: int = 50) -> CriterionResult:
    cex = dirty = checked = 0
    for seed in range(seeds):
        g, arr = _random_case(seed)
        tr = run(g, bmmb_automata(g.n), RandomScheduler(), CFG, arr, seed=seed)
        rep = assert_arbitrary_bound(tr, g, CFG)
        checked += rep.checked
        cex += len(rep.counterexamples)
        dirty += not check(tr, g, CFG).ok
    return CriterionResult(2, "BMMB arbitrary-G' key claim", cex == 0 and dirty == 0,
                           f"{cex} counterexamples over {checked} checks, {dirty} unclean traces, {seeds} seeds",
                           {"counterexamples": cex, "unclean": dirty, "checked": checked})


def criterion_3(seeds: int = 50) -> CriterionResult:
    cex = checked = dirty = 0
    for seed in range(seeds):
        rng = random.Random(f"{seed}/case")
        n = rng.randint(20, 64)
        g = restrict_to_power(make_grey_zone(n, c=2.0, side=grey_zone_side(n), p_link=0.5, seed=seed), 2)
        arr = singleton_arrivals(n, rng.randint(1, 8), seed)
        tr = run(g, bmmb_automata(g.n), RandomScheduler(), CFG, arr, seed=seed)
        rep = assert_r_restricted_bound(tr, g, CFG, 2)
        checked += rep.checked
        cex += len(rep.counterexamples)
        dirty += not check(tr, g, CFG).ok
    return CriterionResult(3, "BMMB r-restricted bound (r=2)", cex == 0 and dirty == 0,
                           f"{cex} counterexamples over {checked} checks, {dirty} unclean traces, {seeds} seeds",
                           {"counterexamples": cex, "unclean": dirty, "checked": checked})


# 4, 5 ------------------------------------------------------------------------


def criterion_4(k: int = 32, seeds: int = 3) -> CriterionResult:
    setup = star_lower_bound(k, CFG)
    certs, ok = [], True
    for seed in range(seeds):
        lb = run_lower_bound(setup, seed)
        cert = lb.certificate()
        cert["checker_clean"] = check(lb.trace, setup.graph, CFG).ok
        ok &= cert["holds"] and cert["checker_clean"]
        certs.append(cert)
    return CriterionResult(4, f"star lower bound k={k}", ok,
                           f"measured {certs[0]['measured']} >= floor {certs[0]['floor']}, "
                           f"checker-clean={all(c['checker_clean'] for c in certs)} ({seeds} seeds)",
                           {"certificates": certs})


def criterion_5(d: int = 40, seeds: int = 3) -> CriterionResult:
    setup = crossing_lower_bound(d, CFG)
    contrast_budget = 2 * (d * CFG.f_prog + CFG.f_ack)
    certs, ok = [], True
    for seed in range(seeds):
        lb = run_lower_bound(setup, seed)
        cert = lb.certificate()
        cert["checker_clean"] = check(lb.trace, setup.graph, CFG).ok
        eager = eager_contrast(setup, seed)
        cert["eager"] = None if eager.measured is None else fmt_time(eager.measured)
        cert["eager_ok"] = eager.measured is not None and eager.measured <= contrast_budget
        ok &= cert["holds"] and cert["checker_clean"] and cert["eager_ok"]
        certs.append(cert)
    c = certs[0]
    return CriterionResult(5, f"crossing lower bound d={d}", ok,
                           f"measured {c['measured']} >= floor {c['floor']}, checker-clean={c['checker_clean']}; "
                           f"eager contrast {c['eager']} <= {fmt_time(contrast_budget)} ({seeds} seeds)",
                           {"certificates": certs})


# 6, 7 ------------------------------------------------------------------------


def criterion_6(seeds: int = 100) -> CriterionResult:
    missed = []
    for kind in FAULTS:
        for seed in range(5):
            if kind not in check(inject(kind, seed)).counts():
                missed.append((kind, seed))
    dirty = []
    for seed in range(seeds):
        rng = random.Random(f"{seed}/clean")
        n = rng.randint(8, 40)
        g = make_random_dual(n, 3.0 / n, 0.1, seed=seed)
        arr = singleton_arrivals(n, rng.randint(1, 4), seed)
        for name in SCHEDULERS:
            tr = run(g, bmmb_automata(n), make_scheduler(name), CFG, arr, seed=seed)
            if not check(tr, g, CFG).ok:
                dirty.append((name, seed))
    ok = not missed and not dirty
    return CriterionResult(6, "checker mutation suite", ok,
                           f"{len(FAULTS)} fault kinds x 5 seeds, missed {len(missed)}; "
                           f"{len(dirty)} unclean of {seeds * len(SCHEDULERS)} clean scheduler traces",
                           {"missed": missed, "unclean": dirty})


def random_small_trace(seed: int, max_events: int = 200):
    """A random BMMB trace with some receptions removed (at most ``max_events`` events)."""
    rng = random.Random(f"{seed}/oracle")
    while True:
        n = rng.randint(3, 8)
        g = make_random_dual(n, rng.uniform(0.3, 0.7), rng.uniform(0.0, 0.5), seed=rng.randrange(10**6))
        cfg = EngineConfig(Fraction(rng.randint(2, 8), rng.choice([1, 2])), Fraction(1, rng.choice([1, 2, 3])))
        arr = singleton_arrivals(n, rng.randint(1, min(3, n)), rng.randrange(10**6))
        tr = run(g, bmmb_automata(n), RandomScheduler(grid=rng.choice([4, 8, 16])), cfg, arr,
                 seed=rng.randrange(10**6))
        if len(tr.events) > max_events:
            continue
        p = rng.choice([0.0, 0.2, 0.5])
        events = [ev for ev in tr.events if not (ev.kind == "rcv" and rng.random() < p)]
        tr.events = events
        return tr, g, cfg


def criterion_7(traces: int = 50) -> CriterionResult:
    mismatches, violating, total = [], 0, 0
    for seed in range(traces):
        tr, g, cfg = random_small_trace(seed)
        for strict in (False, True):
            got = progress_nodes(check(tr, g, cfg, strict=strict))
            want = progress_oracle(tr, g, cfg, strict=strict)
            total += 1
            violating += bool(want)
            if got != want:
                mismatches.append((seed, strict, sorted(got), sorted(want)))
    return CriterionResult(7, "checker progress verdict vs brute-force oracle", not mismatches,
                           f"{len(mismatches)} mismatches over {total} verdicts "
                           f"({traces} traces x 2 readings; {violating} with violations)",
                           {"mismatches": mismatches, "violating": violating})


# 8, 9, 10 --------------------------------------------------------------------


def _fmmb_graph(n: int, seed, connected: bool = False):
    return make_grey_zone(n, c=1.5, side=grey_zone_side(n), p_link=0.5, connected=connected, seed=seed)


def mis_and_gather(sizes=(50, 100, 200), seeds: int = 100, k: int = 10) -> dict:
    """Shared runs for criteria 8 and 9: per size, MIS validity and gather ownership counts."""
    params = FmmbParams(c=1.5)
    out = {}
    for n in sizes:
        mis_ok = gather_ok = 0
        for seed in range(seeds):
            g = _fmmb_graph(n, seed)
            m = mis(g, params, SpitefulAdversary(), seed=seed, record=False)
            valid, _ = verify_mis(g, m.members)
            mis_ok += valid
            if not valid:
                continue
            arr = singleton_arrivals(n, k, seed)
            gr = gather(g, m.members, arr, params, SpitefulAdversary(), seed=seed, start=m.rounds,
                        record=False)
            gather_ok += gr.owned_by_mis(m.members) == set(range(k))
        out[n] = {"mis_valid": mis_ok, "gather_owned": gather_ok, "runs": seeds}
    return out


def criterion_8(shared: dict | None = None, seeds: int = 100) -> CriterionResult:
    shared = shared or mis_and_gather(seeds=seeds)
    need = math.ceil(0.99 * seeds)
    ok = all(v["mis_valid"] >= need for v in shared.values())
    return CriterionResult(8, "FMMB MIS validity (grey zone, spiteful)", ok,
                           ", ".join(f"n={n}: {v['mis_valid']}/{v['runs']}" for n, v in shared.items())
                           + f" (need >= {need})", {"per_n": shared})


def criterion_9(shared: dict | None = None, seeds: int = 100) -> CriterionResult:
    shared = shared or mis_and_gather(seeds=seeds)
    need = math.ceil(0.99 * seeds)
    ok = all(v["gather_owned"] >= need for v in shared.values())
    return CriterionResult(9, "FMMB gather ownership, k=10", ok,
                           ", ".join(f"n={n}: {v['gather_owned']}/{v['runs']}" for n, v in shared.items())
                           + f" (need >= {need})", {"per_n": shared})


def criterion_10(seeds: int = 100, lowered: int = 20, n: int = 100, k: int = 8) -> CriterionResult:
    good, dirty, worst = 0, [], 0.0
    for seed in range(seeds):
        g = _fmmb_graph(n, seed, connected=True)
        D = metrics(g).diameter_g
        res = fmmb_run(g, singleton_arrivals(n, k, seed), FmmbParams(c=1.5), SpitefulAdversary(),
                       seed=seed, record=seed < lowered)
        budget = round_budget(n, D, k)
        worst = max(worst, res.rounds / budget)
        good += res.complete and res.rounds <= budget
        if seed < lowered:
            tr = lower_to_trace(res.round_trace(), ENH, g)
            if not check(tr, g, ENH).ok:
                dirty.append(seed)
    need = math.ceil(0.99 * seeds)
    ok = good >= need and not dirty
    return CriterionResult(10, f"FMMB end-to-end n={n}, k={k}", ok,
                           f"{good}/{seeds} complete within budget (need >= {need}), worst rounds/budget "
                           f"{worst:.2f}; {len(dirty)} unclean of {min(lowered, seeds)} lowered traces",
                           {"complete": good, "unclean": dirty, "worst_ratio": worst})


# 11 --------------------------------------------------------------------------


SLOPE_SWEEPS = ("star-sweep", "crossing-sweep", "line-sweep")


def criterion_11(workers: int = 1) -> CriterionResult:
    parts, ok, detail = [], True, {}
    for name in SLOPE_SWEEPS:
        s = bench(load_sweep(name), workers=workers)
        detail[name] = {"slope": s.get("slope"), "expected": s.get("expected_slope"),
                        "slope_ok": s.get("slope_ok"), "ok": s["ok"]}
        ok &= bool(s["ok"])
        parts.append(f"{name} slope {s['slope']:.3f} (expect {s['expected_slope']:g} +/-25%)")
    return CriterionResult(11, "scaling shape", ok, "; ".join(parts), detail)


CRITERIA: dict[int, Callable[..., CriterionResult]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5, 6: criterion_6,
    7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10, 11: criterion_11,
}


def run_criterion(number: int, **kwargs) -> CriterionResult:
    return CRITERIA[number](**kwargs)
