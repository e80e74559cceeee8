"""Run configuration, single-run execution and parameter sweeps.

A run is described by a flat JSON object (see :class:`RunConfig`); times are
``"num/den"`` strings.  :func:`execute` builds the graph and arrivals, runs
BMMB or FMMB, validates the result and returns a metrics row.  :func:`bench`
expands a sweep spec into runs, aggregates per cell and fits slopes.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from . import graph as gmod
from .adversary import CrossingScheduler, measure_completion
from .bmmb import assert_arbitrary_bound, assert_r_restricted_bound, bmmb_automata, t_bound
from .checker import check
from .engine import run
from .errors import InvalidParameter, PreconditionViolation
from .fmmb import FmmbParams, fmmb_run, round_budget
from .graph import DualGraph, metrics
from .rational import as_time, fmt_time
from .rounds import lower_to_trace, make_adversary
from .schedulers import make_scheduler
from .trace import ENHANCED, STANDARD, EngineConfig, Trace

METRIC_COLUMNS = [
    "n", "D", "components", "k", "r-or-c", "algorithm", "scheduler", "seed",
    "completion_time", "rounds", "checker_violations", "assertion_failures",
]

GENERATORS = ("line", "star", "double-line", "grey-zone", "random", "file")


@dataclass
class RunConfig:
    """Flat run description; every field maps to one JSON key."""

    model: str = STANDARD
    graph: str = "line"
    n: int = 8
    d: int = 2
    c: float = 1.5
    side: float | None = None
    p_link: float = 0.5
    p_edge: float = 0.1
    p_extra: float = 0.1
    connected: bool = False
    restrict_r: int | None = None
    graph_seed: int | None = None
    graph_file: str | None = None
    algorithm: str = "bmmb"
    scheduler: str = "eager"
    adversary: str = "spiteful"
    f_ack: str = "8"
    f_prog: str = "1"
    eps_abort: str = "0"
    k: int = 1
    arrivals: Any = "prefix"
    seed: int = 0
    horizon: str | None = None
    check: bool = True
    strict_progress: bool = False
    assert_arbitrary: bool = False
    assert_r: int | None = None
    fmmb_A: float | None = None
    fmmb_B: float | None = None
    fmmb_Cg: float | None = None
    fmmb_Cs: float | None = None
    trace_out: str | None = None
    metrics_out: str | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise InvalidParameter(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "RunConfig":
        cfg = dataclasses.replace(self, **changes)
        cfg.validate()
        return cfg

    def engine_config(self) -> EngineConfig:
        return EngineConfig(self.f_ack, self.f_prog, self.eps_abort, self.model)

    def validate(self) -> None:
        if self.graph not in GENERATORS:
            raise InvalidParameter(f"unknown graph generator {self.graph!r}")
        if self.algorithm not in ("bmmb", "fmmb"):
            raise InvalidParameter(f"unknown algorithm {self.algorithm!r}")
        if self.algorithm == "fmmb" and self.model != ENHANCED:
            raise InvalidParameter("fmmb requires the enhanced model")
        if self.graph == "file" and not self.graph_file:
            raise InvalidParameter("graph 'file' needs graph_file")
        if self.k < 0:
            raise InvalidParameter("k must be >= 0")
        self.engine_config()

    def fmmb_params(self) -> FmmbParams:
        overrides = {name: getattr(self, f"fmmb_{name}") for name in ("A", "B", "Cg", "Cs")}
        return FmmbParams(c=self.c, **{k: v for k, v in overrides.items() if v is not None})


def build_graph(cfg: RunConfig) -> DualGraph:
    seed = cfg.seed if cfg.graph_seed is None else cfg.graph_seed
    if cfg.graph == "line":
        g = gmod.make_line(cfg.n)
    elif cfg.graph == "star":
        g = gmod.make_star_bridge(cfg.k if cfg.k >= 2 else cfg.n)
    elif cfg.graph == "double-line":
        g = gmod.make_double_line(cfg.d)
    elif cfg.graph == "grey-zone":
        side = cfg.side if cfg.side is not None else 7.0 * math.sqrt(cfg.n / 100)
        g = gmod.make_grey_zone(cfg.n, c=cfg.c, side=side, p_link=cfg.p_link,
                                connected=cfg.connected, seed=seed)
    elif cfg.graph == "random":
        g = gmod.make_random_dual(cfg.n, cfg.p_edge, cfg.p_extra, connected=cfg.connected, seed=seed)
    else:
        g = gmod.read_graph(cfg.graph_file)
    if cfg.restrict_r is not None:
        g = gmod.restrict_to_power(g, cfg.restrict_r)
    return g


def make_arrivals(cfg: RunConfig, g: DualGraph) -> dict[int, list]:
    """Message ``i`` for ``i < k`` placed per ``cfg.arrivals``.

    ``"prefix"``: at vertex ``i``; ``"origin"``: all at vertex 0;
    ``"random-singletons"``: at ``k`` distinct random vertices; a mapping
    ``{vertex: [payloads]}`` is used as given.
    """
    mode = cfg.arrivals
    if isinstance(mode, dict):
        return {int(v): list(ms) for v, ms in mode.items()}
    if cfg.graph == "star":
        return {i: [i] for i in range(g.n - 1)}
    if cfg.graph == "double-line":
        return {0: [0], cfg.d: [1]}
    k = cfg.k
    if k > g.n and mode != "origin":
        raise InvalidParameter(f"k={k} singleton messages need at least k vertices (n={g.n})")
    if mode == "prefix":
        return {i: [i] for i in range(k)}
    if mode == "origin":
        return {0: list(range(k))} if k else {}
    if mode == "random-singletons":
        nodes = random.Random(f"{cfg.seed}/arrivals").sample(range(g.n), k)
        return {v: [i] for i, v in enumerate(nodes)}
    raise InvalidParameter(f"unknown arrival mode {mode!r}")


@dataclass
class RunResult:
    config: RunConfig
    graph: DualGraph
    row: dict
    trace: Trace | None = None
    reports: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.row["checker_violations"] in (0, "") and self.row["assertion_failures"] in (0, "")


def execute(cfg: RunConfig, keep_trace: bool = True) -> RunResult:
    """One run: build, execute, validate, and summarize as a metrics row."""
    cfg.validate()
    g = build_graph(cfg)
    ecfg = cfg.engine_config()
    arrivals = make_arrivals(cfg, g)
    k = sum(len(ms) for ms in arrivals.values())
    gm = metrics(g)
    row = {
        "n": g.n, "D": gm.diameter_g, "components": len(gm.components), "k": k,
        "r-or-c": cfg.assert_r if cfg.assert_r is not None else (cfg.c if cfg.graph == "grey-zone" else ""),
        "algorithm": cfg.algorithm, "seed": cfg.seed,
    }
    reports: dict = {}
    if cfg.algorithm == "bmmb":
        if cfg.graph == "double-line" and cfg.scheduler == "crossing":
            sched = CrossingScheduler(cfg.d)
        else:
            sched = make_scheduler(cfg.scheduler)
        horizon = None if cfg.horizon is None else as_time(cfg.horizon)
        trace = run(g, bmmb_automata(g.n), sched, ecfg, arrivals, horizon=horizon, seed=cfg.seed)
        comp = measure_completion(trace, g).overall
        row.update(scheduler=sched.name, completion_time="" if comp is None else fmt_time(comp), rounds="")
        failures = 0
        if cfg.assert_arbitrary:
            rep = assert_arbitrary_bound(trace, g, ecfg)
            reports["arbitrary-bound"] = rep.to_dict()
            failures += len(rep.counterexamples)
        if cfg.assert_r is not None:
            rep = assert_r_restricted_bound(trace, g, ecfg, cfg.assert_r)
            reports["r-restricted-bound"] = rep.to_dict()
            failures += len(rep.counterexamples)
        row["assertion_failures"] = failures
    else:
        res = fmmb_run(g, arrivals, cfg.fmmb_params(), make_adversary(cfg.adversary), seed=cfg.seed,
                       record=cfg.check)
        trace = lower_to_trace(res.round_trace(), ecfg, g) if cfg.check else None
        budget = round_budget(g.n, gm.diameter_g, k)
        reports["fmmb"] = {
            "complete": res.complete, "rounds": res.rounds, "stage_rounds": res.stage_rounds,
            "mis_size": len(res.mis), "overlay_diameter": res.overlay_diameter, "round_budget": budget,
        }
        row.update(scheduler=cfg.adversary, rounds=res.rounds,
                   completion_time=fmt_time(res.rounds * ecfg.f_prog) if res.complete else "",
                   assertion_failures=int(not res.complete) + int(res.rounds > budget))
    if cfg.check and trace is not None:
        rep = check(trace, g, trace.config, strict=cfg.strict_progress)
        reports["checker"] = rep.to_dict()
        row["checker_violations"] = len(rep.violations)
    else:
        row["checker_violations"] = ""
    if cfg.trace_out and trace is not None:
        trace.write_jsonl(cfg.trace_out)
    if cfg.metrics_out:
        append_rows(cfg.metrics_out, [row])
    return RunResult(cfg, g, row, trace if keep_trace else None, reports)


def append_rows(path: str | Path, rows: list[dict]) -> None:
    path = Path(path)
    new = not path.exists() or path.stat().st_size == 0
    with path.open("a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=METRIC_COLUMNS, extrasaction="ignore")
        if new:
            w.writeheader()
        w.writerows(rows)


# -- sweeps ------------------------------------------------------------------


SWEEP_DIR = Path(__file__).parent / "sweeps"


def load_sweep(name_or_path: str) -> dict:
    p = Path(name_or_path)
    if not p.exists():
        p = SWEEP_DIR / (name_or_path if name_or_path.endswith(".json") else f"{name_or_path}.json")
    if not p.exists():
        raise FileNotFoundError(f"no sweep spec {name_or_path!r}")
    return json.loads(p.read_text())


def shipped_sweeps() -> list[str]:
    return sorted(p.stem for p in SWEEP_DIR.glob("*.json"))


def _grid(spec: dict) -> list[dict]:
    cells = [{}]
    for key, values in spec.get("grid", {}).items():
        cells = [{**c, key: v} for c in cells for v in values]
    return cells


def _seeds(spec: dict) -> list[int]:
    s = spec.get("seeds", 1)
    return list(range(s)) if isinstance(s, int) else list(s)


def _run_cell(args) -> dict:
    cell_cfg, x_key = args
    try:
        res = execute(RunConfig.from_dict(cell_cfg), keep_trace=False)
        row = dict(res.row)
        row["error"] = ""
    except Exception as exc:  # recorded per cell; the sweep continues
        row = {c: "" for c in METRIC_COLUMNS}
        row.update(seed=cell_cfg.get("seed", 0), error=f"{type(exc).__name__}: {exc}")
    row["x"] = row.get(x_key, cell_cfg.get(x_key, "")) if x_key else ""
    row["cell"] = json.dumps({k: cell_cfg[k] for k in sorted(cell_cfg) if k in cell_cfg.get("_grid", ())})
    return row


def fit_slope(xs, ys) -> float | None:
    if len(set(xs)) < 2:
        return None
    slope, _ = np.polyfit(np.asarray(xs, float), np.asarray(ys, float), 1)
    return float(slope)


def _value(row: dict) -> float | None:
    v = row.get("completion_time")
    return float(Fraction(v)) if v not in ("", None) else None


def _budget_ok(bound: str | None, row: dict, cfg: dict) -> bool | None:
    if not bound or row.get("error"):
        return None if not bound else False
    value = _value(row)
    ecfg = EngineConfig(cfg.get("f_ack", "8"), cfg.get("f_prog", "1"))
    if bound == "bmmb-r1":
        limit = t_bound(int(row["D"]), max(1, int(row["k"])), 1, ecfg) + ecfg.f_ack
        return value is not None and value <= limit
    if bound == "fmmb-rounds":
        return value is not None and int(row["rounds"]) <= round_budget(int(row["n"]), int(row["D"]), int(row["k"]))
    if bound == "star-floor":
        return value is not None and value >= (int(row["k"]) - 1) * ecfg.f_ack
    if bound == "crossing-floor":
        return value is not None and value >= (int(cfg["d"]) - 2) * ecfg.f_ack
    raise InvalidParameter(f"unknown bound {bound!r}")


def bench(spec: dict, workers: int = 1, out_dir: str | Path | None = None) -> dict:
    """Run a sweep; returns (and optionally writes) per-cell summaries and a slope fit.

    Spec keys: ``name``; ``base`` (RunConfig keys); ``grid`` (key -> list);
    ``seeds`` (count or list); optional ``x`` (metrics column or config key
    to regress completion on), ``expected_slope`` ("num/den"),
    ``tolerance`` (relative) and ``bound`` (per-run budget to test:
    bmmb-r1, fmmb-rounds, star-floor, crossing-floor).
    """
    if "criterion" in spec:
        return _bench_criterion(spec, workers, out_dir)
    base = dict(spec.get("base", {}))
    grid_keys = tuple(spec.get("grid", {}))
    x_key = spec.get("x")
    jobs = []
    for cell in _grid(spec):
        for seed in _seeds(spec):
            cfg = {**base, **cell, "seed": seed, "_grid": grid_keys}
            jobs.append(cfg)
    clean = [({k: v for k, v in j.items() if k != "_grid"}, x_key) for j in jobs]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_cell, clean))
    else:
        rows = [_run_cell(a) for a in clean]
    for row, job in zip(rows, jobs):
        row["cell"] = json.dumps({k: job[k] for k in grid_keys})
        row["budget_ok"] = _budget_ok(spec.get("bound"), row, job)

    cells: dict[str, dict] = {}
    for row in rows:
        c = cells.setdefault(row["cell"], {"cell": json.loads(row["cell"]), "runs": 0, "errors": 0,
                                           "values": [], "violations": 0, "assertion_failures": 0,
                                           "budget_failures": 0, "x": row["x"]})
        c["runs"] += 1
        if row.get("error"):
            c["errors"] += 1
        v = _value(row)
        if v is not None:
            c["values"].append(v)
        c["violations"] += int(row["checker_violations"] or 0)
        c["assertion_failures"] += int(row["assertion_failures"] or 0)
        c["budget_failures"] += int(row["budget_ok"] is False)
    summary_cells = []
    for c in cells.values():
        vals = c.pop("values")
        c["mean_completion"] = float(np.mean(vals)) if vals else None
        c["completed_runs"] = len(vals)
        summary_cells.append(c)

    summary = {"name": spec.get("name", "sweep"), "runs": len(rows), "cells": summary_cells}
    if x_key:
        pts = [(float(c["x"]), c["mean_completion"]) for c in summary_cells
               if c["mean_completion"] is not None and c["x"] not in ("", None)]
        slope = fit_slope([p[0] for p in pts], [p[1] for p in pts])
        summary["slope"] = slope
        if "expected_slope" in spec and slope is not None:
            expected = float(Fraction(spec["expected_slope"]))
            tol = float(spec.get("tolerance", 0.25))
            summary["expected_slope"] = expected
            summary["slope_ok"] = abs(slope - expected) <= tol * expected
    summary["ok"] = (
        all(c["errors"] == 0 and c["violations"] == 0 and c["assertion_failures"] == 0
            and c["budget_failures"] == 0 for c in summary_cells)
        and summary.get("slope_ok", True)
    )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with (out / "metrics.csv").open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=METRIC_COLUMNS + ["x", "cell", "budget_ok", "error"],
                               extrasaction="ignore")
            w.writeheader()
            w.writerows(rows)
        (out / "summary.json").write_text(json.dumps(summary, indent=2))
    summary["rows"] = rows
    return summary


def _bench_criterion(spec: dict, workers: int, out_dir) -> dict:
    """A sweep spec naming an acceptance criterion runs that criterion."""
    from .acceptance import run_criterion

    args = dict(spec.get("args", {}))
    if spec["criterion"] == 11:
        args.setdefault("workers", workers)
    res = run_criterion(int(spec["criterion"]), **args)
    summary = {"name": spec.get("name", f"criterion-{res.number:02d}"), "criterion": res.number,
               "title": res.title, "ok": res.passed, "summary": res.summary, "detail": res.detail}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(json.dumps(summary, indent=2, default=str))
    return summary
