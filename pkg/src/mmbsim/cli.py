"""Command line: ``mmbsim gen | run | check | bench | lower``.

Exit status: 0 success, 1 violation or failed assertion, 2 usage error
(bad arguments, unreadable or invalid input), 3 internal error.  Errors are
printed to stderr as ``mmbsim <stage>: <message>``.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

from . import __version__
from .adversary import crossing_lower_bound, eager_contrast, run_lower_bound, star_lower_bound
from .checker import check
from .errors import InvalidParameter, MmbError, StageError, TraceParseError
from .experiments import RunConfig, bench, build_graph, execute, load_sweep, shipped_sweeps
from .graph import read_graph, write_graph
from .rational import fmt_time
from .trace import EngineConfig, Trace

OK, VIOLATION, USAGE, INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _load_config(args) -> RunConfig:
    data: dict = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
    for item in getattr(args, "set", None) or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects key=value, got {item!r}")
        try:
            data[key] = json.loads(value)
        except json.JSONDecodeError:
            data[key] = value
    if getattr(args, "seed", None) is not None:
        data["seed"] = args.seed
    if getattr(args, "strict_progress", False):
        data["strict_progress"] = True
    try:
        return RunConfig.from_dict(data)
    except (InvalidParameter, TypeError) as exc:
        raise UsageError(f"invalid config: {exc}") from exc


def _emit(obj, out: str | None, name: str) -> None:
    text = json.dumps(obj, indent=2, default=str)
    if out:
        p = Path(out)
        if p.suffix != ".json":
            p.mkdir(parents=True, exist_ok=True)
            p = p / name
        p.write_text(text + "\n")
    print(text)


def cmd_gen(args) -> int:
    cfg = _load_config(args)
    g = build_graph(cfg)
    if args.out:
        write_graph(g, args.out)
    else:
        sys.stdout.write(g.dumps() + "\n")
    return OK


def cmd_run(args) -> int:
    cfg = _load_config(args)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        cfg = cfg.replace(trace_out=cfg.trace_out or str(out / f"trace-{cfg.seed}.jsonl"),
                          metrics_out=cfg.metrics_out or str(out / "metrics.csv"))
        graph_path = out / "graph.json"
    else:
        graph_path = None
    res = execute(cfg)
    if graph_path is not None:
        write_graph(res.graph, graph_path)
    print(json.dumps({"row": res.row, "reports": res.reports}, indent=2, default=str))
    return OK if res.ok else VIOLATION


def cmd_check(args) -> int:
    for path in (args.trace, args.graph):
        if not Path(path).exists():
            raise UsageError(f"file not found: {path}")
    graph = read_graph(args.graph)
    if args.config:
        cfg = _load_config(args).engine_config()
    else:
        cfg = EngineConfig(args.f_ack, args.f_prog, args.eps_abort, args.model)
    trace = Trace.read_jsonl(args.trace, graph=graph, config=cfg, truncated=args.truncated)
    report = check(trace, graph, cfg, strict=args.strict_progress)
    _emit(report.to_dict(), args.out, "report.json")
    return OK if report.ok else VIOLATION


def cmd_bench(args) -> int:
    if args.list:
        print("\n".join(shipped_sweeps()))
        return OK
    if not args.spec:
        raise UsageError("bench needs a sweep spec (file or shipped name); see --list")
    try:
        spec = load_sweep(args.spec)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from exc
    summary = bench(spec, workers=args.workers, out_dir=args.out)
    summary.pop("rows", None)
    print(json.dumps(summary, indent=2, default=str))
    return OK if summary["ok"] else VIOLATION


def cmd_lower(args) -> int:
    cfg = EngineConfig(args.f_ack, args.f_prog)
    which = ["star", "crossing"] if args.construction == "both" else [args.construction]
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    certs, ok = [], True
    for name in which:
        setup = star_lower_bound(args.k, cfg) if name == "star" else crossing_lower_bound(args.d, cfg)
        lb = run_lower_bound(setup, args.seed or 0)
        cert = lb.certificate()
        cert["checker_clean"] = check(lb.trace, setup.graph, cfg).ok
        contrast = eager_contrast(setup, args.seed or 0).measured
        cert["eager_contrast"] = None if contrast is None else fmt_time(contrast)
        ok &= cert["holds"] and cert["checker_clean"]
        certs.append(cert)
        if out:
            write_graph(setup.graph, out / f"{name}-graph.json")
            lb.trace.write_jsonl(out / f"{name}-trace.jsonl")
            (out / f"{name}-certificate.json").write_text(json.dumps(cert, indent=2) + "\n")
    print(json.dumps(certs if len(certs) > 1 else certs[0], indent=2))
    return OK if ok else VIOLATION


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mmbsim", description="Multi-message broadcast simulator over dual graphs.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def config_flags(sp):
        sp.add_argument("--config", help="JSON run config (flat keys, times as \"num/den\")")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (repeatable)")
        sp.add_argument("--seed", type=int, help="override the config seed")

    sp = sub.add_parser("gen", help="generate a dual graph file")
    config_flags(sp)
    sp.add_argument("--out", help="graph file to write (default: stdout)")
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("run", help="run one configuration; write trace and append a metrics row")
    config_flags(sp)
    sp.add_argument("--out", help="output directory for trace, graph and metrics.csv")
    sp.add_argument("--strict-progress", action="store_true", help="strict progress-bound reading")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("check", help="validate a JSON-lines trace against the MAC-layer guarantees")
    sp.add_argument("trace")
    sp.add_argument("--graph", required=True, help="graph file the trace ran on")
    sp.add_argument("--config", help="JSON run config supplying f_ack, f_prog, eps_abort, model")
    sp.add_argument("--f-ack", default="8")
    sp.add_argument("--f-prog", default="1")
    sp.add_argument("--eps-abort", default="0")
    sp.add_argument("--model", default="standard", choices=["standard", "enhanced"])
    sp.add_argument("--truncated", action="store_true", help="trace was cut at a horizon")
    sp.add_argument("--strict-progress", action="store_true", help="strict progress-bound reading")
    sp.add_argument("--out", help="report file (.json) or directory")
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("bench", help="run a sweep spec; write metrics.csv and summary.json")
    sp.add_argument("spec", nargs="?", help="sweep spec file or shipped sweep name")
    sp.add_argument("--list", action="store_true", help="list shipped sweeps")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out", help="output directory")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("lower", help="lower-bound demos with floor certificates")
    sp.add_argument("construction", nargs="?", default="both", choices=["star", "crossing", "both"])
    sp.add_argument("--k", type=int, default=32, help="star size")
    sp.add_argument("--d", type=int, default=40, help="crossing line length")
    sp.add_argument("--f-ack", default="8")
    sp.add_argument("--f-prog", default="1")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", help="directory for graphs, traces and certificates")
    sp.set_defaults(func=cmd_lower)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code not in (0, None) else OK
    stage = args.command
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"mmbsim {stage}: {exc}", file=sys.stderr)
        return USAGE
    except TraceParseError as exc:
        print(f"mmbsim {stage}: malformed trace: {exc}", file=sys.stderr)
        return USAGE
    except InvalidParameter as exc:
        print(f"mmbsim {stage}: invalid parameter: {exc}", file=sys.stderr)
        return USAGE
    except StageError as exc:
        print(f"mmbsim {stage}/{exc.stage}: {exc}", file=sys.stderr)
        return VIOLATION
    except MmbError as exc:
        print(f"mmbsim {stage}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return VIOLATION
    except Exception:
        print(f"mmbsim {stage}: internal error", file=sys.stderr)
        traceback.print_exc()
        return INTERNAL


if __name__ == "__main__":
    sys.exit(main())
