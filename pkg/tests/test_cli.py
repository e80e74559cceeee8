import csv
import json
from fractions import Fraction

import pytest

from mmbsim.cli import main
from mmbsim.errors import InvalidParameter
from mmbsim.experiments import METRIC_COLUMNS, RunConfig, bench, execute, load_sweep, shipped_sweeps
from mmbsim.faults import inject
from mmbsim.graph import make_double_line, read_graph, write_graph


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.mark.parametrize("spec", [{"graph": "line", "n": 6}, {"graph": "star", "k": 5},
                                  {"graph": "double-line", "d": 4}, {"graph": "grey-zone", "n": 30}])
def test_gen_round_trip(tmp_path, spec):
    out = tmp_path / "g.json"
    assert main(["gen", "--config", write(tmp_path / "c.json", spec), "--out", str(out)]) == 0
    g = read_graph(out)
    write_graph(g, tmp_path / "again.json")
    assert (tmp_path / "again.json").read_text() == out.read_text()


def test_gen_double_line_40_reloads_equal(tmp_path):
    out = tmp_path / "g.json"
    assert main(["gen", "--set", "graph=double-line", "--set", "d=40", "--out", str(out)]) == 0
    assert read_graph(out) == make_double_line(40)


def test_gen_grey_zone_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["gen", "--set", "graph=grey-zone", "--set", "n=50", "--seed", "7"]
    assert main(args + ["--out", str(a)]) == 0 and main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_run_bmmb_line(tmp_path, capsys):
    cfg = write(tmp_path / "c.json", {"graph": "line", "n": 8, "k": 2, "scheduler": "eager"})
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    rows = list(csv.DictReader((tmp_path / "o" / "metrics.csv").open()))
    assert list(rows[0]) == METRIC_COLUMNS
    row = rows[0]
    assert row["checker_violations"] == "0" and row["D"] == "7"
    # eager: D f_prog to cross the line plus at most one extra slot per further message
    assert 7 <= Fraction(row["completion_time"]) <= 7 + (2 - 1) * 8


def test_run_deterministic_trace(tmp_path):
    cfg = write(tmp_path / "c.json", {"graph": "random", "n": 20, "p_edge": 0.2, "k": 3,
                                      "arrivals": "random-singletons", "scheduler": "random", "seed": 4})
    main(["run", "--config", cfg, "--out", str(tmp_path / "a")])
    main(["run", "--config", cfg, "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "trace-4.jsonl").read_bytes() == (tmp_path / "b" / "trace-4.jsonl").read_bytes()


def test_run_fmmb_rounds_column(tmp_path):
    res = execute(RunConfig(model="enhanced", algorithm="fmmb", graph="grey-zone", n=100, k=4,
                            arrivals="random-singletons", check=False))
    assert res.row["rounds"] > 0
    assert Fraction(res.row["completion_time"]) == res.row["rounds"] * 1


def test_fmmb_standard_rejected(tmp_path, capsys):
    with pytest.raises(InvalidParameter):
        RunConfig(algorithm="fmmb", model="standard").validate()
    cfg = write(tmp_path / "c.json", {"algorithm": "fmmb", "graph": "grey-zone"})
    assert main(["run", "--config", cfg]) == 2
    assert "enhanced" in capsys.readouterr().err


def test_unknown_key_rejected(tmp_path):
    assert main(["run", "--config", write(tmp_path / "c.json", {"grpah": "line"})]) == 2


def test_check_exit_codes(tmp_path, capsys):
    cfg = write(tmp_path / "c.json", {"graph": "line", "n": 5, "k": 1, "scheduler": "slow"})
    main(["run", "--config", cfg, "--out", str(tmp_path / "o")])
    trace, graph = tmp_path / "o" / "trace-0.jsonl", tmp_path / "o" / "graph.json"
    assert main(["check", str(trace), "--graph", str(graph)]) == 0
    assert main(["check", str(trace), "--graph", str(graph), "--strict-progress"]) == 1

    bad = inject("receive-correctness", 0)
    bad.write_jsonl(tmp_path / "bad.jsonl")
    write_graph(bad.graph, tmp_path / "bad-graph.json")
    capsys.readouterr()
    assert main(["check", str(tmp_path / "bad.jsonl"), "--graph", str(tmp_path / "bad-graph.json")]) == 1
    report = json.loads(capsys.readouterr().out)
    assert report["counts"] == {"receive-correctness": 1}

    assert main(["check", str(tmp_path / "missing.jsonl"), "--graph", str(graph)]) == 2
    (tmp_path / "junk.jsonl").write_text("{not json\n")
    assert main(["check", str(tmp_path / "junk.jsonl"), "--graph", str(graph)]) == 2


def test_usage_errors():
    assert main([]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["bench", "no-such-sweep"]) == 2


def test_lower(tmp_path, capsys):
    assert main(["lower", "--out", str(tmp_path)]) == 0
    certs = json.loads(capsys.readouterr().out)
    assert [c["construction"] for c in certs] == ["star", "crossing"]
    assert all(c["holds"] and c["checker_clean"] for c in certs)
    cert = json.loads((tmp_path / "crossing-certificate.json").read_text())
    assert set(cert) >= {"floor", "measured", "ratio"}


def test_shipped_sweeps_present():
    names = shipped_sweeps()
    assert {f"criterion-{i:02d}" for i in range(1, 12)} <= set(names)
    assert {"line-sweep", "star-sweep", "crossing-sweep"} <= set(names)
    for name in names:
        load_sweep(name)


@pytest.mark.parametrize("name,slope", [("line-sweep", 1), ("star-sweep", 8), ("crossing-sweep", 8)])
def test_bench_slopes(tmp_path, name, slope):
    s = bench(load_sweep(name), workers=2, out_dir=tmp_path)
    assert s["ok"] and abs(s["slope"] - slope) <= 0.25 * slope
    assert (tmp_path / "metrics.csv").exists() and json.loads((tmp_path / "summary.json").read_text())["ok"]


def test_bench_records_partial_failures(tmp_path):
    spec = {"name": "mixed", "base": {"graph": "line", "scheduler": "eager", "k": 3},
            "grid": {"n": [2, 6]}, "seeds": 1}
    s = bench(spec)
    errors = {c["cell"]["n"]: c["errors"] for c in s["cells"]}
    assert errors == {2: 1, 6: 0} and not s["ok"]


def test_bench_criterion_spec(tmp_path, capsys):
    assert main(["bench", "criterion-04", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "summary.json").read_text())["ok"]
