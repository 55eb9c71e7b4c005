from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest

from qconsensus import golden
from qconsensus.cli import main

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_run_example1(tmp_path, capsys):
    assert main(["run", "--alg", "alg2", "--graph", "ring-directed:4", "--values", "9,3,9,3", "--out", str(tmp_path)]) == 0
    assert "k0=3" in capsys.readouterr().out
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["k0"] == 3 and summary["terminated_by"] == "convergence"
    rows = read_csv(tmp_path / "trace.csv")
    assert rows[0] == {"round": "0", "node": "1", "y": "9", "z": "1", "ys": "9", "zs": "1", "q_float": "9"}
    assert {r["node"] for r in rows} == {"1", "2", "3", "4"}


def test_run_example2_from_files(tmp_path, capsys):
    code = main([
        "run", "--alg", "alg3",
        "--graph-file", str(FIXTURES / "fig2.txt"),
        "--priorities", str(FIXTURES / "fig2.prio"),
        "--values", "2,4,7,9",
        "--out", str(tmp_path),
    ])
    assert code == 0
    assert "k0=4" in capsys.readouterr().out
    msgs = read_csv(tmp_path / "messages.csv")
    assert msgs and all(int(m["round"]) < 4 for m in msgs)


def test_value_count_mismatch(tmp_path, capsys):
    code = main(["run", "--alg", "alg2", "--graph", "ring-directed:4", "--values", "9,3,9", "--out", str(tmp_path)])
    assert code == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and "3 initial values for 4 nodes" in err[0]


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--alg", "alg2", "--graph", "star:4", "--values", "1,2,3,4"],
        ["run", "--alg", "alg2", "--graph", "ring-directed:4"],  # no value source
        ["run", "--alg", "alg2", "--graph", "ring-directed:4", "--graph-file", "x", "--values", "1,2,3,4"],
        ["run", "--alg", "alg9", "--graph", "ring-directed:4", "--values", "1,2,3,4"],
        ["run", "--alg", "alg2", "--graph-file", "/nonexistent/g.txt", "--values", "1,2"],
        ["run", "--alg", "alg2", "--graph", "ring-directed:4", "--values", "1,2,x,4"],
    ],
)
def test_input_errors_exit_1(argv, tmp_path):
    with pytest.raises(SystemExit) as exc:
        raise SystemExit(main(argv + ["--out", str(tmp_path)]))
    assert exc.value.code == 1


def test_disconnected_graph_file(tmp_path):
    g = tmp_path / "g.txt"
    g.write_text("3 2\n2 1\n3 1\n")
    assert main(["run", "--alg", "alg2", "--graph-file", str(g), "--values", "1,2,3", "--out", str(tmp_path)]) == 1


def test_out_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("QCONSENSUS_OUT", str(tmp_path / "env"))
    assert main(["run", "--alg", "alg2", "--graph", "ring-directed:4", "--values", "9,3,9,3"]) == 0
    assert (tmp_path / "env" / "trace.csv").exists()


def test_identical_command_lines_give_identical_bytes(tmp_path):
    def go(alg, sub, extra=()):
        out = tmp_path / f"{alg}-{sub}"
        argv = [sub, "--alg", alg, "--graph", "random:12:0.2", "--values-random=-50:50", "--seed", "5", "--out", str(out), *extra]
        assert main(argv) == 0
        return {p.name: p.read_bytes() for p in sorted(out.iterdir())}

    for alg in ("alg1", "alg2", "alg3"):
        a = go(alg, "run")
        b = go(alg, "run", ())
        assert a == b
    s1 = go("alg1", "sweep", ["--count", "4"])
    s2 = go("alg1", "sweep", ["--count", "4", "--workers", "2"])
    assert s1 == s2


def test_sweep_alg1_random(tmp_path, capsys):
    code = main([
        "sweep", "--alg", "alg1", "--graph", "random:20:0.1", "--values-random", "0:50",
        "--count", "100", "--seed", "7", "--out", str(tmp_path),
    ])
    assert code == 0
    rows = read_csv(tmp_path / "sweep.csv")
    assert len(rows) == 100
    assert [r["seed"] for r in rows] == [str(7 + i) for i in range(100)]
    assert all(r["terminated_by"] == "convergence" for r in rows)
    assert json.loads((tmp_path / "sweep_summary.json").read_text())["fraction_converged"] == 1.0


def test_sweep_single(tmp_path):
    assert main(["sweep", "--alg", "alg2", "--graph", "ring-undirected:6", "--values", "1,2,3,4,5,6", "--count", "1", "--out", str(tmp_path)]) == 0
    assert len(read_csv(tmp_path / "sweep.csv")) == 1


def test_sweep_ring_480(tmp_path):
    code = main([
        "sweep", "--alg", "alg3", "--graph", "ring-directed:20",
        "--values-file", str(FIXTURES / "v480.txt"), "--count", "1", "--out", str(tmp_path),
    ])
    assert code == 0
    last = read_csv(tmp_path / "plot.csv")[-1]
    assert float(last["frac_converged"]) == 1.0
    assert float(last["max_spread"]) == 0.0 and float(last["mean_spread"]) == 0.0


def test_sweep_run_failure_exit_3(tmp_path, monkeypatch):
    import qconsensus.engine as engine

    def boom(cfg):
        raise OverflowError("synthetic")

    monkeypatch.setattr(engine, "run", boom)
    code = main(["sweep", "--alg", "alg2", "--graph", "ring-directed:4", "--values", "1,2,3,4", "--count", "2", "--out", str(tmp_path)])
    assert code == 3
    rows = read_csv(tmp_path / "sweep.csv")
    assert [r["terminated_by"] for r in rows] == ["error", "error"]


def test_golden_passes(capsys):
    assert main(["golden"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 9
    assert "messages sent at k>=4: 0" in out


def test_golden_perturbed_table(monkeypatch, capsys):
    tables = {k: list(v) for k, v in golden.EXAMPLE2_TABLES.items()}
    y, z, ys, zs = tables[2][1]
    tables[2][1] = (y, z, ys + 1, zs)
    original = golden.run_golden

    def patched(tables1=golden.EXAMPLE1_TABLES, tables2=tables, extra_rounds=20):
        return original(tables1, tables2, extra_rounds)

    monkeypatch.setattr("qconsensus.cli.run_golden", patched)
    assert main(["golden"]) == 2
    out = capsys.readouterr().out
    assert "example2 k=2: FAIL (round 2, node v2, field ys: expected 10, got 9)" in out
    assert out.count("PASS") == 8


def test_check_roundtrip(tmp_path, capsys):
    main(["run", "--alg", "alg2", "--graph", "ring-directed:4", "--values", "9,3,9,3", "--out", str(tmp_path)])
    capsys.readouterr()
    assert main(["check", str(tmp_path / "trace.csv"), str(tmp_path / "messages.csv")]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "mass_conservation: PASS" in out


def test_check_alg3_leader_verdict(tmp_path, capsys):
    main([
        "run", "--alg", "alg3", "--graph-file", str(FIXTURES / "fig2.txt"),
        "--priorities", str(FIXTURES / "fig2.prio"), "--values", "2,4,7,9", "--out", str(tmp_path),
    ])
    capsys.readouterr()
    assert main(["check", str(tmp_path / "trace.csv"), str(tmp_path / "messages.csv"), "--alg", "alg3"]) == 0
    assert "leading_mass_retained: PASS" in capsys.readouterr().out


def test_check_tampered_trace(tmp_path, capsys):
    main(["run", "--alg", "alg2", "--graph", "ring-directed:4", "--values", "9,3,9,3", "--out", str(tmp_path)])
    capsys.readouterr()
    trace = tmp_path / "trace.csv"
    lines = trace.read_text().splitlines()
    # round 2, node 2 holds (0, 0); make its count negative
    idx = next(i for i, l in enumerate(lines) if l.startswith("2,2,"))
    f = lines[idx].split(",")
    f[3] = "-1"
    lines[idx] = ",".join(f)
    trace.write_text("\n".join(lines) + "\n")
    assert main(["check", str(trace), str(tmp_path / "messages.csv")]) == 2
    out = capsys.readouterr().out
    assert "nonnegativity: FAIL" in out and "mass_conservation: FAIL" in out
    assert "round 2" in out


def test_check_needs_algorithm(tmp_path, capsys):
    main(["run", "--alg", "alg2", "--graph", "ring-directed:4", "--values", "9,3,9,3", "--out", str(tmp_path)])
    (tmp_path / "summary.json").unlink()
    assert main(["check", str(tmp_path / "trace.csv"), str(tmp_path / "messages.csv")]) == 1


def test_module_entry_point():
    import subprocess
    import sys

    r = subprocess.run([sys.executable, "-m", "qconsensus", "golden"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.count("PASS") == 9
