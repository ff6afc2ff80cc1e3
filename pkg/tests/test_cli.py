"""End-to-end tests for the command-line interface."""

import json

import numpy as np
import pytest

from ecdans.cli import main
from ecdans.serialize import read_dataset_csv, read_graph_json


def run_ok(argv):
    main(list(argv))


def run_fail(argv, code):
    with pytest.raises(SystemExit) as excinfo:
        main(list(argv))
    assert excinfo.value.code == code


@pytest.fixture
def sim_dir(tmp_path):
    out = tmp_path / "sim"
    run_ok(["simulate", "--m", "3", "--tau-max", "1", "--T", "300",
            "--seed", "3", "--out", str(out)])
    return out


class TestSimulate:
    def test_writes_data_and_truth(self, sim_dir):
        ds = read_dataset_csv(sim_dir / "data.csv")
        assert ds.T == 300 and ds.m == 3
        truth = read_graph_json(sim_dir / "truth.json")
        assert truth.m == 3

    def test_changing_spec_parsing(self, tmp_path):
        out = tmp_path / "drift"
        run_ok(["simulate", "--m", "2", "--tau-max", "1", "--T", "300",
                "--changing", "0:mean:pw4:3.0", "--out", str(out)])
        truth = read_graph_json(out / "truth.json")
        assert truth.changing_modules == frozenset({0})

    def test_bad_changing_token(self, tmp_path):
        run_fail(["simulate", "--changing", "0:mean", "--out",
                  str(tmp_path)], 1)
        run_fail(["simulate", "--changing", "x:mean:sin:3", "--out",
                  str(tmp_path)], 1)
        run_fail(["simulate", "--changing", "0:trend:sin:3", "--out",
                  str(tmp_path)], 1)


class TestDiscover:
    def test_writes_graph_dot_and_report(self, sim_dir, tmp_path):
        out = tmp_path / "run"
        run_ok(["discover", str(sim_dir / "data.csv"), "--tau-max", "1",
                "--out", str(out)])
        graph = read_graph_json(out / "graph.json")
        assert graph.m == 3
        assert (out / "graph.dot").read_text().startswith("digraph")
        report = json.loads((out / "report.json").read_text())
        assert [p["name"] for p in report["phases"]] == [
            "pc1", "mci", "changing-modules", "contemporaneous",
            "orientation"]
        assert report["config"]["tau_max"] == 1

    def test_rerun_is_byte_identical(self, sim_dir, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        argv = ["discover", str(sim_dir / "data.csv"), "--tau-max", "1"]
        run_ok(argv + ["--out", str(a)])
        run_ok(argv + ["--out", str(b)])
        assert (a / "graph.json").read_bytes() == \
            (b / "graph.json").read_bytes()

    def test_threads_envvar(self, sim_dir, tmp_path, monkeypatch):
        base = tmp_path / "base"
        run_ok(["discover", str(sim_dir / "data.csv"), "--tau-max", "1",
                "--out", str(base)])
        monkeypatch.setenv("ECDANS_THREADS", "4")
        threaded = tmp_path / "threaded"
        run_ok(["discover", str(sim_dir / "data.csv"), "--tau-max", "1",
                "--out", str(threaded)])
        assert (base / "graph.json").read_bytes() == \
            (threaded / "graph.json").read_bytes()

    def test_missing_input_exits_1(self, tmp_path):
        run_fail(["discover", str(tmp_path / "nope.csv")], 1)

    def test_malformed_csv_exits_1(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b\n1,oops\n")
        run_fail(["discover", str(bad)], 1)

    def test_too_few_rows_exits_1(self, tmp_path):
        small = tmp_path / "small.csv"
        rows = "\n".join(f"{i},{i + 1}" for i in range(8))
        small.write_text("a,b\n" + rows + "\n")
        run_fail(["discover", str(small), "--tau-max", "1"], 1)


class TestMetrics:
    def test_perfect_match_table(self, sim_dir, capsys):
        run_ok(["metrics", str(sim_dir / "truth.json"),
                str(sim_dir / "truth.json")])
        out = capsys.readouterr().out
        assert "overall" in out
        assert "1.000" in out or "n/a" in out
        last = out.strip().splitlines()[-1].split()
        assert last[0] == "overall" and last[-1] == "0"

    def test_exclude_c_flag(self, sim_dir, capsys):
        run_ok(["metrics", str(sim_dir / "truth.json"),
                str(sim_dir / "truth.json"), "--exclude-c"])
        assert "surrogate" not in capsys.readouterr().out


class TestBenchmark:
    def test_small_grid(self, tmp_path):
        out = tmp_path / "bench"
        run_ok(["benchmark", "--m-grid", "3", "--seeds", "2", "--T", "300",
                "--tau-max", "1", "--out", str(out)])
        lines = (out / "metrics.csv").read_text().splitlines()
        # Header, two cell rows, one aggregate row.
        assert len(lines) == 4
        assert lines[0].startswith("seed,")
        assert lines[3].startswith("mean,3,")
        svg = (out / "summary.svg").read_text()
        assert "<svg" in svg

    def test_all_cells_failing_exits_2(self, tmp_path):
        run_fail(["benchmark", "--m-grid", "3", "--seeds", "1",
                  "--T", "300", "--tau-max", "1", "--p-lagged", "1.0",
                  "--coef-range", "0.9", "0.95",
                  "--out", str(tmp_path / "x")], 2)

    def test_bad_grid_exits_1(self, tmp_path):
        run_fail(["benchmark", "--m-grid", "a,b", "--out",
                  str(tmp_path)], 1)
        run_fail(["benchmark", "--m-grid", "4", "--seeds", "0",
                  "--out", str(tmp_path)], 1)
