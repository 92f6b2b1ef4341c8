import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from wardrop_logit.cli import main
from wardrop_logit.errors import ParseError, ValidationError
from wardrop_logit.scenario import (
    BUILTINS,
    InitialCondition,
    dump_scenario,
    load_scenario,
    scenario_from_dict,
)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestScenario:
    @pytest.mark.parametrize("name", sorted(BUILTINS))
    def test_builtin_round_trip(self, name, tmp_path):
        sc = load_scenario(f"builtin:{name}")
        again = scenario_from_dict(json.loads(json.dumps(sc.to_dict())))
        assert again.to_dict() == sc.to_dict()
        np.testing.assert_array_equal(again.initial_state(), sc.initial_state())
        path = tmp_path / "s.json"
        dump_scenario(sc, path)
        assert load_scenario(path).to_dict() == sc.to_dict()

    def test_unknown_field_named(self):
        doc = load_scenario("builtin:example1").to_dict()
        doc["populations"][0]["colour"] = "red"
        with pytest.raises(ValidationError, match=r"populations\[0\]"):
            scenario_from_dict(doc)

    def test_negative_delay_coefficient(self):
        doc = load_scenario("builtin:example1").to_dict()
        doc["populations"][1]["delays"]["e1"] = [0, -2]
        with pytest.raises(ValidationError, match=r"populations\[1\]"):
            scenario_from_dict(doc)

    def test_explicit_initial_checked(self):
        doc = load_scenario("builtin:example1").to_dict()
        doc["initial"]["z"] = [[1.0, 1.0], [0.0, 1.0]]
        with pytest.raises(ValidationError, match="initial.z"):
            scenario_from_dict(doc)

    def test_bad_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ParseError):
            load_scenario(path)

    def test_unknown_builtin(self):
        with pytest.raises(ValidationError, match="example1"):
            load_scenario("builtin:nope")

    def test_init_parse(self, tmp_path):
        assert InitialCondition.parse("uniform").kind == "uniform"
        assert InitialCondition.parse("seeded-random:7").seed == 7
        path = tmp_path / "z.json"
        path.write_text(json.dumps({"z": [[0.25, 0.75], [1, 0]]}))
        assert InitialCondition.parse(f"file:{path}").z == ((0.25, 0.75), (1.0, 0.0))
        with pytest.raises(ValidationError):
            InitialCondition.parse("seeded-random:x")

    def test_multistart_offsets_differ(self):
        sc = load_scenario("builtin:example2")
        assert not np.array_equal(sc.initial_state(0), sc.initial_state(1))


class TestCheckGraph:
    def test_simple(self, capsys):
        code, out, _ = run(capsys, "check-graph", "--scenario", "builtin:example3")
        assert code == 0
        assert "classification: simple" in out and "metzler=True" in out

    def test_series(self, capsys):
        code, out, _ = run(capsys, "check-graph", "--scenario", "builtin:series")
        assert code == 0
        assert "series-of-simple (2 components)" in out
        assert out.count("certificate component") == 2

    def test_neither(self, capsys):
        code, out, _ = run(capsys, "check-graph", "--scenario", "builtin:example2")
        assert code == 3
        assert "witness: edge e1" in out and "theorem applies: no" in out


class TestSimulate:
    def test_converges(self, capsys):
        code, out, _ = run(capsys, "simulate", "--scenario", "builtin:example1")
        assert code == 0
        rows = list(csv.reader(io.StringIO(out)))
        assert rows[0][0] == "t"
        last = [float(x) for x in rows[-1]]
        np.testing.assert_allclose(last[1:5], 0.5, atol=1e-6)

    def test_short_horizon_exit_2(self, capsys):
        code, out, _ = run(capsys, "simulate", "--scenario", "builtin:example3", "--horizon", "0.1")
        assert code == 2
        assert len(out.splitlines()) == 12

    def test_deterministic(self, tmp_path):
        outs = []
        for k in range(2):
            path = tmp_path / f"t{k}.csv"
            assert main(["simulate", "--scenario", "builtin:example2", "--horizon", "3", "--out", str(path)]) == 2
            outs.append(path.read_bytes())
        assert outs[0] == outs[1]
        assert b"\r\n" not in outs[0]

    def test_init_file(self, capsys, tmp_path):
        path = tmp_path / "z.json"
        path.write_text(json.dumps([[0.5, 0.5], [0.5, 0.5]]))
        code, out, _ = run(capsys, "simulate", "--scenario", "builtin:example1", "--init", f"file:{path}")
        assert code == 0
        assert len(out.splitlines()) == 11

    @pytest.mark.parametrize(
        "argv",
        [
            ["simulate", "--scenario", "missing.json"],
            ["simulate", "--scenario", "builtin:example1", "--eta", "-1"],
            ["simulate", "--scenario", "builtin:example1", "--init", "bogus"],
            ["simulate", "--scenario", "builtin:example1", "--step", "0.1", "--horizon", "0.01"],
        ],
    )
    def test_input_errors(self, capsys, argv):
        code, _, err = run(capsys, *argv)
        assert code == 1
        assert err.startswith("error:")


class TestSolve:
    def test_unique_on_simple_graph(self, capsys):
        code, out, _ = run(capsys, "solve", "--scenario", "builtin:example3", "--starts", "3", "--init", "seeded-random:0")
        doc = json.loads(out)
        assert code == 0
        assert doc["verdict"] == "unique" and len(doc["clusters"]) == 1
        assert len(doc["reports"]) == 3

    def test_jobs_match_serial(self, tmp_path):
        base = ["solve", "--scenario", "builtin:example2", "--starts", "4", "--horizon", "20"]
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        main(base + ["--out", str(a)])
        main(base + ["--jobs", "2", "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()


class TestSweep:
    def test_example1(self, capsys):
        code, out, _ = run(capsys, "sweep-eta", "--scenario", "builtin:example1", "--etas", "1,10,100")
        assert code == 0
        rows = list(csv.DictReader(io.StringIO(out)))
        assert [float(r["eta"]) for r in rows] == [1.0, 10.0, 100.0]
        d = [float(r["wardrop_distance"]) for r in rows]
        assert d[-1] < 0.01

    def test_non_simple_falls_back(self, capsys):
        argv = ["sweep-eta", "--scenario", "builtin:example2", "--etas", "0,1", "--grid-step", "0.2", "--horizon", "20"]
        code, out, _ = run(capsys, *argv)
        assert code in (0, 2)
        assert len(out.splitlines()) == 3

    def test_decreasing_etas_rejected(self, capsys):
        code, _, _ = run(capsys, "sweep-eta", "--scenario", "builtin:example1", "--etas", "10,1")
        assert code == 1


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "wardrop_logit", "check-graph", "--scenario", "builtin:example1"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "classification: simple" in proc.stdout
