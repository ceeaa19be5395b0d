import json
import re

import numpy as np
import pytest
from hypothesis import given, settings

from qtopo import cli
from qtopo.io import ProblemParseError, dump_problem, load_problem, load_run_config, parse_problem
from qtopo.model import five_edge, make_structure, tri3
from qtopo.vqa import EvaluationError, TopologyVQA
from test_model import connected_structures

VALID = """\
nodes: [0, 1, 2]
edges:
  - [0, 2]
  - {a: 0, b: 1, length: 1.0}
  - [1, 2, 1.0]
materials: {lambda: 1.0, epsilon: 0.1}
roles: {source: 0, target: 1, base: 2}
"""


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


class TestProblemFiles:
    def test_packaged_instances(self):
        assert load_problem("tri3") == tri3()
        assert load_problem("five_edge") == five_edge()

    def test_list_and_mapping_edges(self):
        gs = parse_problem(VALID)
        assert [(e.a, e.b) for e in gs.edges] == [(0, 2), (0, 1), (1, 2)]
        assert gs.coords is None

    @pytest.mark.parametrize("text, fragment, line", [
        (VALID.replace("  - [0, 2]", "  - [0, 0]"), "edge 1 (0, 0) is a self-loop", 3),
        (VALID + "extra: 1\n", "unknown field 'extra'", 8),
        (VALID.replace("length: 1.0}", "length: 1.0, colour: red}"), "unknown field 'colour'", 4),
        (VALID.replace("[1, 2, 1.0]", "[1, 7]"), "unknown node 7", 5),
        (VALID.replace("epsilon: 0.1", "epsilon: 2"), "epsilon", 6),
        (VALID.replace("target: 1", "target: 0"), "distinct", 7),
        (VALID.replace("[0, 2]", "[0, 2"), "YAML syntax", None),
        (VALID.replace("lambda: 1.0", "lambda: heavy"), "lambda must be a number", 6),
    ])
    def test_errors_carry_location(self, text, fragment, line):
        with pytest.raises(ProblemParseError, match=re.escape(fragment)) as info:
            parse_problem(text, "p.yaml")
        if line is not None:
            assert info.value.line == line
            assert str(info.value).startswith(f"p.yaml:{line}:")

    def test_missing_section(self):
        with pytest.raises(ProblemParseError, match="missing field 'roles'"):
            parse_problem("\n".join(VALID.splitlines()[:-1]))

    def test_round_trip_canonical(self):
        for gs in (tri3(), five_edge()):
            assert parse_problem(dump_problem(gs)) == gs

    def test_run_config_rejects_unknown(self, tmp_path):
        assert load_run_config(write(tmp_path, "c.yaml", "seed: 3\nmode: sampled\n")) == \
            {"seed": 3, "mode": "sampled"}
        with pytest.raises(ProblemParseError, match="unknown field 'speed'"):
            load_run_config(write(tmp_path, "d.yaml", "speed: 3\n"))


@settings(max_examples=40, deadline=None)
@given(connected_structures())
def test_round_trip(gs):
    assert parse_problem(dump_problem(gs)) == gs


class TestOracleCommand:
    def test_tri3_table(self, capsys):
        assert cli.main(["oracle", "tri3"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 1 + 8
        top, bottom = lines[1].split(), lines[-1].split()
        assert top == ["101", "0.083333", "0.006944", "*"]
        assert bottom[:2] == ["010", "4.761905"]
        assert sum("*" in ln for ln in lines) == 1

    def test_two_edge_toy(self, tmp_path, capsys):
        gs = make_structure([(0, 2), (0, 1)], source=0, target=1, base=2)
        assert cli.main(["oracle", write(tmp_path, "toy.yaml", dump_problem(gs))]) == 0
        assert len(capsys.readouterr().out.splitlines()) == 1 + 4

    def test_cap_exceeded(self, capsys):
        assert cli.main(["oracle", "tri3", "--cap", "2"]) == cli.EXIT_CAP
        assert "cap" in capsys.readouterr().err

    def test_self_loop_exit_status(self, tmp_path, capsys):
        path = write(tmp_path, "bad.yaml", VALID.replace("[1, 2, 1.0]", "[2, 2]"))
        assert cli.main(["oracle", path]) == cli.EXIT_INPUT
        err = capsys.readouterr().err
        assert "bad.yaml:5:5" in err and "edge 3 (2, 2)" in err

    def test_missing_file(self, capsys):
        assert cli.main(["oracle", "/nonexistent/p.yaml"]) == cli.EXIT_INPUT


class TestSolveCommand:
    def test_tri3_exact(self, tmp_path, capsys):
        out = tmp_path / "run"
        assert cli.main(["solve", "tri3", "--out", str(out), "--quiet"]) == 0
        doc = json.loads((out / "results.json").read_text())
        assert doc["selected"] == "101"
        assert doc["references"]["oracle_best"] == "101"
        assert doc["stage1"]["r_star"] > 0
        header = (out / "stage1_history.csv").read_text().splitlines()[0]
        assert header == "iteration,objective,abs_error,grad_norm"
        assert len((out / "stage2_history.csv").read_text().splitlines()) == 1 + 1001
        assert "selected structure: 101" in capsys.readouterr().out

    def test_sampled_files_identical(self, tmp_path):
        args = ["solve", "tri3", "--mode", "sampled", "--shots", "500", "--iters", "4",
                "--seed", "9", "--quiet"]
        for d in ("a", "b"):
            assert cli.main(args + ["--out", str(tmp_path / d)]) == 0
        for name in ("results.json", "stage1_history.csv", "stage2_history.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_config_file_and_flag_precedence(self, tmp_path):
        cfg = write(tmp_path, "run.yaml", "iterations: 3\nseed: 5\nlearning_rate: 0.05\n")
        out = tmp_path / "o"
        assert cli.main(["solve", "tri3", "--config", cfg, "--seed", "6", "--out", str(out),
                         "--quiet"]) == 0
        doc = json.loads((out / "results.json").read_text())
        assert doc["config"]["iterations"] == 3
        assert doc["config"]["seed"] == 6
        assert doc["config"]["learning_rate"] == 0.05

    def test_bad_layers(self, capsys):
        assert cli.main(["solve", "tri3", "--layers-psi", "3", "--iters", "1"]) == cli.EXIT_INPUT

    def test_pipeline_failure(self, tmp_path, monkeypatch, capsys):
        def broken(self, theta, backend, key):
            raise EvaluationError("forced")
        monkeypatch.setattr(TopologyVQA, "_fu_terms", broken)
        out = tmp_path / "f"
        assert cli.main(["solve", "tri3", "--iters", "2", "--out", str(out), "--quiet"]) == cli.EXIT_PIPELINE
        doc = json.loads((out / "results.json").read_text())
        assert doc["status"] == "failed" and doc["failure"]["stage"] == "stage1"
        assert "stage1" in capsys.readouterr().err


class TestEstimateCommand:
    def rows(self, text):
        return {ln.split()[0]: ln.split()[1:] for ln in text.splitlines()[2:5]}

    def test_zero_parameters(self, tmp_path, capsys):
        path = write(tmp_path, "theta.json", json.dumps({"theta": [0.0] * 16}))
        assert cli.main(["estimate", "tri3", path, "--shots", "2000"]) == 0
        rows = self.rows(capsys.readouterr().out)
        assert rows["<A>"][0] == "1.100000"
        assert rows["|<b|psi>|^2"][:2] == ["1.000000", "1.000000"]

    def test_stderr_shrinks_with_shots(self, tmp_path, capsys):
        theta = np.random.default_rng(0).uniform(-np.pi, np.pi, 16).tolist()
        path = write(tmp_path, "theta.yaml", json.dumps(theta))
        se = []
        for shots in ("1000", "100000"):
            assert cli.main(["estimate", "tri3", path, "--shots", shots]) == 0
            se.append(float(self.rows(capsys.readouterr().out)["<A>"][2]))
        assert se[0] / se[1] == pytest.approx(10, rel=0.2)

    def test_dimension_mismatch(self, tmp_path, capsys):
        path = write(tmp_path, "theta.json", json.dumps({"theta": [0.0] * 8}))
        assert cli.main(["estimate", "tri3", path]) == cli.EXIT_INPUT
        assert "theta has shape (8,)" in capsys.readouterr().err
