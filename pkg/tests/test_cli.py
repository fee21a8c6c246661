# -*- coding: utf-8 -*-
"""
Tests for the command line: verbs, result files and exit codes.
"""

import json
import logging

import numpy as np
import pytest

from cli import (EXIT_INPUT, EXIT_MISMATCH, EXIT_NOT_IN_E, EXIT_NUMERICAL, EXIT_OK, EXIT_TIME, exit_code,
                 main)
from errors import (ConfigError, ControlError, GeometryMismatch, H3Violated, NoObstructionWitness,
                    NotControllable, NotInE, QuadratureFailure, RankCollapse, RankDeficientMode, TimeTooShort)
from report import load_control_coeffs, read_table

HALF = [[0.0, np.pi]]


def _run(tmp_path, verb, doc=None, *extra):
    argv = [verb, "--out", str(tmp_path / "out")]
    if doc is not None:
        filename = tmp_path / "run.json"
        filename.write_text(json.dumps(doc))
        argv += ["--config", str(filename)]
    return main(argv + list(extra))


def _report(tmp_path):
    with open(str(tmp_path / "out" / "report.json")) as f:
        return json.load(f)


def _doc(case, T, **blocks):
    doc = {"system": {"case": case}, "omega": HALF, "T": T}
    doc.update(blocks)
    return doc


class TestAnalyze:

    def test_hyperbolic_control(self, tmp_path):
        assert _run(tmp_path, "analyze", _doc("2x2-h-k21", 2.0 * np.pi)) == EXIT_OK
        body = _report(tmp_path)
        analysis = body["result"]["analysis"]
        assert analysis["verdict"] == "CONTROLLABLE_REGULAR"
        assert analysis["p_index"] == 0
        assert analysis["exceptional"] == []
        assert analysis["t_star"] == pytest.approx(np.pi)
        assert body["config"]["discretization"]["N"] == 64

    def test_parabolic_control_without_a12(self, tmp_path):
        assert _run(tmp_path, "analyze", _doc("2x2-p-a12zero", 2.0 * np.pi)) == EXIT_OK
        analysis = _report(tmp_path)["result"]["analysis"]
        assert analysis["p_index"] == 2
        assert any(r["obstructed"] for r in analysis["rough_obstructions"])

    def test_nonpositive_diffusion(self, tmp_path, caplog):
        doc = _doc("2x2-h-k21", 1.0)
        doc["system"]["D"] = [[-1.0]]
        with caplog.at_level(logging.ERROR):
            assert _run(tmp_path, "analyze", doc) == EXIT_INPUT
        assert "(H.3)" in caplog.text

    def test_seed_override_recorded(self, tmp_path):
        assert _run(tmp_path, "analyze", _doc("2x2-h-k21", 1.0, seed=2), "--seed", "7") == EXIT_OK
        assert _report(tmp_path)["config"]["seed"] == 7

    def test_missing_config(self, tmp_path):
        assert _run(tmp_path, "analyze") == EXIT_INPUT

    def test_malformed_config(self, tmp_path):
        filename = tmp_path / "run.json"
        filename.write_text("{not json")
        assert main(["analyze", "--config", str(filename), "--out", str(tmp_path)]) == EXIT_INPUT

    def test_unknown_verb(self):
        with pytest.raises(SystemExit):
            main(["plot"])


class TestControl:

    def test_least_norm_control(self, tmp_path):
        doc = _doc("2x2-h-k21", 2.0 * np.pi, discretization={"N": 3, "basis_size": 16}, f0={"decay": 1.0})
        assert _run(tmp_path, "control", doc) == EXIT_OK
        result = _report(tmp_path)["result"]
        assert result["hum"]["residual"] <= 1e-4
        assert result["hum"]["sigma_min"] > 0.0
        assert "pipeline" not in result
        theta, attrs = load_control_coeffs(str(tmp_path / "out" / "control_coeffs.h5"))
        assert theta.shape == (16, 7, 1)
        assert attrs["N"] == 3 and attrs["basis_kind"] == "pwc"

    def test_pipeline(self, tmp_path):
        doc = _doc("full-control", 2.0 * np.pi, discretization={"N": 4}, f0={"decay": 2.0},
                   experiment={"control": "pipeline"})
        assert _run(tmp_path, "control", doc) == EXIT_OK
        result = _report(tmp_path)["result"]
        assert result["pipeline"]["k0"] == 1
        assert result["pipeline"]["max_residual"] <= 1e-7
        assert not (tmp_path / "out" / "control_coeffs.h5").exists()

    def test_time_too_short(self, tmp_path):
        assert _run(tmp_path, "control", _doc("2x2-h-k21", 0.5 * np.pi)) == EXIT_TIME

    def test_never_controllable(self, tmp_path):
        assert _run(tmp_path, "control", _doc("2x2-h-degenerate", 2.0 * np.pi)) == EXIT_TIME

    def test_datum_outside_E(self, tmp_path, caplog):
        doc = _doc("2x2-h-a21", 2.0 * np.pi, discretization={"N": 4})
        with caplog.at_level(logging.ERROR):
            assert _run(tmp_path, "control", doc) == EXIT_NOT_IN_E
        assert "n=0" in caplog.text


class TestSweep:

    def test_straddles_minimal_time(self, tmp_path):
        doc = _doc("2x2-h-k21", np.pi, discretization={"N": 4, "basis_size": 8},
                   experiment={"T_grid_factors": [0.8, 1.2]})
        assert _run(tmp_path, "sweep", doc) == EXIT_OK
        header, rows = read_table(str(tmp_path / "out" / "sweep.csv"))
        assert header == ("T", "sigma_min", "residual")
        assert [row[0] for row in rows] == pytest.approx([0.8 * np.pi, 1.2 * np.pi])
        assert all(row[1] > 0.0 for row in rows)
        result = _report(tmp_path)["result"]
        assert result["t_star"] == pytest.approx(np.pi)
        assert result["collapse_ratio"] is not None

    def test_empty_grid(self, tmp_path):
        doc = _doc("2x2-h-k21", np.pi, experiment={"T_grid_factors": []})
        assert _run(tmp_path, "sweep", doc) == EXIT_OK
        with open(str(tmp_path / "out" / "sweep.csv")) as f:
            assert f.read() == "T,sigma_min,residual\n"
        assert _report(tmp_path)["result"]["collapse_ratio"] is None


class TestWkb:

    def test_small_time(self, tmp_path):
        doc = _doc("2x2-h-k21", 0.7 * np.pi, discretization={"grid": 64, "steps": 200},
                   experiment={"h_list": [1.0 / 32, 1.0 / 64]})
        assert _run(tmp_path, "wkb", doc) == EXIT_OK
        header, rows = read_table(str(tmp_path / "out" / "wkb.csv"))
        assert header == ("h", "lhs", "rhs", "quotient")
        assert len(rows) == 2 and rows[1][3] > rows[0][3]
        result = _report(tmp_path)["result"]
        assert result["kind"] == "small-time"
        assert "exponent" in result["lhs_fit"]

    def test_small_time_needs_short_horizon(self, tmp_path):
        doc = _doc("2x2-h-k21", 1.2 * np.pi, discretization={"steps": 40}, experiment={"h_list": [1.0 / 16]})
        assert _run(tmp_path, "wkb", doc) == EXIT_TIME

    def test_rough_data_needs_obstruction(self, tmp_path):
        doc = _doc("full-control", 1.0, experiment={"kind": "rough-data", "h_list": [1.0 / 16]})
        assert _run(tmp_path, "wkb", doc) == EXIT_INPUT


class TestCasebook:

    def test_all_cases_pass(self, tmp_path, caplog, capsys):
        with caplog.at_level(logging.INFO, logger="cli"):
            assert _run(tmp_path, "casebook") == EXIT_OK
        body = _report(tmp_path)
        assert body["result"]["passed"]
        assert len(body["result"]["cases"]) == 12
        assert "2x2-p-a12zero" in caplog.text
        assert capsys.readouterr().out == ""


@pytest.mark.parametrize("err, code", [
    (H3Violated("D"), EXIT_INPUT),
    (ConfigError("x"), EXIT_INPUT),
    (NoObstructionWitness("x"), EXIT_INPUT),
    (TimeTooShort("x"), EXIT_TIME),
    (NotControllable("x"), EXIT_TIME),
    (GeometryMismatch("x"), EXIT_TIME),
    (NotInE(3, 0.5), EXIT_NOT_IN_E),
    (RankCollapse("x"), EXIT_NUMERICAL),
    (QuadratureFailure("x"), EXIT_NUMERICAL),
    (RankDeficientMode(0, 1, 2), EXIT_NUMERICAL),
    (ControlError("x"), EXIT_MISMATCH),
])
def test_exit_codes(err, code):
    assert exit_code(err) == code
