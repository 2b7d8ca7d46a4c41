"""Tests for the batch experiment runner.

All invocations go through cli.main(argv) in-process; one subprocess smoke
test covers the installed entry point wiring.
"""

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from riplab import cli
from riplab.numerics import NumericalError


def run_cli(*argv) -> int:
    return cli.main(list(argv))


def read_csv(path):
    """Returns (comment_lines, field_names, data_rows)."""
    comments, body = [], []
    with open(path, newline="") as fh:
        for line in fh:
            (comments if line.startswith("#") else body).append(line)
    rows = list(csv.DictReader(body))
    fields = body[0].strip().split(",") if body else []
    return comments, fields, rows


class TestReports:
    def test_truncation_json_report(self, tmp_path):
        out = tmp_path / "trunc"
        code = run_cli("truncation", "--q", "2", "--s", "4", "--delta", "0.25",
                       "--C2", "1", "--out", str(out))
        assert code == 0
        doc = json.loads((tmp_path / "trunc.json").read_text())
        assert doc["result"]["l0"] == 5
        assert doc["result"]["meets_half_delta"] is True
        assert doc["config"]["command"] == "truncation"
        assert doc["config"]["q"] == "2"
        assert not (tmp_path / "trunc.csv").exists()

    def test_sp_opt_curve_and_optimum(self, tmp_path):
        out = tmp_path / "sp"
        code = run_cli("sp-opt", "--eta", "decaying", "--N", "256", "--Neta", "64",
                       "--alpha", "0.25", "--r", "8", "--out", str(out))
        assert code == 0
        comments, fields, rows = read_csv(tmp_path / "sp.csv")
        assert fields == ["q_prime", "value"]
        assert len(rows) == 201
        doc = json.loads((tmp_path / "sp.json").read_text())
        values = [float(r["value"]) for r in rows]
        assert abs(doc["result"]["value"] - min(values)) <= 1e-9 * min(values)
        q_opt = float(doc["result"]["q_opt"])
        assert any(abs(float(r["q_prime"]) - q_opt) < 1e-9 for r in rows)

    def test_isotropy_defect_is_tiny(self, tmp_path):
        out = tmp_path / "iso"
        code = run_cli("isotropy", "--eta", "flat", "--N", "4", "--out", str(out))
        assert code == 0
        doc = json.loads((tmp_path / "iso.json").read_text())
        assert doc["result"]["defect"] <= 1e-12
        assert doc["result"]["variant"] == "shiftmod"

    def test_rip_scan_rows_and_monotone_medians(self, tmp_path):
        out = tmp_path / "scan"
        code = run_cli("rip-scan", "--ensemble", "shiftmod", "--eta", "flat",
                       "--N", "16", "--k", "2", "--m", "4,8,16,32",
                       "--trials", "200", "--seed", "7", "--out", str(out))
        assert code == 0
        comments, fields, rows = read_csv(tmp_path / "scan.csv")
        assert fields == ["m", "delta_hat", "model", "seed"]
        by_m = {}
        for row in rows:
            by_m.setdefault(int(row["m"]), []).append(float(row["delta_hat"]))
        ms = sorted(by_m)
        assert ms == [4, 8, 16, 32]
        medians = [float(np.median(by_m[m])) for m in ms]
        assert all(a >= b for a, b in zip(medians, medians[1:]))

    def test_default_output_prefix(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        code = run_cli("truncation", "--q", "2", "--s", "1", "--delta", "1",
                       "--C2", "0.5")
        assert code == 0
        assert (tmp_path / "riplab_truncation.json").exists()

    def test_entry_module_smoke(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "riplab.cli", "table1", "--s", "2", "--n", "3",
             "--d", "4", "--out", str(tmp_path / "t1")],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        doc = json.loads((tmp_path / "t1.json").read_text())
        assert doc["result"]["gauss"] == 24
        assert doc["result"]["group"] == 288
        assert doc["result"]["group_sign"] == 384
        assert doc["result"]["ratio_group_over_gauss"] == 12.0
        assert doc["result"]["ratio_sign_over_gauss"] == 16.0


class TestDeterminism:
    def test_rerun_is_byte_identical(self, tmp_path):
        args = ("sp-opt", "--eta", "flat", "--N", "32", "--r", "4", "--seed", "11")
        assert run_cli(*args, "--out", str(tmp_path / "a")) == 0
        assert run_cli(*args, "--out", str(tmp_path / "b")) == 0
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_seed_changes_monte_carlo_output(self, tmp_path):
        base = ("rip-scan", "--eta", "flat", "--N", "8", "--k", "1", "--m", "3",
                "--trials", "20")
        assert run_cli(*base, "--seed", "1", "--out", str(tmp_path / "a")) == 0
        assert run_cli(*base, "--seed", "2", "--out", str(tmp_path / "b")) == 0
        _, _, rows_a = read_csv(tmp_path / "a.csv")
        _, _, rows_b = read_csv(tmp_path / "b.csv")
        assert rows_a[0]["seed"] != rows_b[0]["seed"]

    def test_stamp_adds_one_header_line(self, tmp_path):
        args = ("sp-opt", "--eta", "flat", "--N", "16", "--r", "2")
        assert run_cli(*args, "--out", str(tmp_path / "plain")) == 0
        assert run_cli(*args, "--stamp", "--out", str(tmp_path / "stamped")) == 0
        plain = (tmp_path / "plain.csv").read_text().splitlines()
        stamped = (tmp_path / "stamped.csv").read_text().splitlines()
        ts_lines = [l for l in stamped if l.startswith("# timestamp=")]
        assert len(ts_lines) == 1
        assert [l for l in plain if not l.startswith("# timestamp=")] == [
            l for l in stamped if not l.startswith("# timestamp=")
        ]
        doc = json.loads((tmp_path / "stamped.json").read_text())
        assert "timestamp" in doc

    def test_header_echoes_resolved_config(self, tmp_path):
        assert run_cli("sp-opt", "--eta", "flat", "--N", "16", "--r", "2",
                       "--out", str(tmp_path / "echo")) == 0
        comments, _, _ = read_csv(tmp_path / "echo.csv")
        text = "".join(comments)
        assert "# command=sp-opt\n" in comments
        assert "# N=16\n" in comments
        assert "# r=2\n" in comments
        assert "# qmin=2.001\n" in comments
        assert "timestamp" not in text


class TestConfigFile:
    def test_file_values_used_and_flags_override(self, tmp_path):
        cfg = tmp_path / "scan.cfg"
        cfg.write_text(
            "# sweep config\n"
            "N = 16\nk = 2\nm = 4,8\ntrials = 5\nseeds = 2\n"
            "ensemble = shiftmod\neta = flat\n"
        )
        out = tmp_path / "scan"
        code = run_cli("rip-scan", "--config", str(cfg), "--m", "4",
                       "--out", str(out))
        assert code == 0
        comments, _, rows = read_csv(tmp_path / "scan.csv")
        assert {row["m"] for row in rows} == {"4"}
        assert len(rows) == 2
        assert "# m=4\n" in comments
        assert "# seeds=2\n" in comments

    def test_sections_comments_and_dashed_keys(self, tmp_path):
        cfg = tmp_path / "gordon.cfg"
        cfg.write_text(
            "[run]\n; semicolon comment\n# hash comment\n"
            "N = 16\nk = 2\nwidth-trials = 50\ndraws = 2\n"
        )
        code = run_cli("gordon", "--config", str(cfg), "--validate-only")
        assert code == 0

    def test_unknown_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("N = 16\nk = 2\nm = 4\nbogus = 3\n")
        code = run_cli("rip-scan", "--config", str(cfg))
        assert code == 2
        assert "bogus" in capsys.readouterr().err

    def test_missing_file_rejected(self, tmp_path):
        code = run_cli("rip-scan", "--config", str(tmp_path / "nope.cfg"))
        assert code == 2

    def test_malformed_line_rejected(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("N 16\n")
        assert run_cli("rip-scan", "--config", str(cfg)) == 2


class TestValidation:
    def test_validate_only_runs_nothing(self, tmp_path, monkeypatch, capsys):
        monkeypatch.chdir(tmp_path)
        code = run_cli("sp-opt", "--eta", "flat", "--N", "16", "--r", "2",
                       "--validate-only")
        assert code == 0
        assert "configuration ok" in capsys.readouterr().out
        assert list(tmp_path.iterdir()) == []

    def test_missing_required_key_message(self):
        config, diags = cli.resolve_config("truncation", {})
        assert "missing required key q" in diags
        assert "missing required key C2" in diags

    def test_alpha_window_message(self):
        config, diags = cli.resolve_config(
            "sp-opt",
            {"eta": "decaying", "N": "256", "Neta": "64", "alpha": "0.7", "r": "8"},
        )
        assert diags == []
        assert cli.validate(config) == ["alpha must be in (0, 0.5)"]

    def test_valid_config_has_no_diagnostics(self):
        config, diags = cli.resolve_config(
            "sp-opt",
            {"eta": "decaying", "N": "256", "Neta": "64", "alpha": "0.25", "r": "8"},
        )
        assert diags == []
        assert cli.validate(config) == []

    def test_alpha_window_exit_code(self, tmp_path):
        code = run_cli("sp-opt", "--eta", "decaying", "--N", "256", "--Neta", "64",
                       "--alpha", "0.7", "--r", "8", "--out", str(tmp_path / "x"))
        assert code == 2

    def test_bad_choice_rejected(self, capsys):
        code = run_cli("rip-scan", "--eta", "flat", "--N", "8", "--k", "1",
                       "--m", "2", "--ensemble", "fourier")
        assert code == 2
        assert "ensemble" in capsys.readouterr().err

    def test_bad_int_rejected(self):
        assert run_cli("rip-scan", "--eta", "flat", "--N", "8.5", "--k", "1",
                       "--m", "2") == 2

    def test_matrix_group_needs_matrix_instrument(self):
        assert run_cli("rip-exact", "--eta", "flat", "--N", "8", "--k", "1",
                       "--m", "2", "--ensemble", "doubleqft") == 2

    def test_unknown_subcommand_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            run_cli("frobnicate", "--N", "4")
        assert exc.value.code == 2


class TestFailureExitCodes:
    def test_capacity_exit(self, tmp_path):
        code = run_cli("rip-exact", "--eta", "flat", "--N", "64", "--k", "8",
                       "--m", "4", "--out", str(tmp_path / "x"))
        assert code == 3

    def test_numerical_exit(self, tmp_path, monkeypatch):
        def boom(params):
            raise NumericalError("synthetic instability")

        monkeypatch.setitem(cli._RUNNERS, "table1", boom)
        code = run_cli("table1", "--s", "1", "--n", "2", "--d", "2",
                       "--out", str(tmp_path / "x"))
        assert code == 4
