"""Config parsing, CSV emission, determinism, exit codes."""

import numpy as np
import pytest

from cvkeyrate import ConfigError
from cvkeyrate.cli import (
    OPTIMIZE_SCHEMA,
    SCAN_SCHEMA,
    format_config,
    main,
    parse_config,
)

BASE = """
case = case0
direction = reverse
system.eta = 0.6
system.v_el = 0.02
system.eps_c = 0.02
system.v_a = 18
system.beta = 0.956
system.alpha_db_per_km = 0.2
model.kind = point
scan.start_km = 0
scan.stop_km = 120
scan.step_km = 2
"""


def write_config(tmp_path, text, name="run.conf"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_csv(path):
    header = []
    with open(path) as fh:
        lines = fh.read().splitlines()
    comments = [ln for ln in lines if ln.startswith("#")]
    rows = [ln for ln in lines if not ln.startswith("#")]
    return comments, rows[0].split(","), [r.split(",") for r in rows[1:]]


class TestConfigParsing:
    def test_round_trip(self):
        cfg = parse_config(BASE)
        again = parse_config(format_config(cfg))
        assert again == cfg

    def test_round_trip_with_all_sections(self):
        text = BASE.replace("model.kind = point", "model.kind = gaussian\nmodel.variance = 1e-2")
        text += "mc.n = 1000\nmc.seed = 5\nmc.estimator_eta = 0.7\noutput = out.csv\n"
        cfg = parse_config(text)
        assert cfg.mc.estimator_eta == 0.7
        assert parse_config(format_config(cfg)) == cfg

    def test_comments_and_blanks_ignored(self):
        cfg = parse_config("# hi\n\n" + BASE + "   # trailing comment line\n")
        assert cfg.case == "case0"

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            parse_config(BASE + "systme.eta = 0.7\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError):
            parse_config(BASE + "case = case1\n")

    def test_bad_case_rejected(self):
        with pytest.raises(ConfigError):
            parse_config(BASE.replace("case = case0", "case = case9"))

    def test_bad_number_rejected(self):
        with pytest.raises(ConfigError):
            parse_config(BASE.replace("system.eta = 0.6", "system.eta = sixty"))

    def test_bad_step_rejected(self):
        with pytest.raises(ConfigError):
            parse_config(BASE.replace("scan.step_km = 2", "scan.step_km = 0"))

    def test_out_of_range_system_param_rejected(self):
        with pytest.raises(ConfigError):
            parse_config(BASE.replace("system.eta = 0.6", "system.eta = 1.4"))


class TestScan:
    def test_case0_last_positive_row(self, tmp_path):
        conf = write_config(tmp_path, BASE)
        out = str(tmp_path / "scan.csv")
        assert main(["scan", "--config", conf, "--out", out]) == 0
        comments, header, rows = read_csv(out)
        assert comments[0] == f"# schema={SCAN_SCHEMA}"
        assert header[:4] == ["distance_km", "t_c", "rate", "rate_raw"]
        positive = [float(r[0]) for r in rows if float(r[2]) > 0.0]
        assert max(positive) == pytest.approx(96.0, abs=6.0)
        # Clamp only affects the plotting column.
        for r in rows:
            assert float(r[2]) == max(float(r[3]), 0.0)

    def test_empty_grid_header_only(self, tmp_path):
        text = BASE.replace("scan.stop_km = 120", "scan.stop_km = -1")
        conf = write_config(tmp_path, text)
        out = str(tmp_path / "scan.csv")
        assert main(["scan", "--config", conf, "--out", out]) == 0
        _, header, rows = read_csv(out)
        assert rows == [] and header[0] == "distance_km"

    def test_byte_identical_across_runs_and_workers(self, tmp_path):
        text = BASE.replace("model.kind = point", "model.kind = uniform\nmodel.lo = 0.9\nmodel.hi = 1.1")
        text = text.replace("case = case0", "case = case1r")
        text = text.replace("scan.stop_km = 120", "scan.stop_km = 30")
        conf = write_config(tmp_path, text)
        outs = [str(tmp_path / f"scan{i}.csv") for i in range(3)]
        assert main(["scan", "--config", conf, "--out", outs[0]]) == 0
        assert main(["scan", "--config", conf, "--out", outs[1]]) == 0
        assert main(["scan", "--config", conf, "--out", outs[2], "--workers", "3"]) == 0
        blobs = [open(o, "rb").read() for o in outs]
        assert blobs[0] == blobs[1] == blobs[2]

    def test_case2b_scan_carries_diagnostics(self, tmp_path):
        text = BASE.replace("model.kind = point", "model.kind = uniform\nmodel.lo = 0.95\nmodel.hi = 1.05")
        text = text.replace("case = case0", "case = case2b")
        text = text.replace("scan.stop_km = 120", "scan.stop_km = 20").replace(
            "scan.step_km = 2", "scan.step_km = 10"
        )
        conf = write_config(tmp_path, text)
        out = str(tmp_path / "scan.csv")
        assert main(["scan", "--config", conf, "--out", out]) == 0
        _, header, rows = read_csv(out)
        p_s = header.index("p_s")
        d_col = header.index("d_max_opt")
        for row in rows:
            assert float(row[p_s]) == 1.0
            assert float(row[d_col]) == 1.05


class TestOptimize:
    def _conf(self, tmp_path, model_lines, stop=60, step=10):
        text = BASE.replace("case = case0", "case = case2b")
        text = text.replace("model.kind = point", model_lines)
        text = text.replace("scan.stop_km = 120", f"scan.stop_km = {stop}")
        text = text.replace("scan.step_km = 2", f"scan.step_km = {step}")
        return write_config(tmp_path, text)

    def test_uniform_constant_at_support_max(self, tmp_path):
        conf = self._conf(tmp_path, "model.kind = uniform\nmodel.lo = 0.95\nmodel.hi = 1.05")
        out = str(tmp_path / "opt.csv")
        assert main(["optimize", "--config", conf, "--out", out]) == 0
        comments, header, rows = read_csv(out)
        assert comments[0] == f"# schema={OPTIMIZE_SCHEMA}"
        d_col = header.index("d_max_opt")
        rate_col = header.index("rate")
        for row in rows:
            if float(row[rate_col]) > 0.0:
                assert float(row[d_col]) == 1.05

    def test_gaussian_nondecreasing(self, tmp_path):
        conf = self._conf(
            tmp_path, "model.kind = gaussian\nmodel.variance = 1e-2", stop=30, step=5
        )
        out = str(tmp_path / "opt.csv")
        assert main(["optimize", "--config", conf, "--out", out]) == 0
        _, header, rows = read_csv(out)
        d_col = header.index("d_max_opt")
        rate_col = header.index("rate_raw")
        vals = [float(r[d_col]) for r in rows if float(r[rate_col]) > 0.0]
        assert np.all(np.diff(vals) >= -1e-4)

    def test_point_mass_pins_cutoff_at_one(self, tmp_path):
        conf = self._conf(tmp_path, "model.kind = point", stop=20, step=10)
        out = str(tmp_path / "opt.csv")
        assert main(["optimize", "--config", conf, "--out", out]) == 0
        _, header, rows = read_csv(out)
        d_col = header.index("d_max_opt")
        assert all(float(r[d_col]) == 1.0 for r in rows)

    def test_requires_case2b(self, tmp_path):
        conf = write_config(tmp_path, BASE)
        assert main(["optimize", "--config", conf, "--out", str(tmp_path / "x.csv")]) == 1


class TestValidate:
    def _conf(self, tmp_path, extra=""):
        text = BASE.replace("model.kind = point", "model.kind = uniform\nmodel.lo = 0.9\nmodel.hi = 1.1")
        text += "mc.n = 1000000\nmc.seed = 424242\n" + extra
        return write_config(tmp_path, text)

    def test_all_checks_pass(self, tmp_path, capsys):
        conf = self._conf(tmp_path)
        out = str(tmp_path / "report.txt")
        assert main(["validate", "--config", conf, "--out", out]) == 0
        report = open(out).read()
        assert "FAIL" not in report
        assert report.count("PASS") >= 6
        for label in ("estimator.t_hat", "secure_source.t_hat", "tagged_source.eps_hat", "channel.v_bob"):
            assert label in report

    def test_miscalibrated_eta_detected(self, tmp_path):
        conf = self._conf(tmp_path, "mc.estimator_eta = 0.8\n")
        out = str(tmp_path / "report.txt")
        assert main(["validate", "--config", conf, "--out", out]) == 3
        report = open(out).read()
        assert "FAIL" in report and "t_hat" in report

    def test_tiny_sample_underpowered_not_failed(self, tmp_path):
        text = self._conf(tmp_path)
        conf = write_config(tmp_path, open(text).read().replace("mc.n = 1000000", "mc.n = 100"), "tiny.conf")
        out = str(tmp_path / "report.txt")
        assert main(["validate", "--config", conf, "--out", out]) == 0
        report = open(out).read()
        assert "UNDERPOWERED" in report and "FAIL" not in report

    def test_requires_mc_section(self, tmp_path):
        conf = write_config(tmp_path, BASE)
        assert main(["validate", "--config", conf, "--out", str(tmp_path / "r.txt")]) == 1


class TestExitCodes:
    def test_missing_config_is_config_error(self, tmp_path):
        assert main(["scan", "--config", str(tmp_path / "nope.conf"), "--out", "x.csv"]) == 1

    def test_missing_output_is_config_error(self, tmp_path):
        conf = write_config(tmp_path, BASE)
        assert main(["scan", "--config", conf]) == 1

    def test_math_error_exit_code(self, tmp_path):
        # A start distance below zero reaches the domain layer, not config.
        text = BASE.replace("scan.start_km = 0", "scan.start_km = -5")
        conf = write_config(tmp_path, text)
        assert main(["scan", "--config", conf, "--out", str(tmp_path / "x.csv")]) == 2
