import os
import stat

import pytest

from cqm import __version__
from cqm.cli import EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_IO, EXIT_OK, EXIT_USAGE, main, sweep_angles
from cqm.config import config_digest, format_config, loads_config
from cqm.errors import ConfigError
from cqm.montecarlo import ExperimentConfig

BASIC = """\
# three storage cycles
cycles = 3
duration = 5
seed = 17
cycle_model.loss_per_cycle = 0.19
drive.rise_time = 10
"""


def write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


class TestConfigFile:
    def test_minimal(self):
        cfg = loads_config("cycles = 2\n")
        assert cfg == ExperimentConfig(cycles=2)

    def test_values(self):
        cfg = loads_config(BASIC + "analyzer_theta = 45\ndrive.gd1_delay = none\n")
        assert (cfg.cycles, cfg.duration, cfg.seed, cfg.analyzer_theta) == (3, 5.0, 17, 45.0)
        assert cfg.drive.gd1_delay is None

    def test_missing_cycles_names_field(self):
        with pytest.raises(ConfigError) as exc:
            loads_config("duration = 5\n")
        assert exc.value.field == "cycles"
        assert "cycles" in str(exc.value)

    @pytest.mark.parametrize("text, field, line", [
        ("cycles = 2\nbogus = 1\n", "bogus", 2),
        ("cycles = 2\n\nduration = fast\n", "duration", 3),
        ("cycles = 2\nduration = nan\n", "duration", 2),
        ("cycles = 2\ncycles = 3\n", "cycles", 2),
    ])
    def test_errors_point_at_line_and_field(self, text, field, line):
        with pytest.raises(ConfigError) as exc:
            loads_config(text)
        assert (exc.value.field, exc.value.line) == (field, line)

    def test_no_equals(self):
        with pytest.raises(ConfigError) as exc:
            loads_config("cycles 2\n")
        assert exc.value.line == 1

    def test_out_of_range_model_value(self):
        with pytest.raises(ConfigError) as exc:
            loads_config("cycles = 2\ncycle_model.visibility = 1.5\n")
        assert exc.value.field == "cycle_model"

    def test_digest_ignores_order_comments_and_spelling(self):
        a = loads_config(BASIC)
        lines = [ln for ln in BASIC.splitlines() if not ln.startswith("#")]
        b = loads_config("\n".join(reversed(lines)).replace("= 5", "= 5.000") + "\n# trailing\n")
        assert config_digest(a) == config_digest(b)
        assert config_digest(a) != config_digest(loads_config(BASIC.replace("seed = 17", "seed = 18")))

    def test_canonical_rendering_round_trips(self):
        cfg = loads_config(BASIC + "analyzer_theta = 12.5\n")
        assert loads_config(format_config(cfg)) == cfg

    def test_digest_checked_when_present(self):
        cfg = loads_config(BASIC)
        text = format_config(cfg, [("digest", config_digest(cfg))])
        assert loads_config(text) == cfg
        with pytest.raises(ConfigError) as exc:
            loads_config(text.replace("duration = 5.0", "duration = 6.0"))
        assert exc.value.field == "digest"


def test_sweep_angles():
    assert sweep_angles(0, 180, 10) == [float(x) for x in range(0, 181, 10)]
    assert sweep_angles(30, 30, 10) == [30]
    with pytest.raises(ConfigError):
        sweep_angles(0, 10, 0)
    with pytest.raises(ConfigError):
        sweep_angles(10, 0, 5)


class TestValidate:
    def test_default_timing_passes(self, tmp_path, capsys):
        assert main(["validate", "--config", write(tmp_path, BASIC)]) == EXIT_OK
        out = capsys.readouterr().out
        assert "FAIL" not in out and out.count("PASS") == 4

    def test_slow_rise_rejected(self, tmp_path, capsys):
        cfg = write(tmp_path, BASIC + "drive.round_trip = 8\n")
        assert main(["validate", "--config", cfg]) == EXIT_INFEASIBLE
        assert "FAIL rise_time < round_trip: rise time exceeds round trip" in capsys.readouterr().out

    def test_print_resolved(self, tmp_path, capsys):
        assert main(["validate", "--print-resolved", "--config", write(tmp_path, BASIC)]) == EXIT_OK
        out = capsys.readouterr().out
        assert "cycles = 3" in out and "# synthesized drive.gd1_delay = 1.65" in out

    def test_seed_override(self, tmp_path, capsys):
        main(["validate", "--print-resolved", "--seed", "0x10", "--config", write(tmp_path, BASIC)])
        assert "seed = 16" in capsys.readouterr().out


class TestExitCodes:
    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["validate", "--config", str(tmp_path / "nope.cfg")]) == EXIT_CONFIG
        assert "config error" in capsys.readouterr().err

    def test_bad_config(self, tmp_path, capsys):
        assert main(["histogram", "--config", write(tmp_path, "duration = 1\n"),
                     "--out", str(tmp_path / "h.csv")]) == EXIT_CONFIG
        assert "cycles" in capsys.readouterr().err

    def test_usage(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["histogram"])
        assert exc.value.code == EXIT_USAGE

    def test_threads_must_be_positive(self, tmp_path):
        assert main(["validate", "--threads", "0", "--config", write(tmp_path, BASIC)]) == EXIT_USAGE

    def test_infeasible_run(self, tmp_path):
        out = tmp_path / "h.csv"
        assert main(["histogram", "--config", write(tmp_path, BASIC.replace("rise_time = 10", "rise_time = 14")),
                     "--out", str(out)]) == EXIT_INFEASIBLE
        assert not out.exists()

    @pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
    def test_unwritable_directory(self, tmp_path):
        d = tmp_path / "ro"
        d.mkdir()
        d.chmod(stat.S_IRUSR | stat.S_IXUSR)
        try:
            assert main(["histogram", "--config", write(tmp_path, BASIC), "--out", str(d / "h.csv")]) == EXIT_IO
            assert os.listdir(d) == []
        finally:
            d.chmod(stat.S_IRWXU)

    def test_missing_output_directory(self, tmp_path):
        target = tmp_path / "absent" / "h.csv"
        assert main(["histogram", "--config", write(tmp_path, BASIC), "--out", str(target)]) == EXIT_IO
        assert not target.parent.exists()

    def test_second_file_failure_leaves_nothing(self, tmp_path):
        # the sidecar path is a directory, so the second rename fails
        (tmp_path / "h.meta").mkdir()
        out = tmp_path / "h.csv"
        assert main(["histogram", "--config", write(tmp_path, BASIC), "--out", str(out)]) == EXIT_IO
        assert not out.exists()
        assert sorted(p.name for p in tmp_path.iterdir()) == ["h.meta", "run.cfg"]

    def test_failed_rerun_keeps_previous_outputs(self, tmp_path):
        cfg = write(tmp_path, BASIC)
        out = tmp_path / "h.csv"
        main(["histogram", "--config", cfg, "--out", str(out)])
        before = out.read_bytes()
        (tmp_path / "h.meta").unlink()
        (tmp_path / "h.meta").mkdir()
        assert main(["histogram", "--config", cfg, "--out", str(out), "--seed", "1"]) == EXIT_IO
        assert out.read_bytes() == before
        assert sorted(p.name for p in tmp_path.iterdir()) == ["h.csv", "h.meta", "run.cfg"]


class TestHistogramCommand:
    def test_outputs(self, tmp_path, capsys):
        out = tmp_path / "h.csv"
        assert main(["histogram", "--config", write(tmp_path, BASIC), "--out", str(out)]) == EXIT_OK
        rows = out.read_text().splitlines()
        assert rows[0] == "bin_start_ns,bin_end_ns,counts"
        assert len(rows) == 1 + ExperimentConfig(cycles=3).bin_edges().size - 1
        assert sum(int(r.split(",")[2]) for r in rows[1:]) > 0
        manifest = capsys.readouterr().out
        cfg = loads_config(BASIC)
        assert f"config_digest = {config_digest(cfg)}" in manifest
        assert f"tool_version = {__version__}" in manifest
        assert "seed = 17" in manifest

    def test_sidecar_reloads_to_same_config(self, tmp_path):
        out = tmp_path / "h.csv"
        main(["histogram", "--config", write(tmp_path, BASIC), "--out", str(out)])
        side = (tmp_path / "h.meta").read_text()
        assert "uncalibrated = pair_rate," in side and "run.n_pairs = " in side
        assert loads_config(side) == loads_config(BASIC)

    def test_zero_duration_writes_header_only(self, tmp_path):
        out = tmp_path / "h.csv"
        cfg = write(tmp_path, BASIC.replace("duration = 5", "duration = 0"))
        assert main(["histogram", "--config", cfg, "--out", str(out)]) == EXIT_OK
        assert out.read_text() == "bin_start_ns,bin_end_ns,counts\n"

    def test_byte_identical_reruns(self, tmp_path):
        cfg = write(tmp_path, BASIC)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["histogram", "--config", cfg, "--out", str(a)])
        main(["histogram", "--config", cfg, "--out", str(b), "--threads", "3"])
        assert a.read_bytes() == b.read_bytes()
        assert (tmp_path / "a.meta").read_bytes() == (tmp_path / "b.meta").read_bytes()


class TestSweepCommand:
    def test_single_angle_has_no_fit(self, tmp_path):
        out = tmp_path / "s.csv"
        assert main(["sweep", "--config", write(tmp_path, BASIC), "--out", str(out),
                     "--theta-start", "30", "--theta-end", "30"]) == EXIT_OK
        rows = out.read_text().splitlines()
        assert rows[0] == "theta_deg,counts,poisson_sigma" and len(rows) == 2
        assert "fit." not in (tmp_path / "s.meta").read_text()

    def test_full_sweep(self, tmp_path):
        out = tmp_path / "s.csv"
        cfg = write(tmp_path, BASIC.replace("duration = 5", "duration = 60"))
        assert main(["sweep", "--config", cfg, "--out", str(out)]) == EXIT_OK
        rows = out.read_text().splitlines()[1:]
        assert [float(r.split(",")[0]) for r in rows] == [float(t) for t in range(0, 181, 10)]
        side = (tmp_path / "s.meta").read_text()
        theta0 = float(next(ln for ln in side.splitlines() if ln.startswith("fit.theta0_deg")).split("=")[1])
        assert theta0 == pytest.approx(30.0, abs=2.0)
        # the analyzer is owned by the sweep, so the sidecar still reloads
        assert loads_config(side).analyzer_theta is None

    def test_analyzer_in_config_is_overridden(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["sweep", "--config", write(tmp_path, BASIC), "--out", str(a)])
        main(["sweep", "--config", write(tmp_path, BASIC + "analyzer_theta = 77\n", "b.cfg"), "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()
