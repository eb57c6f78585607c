"""Tests for the command-line driver.

Runs ``main`` in-process for speed (stderr via capsys), plus one
``python -m`` subprocess check pinning the module entry point.  Focus:
exact output headers, exit codes with single-line diagnostics, seed and
thread overrides, and byte-level determinism of repeated invocations.
"""

import subprocess
import sys

import pytest

from dvsnoise.cli import build_parser, main

FAST_FIG7 = (
    "fig7_r_values = 1.0, 2.0\n"
    "fig7_duration_cycles = 200\n"
    "fig7_dt_cycles = 2e-3\n")

FAST_EVENT = (
    "i_photo_values = 1e-12\n"
    "i_pr_values = 1e-9\n"
    "theta_values = 0.3\n"
    "duration = 0.02\n")

FAST_SYNTH = (
    "point_i_photo = 1e-12\n"
    "point_i_pr = 1e-9\n"
    "synth_duration = 0.005\n"
    "theta_values = 0.2\n")


def run_cli(*argv):
    return main(list(argv))


def data_lines(path):
    return [ln for ln in path.read_text().splitlines()
            if not ln.startswith("#")]


class TestSubcommandOutputs:
    def test_fig7_default_config_header(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text(FAST_FIG7)
        out = tmp_path / "fig7.csv"
        assert run_cli("fig7", "--config", str(cfg), "--out", str(out)) == 0
        lines = data_lines(out)
        assert lines[0] == "r,rate_norm,stderr,n_events"
        assert len(lines) == 3
        r, rate, stderr, n = lines[1].split(",")
        assert float(r) == 1.0
        assert float(rate) > 0
        assert int(n) > 0

    def test_rms_sweep_header(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("i_photo_values = 1e-12\ni_pr_values = 1e-9\n"
                       "f_min_values = 0.001, 1\n")
        out = tmp_path / "rms.csv"
        assert run_cli("rms-sweep", "--config", str(cfg),
                       "--out", str(out)) == 0
        lines = data_lines(out)
        assert lines[0] == ("i_photo_a,i_pr_a,f_min_hz,v_rms_v,"
                            "f_n_hz,q_factor,shot_fraction")
        assert len(lines) == 3  # two f_min rows for one point
        assert float(lines[1].split(",")[2]) == 0.001

    def test_event_sweep_header(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text(FAST_EVENT)
        out = tmp_path / "ev.csv"
        assert run_cli("event-sweep", "--config", str(cfg),
                       "--out", str(out)) == 0
        lines = data_lines(out)
        assert lines[0] == ("i_photo_a,i_pr_a,theta,noise_rate_hz,"
                            "leak_rate_hz,total_rate_hz,seed")
        assert len(lines) == 2

    def test_psd_header_and_grid(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("psd_points = 12\npsd_f_min = 1\npsd_f_max = 1e4\n")
        out = tmp_path / "psd.csv"
        assert run_cli("psd", "--config", str(cfg), "--out", str(out)) == 0
        lines = data_lines(out)
        assert lines[0] == "f_hz,psd"
        assert len(lines) == 13
        assert float(lines[1].split(",")[0]) == 1.0
        assert float(lines[-1].split(",")[0]) == pytest.approx(1e4)

    def test_synth_path_and_events(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text(FAST_SYNTH)
        out = tmp_path / "path.csv"
        ev = tmp_path / "events.csv"
        assert run_cli("synth", "--config", str(cfg), "--out", str(out),
                       "--events-out", str(ev)) == 0
        path_lines = data_lines(out)
        assert path_lines[0] == "t_s,contrast"
        assert float(path_lines[1].split(",")[0]) == 0.0
        ev_lines = data_lines(ev)
        assert ev_lines[0] == "t_us,polarity"
        for row in ev_lines[1:]:
            t_us, pol = row.split(",")
            assert int(pol) in (1, -1)
            assert int(t_us) >= 0

    def test_config_echo_present_in_output(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text(FAST_FIG7 + "master_seed = 11\n")
        out = tmp_path / "fig7.csv"
        run_cli("fig7", "--config", str(cfg), "--out", str(out))
        text = out.read_text()
        assert "# master_seed = 11" in text
        assert "# fig7_duration_cycles = 200.0" in text


class TestDeterminismAndOverrides:
    def test_identical_runs_byte_identical(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text(FAST_EVENT)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run_cli("event-sweep", "--config", str(cfg), "--out", str(a))
        run_cli("event-sweep", "--config", str(cfg), "--out", str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_thread_override_keeps_bytes(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text(FAST_EVENT.replace("i_photo_values = 1e-12",
                                          "i_photo_values = 3e-13, 1e-12"))
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run_cli("event-sweep", "--config", str(cfg), "--out", str(a),
                "--threads", "1")
        run_cli("event-sweep", "--config", str(cfg), "--out", str(b),
                "--threads", "5")
        assert a.read_bytes() == b.read_bytes()

    def test_seed_override_changes_results(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text(FAST_FIG7)
        a, b, c = (tmp_path / n for n in ("a.csv", "b.csv", "c.csv"))
        run_cli("fig7", "--config", str(cfg), "--out", str(a), "--seed", "1")
        run_cli("fig7", "--config", str(cfg), "--out", str(b), "--seed", "2")
        run_cli("fig7", "--config", str(cfg), "--out", str(c), "--seed", "1")
        assert a.read_bytes() != b.read_bytes()
        assert a.read_bytes() == c.read_bytes()

    def test_no_config_uses_defaults(self, tmp_path):
        out = tmp_path / "psd.csv"
        assert run_cli("psd", "--out", str(out)) == 0
        assert data_lines(out)[0] == "f_hz,psd"


class TestFailureModes:
    def test_missing_config_file(self, tmp_path, capsys):
        out = tmp_path / "x.csv"
        code = run_cli("fig7", "--config", str(tmp_path / "absent.cfg"),
                       "--out", str(out))
        assert code == 1
        err = capsys.readouterr().err
        assert err.count("\n") == 1  # single-line diagnostic
        assert "absent.cfg" in err

    def test_bad_config_key_reports_file_and_line(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("dt_rule = 25\nbogus_key = 3\n")
        code = run_cli("fig7", "--config", str(cfg), "--out",
                       str(tmp_path / "x.csv"))
        assert code == 1
        err = capsys.readouterr().err
        assert "bad.cfg:2" in err
        assert "bogus_key" in err

    def test_invalid_value_reports_key(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("dt_rule = 5\n")
        assert run_cli("fig7", "--config", str(cfg), "--out",
                       str(tmp_path / "x.csv")) == 1
        assert "dt_rule" in capsys.readouterr().err

    def test_unwritable_output_path(self, tmp_path, capsys):
        code = run_cli("psd", "--out", str(tmp_path / "no" / "dir" / "x.csv"))
        assert code == 1
        assert "error" in capsys.readouterr().err

    def test_missing_subcommand_exits_nonzero(self):
        with pytest.raises(SystemExit) as exc:
            build_parser().parse_args([])
        assert exc.value.code == 2

    def test_unknown_subcommand_exits_nonzero(self):
        with pytest.raises(SystemExit) as exc:
            build_parser().parse_args(["frobnicate"])
        assert exc.value.code == 2

    def test_out_flag_required(self):
        with pytest.raises(SystemExit) as exc:
            build_parser().parse_args(["psd"])
        assert exc.value.code == 2


class TestModuleEntryPoint:
    def test_python_dash_m_runs(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("psd_points = 8\n")
        out = tmp_path / "psd.csv"
        proc = subprocess.run(
            [sys.executable, "-m", "dvsnoise", "psd", "--config", str(cfg),
             "--out", str(out)],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        assert data_lines(out)[0] == "f_hz,psd"
