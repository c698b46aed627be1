import json
import math

import numpy as np
import pytest

from photonlock import cli
from photonlock.drift import NoiseSpectrum


def run(*args):
    return cli.main([str(a) for a in args])


def load(path):
    return json.loads(path.read_text())


def test_default_simulate_reproduces_operating_point(tmp_path):
    assert run("simulate", "--out-dir", tmp_path, "--sample-rate", 0) == 0
    s = load(tmp_path / "summary.json")
    assert s["schema_version"] == 1
    assert s["config"]["epsilon"] == -1e-5
    assert s["config"]["det"]["f_signal"] == 200e3
    assert s["theory"]["sigma_stat"] == pytest.approx(0.00433, rel=1e-3)
    # a single 100 s run scatters by about 13 % (1 sigma) between seeds
    assert s["sigma_phi"] == pytest.approx(0.00433, rel=0.3)
    m = load(tmp_path / "manifest.json")
    assert {"version", "seed", "command_line", "start", "end", "config"} <= set(m)
    assert s["manifest"] == "manifest.json"
    assert m["wallclock_s"] > 0


def test_invalid_duration_exits_2(tmp_path, capsys):
    assert run("simulate", "--duration", 0, "--out-dir", tmp_path) == 2
    assert "duration" in capsys.readouterr().err


def test_unknown_flag_exits_2(tmp_path):
    assert run("simulate", "--bogus", "--out-dir", tmp_path) == 2


def test_seeded_traces_are_byte_identical(tmp_path):
    args = ["simulate", "--duration", 3, "--seed", 17, "--epsilon", 1e-4, "--sample-rate", 50]
    assert run(*args, "--out-dir", tmp_path / "a") == 0
    assert run(*args, "--out-dir", tmp_path / "b") == 0
    a = (tmp_path / "a" / "trace.csv").read_bytes()
    assert a == (tmp_path / "b" / "trace.csv").read_bytes()
    assert (tmp_path / "a" / "summary.json").read_bytes() == (tmp_path / "b" / "summary.json").read_bytes()
    assert a.startswith(b"t_s,phase_error_rad,command_rad\n")


def test_no_overwrite_without_force(tmp_path, capsys):
    args = ["simulate", "--duration", 1, "--epsilon", 1e-3, "--out-dir", tmp_path]
    assert run(*args) == 0
    assert run(*args) == 2
    assert "--force" in capsys.readouterr().err
    assert run(*args, "--force") == 0


def test_json_format(tmp_path):
    assert run("simulate", "--duration", 1, "--format", "json", "--out-dir", tmp_path) == 0
    t = load(tmp_path / "trace.json")
    assert len(t["t_s"]) == len(t["phase_error_rad"]) == 21


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# lock setup\nepsilon = 2e-4\nduration = 2\ndet.f_signal = 5e4\n"
                   "drift.wiener_diffusion = 1.6e-5\ncontroller.variant = averaging\ncontroller.n = 10\n")
    out = tmp_path / "o"
    assert run("simulate", "--config", cfg, "--set", "duration=3", "--f-signal", 6e4, "--out-dir", out) == 0
    c = load(out / "summary.json")["config"]
    assert c["epsilon"] == -2e-4  # magnitude given, stable sign applied
    assert c["duration"] == 3.0 and c["det"]["f_signal"] == 6e4
    assert c["drift"] == {"kind": "wiener", "diffusion": 1.6e-5}
    assert c["controller"] == {"variant": "AveragingN", "n": 10}
    assert load(out / "manifest.json")["config"]["duration"] == "3"


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense.key = 1\n")
    assert run("simulate", "--config", bad, "--out-dir", tmp_path) == 2
    assert run("simulate", "--set", "epsilon", "--out-dir", tmp_path) == 2
    assert run("simulate", "--set", "controller.variant=pid", "--out-dir", tmp_path) == 2
    assert run("simulate", "--set", "fringe.kind=simple", "--set", "fringe.visibility=2",
               "--out-dir", tmp_path) == 2


def test_raw_epsilon_keeps_sign(tmp_path):
    assert run("simulate", "--epsilon", 1e-5, "--raw-epsilon", "--duration", 1, "--out-dir", tmp_path) == 2


def test_strict_nonconvergence_exits_3(tmp_path):
    args = ["simulate", "--duration", 20, "--set", "drift.wiener_diffusion=10", "--set", "burn_in=1",
            "--sample-rate", 0]
    assert run(*args, "--out-dir", tmp_path / "a") == 0
    assert load(tmp_path / "a" / "summary.json")["nonconverged"] is True
    assert run(*args, "--strict", "--out-dir", tmp_path / "b") == 3


def test_sweep(tmp_path):
    assert run("sweep", "--axis", "count_rate", "--values", "2e4,2e5", "--replicates", 2,
               "--epsilon", 1e-3, "--duration", 10, "--sample-rate", 0, "--out-dir", tmp_path) == 0
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[0].startswith("value,epsilon,f_signal,mean_sigma_rad,std_error_rad")
    assert len(lines) == 3
    sig = [float(l.split(",")[3]) for l in lines[1:]]
    assert sig[0] == pytest.approx(sig[1], rel=0.15)  # no count-rate dependence without drift
    assert (tmp_path / "manifest.json").exists()


def test_sweep_log_values_and_json(tmp_path):
    assert run("sweep", "--axis", "epsilon", "--values", "log:1e-3:1e-2:3", "--duration", 2,
               "--format", "json", "--sample-rate", 0, "--out-dir", tmp_path) == 0
    rows = load(tmp_path / "sweep.json")
    assert [r["epsilon"] for r in rows] == pytest.approx([-1e-3, -10**-2.5, -1e-2])


def test_sweep_empty_values_exit_2(tmp_path):
    assert run("sweep", "--axis", "epsilon", "--values", "", "--out-dir", tmp_path) == 2


class TestPlan:
    def test_wiener(self, tmp_path, capsys):
        assert run("plan", "--drift", "wiener:1.6e-5", "--f-c", 2e5, "--out-dir", tmp_path) == 0
        p = json.loads(capsys.readouterr().out)
        assert p["epsilon_opt"] == pytest.approx(-9.24e-6, rel=1e-3)
        assert p["sigma_min"] == pytest.approx(5.89e-3, rel=1e-3)
        assert p["tau"] == pytest.approx(1 / (2 * 9.2376e-6 * 0.125 * 2e5), rel=1e-3)
        assert load(tmp_path / "plan.json")["epsilon_opt"] == p["epsilon_opt"]

    def test_target_and_bandwidth(self, tmp_path):
        assert run("plan", "--drift", "linear:0.08", "--f-c", 1e3, "--target", math.pi / 100,
                   "--out-dir", tmp_path) == 0
        p = load(tmp_path / "plan.json")
        assert abs(p["epsilon_max"]) == pytest.approx(5e-4, rel=0.06)
        assert p["f_lock_at_epsilon_max"] == pytest.approx(0.02, rel=0.06)
        assert p["feasible"] is False
        assert p["f_c_min"] > 1e3

    def test_asd_file(self, tmp_path):
        f = tmp_path / "asd.csv"
        NoiseSpectrum.wiener(1.6e-5, 1e-6, 1e6).to_csv(f)
        assert run("plan", "--drift", f"asd:{f}", "--f-c", 2e5, "--out-dir", tmp_path) == 0
        p = load(tmp_path / "plan.json")
        assert p["epsilon_opt"] == pytest.approx(-9.24e-6, rel=2e-3)

    def test_bad_drift_spec(self, tmp_path):
        assert run("plan", "--drift", "sine:3", "--out-dir", tmp_path) == 2
        assert run("plan", "--drift", "wiener:abc", "--out-dir", tmp_path) == 2
        assert run("plan", "--f-c", 0, "--out-dir", tmp_path) == 2

    def test_no_drift(self, tmp_path):
        assert run("plan", "--out-dir", tmp_path) == 0
        assert load(tmp_path / "plan.json")["epsilon_opt"] is None


class TestAnalyze:
    def test_wiener_trace_slope(self, tmp_path):
        sim_dir = tmp_path / "s"
        assert run("simulate", "--epsilon", 0, "--set", "drift.wiener_diffusion=1.6e-5",
                   "--f-signal", 1e3, "--duration", 200, "--sample-rate", 1000, "--out-dir", sim_dir) == 0
        out = tmp_path / "a"
        assert run("analyze", sim_dir / "trace.csv", "--tau-min", 1e-3, "--tau-max", 3,
                   "--out-dir", out) == 0
        dev = np.loadtxt(out / "deviation.csv", delimiter=",", skiprows=1)
        slope = np.polyfit(np.log(dev[:, 0]), np.log(dev[:, 1]), 1)[0]
        assert slope == pytest.approx(0.5, abs=0.05)
        assert load(out / "ou_fit.json")["unstable"] is True
        assert (out / "psd.csv").read_text().startswith("freq_hz,asd_rad_per_sqrthz")

    def test_roundtrip_recovers_theta_and_sigma(self, tmp_path):
        sim_dir = tmp_path / "s"
        assert run("simulate", "--epsilon", 1e-4, "--duration", 402, "--sample-rate", 200,
                   "--set", "burn_in=2", "--out-dir", sim_dir) == 0
        theory = load(sim_dir / "summary.json")["theory"]
        out = tmp_path / "a"
        assert run("analyze", sim_dir / "trace.csv", "--out-dir", out) == 0
        fit = load(out / "ou_fit.json")
        assert fit["theta"] == pytest.approx(theory["theta"], rel=0.10)
        assert fit["sigma_stat"] == pytest.approx(theory["sigma_stat"], rel=0.05)

    def test_timestamp_input(self, tmp_path):
        sim_dir = tmp_path / "s"
        assert run("simulate", "--duration", 2, "--f-signal", 2e4, "--set", "record.clicks=true",
                   "--out-dir", sim_dir) == 0
        head = (sim_dir / "clicks.csv").read_text().splitlines()[:2]
        assert head[0] == "t_ns,channel"
        out = tmp_path / "a"
        assert run("analyze", sim_dir / "clicks.csv", "--epsilon", 1e-3, "--out-dir", out) == 0
        fit = load(out / "ou_fit.json")
        assert fit["source"] == "timestamps" and fit["n_clicks"] > 0

    @pytest.mark.parametrize("body,line", [
        ("t_ns,channel\n10,0\n20,x\n", ":3:"),
        ("t_ns,channel\n10,0\n5,1\n", ":3:"),
        ("t_ns,channel\n10,0\n20,7\n", ":3:"),
        ("t_s,phase_rad\n0,1\n1,2\n2,oops\n", ":4:"),
    ])
    def test_malformed_input_names_line(self, tmp_path, capsys, body, line):
        f = tmp_path / "in.csv"
        f.write_text(body)
        assert run("analyze", f, "--out-dir", tmp_path / "a") == 2
        assert line in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert run("analyze", tmp_path / "nope.csv", "--out-dir", tmp_path) == 2
