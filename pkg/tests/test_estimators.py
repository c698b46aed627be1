import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from photonlock import estimators as es
from photonlock.errors import ConfigError, UnstableFitError


def ar1(theta, sigma, fs, n, seed):
    """Exact discretization of an OU process (independent of the simulator)."""
    rng = np.random.default_rng(seed)
    a = math.exp(-theta / fs)
    noise = rng.normal(0.0, sigma * math.sqrt(1 - a * a), n)
    x = np.empty(n)
    x[0] = rng.normal(0.0, sigma)
    for k in range(1, n):
        x[k] = a * x[k - 1] + noise[k]
    return x


class TestDeviation:
    def test_linear_ramp_exact(self):
        fs, d = 100.0, -0.3
        tr = es.PhaseTrace(d * np.arange(5000) / fs, fs)
        taus = np.array([0.01, 0.1, 1.0, 10.0])
        dev = es.increment_deviation(tr, taus)
        np.testing.assert_allclose(dev.deviation, abs(d) * taus, rtol=1e-9)
        assert es.loglog_slope(dev.taus, dev.deviation) == pytest.approx(1.0, abs=1e-9)
        second = es.increment_deviation(tr, taus, "second")
        np.testing.assert_allclose(second.deviation, 0.0, atol=1e-9)

    def test_constant_trace(self):
        dev = es.increment_deviation(es.PhaseTrace(np.full(100, 1.3), 10.0), [0.1, 1.0])
        assert np.all(dev.deviation == 0.0)

    def test_random_walk_level(self):
        rng = np.random.default_rng(0)
        fs, D = 1000.0, 1.6e-5
        x = np.cumsum(rng.normal(0, math.sqrt(D / fs), 200_000))
        tr = es.PhaseTrace(x, fs)
        dev = es.increment_deviation(tr, es.log_taus(tr, 5, 1e-3, 3.0))
        assert es.loglog_slope(dev.taus, dev.deviation) == pytest.approx(0.5, abs=0.05)
        np.testing.assert_allclose(dev.deviation, np.sqrt(D * dev.taus), rtol=0.1)
        assert np.all(dev.error > 0) and np.all(dev.n_pairs > 0)

    def test_errors(self):
        tr = es.PhaseTrace(np.arange(100.0), 10.0)
        with pytest.raises(ConfigError):
            es.increment_deviation(tr, [0.15])  # not a whole number of samples
        with pytest.raises(ConfigError):
            es.increment_deviation(tr, [6.0])  # too long
        with pytest.raises(ConfigError):
            es.increment_deviation(tr, [1.0], "third")
        with pytest.raises(ConfigError):
            es.PhaseTrace(np.array([1.0]), 1.0)
        with pytest.raises(ConfigError):
            es.PhaseTrace(np.zeros(3), 0.0)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000))
    def test_triangle_inequality(self, seed):
        rng = np.random.default_rng(seed)
        a = np.cumsum(rng.normal(size=400))
        b = rng.normal(size=400) + np.linspace(0, 5, 400)
        taus = [0.1, 0.5, 2.0]
        f = lambda x: es.increment_deviation(es.PhaseTrace(x, 10.0), taus).deviation  # noqa: E731
        assert np.all(f(a + b) <= f(a) + f(b) + 1e-12)

    def test_log_taus_unique_multiples(self):
        tr = es.PhaseTrace(np.zeros(10_000), 100.0)
        taus = es.log_taus(tr, 10)
        m = taus * 100.0
        np.testing.assert_allclose(m, np.round(m))
        assert np.all(np.diff(taus) > 0)
        assert taus[0] == pytest.approx(0.01)

    def test_stitch(self):
        short = es.DeviationCurve(np.array([0.1, 0.5, 1.0, 2.0]), np.ones(4), np.ones(4), np.ones(4))
        long = es.DeviationCurve(np.array([0.5, 1.0, 5.0]), 2 * np.ones(3), np.ones(3), np.ones(3))
        out = es.stitch(short, long, 1.0)
        np.testing.assert_array_equal(out.taus, [0.1, 0.5, 1.0, 5.0])
        np.testing.assert_array_equal(out.deviation, [1, 1, 2, 2])


class TestPsd:
    def test_white_noise_level(self):
        fs, sigma = 50.0, 0.3
        x = np.random.default_rng(1).normal(0, sigma, 200_000)
        s = es.psd_estimate(es.PhaseTrace(x, fs), 16)
        assert s.sidedness == "one"
        assert np.mean(s.asd**2) == pytest.approx(2 * sigma**2 / fs, rel=0.10)

    def test_parseval(self):
        x = np.random.default_rng(2).normal(0, 1.0, 100_000)
        s = es.psd_estimate(es.PhaseTrace(x, 10.0), 8)
        df = s.frequencies[1] - s.frequencies[0]
        assert np.sum(s.asd**2) * df == pytest.approx(x.var(), rel=0.05)

    def test_tone_power(self):
        fs, A, f0 = 100.0, 0.7, 5.0
        t = np.arange(100_000) / fs
        s = es.psd_estimate(es.PhaseTrace(A * np.sin(2 * np.pi * f0 * t), fs), 8)
        df = s.frequencies[1] - s.frequencies[0]
        peak = np.abs(s.frequencies - f0) < 0.2
        assert np.sum(s.asd[peak] ** 2) * df == pytest.approx(A**2 / 2, rel=0.02)

    def test_offset_invariance(self):
        x = np.random.default_rng(3).normal(size=4096)
        a = es.psd_estimate(es.PhaseTrace(x, 1.0))
        b = es.psd_estimate(es.PhaseTrace(x + 123.0, 1.0))
        np.testing.assert_allclose(a.asd, b.asd, rtol=1e-7, atol=1e-12)

    def test_degenerate(self):
        with pytest.raises(ConfigError):
            es.psd_estimate(es.PhaseTrace(np.zeros(10), 1.0), 8)


class TestOuFit:
    def test_recovers_theta_and_sigma(self):
        fs, theta, sigma = 20.0, 0.5, 4.33e-3
        x = ar1(theta, sigma, fs, 40_000, 4)  # 2000 s, theta * T = 1000
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            fit = es.ou_fit(es.PhaseTrace(x, fs))
        assert fit.theta == pytest.approx(theta, rel=0.10)
        assert fit.sigma_stat == pytest.approx(sigma, rel=0.05)
        assert not fit.out_of_band

    def test_random_walk_is_unstable(self):
        x = np.cumsum(np.random.default_rng(5).normal(size=10_000)) + np.arange(10_000) * 0.01
        with pytest.raises(UnstableFitError):
            es.ou_fit(es.PhaseTrace(x, 10.0))

    def test_white_noise_out_of_band(self):
        x = np.random.default_rng(6).normal(size=10_000)
        with pytest.warns(RuntimeWarning, match="out of band"):
            fit = es.ou_fit(es.PhaseTrace(x, 10.0))
        assert fit.out_of_band
        assert fit.theta > 10.0 * math.log(math.e)

    def test_short_trace_rejected(self):
        x = ar1(0.5, 1.0, 10.0, 100, 7)  # only 5 decay times
        with pytest.raises(UnstableFitError):
            es.ou_fit(es.PhaseTrace(x, 10.0))

    def test_finite_random_walk_rejected_across_seeds(self):
        fails = 0
        for seed in range(100):
            x = np.cumsum(np.random.default_rng(seed).normal(size=5000))
            try:
                es.ou_fit(es.PhaseTrace(x, 10.0))
                fails += 1
            except UnstableFitError:
                pass
        assert fails <= 5  # 1 % nominal false-stable rate


def test_exponential_fit():
    t = np.linspace(0, 10, 200)
    tau, amp = es.fit_exponential_decay(t, 0.5 * np.exp(-t / 2.0))
    assert (tau, amp) == pytest.approx((2.0, 0.5), rel=1e-6)


class TestCsv:
    def test_roundtrip(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("t_s,phase_rad\n0.0,1\n0.5,2\n1.0,3\n")
        tr = es.PhaseTrace.from_csv(p)
        assert tr.f_s == pytest.approx(2.0)
        np.testing.assert_array_equal(tr.samples, [1, 2, 3])

    def test_simulator_column(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("t_s,phase_error_rad,command_rad\n0,1,9\n1,2,9\n")
        np.testing.assert_array_equal(es.PhaseTrace.from_csv(p).samples, [1, 2])

    @pytest.mark.parametrize("body,match", [
        ("t_s,phase_rad\n0,1\n1,x\n", ":3:"),
        ("time,phase_rad\n0,1\n", ":1:"),
        ("t_s,phase_rad\n0,1\n1,1\n3,1\n", "uniform"),
        ("t_s,other\n0,1\n1,1\n", "no column"),
    ])
    def test_malformed(self, tmp_path, body, match):
        p = tmp_path / "t.csv"
        p.write_text(body)
        with pytest.raises(ConfigError, match=match):
            es.PhaseTrace.from_csv(p)
