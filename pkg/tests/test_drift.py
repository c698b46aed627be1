import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from photonlock import drift
from photonlock.drift import (
    Composite,
    DopplerParams,
    FromASD,
    Linear,
    NoDrift,
    NoiseSpectrum,
    Wiener,
    doppler_drift_rate,
    drift_increment,
    drift_trace,
    synthesize_from_asd,
)
from photonlock.errors import ConfigError, DriftNotSynthesizedError
from photonlock.estimators import PhaseTrace, increment_deviation, loglog_slope

D_FIBER = 4e-3**2


def test_wiener_zero_diffusion(rng):
    assert drift_increment(Wiener(0.0), 3.0, rng) == 0.0


def test_wiener_std_one_second(rng):
    x = np.array([drift_increment(Wiener(D_FIBER), 1.0, rng) for _ in range(100_000)])
    assert x.std() == pytest.approx(4e-3, rel=0.03)


def test_linear_increment_exact(rng):
    assert drift_increment(Linear(0.08), 0.5, rng) == 0.04


def test_nodrift_and_composite(rng):
    assert drift_increment(NoDrift(), 1.0, rng) == 0.0
    c = Composite([Linear(0.1), Linear(0.2), NoDrift()])
    assert drift_increment(c, 2.0, rng) == pytest.approx(0.6)


def test_bad_inputs(rng):
    with pytest.raises(ConfigError):
        Wiener(-1.0)
    with pytest.raises(ConfigError):
        drift_increment(Linear(1.0), 0.0, rng)


def test_fromasd_requires_synthesis(rng):
    m = FromASD(NoiseSpectrum.wiener(1e-6))
    with pytest.raises(DriftNotSynthesizedError):
        drift_increment(m, 0.1, rng)
    ready = drift.prepare(m, 10.0, rng)
    assert ready.horizon >= 10.0
    assert ready.value_at(0.0) == 0.0
    with pytest.raises(DriftNotSynthesizedError):
        ready.value_at(ready.horizon + 1.0)
    inc = drift_increment(ready, 1.0, rng, t=2.0)
    assert inc == pytest.approx(ready.value_at(3.0) - ready.value_at(2.0))


def test_doppler_examples():
    p = DopplerParams(500e3, 7.6e3, 1550e-9, 170e-12)
    assert p.chirp == pytest.approx(7.45e7, rel=2e-3)
    c_over_lambda = 299_792_458 / 1550e-9
    # quoted as an order-of-magnitude relation
    assert p.chirp / (c_over_lambda * 4e-7) == pytest.approx(1.0, rel=0.05)
    assert doppler_drift_rate(p) == pytest.approx(0.0796, rel=2e-3)
    assert doppler_drift_rate(DopplerParams(500e3, 7.6e3, 1550e-9, 0.0)) == 0.0
    with pytest.raises(ConfigError):
        DopplerParams(0.0, 7.6e3, 1550e-9, 1e-9)


class TestNoiseSpectrum:
    def test_validation(self):
        with pytest.raises(ConfigError):
            NoiseSpectrum(np.array([]), np.array([]))
        with pytest.raises(ConfigError):
            NoiseSpectrum(np.array([1.0, 1.0]), np.array([1.0, 1.0]))
        with pytest.raises(ConfigError):
            NoiseSpectrum(np.array([1.0, 2.0]), np.array([1.0, -1.0]))
        with pytest.raises(ConfigError):
            NoiseSpectrum(np.array([1.0]), np.array([1.0]), "three")

    def test_sidedness_conversion(self):
        one = NoiseSpectrum(np.array([1.0, 10.0]), np.array([2.0, 2.0]), "one")
        two = NoiseSpectrum(np.array([1.0, 10.0]), np.array([2.0, 2.0]), "two")
        assert one.psd(3.0, "one") == pytest.approx(4.0)
        assert one.psd(3.0, "two") == pytest.approx(2.0)
        assert two.psd(3.0, "one") == pytest.approx(8.0)
        assert two.to_one_sided().psd(3.0, "one") == pytest.approx(8.0)
        assert one.variance(1.0, 10.0) == pytest.approx(4.0 * 9.0, rel=1e-9)

    def test_loglog_interpolation_exact_for_power_law(self):
        s = NoiseSpectrum(np.array([1.0, 100.0]), np.array([1.0, 0.01]))
        f = np.geomspace(1, 100, 17)
        np.testing.assert_allclose(s.psd(f), f**-2.0, rtol=1e-12)

    def test_boundary_hold(self):
        s = NoiseSpectrum(np.array([1.0, 100.0]), np.array([3.0, 0.5]))
        assert s.psd(1e-3) == pytest.approx(9.0)
        assert s.psd(1e5) == pytest.approx(0.25)

    def test_wiener_table_is_two_sided_walk(self):
        s = NoiseSpectrum.wiener(D_FIBER)
        f = np.array([1e-3, 0.1, 10.0])
        np.testing.assert_allclose(s.psd(f, "two"), D_FIBER / (4 * math.pi**2 * f**2), rtol=1e-12)

    def test_csv_roundtrip_and_errors(self, tmp_path):
        s = NoiseSpectrum(np.array([0.1, 1.0, 10.0]), np.array([1e-3, 2e-4, 5e-5]))
        p = tmp_path / "s.csv"
        s.to_csv(p)
        back = NoiseSpectrum.from_csv(p)
        np.testing.assert_array_equal(back.frequencies, s.frequencies)
        np.testing.assert_array_equal(back.asd, s.asd)
        p.write_text("freq_hz,asd_rad_per_sqrthz\n1,2\nabc,3\n")
        with pytest.raises(ConfigError, match=":3:"):
            NoiseSpectrum.from_csv(p)
        p.write_text("f,a\n1,2\n")
        with pytest.raises(ConfigError):
            NoiseSpectrum.from_csv(p)

    def test_shipped_spectrum(self):
        s = drift.fiber_drift_spectrum()
        assert s.sidedness == "one"
        assert s.frequencies[0] <= 1e-6 and s.frequencies[-1] >= 1e3
        f = np.geomspace(1e-5, 1e3, 9)
        np.testing.assert_allclose(s.psd(f, "two"), D_FIBER / (4 * math.pi**2 * f**2), rtol=1e-6)


class TestSynthesis:
    def test_flat_asd_variance(self):
        a0, fs, dur = 1e-2, 100.0, 20.0
        spec = NoiseSpectrum(np.array([1e-3, 1e3]), np.array([a0, a0]))
        rng = np.random.default_rng(1)
        var = np.mean([synthesize_from_asd(spec, dur, fs, rng).var() for _ in range(100)])
        assert var == pytest.approx(a0**2 * (fs / 2 - 1 / dur), rel=0.10)

    def test_inverse_f_asd_gives_half_slope(self):
        # ASD ~ 1/f is a random walk: increment deviation grows as sqrt(tau)
        spec = NoiseSpectrum.wiener(D_FIBER, 1e-6, 1e6)
        fs = 100.0
        x = synthesize_from_asd(spec, 2000.0, fs, np.random.default_rng(2))
        taus = np.geomspace(0.02, 2.0, 9).round(2)
        dev = increment_deviation(PhaseTrace(x, fs), taus)
        assert loglog_slope(dev.taus, dev.deviation) == pytest.approx(0.5, abs=0.05)
        # and the absolute level matches sqrt(D tau)
        np.testing.assert_allclose(dev.deviation, np.sqrt(D_FIBER * dev.taus), rtol=0.1)

    def test_zero_asd_gives_zero_trace(self):
        spec = NoiseSpectrum(np.array([1.0, 10.0]), np.array([0.0, 0.0]))
        assert not np.any(synthesize_from_asd(spec, 10.0, 10.0, np.random.default_rng(0)))

    def test_deterministic(self):
        spec = drift.fiber_drift_spectrum()
        a = synthesize_from_asd(spec, 50.0, 20.0, np.random.default_rng(7))
        b = synthesize_from_asd(spec, 50.0, 20.0, np.random.default_rng(7))
        np.testing.assert_array_equal(a, b)

    def test_too_short(self):
        with pytest.raises(ConfigError):
            synthesize_from_asd(NoiseSpectrum.wiener(1.0), 0.1, 10.0, np.random.default_rng(0))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(4, 400), st.floats(1.0, 1e3))
    def test_real_output_length(self, n, fs):
        x = synthesize_from_asd(NoiseSpectrum.wiener(1e-4), n / fs, fs, np.random.default_rng(n))
        assert x.shape == (n,) and np.all(np.isfinite(x))


def test_wiener_increments_independent():
    n = 1_000_000
    t = np.arange(n + 1) * 1e-3
    x = drift_trace(Wiener(D_FIBER), t, np.random.default_rng(3))
    inc = np.diff(x)
    rho = np.corrcoef(inc[:-1], inc[1:])[0, 1]
    assert abs(rho) < 3 / math.sqrt(n)


def test_composite_mean_and_variance():
    d, t_end = 0.05, 10.0
    model = Composite([Wiener(D_FIBER), Linear(d)])
    rng = np.random.default_rng(4)
    times = np.linspace(0, t_end, 11)
    ends = np.array([drift_trace(model, times, rng)[-1] for _ in range(100)])
    se = math.sqrt(D_FIBER * t_end / 100)
    assert abs(ends.mean() - d * t_end) < 3 * se
    assert np.var(ends - d * t_end) == pytest.approx(D_FIBER * t_end, rel=0.3)
    # the same check with more realizations at the stated 10 %
    ends = np.array([drift_trace(model, times, rng)[-1] for _ in range(2000)])
    assert np.var(ends - d * t_end) == pytest.approx(D_FIBER * t_end, rel=0.10)


def test_flatten_sums_members():
    m = Composite([Wiener(1.0), Composite([Wiener(2.0), Linear(0.5)]), Linear(-0.25)])
    dsum, rate, asds = drift.flatten(m)
    assert (dsum, rate, asds) == (3.0, 0.25, [])
