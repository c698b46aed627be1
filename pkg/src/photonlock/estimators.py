"""Estimators that turn phase traces back into model parameters.

* :func:`increment_deviation` - RMS phase change over a lag (Allan-type).
* :func:`psd_estimate` - averaged, Hann-windowed periodogram (Welch).
* :func:`ou_fit` - stiffness and stationary spread from a lag-1 regression.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, signal

from photonlock.drift import NoiseSpectrum
from photonlock.errors import ConfigError, UnstableFitError


@dataclass(frozen=True, eq=False)
class PhaseTrace:
    samples: np.ndarray
    f_s: float
    t0: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float)
        if x.ndim != 1 or x.size < 2:
            raise ConfigError("a phase trace needs at least 2 samples")
        if not self.f_s > 0:
            raise ConfigError("sampling rate must be > 0")
        object.__setattr__(self, "samples", x)

    @property
    def span(self) -> float:
        return (self.samples.size - 1) / self.f_s

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.samples.size) / self.f_s

    @classmethod
    def from_csv(cls, path, column: str = "phase_rad") -> "PhaseTrace":
        """Read a uniformly sampled ``t_s,<column>`` CSV.

        Parse errors name the offending line.
        """
        ts, xs = [], []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = [h.strip() for h in next(reader, [])]
            if not header or header[0] != "t_s":
                raise ConfigError(f"{path}:1: expected a header starting with 't_s'")
            if column not in header:
                if column == "phase_rad" and "phase_error_rad" in header:
                    column = "phase_error_rad"
                else:
                    raise ConfigError(f"{path}:1: no column {column!r}")
            k = header.index(column)
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    ts.append(float(row[0]))
                    xs.append(float(row[k]))
                except (ValueError, IndexError) as exc:
                    raise ConfigError(f"{path}:{lineno}: malformed row {row!r}") from exc
        t = np.array(ts)
        if t.size < 2:
            raise ConfigError(f"{path}: fewer than 2 samples")
        dt = np.diff(t)
        if np.any(dt <= 0) or np.ptp(dt) > 1e-6 * dt.mean():
            raise ConfigError(f"{path}: samples are not uniformly spaced")
        return cls(np.array(xs), 1.0 / dt.mean(), float(t[0]))


@dataclass(frozen=True)
class DeviationCurve:
    taus: np.ndarray
    deviation: np.ndarray
    error: np.ndarray  # conservative sqrt(2 / n_pairs) relative bars
    n_pairs: np.ndarray

    def to_csv(self) -> str:
        lines = ["tau_s,deviation_rad,error_rad,n_pairs"]
        for t, d, e, n in zip(*(np.asarray(a).tolist() for a in
                                (self.taus, self.deviation, self.error, self.n_pairs))):
            lines.append(f"{t!r},{d!r},{e!r},{int(n)}")
        return "\n".join(lines) + "\n"


def increment_deviation(trace: PhaseTrace, taus, kind: str = "first") -> DeviationCurve:
    """Overlapping RMS phase increment at each lag in ``taus``.

    ``kind="first"`` gives ``sqrt(<(phi(t+tau) - phi(t))^2>)``, which grows as
    ``sqrt(D tau)`` for a random walk and ``|d| tau`` for a linear ramp.
    ``kind="second"`` gives ``sqrt(<(phi(t+2tau) - 2phi(t+tau) + phi(t))^2> / 2)``,
    which removes linear drift.
    """
    if kind not in ("first", "second"):
        raise ConfigError(f"unknown deviation kind {kind!r}")
    x = trace.samples
    order = 1 if kind == "first" else 2
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if x.size < order + 2:
        raise ConfigError("trace too short for an increment deviation")
    out_t, dev, err, npairs = [], [], [], []
    for tau in taus:
        m = int(round(tau * trace.f_s))
        if m < 1 or abs(m - tau * trace.f_s) > 1e-6 * max(m, 1):
            raise ConfigError(f"tau={tau:g} s is not a multiple of the sample interval")
        if order * m >= x.size or tau >= trace.span / 2:
            raise ConfigError(f"tau={tau:g} s too long for a {trace.span:g} s trace")
        if order == 1:
            d = x[m:] - x[:-m]
            v = np.mean(d * d)
        else:
            d = x[2 * m:] - 2.0 * x[m:-m] + x[: -2 * m]
            v = np.mean(d * d) / 2.0
        n = d.size
        s = math.sqrt(v)
        out_t.append(m / trace.f_s)
        dev.append(s)
        err.append(s * math.sqrt(2.0 / n))
        npairs.append(n)
    return DeviationCurve(np.array(out_t), np.array(dev), np.array(err), np.array(npairs))


def log_taus(trace: PhaseTrace, per_decade: int = 10, tau_min: float | None = None,
             tau_max: float | None = None) -> np.ndarray:
    """Log-spaced lags rounded to whole samples, without duplicates."""
    lo = tau_min or 1.0 / trace.f_s
    hi = tau_max or trace.span / 2.5
    n = max(int(round(per_decade * math.log10(hi / lo))) + 1, 2)
    m = np.unique(np.maximum(1, np.round(np.geomspace(lo, hi, n) * trace.f_s)).astype(int))
    return m / trace.f_s


def loglog_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def stitch(short: DeviationCurve, long: DeviationCurve, crossover: float = 1.0) -> DeviationCurve:
    """Join a fast-sampled curve (below ``crossover``) with a slow one (at and above)."""
    a = short.taus < crossover
    b = long.taus >= crossover
    return DeviationCurve(*(np.concatenate([getattr(short, k)[a], getattr(long, k)[b]])
                            for k in ("taus", "deviation", "error", "n_pairs")))


def psd_estimate(trace: PhaseTrace, n_segments: int = 8) -> NoiseSpectrum:
    """One-sided PSD by Welch averaging, returned as an ASD spectrum.

    Segments overlap by 50 % and carry a Hann window; the mean is removed per
    segment. Normalized so the PSD integrates to the trace variance.
    """
    n = trace.samples.size
    if n_segments < 1 or n < 2 * n_segments:
        raise ConfigError(f"cannot split {n} samples into {n_segments} segments")
    nperseg = (2 * n) // (n_segments + 1)
    if nperseg < 4:
        raise ConfigError("segments too short")
    f, p = signal.welch(trace.samples, fs=trace.f_s, window="hann", nperseg=nperseg,
                        noverlap=nperseg // 2, detrend="constant", scaling="density",
                        return_onesided=True)
    return NoiseSpectrum(f[1:], np.sqrt(p[1:]), "one")


# asymptotic 1 % critical value of n(a - 1), regression with intercept
DF_CRITICAL_1PCT = -20.7


@dataclass(frozen=True)
class OuFit:
    theta: float
    sigma_stat: float
    a: float  # lag-1 regression coefficient
    out_of_band: bool


def ou_fit(trace: PhaseTrace) -> OuFit:
    """Lag-1 autoregression ``phi[k+1] = a phi[k] + b``; ``theta = -f_s ln a``.

    Raises :class:`UnstableFitError` when ``a >= 1`` or when a Dickey-Fuller
    test cannot reject a unit root at the 1 % level: for a finite random walk
    the regression biases ``a`` below one, so ``a < 1`` alone proves nothing.
    Passing the test implies the record spans about 20 decay times or more.
    Decays faster than one sample (``a < 1/e``) are flagged ``out_of_band``.
    """
    x = trace.samples
    slope, _ = np.polyfit(x[:-1], x[1:], 1)
    a = float(slope)
    if a >= 1.0:
        raise UnstableFitError(f"no decay detected (lag-1 coefficient {a:.6f} >= 1)")
    theta = -trace.f_s * math.log(a) if a > 0 else math.inf
    df_stat = (x.size - 1) * (a - 1.0)
    if df_stat > DF_CRITICAL_1PCT:
        raise UnstableFitError(f"no decay detected (unit root not rejected, n(a-1) = {df_stat:.1f})")
    oob = a < math.exp(-1.0)
    if oob:
        warnings.warn("decay faster than the sampling interval; theta is out of band",
                      RuntimeWarning, stacklevel=2)
    return OuFit(theta, float(np.std(x)), a, oob)


def fit_exponential_decay(t, y, tau_guess: float | None = None) -> tuple[float, float]:
    """Fit ``A exp(-t / tau)`` by least squares; returns ``(tau, A)``."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    t = t - t[0]
    if tau_guess is None:
        tau_guess = max(t[-1] / 3.0, 1e-12)
    popt, _ = optimize.curve_fit(lambda tt, a, tau: a * np.exp(-tt / tau), t, y,
                                 p0=(y[0], tau_guess), maxfev=10000)
    return float(popt[1]), float(popt[0])


def fit_settling(t, y, restoring=None, tau_guess: float | None = None) -> float:
    """Time constant of a transient obeying ``dx/dt = -restoring(x) / tau``.

    ``restoring`` must satisfy ``restoring'(0) = 1`` so that ``tau`` is the
    small-error time constant; the default ``x`` gives plain exponential
    decay. The start value is taken from ``y[0]``.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    t = t - t[0]
    g = restoring or (lambda x: x)
    if tau_guess is None:
        tau_guess = max(t[-1] / 3.0, 1e-12)

    def model(tt, tau):
        sol = integrate.solve_ivp(lambda _, x: -g(x) / tau, (0.0, tt[-1]), [y[0]], t_eval=tt,
                                  rtol=1e-9, atol=1e-12)
        return sol.y[0]

    popt, _ = optimize.curve_fit(model, t, y, p0=(tau_guess,), bounds=(1e-12, np.inf))
    return float(popt[0])
