"""Exogenous interferometer phase drift.

Drift models are small immutable values. ``Wiener`` and ``Linear`` are
sampled directly per time step; ``FromASD`` shapes white noise to a tabulated
amplitude spectral density and must be synthesized for a run horizon before
use (see :func:`prepare`).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Union

import numpy as np
from scipy.integrate import trapezoid

from photonlock.errors import ConfigError, DriftNotSynthesizedError

SIDEDNESS = ("one", "two")


@dataclass(frozen=True, eq=False)
class NoiseSpectrum:
    """Tabulated amplitude spectral density in rad/sqrt(Hz).

    Values between table points are interpolated linearly in log-log space;
    outside the table the boundary value is held constant. A one-sided PSD is
    twice the two-sided one, so both integrate to the same variance.
    """

    frequencies: np.ndarray
    asd: np.ndarray
    sidedness: str = "one"

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        a = np.asarray(self.asd, dtype=float)
        if f.ndim != 1 or f.size == 0:
            raise ConfigError("noise spectrum is empty")
        if f.shape != a.shape:
            raise ConfigError("frequencies and asd differ in length")
        if np.any(f <= 0) or np.any(np.diff(f) <= 0):
            raise ConfigError("spectrum frequencies must be > 0 and strictly increasing")
        if np.any(a < 0) or not np.all(np.isfinite(a)):
            raise ConfigError("asd values must be finite and >= 0")
        if self.sidedness not in SIDEDNESS:
            raise ConfigError(f"sidedness must be one of {SIDEDNESS}")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "asd", a)

    @classmethod
    def wiener(cls, diffusion: float, f_min: float = 1e-9, f_max: float = 1e9) -> "NoiseSpectrum":
        """Spectrum of a random walk whose variance grows as ``diffusion * t``.

        Two-sided ``S(f) = D / (4 pi^2 f^2)``; a two-point table suffices
        because a power law is exact under log-log interpolation.
        """
        f = np.array([f_min, f_max])
        return cls(f, np.sqrt(diffusion / (2.0 * math.pi**2 * f**2)), "one")

    def psd(self, f, sided: str = "one"):
        """PSD at ``f`` (Hz, > 0), one- or two-sided."""
        f = np.asarray(f, dtype=float)
        fr, a = self.frequencies, self.asd
        if fr.size == 1:
            s = np.full_like(f, a[0] ** 2)
        elif np.all(a > 0):
            s = np.exp(2.0 * np.interp(np.log(f), np.log(fr), np.log(a)))
        else:
            s = np.interp(np.log(f), np.log(fr), a) ** 2
        if self.sidedness != sided:
            s = s * (2.0 if sided == "one" else 0.5)
        return s

    def to_one_sided(self) -> "NoiseSpectrum":
        if self.sidedness == "one":
            return self
        return NoiseSpectrum(self.frequencies, self.asd * math.sqrt(2.0), "one")

    def variance(self, f_lo: float | None = None, f_hi: float | None = None) -> float:
        """Trapezoidal integral of the one-sided PSD over the table (or a sub-band)."""
        f = self.frequencies
        lo = f[0] if f_lo is None else f_lo
        hi = f[-1] if f_hi is None else f_hi
        grid = np.geomspace(lo, hi, 4096)
        return float(trapezoid(self.psd(grid, "one"), grid))

    @classmethod
    def from_csv(cls, path) -> "NoiseSpectrum":
        """Read ``freq_hz,asd_rad_per_sqrthz`` (one-sided, ascending)."""
        freqs, asd = [], []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["freq_hz", "asd_rad_per_sqrthz"]:
                raise ConfigError(f"{path}: expected header 'freq_hz,asd_rad_per_sqrthz'")
            for lineno, row in enumerate(reader, start=2):
                if not row or row[0].startswith("#"):
                    continue
                try:
                    freqs.append(float(row[0]))
                    asd.append(float(row[1]))
                except (ValueError, IndexError) as exc:
                    raise ConfigError(f"{path}:{lineno}: cannot parse {row!r}") from exc
        return cls(np.array(freqs), np.array(asd), "one")

    def to_csv(self, path) -> None:
        one = self.to_one_sided()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["freq_hz", "asd_rad_per_sqrthz"])
            for f, a in zip(one.frequencies, one.asd):
                w.writerow([repr(float(f)), repr(float(a))])


def fiber_drift_spectrum() -> NoiseSpectrum:
    """Shipped stand-in for a measured free-drift spectrum.

    A pure random walk with ``D = (4 mrad)^2 / s`` tabulated from 1 uHz to
    10 kHz. Replace with measured data via :meth:`NoiseSpectrum.from_csv`.
    """
    ref = resources.files("photonlock") / "data" / "fiber_drift_asd.csv"
    with resources.as_file(ref) as path:
        return NoiseSpectrum.from_csv(path)


@dataclass(frozen=True)
class NoDrift:
    pass


@dataclass(frozen=True)
class Wiener:
    """Diffusive drift; phase variance grows as ``diffusion * t`` (rad^2/s)."""

    diffusion: float

    def __post_init__(self):
        if not self.diffusion >= 0:
            raise ConfigError("Wiener diffusion must be >= 0")


@dataclass(frozen=True)
class Linear:
    rate: float  # rad/s


@dataclass(frozen=True, eq=False)
class FromASD:
    """Colored drift from a tabulated spectrum.

    ``trace`` holds the synthesized phase sampled at ``sample_rate`` starting
    at t = 0; it is filled in by :func:`prepare`.
    """

    spectrum: NoiseSpectrum
    sample_rate: float = 100.0
    trace: np.ndarray | None = field(default=None, repr=False)

    @property
    def horizon(self) -> float:
        if self.trace is None:
            return 0.0
        return (len(self.trace) - 1) / self.sample_rate

    def value_at(self, t):
        if self.trace is None:
            raise DriftNotSynthesizedError("FromASD drift used before synthesize/prepare")
        t = np.asarray(t, dtype=float)
        if np.any(t > self.horizon * (1 + 1e-12)) or np.any(t < 0):
            raise DriftNotSynthesizedError(
                f"requested time outside synthesized horizon [0, {self.horizon:g}] s"
            )
        grid = np.arange(len(self.trace)) / self.sample_rate
        return np.interp(t, grid, self.trace)


@dataclass(frozen=True)
class Composite:
    members: tuple = ()

    def __init__(self, members=()):
        object.__setattr__(self, "members", tuple(members))


DriftModel = Union[NoDrift, Wiener, Linear, FromASD, Composite]


@dataclass(frozen=True)
class DopplerParams:
    altitude_h: float  # m
    orbital_speed_vo: float  # m/s
    wavelength_lambda: float  # m
    mzi_delay_T: float  # s

    def __post_init__(self):
        if min(self.altitude_h, self.orbital_speed_vo, self.wavelength_lambda) <= 0:
            raise ConfigError("altitude, orbital speed and wavelength must be > 0")
        if self.mzi_delay_T < 0:
            raise ConfigError("MZI delay must be >= 0")

    @property
    def chirp(self) -> float:
        """Worst-case optical frequency chirp ``v_o^2 / (h lambda)`` in Hz/s."""
        return self.orbital_speed_vo**2 / (self.altitude_h * self.wavelength_lambda)


def doppler_drift_rate(p: DopplerParams) -> float:
    """Phase drift rate ``2 pi chirp T`` in rad/s seen by an MZI of delay ``T``."""
    return 2.0 * math.pi * p.chirp * p.mzi_delay_T


def drift_increment(model: DriftModel, dt: float, rng: np.random.Generator, t: float = 0.0) -> float:
    """Phase change over ``[t, t + dt]``. ``t`` only matters for ``FromASD``."""
    if not dt > 0:
        raise ConfigError("dt must be > 0")
    if isinstance(model, NoDrift):
        return 0.0
    if isinstance(model, Wiener):
        if model.diffusion == 0.0:
            return 0.0
        return float(rng.normal(0.0, math.sqrt(model.diffusion * dt)))
    if isinstance(model, Linear):
        return model.rate * dt
    if isinstance(model, FromASD):
        a, b = model.value_at([t, t + dt])
        return float(b - a)
    if isinstance(model, Composite):
        return sum(drift_increment(m, dt, rng, t) for m in model.members)
    raise TypeError(f"not a drift model: {model!r}")


def synthesize_from_asd(spec: NoiseSpectrum, duration: float, f_s: float,
                        rng: np.random.Generator) -> np.ndarray:
    """Real Gaussian trace whose one-sided PSD follows ``spec``.

    White Gaussian noise is shaped in the frequency domain (Hermitian
    spectrum, zero DC) and transformed back; the ensemble variance equals
    the PSD integrated from ``1/duration`` to ``f_s/2``.
    """
    n = int(round(duration * f_s))
    if n < 2:
        raise ConfigError("duration * f_s must be >= 2")
    freqs = np.fft.rfftfreq(n, d=1.0 / f_s)
    s1 = np.zeros_like(freqs)
    s1[1:] = spec.psd(freqs[1:], "one")
    scale = np.sqrt(s1 * f_s * n / 2.0)
    coeff = scale * (rng.standard_normal(freqs.size) + 1j * rng.standard_normal(freqs.size)) / math.sqrt(2.0)
    coeff[0] = 0.0
    if n % 2 == 0:
        coeff[-1] = scale[-1] * rng.standard_normal()
    return np.fft.irfft(coeff, n=n)


def prepare(model: DriftModel, duration: float, rng: np.random.Generator) -> DriftModel:
    """Synthesize every ``FromASD`` member over ``[0, duration]``."""
    if isinstance(model, FromASD):
        n = int(math.ceil(duration * model.sample_rate)) + 1
        trace = synthesize_from_asd(model.spectrum, n / model.sample_rate, model.sample_rate, rng)
        return replace(model, trace=trace - trace[0])
    if isinstance(model, Composite):
        return Composite(prepare(m, duration, rng) for m in model.members)
    return model


def flatten(model: DriftModel) -> tuple[float, float, list[FromASD]]:
    """Collapse a model into (total diffusion, total rate, ASD members).

    Independent Wiener drifts add their diffusion constants.
    """
    if isinstance(model, NoDrift):
        return 0.0, 0.0, []
    if isinstance(model, Wiener):
        return model.diffusion, 0.0, []
    if isinstance(model, Linear):
        return 0.0, model.rate, []
    if isinstance(model, FromASD):
        return 0.0, 0.0, [model]
    if isinstance(model, Composite):
        dsum, rsum, asds = 0.0, 0.0, []
        for m in model.members:
            d, r, a = flatten(m)
            dsum, rsum = dsum + d, rsum + r
            asds.extend(a)
        return dsum, rsum, asds
    raise TypeError(f"not a drift model: {model!r}")


def drift_trace(model: DriftModel, times, rng: np.random.Generator) -> np.ndarray:
    """Cumulative drift at the (ascending) ``times``, starting from 0 at t = 0."""
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0) or (times.size and times[0] < 0):
        raise ConfigError("times must be ascending and >= 0")
    diffusion, rate, asds = flatten(model)
    out = rate * times
    if diffusion > 0:
        dt = np.diff(times, prepend=0.0)
        out = out + np.cumsum(rng.normal(0.0, 1.0, times.size) * np.sqrt(diffusion * dt))
    for m in asds:
        out = out + m.value_at(times)
    return out

