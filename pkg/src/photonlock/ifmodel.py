"""Interferometer fringe: phase to click-ratio mapping and lock points.

The click ratio ``r(phi)`` is the probability that a detected signal photon
lands in output channel 0. Two fringe shapes are provided:

``"simple"``
    ``r = (1 + v cos(phi - phase_offset)) / 2``.
``"pulse_pair"``
    The mean of two half-visibility fringes offset by 90 degrees, produced by
    alternating 0/90 degree pulse pairs where only half of the power
    interferes: ``r = 1/2 + (cos phi + sin phi) / 8``. Its visibility is
    ``1/sqrt(8)`` and it gives ``r0 = 5/8`` with slopes ``+-1/8`` at 0 and
    90 degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from photonlock.errors import ConfigError, DomainError

PULSE_PAIR_VISIBILITY = 1.0 / math.sqrt(8.0)

FRINGE_KINDS = ("simple", "pulse_pair")


@dataclass(frozen=True)
class FringeModel:
    kind: str = "pulse_pair"
    visibility: float = PULSE_PAIR_VISIBILITY
    phase_offset: float = 0.0

    def __post_init__(self):
        if self.kind not in FRINGE_KINDS:
            raise ConfigError(f"unknown fringe kind {self.kind!r}")
        if self.kind == "pulse_pair":
            # shape is fixed by the pulse pattern
            object.__setattr__(self, "visibility", PULSE_PAIR_VISIBILITY)
            object.__setattr__(self, "phase_offset", 0.0)
        if not 0.0 <= self.visibility <= 1.0:
            raise ConfigError(f"visibility must lie in [0, 1], got {self.visibility}")

    @classmethod
    def pulse_pair(cls) -> "FringeModel":
        return cls("pulse_pair")

    @classmethod
    def simple(cls, visibility: float = 1.0, phase_offset: float = 0.0) -> "FringeModel":
        return cls("simple", visibility, phase_offset)

    @property
    def cosine_form(self) -> tuple[float, float]:
        """``(v, a)`` such that ``r = (1 + v cos(phi - a)) / 2``."""
        if self.kind == "pulse_pair":
            return PULSE_PAIR_VISIBILITY, math.pi / 4
        return self.visibility, self.phase_offset


@dataclass(frozen=True)
class LockPoint:
    """Target phase ``phi0``, its click ratio ``r0`` and signed slope ``dr/dphi``."""

    phi0: float
    r0: float
    slope: float

    def __post_init__(self):
        if not 0.0 < self.r0 < 1.0:
            raise ConfigError(f"r0 must lie in (0, 1), got {self.r0}")


@dataclass(frozen=True)
class DetectorConfig:
    """Mean rates in Hz. ``f_signal`` is summed over both channels."""

    f_signal: float
    f_dark_ch0: float = 0.0
    f_dark_ch1: float = 0.0

    def __post_init__(self):
        rates = (self.f_signal, self.f_dark_ch0, self.f_dark_ch1)
        if any(not math.isfinite(f) or f < 0 for f in rates):
            raise ConfigError(f"detector rates must be finite and >= 0, got {rates}")
        if self.f_total <= 0:
            raise ConfigError("total detection rate must be > 0")

    @property
    def f_dark(self) -> float:
        return self.f_dark_ch0 + self.f_dark_ch1

    @property
    def f_total(self) -> float:
        return self.f_signal + self.f_dark_ch0 + self.f_dark_ch1


def click_ratio(model: FringeModel, phi):
    """Probability of a click in channel 0 at interferometer phase ``phi``."""
    if model.kind == "pulse_pair":
        return 0.5 + (np.cos(phi) + np.sin(phi)) / 8.0
    return 0.5 * (1.0 + model.visibility * np.cos(np.subtract(phi, model.phase_offset)))


def fringe_slope(model: FringeModel, phi):
    """``dr/dphi`` at ``phi``."""
    if model.kind == "pulse_pair":
        return (np.cos(phi) - np.sin(phi)) / 8.0
    return -0.5 * model.visibility * np.sin(np.subtract(phi, model.phase_offset))


def slope_magnitude(v: float, r0: float) -> float:
    """Magnitude of the fringe slope at click ratio ``r0`` for visibility ``v``.

    Raises
    ------
    DomainError
        If ``|2 r0 - 1| > v``, i.e. the ratio is never reached.
    """
    d = 2.0 * r0 - 1.0
    if abs(d) > v:
        raise DomainError(f"click ratio {r0} unreachable at visibility {v}")
    return math.sqrt(max(v * v - d * d, 0.0)) / 2.0


def lock_point(model: FringeModel, phi0: float) -> LockPoint:
    return LockPoint(phi0, float(click_ratio(model, phi0)), float(fringe_slope(model, phi0)))


def apply_darkcounts(lock: LockPoint, det: DetectorConfig) -> LockPoint:
    """Lock point seen by the controller once phase-independent dark counts mix in.

    Dark clicks land in their own channel regardless of phase, so the observed
    ratio is a rate-weighted mixture of the fringe and a flat background and
    the slope shrinks by the signal fraction ``f_signal / f_total``.
    """
    if det.f_dark == 0.0:
        return lock
    f_tot = det.f_total
    r0_eff = (det.f_signal * lock.r0 + det.f_dark_ch0) / f_tot
    return replace(lock, r0=r0_eff, slope=lock.slope * det.f_signal / f_tot)


def effective_visibility(v: float, det: DetectorConfig) -> float:
    return v * det.f_signal / det.f_total
