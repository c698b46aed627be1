"""Closed-form description of the photon-counting lock.

In the small-error regime the locked phase is an Ornstein-Uhlenbeck process
with stiffness ``theta = -2 eps r0' f_c`` and diffusion
``D = 2 eps^2 r0 (1 - r0) f_c``. Everything here follows from those two
numbers plus the free-drift spectrum. ``eps`` is always signed; a stable lock
needs ``eps * r0' < 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from photonlock.drift import NoiseSpectrum
from photonlock.errors import ConfigError, InstabilityError, QuadratureError
from photonlock.ifmodel import LockPoint


@dataclass(frozen=True)
class OuParams:
    theta: float  # 1/s
    tau: float  # s
    f_lock: float  # Hz
    diffusion_D: float  # rad^2/s
    sigma_stat: float  # rad


def _check_stable(epsilon: float, lock: LockPoint) -> None:
    if lock.slope == 0.0:
        raise InstabilityError("zero fringe slope at the lock point")
    if not epsilon * lock.slope < 0.0:
        raise InstabilityError(
            f"epsilon={epsilon:g} and slope={lock.slope:g} need opposite signs for a stable lock"
        )


def stable_sign(lock: LockPoint) -> float:
    """Sign a step parameter must carry at this lock point."""
    return -math.copysign(1.0, lock.slope)


def ou_params(epsilon: float, lock: LockPoint, f_c: float) -> OuParams:
    _check_stable(epsilon, lock)
    if not f_c > 0:
        raise ConfigError("count rate must be > 0")
    theta = -2.0 * epsilon * lock.slope * f_c
    variance_per_click = 4.0 * epsilon**2 * lock.r0 * (1.0 - lock.r0)
    diffusion = variance_per_click * f_c / 2.0
    return OuParams(theta, 1.0 / theta, theta / (2.0 * math.pi), diffusion, math.sqrt(diffusion / theta))


def sigma_lock(epsilon: float, lock: LockPoint) -> float:
    """Stationary lock noise ``sqrt(eps r0 (1 - r0) / -r0')``; independent of count rate."""
    _check_stable(epsilon, lock)
    return math.sqrt(epsilon * lock.r0 * (1.0 - lock.r0) / -lock.slope)


def lock_psd(f, params: OuParams, lock: LockPoint, f_c: float):
    """Two-sided Lorentzian PSD of the locked phase, rad^2/Hz."""
    f = np.asarray(f, dtype=float)
    s0 = lock.r0 * (1.0 - lock.r0) / (lock.slope**2 * f_c)
    return s0 / (1.0 + (f / params.f_lock) ** 2)


def total_psd(f, s_drift: NoiseSpectrum, params: OuParams, lock: LockPoint, f_c: float):
    """Two-sided PSD of lock noise plus drift high-passed at ``f_lock``."""
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0):
        raise ConfigError("total_psd needs f > 0")
    return lock_psd(f, params, lock, f_c) + s_drift.psd(f, "two") / (1.0 + (params.f_lock / f) ** 2)


def residual_drift_variance(s_drift: NoiseSpectrum, f_lock: float, band=None,
                            rtol: float = 1e-4) -> float:
    """Variance of the drift left after the lock's high-pass, over ``band`` (Hz).

    Adaptive quadrature in log-frequency. Integrates the one-sided PSD over
    positive frequencies, which equals the two-sided integral over the full
    axis.
    """
    lo, hi = band or (1e-6, 1e6)
    u_lo, u_hi = math.log(lo), math.log(hi)

    def integrand(u):
        f = math.exp(u)
        return float(s_drift.psd(f, "one")) * f / (1.0 + (f_lock / f) ** 2)

    knots = np.log(s_drift.frequencies)
    knots = [k for k in np.append(knots, math.log(f_lock)) if u_lo < k < u_hi]
    val, err = integrate.quad(integrand, u_lo, u_hi, epsrel=rtol, epsabs=0.0,
                              limit=1000, points=sorted(knots) or None)
    achieved = err / val if val > 0 else 0.0
    if achieved > 10 * rtol:
        raise QuadratureError("drift integral did not converge", achieved)
    return val


def total_sigma(s_drift: NoiseSpectrum | None, epsilon: float, lock: LockPoint, f_c: float,
                band=None, rtol: float = 1e-4) -> float:
    """Total RMS phase error: lock noise plus high-passed drift.

    ``band`` defaults to ``(1e-6, f_c / 2)``.
    """
    params = ou_params(epsilon, lock, f_c)
    var = params.sigma_stat**2
    if s_drift is not None:
        band = band or (1e-6, f_c / 2.0)
        var += residual_drift_variance(s_drift, params.f_lock, band, rtol)
    return math.sqrt(var)


def optimal_epsilon_numeric(s_drift: NoiseSpectrum, lock: LockPoint, f_c: float,
                            bounds=(1e-9, 1.0), band=None) -> tuple[float, float]:
    """Minimize ``total_sigma`` over ``|eps|`` (log-scale bounded search)."""
    sgn = stable_sign(lock)

    def obj(u):
        return total_sigma(s_drift, sgn * math.exp(u), lock, f_c, band)

    res = optimize.minimize_scalar(obj, bounds=(math.log(bounds[0]), math.log(bounds[1])),
                                   method="bounded", options={"xatol": 1e-8})
    return sgn * math.exp(res.x), float(res.fun)


def linear_drift_offset(d: float, f_c: float, epsilon: float, lock: LockPoint) -> float:
    """Equilibrium phase offset under a constant drift rate ``d``."""
    _check_stable(epsilon, lock)
    return -d / (2.0 * f_c * epsilon * lock.slope)


def linear_drift_total(d: float, f_c: float, epsilon: float, lock: LockPoint) -> float:
    """RMS error under linear drift: static offset and lock noise in quadrature."""
    return math.hypot(linear_drift_offset(d, f_c, epsilon, lock), sigma_lock(epsilon, lock))


def linear_drift_optimum(d: float, f_c: float, lock: LockPoint) -> tuple[float, float]:
    """``(eps_opt, sigma_min)`` for linear drift ``d``."""
    if d == 0.0:
        raise ConfigError("optimum undefined without drift (eps_opt -> 0)")
    q = lock.r0 * (1.0 - lock.r0)
    s = abs(lock.slope)
    eps = np.cbrt(d**2 / (2.0 * f_c**2 * q * s)) * stable_sign(lock)
    sigma = math.sqrt(3.0) * np.cbrt(abs(d) * q / (4.0 * f_c * s**2))
    return float(eps), float(sigma)


def wiener_total(epsilon: float, lock: LockPoint, f_c: float, diffusion: float) -> float:
    """RMS error with Wiener drift folded into the per-click variance."""
    _check_stable(epsilon, lock)
    if diffusion < 0:
        raise ConfigError("diffusion must be >= 0")
    v = 4.0 * epsilon**2 * lock.r0 * (1.0 - lock.r0) + diffusion / f_c
    return math.sqrt(v / (-4.0 * epsilon * lock.slope))


def wiener_optimum(lock: LockPoint, f_c: float, diffusion: float) -> tuple[float, float]:
    q = lock.r0 * (1.0 - lock.r0)
    eps = math.sqrt(diffusion / (4.0 * f_c * q)) * stable_sign(lock)
    sigma = (diffusion * q / (f_c * lock.slope**2)) ** 0.25
    return eps, sigma


@dataclass(frozen=True)
class AveragingResult:
    theta_n: float
    diffusion_n: float
    sigma_n: float
    extra_delay: float


def averaging_equivalence(n: int, epsilon: float, lock: LockPoint, f_c: float) -> AveragingResult:
    """OU parameters when ``n`` clicks are pooled per correction.

    Steps grow n-fold while corrections come n times less often, so stiffness,
    diffusion and noise are unchanged; the mean feedback delay is ``n / (2 f_c)``.
    """
    if n < 1:
        raise ConfigError("n must be >= 1")
    ou_params(epsilon, lock, f_c)  # validates sign and rate
    theta_n = -2.0 * n * epsilon * lock.slope * (f_c / n)
    d_n = n * 4.0 * epsilon**2 * lock.r0 * (1.0 - lock.r0) * (f_c / n) / 2.0
    return AveragingResult(theta_n, d_n, math.sqrt(d_n / theta_n), n / (2.0 * f_c))


def max_epsilon_for_target(target: float, lock: LockPoint) -> float:
    """Largest ``|eps|`` whose lock noise alone stays at ``target``."""
    return target**2 * abs(lock.slope) / (lock.r0 * (1.0 - lock.r0))


def lock_bandwidth(epsilon: float, lock: LockPoint, f_c: float) -> float:
    return ou_params(epsilon, lock, f_c).f_lock


def min_count_rate_linear(target: float, d: float, lock: LockPoint) -> float:
    """Smallest ``f_c`` at which the linear-drift optimum reaches ``target``."""
    q = lock.r0 * (1.0 - lock.r0)
    return 3.0 * math.sqrt(3.0) * abs(d) * q / (4.0 * lock.slope**2 * target**3)


def min_count_rate_wiener(target: float, diffusion: float, lock: LockPoint) -> float:
    """Smallest ``f_c`` at which the Wiener-drift optimum reaches ``target``."""
    q = lock.r0 * (1.0 - lock.r0)
    return diffusion * q / (lock.slope**2 * target**4)


def min_count_rate_numeric(target: float, s_drift: NoiseSpectrum, lock: LockPoint,
                           f_bounds=(1.0, 1e9)) -> float:
    """Bisect on ``f_c`` for ``min_eps total_sigma = target`` with a tabulated drift."""

    def excess(log_fc):
        fc = math.exp(log_fc)
        return optimal_epsilon_numeric(s_drift, lock, fc)[1] - target

    lo, hi = math.log(f_bounds[0]), math.log(f_bounds[1])
    if excess(hi) > 0:
        raise ConfigError("target not reachable within the count-rate bounds")
    if excess(lo) <= 0:
        return f_bounds[0]
    return math.exp(optimize.brentq(excess, lo, hi, xtol=1e-6))
