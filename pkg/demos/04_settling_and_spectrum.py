"""Transient and spectral views of the same lock.

Starting half a radian off, the ensemble-mean error relaxes with the lock time
constant. The curvature of the fringe makes large errors decay somewhat more
slowly than the linearized exponential, so the fit uses the exact restoring
force. In steady state the error spectrum is a Lorentzian whose corner is the
lock bandwidth.
"""

from dataclasses import replace

import numpy as np

from photonlock import SimConfig, analytics, estimators, run

cfg = replace(SimConfig(), epsilon=-1e-4, initial_phase_error=0.5)
tau = cfg.theory().tau
fs = 20 / tau
cfg = replace(cfg, duration=4 * tau, sample_rate=fs, burn_in=0.0)
mean = np.mean([run(replace(cfg, seed=s)).phase_error for s in range(16)], axis=0)
t = np.arange(mean.size) / fs

tau_exp, _ = estimators.fit_exponential_decay(t, mean, tau)
tau_fit = estimators.fit_settling(t, mean, lambda x: np.cos(x) + np.sin(x) - 1, tau)
print(f"expected tau {tau:.3f} s; exact-fringe fit {tau_fit:.3f} s; plain exponential {tau_exp:.3f} s")

# Steady state at |eps| = 1e-4: band-averaged Welch estimate against the Lorentzian.
lock_cfg = replace(SimConfig(), epsilon=-1e-4, duration=400.0, sample_rate=50.0, burn_in=2.0)
res = run(lock_cfg)
trace = estimators.PhaseTrace(res.phase_error[res.times >= 2.0], 50.0)
spec = estimators.psd_estimate(trace, 8)
p = lock_cfg.theory()
f = spec.frequencies
for lo, hi in ((0.1, 1.0), (1.0, 10.0)):
    band = (f >= lo * p.f_lock) & (f < hi * p.f_lock)
    measured = np.mean(spec.asd[band] ** 2 / 2)  # one-sided -> two-sided
    model = np.mean(analytics.lock_psd(f[band], p, lock_cfg.lock, lock_cfg.det.f_total))
    print(f"{lo:g}..{hi:g} x f_lock: Welch {measured:.3g}, Lorentzian {model:.3g} rad^2/Hz")

fit = estimators.ou_fit(trace)
print(f"OU fit: theta = {fit.theta:.2f} /s (theory {p.theta:.2f}), "
      f"sigma = {fit.sigma_stat * 1e3:.2f} mrad (theory {p.sigma_stat * 1e3:.2f})")
