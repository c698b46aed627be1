"""Picking the step size when the phase drifts.

Small steps mean little lock noise but a slow loop that lets drift through;
large steps track drift but add noise. For linear and diffusive drift the
balance has a closed form. The planner also answers the inverse question:
which count rate is needed to reach a given accuracy.
"""

from photonlock import NoiseSpectrum, analytics, lock_point
from photonlock.ifmodel import FringeModel

lock = lock_point(FringeModel.pulse_pair(), 0.0)
f_c = 200e3
D = 4e-3**2

eps, sigma = analytics.wiener_optimum(lock, f_c, D)
print(f"diffusive drift: eps_opt = {eps:.3e}, sigma_min = {sigma * 1e3:.2f} mrad")
for scale in (0.3, 1, 3):
    e = eps * scale
    print(f"   eps = {e:.2e}: sigma = {analytics.wiener_total(e, lock, f_c, D) * 1e3:.2f} mrad")

eps, sigma = analytics.optimal_epsilon_numeric(NoiseSpectrum.wiener(D), lock, f_c)
print(f"same optimum from the spectrum by quadrature: {eps:.3e}, {sigma * 1e3:.2f} mrad")

d = 0.08
eps, sigma = analytics.linear_drift_optimum(d, f_c, lock)
print(f"linear drift {d} rad/s: eps_opt = {eps:.3e}, sigma_min = {sigma * 1e3:.1f} mrad, "
      f"offset at eps = -1e-5: {analytics.linear_drift_offset(d, f_c, -1e-5, lock):.3f} rad")

for target in (5e-3, 2e-3):
    print(f"count rate for {target * 1e3:.0f} mrad under diffusion: "
          f"{analytics.min_count_rate_wiener(target, D, lock):.3g} Hz")
