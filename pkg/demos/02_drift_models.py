"""Free-running phase drift: diffusion, a constant slope and a measured spectrum.

A fiber interferometer wanders like a Wiener process; a satellite link adds a
Doppler-induced linear drift. Any other spectrum can be given as a tabulated
amplitude spectral density and is synthesized by spectral shaping.
"""

import numpy as np

from photonlock import DopplerParams, NoiseSpectrum, doppler_drift_rate, synthesize_from_asd
from photonlock.drift import fiber_drift_spectrum

D = 4e-3**2  # rad^2/s
rng = np.random.default_rng(1)

# Diffusion: after t seconds the spread is sqrt(D t).
steps = rng.normal(0.0, np.sqrt(D * 1.0), size=100_000)
print(f"Wiener spread after 1 s: {steps.std() * 1e3:.2f} mrad (expected {np.sqrt(D) * 1e3:.2f})")

# Doppler chirp from a 500 km orbit at 1550 nm, seen through a 170 ps delay line.
sat = DopplerParams(altitude_h=500e3, orbital_speed_vo=7.6e3, wavelength_lambda=1550e-9,
                    mzi_delay_T=170e-12)
print(f"chirp {sat.chirp:.3g} Hz/s -> drift rate {doppler_drift_rate(sat):.4f} rad/s")

# The Wiener process as a spectrum, and a trace synthesized from it.
spec = NoiseSpectrum.wiener(D, 1e-3, 1e3)
trace = synthesize_from_asd(spec, duration=200.0, f_s=100.0, rng=rng)
print(f"synthesized {trace.size} samples, one-sided PSD at 1 Hz = {spec.psd(1.0):.3g} rad^2/Hz")

shipped = fiber_drift_spectrum()
print(f"shipped fiber spectrum covers {shipped.frequencies[0]:g}..{shipped.frequencies[-1]:g} Hz")
