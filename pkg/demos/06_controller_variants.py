"""Averaging, PI and hardware limits.

Pooling n clicks before correcting gives the same long-run correction as
correcting on every click; only the feedback is delayed by about n/(2 f_c).
Replaying one recorded click stream through the variants makes that exact.
The actuator model adds DAC quantization, a finite range and loop delay.
"""

from dataclasses import replace

import numpy as np

from photonlock import PI, ActuatorModel, AveragingN, SimConfig, Wiener, replay, run

cfg = replace(SimConfig(), epsilon=-1e-4, duration=10.0, record_clicks=True, seed=3)
rec = run(cfg)
for n in (1, 10, 100):
    rp = replay(rec.click_times, rec.click_channels, replace(cfg, controller=AveragingN(n)))
    print(f"n = {n:3d}: total correction {rp.total_correction:+.6f} rad, "
          f"mean latency {rp.mean_latency * 1e6:7.1f} us")

drifting = replace(cfg, drift=Wiener(1e-3), duration=30.0, record_clicks=False)
for name, ctrl in (("integral", AveragingN(1)), ("PI", PI(kp=1.0, ki=1.0, window=1000))):
    r = run(replace(drifting, controller=ctrl))
    print(f"{name:8s} under Wiener drift: sigma = {r.sigma_phi * 1e3:.2f} mrad")

act = ActuatorModel(dac_bits=12, range_rad=2 * np.pi, loop_delay=2e-6, recenter=True)
r = run(replace(drifting, drift=Wiener(0.1), actuator=act))
print(f"12-bit DAC, 2 pi range with recentering: sigma = {r.sigma_phi * 1e3:.2f} mrad, "
      f"{r.saturation_events} saturation events")
