"""The pulse-pair fringe and where to lock on it.

Only half of each alternating 0/90 degree pulse pair interferes, so the click
ratio swings between 1/2 -+ 1/sqrt(8)/2 instead of 0 and 1. The lock point
fixes the target ratio r0 and the slope that turns ratio errors into phase
errors. Dark counts pull r0 towards the dark-channel split and dilute the slope.
"""

import numpy as np

from photonlock import DetectorConfig, FringeModel, apply_darkcounts, click_ratio, lock_point

fringe = FringeModel.pulse_pair()
phi = np.linspace(0, 2 * np.pi, 9)
for p, r in zip(phi, click_ratio(fringe, phi)):
    print(f"phi = {np.degrees(p):5.0f} deg   r = {r:.4f}")

lock = lock_point(fringe, 0.0)
print(f"\nlock at phi0 = 0: r0 = {lock.r0}, slope = {lock.slope}")

# Half of all clicks are background, split evenly between the detectors.
det = DetectorConfig(100e3, 50e3, 50e3)
eff = apply_darkcounts(lock, det)
print(f"with 50 % balanced dark counts: r0 = {eff.r0:.4f}, slope = {eff.slope:.4f}")
