"""Working from recorded data: time tags in, deviation and spectrum out.

A time-tagger file lists (t_ns, channel) pairs. Replaying it through the
controller rebuilds the command the lock would have applied; that command
tracks the drift, so its increment deviation reveals the drift type:
slope 1/2 for diffusion, slope 1 for a constant rate. At lags shorter than a
few lock time constants the lock's own noise flattens the curve.
"""

import tempfile
from dataclasses import replace
from pathlib import Path

from photonlock import SimConfig, Wiener, estimators, replay, run
from photonlock.files import read_timestamps, timestamps_to_csv

cfg = replace(SimConfig(), epsilon=-1e-4, drift=Wiener(1e-2), duration=60.0, record_clicks=True)
rec = run(cfg)

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "clicks.csv"
    path.write_text(timestamps_to_csv(rec.click_times, rec.click_channels))
    t, ch = read_timestamps(path)
print(f"read {t.size:,} time tags")

rp = replay(t, ch, replace(cfg, sample_rate=100.0))
trace = estimators.PhaseTrace(rp.command, 100.0)
dev = estimators.increment_deviation(trace, estimators.log_taus(trace, 5, 1.0, 10.0))
for tau, s in zip(dev.taus, dev.deviation):
    print(f"tau = {tau:6.2f} s: increment deviation {s * 1e3:6.2f} mrad")
print(f"log-log slope {estimators.loglog_slope(dev.taus, dev.deviation):.2f} (diffusion -> 0.5)")
