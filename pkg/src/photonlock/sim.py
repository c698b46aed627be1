"""Event-driven Monte Carlo of the photon-counting lock.

Photons arrive as a Poisson process at ``f_total``. Each arrival is a signal
photon with probability ``f_signal / f_total`` and lands in channel 0 with the
fringe probability at the current true phase; dark counts land in their own
channel. The controller steps the phase after every click (or block of
clicks) and drift is integrated exactly between events. The full nonlinear
fringe is always used.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from photonlock import _engine, analytics
from photonlock import drift as _drift
from photonlock.controller import PI, ActuatorModel, AveragingN, Immediate, make_step_params
from photonlock.errors import ConfigError, LockError, NonConvergenceWarning
from photonlock.ifmodel import DetectorConfig, FringeModel, LockPoint, apply_darkcounts, lock_point

SCHEMA_VERSION = 1
BURN_IN_TAUS = 5.0


@dataclass(frozen=True)
class SimConfig:
    fringe: FringeModel = field(default_factory=FringeModel.pulse_pair)
    lock: LockPoint = field(default_factory=lambda: lock_point(FringeModel.pulse_pair(), 0.0))
    det: DetectorConfig = field(default_factory=lambda: DetectorConfig(200e3))
    drift: object = field(default_factory=_drift.NoDrift)
    controller: object = field(default_factory=Immediate)
    actuator: ActuatorModel | None = None
    epsilon: float = -1e-5
    duration: float = 100.0
    initial_phase_error: float = 0.0
    seed: int = 0
    sample_rate: float | None = None  # None: summary only
    record_clicks: bool = False
    compensate_darkcounts: bool = True
    burn_in: float | None = None  # None: 5 lock time constants
    allow_unstable: bool = False

    def validate(self) -> None:
        if not (self.duration > 0 and math.isfinite(self.duration)):
            raise ConfigError(f"duration must be > 0, got {self.duration}")
        if self.sample_rate is not None:
            if not self.sample_rate > 0:
                raise ConfigError("sample_rate must be > 0")
            if self.sample_rate > 10 * self.det.f_total:
                raise ConfigError("sample_rate may not exceed 10 x the total count rate")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if not isinstance(self.controller, (Immediate, AveragingN, PI)):
            raise ConfigError(f"unknown controller variant {self.controller!r}")

    @property
    def target(self) -> LockPoint:
        """Lock point as seen by the controller (dark counts folded in if compensated)."""
        return apply_darkcounts(self.lock, self.det) if self.compensate_darkcounts else self.lock

    def theory(self) -> analytics.OuParams | None:
        """Linearized OU parameters of this configuration, or None for an open loop."""
        if self.epsilon == 0.0:
            return None
        eff = apply_darkcounts(self.lock, self.det)
        eff = replace(eff, r0=self.target.r0)
        gain = self.controller.ki if isinstance(self.controller, PI) else 1.0
        try:
            return analytics.ou_params(self.epsilon * gain, eff, self.det.f_total)
        except LockError:
            return None


@dataclass
class SimResult:
    times: np.ndarray | None
    phase_error: np.ndarray | None
    command: np.ndarray | None
    click_counts: tuple
    sigma_phi: float  # RMS of phase error about phi0 over the steady state
    std_phi: float  # standard deviation about the steady-state mean
    mean_offset: float
    mean_ratio: float  # channel-0 fraction over the steady state
    n_events: int
    n_stat_events: int
    burn_in: float
    wallclock: float
    saturation_events: int
    mean_latency: float
    nonconverged: bool
    click_times: np.ndarray | None = None
    click_channels: np.ndarray | None = None
    pending_clicks: int = 0
    config: SimConfig | None = field(default=None, repr=False)

    def summary(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "sigma_phi": self.sigma_phi,
            "std_phi": self.std_phi,
            "mean_offset": self.mean_offset,
            "mean_ratio": self.mean_ratio,
            "n_events": self.n_events,
            "n_stat_events": self.n_stat_events,
            "click_counts": list(self.click_counts),
            "burn_in": self.burn_in,
            "saturation_events": self.saturation_events,
            "mean_latency": self.mean_latency,
            "nonconverged": self.nonconverged,
            "wallclock": self.wallclock,
            "config": config_to_dict(self.config) if self.config is not None else None,
        }


def _variant_args(ctrl):
    if isinstance(ctrl, Immediate):
        return _engine.VARIANT_IMMEDIATE, 1, 0.0, 1.0, 1
    if isinstance(ctrl, AveragingN):
        return _engine.VARIANT_AVERAGING, ctrl.n, 0.0, 1.0, 1
    if isinstance(ctrl, PI):
        return _engine.VARIANT_PI, 1, ctrl.kp, ctrl.ki, ctrl.window
    raise ConfigError(f"unknown controller variant {ctrl!r}")


def _actuator_args(act):
    if act is None:
        return False, 1.0, 1.0, False, 0.0
    return True, act.lsb, act.range_rad, act.recenter, act.loop_delay


def _burn_in(cfg: SimConfig) -> float:
    if cfg.burn_in is not None:
        return cfg.burn_in
    p = cfg.theory()
    return BURN_IN_TAUS * p.tau if p is not None else 0.0


def run(config: SimConfig) -> SimResult:
    """Simulate one locked (or free-running, ``epsilon = 0``) trajectory."""
    cfg = config
    cfg.validate()
    steps = make_step_params(cfg.epsilon, cfg.target, allow_unstable=cfg.allow_unstable)
    variant, n_avg, kp, ki, window = _variant_args(cfg.controller)
    has_act, lsb, rng_rad, recenter, loop_delay = _actuator_args(cfg.actuator)

    ss = np.random.SeedSequence(cfg.seed)
    ev_ss, drift_ss = ss.spawn(2)
    drift_model = _drift.prepare(cfg.drift, cfg.duration, np.random.default_rng(drift_ss))
    diffusion, rate, asds = _drift.flatten(drift_model)
    if asds:
        fs = asds[0].sample_rate
        if any(m.sample_rate != fs for m in asds):
            raise ConfigError("all ASD drift members must share one sample rate")
        asd_grid = np.sum([m.trace for m in asds], axis=0)
    else:
        fs, asd_grid = 1.0, np.empty(0)

    vis, fr_off = cfg.fringe.cosine_form
    det = cfg.det
    p_signal = det.f_signal / det.f_total
    p_dark0 = det.f_dark_ch0 / det.f_dark if det.f_dark > 0 else 0.5
    burn_in = _burn_in(cfg)
    mean_n = det.f_total * cfg.duration
    click_cap = int(mean_n + 8 * math.sqrt(mean_n) + 100) if cfg.record_clicks else 0

    rng = np.random.default_rng(ev_ss)
    t0 = time.perf_counter()
    tr_err, tr_cmd, ck_t, ck_ch, counts, sums, overflow = _engine.simulate(
        rng, float(cfg.duration), float(det.f_total), float(p_signal), float(p_dark0),
        float(vis), float(fr_off), float(cfg.lock.phi0), float(cfg.initial_phase_error),
        steps.eps0, steps.eps1, variant, n_avg, float(kp), float(ki), int(window),
        has_act, float(lsb), float(rng_rad), recenter, float(loop_delay),
        float(diffusion), float(rate), np.ascontiguousarray(asd_grid, dtype=float), float(fs),
        float(cfg.sample_rate or 0.0), float(burn_in), cfg.record_clicks, click_cap,
    )
    wall = time.perf_counter() - t0
    if overflow:
        warnings.warn("click record truncated (buffer full)", RuntimeWarning, stacklevel=2)

    n_events, c0, c1, n_sat, n_stat, n_wide, st_c0, _, lat_n, pending = (int(x) for x in counts)
    s1, s2, lat_sum = sums
    if n_stat > 0:
        mean = s1 / n_stat
        sigma = math.sqrt(s2 / n_stat)
        std = math.sqrt(max(s2 / n_stat - mean * mean, 0.0))
        ratio = st_c0 / n_stat
    else:
        mean = sigma = std = ratio = float("nan")
        if burn_in >= cfg.duration:
            warnings.warn("burn-in covers the whole run; no steady-state statistics",
                          RuntimeWarning, stacklevel=2)
    nonconv = n_stat > 0 and n_wide > 0.1 * n_stat
    if nonconv:
        warnings.warn(
            f"phase error exceeded pi/2 for {n_wide / n_stat:.1%} of steady-state events",
            NonConvergenceWarning, stacklevel=2,
        )

    times = None
    if cfg.sample_rate:
        times = np.arange(tr_err.size) / cfg.sample_rate
    return SimResult(
        times=times,
        phase_error=tr_err if cfg.sample_rate else None,
        command=tr_cmd if cfg.sample_rate else None,
        click_counts=(c0, c1),
        sigma_phi=sigma,
        std_phi=std,
        mean_offset=mean,
        mean_ratio=ratio,
        n_events=n_events,
        n_stat_events=n_stat,
        burn_in=burn_in,
        wallclock=wall,
        saturation_events=n_sat,
        mean_latency=float(lat_sum / lat_n) if lat_n else float("nan"),
        nonconverged=nonconv,
        click_times=ck_t if cfg.record_clicks else None,
        click_channels=ck_ch if cfg.record_clicks else None,
        pending_clicks=pending,
        config=cfg,
    )


@dataclass
class ReplayResult:
    times: np.ndarray | None
    command: np.ndarray | None
    click_counts: tuple
    n_events: int
    final_command: float  # after the last click (pending averaging clicks not applied)
    total_correction: float  # all clicks applied, including pending ones
    mean_ratio: float
    saturation_events: int
    mean_latency: float
    step_variance: float  # sample variance of the per-click integral steps


def replay(timestamps, channels, config: SimConfig, duration: float | None = None) -> ReplayResult:
    """Run the configured controller open-loop on recorded clicks.

    ``timestamps`` are in seconds and must be non-decreasing; the true phase
    is unknown, so only the command is reconstructed.
    """
    t = np.ascontiguousarray(timestamps, dtype=float)
    ch = np.ascontiguousarray(channels, dtype=np.int8)
    if t.shape != ch.shape:
        raise ConfigError("timestamps and channels differ in length")
    if t.size and (np.any(np.diff(t) < 0) or t[0] < 0):
        raise ConfigError("timestamps must be sorted and >= 0")
    if np.any((ch != 0) & (ch != 1)):
        raise ConfigError("channels must be 0 or 1")
    dur = duration if duration is not None else (config.duration if config.duration else 0.0)
    if t.size and t[-1] > dur:
        dur = float(t[-1])
    steps = make_step_params(config.epsilon, config.target, allow_unstable=config.allow_unstable)
    variant, n_avg, kp, ki, window = _variant_args(config.controller)
    has_act, lsb, rng_rad, recenter, loop_delay = _actuator_args(config.actuator)
    fs = float(config.sample_rate or 0.0)
    tr_cmd, counts, fl = _engine.replay(
        t, ch, float(dur), steps.eps0, steps.eps1, variant, n_avg, float(kp), float(ki), int(window),
        has_act, float(lsb), float(rng_rad), recenter, float(loop_delay), fs,
    )
    n_events, c0_app, c1_app, n_sat, lat_n, p0, p1 = (int(x) for x in counts)
    n0 = int(np.count_nonzero(ch == 0))
    n1 = t.size - n0
    if t.size:
        step_seq = np.where(ch == 0, steps.eps0, steps.eps1)
        var = float(np.var(step_seq))
    else:
        var = float("nan")
    return ReplayResult(
        times=np.arange(tr_cmd.size) / fs if fs else None,
        command=tr_cmd if fs else None,
        click_counts=(n0, n1),
        n_events=n_events,
        final_command=float(fl[1]),
        total_correction=(c0_app + p0) * steps.eps0 + (c1_app + p1) * steps.eps1,
        mean_ratio=n0 / t.size if t.size else float("nan"),
        saturation_events=n_sat,
        mean_latency=float(fl[0]) / lat_n if lat_n else float("nan"),
        step_variance=var,
    )


@dataclass
class SweepRow:
    value: float
    epsilon: float
    f_signal: float
    mean_sigma: float
    std_error: float
    n_ok: int
    sigmas: list
    error: str | None = None


def cell_seed(master: int, i: int, j: int) -> int:
    """Independent, reproducible seed for sweep cell (value ``i``, replicate ``j``)."""
    return int(np.random.SeedSequence(master, spawn_key=(i, j)).generate_state(1, np.uint64)[0])


def _run_cell(cfg: SimConfig):
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NonConvergenceWarning)
            return run(cfg).sigma_phi, None
    except Exception as exc:  # a failed cell is reported, not fatal
        return float("nan"), f"{type(exc).__name__}: {exc}"


def sweep(base: SimConfig, axis: str, values: Sequence[float], replicates: int = 1, *,
          auto_sign: bool = True, epsilon_rule: Callable[[float], float] | None = None,
          jobs: int = 1) -> list[SweepRow]:
    """Repeat ``run`` over an epsilon or count-rate axis.

    ``axis="epsilon"``: values are step parameters; with ``auto_sign`` their
    magnitude is used with the stable sign. ``axis="count_rate"``: values set
    ``det.f_signal``; ``epsilon_rule(f_signal)`` may choose epsilon per value.
    """
    if axis not in ("epsilon", "count_rate"):
        raise ConfigError(f"unknown sweep axis {axis!r}")
    values = list(values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    if replicates < 1:
        raise ConfigError("replicates must be >= 1")
    sgn = analytics.stable_sign(base.target)

    cfgs, bad = [], {}
    for i, v in enumerate(values):
        try:
            if axis == "epsilon":
                cfg = replace(base, epsilon=sgn * abs(v) if auto_sign else v)
            else:
                cfg = replace(base, det=replace(base.det, f_signal=v))
                if epsilon_rule is not None:
                    cfg = replace(cfg, epsilon=epsilon_rule(v))
        except Exception as exc:  # an invalid value fails its row only
            cfg = None
            bad[i] = f"{type(exc).__name__}: {exc}"
        cfgs.append(cfg)
    cells = [(i, replace(cfg, seed=cell_seed(base.seed, i, j)))
             for i, cfg in enumerate(cfgs) if cfg is not None for j in range(replicates)]

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outs = list(pool.map(_run_cell, [c for _, c in cells]))
    else:
        outs = [_run_cell(c) for _, c in cells]

    rows = []
    for i, v in enumerate(values):
        mine = [o for (k, _), o in zip(cells, outs) if k == i]
        if i in bad:
            mine = [(float("nan"), bad[i])] * replicates
        sig = np.array([o[0] for o in mine])
        ok = sig[np.isfinite(sig)]
        errs = [o[1] for o in mine if o[1]]
        cfg = cfgs[i]
        rows.append(SweepRow(
            value=v,
            epsilon=cfg.epsilon if cfg else float("nan"),
            f_signal=cfg.det.f_signal if cfg else float("nan"),
            mean_sigma=float(ok.mean()) if ok.size else float("nan"),
            std_error=float(ok.std(ddof=1) / math.sqrt(ok.size)) if ok.size > 1 else float("nan"),
            n_ok=int(ok.size),
            sigmas=sig.tolist(),
            error=errs[0] if errs else None,
        ))
    return rows


def sweep_to_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["value", "epsilon", "f_signal", "mean_sigma_rad", "std_error_rad", "n_ok", "error"])
    for r in rows:
        w.writerow([repr(r.value), repr(r.epsilon), repr(r.f_signal), repr(r.mean_sigma),
                    repr(r.std_error), r.n_ok, r.error or ""])
    return buf.getvalue()


def trace_to_csv(result: SimResult) -> str:
    """``t_s,phase_error_rad,command_rad`` rows of a recorded run."""
    if result.phase_error is None:
        raise ConfigError("run was summary-only; no trace to export")
    buf = io.StringIO()
    buf.write("t_s,phase_error_rad,command_rad\n")
    for t, e, c in zip(result.times.tolist(), result.phase_error.tolist(), result.command.tolist()):
        buf.write(f"{t!r},{e!r},{c!r}\n")
    return buf.getvalue()


def _drift_to_dict(d):
    if isinstance(d, _drift.NoDrift):
        return {"kind": "none"}
    if isinstance(d, _drift.Wiener):
        return {"kind": "wiener", "diffusion": d.diffusion}
    if isinstance(d, _drift.Linear):
        return {"kind": "linear", "rate": d.rate}
    if isinstance(d, _drift.FromASD):
        return {"kind": "asd", "sample_rate": d.sample_rate,
                "freq_hz": d.spectrum.frequencies.tolist(), "asd": d.spectrum.asd.tolist(),
                "sidedness": d.spectrum.sidedness}
    if isinstance(d, _drift.Composite):
        return {"kind": "composite", "members": [_drift_to_dict(m) for m in d.members]}
    raise TypeError(d)


def config_to_dict(cfg: SimConfig) -> dict:
    ctrl = cfg.controller
    return {
        "fringe": asdict(cfg.fringe),
        "lock": asdict(cfg.lock),
        "det": asdict(cfg.det),
        "drift": _drift_to_dict(cfg.drift),
        "controller": {"variant": type(ctrl).__name__, **asdict(ctrl)},
        "actuator": asdict(cfg.actuator) if cfg.actuator else None,
        "epsilon": cfg.epsilon,
        "duration": cfg.duration,
        "initial_phase_error": cfg.initial_phase_error,
        "seed": cfg.seed,
        "sample_rate": cfg.sample_rate,
        "record_clicks": cfg.record_clicks,
        "compensate_darkcounts": cfg.compensate_darkcounts,
        "burn_in": cfg.burn_in,
        "allow_unstable": cfg.allow_unstable,
    }


def summary_to_json(result: SimResult, manifest: dict | None = None) -> str:
    out = result.summary()
    if manifest is not None:
        out["manifest"] = manifest
    return json.dumps(out, indent=2, sort_keys=True)
