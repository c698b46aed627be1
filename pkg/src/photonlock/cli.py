"""Command-line front end: ``photonlock {simulate,sweep,plan,analyze}``.

Exit codes: 0 success, 2 configuration/input error, 3 non-convergence under
``--strict``. Step parameters are given as magnitudes; the stable sign is
applied from the fringe slope unless ``--raw-epsilon`` is set.
"""

from __future__ import annotations

import argparse
import configparser
import datetime as _dt
import json
import math
import shlex
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from photonlock import __version__, analytics, estimators
from photonlock import drift as drift_mod
from photonlock import sim
from photonlock.controller import PI, ActuatorModel, AveragingN, Immediate
from photonlock.errors import ConfigError, LockError, NonConvergenceWarning, UnstableFitError
from photonlock.files import read_timestamps, spectrum_to_csv, timestamps_to_csv, write_atomic
from photonlock.ifmodel import DetectorConfig, FringeModel, LockPoint, lock_point

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED = 0, 2, 3
# data files name this file; it holds the run-specific echo and timestamps
MANIFEST_NAME = "manifest.json"

DEFAULTS = {
    "fringe.kind": "pulse_pair",
    "fringe.visibility": "1.0",
    "fringe.phase_offset": "0.0",
    "lock.phi0": "0.0",
    "det.f_signal": "200000",
    "det.f_dark_ch0": "0",
    "det.f_dark_ch1": "0",
    "drift.wiener_diffusion": "0",
    "drift.linear_rate": "0",
    "drift.asd_file": "",
    "drift.asd_sample_rate": "100",
    "controller.variant": "immediate",
    "controller.n": "1",
    "controller.kp": "1.0",
    "controller.ki": "1.0",
    "controller.window": "1000",
    "actuator.enabled": "false",
    "actuator.dac_bits": "16",
    "actuator.range_rad": repr(2 * math.pi * 3.4),
    "actuator.loop_delay": "2e-6",
    "actuator.recenter": "false",
    "epsilon": "1e-5",
    "raw_epsilon": "false",
    "duration": "100",
    "initial_phase_error": "0",
    "seed": "0",
    "record.sample_rate": "20",
    "record.clicks": "false",
    "compensate_darkcounts": "true",
    "burn_in": "",
}


class CliError(Exception):
    pass


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


def load_settings(config_file: str | None, overrides: list[str]) -> dict:
    """Flat ``key = value`` file with dotted keys, then ``KEY=VALUE`` overrides."""
    settings = dict(DEFAULTS)
    if config_file:
        cp = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                       comment_prefixes=("#", ";"))
        cp.optionxform = str
        try:
            text = Path(config_file).read_text(encoding="utf-8")
            cp.read_string("[config]\n" + text, source=config_file)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {config_file}: {exc}") from exc
        for k, v in cp["config"].items():
            if k not in DEFAULTS:
                raise ConfigError(f"{config_file}: unknown key {k!r}")
            settings[k] = v.strip()
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must be KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        if k.strip() not in DEFAULTS:
            raise ConfigError(f"unknown key {k.strip()!r}")
        settings[k.strip()] = v.strip()
    return settings


def build_config(s: dict) -> sim.SimConfig:
    try:
        fringe = FringeModel(s["fringe.kind"], float(s["fringe.visibility"]),
                             float(s["fringe.phase_offset"]))
        lock = lock_point(fringe, float(s["lock.phi0"]))
        det = DetectorConfig(float(s["det.f_signal"]), float(s["det.f_dark_ch0"]),
                             float(s["det.f_dark_ch1"]))
        members = []
        if float(s["drift.wiener_diffusion"]):
            members.append(drift_mod.Wiener(float(s["drift.wiener_diffusion"])))
        if float(s["drift.linear_rate"]):
            members.append(drift_mod.Linear(float(s["drift.linear_rate"])))
        if s["drift.asd_file"]:
            spec = drift_mod.NoiseSpectrum.from_csv(s["drift.asd_file"])
            members.append(drift_mod.FromASD(spec, float(s["drift.asd_sample_rate"])))
        drift = (drift_mod.NoDrift() if not members
                 else members[0] if len(members) == 1 else drift_mod.Composite(members))
        variant = s["controller.variant"].lower()
        if variant == "immediate":
            ctrl = Immediate()
        elif variant in ("averaging", "averaging_n"):
            ctrl = AveragingN(int(s["controller.n"]))
        elif variant == "pi":
            ctrl = PI(float(s["controller.kp"]), float(s["controller.ki"]), int(s["controller.window"]))
        else:
            raise ConfigError(f"unknown controller variant {variant!r}")
        act = None
        if _bool(s["actuator.enabled"]):
            act = ActuatorModel(int(s["actuator.dac_bits"]), float(s["actuator.range_rad"]),
                                float(s["actuator.loop_delay"]), _bool(s["actuator.recenter"]))
        fs = float(s["record.sample_rate"])
        cfg = sim.SimConfig(
            fringe=fringe, lock=lock, det=det, drift=drift, controller=ctrl, actuator=act,
            epsilon=float(s["epsilon"]), duration=float(s["duration"]),
            initial_phase_error=float(s["initial_phase_error"]), seed=int(s["seed"]),
            sample_rate=fs if fs > 0 else None, record_clicks=_bool(s["record.clicks"]),
            compensate_darkcounts=_bool(s["compensate_darkcounts"]),
            burn_in=float(s["burn_in"]) if s["burn_in"] else None,
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    if not _bool(s["raw_epsilon"]):
        cfg = replace(cfg, epsilon=analytics.stable_sign(cfg.target) * abs(cfg.epsilon))
    cfg.validate()
    return cfg


def _manifest(argv, settings, seed, start) -> dict:
    return {
        "tool": "photonlock",
        "version": __version__,
        "command_line": shlex.join(["photonlock", *argv]),
        "seed": seed,
        "config": settings,
        "start": start,
        "end": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _dump(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def _add_common(p: argparse.ArgumentParser, sim_flags: bool = True) -> None:
    p.add_argument("--out-dir", default=".", help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv",
                   help="format of tabular outputs")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p.add_argument("--seed", type=int, help="master random seed")
    if sim_flags:
        p.add_argument("--config", help="flat key = value config file with dotted keys")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key (repeatable)")
        p.add_argument("--epsilon", type=float, help="step-size magnitude |eps| in rad")
        p.add_argument("--raw-epsilon", action="store_true",
                       help="take --epsilon as signed, no automatic sign")
        p.add_argument("--duration", type=float, help="simulated time in s")
        p.add_argument("--f-signal", type=float, help="signal count rate in Hz")
        p.add_argument("--sample-rate", type=float, help="trace sample rate in Hz (0: summary only)")
        p.add_argument("--strict", action="store_true",
                       help="treat the non-convergence warning as an error (exit 3)")


def _settings_from_args(args) -> dict:
    overrides = list(args.set)
    for flag, key in (("epsilon", "epsilon"), ("duration", "duration"), ("f_signal", "det.f_signal"),
                      ("sample_rate", "record.sample_rate"), ("seed", "seed")):
        val = getattr(args, flag, None)
        if val is not None:
            overrides.append(f"{key}={val!r}")
    if getattr(args, "raw_epsilon", False):
        overrides.append("raw_epsilon=true")
    return load_settings(args.config, overrides)


def _table(rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        return _dump(rows)
    if not rows:
        return ""
    keys = list(rows[0])
    lines = [",".join(keys)]
    for r in rows:
        lines.append(",".join("" if r[k] is None else repr(r[k]) if isinstance(r[k], float) else str(r[k])
                              for k in keys))
    return "\n".join(lines) + "\n"


def cmd_simulate(args, argv) -> int:
    start = _now()
    settings = _settings_from_args(args)
    cfg = build_config(settings)
    out = Path(args.out_dir)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = sim.run(cfg)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    manifest = _manifest(argv, settings, cfg.seed, start)
    if result.phase_error is not None:
        if args.format == "csv":
            write_atomic(out / "trace.csv", sim.trace_to_csv(result), args.force)
        else:
            rows = {"t_s": result.times.tolist(), "phase_error_rad": result.phase_error.tolist(),
                    "command_rad": result.command.tolist()}
            write_atomic(out / "trace.json", _dump(rows), args.force)
    if result.click_times is not None:
        write_atomic(out / "clicks.csv", timestamps_to_csv(result.click_times, result.click_channels),
                     args.force)
    summary = result.summary()
    manifest["wallclock_s"] = summary.pop("wallclock")
    summary["manifest"] = MANIFEST_NAME
    theory = cfg.theory()
    if theory is not None:
        summary["theory"] = {"theta": theory.theta, "tau": theory.tau, "f_lock": theory.f_lock,
                             "sigma_stat": theory.sigma_stat}
    write_atomic(out / "summary.json", _dump(summary), args.force)
    write_atomic(out / MANIFEST_NAME, _dump(manifest), args.force)
    if result.nonconverged and args.strict:
        print("error: lock did not converge (--strict)", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def _parse_values(text: str) -> list[float]:
    text = text.strip()
    if not text:
        return []
    if text.startswith("log:"):
        a, b, n = text[4:].split(":")
        return np.geomspace(float(a), float(b), int(n)).tolist()
    return [float(v) for v in text.split(",") if v.strip()]


def cmd_sweep(args, argv) -> int:
    start = _now()
    settings = _settings_from_args(args)
    cfg = build_config(settings)
    try:
        values = _parse_values(args.values)
    except ValueError as exc:
        raise ConfigError(f"cannot parse --values: {exc}") from exc
    if not values:
        raise ConfigError("--values is empty")
    rule = None
    if args.epsilon_rule == "wiener_opt":
        diffusion = float(settings["drift.wiener_diffusion"])
        if diffusion <= 0:
            raise ConfigError("--epsilon-rule wiener_opt needs drift.wiener_diffusion > 0")

        def rule(f_signal):
            c = replace(cfg, det=replace(cfg.det, f_signal=f_signal))
            return analytics.wiener_optimum(c.target, c.det.f_total, diffusion)[0]

    rows = sim.sweep(cfg, args.axis, values, args.replicates, auto_sign=not args.raw_epsilon,
                     epsilon_rule=rule, jobs=args.jobs)
    out = Path(args.out_dir)
    if args.format == "csv":
        write_atomic(out / "sweep.csv", sim.sweep_to_csv(rows), args.force)
    else:
        write_atomic(out / "sweep.json", _dump([r.__dict__ for r in rows]), args.force)
    write_atomic(out / MANIFEST_NAME, _dump(_manifest(argv, settings, cfg.seed, start)), args.force)
    return EXIT_OK


def _parse_drift(spec: str):
    kind, _, val = spec.partition(":")
    kind = kind.lower()
    if kind == "none":
        return "none", None
    if kind in ("wiener", "linear"):
        try:
            return kind, float(val)
        except ValueError as exc:
            raise ConfigError(f"bad drift value in {spec!r}") from exc
    if kind == "asd":
        return "asd", drift_mod.NoiseSpectrum.from_csv(val)
    raise ConfigError(f"drift spec must be none, wiener:D, linear:d or asd:FILE, got {spec!r}")


def plan(drift_spec: str, f_c: float, r0: float, slope: float, target: float | None = None) -> dict:
    """Optimal step size and predicted performance; the logic behind ``photonlock plan``."""
    if not f_c > 0:
        raise ConfigError("--f-c must be > 0")
    lock = LockPoint(0.0, r0, slope)
    if slope == 0:
        raise ConfigError("slope must be nonzero")
    kind, val = _parse_drift(drift_spec)
    out: dict = {"drift": drift_spec, "f_c": f_c, "r0": r0, "slope": slope}
    eps = sigma = None
    if kind == "wiener":
        eps, sigma = analytics.wiener_optimum(lock, f_c, val) if val > 0 else (None, None)
    elif kind == "linear":
        eps, sigma = analytics.linear_drift_optimum(val, f_c, lock) if val != 0 else (None, None)
    elif kind == "asd":
        eps, sigma = analytics.optimal_epsilon_numeric(val, lock, f_c)
    if eps is not None:
        p = analytics.ou_params(eps, lock, f_c)
        out.update(epsilon_opt=eps, sigma_min=sigma, f_lock=p.f_lock, tau=p.tau)
    else:
        out.update(epsilon_opt=None, sigma_min=None, f_lock=None, tau=None,
                   note="no drift: lock noise alone decreases with |eps|, no finite optimum")
    if target is not None:
        if not target > 0:
            raise ConfigError("--target must be > 0")
        eps_max = analytics.max_epsilon_for_target(target, lock) * analytics.stable_sign(lock)
        p = analytics.ou_params(eps_max, lock, f_c)
        out["target"] = target
        out["epsilon_max"] = eps_max
        out["f_lock_at_epsilon_max"] = p.f_lock
        try:
            if kind == "wiener" and val > 0:
                fmin = analytics.min_count_rate_wiener(target, val, lock)
            elif kind == "linear" and val != 0:
                fmin = analytics.min_count_rate_linear(target, val, lock)
            elif kind == "asd":
                fmin = analytics.min_count_rate_numeric(target, val, lock)
            else:
                fmin = 0.0
            out["f_c_min"] = fmin
            out["feasible"] = f_c >= fmin
        except ConfigError as exc:
            out["f_c_min"] = None
            out["feasible"] = False
            out["infeasible_reason"] = str(exc)
    return out


def cmd_plan(args, argv) -> int:
    start = _now()
    result = plan(args.drift, args.f_c, args.r0, args.slope, args.target)
    result["manifest"] = MANIFEST_NAME
    text = _dump(result)
    print(text, end="")
    if args.target is not None and not result.get("feasible", True):
        print("infeasible: accuracy target cannot be met at this count rate", file=sys.stderr)
    out = Path(args.out_dir)
    write_atomic(out / "plan.json", text, args.force)
    settings = {k: v for k, v in vars(args).items() if k != "func"}
    write_atomic(out / MANIFEST_NAME, _dump(_manifest(argv, settings, args.seed, start)), args.force)
    return EXIT_OK


def cmd_analyze(args, argv) -> int:
    start = _now()
    path = Path(args.input)
    if not path.exists():
        raise ConfigError(f"{path}: no such file")
    header = path.read_text(encoding="utf-8").split("\n", 1)[0].strip()
    extra = {}
    if header.startswith("t_ns"):
        settings = _settings_from_args(args)
        cfg = build_config(settings)
        t, ch = read_timestamps(path)
        fs = cfg.sample_rate or 20.0
        dur = float(t[-1]) if t.size else 0.0
        rep = sim.replay(t, ch, replace(cfg, sample_rate=fs), duration=dur)
        if rep.command is None or rep.command.size < 2:
            raise ConfigError(f"{path}: stream too short to analyze")
        trace = estimators.PhaseTrace(rep.command, fs)
        extra = {"source": "timestamps", "n_clicks": rep.n_events, "mean_ratio": rep.mean_ratio,
                 "click_counts": list(rep.click_counts), "analyzed_signal": "command_rad"}
    else:
        trace = estimators.PhaseTrace.from_csv(path)
        extra = {"source": "trace"}
    taus = estimators.log_taus(trace, args.per_decade, args.tau_min, args.tau_max)
    dev = estimators.increment_deviation(trace, taus, args.deviation_kind)
    if args.stitch:
        slow = estimators.PhaseTrace.from_csv(args.stitch)
        dev = estimators.stitch(dev, estimators.increment_deviation(
            slow, estimators.log_taus(slow, args.per_decade), args.deviation_kind), args.crossover)
    spec = estimators.psd_estimate(trace, args.segments)
    fit = {}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            o = estimators.ou_fit(trace)
            fit = {"theta": o.theta, "tau": 1.0 / o.theta if o.theta else None,
                   "sigma_stat": o.sigma_stat, "lag1": o.a, "out_of_band": o.out_of_band,
                   "unstable": False}
        except UnstableFitError as exc:
            fit = {"unstable": True, "message": str(exc), "sigma_stat": float(np.std(trace.samples))}
    fit["warnings"] = [str(w.message) for w in caught]
    fit.update(extra)
    fit["deviation_slope"] = estimators.loglog_slope(dev.taus, dev.deviation) if np.all(dev.deviation > 0) else None
    fit["manifest"] = MANIFEST_NAME
    out = Path(args.out_dir)
    if args.format == "csv":
        write_atomic(out / "deviation.csv", dev.to_csv(), args.force)
        write_atomic(out / "psd.csv", spectrum_to_csv(spec.frequencies, spec.asd), args.force)
    else:
        write_atomic(out / "deviation.json", _dump({"tau_s": dev.taus.tolist(),
                                                    "deviation_rad": dev.deviation.tolist()}), args.force)
        write_atomic(out / "psd.json", _dump({"freq_hz": spec.frequencies.tolist(),
                                              "asd_rad_per_sqrthz": spec.asd.tolist()}), args.force)
    write_atomic(out / "ou_fit.json", _dump(fit), args.force)
    write_atomic(out / MANIFEST_NAME, _dump(_manifest(argv, {"input": str(path)}, None, start)), args.force)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="photonlock", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one Monte Carlo lock simulation")
    _add_common(s)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep", help="sweep epsilon or count rate")
    _add_common(s)
    s.add_argument("--axis", choices=("epsilon", "count_rate"), required=True)
    s.add_argument("--values", required=True,
                   help="comma list, or log:START:STOP:N for log spacing")
    s.add_argument("--replicates", type=int, default=1)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--epsilon-rule", choices=("fixed", "wiener_opt"), default="fixed")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("plan", help="optimal step size and predicted error")
    _add_common(s, sim_flags=False)
    s.add_argument("--drift", default="none", help="none | wiener:D | linear:d | asd:FILE")
    s.add_argument("--f-c", type=float, default=200e3, help="count rate in Hz")
    s.add_argument("--r0", type=float, default=5 / 8)
    s.add_argument("--slope", type=float, default=1 / 8)
    s.add_argument("--target", type=float, help="accuracy target in rad")
    s.set_defaults(func=cmd_plan)

    s = sub.add_parser("analyze", help="deviation, PSD and OU fit of a trace or timestamp file")
    _add_common(s)
    s.add_argument("input", help="trace CSV (t_s,phase_rad) or timestamps CSV (t_ns,channel)")
    s.add_argument("--segments", type=int, default=8)
    s.add_argument("--per-decade", type=int, default=10)
    s.add_argument("--tau-min", type=float)
    s.add_argument("--tau-max", type=float)
    s.add_argument("--deviation-kind", choices=("first", "second"), default="first")
    s.add_argument("--stitch", help="slow-sampled trace for lags at and above --crossover")
    s.add_argument("--crossover", type=float, default=1.0)
    s.set_defaults(func=cmd_analyze)
    return p


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args, argv)
    except (ConfigError, LockError, FileExistsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
