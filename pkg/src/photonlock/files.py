"""Readers and writers for the on-disk formats.

Timestamp streams use ``t_ns,channel`` with integer nanoseconds
(non-decreasing) and channel 0 or 1. Output files are written atomically.
"""

from __future__ import annotations

import csv
import os
import tempfile
from pathlib import Path

import numpy as np

from photonlock.errors import ConfigError


def write_atomic(path, text: str, force: bool = False) -> Path:
    path = Path(path)
    if path.exists() and not force:
        raise FileExistsError(f"{path} exists (use --force to overwrite)")
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def read_timestamps(path) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(t_seconds, channels)`` from a ``t_ns,channel`` CSV."""
    ts, chs = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if header != ["t_ns", "channel"]:
            raise ConfigError(f"{path}:1: expected header 't_ns,channel'")
        last = None
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                t, ch = int(row[0]), int(row[1])
            except (ValueError, IndexError) as exc:
                raise ConfigError(f"{path}:{lineno}: malformed row {row!r}") from exc
            if ch not in (0, 1):
                raise ConfigError(f"{path}:{lineno}: channel must be 0 or 1, got {ch}")
            if t < 0 or (last is not None and t < last):
                raise ConfigError(f"{path}:{lineno}: timestamps must be non-decreasing and >= 0")
            last = t
            ts.append(t)
            chs.append(ch)
    return np.array(ts, dtype=np.int64) * 1e-9, np.array(chs, dtype=np.int8)


def timestamps_to_csv(t_seconds, channels) -> str:
    t_ns = np.round(np.asarray(t_seconds) * 1e9).astype(np.int64)
    lines = ["t_ns,channel"]
    lines.extend(f"{t},{int(c)}" for t, c in zip(t_ns.tolist(), np.asarray(channels).tolist()))
    return "\n".join(lines) + "\n"


def spectrum_to_csv(freqs, asd) -> str:
    lines = ["freq_hz,asd_rad_per_sqrthz,psd_rad2_per_hz"]
    lines.extend(f"{f!r},{a!r},{a * a!r}" for f, a in zip(np.asarray(freqs).tolist(),
                                                          np.asarray(asd).tolist()))
    return "\n".join(lines) + "\n"
