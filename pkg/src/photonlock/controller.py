"""Per-click feedback laws and the actuator model.

Every detection moves the interferometer phase by a fixed step: ``eps0`` for a
click in channel 0 and ``eps1`` for channel 1, with
``eps0 = 2 eps (1 - r0)`` and ``eps1 = -2 eps r0``. The mean step at click
ratio ``r`` is ``2 eps (r - r0)``, which vanishes at the lock point.

The integral command is always evaluated as ``c0 * eps0 + c1 * eps1`` from the
per-channel click counts rather than by summing steps. Controllers that apply
the same clicks therefore agree bit for bit once all clicks are applied,
whatever the grouping.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from photonlock.errors import ConfigError, InstabilityError
from photonlock.ifmodel import LockPoint


@dataclass(frozen=True)
class StepParams:
    epsilon: float
    r0: float
    eps0: float
    eps1: float


def make_step_params(epsilon: float, lock: LockPoint, allow_unstable: bool = False) -> StepParams:
    """Channel step sizes for step parameter ``epsilon`` at ``lock``.

    ``epsilon`` must have the opposite sign of the fringe slope; ``epsilon = 0``
    is accepted and gives a free-running (open) loop.
    """
    if lock.slope == 0.0:
        raise InstabilityError("zero fringe slope at the lock point")
    if not allow_unstable and epsilon != 0.0 and math.copysign(1.0, epsilon) == math.copysign(1.0, lock.slope):
        raise InstabilityError(
            f"epsilon={epsilon:g} and slope={lock.slope:g} need opposite signs for a stable lock"
        )
    return StepParams(epsilon, lock.r0, 2.0 * epsilon * (1.0 - lock.r0), -2.0 * epsilon * lock.r0)


@dataclass(frozen=True)
class Immediate:
    pass


@dataclass(frozen=True)
class AveragingN:
    """Collect ``n`` clicks, then apply their summed steps at once."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("averaging count n must be >= 1")


@dataclass(frozen=True)
class PI:
    """Integral part scaled by ``ki`` plus a proportional part.

    The proportional part is ``kp`` times the sum of the steps of the last
    ``window`` clicks, i.e. ``kp * 2 eps W (r_hat - r0)`` with ``r_hat`` the
    windowed click ratio. It does not accumulate.
    """

    kp: float = 1.0
    ki: float = 1.0
    window: int = 1000

    def __post_init__(self):
        if self.window < 1:
            raise ConfigError("PI window must be >= 1 click")


Variant = Union[Immediate, AveragingN, PI]


@dataclass(frozen=True)
class ActuatorModel:
    dac_bits: int = 16
    range_rad: float = 2 * math.pi * 3.4
    loop_delay: float = 2e-6
    recenter: bool = False

    def __post_init__(self):
        if self.dac_bits < 1 or self.range_rad <= 0 or self.loop_delay < 0:
            raise ConfigError("invalid actuator parameters")

    @property
    def lsb(self) -> float:
        return self.range_rad / 2**self.dac_bits


def quantize(actuator: ActuatorModel, command: float) -> tuple[float, bool]:
    """Nearest DAC level for ``command`` (absolute, in [0, range]) and a saturation flag."""
    saturated = command < 0.0 or command > actuator.range_rad
    c = min(max(command, 0.0), actuator.range_rad)
    return round(c / actuator.lsb) * actuator.lsb, saturated


@dataclass
class ControllerState:
    """Mutable controller state, one per run."""

    variant: Variant = field(default_factory=Immediate)
    counts: list = field(default_factory=lambda: [0, 0])
    pending: list = field(default_factory=lambda: [0, 0])
    window: deque = field(default_factory=deque)
    window_counts: list = field(default_factory=lambda: [0, 0])
    command_phase: float = 0.0

    def integral(self, steps: StepParams) -> float:
        return self.counts[0] * steps.eps0 + self.counts[1] * steps.eps1

    def flush(self, steps: StepParams) -> float:
        """Apply clicks still held by an averaging controller; returns the delta."""
        self.counts[0] += self.pending[0]
        self.counts[1] += self.pending[1]
        self.pending = [0, 0]
        return self._set(self._command(steps))

    def _command(self, steps: StepParams) -> float:
        if isinstance(self.variant, PI):
            w = self.window_counts[0] * steps.eps0 + self.window_counts[1] * steps.eps1
            return self.variant.ki * self.integral(steps) + self.variant.kp * w
        return self.integral(steps)

    def _set(self, new: float) -> float:
        delta = new - self.command_phase
        self.command_phase = new
        return delta


def on_detection(state: ControllerState, steps: StepParams, channel: int) -> float:
    """Register one click and return the change of the phase command."""
    if channel not in (0, 1):
        raise ConfigError(f"channel must be 0 or 1, got {channel!r}")
    v = state.variant
    if isinstance(v, AveragingN):
        state.pending[channel] += 1
        if state.pending[0] + state.pending[1] < v.n:
            return 0.0
        return state.flush(steps)
    state.counts[channel] += 1
    if isinstance(v, PI):
        state.window.append(channel)
        state.window_counts[channel] += 1
        if len(state.window) > v.window:
            state.window_counts[state.window.popleft()] -= 1
    return state._set(state._command(steps))


def mean_step(steps: StepParams, r) -> np.ndarray:
    """Expected step per click at click ratio ``r``: ``2 eps (r - r0)``."""
    return np.asarray(r) * steps.eps0 + (1.0 - np.asarray(r)) * steps.eps1


def step_variance(steps: StepParams, r) -> np.ndarray:
    """Per-click step variance ``4 eps^2 r (1 - r)``."""
    r = np.asarray(r)
    return r * (1.0 - r) * (steps.eps0 - steps.eps1) ** 2
