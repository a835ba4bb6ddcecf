"""Discrete PID regulation of the converter phase shift."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import ConfigError


class Mode(str, enum.Enum):
    CC = "cc"
    CV = "cv"
    REST = "rest"
    DISCHARGE = "discharge"

    @property
    def is_current_loop(self):
        return self is not Mode.CV


@dataclass(frozen=True)
class Setpoint:
    mode: Mode
    ref_value: float = 0.0

    def __post_init__(self):
        if self.mode is Mode.REST and self.ref_value != 0.0:
            raise ValueError("rest setpoint carries ref 0")
        if self.mode is Mode.DISCHARGE and not self.ref_value > 0.0:
            raise ValueError("discharge-pulse ref must be > 0 (magnitude)")
        if self.mode in (Mode.CC, Mode.CV) and self.ref_value < 0.0:
            raise ValueError("reference must be >= 0")


REST = Setpoint(Mode.REST)


@dataclass(frozen=True)
class PidGains:
    kp: float
    ki: float
    kd: float = 0.0
    out_min: float = -0.25
    out_max: float = 0.25

    def __post_init__(self):
        if not all(math.isfinite(g) for g in (self.kp, self.ki, self.kd)):
            raise ConfigError("gains must be finite")
        if self.ki < 0.0:
            raise ConfigError("must be >= 0", "ki")
        if not self.out_min < self.out_max:
            raise ConfigError("out_min must be < out_max")


# Tuned on the default plant (200 V / 20 kHz converter, default pack).
DEFAULT_CC_GAINS = PidGains(kp=2e-4, ki=0.05)
DEFAULT_CV_GAINS = PidGains(kp=5e-4, ki=0.1)


@dataclass(frozen=True)
class PidState:
    integral: float = 0.0
    prev_error: float = 0.0
    initialized: bool = False


def pid_step(g: PidGains, s: PidState, error: float, dt: float):
    """One controller update; returns ``(phi_cmd, new_state)``.

    Clamping anti-windup: the integral is frozen whenever the unclamped output
    is saturated and the error would push it further out.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    deriv = (error - s.prev_error) / dt if s.initialized else 0.0
    integral = s.integral + error * dt
    u = g.kp * error + g.ki * integral + g.kd * deriv
    if (u > g.out_max and error > 0.0) or (u < g.out_min and error < 0.0):
        integral = s.integral
        u = g.kp * error + g.ki * integral + g.kd * deriv
    u = min(max(u, g.out_min), g.out_max)
    return u, PidState(integral, error, True)


def bumpless_state(g: PidGains, phi_now: float, error: float, dt: float) -> PidState:
    """State whose next :func:`pid_step` at ``error`` outputs ``phi_now``."""
    if g.ki == 0.0:
        return PidState()
    return PidState(integral=(phi_now - g.kp * error) / g.ki - error * dt)


def control_error(sp: Setpoint, measured_i: float, measured_v: float) -> float:
    if sp.mode is Mode.CV:
        return sp.ref_value - measured_v
    if sp.mode is Mode.CC:
        return sp.ref_value - measured_i
    if sp.mode is Mode.DISCHARGE:
        return -sp.ref_value - measured_i
    return -measured_i
