"""Charging strategies (CC-CV, MSCC, MSCC with reflex pulses) and MSCC stage maths.

Each strategy is a small state machine: given the latest terminal voltage and
current it returns the next :class:`~evcharge.control.Setpoint` and an updated
:class:`StrategyState`.  States are immutable; ``done`` is absorbing.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .control import REST, Mode, Setpoint
from .errors import ConfigError


class StageUnreachableWarning(UserWarning):
    """A predicted stage duration came out negative and was reported as zero."""


@dataclass(frozen=True)
class CcCvConfig:
    i_cc: float
    v_max: float
    i_cutoff: float
    debounce_steps: int = 5

    def __post_init__(self):
        if not self.i_cc > self.i_cutoff > 0.0:
            raise ConfigError("require i_cc > i_cutoff > 0", "i_cc")
        if not self.v_max > 0.0:
            raise ConfigError("must be > 0", "v_max")
        if self.debounce_steps < 1:
            raise ConfigError("must be >= 1", "debounce_steps")


@dataclass(frozen=True)
class MsccConfig:
    i_first: float
    i_last: float
    v_threshold: float
    n_stages: int = 5
    debounce_steps: int = 5

    def __post_init__(self):
        if not self.i_first > self.i_last > 0.0:
            raise ConfigError("require i_first > i_last > 0", "i_first")
        if self.n_stages < 2:
            raise ConfigError("must be >= 2", "n_stages")
        if not self.v_threshold > 0.0:
            raise ConfigError("must be > 0", "v_threshold")
        if self.debounce_steps < 1:
            raise ConfigError("must be >= 1", "debounce_steps")

    @cached_property
    def currents(self):
        return stage_currents(self.i_first, self.i_last, self.n_stages)


@dataclass(frozen=True)
class ReflexConfig:
    t_charge: float = 0.2
    t_rest1: float = 0.5
    t_discharge: float = 0.05
    t_rest2: float = 0.25
    reflex_duration: float = 20.0

    def __post_init__(self):
        for name in ("t_charge", "t_rest1", "t_discharge", "t_rest2", "reflex_duration"):
            if getattr(self, name) < 0.0:
                raise ConfigError("must be >= 0", name)
        if not self.t_charge > 0.0:
            raise ConfigError("must be > 0", "t_charge")

    @property
    def cycle(self):
        return self.t_charge + self.t_rest1 + self.t_discharge + self.t_rest2


@dataclass(frozen=True)
class EquivBatteryParams:
    """Series capacitor + resistor stand-in for the battery used by the stage-time predictor."""

    c1: float
    r1: float
    v0: float
    v_t: float

    def __post_init__(self):
        for name in ("c1", "r1", "v0", "v_t"):
            if not getattr(self, name) > 0.0:
                raise ConfigError("must be > 0", name)
        if not self.v_t > self.v0:
            raise ConfigError("require v_t > v0", "v_t")


@dataclass(frozen=True)
class StrategyState:
    phase: str = "cc"  # cc | cv | stage | reflex | done
    stage: int = 1
    debounce_counter: int = 0
    stage_start_time: float = 0.0
    reflex_start_time: float = 0.0

    @property
    def done(self):
        return self.phase == "done"


DONE = StrategyState(phase="done")

# ---------------------------------------------------------------- stage maths


def stage_currents(i_first: float, i_last: float, n_stages: int = 5) -> list:
    """Geometric ladder from ``i_first`` down to ``i_last``.

    Every interior current is the geometric mean of its neighbours, which is
    the stationary point of the predicted total charging time.
    """
    if not (i_first > i_last > 0.0):
        raise ValueError("stage currents need i_first > i_last > 0")
    if n_stages < 2:
        raise ValueError("n_stages must be >= 2")
    ratio = (i_last / i_first) ** (1.0 / (n_stages - 1))
    currents = [i_first * ratio**k for k in range(n_stages)]
    currents[-1] = i_last
    return currents


def predict_stage_times(currents, eq: EquivBatteryParams):
    """Per-stage durations and their total for a constant-current ladder.

    Stage 1 starts from the capacitor voltage ``v0``; every later stage starts
    where the previous one hit ``v_t`` less its resistive drop.  Negative
    durations (stage already past threshold) are reported as zero with a
    :class:`StageUnreachableWarning`.
    """
    currents = [float(i) for i in currents]
    if not currents or any(i <= 0.0 for i in currents):
        raise ValueError("stage currents must be positive")
    if any(b >= a for a, b in zip(currents, currents[1:])):
        raise ValueError("stage currents must be strictly decreasing")
    times = []
    for x, i_x in enumerate(currents):
        v_start = eq.v0 if x == 0 else eq.v_t - currents[x - 1] * eq.r1
        dt = (eq.v_t - v_start - i_x * eq.r1) * eq.c1 / i_x
        if dt < 0.0:
            warnings.warn(f"stage {x + 1} unreachable (predicted {dt:.3g} s)", StageUnreachableWarning)
            dt = 0.0
        times.append(dt)
    return times, sum(times)


def _total_time_grid(i_first, middles, i_last, eq: EquivBatteryParams):
    """Vectorised total predicted time; ``middles`` are broadcastable arrays."""
    ladder = [i_first, *middles, i_last]
    total = np.maximum((eq.v_t - eq.v0 - i_first * eq.r1) * eq.c1 / i_first, 0.0)
    for prev, cur in zip(ladder, ladder[1:]):
        total = total + (prev - cur) * eq.r1 * eq.c1 / cur
    return total


def brute_force_optimal_mid(i_first, i_last, n_stages, eq: EquivBatteryParams, grid_points=500):
    """Exhaustive grid search for the interior currents minimising total time.

    Each interior current ranges over a log-spaced grid strictly inside
    ``(i_last, i_first)``; combinations that are not strictly decreasing are
    excluded.  Returns the argmin as a list (empty when ``n_stages == 2``).
    """
    if not (i_first > i_last > 0.0):
        raise ValueError("need i_first > i_last > 0")
    if grid_points < 100:
        raise ValueError("grid_points must be >= 100")
    n_mid = n_stages - 2
    if n_mid <= 0:
        return []
    grid = brute_force_grid(i_first, i_last, grid_points)
    if n_mid == 1:
        totals = _total_time_grid(i_first, [grid], i_last, eq)
        return [float(grid[int(np.argmin(totals))])]

    # Outer loops walk the leading n_mid-2 currents (strictly decreasing grid
    # indices); the last two are a dense 2-D block restricted to the grid
    # below the last leading current.  Ordering inside the block via +inf.
    best_total, best = math.inf, None
    for lead in itertools.combinations(range(grid_points - 1, -1, -1), n_mid - 2):
        top = lead[-1] if lead else grid_points
        if top < 2:
            continue
        sub = grid[:top]
        block_a, block_b = sub[:, None], sub[None, :]
        lead_vals = [grid[k] for k in lead]
        totals = _total_time_grid(i_first, [*lead_vals, block_a, block_b], i_last, eq)
        totals = np.where(block_a > block_b, totals, np.inf)
        k = int(np.argmin(totals))
        if totals.flat[k] < best_total:
            ka, kb = divmod(k, top)
            best_total, best = float(totals.flat[k]), [*lead_vals, sub[ka], sub[kb]]
    return [float(v) for v in best]


def brute_force_grid(i_first, i_last, grid_points):
    """Interior search grid: log-spaced, excluding both endpoints."""
    return np.exp(np.linspace(math.log(i_last), math.log(i_first), grid_points + 2)[1:-1])


# ---------------------------------------------------------------- state machines


def _debounce(st: StrategyState, condition: bool) -> int:
    return st.debounce_counter + 1 if condition else 0


def next_setpoint_cccv(cfg: CcCvConfig, st: StrategyState, measured_v, measured_i, t):
    if st.phase == "done":
        return REST, st
    if st.phase == "cc":
        count = _debounce(st, measured_v >= cfg.v_max)
        if count >= cfg.debounce_steps:
            st = StrategyState(phase="cv", stage=2, stage_start_time=t)
            return Setpoint(Mode.CV, cfg.v_max), st
        return Setpoint(Mode.CC, cfg.i_cc), replace(st, debounce_counter=count)
    # cv
    count = _debounce(st, measured_i <= cfg.i_cutoff)
    if count >= cfg.debounce_steps:
        return REST, replace(DONE, stage=st.stage, stage_start_time=t)
    return Setpoint(Mode.CV, cfg.v_max), replace(st, debounce_counter=count)


def next_setpoint_mscc(cfg: MsccConfig, st: StrategyState, measured_v, t):
    if st.phase == "done":
        return REST, st
    currents = cfg.currents
    count = _debounce(st, measured_v >= cfg.v_threshold)
    if count >= cfg.debounce_steps:
        if st.stage >= cfg.n_stages:
            return REST, replace(DONE, stage=st.stage, stage_start_time=t)
        st = StrategyState(phase="stage", stage=st.stage + 1, stage_start_time=t)
        return Setpoint(Mode.CC, currents[st.stage - 1]), st
    return Setpoint(Mode.CC, currents[st.stage - 1]), replace(st, phase="stage", debounce_counter=count)


def reflex_setpoint(rcfg: ReflexConfig, current: float, offset: float) -> Setpoint:
    """Pulse pattern at ``offset`` seconds into the reflex period."""
    pos = math.fmod(offset, rcfg.cycle)
    eps = 1e-9
    if pos < rcfg.t_charge - eps:
        return Setpoint(Mode.CC, current)
    pos -= rcfg.t_charge
    if pos < rcfg.t_rest1 - eps:
        return REST
    pos -= rcfg.t_rest1
    if pos < rcfg.t_discharge - eps:
        return Setpoint(Mode.DISCHARGE, current)
    return REST


def next_setpoint_mscc_reflex(cfg: MsccConfig, rcfg: ReflexConfig, st: StrategyState, measured_v, t):
    if st.phase == "done":
        return REST, st
    currents = cfg.currents
    if st.phase == "reflex":
        elapsed = t - st.reflex_start_time
        if elapsed < rcfg.reflex_duration - 1e-9:
            return reflex_setpoint(rcfg, currents[st.stage - 1], elapsed), st
        if st.stage >= cfg.n_stages:
            return REST, replace(DONE, stage=st.stage, stage_start_time=t)
        st = StrategyState(phase="stage", stage=st.stage + 1, stage_start_time=t)
        return Setpoint(Mode.CC, currents[st.stage - 1]), st
    count = _debounce(st, measured_v >= cfg.v_threshold)
    if count >= cfg.debounce_steps:
        st = replace(st, phase="reflex", debounce_counter=0, reflex_start_time=t)
        return next_setpoint_mscc_reflex(cfg, rcfg, st, measured_v, t)
    return Setpoint(Mode.CC, currents[st.stage - 1]), replace(st, phase="stage", debounce_counter=count)


# ---------------------------------------------------------------- engine-facing wrappers


class CcCv:
    name = "cccv"

    def __init__(self, cfg: CcCvConfig):
        self.cfg = cfg

    def initial_state(self):
        return StrategyState(phase="cc")

    def next(self, st, measured_v, measured_i, t):
        return next_setpoint_cccv(self.cfg, st, measured_v, measured_i, t)


class Mscc:
    name = "mscc"

    def __init__(self, cfg: MsccConfig):
        self.cfg = cfg

    def initial_state(self):
        return StrategyState(phase="stage")

    def next(self, st, measured_v, measured_i, t):
        return next_setpoint_mscc(self.cfg, st, measured_v, t)


class MsccReflex:
    name = "mscc-reflex"

    def __init__(self, cfg: MsccConfig, rcfg: ReflexConfig):
        self.cfg = cfg
        self.rcfg = rcfg

    def initial_state(self):
        return StrategyState(phase="stage")

    def next(self, st, measured_v, measured_i, t):
        return next_setpoint_mscc_reflex(self.cfg, self.rcfg, st, measured_v, t)


class ConstantCurrent:
    """Plain constant-current charge with no voltage stop; ends via SoC target or t_max."""

    name = "cc"

    def __init__(self, current: float):
        self.current = current

    def initial_state(self):
        return StrategyState(phase="cc")

    def next(self, st, measured_v, measured_i, t):
        if self.current == 0.0:
            return REST, st
        return Setpoint(Mode.CC, self.current), st


def equivalent_from_pack(pack, soc0: float, v_t: float) -> EquivBatteryParams:
    """Collapse a pack to the series C-R stand-in used by :func:`predict_stage_times`.

    ``c1`` comes from the mean open-circuit slope between ``soc0`` and full
    charge; ``r1`` is the settled resistance ``R_o + R_th`` at ``soc0``.
    """
    slope = (pack.uoc_table(1.0) - pack.uoc_table(soc0)) / (1.0 - soc0)
    if not slope > 0.0:
        raise ValueError("open-circuit voltage must rise with SoC for an equivalent capacitance")
    return EquivBatteryParams(
        c1=3600.0 * pack.capacity_ah / slope,
        r1=pack.ro_table(soc0) + pack.rth_table(soc0),
        v0=pack.uoc_table(soc0),
        v_t=v_t,
    )
