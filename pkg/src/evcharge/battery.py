"""First-order Thevenin battery model scaled to a series/parallel pack.

Terminal voltage is ``U_L = U_oc(soc) + I*R_o + U_th`` with the RC pair obeying
``C_th dU_th/dt + U_th/R_th = I``.  Positive current charges the pack.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, replace

from .errors import ConfigError, OverchargeFault


@dataclass(frozen=True)
class Table:
    """Piecewise-linear breakpoint table over SoC, clamped at the ends."""

    soc: tuple
    values: tuple

    def __post_init__(self):
        soc = tuple(float(s) for s in self.soc)
        values = tuple(float(v) for v in self.values)
        object.__setattr__(self, "soc", soc)
        object.__setattr__(self, "values", values)
        if not soc:
            raise ConfigError("table must have at least one breakpoint")
        if len(soc) != len(values):
            raise ConfigError("table soc/value lengths differ")
        if any(s < 0.0 or s > 1.0 for s in soc):
            raise ConfigError("table breakpoints must lie in [0, 1]")
        if any(b <= a for a, b in zip(soc, soc[1:])):
            raise ConfigError("table breakpoints must be strictly increasing")

    @classmethod
    def constant(cls, value):
        return cls((0.0,), (value,))

    @classmethod
    def from_pairs(cls, pairs):
        pairs = list(pairs)
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    def __call__(self, soc):
        xs, ys = self.soc, self.values
        if soc <= xs[0]:
            return ys[0]
        if soc >= xs[-1]:
            return ys[-1]
        k = bisect_right(xs, soc)
        x0, x1 = xs[k - 1], xs[k]
        y0, y1 = ys[k - 1], ys[k]
        return y0 + (y1 - y0) * (soc - x0) / (x1 - x0)

    def scaled(self, factor):
        return Table(self.soc, tuple(v * factor for v in self.values))

    def as_pairs(self):
        return [[s, v] for s, v in zip(self.soc, self.values)]


@dataclass(frozen=True)
class CellParams:
    uoc_table: Table
    ro_table: Table
    rth_table: Table
    cth_table: Table
    capacity_ah: float
    v_max_cell: float
    v_nominal: float

    def __post_init__(self):
        for name in ("ro_table", "rth_table", "cth_table"):
            if any(v <= 0.0 for v in getattr(self, name).values):
                raise ConfigError("values must be > 0", name)
        if self.capacity_ah <= 0.0:
            raise ConfigError("must be > 0", "capacity_ah")
        uoc = self.uoc_table.values
        if any(b < a for a, b in zip(uoc, uoc[1:])):
            raise ConfigError("open-circuit voltage must be non-decreasing in SoC", "uoc_table")
        if self.v_max_cell < self.uoc_table(1.0):
            raise ConfigError("must be >= open-circuit voltage at SoC 1", "v_max_cell")


@dataclass(frozen=True)
class PackConfig:
    n_series: int = 35
    n_parallel: int = 35

    def __post_init__(self):
        for name in ("n_series", "n_parallel"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ConfigError("must be an integer >= 1", name)


@dataclass(frozen=True)
class PackParams(CellParams):
    """Pack-level parameters; field meanings match :class:`CellParams`."""


@dataclass(frozen=True)
class BatteryState:
    soc: float
    u_th: float = 0.0
    t: float = 0.0


def pack_from_cell(cell: CellParams, cfg: PackConfig) -> PackParams:
    s, p = cfg.n_series, cfg.n_parallel
    if s == 1 and p == 1:
        return PackParams(**{f: getattr(cell, f) for f in cell.__dataclass_fields__})
    r_scale = s / p
    return PackParams(
        uoc_table=cell.uoc_table.scaled(s),
        ro_table=cell.ro_table.scaled(r_scale),
        rth_table=cell.rth_table.scaled(r_scale),
        cth_table=cell.cth_table.scaled(p / s),
        capacity_ah=cell.capacity_ah * p,
        v_max_cell=cell.v_max_cell * s,
        v_nominal=cell.v_nominal * s,
    )


def interp_params(pack: CellParams, soc: float):
    """Return ``(uoc, ro, rth, cth)`` at ``soc``."""
    return (
        pack.uoc_table(soc),
        pack.ro_table(soc),
        pack.rth_table(soc),
        pack.cth_table(soc),
    )


def step(pack: CellParams, state: BatteryState, i_load: float, dt: float,
         soc_ceiling: float = 1.0) -> BatteryState:
    """Advance the pack by ``dt`` seconds with ``i_load`` held constant.

    The RC pair uses the exact exponential solution, so any ``dt`` is stable.
    Raises :class:`OverchargeFault` if SoC would pass ``soc_ceiling``.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    soc = state.soc
    rth = pack.rth_table(soc)
    decay = math.exp(-dt / (rth * pack.cth_table(soc)))
    target = rth * i_load
    u_th = target + (state.u_th - target) * decay
    new_soc = soc + i_load * dt / (3600.0 * pack.capacity_ah)
    if new_soc > soc_ceiling:
        raise OverchargeFault(
            f"SoC {new_soc:.6f} exceeds ceiling {soc_ceiling} at t={state.t + dt:.2f} s"
        )
    return replace(state, soc=new_soc, u_th=u_th, t=state.t + dt)


def terminal_voltage(pack: CellParams, state: BatteryState, i_load: float) -> float:
    return pack.uoc_table(state.soc) + i_load * pack.ro_table(state.soc) + state.u_th


def loss_power(pack: CellParams, state: BatteryState, i_load: float) -> float:
    """Ohmic plus polarization dissipation in watts."""
    soc = state.soc
    return i_load * i_load * pack.ro_table(soc) + state.u_th * state.u_th / pack.rth_table(soc)


def default_cell() -> CellParams:
    """Stand-in 18650B-class cell.

    The SoC-dependent curves of the real cell are not available numerically, so
    this ships flat resistances/capacitance and a linear open-circuit curve.
    Override through the scenario file when measured tables exist.
    """
    return CellParams(
        uoc_table=Table((0.0, 0.2, 1.0), (3.075, 3.3, 4.2)),
        ro_table=Table.constant(0.04),
        rth_table=Table.constant(0.03),
        cth_table=Table.constant(1500.0),
        capacity_ah=2.6,
        v_max_cell=4.2,
        v_nominal=3.6,
    )
