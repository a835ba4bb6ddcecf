"""Fixed-step charging simulation: strategy -> setpoint -> phase -> current -> battery.

Each step of length ``dt`` holds the converter current constant.  The strategy
and controller see the measurements at the start of the step (terminal voltage
under the previously applied current).
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import battery as bat
from . import dab
from .control import (
    DEFAULT_CC_GAINS,
    DEFAULT_CV_GAINS,
    Mode,
    PidGains,
    PidState,
    bumpless_state,
    control_error,
    pid_step,
)
from .errors import ConfigError, OvervoltageFault, SimulationFault

log = logging.getLogger(__name__)

COUPLINGS = ("ideal", "pid")


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.01
    t_max: float = 4 * 3600.0
    coupling: str = "ideal"
    initial_soc: float = 0.2
    soc_target: float | None = None
    record_every: int = 100
    soc_ceiling: float = 1.0
    overshoot_tol: float = 0.01

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ConfigError("must be > 0", "dt")
        if not self.t_max > self.dt:
            raise ConfigError("must be > dt", "t_max")
        if self.coupling not in COUPLINGS:
            raise ConfigError(f"must be one of {COUPLINGS}", "coupling")
        if not 0.0 <= self.initial_soc < 1.0:
            raise ConfigError("must lie in [0, 1)", "initial_soc")
        if self.soc_target is not None and not self.initial_soc < self.soc_target <= self.soc_ceiling:
            raise ConfigError("must lie in (initial_soc, soc_ceiling]", "soc_target")
        if self.record_every < 1:
            raise ConfigError("must be >= 1", "record_every")


@dataclass(frozen=True)
class Converter:
    params: dab.DabParams = field(default_factory=dab.DabParams)
    losses: dab.LossParams = field(default_factory=dab.LossParams)


@dataclass(frozen=True)
class ControlConfig:
    cc: PidGains = DEFAULT_CC_GAINS
    cv: PidGains = DEFAULT_CV_GAINS


@dataclass(frozen=True)
class Metrics:
    charge_time: float  # h
    e_batt_loss: float  # kWh
    e_conv_loss: float  # kWh
    e_total_loss: float  # kWh
    e_delivered: float  # kWh
    final_soc: float
    terminated_by: str
    message: str = ""

    @property
    def ok(self):
        return self.terminated_by in ("strategy-done", "soc-target")


TELEMETRY_HEADER = ("t_s", "i_batt_A", "v_term_V", "soc", "phi", "p_batt_loss_W", "p_conv_loss_W", "mode")


@dataclass
class Telemetry:
    """Recorded samples; each row is the state at the start of a step and the
    current applied during it.  ``u_oc``/``u_th`` and the ``*_end`` fields give
    the battery trajectory needed for energy-balance checks."""

    t: np.ndarray
    i_batt: np.ndarray
    v_term: np.ndarray
    soc: np.ndarray
    phi: np.ndarray
    p_batt_loss: np.ndarray
    p_conv_loss: np.ndarray
    mode: list
    u_oc: np.ndarray
    u_th: np.ndarray
    record_every: int
    t_end: float
    soc_end: float
    u_th_end: float

    def __len__(self):
        return len(self.t)

    def rows(self):
        for k in range(len(self.t)):
            yield (
                float(self.t[k]), float(self.i_batt[k]), float(self.v_term[k]), float(self.soc[k]),
                float(self.phi[k]), float(self.p_batt_loss[k]), float(self.p_conv_loss[k]), self.mode[k],
            )


def write_telemetry_csv(path, tel: Telemetry):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(TELEMETRY_HEADER)
        for row in tel.rows():
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def read_telemetry_csv(path):
    """Rows as tuples in the same form as :meth:`Telemetry.rows`."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = tuple(next(reader))
        if header != TELEMETRY_HEADER:
            raise ValueError(f"unexpected telemetry header {header}")
        return [tuple(float(x) for x in row[:-1]) + (row[-1],) for row in reader]


class _LossCache:
    """Converter-loss operating point, refreshed on a >1% move of phase or output voltage."""

    def __init__(self, conv: Converter):
        self.conv = conv
        self.phi = None
        self.v = None
        self.power = 0.0

    def __call__(self, v_out, phi):
        if phi == 0.0:
            return 0.0
        if (
            self.phi is None
            or (phi > 0.0) != (self.phi > 0.0)
            or abs(phi - self.phi) > 0.01 * abs(self.phi)
            or abs(v_out - self.v) > 0.01 * abs(self.v)
        ):
            op = dab.operating_point(self.conv.params, self.conv.losses, v_out, phi)
            self.phi, self.v, self.power = phi, v_out, op.p_total
        return self.power


def run(strategy, pack: bat.PackParams, converter: Converter, control: ControlConfig, cfg: SimConfig):
    """Simulate one charge; returns ``(Metrics, Telemetry)``."""
    p = converter.params
    dt = cfg.dt
    ideal = cfg.coupling == "ideal"
    i_max = dab.max_current(p)
    v_limit = pack.v_max_cell * (1.0 + cfg.overshoot_tol)
    loss_of = _LossCache(converter)
    phi_lo = max(-p.phi_limit, control.cc.out_min)
    phi_hi = min(p.phi_limit, control.cc.out_max)

    state = bat.BatteryState(soc=cfg.initial_soc)
    sst = strategy.initial_state()
    pid = PidState()
    loop_is_cv = None
    phi = 0.0
    i_prev = 0.0

    rec = {k: [] for k in ("t", "i", "v", "soc", "phi", "pb", "pc", "mode", "uoc", "uth")}
    e_batt = e_conv = e_del = 0.0
    terminated_by, message = "t_max", ""
    n_max = int(math.ceil(cfg.t_max / dt - 1e-9))
    k = 0
    t = 0.0
    try:
        for k in range(n_max):
            t = k * dt
            v_meas = bat.terminal_voltage(pack, state, i_prev)
            sp, sst = strategy.next(sst, v_meas, i_prev, t)
            if sst.done:
                terminated_by = "strategy-done"
                break
            mode = sp.mode

            if ideal:
                if mode is Mode.REST:
                    phi = 0.0
                elif mode is Mode.CC:
                    phi = dab.phase_for_current(p, v_meas, sp.ref_value)
                elif mode is Mode.DISCHARGE:
                    phi = dab.phase_for_current(p, v_meas, -sp.ref_value)
                else:
                    uoc, ro = pack.uoc_table(state.soc), pack.ro_table(state.soc)
                    i_cv = (sp.ref_value - uoc - state.u_th) / ro
                    phi = dab.phase_for_current(p, v_meas, min(max(i_cv, 0.0), i_max))
            else:
                is_cv = mode is Mode.CV
                gains = control.cv if is_cv else control.cc
                err = control_error(sp, i_prev, v_meas)
                if loop_is_cv is not None and is_cv != loop_is_cv:
                    pid = bumpless_state(gains, phi, err, dt)
                loop_is_cv = is_cv
                phi, pid = pid_step(gains, pid, err, dt)
                phi = min(max(phi, phi_lo), phi_hi)

            i = dab.avg_output_current(p, v_meas, phi)
            v_term = bat.terminal_voltage(pack, state, i)
            if ideal and v_term > v_limit:
                raise OvervoltageFault(f"terminal voltage {v_term:.3f} V exceeds {v_limit:.3f} V at t={t:.2f} s")
            p_b0 = bat.loss_power(pack, state, i)
            p_c = loss_of(v_term, phi)

            if k % cfg.record_every == 0:
                rec["t"].append(t)
                rec["i"].append(i)
                rec["v"].append(v_term)
                rec["soc"].append(state.soc)
                rec["phi"].append(phi)
                rec["pb"].append(p_b0)
                rec["pc"].append(p_c)
                rec["mode"].append(mode.value)
                rec["uoc"].append(pack.uoc_table(state.soc))
                rec["uth"].append(state.u_th)

            new_state = bat.step(pack, state, i, dt, cfg.soc_ceiling)
            p_b1 = bat.loss_power(pack, new_state, i)
            v_term1 = bat.terminal_voltage(pack, new_state, i)
            e_batt += 0.5 * (p_b0 + p_b1) * dt
            e_conv += p_c * dt
            e_del += 0.5 * (v_term + v_term1) * i * dt
            state = bat.BatteryState(new_state.soc, new_state.u_th, (k + 1) * dt)
            i_prev = i
            t = state.t
            if cfg.soc_target is not None and state.soc >= cfg.soc_target:
                terminated_by = "soc-target"
                break
        else:
            t = n_max * dt
    except SimulationFault as exc:
        terminated_by, message = "fault", f"{exc.kind}: {exc}"
        log.warning("run stopped by fault: %s", message)

    to_kwh = 1.0 / 3.6e6
    metrics = Metrics(
        charge_time=t / 3600.0,
        e_batt_loss=e_batt * to_kwh,
        e_conv_loss=e_conv * to_kwh,
        e_total_loss=e_batt * to_kwh + e_conv * to_kwh,
        e_delivered=e_del * to_kwh,
        final_soc=state.soc,
        terminated_by=terminated_by,
        message=message,
    )
    arr = lambda key: np.asarray(rec[key], dtype=float)  # noqa: E731
    tel = Telemetry(
        t=arr("t"), i_batt=arr("i"), v_term=arr("v"), soc=arr("soc"), phi=arr("phi"),
        p_batt_loss=arr("pb"), p_conv_loss=arr("pc"), mode=rec["mode"], u_oc=arr("uoc"), u_th=arr("uth"),
        record_every=cfg.record_every, t_end=state.t, soc_end=state.soc, u_th_end=state.u_th,
    )
    return metrics, tel


def energy_balance_residual(tel: Telemetry, pack: bat.PackParams) -> float:
    """Relative mismatch between terminal energy and its decomposition.

    ``int(U_L I) = int(U_oc I) + dE_cap + int(P_loss)``, evaluated step by step
    with the polarization voltage averaged over each step.  Requires an
    undecimated telemetry (``record_every == 1``).
    """
    if tel.record_every != 1:
        raise ValueError("energy balance needs undecimated telemetry (record_every=1)")
    if len(tel) == 0:
        return 0.0
    t_edges = np.append(tel.t, tel.t_end)
    h = np.diff(t_edges)
    i = tel.i_batt
    uth0 = tel.u_th
    uth1 = np.append(tel.u_th[1:], tel.u_th_end)
    ro = np.array([pack.ro_table(s) for s in tel.soc])
    rth = np.array([pack.rth_table(s) for s in tel.soc])
    cth = np.array([pack.cth_table(s) for s in tel.soc])

    uth_mean = 0.5 * (uth0 + uth1)
    e_term = np.sum((tel.u_oc + i * ro + uth_mean) * i * h)
    e_oc = np.sum(tel.u_oc * i * h)
    e_loss = np.sum((i * i * ro + 0.5 * (uth0**2 + uth1**2) / rth) * h)
    e_cap = np.sum(0.5 * cth * (uth1**2 - uth0**2))
    if e_term == 0.0:
        return 0.0
    return float(abs(e_term - (e_oc + e_cap + e_loss)) / abs(e_term))


@dataclass(frozen=True)
class ComparisonRow:
    name: str
    metrics: Metrics
    deltas: dict | None  # percent change vs the baseline row; None for the baseline


DELTA_FIELDS = ("charge_time", "e_batt_loss", "e_conv_loss", "e_total_loss")


def percent_delta(value, base):
    return 100.0 * (value - base) / base if base else math.nan


def compare(strategies, pack, converter: Converter, control: ControlConfig, cfg: SimConfig, run_fn=None):
    """Run every strategy from identical initial conditions.

    The first strategy is the baseline; every later row carries percentage
    deltas against it (negative = reduction).
    """
    if not strategies:
        raise ValueError("compare needs at least one strategy")
    run_fn = run_fn or run
    results = [(s.name, run_fn(s, pack, converter, control, cfg)[0]) for s in strategies]
    base = results[0][1]
    rows = []
    for idx, (name, m) in enumerate(results):
        deltas = None
        if idx:
            deltas = {f: percent_delta(getattr(m, f), getattr(base, f)) for f in DELTA_FIELDS}
        rows.append(ComparisonRow(name, m, deltas))
    return rows


SUMMARY_HEADER = ("strategy", "charging_time_h", "battery_loss_kWh", "converter_loss_kWh",
                  "total_loss_kWh", "final_soc", "terminated_by",
                  "d_time_pct", "d_batt_loss_pct", "d_conv_loss_pct", "d_total_loss_pct")


def summary_records(rows, precise=False):
    """String records for the summary; ``precise`` keeps full float precision."""
    num = repr if precise else (lambda v: f"{v:.3f}")
    pct = repr if precise else (lambda v: f"{v:+.2f}")
    out = []
    for r in rows:
        m = r.metrics
        d = r.deltas or {}
        out.append((
            r.name, num(m.charge_time), num(m.e_batt_loss), num(m.e_conv_loss),
            num(m.e_total_loss), repr(m.final_soc) if precise else f"{m.final_soc:.4f}", m.terminated_by,
            *(pct(d[f]) if f in d else "" for f in DELTA_FIELDS),
        ))
    return out


def format_summary(rows) -> str:
    recs = [SUMMARY_HEADER, *summary_records(rows)]
    widths = [max(len(r[c]) for r in recs) for c in range(len(SUMMARY_HEADER))]
    lines = ["  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in recs]
    return "\n".join(lines)


def write_summary_csv(path, rows):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(SUMMARY_HEADER)
        writer.writerows(summary_records(rows, precise=True))
