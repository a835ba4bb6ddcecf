"""Dual active bridge converter under single-phase-shift modulation.

Two fidelities share the same parameters:

* an averaged power-flow model (output current as a function of phase shift),
  which drives the charging loop, and
* a one-period piecewise-linear waveform of the leakage-inductor current, used
  for validation, waveform export and the MOSFET loss operating point.

The phase shift ``phi`` is a fraction of the full switching period and is
limited to ``[-phi_limit, phi_limit]`` with ``phi_limit <= 0.25``.  Internally
``d = 2*|phi|`` is the shift as a fraction of the half period.

``leakage_l`` is referred to the secondary (battery) side; the waveform is built
on the primary side with the inductance reflected as ``leakage_l / n**2``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import CapabilityFault, ConfigError, PhaseRangeError

_PHI_TOL = 1e-12


@dataclass(frozen=True)
class DabParams:
    v_in: float = 200.0
    n: float = 0.75
    leakage_l: float = 15e-6
    f_s: float = 20e3
    dead_time: float = 0.0
    phi_limit: float = 0.25

    def __post_init__(self):
        for name in ("v_in", "n", "leakage_l", "f_s"):
            if not getattr(self, name) > 0.0:
                raise ConfigError("must be > 0", name)
        if not 0.0 <= self.dead_time < 0.5 / self.f_s:
            raise ConfigError("must satisfy 0 <= dead_time < 1/(2 f_s)", "dead_time")
        if not 0.0 < self.phi_limit <= 0.25:
            raise ConfigError("must lie in (0, 0.25]", "phi_limit")

    @property
    def period(self):
        return 1.0 / self.f_s

    @property
    def current_gain(self):
        """Output current per unit ``d*(1-d)``."""
        return self.n * self.v_in / (2.0 * self.f_s * self.leakage_l)


@dataclass(frozen=True)
class LossParams:
    rds_on_primary: float = 10e-3
    rds_on_secondary: float = 10e-3
    k_reflect: float | None = None  # None -> secondary-to-primary current ratio 1/n
    t_r: float = 50e-9

    def __post_init__(self):
        for name in ("rds_on_primary", "rds_on_secondary", "t_r"):
            if not getattr(self, name) > 0.0:
                raise ConfigError("must be > 0", name)
        if self.k_reflect is not None and not self.k_reflect > 0.0:
            raise ConfigError("must be > 0", "k_reflect")

    def k_for(self, p: DabParams) -> float:
        return self.k_reflect if self.k_reflect is not None else 1.0 / p.n


class WaveformSample(NamedTuple):
    t: float
    v_ab_primary: float
    v_ab_secondary_reflected: float
    v_lk: float
    i_lk: float


def _check_phi(p: DabParams, phi):
    if abs(phi) > p.phi_limit + _PHI_TOL:
        raise PhaseRangeError(f"phase shift {phi} outside [-{p.phi_limit}, {p.phi_limit}]")


def avg_output_current(p: DabParams, v_out: float, phi: float) -> float:
    """Averaged battery-side current for phase shift ``phi``.

    Independent of ``v_out`` in the lossless averaged model; the argument is
    kept so the call mirrors :func:`avg_power`.
    """
    _check_phi(p, phi)
    d = 2.0 * abs(phi)
    i = p.current_gain * d * (1.0 - d)
    return i if phi >= 0.0 else -i


def avg_power(p: DabParams, v_out: float, phi: float) -> float:
    # n*v_in*v_out*d(1-d)/(2 f_s L); written as a product so P == I*v_out exactly
    return avg_output_current(p, v_out, phi) * v_out


def max_current(p: DabParams, v_out: float = 0.0) -> float:
    return avg_output_current(p, v_out, p.phi_limit)


def phase_for_current(p: DabParams, v_out: float, i_target: float) -> float:
    """Invert the averaged model on the branch ``d <= 0.5``."""
    i_max = max_current(p, v_out)
    if abs(i_target) > i_max * (1.0 + 1e-12):
        raise CapabilityFault(i_target, i_max)
    c = abs(i_target) / p.current_gain
    d = 0.5 * (1.0 - math.sqrt(max(0.0, 1.0 - 4.0 * c)))
    phi = min(0.5 * d, p.phi_limit)
    return phi if i_target >= 0.0 else -phi


# ---------------------------------------------------------------- waveform


def _bridge_level(t, edge, half, period):
    """+1 on ``[edge, edge + half)`` modulo the period, else -1."""
    return np.where(np.mod(t - edge, period) < half, 1.0, -1.0)


def _piecewise(p: DabParams, v_out: float, phi: float):
    """Exact piecewise-linear inductor current over one period.

    Returns breakpoint times (``0`` .. ``T_s``), the current at each breakpoint,
    and the primary edge time and secondary edge time.
    """
    _check_phi(p, phi)
    period = p.period
    half = 0.5 * period
    l_p = p.leakage_l / (p.n * p.n)
    v1 = p.v_in
    v2 = v_out / p.n
    # dead time delays each bridge's edges; the bridge holds its previous level
    edge_p = p.dead_time
    edge_s = (phi * period + p.dead_time) % period
    edges = {0.0, period}
    for e in (edge_p, edge_s):
        edges.add(e % period)
        edges.add((e + half) % period)
    times = np.array(sorted(edges))
    mids = 0.5 * (times[:-1] + times[1:])
    v_lk = v1 * _bridge_level(mids, edge_p, half, period) - v2 * _bridge_level(mids, edge_s, half, period)
    g = np.concatenate(([0.0], np.cumsum(v_lk / l_p * np.diff(times))))
    # half-wave antisymmetry i(t + T/2) = -i(t) fixes the integration constant
    g_half = np.interp(half, times, g)
    currents = g - 0.5 * g_half
    return times, currents, edge_p, edge_s


def synth_waveform(p: DabParams, v_out: float, phi: float, samples_per_period: int = 1000):
    """One steady-state period of the SPS waveform, uniformly sampled."""
    if samples_per_period < 8:
        raise ValueError("samples_per_period must be >= 8")
    times, currents, edge_p, edge_s = _piecewise(p, v_out, phi)
    period = p.period
    half = 0.5 * period
    t = np.arange(samples_per_period) * (period / samples_per_period)
    v_p = p.v_in * _bridge_level(t, edge_p, half, period)
    v_s = (v_out / p.n) * _bridge_level(t, edge_s, half, period)
    i_lk = np.interp(t, times, currents)
    return [
        WaveformSample(float(a), float(b), float(c), float(b - c), float(d))
        for a, b, c, d in zip(t, v_p, v_s, i_lk)
    ]


def _periodic_trapezoid(t, y, period):
    t_ext = np.append(t, period)
    y_ext = np.append(y, y[0])
    return float(np.sum(0.5 * (y_ext[1:] + y_ext[:-1]) * np.diff(t_ext)))


def rms_of_waveform(w: Sequence[WaveformSample], period: float | None = None) -> float:
    """RMS of the inductor current with trapezoidal weighting over one period."""
    if not w:
        raise ValueError("empty waveform")
    t = np.array([s.t for s in w])
    i = np.array([s.i_lk for s in w])
    if len(w) == 1:
        return abs(float(i[0]))
    if period is None:
        period = t[-1] + (t[1] - t[0])
    return math.sqrt(_periodic_trapezoid(t, i * i, period) / (period - t[0]))


def integrated_output_current(w: Sequence[WaveformSample], p: DabParams) -> float:
    """Mean battery-side current rectified by the secondary bridge.

    Numerical charge-area integration of a sampled waveform; it is the
    counterpart of the averaged model and is used to cross-check it.
    """
    t = np.array([s.t for s in w])
    i_sec = np.array([s.i_lk * math.copysign(1.0, s.v_ab_secondary_reflected) for s in w]) / p.n
    return _periodic_trapezoid(t, i_sec, p.period) / p.period


# ---------------------------------------------------------------- losses


def conduction_loss(lp: LossParams, i_rms: float, k_reflect: float | None = None) -> float:
    if i_rms < 0.0:
        raise ValueError("i_rms must be >= 0")
    k = lp.k_reflect if k_reflect is None else k_reflect
    if k is None:
        raise ValueError("k_reflect not set; pass it or use LossParams.k_for")
    return 2.0 * (lp.rds_on_primary + k * k * lp.rds_on_secondary) * i_rms * i_rms


def transition_loss(lp: LossParams, f_s: float, v_ds: float, i_d: float) -> float:
    """Loss of a single hard-switched transition (turn-on or turn-off)."""
    return v_ds * i_d * lp.t_r * f_s / 6.0


def switching_loss(lp: LossParams, f_s: float, v_ds: float, i_d: float) -> float:
    """Turn-on plus turn-off loss of one device per period."""
    if v_ds < 0.0 or i_d < 0.0 or f_s < 0.0:
        raise ValueError("switching loss inputs must be >= 0")
    return 2.0 * transition_loss(lp, f_s, v_ds, i_d)


@dataclass(frozen=True)
class OperatingPoint:
    v_out: float
    phi: float
    i_rms: float  # primary-side inductor RMS current
    i_sw_primary: float
    i_sw_secondary: float
    p_conduction: float
    p_switching: float

    @property
    def p_total(self):
        return self.p_conduction + self.p_switching


def operating_point(p: DabParams, lp: LossParams, v_out: float, phi: float) -> OperatingPoint:
    """MOSFET losses for steady operation at ``(v_out, phi)``.

    RMS is exact over the piecewise-linear current.  Switching currents are the
    inductor current at each bridge's edge; each bridge has four devices that
    each switch on and off once per period.
    """
    times, currents, edge_p, edge_s = _piecewise(p, v_out, phi)
    h = np.diff(times)
    a, b = currents[:-1], currents[1:]
    i_rms = math.sqrt(float(np.sum(h * (a * a + a * b + b * b) / 3.0)) / p.period)
    i_sw_p = abs(float(np.interp(edge_p, times, currents)))
    i_sw_s = abs(float(np.interp(edge_s, times, currents))) / p.n
    p_cond = conduction_loss(lp, i_rms, lp.k_for(p))
    p_sw = 4.0 * switching_loss(lp, p.f_s, p.v_in, i_sw_p) + 4.0 * switching_loss(lp, p.f_s, v_out, i_sw_s)
    return OperatingPoint(v_out, phi, i_rms, i_sw_p, i_sw_s, p_cond, p_sw)


WAVEFORM_HEADER = ("t_s", "v_p", "v_s_reflected", "v_lk", "i_lk")


def write_waveform_csv(path, w: Sequence[WaveformSample]):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(WAVEFORM_HEADER)
        for s in w:
            writer.writerow([repr(x) for x in s])


def read_waveform_csv(path):
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = tuple(next(reader))
        if header != WAVEFORM_HEADER:
            raise ValueError(f"unexpected waveform header {header}")
        return [WaveformSample(*(float(x) for x in row)) for row in reader]
