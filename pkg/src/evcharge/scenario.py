"""Scenario files: one YAML document with nested sections.

Every key is optional; omitted values take the documented defaults, and
strategy currents/voltages default to C-rate and per-cell values scaled to the
configured pack.  Unknown keys are rejected.  Units are SI except
``capacity_ah`` (ampere-hours).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from . import battery as bat
from . import dab
from .control import DEFAULT_CC_GAINS, DEFAULT_CV_GAINS, PidGains
from .engine import ControlConfig, Converter, SimConfig
from .errors import ConfigError
from .strategies import CcCv, CcCvConfig, Mscc, MsccConfig, MsccReflex, ReflexConfig

STRATEGY_NAMES = ("cccv", "mscc", "mscc-reflex")

# Shipped strategy defaults, as C-rates of the pack capacity.
CCCV_I_CC_C = 0.66
CCCV_I_CUTOFF_C = 0.05
MSCC_I_FIRST_C = 0.67
MSCC_I_LAST_C = 0.15


@dataclass(frozen=True)
class Scenario:
    cell: bat.CellParams
    pack_config: bat.PackConfig
    converter: Converter
    control: ControlConfig
    cccv: CcCvConfig
    mscc: MsccConfig
    reflex: ReflexConfig
    sim: SimConfig
    source: str | None = field(default=None, compare=False)

    @property
    def pack(self) -> bat.PackParams:
        return bat.pack_from_cell(self.cell, self.pack_config)

    def strategy(self, name):
        if name == "cccv":
            return CcCv(self.cccv)
        if name == "mscc":
            return Mscc(self.mscc)
        if name == "mscc-reflex":
            return MsccReflex(self.mscc, self.reflex)
        raise ConfigError(f"unknown strategy {name!r}; choose from {', '.join(STRATEGY_NAMES)}", "strategy")


def _section(data, path, allowed):
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("expected a mapping", path)
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown}; allowed {sorted(allowed)}", path)
    return data


def _number(value):
    # PyYAML reads exponent forms without a dot ("15e-6") as strings
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return value
    return value


def _build(cls, data, path, **extra):
    names = [f.name for f in dataclasses.fields(cls)]
    data = {k: _number(v) for k, v in _section(data, path, names).items()}
    kwargs = {**extra, **data}
    try:
        return cls(**kwargs)
    except ConfigError as exc:
        raise ConfigError(str(exc).split(": ", 1)[-1], f"{path}.{exc.field}" if exc.field else path) from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), path) from None


def _table(raw, path, default):
    if raw is None:
        return default
    if isinstance(raw, (int, float)):
        return bat.Table.constant(float(raw))
    try:
        return bat.Table.from_pairs((float(_number(s)), float(_number(v))) for s, v in raw)
    except ConfigError as exc:
        raise ConfigError(str(exc), path) from None
    except (TypeError, ValueError):
        raise ConfigError("expected a number or a list of [soc, value] pairs", path) from None


_CELL_KEYS = ("uoc_table", "ro_table", "rth_table", "cth_table", "capacity_ah", "v_max_cell", "v_nominal")


def _cell(data):
    data = _section(data, "battery.cell", _CELL_KEYS)
    base = bat.default_cell()
    kwargs = {}
    for key in _CELL_KEYS:
        if key.endswith("_table"):
            kwargs[key] = _table(data.get(key), f"battery.cell.{key}", getattr(base, key))
        else:
            try:
                kwargs[key] = float(_number(data.get(key, getattr(base, key))))
            except (TypeError, ValueError):
                raise ConfigError("expected a number", f"battery.cell.{key}") from None
    try:
        return bat.CellParams(**kwargs)
    except ConfigError as exc:
        # capacity is reported under the top battery section as well as the cell
        field_name = "battery.capacity_ah" if exc.field == "capacity_ah" else f"battery.cell.{exc.field}"
        raise ConfigError(str(exc).split(": ", 1)[-1], field_name) from None


def _amps(x):
    # C-rate products like 0.67 * 91 carry float noise; keep them readable
    return round(x, 9)


def from_dict(data: dict | None, source=None) -> Scenario:
    data = _section(data or {}, "<root>", ("battery", "converter", "control", "strategies", "sim"))

    batt = _section(data.get("battery"), "battery", ("cell", "pack", "capacity_ah"))
    cell_data = dict(batt.get("cell") or {})
    if "capacity_ah" in batt:
        cell_data.setdefault("capacity_ah", batt["capacity_ah"])
    cell = _cell(cell_data)
    pack_cfg = _build(bat.PackConfig, batt.get("pack"), "battery.pack")
    pack = bat.pack_from_cell(cell, pack_cfg)
    cap = pack.capacity_ah

    conv = _section(data.get("converter"), "converter", ("dab", "losses"))
    converter = Converter(
        params=_build(dab.DabParams, conv.get("dab"), "converter.dab"),
        losses=_build(dab.LossParams, conv.get("losses"), "converter.losses"),
    )

    ctl = _section(data.get("control"), "control", ("cc", "cv"))
    control = ControlConfig(
        cc=_build(PidGains, ctl.get("cc"), "control.cc", **dataclasses.asdict(DEFAULT_CC_GAINS)),
        cv=_build(PidGains, ctl.get("cv"), "control.cv", **dataclasses.asdict(DEFAULT_CV_GAINS)),
    )

    strat = _section(data.get("strategies"), "strategies", ("cccv", "mscc", "reflex"))
    v_max = pack.v_max_cell
    cccv = _build(CcCvConfig, strat.get("cccv"), "strategies.cccv",
                  i_cc=_amps(CCCV_I_CC_C * cap), v_max=v_max, i_cutoff=_amps(CCCV_I_CUTOFF_C * cap))
    mscc = _build(MsccConfig, strat.get("mscc"), "strategies.mscc",
                  i_first=_amps(MSCC_I_FIRST_C * cap), i_last=_amps(MSCC_I_LAST_C * cap), v_threshold=v_max)
    reflex = _build(ReflexConfig, strat.get("reflex"), "strategies.reflex")

    sim = _build(SimConfig, data.get("sim"), "sim")
    return Scenario(cell, pack_cfg, converter, control, cccv, mscc, reflex, sim, source)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario: {exc}", str(path)) from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" (line {mark.line + 1}, column {mark.column + 1})" if mark else ""
        raise ConfigError(f"parse error{where}: {getattr(exc, 'problem', exc)}", str(path)) from None
    return from_dict(data, source=str(path))


def default_scenario() -> Scenario:
    return from_dict({})
