"""Command-line front end: ``run``, ``compare``, ``optimize`` and ``waveform``.

Exit codes: 0 success, 2 usage or configuration error, 3 simulation fault.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import dab, engine
from .errors import ConfigError, PhaseRangeError
from .scenario import STRATEGY_NAMES, Scenario, default_scenario, load_scenario
from .strategies import (
    brute_force_grid,
    brute_force_optimal_mid,
    equivalent_from_pack,
    predict_stage_times,
    stage_currents,
)

EXIT_OK, EXIT_USAGE, EXIT_FAULT = 0, 2, 3


def _file_stem(name):
    return name.replace("-", "_")


def _scenario(args) -> Scenario:
    scen = load_scenario(args.config) if args.config else default_scenario()
    overrides = {}
    if getattr(args, "dt", None) is not None:
        overrides["dt"] = args.dt
    if getattr(args, "coupling", None) is not None:
        overrides["coupling"] = args.coupling
    if overrides:
        scen = dataclasses.replace(scen, sim=dataclasses.replace(scen.sim, **overrides))
    return scen


def cmd_run(args) -> int:
    scen = _scenario(args)
    strategy = scen.strategy(args.strategy)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    metrics, tel = engine.run(strategy, scen.pack, scen.converter, scen.control, scen.sim)
    stem = _file_stem(strategy.name)
    engine.write_telemetry_csv(out / f"{stem}_telemetry.csv", tel)
    rows = [engine.ComparisonRow(strategy.name, metrics, None)]
    engine.write_summary_csv(out / f"{stem}_metrics.csv", rows)
    print(engine.format_summary(rows))
    if not metrics.ok:
        print(f"error: simulation fault: {metrics.message}", file=sys.stderr)
        return EXIT_FAULT
    return EXIT_OK


def cmd_compare(args) -> int:
    names = [n.strip() for n in args.strategies.split(",") if n.strip()]
    if not names:
        raise ConfigError("no strategies given", "--strategies")
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate strategy names in {names}", "--strategies")
    scen = _scenario(args)
    strategies = [scen.strategy(n) for n in names]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = engine.compare(strategies, scen.pack, scen.converter, scen.control, scen.sim)
    engine.write_summary_csv(out / "summary.csv", rows)
    text = engine.format_summary(rows)
    (out / "summary.txt").write_text(text + "\n")
    print(text)
    faults = [r for r in rows if not r.metrics.ok]
    for r in faults:
        print(f"error: {r.name}: simulation fault: {r.metrics.message}", file=sys.stderr)
    return EXIT_FAULT if faults else EXIT_OK


def cmd_optimize(args) -> int:
    scen = _scenario(args)
    m = scen.mscc
    if args.n_stages is not None:
        m = dataclasses.replace(m, n_stages=args.n_stages)
    eq = equivalent_from_pack(scen.pack, scen.sim.initial_soc, m.v_threshold)
    currents = stage_currents(m.i_first, m.i_last, m.n_stages)
    times, total = predict_stage_times(currents, eq)
    print(f"equivalent battery: c1={eq.c1:.1f} F  r1={eq.r1:.4f} ohm  v0={eq.v0:.3f} V  v_t={eq.v_t:.3f} V")
    print(f"{'stage':>5}  {'current_A':>10}  {'predicted_s':>12}")
    for k, (i, t) in enumerate(zip(currents, times), 1):
        print(f"{k:>5}  {i:>10.4f}  {t:>12.1f}")
    print(f"total predicted time: {total:.1f} s ({total / 3600:.4f} h)")
    middles = currents[1:-1]
    if not middles:
        print("no interior stages; nothing to optimise")
        return EXIT_OK
    brute = brute_force_optimal_mid(m.i_first, m.i_last, m.n_stages, eq, args.grid_points)
    grid = brute_force_grid(m.i_first, m.i_last, args.grid_points)
    cell = float(grid[1] / grid[0] - 1.0)
    _, total_brute = predict_stage_times([m.i_first, *brute, m.i_last], eq)
    print(f"{'middle':>6}  {'closed_form_A':>13}  {'brute_force_A':>13}  {'rel_diff':>9}")
    worst = 0.0
    for k, (a, b) in enumerate(zip(middles, brute), 2):
        rel = abs(a - b) / a
        worst = max(worst, rel)
        print(f"{k:>6}  {a:>13.4f}  {b:>13.4f}  {rel:>9.2e}")
    print(f"grid cell (relative): {cell:.2e}; worst disagreement {worst / cell:.2f} cells")
    print(f"total time closed-form {total:.3f} s vs brute-force {total_brute:.3f} s")
    return EXIT_OK


def cmd_waveform(args) -> int:
    scen = _scenario(args)
    p = scen.converter.params
    v_out = args.v_out if args.v_out is not None else p.n * p.v_in
    try:
        w = dab.synth_waveform(p, v_out, args.phi, args.samples)
    except PhaseRangeError as exc:
        raise ConfigError(str(exc), "--phi") from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dab.write_waveform_csv(out / "waveform.csv", w)
    averaged = dab.avg_output_current(p, v_out, args.phi)
    integrated = dab.integrated_output_current(w, p)
    rel = abs(integrated - averaged) / abs(averaged) if averaged else abs(integrated)
    print(f"phi={args.phi}  v_in={p.v_in} V  v_out={v_out} V")
    print(f"averaged output current   {averaged:.4f} A")
    print(f"integrated from waveform  {integrated:.4f} A  (rel diff {rel:.2e})")
    print(f"inductor RMS current      {dab.rms_of_waveform(w, p.period):.4f} A")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="evcharge", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, sim=True):
        p.add_argument("--config", help="scenario YAML file (defaults if omitted)")
        if sim:
            p.add_argument("--dt", type=float, help="override simulation step [s]")
            p.add_argument("--coupling", choices=("ideal", "pid"), help="override converter coupling")

    p = sub.add_parser("run", help="simulate one strategy")
    common(p)
    p.add_argument("--strategy", required=True, choices=STRATEGY_NAMES)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run several strategies from identical initial conditions")
    common(p)
    p.add_argument("--strategies", required=True, help="comma-separated, first is the baseline")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("optimize", help="closed-form vs brute-force MSCC stage currents")
    common(p, sim=False)
    p.add_argument("--n-stages", type=int)
    p.add_argument("--grid-points", type=int, default=500)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("waveform", help="export one switching period of the DAB waveform")
    common(p, sim=False)
    p.add_argument("--phi", type=float, required=True, help="phase shift as a fraction of the period")
    p.add_argument("--v-out", type=float, help="battery-side voltage (default n*v_in)")
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_waveform)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
