"""Run the three charging strategies on the default scenario and print the
comparison table together with the ordering checks.

    python3 scripts/compare_strategies.py --out results/compare
"""

import argparse
import dataclasses
from pathlib import Path

from evcharge import engine
from evcharge.scenario import STRATEGY_NAMES, default_scenario, load_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--dt", type=float)
    ap.add_argument("--out", default="results/compare")
    args = ap.parse_args()

    scen = load_scenario(args.config) if args.config else default_scenario()
    sim = scen.sim if args.dt is None else dataclasses.replace(scen.sim, dt=args.dt)
    rows = engine.compare([scen.strategy(n) for n in STRATEGY_NAMES], scen.pack, scen.converter, scen.control, sim)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    engine.write_summary_csv(out / "summary.csv", rows)
    print(engine.format_summary(rows))

    cc, ms, rf = (r.metrics for r in rows)
    checks = [
        ("time     MSCC < reflex < CC-CV", ms.charge_time < rf.charge_time < cc.charge_time),
        ("battery  reflex < MSCC < CC-CV", rf.e_batt_loss < ms.e_batt_loss < cc.e_batt_loss),
        ("converter CC-CV < MSCC < reflex", cc.e_conv_loss < ms.e_conv_loss < rf.e_conv_loss),
        ("total    CC-CV < MSCC < reflex", cc.e_total_loss < ms.e_total_loss < rf.e_total_loss),
    ]
    print()
    for label, ok in checks:
        print(f"{'ok ' if ok else 'NO '} {label}")
    print(f"MSCC time reduction vs CC-CV: {1 - ms.charge_time / cc.charge_time:.2%}")


if __name__ == "__main__":
    main()
