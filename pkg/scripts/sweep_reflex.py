"""Sweep reflex pulse patterns against the MSCC and CC-CV baselines.

Prints, per pattern, whether the reflex run keeps the qualitative orderings
(time between MSCC and CC-CV, lower battery loss than MSCC, higher converter
and total loss than MSCC).  This is how the shipped reflex default was chosen.

    python3 scripts/sweep_reflex.py --dt 0.05 "0.2,0.5,0.05,0.25,20" "0.85,0.05,0.05,0.05,60"
"""

import argparse
import dataclasses

from evcharge import engine
from evcharge.strategies import MsccReflex, ReflexConfig
from evcharge.scenario import default_scenario, load_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("patterns", nargs="+", help="t_charge,t_rest1,t_discharge,t_rest2,reflex_duration")
    ap.add_argument("--config")
    ap.add_argument("--dt", type=float, default=0.01)
    args = ap.parse_args()

    scen = load_scenario(args.config) if args.config else default_scenario()
    sim = dataclasses.replace(scen.sim, dt=args.dt, record_every=10**9)
    go = lambda s: engine.run(s, scen.pack, scen.converter, scen.control, sim)[0]  # noqa: E731
    cc, ms = go(scen.strategy("cccv")), go(scen.strategy("mscc"))
    print(f"cccv {cc.charge_time:.4f} h  batt {cc.e_batt_loss:.5f}  conv {cc.e_conv_loss:.5f} kWh")
    print(f"mscc {ms.charge_time:.4f} h  batt {ms.e_batt_loss:.5f}  conv {ms.e_conv_loss:.5f} kWh")
    for pat in args.patterns:
        rc = ReflexConfig(*(float(x) for x in pat.split(",")))
        rf = go(MsccReflex(scen.mscc, rc))
        ok = (ms.charge_time < rf.charge_time < cc.charge_time and rf.e_batt_loss < ms.e_batt_loss
              and rf.e_conv_loss > ms.e_conv_loss and rf.e_total_loss > ms.e_total_loss)
        print(f"{'ok' if ok else '--'} {pat:<28} {rf.charge_time:.4f} h  batt {rf.e_batt_loss:.5f} "
              f"({100 * (rf.e_batt_loss / ms.e_batt_loss - 1):+.3f}% vs mscc)  conv {rf.e_conv_loss:.5f}  "
              f"{rf.terminated_by}")


if __name__ == "__main__":
    main()
