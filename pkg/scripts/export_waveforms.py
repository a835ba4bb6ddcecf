"""Export one DAB switching period per phase shift and compare the
waveform-integrated output current with the averaged model."""

import argparse
from pathlib import Path

from evcharge import dab
from evcharge.scenario import default_scenario, load_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--phis", default="0.05,0.10,0.15,0.20,0.25")
    ap.add_argument("--v-out", type=float)
    ap.add_argument("--samples", type=int, default=2000)
    ap.add_argument("--out", default="results/waveforms")
    args = ap.parse_args()

    scen = load_scenario(args.config) if args.config else default_scenario()
    p, lp = scen.converter.params, scen.converter.losses
    v_out = args.v_out or p.n * p.v_in
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    print(f"{'phi':>6} {'avg_A':>9} {'integ_A':>9} {'rel':>9} {'rms_A':>8} {'p_cond_W':>9} {'p_sw_W':>8}")
    for phi in (float(x) for x in args.phis.split(",")):
        w = dab.synth_waveform(p, v_out, phi, args.samples)
        dab.write_waveform_csv(out / f"waveform_phi{phi:.3f}.csv", w)
        avg = dab.avg_output_current(p, v_out, phi)
        integ = dab.integrated_output_current(w, p)
        op = dab.operating_point(p, lp, v_out, phi)
        rel = abs(integ / avg - 1) if avg else 0.0
        print(f"{phi:6.3f} {avg:9.3f} {integ:9.3f} {rel:9.2e} {op.i_rms:8.2f} {op.p_conduction:9.2f} {op.p_switching:8.2f}")


if __name__ == "__main__":
    main()
