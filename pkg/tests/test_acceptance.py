"""Acceptance criteria, one test per criterion.

Each test prints a single ``[PASS]``/``[FAIL]`` line with the measured numbers
and the tolerance.  Run alone with::

    pytest tests/test_acceptance.py -v -s

The full-length charging runs make this module take a few minutes.
"""

import dataclasses
import random
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from evcharge import battery as bat
from evcharge import dab, engine
from evcharge import strategies as st
from evcharge.scenario import STRATEGY_NAMES, default_scenario

VERDICTS = []
HERE = Path(__file__).resolve().parent


def verdict(num, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {title} :: {detail}"
    VERDICTS.append(line)
    print(line)
    assert ok, line


SCEN = default_scenario()


@pytest.fixture(scope="module")
def default_runs():
    """Every default strategy at dt = 10 ms and 5 ms with undecimated telemetry."""
    out = {}
    for dt in (0.01, 0.005):
        cfg = dataclasses.replace(SCEN.sim, dt=dt, record_every=1)
        for name in STRATEGY_NAMES:
            out[name, dt] = engine.run(SCEN.strategy(name), SCEN.pack, SCEN.converter, SCEN.control, cfg)
    return out


def test_criterion_1_dab_averaged_vs_waveform():
    t0 = time.perf_counter()
    p = dab.DabParams(v_in=200.0, n=0.75, leakage_l=15e-6, f_s=20e3, dead_time=0.0)
    worst = 0.0
    for phi in (0.05, 0.10, 0.15, 0.20, 0.25):
        w = dab.synth_waveform(p, 150.0, phi, 2000)
        avg = dab.avg_output_current(p, 150.0, phi)
        worst = max(worst, abs(dab.integrated_output_current(w, p) / avg - 1.0))
    elapsed = time.perf_counter() - t0
    verdict(1, "DAB averaged/waveform equivalence", worst <= 0.01 and elapsed < 1.0,
            f"worst rel diff {worst:.2e} (tol 1e-2), {elapsed:.2f} s (< 1 s)")


def test_criterion_2_optimizer_oracle():
    t0 = time.perf_counter()
    rng = random.Random(20240611)
    eq = st.EquivBatteryParams(c1=7800.0, r1=0.07, v0=113.4, v_t=147.0)
    worst_cells, worst_grad = 0.0, 0.0
    for k in range(10):
        n = (3, 5)[k % 2]
        i_first = rng.uniform(20.0, 100.0)
        i_last = i_first / rng.uniform(2.0, 32.0)
        closed = st.stage_currents(i_first, i_last, n)
        grid = st.brute_force_grid(i_first, i_last, 500)
        cell = grid[1] / grid[0] - 1.0
        brute = st.brute_force_optimal_mid(i_first, i_last, n, eq, 500)
        for got, want in zip(brute, closed[1:-1]):
            worst_cells = max(worst_cells, abs(got / want - 1.0) / cell)
        i2 = closed[1]
        h = 1e-4 * i2

        def total(x):
            return st.predict_stage_times([closed[0], x, *closed[2:]], eq)[1]

        grad = (total(i2 + h) - total(i2 - h)) / (2.0 * h)
        worst_grad = max(worst_grad, abs(grad) / (total(i2) / i2))
    elapsed = time.perf_counter() - t0
    ok = worst_cells <= 1.0 and worst_grad <= 1e-6 and elapsed < 10.0
    verdict(2, "optimizer oracle agreement", ok,
            f"worst {worst_cells:.2f} grid cells (<= 1), |dT/dI2|*I2/T {worst_grad:.1e} (<= 1e-6), "
            f"{elapsed:.1f} s (< 10 s)")


def test_criterion_3_stage_time_predictor():
    t0 = time.perf_counter()
    T = bat.Table.constant
    cell = bat.CellParams(
        uoc_table=bat.Table((0.0, 1.0), (3.0, 4.2)), ro_table=T(0.04), rth_table=T(0.03),
        cth_table=T(0.5), capacity_ah=2.6, v_max_cell=4.2, v_nominal=3.6,
    )
    pack = bat.pack_from_cell(cell, bat.PackConfig(35, 35))
    soc0 = 0.2
    slope = (pack.uoc_table(1.0) - pack.uoc_table(0.0))
    eq = st.EquivBatteryParams(
        c1=3600.0 * pack.capacity_ah / slope, r1=pack.ro_table(0.0) + pack.rth_table(0.0),
        v0=pack.uoc_table(soc0), v_t=147.0,
    )
    mcfg = st.MsccConfig(i_first=60.97, i_last=13.65, v_threshold=147.0, n_stages=5)
    predicted, _ = st.predict_stage_times(mcfg.currents, eq)
    cfg = engine.SimConfig(dt=0.01, initial_soc=soc0, record_every=1, coupling="ideal")
    m, tel = engine.run(st.Mscc(mcfg), pack, SCEN.converter, SCEN.control, cfg)
    edges = np.nonzero(np.diff(tel.i_batt) != 0.0)[0] + 1
    bounds = [0.0, *tel.t[edges], tel.t_end]
    simulated = np.diff(bounds)
    elapsed = time.perf_counter() - t0
    rel = [abs(s / p - 1.0) for s, p in zip(simulated, predicted)]
    ok = m.terminated_by == "strategy-done" and len(simulated) == 5 and max(rel) <= 0.02 and elapsed < 30.0
    verdict(3, "stage-time predictor vs simulation", ok,
            "stages sim/pred [s] " + ", ".join(f"{s:.1f}/{p:.1f}" for s, p in zip(simulated, predicted))
            + f"; worst {max(rel):.2%} (<= 2%), {elapsed:.1f} s (< 30 s)")


def test_criterion_4_energy_balance(default_runs):
    parts, ok = [], True
    for name in STRATEGY_NAMES:
        r10 = engine.energy_balance_residual(default_runs[name, 0.01][1], SCEN.pack)
        r05 = engine.energy_balance_residual(default_runs[name, 0.005][1], SCEN.pack)
        ok &= r10 <= 0.005 and r05 < r10
        parts.append(f"{name} {r10:.1e}->{r05:.1e}")
    verdict(4, "energy balance", ok, "; ".join(parts) + " (<= 0.5%, decreasing with dt/2)")


def test_criterion_5_coulomb_counting():
    dt = 0.01
    cfg = engine.SimConfig(dt=dt, initial_soc=0.2, soc_target=0.7, record_every=10**9)
    m, _ = engine.run(st.ConstantCurrent(45.5), SCEN.pack, SCEN.converter, SCEN.control, cfg)
    err = abs(m.charge_time * 3600.0 - 3600.0)
    ok = m.terminated_by == "soc-target" and err <= dt + 1e-9
    verdict(5, "coulomb counting", ok, f"SoC 0.2->0.7 at 45.5 A in {m.charge_time:.6f} h (|err| {err:.3f} s <= {dt} s)")


def test_criterion_6_strategy_orderings(default_runs):
    m = {n: default_runs[n, 0.01][0] for n in STRATEGY_NAMES}
    cc, ms, rf = m["cccv"], m["mscc"], m["mscc-reflex"]
    reduction = 1.0 - ms.charge_time / cc.charge_time
    checks = {
        "time MSCC<reflex<CC-CV": ms.charge_time < rf.charge_time < cc.charge_time,
        "batt loss reflex<MSCC<CC-CV": rf.e_batt_loss < ms.e_batt_loss < cc.e_batt_loss,
        "conv loss CC-CV<MSCC<reflex": cc.e_conv_loss < ms.e_conv_loss < rf.e_conv_loss,
        "total loss CC-CV<MSCC<reflex": cc.e_total_loss < ms.e_total_loss < rf.e_total_loss,
        "MSCC time reduction in [5%, 25%]": 0.05 <= reduction <= 0.25,
        "all runs complete": all(x.terminated_by == "strategy-done" for x in m.values()),
    }
    failed = [k for k, v in checks.items() if not v]
    detail = (
        f"time h {cc.charge_time:.4f}/{ms.charge_time:.4f}/{rf.charge_time:.4f}; "
        f"batt kWh {cc.e_batt_loss:.5f}/{ms.e_batt_loss:.5f}/{rf.e_batt_loss:.5f}; "
        f"conv kWh {cc.e_conv_loss:.5f}/{ms.e_conv_loss:.5f}/{rf.e_conv_loss:.5f}; "
        f"total kWh {cc.e_total_loss:.5f}/{ms.e_total_loss:.5f}/{rf.e_total_loss:.5f} "
        f"(CC-CV/MSCC/reflex); MSCC reduction {reduction:.2%}"
    )
    if failed:
        detail += "; failed: " + ", ".join(failed)
    verdict(6, "strategy comparison orderings", not failed, detail)


def test_criterion_7_cccv_envelope(default_runs):
    m, tel = default_runs["cccv", 0.01]
    cfg = SCEN.cccv
    v_peak = float(tel.v_term.max())
    cv = tel.i_batt[np.array(tel.mode) == "cv"]
    rises = np.diff(cv)
    ok = (
        v_peak <= 147.0 * 1.01
        and len(cv) > 0 and np.all(rises <= 0.0)
        and m.terminated_by == "strategy-done" and tel.i_batt[-1] <= cfg.i_cutoff
    )
    verdict(7, "CC-CV envelope", ok,
            f"peak v_term {v_peak:.4f} V (<= {147.0 * 1.01:.2f}); CV samples {len(cv)}, "
            f"max step rise {rises.max() if len(rises) else 0.0:.2e} A (<= 0); "
            f"final current {tel.i_batt[-1]:.4f} A (<= {cfg.i_cutoff})")


def test_criterion_8_closed_loop_pid(default_runs):
    dt = SCEN.sim.dt
    cfg = dataclasses.replace(SCEN.sim, coupling="pid", record_every=1, t_max=10.0)
    _, tel = engine.run(st.ConstantCurrent(30.0), SCEN.pack, SCEN.converter, SCEN.control, cfg)
    outside = np.nonzero(np.abs(tel.i_batt - 30.0) > 0.01 * 30.0)[0]
    settle = float(tel.t[outside[-1]] + dt) if len(outside) else 0.0
    sse = abs(float(np.mean(tel.i_batt[-100:])) - 30.0) / 30.0

    pid_cfg = dataclasses.replace(SCEN.sim, coupling="pid")
    m_pid, _ = engine.run(SCEN.strategy("cccv"), SCEN.pack, SCEN.converter, SCEN.control, pid_cfg)
    m_ideal = default_runs["cccv", 0.01][0]
    d_time = abs(m_pid.charge_time / m_ideal.charge_time - 1.0)
    ok = settle <= 2.0 and sse <= 0.005 and d_time < 0.02 and m_pid.terminated_by == "strategy-done"
    verdict(8, "closed-loop PID", ok,
            f"30 A step settles (1% band) at {settle:.2f} s (<= 2 s), steady-state error {sse:.1e} (<= 5e-3); "
            f"CC-CV charge_time pid {m_pid.charge_time:.4f} h vs ideal {m_ideal.charge_time:.4f} h "
            f"({d_time:.3%} < 2%)")


def test_criterion_9_property_suites(default_runs):
    suites = ["test_battery.py", "test_dab.py", "test_control.py", "test_strategies.py",
              "test_engine.py", "test_scenario_cli.py"]
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *suites],
        cwd=HERE, capture_output=True, text=True,
    )
    tail = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr.strip()[-200:]
    # dt-refinement on the default scenarios needs full-length runs, so it lives here
    worst_t = worst_e = 0.0
    for name in STRATEGY_NAMES:
        a, b = default_runs[name, 0.01][0], default_runs[name, 0.005][0]
        worst_t = max(worst_t, abs(b.charge_time / a.charge_time - 1.0))
        for f in ("e_batt_loss", "e_conv_loss", "e_total_loss", "e_delivered"):
            worst_e = max(worst_e, abs(getattr(b, f) / getattr(a, f) - 1.0))
    ok = proc.returncode == 0 and worst_t < 0.001 and worst_e < 0.002
    verdict(9, "property suites", ok,
            f"{tail}; dt-refinement time {worst_t:.1e} (< 1e-3), energies {worst_e:.1e} (< 2e-3)")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
