"""Acceptance suite: thirteen numbered criteria, one PASS/FAIL line each.

Heavy artifacts (constant estimates, batches of blow-up runs) are shared
through module-scoped fixtures so each criterion stays well under a minute.
"""

import json

import numpy as np
import pytest

from blowuplab.analysis import classify_initial, invariance_audit, \
    lower_bound_T, upper_bound_T
from blowuplab.constants import (estimate_B1, estimate_S1, estimate_S2,
                                 estimate_constants, well_depth_d)
from blowuplab.dynamics import (IntegratorConfig, concavity_monitor,
                                levine_bound, simulate)
from blowuplab.fields import make_constrained
from blowuplab.functionals import energy_J, identity_residuals, nehari_K, \
    nehari_scale
from blowuplab.harness import RunConfig, run_experiment
from blowuplab.initdata import construct_energy_level

from conftest import make_ops, random_constrained


@pytest.fixture
def announce(capsys):
    def _announce(num, name, ok, detail=""):
        with capsys.disabled():
            print(f"CRITERION {num:2d} [{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        assert ok, f"criterion {num} ({name}): {detail}"
    return _announce


RUN_CFG = IntegratorConfig(dt0=1e-4, theta_blowup=1e6, horizon=10.0)


def scaled_into_B1(ops, consts, w, p=4.0):
    """Scale w past its Nehari point until the energy drops below the well
    depth; K < 0 holds for every scale beyond the Nehari point."""
    u = make_constrained(w, ops.mesh)
    lam = 1.05 * nehari_scale(u, ops, p)
    for _ in range(200):
        v = make_constrained(lam * w, ops.mesh)
        if energy_J(v, ops, p) < consts.d - 1e-9 and nehari_K(v, ops, p) < 0:
            return v
        lam *= 1.1
    raise AssertionError("could not scale the sample into the low-energy set")


def scaled_into_B2(ops, consts, w, p=4.0):
    u = make_constrained(w, ops.mesh)
    lam = 1.05 * nehari_scale(u, ops, p)
    c2 = consts.b2_threshold_coeff()
    for _ in range(200):
        v = make_constrained(lam * w, ops.mesh)
        q = ops.l2_norm_sq(v.coefficients) + ops.trace_norm_sq(v.coefficients)
        if energy_J(v, ops, p) < c2 * q - 1e-9:
            return v
        lam *= 1.1
    raise AssertionError("could not scale the sample into the high-energy set")


@pytest.fixture(scope="module")
def b1_runs(ops100, consts100):
    rng = np.random.default_rng(20240801)
    runs = []
    for _ in range(50):
        u0 = scaled_into_B1(ops100, consts100, random_constrained(ops100, rng))
        traj, verdict = simulate(u0, RUN_CFG, ops100, 4.0)
        runs.append((u0, traj, verdict))
    return runs


@pytest.fixture(scope="module")
def b2_runs(ops100, consts100):
    rng = np.random.default_rng(20240802)
    runs = []
    for _ in range(20):
        u0 = scaled_into_B2(ops100, consts100, random_constrained(ops100, rng))
        traj, verdict = simulate(u0, RUN_CFG, ops100, 4.0)
        runs.append((u0, traj, verdict))
    return runs


@pytest.fixture(scope="module")
def p3_runs():
    ops = make_ops(N=100, p=3.0)
    consts = estimate_constants(ops, with_gn=True)
    rng = np.random.default_rng(20240803)
    runs = []
    for _ in range(5):
        u0 = scaled_into_B1(ops, consts, random_constrained(ops, rng), p=3.0)
        traj, verdict = simulate(u0, RUN_CFG, ops, 3.0)
        runs.append((u0, traj, verdict))
    return ops, consts, runs


def test_criterion_01_eigenvalue_constants(ops100, ops200, announce):
    exact_s2 = 4.0 / np.pi ** 2
    vals = {}
    for label, ops in (("100", ops100), ("200", ops200)):
        vals[label] = (estimate_S1(ops), estimate_S2(ops))
    e_s1 = [abs(vals[k][0] - 1.0) for k in ("100", "200")]
    e_s2 = [abs(vals[k][1] - exact_s2) for k in ("100", "200")]
    ok = abs(vals["200"][1] - exact_s2) <= 1e-3 * exact_s2
    ok &= abs(vals["200"][0] - 1.0) <= 1e-3
    details = []
    for name, errs in (("S1", e_s1), ("S2", e_s2)):
        if max(errs) <= 1e-9:       # already at round-off on both meshes
            details.append(f"{name} exact to {max(errs):.1e}")
            continue
        rate = np.log2(errs[0] / errs[1])
        ok &= 1.7 <= rate <= 2.3
        details.append(f"{name} rate {rate:.2f}")
    announce(1, "S1/S2 oracles with refinement rate", ok,
             f"S1={vals['200'][0]:.9f}, S2={vals['200'][1]:.9f}, " + ", ".join(details))


def test_criterion_02_embedding_constant(ops200, announce):
    ops_small_p = make_ops(N=200, p=2.01)
    b1_small = estimate_B1(ops_small_p, 2.01)
    ref = 2.0 / np.pi
    ok = abs(b1_small - ref) <= 0.01 * ref
    b1 = estimate_B1(ops200, 4.0)
    certified = 0.2 ** 0.25
    ok &= b1 >= certified - 1e-9
    announce(2, "B1 continuity and certified bound", ok,
             f"B1(2.01)={b1_small:.6f} vs 2/pi={ref:.6f}; B1(4)={b1:.6f} >= {certified:.6f}")


def test_criterion_03_well_depth_formula(announce):
    rng = np.random.default_rng(20240804)
    worst = 0.0
    for _ in range(20):
        b1 = float(rng.uniform(0.2, 3.0))
        p = float(rng.uniform(2.1, 6.0))
        expected = (0.5 - 1.0 / p) * b1 ** (-2.0 * p / (p - 2.0))
        worst = max(worst, abs(well_depth_d(b1, p) - expected) / expected)
    ok = worst <= 1e-14
    announce(3, "well depth formula", ok, f"worst relative error {worst:.2e}")


def test_criterion_04_nehari_well_depth_inequality(ops100, consts100, announce):
    rng = np.random.default_rng(20240805)
    p, d = 4.0, consts100.d
    threshold = 2.0 * p / (p - 2.0) * d
    violations, worst = 0, np.inf
    for _ in range(100):
        w = random_constrained(ops100, rng)
        u = make_constrained(w, ops100.mesh)
        lam = 1.5 * nehari_scale(u, ops100, p)
        v = make_constrained(lam * w, ops100.mesh)
        assert nehari_K(v, ops100, p) < 0
        margin = ops100.lp_norm_p(v.coefficients, p) - threshold
        worst = min(worst, margin)
        if margin <= 0:
            violations += 1
    ok = violations == 0
    announce(4, "norm floor on the negative Nehari set", ok,
             f"100 samples, {violations} violations, smallest margin {worst:.3e}")


def test_criterion_05_levine_equality(announce):
    rng = np.random.default_rng(20240806)
    worst = 0.0
    for _ in range(10):
        alpha = float(rng.uniform(0.5, 3.0))
        c1, c2 = float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.5, 2.0))
        F0 = c1 ** (-1.0 / alpha)
        Fp0 = (c2 / alpha) * c1 ** (-1.0 / alpha - 1.0)
        worst = max(worst, abs(levine_bound(F0, Fp0, alpha) - c1 / c2) / (c1 / c2))
    ok = worst <= 1e-10
    announce(5, "concavity bound exact on the saturating family", ok,
             f"worst relative error {worst:.2e}")


def test_criterion_06_energy_identity(ops200, announce):
    u0 = make_constrained(3.0 * ops200.mesh.coords.copy(), ops200.mesh)
    maxima = []
    for dt in (2e-4, 1e-4):
        cfg = IntegratorConfig(dt0=dt, dt_max=dt, safety=1.0, horizon=0.1)
        traj, _ = simulate(u0, cfg, ops200, 4.0)
        maxima.append(identity_residuals(traj, ops200, 4.0).max_energy_rel)
    factor = maxima[0] / maxima[1]
    ok = maxima[1] <= 1e-3 and maxima[0] <= 1e-3 and factor >= 1.8
    announce(6, "energy identity residual", ok,
             f"max rel residual {maxima[0]:.2e} -> {maxima[1]:.2e}, factor {factor:.2f}")


def test_criterion_07_invariance_suites(ops100, consts100, b1_runs, b2_runs,
                                        announce):
    bad = []
    for i, (u0, traj, verdict) in enumerate(b1_runs):
        rep = invariance_audit(traj, consts100, ops100, 4.0, verdict)
        if rep.checks.get("B1_persistence") != "clean":
            bad.append(("B1", i, rep.checks))
    for i, (u0, traj, verdict) in enumerate(b2_runs):
        rep = invariance_audit(traj, consts100, ops100, 4.0, verdict)
        if rep.checks.get("B2_rho_nondecreasing") != "clean" or \
                rep.checks.get("B2_gronwall") != "clean":
            bad.append(("B2", i, rep.checks))
    ok = not bad
    announce(7, "invariance of the blow-up sets", ok,
             f"50 low-energy + 20 high-energy runs, violations: {bad if bad else 'none'}")


def test_criterion_08_bound_sandwich(ops100, consts100, b1_runs, b2_runs,
                                     p3_runs, announce):
    bad = []
    for label, runs, which in (("B1", b1_runs, "B1"), ("B2", b2_runs, "B2")):
        for i, (u0, traj, verdict) in enumerate(runs):
            if verdict.status != "blown_up":
                bad.append((label, i, verdict.status))
                continue
            ub = upper_bound_T(u0, consts100, ops100, 4.0, which)
            if not verdict.T_est <= 1.05 * ub:
                bad.append((label, i, verdict.T_est, ub))
    ops3, consts3, runs3 = p3_runs
    lower_checked = 0
    for i, (u0, traj, verdict) in enumerate(runs3):
        if verdict.status != "blown_up":
            bad.append(("p3", i, verdict.status))
            continue
        K = np.array([r.K for r in traj.reports])
        if not np.all(K < 0.0):
            continue                    # lower bound needs persistent K < 0
        lb = lower_bound_T(u0, consts3, ops3, 3.0, 1)
        lower_checked += 1
        if not verdict.T_est >= 0.95 * lb:
            bad.append(("p3-lower", i, verdict.T_est, lb))
    ok = not bad and lower_checked > 0
    announce(8, "blow-up time bound sandwich", ok,
             f"70 upper-bound checks, {lower_checked} lower-bound checks, "
             f"violations: {bad if bad else 'none'}")


def test_criterion_09_negative_nehari_necessary(b1_runs, b2_runs, p3_runs,
                                                announce):
    _, _, runs3 = p3_runs
    bad = 0
    total = 0
    for runs in (b1_runs, b2_runs, runs3):
        for u0, traj, verdict in runs:
            if verdict.status != "blown_up":
                continue
            total += 1
            if not any(r.K < 0.0 for r in traj.reports):
                bad += 1
    ok = bad == 0 and total > 0
    announce(9, "every blow-up run visits K < 0", ok,
             f"{total} blown-up runs, {bad} without a negative-K step")


def test_criterion_10_energy_level_construction(ops200, consts200, announce):
    bad = []
    # large negative energy targets give violently supercritical fields, so
    # start with a small step to resolve the short lifespan
    cfg = IntegratorConfig(dt0=1e-6, theta_blowup=1e6, horizon=10.0)
    for a in (-10.0, 0.0, 10.0, 100.0):
        u0 = construct_energy_level(a, consts200, ops200, 4.0, ops200.mesh)
        J = energy_J(u0, ops200, 4.0)
        cls = classify_initial(u0, consts200, ops200, 4.0)
        if abs(J - a) > 1e-6 * max(1.0, abs(a)) or not cls.in_B2 \
                or cls.margins["B2"] <= 0.0:
            bad.append((a, J, cls.in_B2))
            continue
        traj, verdict = simulate(u0, cfg, ops200, 4.0)
        if verdict.status != "blown_up":
            bad.append((a, verdict.status))
            continue
        ub = upper_bound_T(u0, consts200, ops200, 4.0, "B2")
        if not verdict.T_est <= 1.05 * ub:
            bad.append((a, verdict.T_est, ub))
    ok = not bad
    announce(10, "prescribed-energy construction", ok,
             f"targets -10/0/10/100, violations: {bad if bad else 'none'}")


def test_criterion_11_p2_global(announce):
    ops = make_ops(N=200, p=2.0)
    u0 = make_constrained(3.0 * ops.mesh.coords.copy(), ops.mesh)
    traj, verdict = simulate(u0, IntegratorConfig(dt0=1e-3, horizon=10.0),
                             ops, 2.0)
    ok = verdict.status == "global_on_horizon"
    announce(11, "linear source stays global", ok,
             f"status {verdict.status} at t={traj.final_time:.2f}")


def test_criterion_12_concavity_monitor(ops100, consts100, b1_runs, announce):
    p = 4.0
    bad = []
    for i, (u0, traj, verdict) in enumerate(b1_runs):
        J0, rho0 = traj.reports[0].J, traj.reports[0].rho
        beta = p * (consts100.d - J0) / (p - 1.0)
        sigma = 4.0 * rho0 / ((p - 2.0) * beta)
        predicted = 8.0 * rho0 / ((p - 2.0) ** 2 * beta)
        rep = concavity_monitor(traj, consts100, beta=beta, sigma_F=sigma,
                                T=min(predicted, traj.times[-1]))
        if not (rep.hypothesis_met and rep.positivity_ok and rep.concavity_ok):
            bad.append((i, "inequality", rep.first_violation))
        if abs(rep.predicted_bound - predicted) > 1e-12 * predicted:
            bad.append((i, "predicted bound", rep.predicted_bound, predicted))
    ok = not bad
    announce(12, "discrete concavity inequality", ok,
             f"50 runs at maximal beta, violations: {bad if bad else 'none'}")


def test_criterion_13_determinism(tmp_path, announce):
    files = ("verdict.json", "trajectory.csv", "constants.json",
             "classification.json", "u0.json")
    cfg_kwargs = dict(N=60, theta_blowup=1e6, dt0=1e-4, seed=12345)
    rep1 = run_experiment(RunConfig(outdir=str(tmp_path / "a"), **cfg_kwargs))
    rep2 = run_experiment(RunConfig(outdir=str(tmp_path / "b"), **cfg_kwargs))
    assert rep1.exit_code == 0 and rep2.exit_code == 0
    differing = [f for f in files
                 if (tmp_path / "a" / f).read_bytes() != (tmp_path / "b" / f).read_bytes()]
    ok = not differing
    announce(13, "byte-identical repeated runs", ok,
             f"compared {len(files)} files, differing: {differing if differing else 'none'}")
