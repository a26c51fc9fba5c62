import numpy as np
import pytest

from blowuplab.analysis import (classify_initial, invariance_audit,
                                lower_bound_T, upper_bound_T)
from blowuplab.constants import SobolevConstants
from blowuplab.dynamics import IntegratorConfig, simulate
from blowuplab.errors import NotApplicableError
from blowuplab.fields import make_constrained
from blowuplab.functionals import energy_J, nehari_K, nehari_scale

from conftest import make_ops, random_constrained


def ramp(ops, lam=1.0):
    return make_constrained(lam * ops.mesh.coords.copy(), ops.mesh)


def zero_field(ops):
    return make_constrained(np.zeros(ops.mesh.n_nodes), ops.mesh)


def test_classify_zero_field(ops100, consts100):
    c = classify_initial(zero_field(ops100), consts100, ops100, 4.0)
    assert not c.in_B1 and not c.in_B2 and not c.in_N_minus


def test_classify_negative_nehari_closed_form(ops100, consts100):
    # K(lambda x) = lambda^2 - lambda^4/5 < 0 exactly when lambda^2 > 5
    for lam in (2.4, 3.0, 6.0):
        c = classify_initial(ramp(ops100, lam), consts100, ops100, 4.0)
        assert c.in_N_minus == (lam ** 2 > 5.0)


def test_b2_implies_n_minus(ops100, consts100):
    rng = np.random.default_rng(33)
    found = 0
    for _ in range(20):
        w = random_constrained(ops100, rng)
        u = make_constrained(w, ops100.mesh)
        lam = 2.0 * nehari_scale(u, ops100, 4.0)
        c = classify_initial(make_constrained(lam * w, ops100.mesh),
                             consts100, ops100, 4.0)
        if c.in_B2:
            found += 1
            assert c.in_N_minus
    assert found > 0


def test_classification_margins_match_flags(ops100, consts100):
    c = classify_initial(ramp(ops100, 3.0), consts100, ops100, 4.0)
    assert c.in_B1 == (c.margins["B1_energy"] > 0 and c.margins["B1_nehari"] > 0)
    assert c.in_B2 == (c.margins["B2"] > 0)


def test_upper_bound_formula_B1(ops100, consts100):
    p = 4.0
    u0 = ramp(ops100, 3.0)
    J0 = energy_J(u0, ops100, p)
    q = (ops100.l2_norm_sq(u0.coefficients)
         + ops100.trace_norm_sq(u0.coefficients))
    expected = 4.0 * (p - 1.0) / (p * (p - 2.0) ** 2) * q / (consts100.d - J0)
    assert upper_bound_T(u0, consts100, ops100, p, "B1") == pytest.approx(
        expected, rel=1e-12)


def test_upper_bound_formula_B2(ops100):
    # constants pinned so the threshold coefficient is reproducible in-test
    p = 4.0
    consts = SobolevConstants(p=p, n=1, S1=1.0, S2=0.405285, B1=0.71)
    lam = np.sqrt(7.5)            # ||u0||_2^2 + ||u0||_{2,G1}^2 = 4 lam^2/3 = 10
    u0 = ramp(ops100, lam)
    q = (ops100.l2_norm_sq(u0.coefficients)
         + ops100.trace_norm_sq(u0.coefficients))
    assert q == pytest.approx(10.0, rel=1e-12)
    J0 = energy_J(u0, ops100, p)
    denom = (p - 2.0) / (2.0 * p * (consts.S1 + consts.S2)) * q - J0
    expected = 4.0 * (p - 1.0) / (p * (p - 2.0) ** 2) * q / denom
    assert upper_bound_T(u0, consts, ops100, p, "B2") == pytest.approx(
        expected, rel=1e-12)


def test_upper_bound_requires_membership(ops100, consts100):
    # small ramp: J > 0 small but K > 0, not in B1
    u0 = ramp(ops100, 1.0)
    with pytest.raises(NotApplicableError):
        upper_bound_T(u0, consts100, ops100, 4.0, "B1")


def test_lower_bound_formula():
    ops = make_ops(N=100, p=3.0)
    consts = SobolevConstants(p=3.0, n=1, S1=1.0, S2=0.4, B1=0.7, S3=1.0)
    assert consts.C_tilde == pytest.approx(0.75, rel=1e-12)
    lam = np.sqrt(6.0)            # 4 lam^2/3 = 8
    u0 = ramp(ops, lam)
    # 0.75 / 8^{2(p-2)/(4-n(p-2))} = 0.75 / 8^{2/3} = 0.1875
    assert lower_bound_T(u0, consts, ops, 3.0, 1) == pytest.approx(
        0.1875, rel=1e-10)


def test_lower_bound_domain_errors(ops100, consts100):
    ops6 = make_ops(N=10, p=6.0)
    consts6 = SobolevConstants(p=6.0, n=1, S1=1.0, S2=0.4, B1=0.7)
    with pytest.raises(NotApplicableError):
        lower_bound_T(ramp(ops6), consts6, ops6, 6.0, 1)
    with pytest.raises(NotApplicableError):
        lower_bound_T(zero_field(ops100), consts100, ops100, 4.0, 1)


def test_audit_zero_trajectory_vacuous(ops100, consts100):
    traj, verdict = simulate(zero_field(ops100),
                             IntegratorConfig(dt0=1e-3, horizon=0.05),
                             ops100, 4.0)
    rep = invariance_audit(traj, consts100, ops100, 4.0, verdict)
    assert rep.clean
    assert rep.checks.get("necessary_K_negative") == "skipped"


def test_audit_clean_on_blowup_run(ops100, consts100):
    traj, verdict = simulate(ramp(ops100, 3.0), IntegratorConfig(dt0=1e-4),
                             ops100, 4.0)
    rep = invariance_audit(traj, consts100, ops100, 4.0, verdict)
    assert rep.clean
    assert rep.checks["B1_persistence"] == "clean"
    assert rep.checks["necessary_K_negative"] == "clean"


def test_audit_skips_blowup_check_for_global_run():
    ops = make_ops(N=50, p=2.0)
    consts = SobolevConstants(p=2.0, n=1, S1=1.0, S2=0.4, B1=np.sqrt(0.4))
    traj, verdict = simulate(ramp(ops, 3.0),
                             IntegratorConfig(dt0=1e-3, horizon=1.0), ops, 2.0)
    assert verdict.status == "global_on_horizon"
    rep = invariance_audit(traj, consts, ops, 2.0, verdict)
    assert rep.checks.get("necessary_K_negative") == "skipped"
