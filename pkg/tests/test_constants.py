import dataclasses

import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sp

from blowuplab.constants import (derived_constants, estimate_B1,
                                 estimate_constants, estimate_S1, estimate_S2,
                                 estimate_S3_GN, sigma_gn, well_depth_d)
from blowuplab.errors import BlowupLabError, NotApplicableError

from conftest import make_ops


def test_well_depth_formula_points():
    assert well_depth_d(1.0, 4.0) == pytest.approx(0.25, rel=1e-14)
    assert well_depth_d(1.0, 3.0) == pytest.approx(1.0 / 6.0, rel=1e-14)
    assert well_depth_d(2.0, 4.0) == pytest.approx(0.015625, rel=1e-14)


def test_well_depth_random_pairs():
    rng = np.random.default_rng(42)
    for _ in range(20):
        b1 = float(rng.uniform(0.2, 3.0))
        p = float(rng.uniform(2.1, 6.0))
        expected = (0.5 - 1.0 / p) * b1 ** (-2.0 * p / (p - 2.0))
        assert well_depth_d(b1, p) == pytest.approx(expected, rel=1e-14)


def test_well_depth_rejects_nonpositive():
    with pytest.raises(BlowupLabError):
        well_depth_d(0.0, 4.0)
    with pytest.raises(BlowupLabError):
        well_depth_d(-1.0, 4.0)


def test_derived_constants_points():
    A, _, _, _ = derived_constants(1.0, 0.405285, None, 4.0, 1)
    assert A == pytest.approx(2.810570, rel=1e-6)
    A, S4, Ct, sigma = derived_constants(1.0, 0.405285, 1.0, 3.0, 1)
    assert sigma == pytest.approx(1.0 / 6.0, rel=1e-14)
    assert S4 == pytest.approx(2.0 ** (5.0 / 3.0), rel=1e-12)
    assert Ct == pytest.approx(0.75, rel=1e-12)


def test_derived_constants_critical_exponent_rejected():
    with pytest.raises(NotApplicableError):
        derived_constants(1.0, 0.4, 1.0, 6.0, 1)


def test_sigma_range():
    assert 0.0 < sigma_gn(3.0, 1) < 1.0
    assert 2.0 - 3.0 * sigma_gn(3.0, 1) > 0.0


def test_S2_against_dense_eigensolve():
    ops = make_ops(N=40)
    free = ops.free_nodes
    M = ops.M[np.ix_(free, free)].toarray()
    A = ops.A[np.ix_(free, free)].toarray()
    oracle = scipy.linalg.eigh(M, A, eigvals_only=True)[-1]
    assert estimate_S2(ops) == pytest.approx(oracle, rel=1e-9)


def test_S2_continuum_limit_and_rate():
    exact = 4.0 / np.pi ** 2
    e4 = abs(estimate_S2(make_ops(N=4)) - exact)
    e8 = abs(estimate_S2(make_ops(N=8)) - exact)
    assert 3.0 < e4 / e8 < 5.0
    assert abs(estimate_S2(make_ops(N=200)) - exact) < 1e-3 * exact


def test_S2_single_cell():
    # one free node: M = h/3, A = 1/h with h = 1
    assert estimate_S2(make_ops(N=1)) == pytest.approx(1.0 / 3.0, rel=1e-12)


def test_S1_unit_and_scaled_interval():
    assert estimate_S1(make_ops(N=50)) == pytest.approx(1.0, rel=1e-12)
    assert estimate_S1(make_ops(N=50, L=2.5)) == pytest.approx(2.5, rel=1e-12)


def test_S1_vanishing_boundary_form_warns():
    ops = make_ops(N=10)
    zero_B = sp.csr_matrix(ops.B.shape)
    degenerate = dataclasses.replace(ops, B=zero_B)
    with pytest.warns(UserWarning):
        assert estimate_S1(degenerate) == 0.0


def test_B1_small_p_matches_poincare():
    ops = make_ops(N=100, p=2.01)
    b1 = estimate_B1(ops, 2.01)
    assert abs(b1 - 2.0 / np.pi) <= 0.01 * (2.0 / np.pi)


def test_B1_certified_lower_bound(ops100):
    b1 = estimate_B1(ops100, 4.0)
    assert b1 >= 0.2 ** 0.25 - 1e-9


def test_B1_restart_agreement(ops100):
    best, per = estimate_B1(ops100, 4.0, return_restarts=True)
    assert len(per) == 8
    assert best == max(per)
    for v in per:
        assert abs(v - best) <= 1e-6 * best


def test_S3_degenerate_p2(ops100):
    assert estimate_S3_GN(ops100, 2.0, 1) == 1.0


def test_S3_certified_lower_bound():
    ops = make_ops(N=100, p=3.0)
    s3 = estimate_S3_GN(ops, 3.0, 1)
    # objective at w = x: ||x||_3^3 = 1/4, ||x||_2 = 3^{-1/2}, ||x'||_2 = 1
    assert s3 >= 0.25 / 3.0 ** (-1.25) - 1e-9


def test_S3_restart_agreement():
    # the objective is flat near its maximum, so restarts land in the same
    # basin but stall at slightly different points; require loose agreement
    # overall and tight agreement among the top restarts
    ops = make_ops(N=100, p=3.0)
    best, per = estimate_S3_GN(ops, 3.0, 1, return_restarts=True)
    assert best == max(per)
    for v in per:
        assert abs(v - best) <= 1e-2 * best
    top = sorted(per)[-2:]
    assert abs(top[0] - top[1]) <= 1e-6 * best


def test_S3_supercritical_rejected():
    ops = make_ops(N=10, p=6.0)
    with pytest.raises(NotApplicableError):
        estimate_S3_GN(ops, 6.0, 1)


def test_monotone_refinement():
    vals = {}
    for N in (50, 100):
        ops = make_ops(N=N)
        vals[N] = (estimate_S1(ops), estimate_S2(ops), estimate_B1(ops, 4.0))
    for coarse, fine in zip(vals[50], vals[100]):
        assert fine >= coarse - 1e-10 * abs(coarse)


def test_container_consistency(consts100):
    assert consts100.d == well_depth_d(consts100.B1, consts100.p)
    A, S4, Ct, sigma = derived_constants(consts100.S1, consts100.S2,
                                         consts100.S3, consts100.p,
                                         consts100.n)
    assert consts100.A == A
    assert consts100.S4 == S4
    assert consts100.C_tilde == Ct
    assert consts100.sigma_GN == sigma
    for v in (consts100.S1, consts100.S2, consts100.B1, consts100.d,
              consts100.S3, consts100.A, consts100.S4, consts100.C_tilde):
        assert v > 0.0


def test_estimate_constants_reports_errors():
    ops = make_ops(N=50)
    fine = make_ops(N=100)
    c = estimate_constants(ops, fine)
    assert {"S1", "S2", "B1"} <= set(c.errors)
    assert all(e >= 0.0 for e in c.errors.values())
