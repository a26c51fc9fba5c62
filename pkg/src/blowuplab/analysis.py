"""Blow-up set membership, theoretical bounds on the blow-up time, and
trajectory-level invariance audits."""

from dataclasses import dataclass, field as dfield
from typing import Optional

import numpy as np

from .constants import SobolevConstants
from .errors import NotApplicableError
from .fields import Field
from .functionals import energy_J, nehari_K
from .operators import DiscreteOperators

BOUNDARY_SLACK = 1e-12


@dataclass(frozen=True)
class Classification:
    """Membership in the invariant blow-up sets, with strict-inequality
    margins. A margin below the boundary slack is flagged rather than
    asserted, since the sets are open."""
    in_B1: bool
    in_B2: bool
    in_N_minus: bool
    margins: dict
    boundary_case: bool
    J0: float
    K0: float
    norm_sq_total: float      # ||u0||_2^2 + ||u0||_{2,Gamma1}^2

    def as_dict(self) -> dict:
        return {"in_B1": self.in_B1, "in_B2": self.in_B2,
                "in_N_minus": self.in_N_minus, "margins": dict(self.margins),
                "boundary_case": self.boundary_case, "J0": self.J0,
                "K0": self.K0, "norm_sq_total": self.norm_sq_total}


def classify_initial(u0: Field, consts: SobolevConstants,
                     ops: DiscreteOperators, p: float) -> Classification:
    J0 = energy_J(u0, ops, p)
    K0 = nehari_K(u0, ops, p)
    w = u0.coefficients
    Q = ops.l2_norm_sq(w) + ops.trace_norm_sq(w)
    # the well depth is defined for p > 2 only; B1 is empty on the p = 2 path
    m_b1_J = consts.d - J0 if p > 2.0 else -np.inf
    m_b1_K = -K0
    m_b2 = consts.b2_threshold_coeff() * Q - J0
    margins = {"B1_energy": m_b1_J, "B1_nehari": m_b1_K, "B2": m_b2}
    scale = max(1.0, abs(J0), abs(K0))
    boundary = any(0.0 < m < BOUNDARY_SLACK * scale for m in margins.values())
    return Classification(
        in_B1=(m_b1_J > 0.0 and m_b1_K > 0.0),
        in_B2=(m_b2 > 0.0),
        in_N_minus=(K0 < 0.0),
        margins=margins, boundary_case=boundary,
        J0=J0, K0=K0, norm_sq_total=Q)


def upper_bound_T(u0: Field, consts: SobolevConstants, ops: DiscreteOperators,
                  p: float, which: str) -> float:
    """Concavity upper bound on the blow-up time for membership set B1 or B2:
    4(p-1)/(p(p-2)^2) * (||u0||_2^2 + ||u0||_{2,Gamma1}^2) / denominator."""
    cls = classify_initial(u0, consts, ops, p)
    Q = cls.norm_sq_total
    pref = 4.0 * (p - 1.0) / (p * (p - 2.0) ** 2)
    if which == "B1":
        if not cls.in_B1:
            raise NotApplicableError("u0 is not in B1 (need J(u0) < d and K(u0) < 0)")
        denom = consts.d - cls.J0
    elif which == "B2":
        if not cls.in_B2:
            raise NotApplicableError("u0 is not in B2")
        denom = consts.b2_threshold_coeff() * Q - cls.J0
    else:
        raise ValueError(f"which must be 'B1' or 'B2', got {which!r}")
    if denom <= 0.0:
        raise NotApplicableError(f"nonpositive denominator {denom} in the {which} bound")
    return pref * Q / denom


def lower_bound_T(u0: Field, consts: SobolevConstants, ops: DiscreteOperators,
                  p: float, n: int) -> float:
    """Gagliardo-Nirenberg lower bound C_tilde / Q^(2(p-2)/(4-n(p-2))) with
    Q the squared-norm total (squared trace form, consistent with the
    differential-inequality derivation)."""
    if p >= 2.0 + 4.0 / n:
        raise NotApplicableError(f"lower bound needs p < 2 + 4/n; got p={p}, n={n}")
    ct = consts.C_tilde
    if ct is None:
        raise NotApplicableError("constants were estimated without the GN constant")
    w = u0.coefficients
    Q = ops.l2_norm_sq(w) + ops.trace_norm_sq(w)
    if Q <= 0.0:
        raise NotApplicableError("zero initial data admits no blow-up to bound")
    expo = 2.0 * (p - 2.0) / (4.0 - n * (p - 2.0))
    return ct / Q ** expo


@dataclass
class AuditReport:
    checks: dict = dfield(default_factory=dict)     # name -> "clean"/"violated"/"skipped"
    first_violation: dict = dfield(default_factory=dict)  # name -> step index
    initial: Optional[Classification] = None

    @property
    def clean(self) -> bool:
        return all(v != "violated" for v in self.checks.values())

    def as_dict(self) -> dict:
        return {"checks": dict(self.checks),
                "first_violation": dict(self.first_violation),
                "clean": self.clean,
                "initial": self.initial.as_dict() if self.initial else None}


def invariance_audit(traj, consts: SobolevConstants, ops: DiscreteOperators,
                     p: float, verdict=None) -> AuditReport:
    """Per-step persistence and necessary-condition checks.

    (a) B1-persistence: J(u(t)) <= J(u0), K(u(t)) < 0;
    (b) B2-persistence: rho nondecreasing and H(t) >= e^{(p/A)t} H(0) (1-tol);
    (c) energy monotonicity J nonincreasing;
    (d) if the run blew up, some recorded step has K < 0.
    Violations are report content; audits compare recorded steps only.
    """
    rep = AuditReport()
    reports = traj.reports
    t = np.array([r.t for r in reports])
    J = np.array([r.J for r in reports])
    K = np.array([r.K for r in reports])
    R = np.array([r.rho for r in reports])
    J0, K0 = J[0], K[0]
    Q0 = reports[0].l2_norm_sq + reports[0].trace_l2_sq
    in_b1 = p > 2.0 and J0 < consts.d and K0 < 0.0
    in_b2 = p > 2.0 and J0 < consts.b2_threshold_coeff() * Q0
    u0 = traj.states[0]
    rep.initial = classify_initial(u0, consts, ops, p)

    def record(name, viol_mask):
        if np.any(viol_mask):
            rep.checks[name] = "violated"
            rep.first_violation[name] = int(np.argmax(viol_mask))
        else:
            rep.checks[name] = "clean"

    slack = 1e-9 * np.maximum(1.0, np.abs(J0))
    if in_b1:
        record("B1_persistence", (J > J0 + slack) | (K >= 0.0))
    else:
        rep.checks["B1_persistence"] = "skipped"

    if in_b2:
        A = consts.A
        H = R - A * J
        env = np.exp((p / A) * t) * H[0] * (1.0 - 1e-3)
        rho_slack = 1e-12 * np.maximum(1.0, np.abs(R[:-1]))
        record("B2_rho_nondecreasing", R[1:] < R[:-1] - rho_slack)
        record("B2_gronwall", H < env)
    else:
        rep.checks["B2_rho_nondecreasing"] = "skipped"
        rep.checks["B2_gronwall"] = "skipped"

    mono_slack = 1e-9 * np.maximum(1.0, np.abs(J[:-1]))
    record("energy_nonincreasing", J[1:] > J[:-1] + mono_slack)

    if verdict is not None and verdict.status == "blown_up":
        record("necessary_K_negative", np.array([not np.any(K < 0.0)]))
    else:
        rep.checks["necessary_K_negative"] = "skipped"
    return rep
