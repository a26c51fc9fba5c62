"""Scalar functionals along trajectories and the differential-identity audit.

J(w) = 1/2 ||grad w||_2^2 - 1/p ||w||_p^p
K(w) = ||grad w||_2^2 - ||w||_p^p
rho(w) = 1/2 ||w||_2^2 + 1/2 ||w||_{2,Gamma1}^2
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InsufficientDataError, UndefinedScaleError
from .fields import Field
from .operators import DiscreteOperators

CSV_COLUMNS = ["t", "dt", "J", "K", "rho", "grad_norm_sq", "lp_norm_p",
               "l2_norm_sq", "trace_l2_sq", "H", "energy_residual"]


@dataclass(frozen=True)
class EnergyReport:
    """Per-step functional values; ut_* entries refer to the backward
    difference produced by the integrator over the step ending at t."""
    t: float
    dt: float
    J: float
    K: float
    rho: float
    grad_norm_sq: float
    lp_norm_p: float
    l2_norm_sq: float
    trace_l2_sq: float
    ut_l2_sq: float = 0.0
    ut_trace_sq: float = 0.0
    lp_rate: float = 0.0       # p * integral of |u|^(p-2) u u_t at this step
    H: Optional[float] = None  # rho - A*J, filled once constants are known

    def csv_row(self, energy_residual: float = float("nan")) -> list:
        h = self.H if self.H is not None else float("nan")
        return [self.t, self.dt, self.J, self.K, self.rho, self.grad_norm_sq,
                self.lp_norm_p, self.l2_norm_sq, self.trace_l2_sq, h,
                energy_residual]


def energy_J(u: Field, ops: DiscreteOperators, p: float) -> float:
    ops.check_constrained(u.coefficients)
    w = u.coefficients
    return 0.5 * ops.grad_norm_sq(w) - ops.lp_norm_p(w, p) / p


def nehari_K(u: Field, ops: DiscreteOperators, p: float) -> float:
    ops.check_constrained(u.coefficients)
    w = u.coefficients
    return ops.grad_norm_sq(w) - ops.lp_norm_p(w, p)


def rho(u: Field, ops: DiscreteOperators) -> float:
    ops.check_constrained(u.coefficients)
    w = u.coefficients
    return 0.5 * ops.l2_norm_sq(w) + 0.5 * ops.trace_norm_sq(w)


def nehari_scale(u: Field, ops: DiscreteOperators, p: float) -> float:
    """Scale lambda* with K(lambda* u) = 0: (||grad u||^2 / ||u||_p^p)^(1/(p-2))."""
    ops.check_constrained(u.coefficients)
    w = u.coefficients
    lp = ops.lp_norm_p(w, p)
    if lp <= 0.0:
        raise UndefinedScaleError("Nehari scale undefined for the zero field")
    return (ops.grad_norm_sq(w) / lp) ** (1.0 / (p - 2.0))


def make_report(u: Field, ops: DiscreteOperators, p: float, dt: float = 0.0,
                u_t: Optional[np.ndarray] = None) -> EnergyReport:
    w = u.coefficients
    g = ops.grad_norm_sq(w)
    lp = ops.lp_norm_p(w, p)
    l2 = ops.l2_norm_sq(w)
    tr = ops.trace_norm_sq(w)
    ut2 = utg = rate = 0.0
    if u_t is not None:
        ut2 = ops.l2_norm_sq(u_t)
        utg = float(u_t @ (ops.B @ u_t))
        rate = p * float(ops.source_vector(w, p) @ u_t)
    return EnergyReport(t=u.time, dt=dt, J=0.5 * g - lp / p, K=g - lp,
                        rho=0.5 * l2 + 0.5 * tr, grad_norm_sq=g, lp_norm_p=lp,
                        l2_norm_sq=l2, trace_l2_sq=tr, ut_l2_sq=ut2,
                        ut_trace_sq=utg, lp_rate=rate)


@dataclass(frozen=True)
class IdentityResiduals:
    """Per-interval residuals of the differential identities, trapezoid in
    time on the accepted-step grid. Relative values are scaled by the larger
    of 1 and the magnitudes entering each identity."""
    t: np.ndarray
    energy: np.ndarray          # J(t_k) - J(t_{k-1}) + int(||u_t||^2 + ||u_t||_G1^2)
    lp_power: np.ndarray        # d/dt ||u||_p^p vs p*int |u|^(p-2) u u_t
    rho_rate: np.ndarray        # d/dt rho vs -K
    energy_rel: np.ndarray
    lp_power_rel: np.ndarray
    rho_rate_rel: np.ndarray

    @property
    def max_energy_rel(self) -> float:
        return float(np.max(self.energy_rel)) if self.energy_rel.size else 0.0


def identity_residuals(traj, ops: DiscreteOperators, p: float) -> IdentityResiduals:
    """Audit Lemma-style identities on a recorded trajectory.

    Uses the per-step reports (which store the backward-difference dissipation
    norms), so the audit measures exactly what the scheme produced.
    """
    reports = traj.reports
    if len(reports) < 2:
        raise InsufficientDataError("need at least 2 recorded states for the identity audit")
    t = np.array([r.t for r in reports])
    # the stored step sizes, not diff(t): increments can underflow the time
    # stamps near blow-up while the scheme still advances the state
    dt = np.array([r.dt for r in reports[1:]])
    J = np.array([r.J for r in reports])
    P = np.array([r.lp_norm_p for r in reports])
    R = np.array([r.rho for r in reports])
    K = np.array([r.K for r in reports])
    D = np.array([r.ut_l2_sq + r.ut_trace_sq for r in reports])
    rate = np.array([r.lp_rate for r in reports])
    # the step-0 report has no derivative; use the first step's value so the
    # first trapezoid degenerates to a rectangle
    D[0] = D[1]
    rate[0] = rate[1]

    diss = 0.5 * (D[:-1] + D[1:]) * dt
    res_energy = J[1:] - J[:-1] + diss
    res_lp = (P[1:] - P[:-1]) - 0.5 * (rate[:-1] + rate[1:]) * dt
    res_rho = (R[1:] - R[:-1]) + 0.5 * (K[:-1] + K[1:]) * dt

    scale_e = np.maximum(1.0, np.maximum(np.abs(J[1:]), np.abs(J[:-1])))
    scale_e = np.maximum(scale_e, diss)
    scale_p = np.maximum(1.0, np.maximum(np.abs(P[1:]), np.abs(P[:-1])))
    scale_r = np.maximum(1.0, np.maximum(np.abs(R[1:]), np.abs(R[:-1])))
    return IdentityResiduals(
        t=t[1:], energy=res_energy, lp_power=res_lp, rho_rate=res_rho,
        energy_rel=np.abs(res_energy) / scale_e,
        lp_power_rel=np.abs(res_lp) / scale_p,
        rho_rate_rel=np.abs(res_rho) / scale_r,
    )
