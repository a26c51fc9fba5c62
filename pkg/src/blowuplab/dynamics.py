"""IMEX backward-Euler time integration, adaptive stepping, blow-up
detection and the Levine concavity monitor.

Semi-discrete form: (M + B) du/dt + A u = F(u), F(u)_i = int |u|^(p-2) u phi_i.
One step solves (M + B + dt A) u_new = (M + B) u + dt F(u) on the free nodes.
"""

import math
from dataclasses import dataclass, field as dfield
from typing import List, Optional

import numpy as np
from scipy.sparse.linalg import splu

from .constants import SobolevConstants
from .errors import (InconclusiveEstimateError, InsufficientDataError,
                     NotApplicableError, SolverError)
from .fields import Field
from .functionals import EnergyReport, make_report
from .operators import DiscreteOperators


@dataclass(frozen=True)
class IntegratorConfig:
    dt0: float = 1e-3
    dt_min: float = 1e-30
    dt_max: float = math.inf
    safety: float = 0.9
    step_target: float = 0.05        # relative sup-norm change per step
    theta_blowup: float = 1e8
    horizon: float = 10.0
    record_every: int = 1
    extrapolation_window: int = 8
    blowup_norm: str = "sup"         # "sup" or "h1"
    solver_tol: float = 1e-12
    max_steps: int = 2_000_000

    def __post_init__(self):
        if not (self.dt0 > self.dt_min > 0.0):
            raise ValueError("require dt0 > dt_min > 0")
        if self.dt_max < self.dt0:
            raise ValueError("dt_max must be at least dt0")
        if self.theta_blowup <= 1.0:
            raise ValueError("theta_blowup must exceed 1")
        if self.horizon < 0.0:
            raise ValueError("horizon must be nonnegative")
        if self.blowup_norm not in ("sup", "h1"):
            raise ValueError("blowup_norm must be 'sup' or 'h1'")


@dataclass
class TrajectoryRecord:
    states: List[Field] = dfield(default_factory=list)
    derivatives: List[Optional[np.ndarray]] = dfield(default_factory=list)
    reports: List[EnergyReport] = dfield(default_factory=list)
    dt_history: List[float] = dfield(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.reports])

    @property
    def final_time(self) -> float:
        return self.reports[-1].t if self.reports else 0.0


@dataclass
class BlowupVerdict:
    status: str                       # blown_up | global_on_horizon | inconclusive
    T_est: Optional[float] = None
    T_uncertainty: Optional[float] = None
    T_upper: dict = dfield(default_factory=dict)
    T_lower: Optional[float] = None
    audit: dict = dfield(default_factory=dict)
    diagnostic: str = ""

    def as_dict(self) -> dict:
        return {"status": self.status, "T_est": self.T_est,
                "T_uncertainty": self.T_uncertainty,
                "T_upper": dict(self.T_upper), "T_lower": self.T_lower,
                "audit": dict(self.audit), "diagnostic": self.diagnostic}


def step(u: Field, dt: float, ops: DiscreteOperators, p: float) -> Field:
    """One IMEX backward-Euler step (implicit stiffness, explicit source)."""
    if dt <= 0.0:
        raise ValueError(f"step size must be positive, got {dt}")
    ops.check_constrained(u.coefficients)
    free = ops.free_nodes
    MB = ops.MB
    lhs = (MB + dt * ops.A)[np.ix_(free, free)].tocsc()
    rhs_full = MB @ u.coefficients + dt * ops.source_vector(u.coefficients, p)
    rhs = rhs_full[free]
    try:
        sol = splu(lhs).solve(rhs)
    except RuntimeError as exc:     # singular factorization
        raise SolverError(f"linear solve breakdown: {exc}") from exc
    resid = np.linalg.norm(lhs @ sol - rhs)
    if resid > 1e-12 * max(1.0, np.linalg.norm(rhs)):
        raise SolverError(f"solve residual {resid:.3e} exceeds tolerance")
    out = np.zeros(ops.mesh.n_nodes)
    out[free] = sol
    return Field(out, u.time + dt)


def _h1_norm(u: np.ndarray, ops: DiscreteOperators) -> float:
    return math.sqrt(ops.l2_norm_sq(u) + ops.grad_norm_sq(u))


def simulate(u0: Field, cfg: IntegratorConfig, ops: DiscreteOperators,
             p: float):
    """Advance from u0 with adaptive steps until blow-up threshold, horizon,
    or step-size underflow. Returns (TrajectoryRecord, BlowupVerdict)."""
    ops.check_constrained(u0.coefficients)
    traj = TrajectoryRecord()
    u = Field(u0.coefficients, 0.0)
    traj.states.append(u)
    traj.derivatives.append(None)
    traj.reports.append(make_report(u, ops, p, dt=0.0))

    def blow_norm(w: Field) -> float:
        if cfg.blowup_norm == "sup":
            return w.sup_norm
        return _h1_norm(w.coefficients, ops)

    if blow_norm(u) > cfg.theta_blowup:
        return traj, BlowupVerdict(status="blown_up", T_est=0.0, T_uncertainty=0.0,
                                   diagnostic="initial state above threshold")

    t, dt = 0.0, cfg.dt0
    status, diag = None, ""
    k = 0
    v = None
    while True:
        if t >= cfg.horizon:
            status = "global_on_horizon"
            break
        if k >= cfg.max_steps:
            status, diag = "inconclusive", "step budget exhausted"
            break
        dt_eff = min(dt, cfg.horizon - t)
        try:
            u_new = step(u, dt_eff, ops, p)
        except SolverError as exc:
            status, diag = "inconclusive", f"solver failure: {exc}"
            break
        k += 1
        t = u_new.time
        v = (u_new.coefficients - u.coefficients) / dt_eff
        rep = make_report(u_new, ops, p, dt=dt_eff, u_t=v)
        traj.reports.append(rep)
        traj.dt_history.append(dt_eff)
        if k % cfg.record_every == 0:
            traj.states.append(u_new)
            traj.derivatives.append(v)

        if blow_norm(u_new) > cfg.theta_blowup:
            status = "blown_up"
            u = u_new
            break

        # sup-norm growth controller; geometric shrink near blow-up
        base = max(u.sup_norm, 1e-300)
        rel = float(np.max(np.abs(u_new.coefficients - u.coefficients))) / base
        factor = min(2.0, max(0.5, cfg.step_target / max(rel, 1e-300)))
        dt = min(cfg.safety * dt_eff * factor, cfg.dt_max)
        u = u_new
        if dt < cfg.dt_min:
            status, diag = "inconclusive", "step size underflow without threshold crossing"
            break

    if traj.states[-1].time < u.time:
        traj.states.append(u)
        traj.derivatives.append(v)

    if status == "blown_up":
        try:
            T_est, unc = estimate_blowup_time(traj, p, cfg.extrapolation_window)
        except (InconclusiveEstimateError, InsufficientDataError):
            T_est, unc = traj.final_time, traj.dt_history[-1] if traj.dt_history else 0.0
            diag = "extrapolation failed; T_est is the last accepted time"
        return traj, BlowupVerdict(status="blown_up", T_est=T_est,
                                   T_uncertainty=unc, diagnostic=diag)
    return traj, BlowupVerdict(status=status, diagnostic=diag)


def _fit_root(t: np.ndarray, y: np.ndarray) -> float:
    # least-squares line through (t, y); shifting to the last abscissa keeps
    # the normal equations well conditioned when the window is narrow
    s = t - t[-1]
    sm = s - s.mean()
    var = float(sm @ sm)
    if var <= 0.0:
        raise InconclusiveEstimateError("degenerate abscissae in the fit window")
    m = float(sm @ (y - y.mean())) / var
    if m >= 0.0:
        raise InconclusiveEstimateError("fitted power-law slope is nonnegative")
    b = float(y.mean()) - m * float(s.mean())
    return t[-1] - b / m


def estimate_blowup_time(traj: TrajectoryRecord, p: float,
                         window: int = 8):
    """Extrapolate the singularity time from the trailing power law.

    Fits y(t) = ||u(t)||_2^{-(p-2)} linearly on the last `window` accepted
    steps; T_est is the root, uncertainty the spread against the half window.
    """
    if p <= 2.0:
        raise NotApplicableError("power-law extrapolation needs p > 2")
    reports = traj.reports
    if len(reports) < max(window, 3):
        raise InsufficientDataError(f"need at least {max(window, 3)} recorded steps")
    # drop steps whose time increment fell below double resolution: the fit
    # needs distinct abscissae, and the truncated tail is within round-off
    # of the singularity time anyway
    resolve = 1e-11 * max(reports[-1].t, np.finfo(float).tiny)
    keep = [0]
    for i in range(1, len(reports)):
        if reports[i].t >= reports[keep[-1]].t + resolve:
            keep.append(i)
    if len(keep) < max(window, 3):
        raise InconclusiveEstimateError("too few time-resolved steps for the fit")
    tail = [reports[i] for i in keep[-window:]]
    l2 = np.array([math.sqrt(r.l2_norm_sq) for r in tail])
    t = np.array([r.t for r in tail])
    if np.any(np.diff(l2) <= 0.0):
        raise InconclusiveEstimateError("trailing ||u||_2 is not strictly increasing")
    y = l2 ** (-(p - 2.0))
    T_full = _fit_root(t, y)
    half = max(window // 2, 3)
    T_half = _fit_root(t[-half:], y[-half:])
    return T_full, abs(T_full - T_half)


def levine_bound(F0: float, Fprime0: float, alpha: float) -> float:
    """T <= F(0) / (alpha F'(0)) for positive F with F F'' >= (1+alpha)(F')^2."""
    if F0 <= 0.0 or Fprime0 <= 0.0 or alpha <= 0.0:
        raise NotApplicableError("levine_bound needs F(0) > 0, F'(0) > 0, alpha > 0")
    return F0 / (alpha * Fprime0)


@dataclass
class ConcavityReport:
    hypothesis_met: bool
    t: np.ndarray
    F: np.ndarray
    Fp: np.ndarray
    Fpp: np.ndarray
    positivity_ok: bool
    derivative_check_ok: bool
    concavity_ok: bool
    concavity_margin: np.ndarray
    concavity_tol: np.ndarray
    beta_max_B1: Optional[float]
    beta_max_B2: Optional[float]
    sigma_beta: Optional[float]
    predicted_bound: Optional[float]
    first_violation: Optional[int] = None
    note: str = ""

    @property
    def clean(self) -> bool:
        return self.positivity_ok and self.derivative_check_ok and self.concavity_ok


def concavity_monitor(traj: TrajectoryRecord, consts: SobolevConstants,
                      beta: float, sigma_F: float, T: float) -> ConcavityReport:
    """Audit the auxiliary function F(t) = int_0^t rho + (T-t) rho(0)
    + beta (t+sigma)^2 / 2 along the recorded trajectory.

    Checks positivity of F, consistency of the stored F', F'' against
    centered differences of the trapezoid F, and the concavity inequality
    F F'' - (p/2)(F')^2 >= F [ (p-2)/2 ||grad u||^2 - p J(u0) - (p-1) beta ]
    within the accumulated quadrature tolerance. The F'' difference check
    carries a first-order allowance for the scheme error in d(rho)/dt = -K.
    """
    if beta <= 0.0 or sigma_F <= 0.0:
        raise NotApplicableError("beta and sigma_F must be positive")
    p = consts.p
    times = traj.times
    if T > times[-1] + 1e-12 * max(1.0, times[-1]) or T <= 0.0:
        raise NotApplicableError(f"T={T} outside the trajectory span (0, {times[-1]}]")

    sel = times <= T * (1.0 + 1e-12)
    t = times[sel]
    reps = [r for r, keep in zip(traj.reports, sel) if keep]
    rho_v = np.array([r.rho for r in reps])
    K_v = np.array([r.K for r in reps])
    grad = np.array([r.grad_norm_sq for r in reps])
    J0 = reps[0].J
    rho0 = rho_v[0]

    beta_max_B1 = None
    if J0 < consts.d:
        beta_max_B1 = p * (consts.d - J0) / (p - 1.0)
    H0 = rho0 - consts.A * J0
    beta_max_B2 = p * H0 / (consts.A * (p - 1.0)) if H0 > 0 else None
    sigma_beta = 4.0 * rho0 / ((p - 2.0) * beta) if rho0 > 0 else None
    predicted = 8.0 * rho0 / ((p - 2.0) ** 2 * beta) if rho0 > 0 else None

    if rho0 <= 0.0:
        return ConcavityReport(
            hypothesis_met=False, t=t, F=np.array([]), Fp=np.array([]),
            Fpp=np.array([]), positivity_ok=True, derivative_check_ok=True,
            concavity_ok=True, concavity_margin=np.array([]),
            concavity_tol=np.array([]), beta_max_B1=beta_max_B1,
            beta_max_B2=beta_max_B2, sigma_beta=sigma_beta,
            predicted_bound=predicted,
            note="hypothesis not met: rho(0) = 0 (Levine lemma needs rho(0) > 0)")

    # stored step sizes: time stamps can stagnate at double resolution near
    # blow-up while the scheme still takes positive steps
    dts = np.array([r.dt for r in reps[1:]])
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (rho_v[:-1] + rho_v[1:]) * dts)])
    F = cum + (T - t) * rho0 + 0.5 * beta * (t + sigma_F) ** 2
    Fp = rho_v - rho0 + beta * (t + sigma_F)
    Fpp = -K_v + beta

    positivity_ok = bool(np.all(F > 0.0))

    # accumulated trapezoid error bound: per-step dt^3/12 * |rho''| with the
    # curvature taken as the larger of the interpolant value ||u_t||^2_{M+B}
    # and a second-difference estimate
    D = np.array([r.ut_l2_sq + r.ut_trace_sq for r in reps])
    curv = D.copy()
    if len(t) >= 3:
        fd2 = np.zeros_like(rho_v)
        num = 2.0 * (rho_v[2:] * dts[:-1] - rho_v[1:-1] * (dts[:-1] + dts[1:])
                     + rho_v[:-2] * dts[1:])
        den = dts[:-1] * dts[1:] * (dts[:-1] + dts[1:])
        fd2[1:-1] = np.abs(num / den)
        curv = np.maximum(curv, fd2)
    step_err = dts ** 3 / 12.0 * np.maximum(curv[:-1], curv[1:])
    E = np.concatenate([[0.0], np.cumsum(step_err)])

    # centered-difference consistency of F' and F''
    deriv_ok = True
    if len(t) >= 3:
        span = dts[:-1] + dts[1:]
        fmax = np.maximum(np.abs(F[2:]), np.maximum(np.abs(F[1:-1]), np.abs(F[:-2])))
        eps_noise = np.finfo(float).eps * fmax
        # second-order three-point first derivative on the nonuniform grid
        fpc = (dts[:-1] ** 2 * F[2:] - dts[1:] ** 2 * F[:-2]
               + (dts[1:] ** 2 - dts[:-1] ** 2) * F[1:-1]) \
            / (dts[:-1] * dts[1:] * span)
        h2 = span ** 2
        tol_fp = h2 * np.maximum(curv[1:-1], 1e-30) + 4.0 * (E[2:] - E[:-2]) / span
        tol_fp += 1e-9 * np.maximum(1.0, np.abs(Fp[1:-1])) + 4.0 * eps_noise / span
        ok_fp = np.abs(fpc - Fp[1:-1]) <= tol_fp
        num = 2.0 * (F[2:] * dts[:-1] - F[1:-1] * (dts[:-1] + dts[1:]) + F[:-2] * dts[1:])
        den = dts[:-1] * dts[1:] * (dts[:-1] + dts[1:])
        fppc = num / den
        # scheme allowance: first-order error in d(rho)/dt = -K, bounded by
        # the local variation of K across the stencil
        dK = np.abs(K_v[2:] - K_v[1:-1]) + np.abs(K_v[1:-1] - K_v[:-2])
        tol_fpp = 2.0 * dK + h2 * np.maximum(curv[1:-1], 1e-30)
        tol_fpp += 1e-7 * np.maximum(1.0, np.abs(Fpp[1:-1]))
        tol_fpp += 8.0 * eps_noise / (dts[:-1] * dts[1:])
        ok_fpp = np.abs(fppc - Fpp[1:-1]) <= tol_fpp
        deriv_ok = bool(np.all(ok_fp) and np.all(ok_fpp))

    bracket = 0.5 * (p - 2.0) * grad - p * J0 - (p - 1.0) * beta
    lhs = F * Fpp - 0.5 * p * Fp ** 2
    rhs = F * bracket
    tol_q = E * (np.abs(Fpp) + np.abs(bracket)) + 1e-9 * np.maximum(np.abs(lhs), np.abs(rhs))
    tol_q = np.maximum(tol_q, 1e-12)
    margin = lhs - rhs
    viol = margin < -tol_q
    first = int(np.argmax(viol)) if np.any(viol) else None

    return ConcavityReport(
        hypothesis_met=True, t=t, F=F, Fp=Fp, Fpp=Fpp,
        positivity_ok=positivity_ok, derivative_check_ok=deriv_ok,
        concavity_ok=not np.any(viol), concavity_margin=margin,
        concavity_tol=tol_q, beta_max_B1=beta_max_B1, beta_max_B2=beta_max_B2,
        sigma_beta=sigma_beta, predicted_bound=predicted, first_violation=first)
