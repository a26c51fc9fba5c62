"""Optimal-constant estimation on the discrete space.

S1 and S2 are the largest generalized eigenvalues of the trace and mass forms
against the stiffness form; B1 and the Gagliardo-Nirenberg constant are
estimated by projected gradient ascent with deterministic seeded restarts.
All estimates are suprema over the conforming subspace, hence certified lower
bounds of the continuum constants (and the well depth d is correspondingly
over-estimated).
"""

import warnings
from dataclasses import dataclass, field as dfield
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import ConvergenceError, NotApplicableError
from .operators import DiscreteOperators

RESTART_SEED = 20240801
EIG_TOL = 1e-10
ASCENT_TOL = 1e-9


def well_depth_d(B1: float, p: float) -> float:
    """Potential well depth d = (1/2 - 1/p) * B1^(-2p/(p-2))."""
    if B1 <= 0.0:
        raise NotApplicableError(f"well depth needs B1 > 0, got {B1}")
    if p <= 2.0:
        raise NotApplicableError(f"well depth needs p > 2, got {p}")
    return (0.5 - 1.0 / p) * B1 ** (-2.0 * p / (p - 2.0))


def sigma_gn(p: float, n: int) -> float:
    """Gagliardo-Nirenberg interpolation exponent n(p-2)/(2p)."""
    return n * (p - 2.0) / (2.0 * p)


def derived_constants(S1: float, S2: float, S3: Optional[float],
                      p: float, n: int):
    """(A, S4, C_tilde, sigma) from the primitive constants.

    A = p(S1+S2)/(p-2); S4 and C_tilde exist only for p < 2 + 4/n.
    """
    if S1 < 0 or S2 <= 0:
        raise NotApplicableError("S1 must be >= 0 and S2 > 0")
    if p <= 2.0:
        raise NotApplicableError("derived constants need p > 2")
    sigma = sigma_gn(p, n)
    A = p * (S1 + S2) / (p - 2.0)
    if S3 is None:
        return A, None, None, sigma
    two_ps = 2.0 - p * sigma
    if two_ps <= 0.0:
        raise NotApplicableError(f"p={p}, n={n} violates p < 2 + 4/n (2 - p*sigma = {two_ps})")
    if S3 <= 0:
        raise NotApplicableError("S3 must be positive")
    S4 = S3 ** (2.0 / two_ps) * 2.0 ** ((p - p * sigma) / two_ps)
    C_tilde = two_ps / (S4 * (p - 2.0)) * 2.0 ** ((p - 2.0) / two_ps)
    return A, S4, C_tilde, sigma


# ---------------------------------------------------------------------------
# eigenvalue-type constants

def _power_iteration(solve_A, Q: sp.csr_matrix, x0: np.ndarray,
                     tol: float = EIG_TOL, max_iter: int = 200000):
    """Largest lam with Q v = lam A v via power iteration on A^{-1} Q.

    solve_A maps a free-dof vector to A^{-1} of it; the iteration is monotone
    in the Rayleigh quotient since A^{-1}Q is self-adjoint in the A product.
    """
    x = x0 / np.linalg.norm(x0)
    lam_old = 0.0
    for it in range(max_iter):
        y = Q @ x
        z = solve_A(y)
        num = float(z @ (Q @ z))
        az = float(z @ y)               # z^T A z, since A z = y exactly
        lam = num / az if az != 0.0 else 0.0
        nrm = np.linalg.norm(z)
        if nrm == 0.0:
            return 0.0, x
        x = z / nrm
        if lam_old != 0.0 and abs(lam - lam_old) <= tol * abs(lam):
            return lam, x
        lam_old = lam
    raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations",
                           last_value=lam_old)


def _free_solver(ops: DiscreteOperators):
    free = ops.free_nodes
    A = ops.A[np.ix_(free, free)].tocsc()
    lu = splu(A)
    return free, lu


def estimate_S2(ops: DiscreteOperators) -> float:
    """sup ||w||_2^2 / ||grad w||_2^2 on the constrained space."""
    free, lu = _free_solver(ops)
    Q = ops.M[np.ix_(free, free)].tocsr()
    x0 = np.ones(free.size)
    lam, _ = _power_iteration(lambda b: lu.solve(b), Q, x0)
    return lam


def estimate_S1(ops: DiscreteOperators) -> float:
    """sup ||w||_{2,Gamma1}^2 / ||grad w||_2^2; 0 with a warning if Gamma1
    carries no mass (pure Dirichlet degenerate configuration)."""
    free = ops.free_nodes
    Q = ops.B[np.ix_(free, free)].tocsr()
    if Q.nnz == 0 or abs(Q).sum() == 0.0:
        warnings.warn("Gamma1 boundary form vanishes; S1 = 0 (pure Dirichlet problem)")
        return 0.0
    _, lu = _free_solver(ops)
    # start with boundary mass applied to 1 so the iterate overlaps Gamma1
    x0 = np.asarray(Q @ np.ones(free.size)).ravel()
    if not np.any(x0):
        x0 = np.ones(free.size)
    lam, _ = _power_iteration(lambda b: lu.solve(b), Q, x0)
    return lam


def poincare_maximizer(ops: DiscreteOperators) -> np.ndarray:
    """Full-length eigenfield of the S2 problem (used as an ascent seed)."""
    free, lu = _free_solver(ops)
    Q = ops.M[np.ix_(free, free)].tocsr()
    _, v = _power_iteration(lambda b: lu.solve(b), Q, np.ones(free.size))
    out = np.zeros(ops.mesh.n_nodes)
    out[free] = v
    return out


# ---------------------------------------------------------------------------
# optimization-type constants

def _restart_fields(ops: DiscreteOperators, n_random: int = 5):
    """Deterministic restart seeds: eigenfunction, ramp, boundary bump and
    seeded random fields, all zeroed on Gamma0."""
    mesh = ops.mesh
    g0 = mesh.gamma0_nodes
    coords = mesh.coords if mesh.dim == 2 else mesh.coords[:, None]
    g0_pts = coords[g0]
    d0 = np.min(np.linalg.norm(coords[:, None, :] - g0_pts[None, :, :], axis=2), axis=1)
    scale = float(d0.max()) or 1.0
    ramp = d0 / scale
    g1 = mesh.gamma1_nodes
    if g1.size:
        g1_pts = coords[g1]
        d1 = np.min(np.linalg.norm(coords[:, None, :] - g1_pts[None, :, :], axis=2), axis=1)
        bump = np.exp(-d1 / (0.1 * scale))
    else:
        bump = ramp.copy()
    seeds = [poincare_maximizer(ops), ramp, bump]
    rng = np.random.default_rng(RESTART_SEED)
    for _ in range(n_random):
        seeds.append(rng.standard_normal(mesh.n_nodes))
    out = []
    for s in seeds:
        s = np.array(s, dtype=float)
        s[g0] = 0.0
        if np.linalg.norm(s) > 0:
            out.append(s)
    return out


def _ascend(ops: DiscreteOperators, value, gradient, seeds,
            tol: float = ASCENT_TOL, max_iter: int = 5000):
    """Projected gradient ascent of a scale-invariant objective on the
    A-unit sphere, A^{-1}-preconditioned, with backtracking. Returns the best
    objective over the restarts and the per-restart values."""
    free, lu = _free_solver(ops)
    n = ops.mesh.n_nodes

    def normalize(w):
        a = ops.grad_norm_sq(w)
        return w / np.sqrt(a)

    results = []
    for s in seeds:
        w = normalize(s)
        f = value(w)
        eta = 0.5
        for _ in range(max_iter):
            g = gradient(w)
            d = np.zeros(n)
            d[free] = lu.solve(g[free])
            improved = False
            for _ in range(40):
                w_try = normalize(w + eta * d)
                f_try = value(w_try)
                if f_try > f:
                    improved = True
                    break
                eta *= 0.5
            if not improved:
                break
            gain = f_try - f
            w, f = w_try, f_try
            eta = min(eta * 1.5, 1e3)
            # f is a log-objective and can sit near zero, so the gain test
            # is absolute in log space (relative on the constant itself)
            if gain <= tol * max(1.0, abs(f)):
                break
        else:
            raise ConvergenceError("projected ascent hit the iteration cap", last_value=f)
        results.append(f)
    best = max(results)
    return best, results


def estimate_B1(ops: DiscreteOperators, p: float,
                return_restarts: bool = False):
    """sup ||w||_p / ||grad w||_2 by seeded projected gradient ascent."""
    if p <= 2.0:
        raise NotApplicableError(f"B1 estimation needs p > 2 for the well depth; got p={p}"
                                 if p < 2.0 else "use estimate_S2 for p = 2")

    def value(w):
        return np.log(ops.lp_norm_p(w, p)) / p - 0.5 * np.log(ops.grad_norm_sq(w))

    def gradient(w):
        lp = ops.lp_norm_p(w, p)
        return ops.source_vector(w, p) / lp - (ops.A @ w) / ops.grad_norm_sq(w)

    best, per = _ascend(ops, value, gradient, _restart_fields(ops))
    b1 = float(np.exp(best))
    if return_restarts:
        return b1, [float(np.exp(v)) for v in per]
    return b1


def estimate_S3_GN(ops: DiscreteOperators, p: float, n: int,
                   return_restarts: bool = False):
    """sup ||w||_p^p / (||w||_2^{p(1-sigma)} ||grad w||_2^{p sigma}) with
    sigma = n(p-2)/(2p); requires p < 2 + 4/n."""
    if p == 2.0:
        return (1.0, [1.0]) if return_restarts else 1.0
    sigma = sigma_gn(p, n)
    if 2.0 - p * sigma <= 0.0:
        raise NotApplicableError(f"S3 needs p < 2 + 4/n; got p={p}, n={n}")

    def value(w):
        return (np.log(ops.lp_norm_p(w, p))
                - 0.5 * p * (1.0 - sigma) * np.log(ops.l2_norm_sq(w))
                - 0.5 * p * sigma * np.log(ops.grad_norm_sq(w)))

    def gradient(w):
        lp = ops.lp_norm_p(w, p)
        return (p * ops.source_vector(w, p) / lp
                - p * (1.0 - sigma) * (ops.M @ w) / ops.l2_norm_sq(w)
                - p * sigma * (ops.A @ w) / ops.grad_norm_sq(w))

    best, per = _ascend(ops, value, gradient, _restart_fields(ops))
    s3 = float(np.exp(best))
    if return_restarts:
        return s3, [float(np.exp(v)) for v in per]
    return s3


# ---------------------------------------------------------------------------
# aggregate container

@dataclass(frozen=True)
class SobolevConstants:
    """All constants entering the bound formulas, on one discretization.

    d is recomputed from B1 on read; error estimates are Richardson
    differences between the coarse and refined meshes when available.
    """
    p: float
    n: int
    S1: float
    S2: float
    B1: float
    S3: Optional[float] = None
    errors: dict = dfield(default_factory=dict)

    @property
    def d(self) -> float:
        return well_depth_d(self.B1, self.p)

    @property
    def sigma_GN(self) -> float:
        return sigma_gn(self.p, self.n)

    @property
    def A(self) -> float:
        return derived_constants(self.S1, self.S2, None, self.p, self.n)[0]

    @property
    def S4(self) -> Optional[float]:
        return derived_constants(self.S1, self.S2, self.S3, self.p, self.n)[1]

    @property
    def C_tilde(self) -> Optional[float]:
        return derived_constants(self.S1, self.S2, self.S3, self.p, self.n)[2]

    def b2_threshold_coeff(self) -> float:
        """(p-2)/(2p(S1+S2)) multiplying ||w||_2^2 + ||w||_{2,Gamma1}^2."""
        return (self.p - 2.0) / (2.0 * self.p * (self.S1 + self.S2))

    def as_dict(self) -> dict:
        return {
            "p": self.p, "n": self.n,
            "S1": self.S1, "S2": self.S2, "B1": self.B1,
            "d": self.d if self.p > 2.0 else None,
            "S3": self.S3, "sigma_GN": self.sigma_GN,
            "A": self.A if self.p > 2.0 else None,
            "S4": self.S4 if self.p > 2.0 else None,
            "C_tilde": self.C_tilde if self.p > 2.0 else None,
            "errors": dict(self.errors),
            "restart_seed": RESTART_SEED,
        }


def estimate_constants(ops: DiscreteOperators,
                       ops_fine: Optional[DiscreteOperators] = None,
                       with_gn: bool = True) -> SobolevConstants:
    """Estimate every constant on ops; if a refined assembly is given, use its
    values and attach Richardson (rate-2) error estimates."""
    p, n = ops.spec.p, ops.spec.n
    gn_ok = with_gn and p > 2.0 and p < 2.0 + 4.0 / n

    def one(o):
        s2 = estimate_S2(o)
        s1 = estimate_S1(o)
        b1 = estimate_B1(o, p) if p > 2.0 else np.sqrt(s2)
        s3 = estimate_S3_GN(o, p, n) if gn_ok else None
        return s1, s2, b1, s3

    s1, s2, b1, s3 = one(ops)
    errors = {}
    if ops_fine is not None:
        f1, f2, fb, f3 = one(ops_fine)
        errors = {"S1": abs(f1 - s1) / 3.0, "S2": abs(f2 - s2) / 3.0,
                  "B1": abs(fb - b1) / 3.0}
        if gn_ok:
            errors["S3"] = abs(f3 - s3) / 3.0
        s1, s2, b1, s3 = f1, f2, fb, f3
    return SobolevConstants(p=p, n=n, S1=s1, S2=s2, B1=b1, S3=s3, errors=errors)
