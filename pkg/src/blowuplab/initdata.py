"""Initial-data construction: standard families and the two-bump field
reaching any prescribed energy level inside the high-energy blow-up set."""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .constants import SobolevConstants
from .errors import ConstructionError, PlacementError
from .fields import Field, make_constrained
from .functionals import energy_J
from .mesh import Mesh
from .operators import DiscreteOperators

FAMILIES = ("ramp", "bump", "eigenmode", "oscillatory", "two_bump")


@dataclass(frozen=True)
class InitialDataSpec:
    family: str
    amplitude: float = 1.0
    frequency: int = 1
    center: float = 0.5          # bump center, as fraction of L
    width: float = 0.2           # bump/oscillatory support width, fraction of L
    subdomain1: tuple = (0.1, 0.4)   # fractions of L, two_bump / oscillatory
    subdomain2: tuple = (0.6, 0.9)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise PlacementError(f"unknown family {self.family!r}; choose from {FAMILIES}")


def _gamma0_distance(mesh: Mesh) -> np.ndarray:
    coords = mesh.coords if mesh.dim == 2 else mesh.coords[:, None]
    g0 = coords[mesh.gamma0_nodes]
    return np.min(np.linalg.norm(coords[:, None, :] - g0[None, :, :], axis=2), axis=1)


def _interval_values(mesh: Mesh, profile, support: Optional[tuple] = None) -> np.ndarray:
    x = mesh.coords
    vals = profile(x)
    if support is not None:
        a, b = support
        vals = np.where((x >= a) & (x <= b), vals, 0.0)
    return vals


def make_field(spec: InitialDataSpec, mesh: Mesh) -> Field:
    """Nodal interpolant of the chosen closed-form profile, zeroed on Gamma0."""
    if mesh.dim == 2:
        if spec.family != "ramp":
            raise PlacementError(f"family {spec.family!r} is 1D-only; 2D supports 'ramp'")
        d = _gamma0_distance(mesh)
        return make_constrained(spec.amplitude * d / max(d.max(), 1e-300), mesh)

    L = float(mesh.coords[-1])
    g0_left = 0 in set(mesh.gamma0_nodes.tolist())
    if spec.family == "ramp":
        prof = (lambda x: spec.amplitude * x / L) if g0_left else \
               (lambda x: spec.amplitude * (L - x) / L)
        return make_constrained(_interval_values(mesh, prof), mesh)
    if spec.family == "eigenmode":
        # first eigenmode of the mixed Dirichlet/Neumann Laplacian
        prof = (lambda x: spec.amplitude * np.sin(0.5 * np.pi * x / L)) if g0_left else \
               (lambda x: spec.amplitude * np.sin(0.5 * np.pi * (L - x) / L))
        return make_constrained(_interval_values(mesh, prof), mesh)
    if spec.family == "bump":
        c, w = spec.center * L, spec.width * L
        if not (0.0 < c - w / 2 and c + w / 2 < L):
            raise PlacementError(f"bump support [{c - w / 2}, {c + w / 2}] not interior to (0, {L})")
        prof = lambda x: spec.amplitude * np.sin(np.pi * np.clip((x - (c - w / 2)) / w, 0, 1)) ** 2
        return make_constrained(_interval_values(mesh, prof, (c - w / 2, c + w / 2)), mesh)
    if spec.family == "oscillatory":
        a, b = spec.subdomain1[0] * L, spec.subdomain1[1] * L
        if not (0.0 < a < b < L):
            raise PlacementError(f"oscillatory support [{a}, {b}] not interior to (0, {L})")
        k = spec.frequency
        prof = lambda x: spec.amplitude * np.sin(k * np.pi * np.clip((x - a) / (b - a), 0, 1))
        return make_constrained(_interval_values(mesh, prof, (a, b)), mesh)
    # two_bump: sine bumps on both subdomains at the given amplitude
    v1 = _oscillatory_piece(mesh, spec.subdomain1, 1)
    v2 = _oscillatory_piece(mesh, spec.subdomain2, 1)
    _check_disjoint(mesh, spec.subdomain1, spec.subdomain2)
    return make_constrained(spec.amplitude * (v1 + v2), mesh)


def _check_disjoint(mesh: Mesh, s1: tuple, s2: tuple) -> None:
    L = float(mesh.coords[-1])
    (a1, b1), (a2, b2) = sorted([s1, s2])
    if not (0.0 < a1 < b1 < a2 < b2 < 1.0):
        raise PlacementError(f"subdomains {s1} and {s2} must be disjoint, ordered and "
                             f"strictly interior (fractions of L={L})")


def _oscillatory_piece(mesh: Mesh, frac: tuple, k: int) -> np.ndarray:
    """sin(k pi x_hat) supported on the subinterval, snapped to element nodes
    so the piece vanishes identically outside whole elements."""
    L = float(mesh.coords[-1])
    x = mesh.coords
    a, b = frac[0] * L, frac[1] * L
    ia = int(np.searchsorted(x, a - 1e-12))
    ib = int(np.searchsorted(x, b + 1e-12)) - 1
    a_s, b_s = x[ia], x[ib]
    vals = np.sin(k * np.pi * (x - a_s) / (b_s - a_s))
    vals[(x < a_s) | (x > b_s)] = 0.0
    vals[ia] = vals[ib] = 0.0
    return vals


def construct_energy_level(a: float, consts: SobolevConstants,
                           ops: DiscreteOperators, p: float, mesh: Mesh,
                           subdomain1: tuple = (0.1, 0.4),
                           subdomain2: tuple = (0.6, 0.9)) -> Field:
    """Two-bump field with J(u0) = a and strict high-energy-set membership.

    A fixed bump on the second subdomain is scaled so the membership
    inequality holds with margin; an oscillatory piece on the first subdomain
    is root-found in amplitude (raising the frequency as needed) to hit the
    remaining energy. The pieces share no element, so the discrete energy is
    exactly additive.
    """
    if mesh.dim != 1:
        raise PlacementError("energy-level construction is implemented for interval meshes")
    _check_disjoint(mesh, subdomain1, subdomain2)
    L = float(mesh.coords[-1])
    h = mesh.h
    for (fa, fb) in (subdomain1, subdomain2):
        if (fb - fa) * L < 4.0 * h:
            raise PlacementError("subdomains must span at least 4 cells")
    gap = (min(subdomain2) - max(subdomain1)) * L
    if gap < 2.0 * h:
        raise PlacementError("subdomains must be separated by at least 2 cells")

    c2 = consts.b2_threshold_coeff()
    w_piece = _oscillatory_piece(mesh, subdomain2, 1)
    w_l2 = ops.l2_norm_sq(w_piece)

    # scale of the fixed bump: membership margin at least max(1, |a|)
    r_sq = max(2.0 * abs(a), 1.0) / (c2 * w_l2)
    r = math.sqrt(r_sq)
    rw = r * w_piece
    J_rw = 0.5 * ops.grad_norm_sq(rw) - ops.lp_norm_p(rw, p) / p
    target = a - J_rw

    n_cells = mesh.shape[0]
    fa, fb = subdomain1
    cells_1 = int(round((fb - fa) * n_cells))
    k_max = max(cells_1 // 2, 1)
    for k in range(1, k_max + 1):
        phi = _oscillatory_piece(mesh, subdomain1, k)
        C1 = ops.grad_norm_sq(phi)
        C2 = ops.lp_norm_p(phi, p)

        def g(s):
            return 0.5 * s * s * C1 - (s ** p) * C2 / p

        def gprime(s):
            return s * C1 - (s ** (p - 1.0)) * C2

        s_peak = (C1 / C2) ** (1.0 / (p - 2.0))
        g_max = g(s_peak)
        if target <= 0.0:
            s_hi = 2.0 * s_peak
            while g(s_hi) > target:
                s_hi *= 2.0
                if s_hi > 1e150:
                    raise ConstructionError("bracket growth failed on the descending branch")
            bracket = (s_peak, s_hi)
        elif g_max > target * (1.0 + 1e-9):
            bracket = (0.0, s_peak)
        else:
            continue
        s = brentq(lambda x: g(x) - target, *bracket, xtol=1e-300, rtol=8.9e-16)
        # Newton polish on the closed-form energy of the family
        for _ in range(3):
            gp = gprime(s)
            if gp == 0.0:
                break
            s -= (g(s) - target) / gp
        u0 = make_constrained(s * phi + rw, mesh)
        J = energy_J(u0, ops, p)
        if abs(J - a) <= 1e-6 * max(1.0, abs(a)):
            return u0
        raise ConstructionError(
            f"root found but independent energy check missed the target: "
            f"J(u0)={J!r}, a={a!r}, k={k}")
    raise ConstructionError(
        f"no resolvable frequency k <= {k_max} reaches the residual energy "
        f"target {target}; refine the mesh or widen the first subdomain")
