"""Assembly of the discrete weak form: mass, stiffness and boundary mass,
plus Gauss quadrature of the nonlinear source on the nodal interpolant."""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConstraintError, InvalidMeshError
from .mesh import Mesh
from .problem import ProblemSpec


def _mass_1d(coords: np.ndarray) -> sp.csr_matrix:
    """Consistent P1 mass matrix on a 1D node array (possibly nonuniform)."""
    n = coords.size
    hs = np.diff(coords)
    main = np.zeros(n)
    main[:-1] += hs / 3.0
    main[1:] += hs / 3.0
    off = hs / 6.0
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def _stiffness_1d(coords: np.ndarray) -> sp.csr_matrix:
    n = coords.size
    hs = np.diff(coords)
    main = np.zeros(n)
    main[:-1] += 1.0 / hs
    main[1:] += 1.0 / hs
    off = -1.0 / hs
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def _zero_rows_cols(mat: sp.csr_matrix, nodes: np.ndarray) -> sp.csr_matrix:
    m = mat.tolil()
    m[nodes, :] = 0.0
    m[:, nodes] = 0.0
    return m.tocsr()


@dataclass(frozen=True)
class DiscreteOperators:
    """M, A, B quadratic forms of the weak formulation on full node vectors.

    Solves and positivity statements refer to the free (non-Gamma0) rows and
    columns; constrained fields carry exact zeros at Gamma0 nodes.
    """

    mesh: Mesh
    spec: ProblemSpec
    M: sp.csr_matrix
    A: sp.csr_matrix
    B: sp.csr_matrix
    quad_order: int
    quad_points: np.ndarray = field(repr=False)   # on [0,1]
    quad_weights: np.ndarray = field(repr=False)  # sum to 1

    @property
    def free_nodes(self) -> np.ndarray:
        mask = np.ones(self.mesh.n_nodes, dtype=bool)
        mask[self.mesh.gamma0_nodes] = False
        return np.flatnonzero(mask)

    @property
    def MB(self) -> sp.csr_matrix:
        return (self.M + self.B).tocsr()

    def check_constrained(self, u: np.ndarray) -> None:
        if u.shape != (self.mesh.n_nodes,):
            raise ConstraintError(f"coefficient vector has shape {u.shape}, "
                                  f"expected ({self.mesh.n_nodes},)")
        g0 = self.mesh.gamma0_nodes
        if g0.size and np.any(u[g0] != 0.0):
            raise ConstraintError("field does not vanish on Gamma0 nodes")

    # quadratic forms -----------------------------------------------------
    def grad_norm_sq(self, u: np.ndarray) -> float:
        return float(u @ (self.A @ u))

    def l2_norm_sq(self, u: np.ndarray) -> float:
        return float(u @ (self.M @ u))

    def trace_norm_sq(self, u: np.ndarray) -> float:
        return float(u @ (self.B @ u))

    def inner_M(self, u, v) -> float:
        return float(u @ (self.M @ v))

    def inner_MB(self, u, v) -> float:
        return float(u @ (self.MB @ v))

    # nonlinear integrals -------------------------------------------------
    def _values_at_quadrature(self, u: np.ndarray):
        """Interpolant values at all quadrature points, with measure weights.

        Returns (vals, wts) flattened over elements; sum(wts * f(vals))
        approximates the integral of f(u_h) over the domain.
        """
        mesh, xq, wq = self.mesh, self.quad_points, self.quad_weights
        if mesh.dim == 1:
            el = mesh.elements
            hs = mesh.coords[el[:, 1]] - mesh.coords[el[:, 0]]
            ul, ur = u[el[:, 0]], u[el[:, 1]]
            vals = ul[:, None] * (1.0 - xq)[None, :] + ur[:, None] * xq[None, :]
            wts = hs[:, None] * wq[None, :]
            return vals, wts
        # 2D bilinear tensor elements
        el = mesh.elements
        x0 = mesh.coords[el[:, 0]]
        x2 = mesh.coords[el[:, 2]]
        areas = (x2[:, 0] - x0[:, 0]) * (x2[:, 1] - x0[:, 1])
        XI, ETA = np.meshgrid(xq, xq, indexing="ij")
        xi, eta = XI.ravel(), ETA.ravel()
        shapes = np.stack([(1 - xi) * (1 - eta), xi * (1 - eta),
                           xi * eta, (1 - xi) * eta])          # (4, nq)
        uel = u[el]                                            # (n_el, 4)
        vals = uel @ shapes                                    # (n_el, nq)
        W2 = (wq[:, None] * wq[None, :]).ravel()
        wts = areas[:, None] * W2[None, :]
        return vals, wts

    def lp_norm_p(self, u: np.ndarray, p: float) -> float:
        """Quadrature value of the integral of |u_h|^p."""
        vals, wts = self._values_at_quadrature(u)
        return float(np.sum(wts * np.abs(vals) ** p))

    def source_vector(self, u: np.ndarray, p: float) -> np.ndarray:
        """Load vector of the superlinear source: entries are the quadrature
        values of the integral of |u_h|^(p-2) u_h phi_i."""
        mesh, xq, wq = self.mesh, self.quad_points, self.quad_weights
        vals, wts = self._values_at_quadrature(u)
        f = np.abs(vals) ** (p - 2.0) * vals if p != 2.0 else vals
        out = np.zeros(mesh.n_nodes)
        el = mesh.elements
        if mesh.dim == 1:
            contrib = wts * f
            np.add.at(out, el[:, 0], contrib @ (1.0 - xq))
            np.add.at(out, el[:, 1], contrib @ xq)
            return out
        XI, ETA = np.meshgrid(xq, xq, indexing="ij")
        xi, eta = XI.ravel(), ETA.ravel()
        shapes = np.stack([(1 - xi) * (1 - eta), xi * (1 - eta),
                           xi * eta, (1 - xi) * eta])          # (4, nq)
        contrib = (wts * f) @ shapes.T                         # (n_el, 4)
        np.add.at(out, el, contrib)
        return out

    def dump(self) -> dict:
        """Triplet-list debug representation."""
        def triplets(m):
            c = m.tocoo()
            return {"row": c.row.tolist(), "col": c.col.tolist(),
                    "val": c.data.tolist()}
        return {
            "mesh": {
                "dim": self.mesh.dim,
                "coords": np.asarray(self.mesh.coords).tolist(),
                "elements": self.mesh.elements.tolist(),
                "h": self.mesh.h,
                "gamma0_nodes": self.mesh.gamma0_nodes.tolist(),
                "gamma1_nodes": self.mesh.gamma1_nodes.tolist(),
            },
            "quad_order": self.quad_order,
            "M": triplets(self.M), "A": triplets(self.A), "B": triplets(self.B),
        }


def assemble_operators(mesh: Mesh, spec: ProblemSpec) -> DiscreteOperators:
    """P1 (1D) / bilinear tensor (2D) assembly of M, A and the Gamma1 mass B."""
    if mesh.dim != spec.n:
        raise InvalidMeshError(f"mesh dimension {mesh.dim} does not match spec n={spec.n}")
    q = max(2, math.ceil(spec.p) + 1)
    gl_x, gl_w = np.polynomial.legendre.leggauss(q)
    xq = 0.5 * (gl_x + 1.0)
    wq = 0.5 * gl_w

    if mesh.dim == 1:
        M = _mass_1d(mesh.coords)
        A = _stiffness_1d(mesh.coords)
        B = sp.lil_matrix((mesh.n_nodes, mesh.n_nodes))
        for i in mesh.gamma1_nodes:
            B[i, i] = 1.0            # point trace on the Gamma1 endpoint
        return DiscreteOperators(mesh, spec, M.tocsr(), A.tocsr(), B.tocsr(), q, xq, wq)

    Nx, Ny = mesh.shape
    Lx = float(mesh.coords[:, 0].max())
    Ly = float(mesh.coords[:, 1].max())
    cx = np.linspace(0.0, Lx, Nx + 1)
    cy = np.linspace(0.0, Ly, Ny + 1)
    Mx, My = _mass_1d(cx), _mass_1d(cy)
    Ax, Ay = _stiffness_1d(cx), _stiffness_1d(cy)
    M = sp.kron(My, Mx, format="csr")
    A = (sp.kron(My, Ax) + sp.kron(Ay, Mx)).tocsr()

    # boundary mass over Gamma1 edges: 1D mass along each edge's node line
    g0_edges = spec.gamma0_edges
    B = sp.lil_matrix((mesh.n_nodes, mesh.n_nodes))
    nx1 = Nx + 1

    def add_edge(indices, line_coords):
        bm = _mass_1d(line_coords).tocoo()
        idx = np.asarray(indices)
        for r, c, v in zip(bm.row, bm.col, bm.data):
            B[idx[r], idx[c]] += v

    edge_index = {
        "left": [j * nx1 for j in range(Ny + 1)],
        "right": [j * nx1 + Nx for j in range(Ny + 1)],
        "bottom": list(range(Nx + 1)),
        "top": [Ny * nx1 + i for i in range(Nx + 1)],
    }
    edge_line = {"left": cy, "right": cy, "bottom": cx, "top": cx}
    for e in ("left", "right", "bottom", "top"):
        if e not in g0_edges:
            add_edge(edge_index[e], edge_line[e])
    B = _zero_rows_cols(B.tocsr(), mesh.gamma0_nodes)
    return DiscreteOperators(mesh, spec, M, A, B, q, xq, wq)
