"""Interval and tensor-product rectangle meshes with tagged boundary nodes."""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidMeshError, InvalidPartitionError

EDGES = ("left", "right", "bottom", "top")


@dataclass(frozen=True)
class Mesh:
    dim: int
    coords: np.ndarray      # (n_nodes,) in 1D, (n_nodes, 2) in 2D, x-fastest ordering
    elements: np.ndarray    # (n_el, 2) segments or (n_el, 4) quads (ccw)
    h: float                # maximum element diameter
    gamma0_nodes: np.ndarray
    gamma1_nodes: np.ndarray
    shape: tuple = ()       # (N,) or (Nx, Ny) cell counts

    @property
    def n_nodes(self) -> int:
        return self.coords.shape[0]

    def fingerprint(self) -> str:
        g0 = ",".join(map(str, self.gamma0_nodes.tolist()))
        return f"dim={self.dim};shape={self.shape};nodes={self.n_nodes};h={self.h!r};g0={g0}"


def _check_partition(mesh: Mesh) -> Mesh:
    g0, g1 = set(mesh.gamma0_nodes.tolist()), set(mesh.gamma1_nodes.tolist())
    if not g0:
        raise InvalidPartitionError("Gamma0 must be nonempty")
    if g0 & g1:
        raise InvalidPartitionError("Gamma0 and Gamma1 share nodes")
    return mesh


def build_interval_mesh(L: float, N: int, gamma0_side: str = "left") -> Mesh:
    """Equispaced N-cell mesh of (0, L); one endpoint is Gamma0, the other Gamma1."""
    if N < 1:
        raise InvalidMeshError(f"cell count must be >= 1, got {N}")
    if L <= 0:
        raise InvalidMeshError(f"interval length must be positive, got {L}")
    if gamma0_side not in ("left", "right"):
        raise InvalidPartitionError(f"gamma0_side must be left or right, got {gamma0_side!r}")
    coords = np.linspace(0.0, L, N + 1)
    elements = np.column_stack([np.arange(N), np.arange(1, N + 1)])
    if gamma0_side == "left":
        g0, g1 = np.array([0]), np.array([N])
    else:
        g0, g1 = np.array([N]), np.array([0])
    return _check_partition(Mesh(1, coords, elements, L / N, g0, g1, (N,)))


def build_rectangle_mesh(Lx: float, Ly: float, Nx: int, Ny: int,
                         gamma0_edges) -> Mesh:
    """Tensor-product bilinear mesh of (0,Lx)x(0,Ly).

    Whole edges are assigned to Gamma0 or Gamma1; corner nodes shared by a
    Gamma0 edge and a Gamma1 edge go to Gamma0 (the constrained set), since
    the disjoint-closure assumption cannot hold exactly on a polygon.
    """
    if Nx < 1 or Ny < 1 or Lx <= 0 or Ly <= 0:
        raise InvalidMeshError("rectangle extents and cell counts must be positive")
    g0_edges = tuple(gamma0_edges)
    if not g0_edges:
        raise InvalidPartitionError("Gamma0 edge set must be nonempty")
    bad = [e for e in g0_edges if e not in EDGES]
    if bad:
        raise InvalidPartitionError(f"unknown edges {bad}; choose from {EDGES}")
    if set(g0_edges) == set(EDGES):
        raise InvalidPartitionError("Gamma0 cannot be the whole boundary (Gamma1 empty edge set)")

    x = np.linspace(0.0, Lx, Nx + 1)
    y = np.linspace(0.0, Ly, Ny + 1)
    X, Y = np.meshgrid(x, y)           # rows are y-levels, x fastest
    coords = np.column_stack([X.ravel(), Y.ravel()])

    def node(i, j):
        return j * (Nx + 1) + i

    quads = []
    for j in range(Ny):
        for i in range(Nx):
            quads.append([node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)])
    elements = np.array(quads)

    edge_nodes = {
        "left": {node(0, j) for j in range(Ny + 1)},
        "right": {node(Nx, j) for j in range(Ny + 1)},
        "bottom": {node(i, 0) for i in range(Nx + 1)},
        "top": {node(i, Ny) for i in range(Nx + 1)},
    }
    g0 = set()
    for e in g0_edges:
        g0 |= edge_nodes[e]
    g1 = set()
    for e in EDGES:
        if e not in g0_edges:
            g1 |= edge_nodes[e]
    g1 -= g0                           # corner convention: constrained set wins
    hx, hy = Lx / Nx, Ly / Ny
    h = float(np.hypot(hx, hy))
    mesh = Mesh(2, coords, elements, h,
                np.array(sorted(g0)), np.array(sorted(g1)), (Nx, Ny))
    return _check_partition(mesh)
