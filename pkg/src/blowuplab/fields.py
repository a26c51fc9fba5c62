"""Spatial states: nodal coefficient vectors constrained to vanish on Gamma0."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConstraintError
from .mesh import Mesh


@dataclass(frozen=True)
class Field:
    coefficients: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "coefficients",
                           np.ascontiguousarray(self.coefficients, dtype=float))

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.coefficients))) if self.coefficients.size else 0.0


def make_constrained(values: np.ndarray, mesh: Mesh, time: float = 0.0) -> Field:
    """Field from nodal values with Gamma0 entries forced to exact zero."""
    v = np.array(values, dtype=float)
    if v.shape != (mesh.n_nodes,):
        raise ConstraintError(f"expected {mesh.n_nodes} nodal values, got shape {v.shape}")
    v[mesh.gamma0_nodes] = 0.0
    return Field(v, time)
