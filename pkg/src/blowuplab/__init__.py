"""Numerical laboratory for a semilinear heat equation with superlinear
interior source and linear dynamic boundary dissipation."""

from .analysis import (Classification, classify_initial, invariance_audit,
                       lower_bound_T, upper_bound_T)
from .constants import (SobolevConstants, derived_constants, estimate_B1,
                        estimate_constants, estimate_S1, estimate_S2,
                        estimate_S3_GN, well_depth_d)
from .dynamics import (BlowupVerdict, IntegratorConfig, TrajectoryRecord,
                       concavity_monitor, estimate_blowup_time, levine_bound,
                       simulate, step)
from .fields import Field, make_constrained
from .functionals import (EnergyReport, energy_J, identity_residuals,
                          make_report, nehari_K, nehari_scale, rho)
from .initdata import InitialDataSpec, construct_energy_level, make_field
from .mesh import Mesh, build_interval_mesh, build_rectangle_mesh
from .operators import DiscreteOperators, assemble_operators
from .problem import ProblemSpec

__all__ = [
    "Classification", "classify_initial", "invariance_audit", "lower_bound_T",
    "upper_bound_T", "SobolevConstants", "derived_constants", "estimate_B1",
    "estimate_constants", "estimate_S1", "estimate_S2", "estimate_S3_GN",
    "well_depth_d", "BlowupVerdict", "IntegratorConfig", "TrajectoryRecord",
    "concavity_monitor", "estimate_blowup_time", "levine_bound", "simulate",
    "step", "Field", "make_constrained", "EnergyReport", "energy_J",
    "identity_residuals", "make_report", "nehari_K", "nehari_scale", "rho",
    "InitialDataSpec", "construct_energy_level", "make_field", "Mesh",
    "build_interval_mesh", "build_rectangle_mesh", "DiscreteOperators",
    "assemble_operators", "ProblemSpec",
]

__version__ = "0.1.0"
