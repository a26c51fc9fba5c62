"""Shared fixtures: assembled operators and constants on standard meshes."""

import numpy as np
import pytest

from blowuplab.constants import estimate_constants
from blowuplab.mesh import build_interval_mesh
from blowuplab.operators import assemble_operators
from blowuplab.problem import ProblemSpec


def make_ops(N=200, p=4.0, L=1.0, gamma0="left"):
    mesh = build_interval_mesh(L, N, gamma0)
    spec = ProblemSpec(n=1, p=p, geometry=(L,), gamma0_tag=gamma0)
    return assemble_operators(mesh, spec)


def random_constrained(ops, rng, smooth=True):
    """Random field vanishing on the constrained nodes; low-frequency sine
    combination so gradients stay moderate."""
    x = ops.mesh.coords / float(ops.mesh.coords[-1])
    if ops.mesh.gamma0_nodes[0] != 0:
        x = 1.0 - x
    vals = np.zeros_like(x)
    for j in range(1, 6):
        vals += rng.normal() * np.sin((j - 0.5) * np.pi * x)
    out = vals.copy()
    out[ops.mesh.gamma0_nodes] = 0.0
    return out


@pytest.fixture(scope="session")
def ops100():
    return make_ops(100)


@pytest.fixture(scope="session")
def ops200():
    return make_ops(200)


@pytest.fixture(scope="session")
def consts100(ops100):
    return estimate_constants(ops100, with_gn=True)


@pytest.fixture(scope="session")
def consts200(ops200):
    return estimate_constants(ops200, with_gn=True)
