import numpy as np
import pytest

from hyperconvex.envelope import solve_envelope_grid
from hyperconvex.geometry import Ball, GraphDomain, Grid


@pytest.fixture(scope="session")
def unit_disc():
    return Ball([0.0, 0.0], 1.0)


@pytest.fixture(scope="session")
def disc_field(unit_disc):
    """Envelope of {|z| <= 0.25} in the unit disc at h = 1/64."""
    grid = Grid.covering(unit_disc, h=1 / 64)
    return solve_envelope_grid(unit_disc, Ball([0.0, 0.0], 0.25), grid, tol=1e-12)


@pytest.fixture(scope="session")
def flat():
    return GraphDomain("zero", 1.0, 1.0, 1.0)


@pytest.fixture(scope="session")
def cusp():
    return GraphDomain("neg_sqrt_abs", 0.5, 1.0, 1.0)


@pytest.fixture(scope="session")
def lipschitz_graph():
    return GraphDomain("neg_abs", 1.0, 1.0, 1.0)


def cusp_boundary_oracle(count=100_000, radius=1.0):
    """Dense boundary samples of {|z| < R, y < -sqrt|x|}, parametrized by depth along the cusp."""
    s = np.linspace(0.0, 1.0, count // 4)
    branch = np.column_stack([s**2, -s])
    graph = np.vstack([branch, branch * [-1.0, 1.0]])
    graph = graph[np.hypot(*graph.T) <= radius]
    phi = np.linspace(-np.pi, np.pi, count // 2, endpoint=False)
    circle = radius * np.column_stack([np.cos(phi), np.sin(phi)])
    cap = circle[circle[:, 1] <= -np.sqrt(np.abs(circle[:, 0]))]
    return np.vstack([graph, cap])


def flat_boundary_oracle(count=100_000, radius=1.0, lift=0.0):
    """Samples of the boundary of {|z| < R, y < lift}."""
    x = np.linspace(-radius, radius, count // 2)
    x = x[np.abs(x) <= np.sqrt(max(radius**2 - lift**2, 0.0))]
    seg = np.column_stack([x, np.full_like(x, lift)])
    phi = np.linspace(-np.pi, np.pi, count // 2, endpoint=False)
    circle = radius * np.column_stack([np.cos(phi), np.sin(phi)])
    return np.vstack([seg, circle[circle[:, 1] <= lift]])


def cusp_dilated_oracle(s, count=400_000):
    """Boundary samples of the cusp dilation: the graph lifted by ``s`` inside radius ``1 + s``, plus the cap."""
    R = 1.0 + s
    u = np.linspace(0.0, np.sqrt(R), count // 4)
    branch = np.column_stack([u**2, s - u])
    graph = np.vstack([branch, branch * [-1.0, 1.0]])
    graph = graph[np.hypot(*graph.T) <= R]
    phi = np.linspace(-np.pi, np.pi, count // 2, endpoint=False)
    circle = R * np.column_stack([np.cos(phi), np.sin(phi)])
    cap = circle[circle[:, 1] <= s - np.sqrt(np.abs(circle[:, 0]))]
    return np.vstack([graph, cap])
