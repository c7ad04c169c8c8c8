import numpy as np
import pytest

from conftest import cusp_boundary_oracle, cusp_dilated_oracle, flat_boundary_oracle
from hyperconvex.errors import DomainError, ParameterError, UnsupportedKindError
from hyperconvex.geometry import (
    Annulus,
    Ball,
    GraphDomain,
    Grid,
    HartogsTriangle,
    Polydisc,
    SublevelDomain,
    boundary_distance,
    brute_force_distance,
    contains,
    dilated_domain,
    sampled_graph,
    sublevel_region,
    verify_dilation_bounds,
)


def test_contains_examples(flat):
    assert contains(Ball([0, 0, 0, 0], 1.0), [0, 0, 0, 0])
    # z1 = 0.5, z2 = 0.4 violates |z1| < |z2|
    assert not contains(HartogsTriangle(), [0.5, 0.0, 0.4, 0.0])
    x = np.sqrt(0.25 - 0.01)
    assert contains(flat, [x, -0.1])


def test_contains_outside_box_raises():
    with pytest.raises(DomainError):
        contains(Ball([0, 0], 1.0), [3.0, 0.0])


def test_boundary_distance_examples(flat, cusp):
    assert boundary_distance(Ball([0, 0], 1.0), [0, 0]) == 1.0
    assert boundary_distance(flat, [0.0, -0.3]) == pytest.approx(0.3, abs=1e-12)
    oracle = brute_force_distance(cusp_boundary_oracle(), [[0.0, -0.1]])[0]
    assert boundary_distance(cusp, [0.0, -0.1]) == pytest.approx(oracle, abs=1e-3)


def test_boundary_distance_outside_raises(flat):
    with pytest.raises(DomainError):
        boundary_distance(flat, [0.0, 0.2])


@pytest.mark.parametrize(
    "domain, z, expected",
    [
        (Annulus(0.25, 1.0), [0.5, 0.0], 0.25),
        (Annulus(0.25, 1.0), [0.0, 0.9], 0.1),
        (Polydisc([1.0, 0.5]), [0.2, 0.0, 0.0, 0.1], 0.4),
        (HartogsTriangle(), [0.0, 0.0, 0.5, 0.0], 0.5 / np.sqrt(2)),
        (HartogsTriangle(), [0.1, 0.0, 0.9, 0.0], 0.1),
    ],
)
def test_closed_form_distances(domain, z, expected):
    assert boundary_distance(domain, z) == pytest.approx(expected, abs=1e-12)


def test_hartogs_distance_against_samples():
    rng = np.random.default_rng(3)
    d = HartogsTriangle()
    # boundary pieces: |z2| = 1 with |z1| <= 1, and |z1| = |z2|
    a = rng.uniform(0, 2 * np.pi, (200_000, 2))
    r = rng.uniform(0, 1, 200_000)
    outer = np.column_stack([r * np.cos(a[:, 0]), r * np.sin(a[:, 0]), np.cos(a[:, 1]), np.sin(a[:, 1])])
    cone = np.column_stack([r * np.cos(a[:, 0]), r * np.sin(a[:, 0]), r * np.cos(a[:, 1]), r * np.sin(a[:, 1])])
    bd = np.vstack([outer, cone])
    pts = np.array([[0.05, 0.0, 0.6, 0.0], [0.0, 0.2, 0.0, 0.7], [0.3, 0.1, 0.2, -0.6]])
    assert np.all(d.contains_points(pts))
    got = d.distance_points(pts)
    ref = brute_force_distance(bd, pts)
    assert np.all(got <= ref + 1e-12)
    assert np.allclose(got, ref, atol=0.05)


def test_sublevel_region_examples():
    ball = Ball([0, 0], 1.0)
    g = Grid.covering(ball, h=1 / 32)
    tiny = sublevel_region(g, 1e-12)
    assert np.array_equal(tiny.interior, g.inside)
    pts = g.points().reshape(*g.shape, 2)
    half = sublevel_region(g, 0.5)
    expected = g.inside & (1.0 - np.linalg.norm(pts, axis=-1) > 0.5)
    assert np.array_equal(half.interior, expected)
    ann = Grid.covering(Annulus(0.25, 1.0), h=1 / 32)
    assert sublevel_region(ann, 0.375).empty_interior


def test_sublevel_region_band_and_shell():
    g = Grid.covering(Ball([0, 0], 1.0), h=1 / 32)
    reg = sublevel_region(g, 0.2, alpha=0.5)
    d = g.delta
    assert np.all(d[reg.shell] <= 0.1)
    assert np.all(np.abs(d[reg.band] - 0.2) <= g.h)
    assert reg.band_halfwidth == g.h


def test_flat_dilation_is_translate(flat):
    dil = dilated_domain(flat, 0.1)
    assert dil.radius == pytest.approx(1.1)
    assert contains(dil, [0.0, 0.05])
    assert not contains(dil, [0.0, 0.11])
    assert boundary_distance(dil, [0.0, -0.2]) == pytest.approx(0.3, abs=1e-12)


def test_dilation_nesting(cusp):
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1.2, 1.2, (5000, 2))
    small = dilated_domain(cusp, 0.05).contains_points(pts)
    large = dilated_domain(cusp, 0.1).contains_points(pts)
    base = cusp.contains_points(pts)
    assert np.all(large[small])
    assert np.all(small[base])


def test_dilation_errors(flat):
    with pytest.raises(UnsupportedKindError):
        dilated_domain(Ball([0, 0], 1.0), 0.1)
    with pytest.raises(ParameterError):
        dilated_domain(flat, 0.0)
    with pytest.raises(ParameterError):
        dilated_domain(flat, 0.6)  # leaves the default slice radius 1.5


def test_cusp_dilation_lower_bound_oracle():
    base = cusp_boundary_oracle(20_000)
    for t in (0.05, 0.1, 0.25, 0.5):
        oracle = brute_force_distance(cusp_dilated_oracle(t), base)
        assert np.all(oracle >= 0.25 * t**2 - 1e-4)


def test_certificate_flat_is_tight(flat):
    rep = verify_dilation_bounds(flat, [0.01, 0.05, 0.1], beta_dil=1.0)
    assert rep.passed
    assert abs(rep.worst_lower_margin) < 1e-9
    assert abs(rep.worst_upper_margin) < 1e-9


def test_certificate_cusp(cusp):
    assert cusp.gamma == 2.0 and cusp.beta_dil == 0.25
    rep = verify_dilation_bounds(cusp, [0.01, 0.05, 0.1, 0.3, 0.5])
    assert rep.passed
    assert rep.worst_upper_margin >= -1e-9


def test_certificate_lipschitz(lipschitz_graph):
    assert lipschitz_graph.gamma == 1.0 and lipschitz_graph.beta_dil == 0.5
    rep = verify_dilation_bounds(lipschitz_graph, [0.01, 0.05, 0.1, 0.3])
    assert rep.passed
    assert rep.worst_upper_margin >= -1e-9


def test_certificate_reports_violation(cusp):
    rep = verify_dilation_bounds(cusp, [0.1], beta_dil=10.0)
    assert not rep.passed
    assert rep.worst_lower_margin < 0


def test_holder_violation_rejected():
    with pytest.raises(ParameterError):
        GraphDomain("neg_sqrt_abs", 1.0, 1.0, 1.0)
    with pytest.raises(ParameterError):
        GraphDomain("neg_abs", 1.0, 0.5, 1.0)


def test_sampled_graph_domain():
    x = np.linspace(-1.5, 1.5, 301)
    g = sampled_graph(np.column_stack([x, -np.abs(x)]), 1)
    d = GraphDomain(g, 1.0, 1.0, 1.0)
    ref = GraphDomain("neg_abs", 1.0, 1.0, 1.0)
    pts = np.array([[0.0, -0.3], [0.2, -0.5], [-0.4, -0.7]])
    assert np.allclose(d.distance_points(pts), ref.distance_points(pts), atol=1e-9)


@pytest.mark.parametrize("name", ["flat", "cusp"])
def test_grid_delta_matches_brute_force(name, flat, cusp):
    d = {"flat": flat, "cusp": cusp}[name]
    oracle = flat_boundary_oracle() if name == "flat" else cusp_boundary_oracle()
    g = Grid.covering(d, h=1 / 32)
    pts, delta = g.inside_points()
    assert np.all(delta > 0)
    assert np.max(np.abs(delta - brute_force_distance(oracle, pts))) <= 2 * g.h


@pytest.mark.parametrize("name", ["flat", "cusp"])
def test_distance_consistency_random_points(name, flat, cusp):
    d = {"flat": flat, "cusp": cusp}[name]
    oracle = flat_boundary_oracle(400_000) if name == "flat" else cusp_boundary_oracle(400_000)
    spacing = np.max(np.linalg.norm(np.diff(oracle[: len(oracle) // 4], axis=0), axis=1))
    rng = np.random.default_rng(7)
    pts = rng.uniform(-1, 0, (4000, 2))
    pts = pts[d.contains_points(pts)][:100]
    assert len(pts) == 100
    err = np.abs(d.distance_points(pts) - brute_force_distance(oracle, pts))
    assert np.max(err) <= 2 * spacing


def test_membership_distance_consistency(cusp):
    g = Grid.covering(cusp, h=1 / 64)
    pts = g.points()
    inside = cusp.contains_points(pts)
    assert np.all(cusp.distance_points(pts[inside]) > -1e-12)
    assert np.array_equal(g.inside.ravel(), inside & (g.delta.ravel() > 0))


def test_sublevel_domain():
    d = SublevelDomain(Ball([0, 0], 1.0), 0.25)
    assert contains(d, [0.5, 0.0])
    assert not contains(d, [0.8, 0.0])
    assert boundary_distance(d, [0.5, 0.0]) == pytest.approx(0.25)


def test_grid_arrays_read_only():
    g = Grid.covering(Ball([0, 0], 1.0), h=0.25)
    with pytest.raises(ValueError):
        g.delta[0, 0] = 1.0
    assert g.h > 0
    with pytest.raises(ParameterError):
        Grid(1, 0.0, [0, 0], [2, 2])
