import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperconvex.barriers import BarrierParams
from hyperconvex.bounds import constant_kappa_bound, decay_bound_integral, holder_rate_exponent, lipschitz_tau
from hyperconvex.cli import parse_config
from hyperconvex.envelope import ScalarField, harmonic_oracle
from hyperconvex.errors import ParameterError
from hyperconvex.geometry import Ball, GraphDomain, Grid, dilated_domain
from hyperconvex.harness import decay_profile

CUSP = GraphDomain("neg_sqrt_abs", 0.5, 1.0, 1.0)
LIP = GraphDomain("neg_abs", 1.0, 1.0, 1.0)
GRID = Grid.covering(Ball([0.0, 0.0], 1.0), h=1 / 16)

unit = st.floats(0.01, 0.99)


@settings(max_examples=30, deadline=None)
@given(t=st.floats(1e-3, 0.5), seed=st.integers(0, 2**16), which=st.sampled_from([CUSP, LIP]))
def test_dilation_distance_sandwich(t, seed, which):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1, 0.2, (200, 2))
    pts = pts[which.contains_points(pts)]
    d = which.distance_points(pts)
    dd = dilated_domain(which, t).distance_points(pts)
    assert np.all(d <= dd + 1e-12)
    assert np.all(dd <= d + t + 1e-12)


@settings(max_examples=50, deadline=None)
@given(k0=unit, alpha=st.floats(0.05, 0.9), frac=st.floats(0.01, 1.0))
def test_constant_kappa_bound_closed_form(k0, alpha, frac):
    r0 = 0.1
    r = frac * alpha * r0
    b = decay_bound_integral(lambda t: k0, r, r0, alpha=alpha)
    assert 0 < b.value <= 1
    assert abs(b.value - constant_kappa_bound(k0, r, r0, alpha)) <= 1e-10


@settings(max_examples=30, deadline=None)
@given(k0=unit, alpha=st.floats(0.05, 0.9), f1=st.floats(0.01, 1.0), f2=st.floats(0.01, 1.0))
def test_bound_monotone_in_r(k0, alpha, f1, f2):
    lo, hi = sorted((f1, f2))
    r0 = 0.1
    b1 = decay_bound_integral(lambda t: k0, lo * alpha * r0, r0, alpha=alpha)
    b2 = decay_bound_integral(lambda t: k0, hi * alpha * r0, r0, alpha=alpha)
    assert b1.value <= b2.value + 1e-12


@given(alpha=unit, eps=unit, gamma=st.floats(1.01, 5.0))
def test_holder_exponent_below_supremal(alpha, eps, gamma):
    p = BarrierParams(alpha=alpha, epsilon=eps, gamma=gamma)
    if alpha + eps >= 1:
        with pytest.raises(ParameterError):
            holder_rate_exponent(p)
        return
    e = holder_rate_exponent(p)
    assert 0 < e.exponent < e.supremal


@given(alpha=unit, eps=unit, c=st.floats(0.0, 3.0))
def test_lipschitz_tau_sign(alpha, eps, c):
    p = BarrierParams(alpha=alpha, epsilon=eps, c_demailly=c)
    if math.log((1 + eps) / (alpha + eps)) - c <= 0:
        with pytest.raises(ParameterError):
            lipschitz_tau(p)
    else:
        assert lipschitz_tau(p) > 0


@given(s0=st.floats(0.05, 0.95), seed=st.integers(0, 2**16))
def test_oracle_range(s0, seed):
    pts = np.random.default_rng(seed).uniform(-0.7, 0.7, (100, 2))
    v = harmonic_oracle(pts, s0)
    assert np.all((v >= -1) & (v <= 0))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**16))
def test_profile_monotone_for_any_field(seed):
    vals = np.where(GRID.inside, -np.random.default_rng(seed).uniform(0, 1, GRID.shape), np.nan)
    prof = decay_profile(ScalarField(GRID, vals, np.zeros(GRID.shape, dtype=bool)), np.geomspace(0.07, 0.9, 8))
    assert prof.monotone


keys = st.sampled_from(["kind", "n", "center", "radius", "inner", "outer"])
values = st.text(alphabet="abcxyz0123456789.,-", min_size=1, max_size=12)


@given(items=st.dictionaries(keys, values, min_size=1))
def test_config_round_trip(items):
    text = "[domain]\n" + "".join(f"{k} = {v}\n" for k, v in items.items())
    cfg = parse_config(text)
    assert cfg.sections["domain"] == items
    for i, k in enumerate(items, start=2):
        assert cfg.lines[("domain", k)] == i
