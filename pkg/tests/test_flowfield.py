from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nonsaddle.flowfield import (
    ConfigError,
    PhaseSpace,
    catalogue,
    descriptor,
    flow_map,
    flow_map_batch,
    make_spec,
    omega_limit,
    trajectory,
    velocity,
    velocity_batch,
)
from nonsaddle.grid import window_for_region

EXPECTED_IDS = [
    "torus_homoclinic",
    "saddle_node_torus",
    "mendelson",
    "planar_cycle",
    "annulus_nonsaddle",
    "product_circle",
    "planar_saddle",
    "robust_family",
]


def planar(fid, **params):
    return make_spec(fid, window_for_region(descriptor(fid).block), params or None)


def test_catalogue_order_and_docs():
    ids = [d.field_id for d in catalogue()]
    assert ids[:8] == EXPECTED_IDS
    assert ids == [d.field_id for d in catalogue()]
    for d in catalogue():
        assert d.formula and d.block
        assert set(d.param_doc) == set(d.params)


def test_unknown_flow_and_parameter():
    with pytest.raises(ConfigError):
        descriptor("no_such_flow")
    with pytest.raises(ConfigError):
        make_spec("planar_cycle", window_for_region(descriptor("planar_cycle").block), {"bogus": 1})
    with pytest.raises(ConfigError):
        make_spec("planar_cycle")  # planar flows need a window


def test_bad_geometry():
    with pytest.raises(ConfigError):
        PhaseSpace((0.0, 0.0), (0.0, 1.0))
    with pytest.raises(ConfigError):
        PhaseSpace((0.0, 0.0), (np.inf, 1.0))


@pytest.mark.parametrize("fid", [d.field_id for d in catalogue()])
def test_documented_fixed_points_are_rest_points(fid):
    d = descriptor(fid)
    spec = make_spec(fid) if d.space is not None else planar(fid)
    for p in d.fixed_point_samples:
        assert np.linalg.norm(velocity(spec, p)) <= 1e-12


def test_saddle_node_circle_is_fixed():
    spec = make_spec("saddle_node_torus")
    th = np.linspace(0, 2 * np.pi, 50)
    pts = 0.5 * np.stack([np.cos(th), np.sin(th)], 1)
    assert np.abs(velocity_batch(spec, pts)).max() <= 1e-12


def test_planar_cycle_matches_closed_form():
    # r' = r(1 - r^2), theta' = 1  =>  r(t)^2 = 1 / (1 + (1/r0^2 - 1) e^{-2t})
    spec = planar("planar_cycle", sigma=1.0)
    r0, t = 0.3, 1.7
    res = flow_map(spec, (r0, 0.0), t, step=1e-3)
    r = np.hypot(*res.point)
    r_exact = 1.0 / np.sqrt(1.0 + (1.0 / r0 ** 2 - 1.0) * np.exp(-2 * t))
    assert abs(r - r_exact) < 1e-10
    assert abs(np.arctan2(res.point[1], res.point[0]) - t) < 1e-10


def test_linear_saddle_matches_exponentials():
    spec = planar("planar_saddle")
    res = flow_map(spec, (0.1, 0.8), 1.0, step=1e-3)
    assert np.allclose(res.point, [0.1 * np.e, 0.8 / np.e], atol=1e-11)


def test_reversal_is_exact():
    for fid in ("torus_homoclinic", "mendelson", "annulus_nonsaddle"):
        d = descriptor(fid)
        spec = make_spec(fid) if d.space is not None else planar(fid)
        pts = np.random.default_rng(1).uniform(-0.9, 0.9, (50, 2)) + spec.space.center
        fwd, _, _ = flow_map_batch(spec.reverse(), pts, 0.7, 0.01)
        back, _, _ = flow_map_batch(spec, pts, -0.7, 0.01)
        assert np.array_equal(fwd, back)


def test_escape_is_reported():
    spec = planar("planar_saddle")
    res = flow_map(spec, (1.0, 0.0), 50.0, step=1e-2)
    assert res.escaped and res.exit_time is not None and res.exit_time < 50.0
    tr = trajectory(spec, (1.0, 0.0), 50.0, 1e-2)
    assert tr.escaped


def test_torus_points_are_wrapped():
    spec = make_spec("product_circle")
    res = flow_map(spec, (0.9, 0.5), 0.5, step=1e-3)
    assert 0.0 <= res.point[0] < 1.0 and 0.0 <= res.point[1] < 1.0


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 1.5), st.floats(0.1, 1.0), st.floats(0.1, 1.0))
def test_flow_composition(r0, t1, t2):
    spec = planar("planar_cycle", sigma=1.0)
    p = (r0, 0.0)
    direct = flow_map(spec, p, t1 + t2, step=1e-3).point
    two = flow_map(spec, flow_map(spec, p, t1, step=1e-3).point, t2, step=1e-3).point
    assert np.allclose(direct, two, atol=1e-8)


def test_mendelson_omega_limit():
    spec = planar("mendelson")
    om = omega_limit(spec, (0.8, 0.3), horizon=400.0, burn_in=300.0)
    assert len(om) >= 1
    assert np.abs(om - np.array([1.0, 0.0])).max() < 0.05


def test_omega_limit_of_cycle_is_the_circle():
    spec = planar("planar_cycle", sigma=1.0)
    om = omega_limit(spec, (0.2, 0.0), horizon=60.0, burn_in=30.0)
    assert np.allclose(np.hypot(om[:, 0], om[:, 1]), 1.0, atol=1e-6)
    assert len(om) > 10  # the whole circle, not a point
