import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phclab import geometry as geo
from phclab.errors import OutOfRange, SingularPoint

coord = st.floats(-0.57, 0.57, allow_nan=False)


def point_strategy():
    return st.tuples(st.floats(0, 1), coord, coord, coord).filter(
        lambda p: 1e-3 < p[1] ** 2 + p[2] ** 2 + p[3] ** 2 < 0.98)


def test_omega_vanishes_on_circle():
    assert np.all(geo.omega_matrix([0.3, 0, 0, 0]) == 0)


def test_omega_at_unit_x():
    m = geo.omega_matrix([0.0, 1.0, 0.0, 0.0])
    expect = geo.wedge([1, 0, 0, 0], [0, 1, 0, 0]) + geo.wedge([0, 0, 1, 0], [0, 0, 0, 1])
    assert np.array_equal(m, expect)


def test_omega_antisymmetric():
    m = geo.omega_matrix(geo.random_points(50, 1))
    assert np.array_equal(m, -np.swapaxes(m, -1, -2))


@given(point_strategy())
def test_wedge_square_matches_norm(p):
    g = geo.norm_g(p)
    assert abs(geo.omega_at(p).wedge_self() - 2 * g * g) < 1e-14


def test_jay_at_unit_x():
    J = geo.jay_at([0.0, 1.0, 0.0, 0.0])
    e = np.eye(4)
    assert np.allclose(J @ e[0], -e[1])
    assert np.allclose(J @ e[1], e[0])
    assert np.allclose(J @ e[2], -e[3])
    assert np.allclose(J @ e[3], e[2])


def test_jay_at_unit_z_direction():
    J = geo.jay_at([0.0, 0.0, 0.0, 0.5])
    e = np.eye(4)
    assert np.allclose(J @ e[0], e[3])
    assert np.allclose(J @ e[3], -e[0])
    assert np.allclose(J @ e[1], e[2])


def test_jay_singular_on_circle():
    with pytest.raises(SingularPoint):
        geo.jay_at([0.2, 0.0, 0.0, 0.0])


@given(point_strategy())
@settings(max_examples=200)
def test_jay_squares_to_minus_one(p):
    J = geo.jay_at(p)
    assert np.max(np.abs(J @ J + np.eye(4))) < 1e-12


@given(point_strategy(), st.lists(st.floats(-3, 3), min_size=8, max_size=8))
def test_compatibility(p, vw):
    v, w = np.array(vw[:4]), np.array(vw[4:])
    assert geo.compatibility_residual(p, v, w) < 1e-12 * (1 + np.linalg.norm(v) * np.linalg.norm(w))


def test_compatibility_simple_vectors():
    p = [0.1, 0.3, -0.2, 0.4]
    dt = np.array([1.0, 0, 0, 0])
    assert geo.compatibility_residual(p, dt, dt) < 1e-15
    assert geo.compatibility_residual(p, np.zeros(4), np.zeros(4)) == 0.0


def test_form_norm_is_root_two_g():
    p = geo.random_points(100, 3)
    m = geo.omega_matrix(p)
    norm = np.sqrt(0.5 * np.sum(m * m, axis=(-1, -2)))
    assert np.allclose(norm, math.sqrt(2) * geo.norm_g(p), rtol=1e-14)


def test_action_coords_examples():
    a = geo.to_action_coords([0.4, 1.0 - 1e-12, 0.0, 0.0])
    assert a.f == pytest.approx(0.5) and a.h == 0.0 and a.phi == 0.0
    b = geo.to_action_coords([0.4, 0.0, 0.0, 0.3])
    assert b.on_axis and b.phi is None
    assert b.f == pytest.approx(-0.09) and b.h == 0.0


@given(point_strategy())
def test_action_coords_identities(p):
    a = geo.to_action_coords(np.array(p))
    rho2 = p[1] ** 2 + p[2] ** 2
    assert a.f == pytest.approx(0.5 * (rho2 - 2 * p[3] ** 2), abs=1e-15)
    assert a.h == pytest.approx(p[3] * rho2, abs=1e-15)
    assert a.g ** 2 == pytest.approx(rho2 + 4 * p[3] ** 2, abs=1e-14)


@given(point_strategy())
def test_action_round_trip(p):
    if p[1] ** 2 + p[2] ** 2 < 1e-4:
        return
    a = geo.to_action_coords(np.array(p))
    back = geo.from_action_coords(a.t, a.f, a.h, a.phi)
    assert np.max(np.abs(back - np.array(p))) < 1e-12


def test_action_form_equals_omega():
    p = geo.random_points(1000, 5)
    assert np.max(geo.action_form_residual(p)) < 1e-13


def test_dtheta_is_omega_exactly():
    assert geo.dtheta_check() == 0.0
    assert geo.dtheta_check(geo.random_points(200, 2)) == 0.0


def test_theta_bound_example():
    th = geo.theta_at(np.array([1.0, 1.0 - 1e-12, 0.0, 0.0]))
    assert np.linalg.norm(th) <= math.sqrt(2) / 3 + 1e-12


def test_theta_norm_bound_random():
    p = geo.random_points(2000, 9)
    r = np.sqrt(p[:, 0] ** 2 + np.sum(p[:, 1:] ** 2, axis=1))
    assert np.all(np.linalg.norm(geo.theta_at(p), axis=1) <= r * geo.norm_g(p) / 3 + 1e-14)


def test_theta_norm_identity():
    p = geo.random_points(10_000, 11)
    assert np.max(geo.theta_norm_identity_residual(p)) < 1e-12


def test_point_validation():
    with pytest.raises(OutOfRange):
        geo.CartesianPoint4(0.0, 1.0, 0.0, 0.0)
    assert geo.CartesianPoint4(1.25, 0.1, 0, 0).t == pytest.approx(0.25)


def test_identity_suite_small():
    res = geo.identity_suite(500, seed=4)
    assert max(res.values()) < 1e-12
