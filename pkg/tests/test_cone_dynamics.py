import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phclab import cone_dynamics as cd
from phclab.errors import OutOfRange, TargetOutOfRange

admissible_c = st.floats(1e-3, cd.C_MAX - 1e-3)


def test_roots_at_endpoint():
    r = cd.cubic_roots(cd.C_MAX)
    assert r.u_min == pytest.approx(1 / math.sqrt(3), abs=1e-7)
    assert r.u_max == pytest.approx(1 / math.sqrt(3), abs=1e-7)
    assert r.u_neg == pytest.approx(-2 / math.sqrt(3), abs=1e-12)


def test_roots_near_endpoint_expansion():
    a = 1e-4
    r = cd.cubic_roots(cd.C_MAX - a)
    s3 = 1 / math.sqrt(3)
    assert r.u_max == pytest.approx(s3 + 3 ** -0.25 * math.sqrt(a) - a / 6, abs=5 * a**1.5)
    assert r.u_min == pytest.approx(s3 - 3 ** -0.25 * math.sqrt(a) - a / 6, abs=5 * a**1.5)
    assert r.u_neg == pytest.approx(-2 * s3 + a / 3, abs=5 * a**2)


def test_roots_small_c():
    c = 1e-3
    r = cd.cubic_roots(c)
    assert r.u_min == pytest.approx(c, abs=2 * c**3)
    assert r.u_max == pytest.approx(1.0, abs=1e-3)


@given(admissible_c)
def test_roots_solve_cubic(c):
    r = cd.cubic_roots(c)
    for x in (r.u_min, r.u_max, r.u_neg):
        assert abs(x**3 - x + c) < 1e-13
    assert 0 < r.u_min <= r.u_max and r.u_neg < 0


def test_param_range():
    with pytest.raises(OutOfRange):
        cd.cubic_roots(0.5)
    with pytest.raises(OutOfRange):
        cd.ConeParam(0.0)


def test_constant_solution_at_endpoint():
    tr = cd.integrate(cd.C_MAX, cd.U_FIXED, 0.0, (0, 50))
    assert np.max(np.abs(tr.u - cd.U_FIXED)) < 1e-10


def test_turning_points_match_roots():
    c = 0.2
    r = cd.cubic_roots(c)
    T = cd.period_from_ode(c).T
    tr = cd.integrate(c, r.u_min, 0.0, (0, 5 * T), t_eval=np.linspace(0, 5 * T, 50001))
    assert abs(tr.u.min() - r.u_min) < 1e-8
    assert abs(tr.u.max() - r.u_max) < 1e-8


@given(admissible_c)
@settings(max_examples=15, deadline=None)
def test_energy_drift_ten_periods(c):
    r = cd.cubic_roots(c)
    T = cd.half_period_quad(c).T
    tr = cd.integrate(c, r.u_min, 0.0, (0, 10 * T), t_eval=np.linspace(0, 10 * T, 2000))
    assert tr.energy_drift() < 1e-9


def test_half_period_endpoint_flag():
    res = cd.half_period_quad(cd.C_MAX)
    assert res.degenerate
    assert res.half_period == pytest.approx(math.sqrt(3) * math.pi / 2, abs=1e-12)
    assert res.half_period == pytest.approx(2.720699, abs=1e-6)


def test_half_period_near_endpoint_series():
    a = 1e-3
    res = cd.half_period_quad(cd.C_MAX - a)
    series = math.sqrt(3) * math.pi / 2 * (1 - a / (4 * math.sqrt(3)))
    assert abs(res.half_period - series) < a**1.5


@given(admissible_c)
@settings(max_examples=20, deadline=None)
def test_quadrature_matches_ode(c):
    assert abs(cd.half_period_quad(c).T - cd.period_from_ode(c).T) < 1e-6


def test_small_c_period_finite():
    T = cd.period_from_ode(1e-4).T
    assert math.isfinite(T) and T > 0
    assert T == pytest.approx(cd.half_period_quad(1e-4).T, abs=1e-6)


def test_series_values():
    assert cd.period_series(0).T == pytest.approx(5.441398, abs=1e-6)
    assert cd.period_series(0.01).T == pytest.approx(5.433545, abs=1.5e-6)
    a = 1e-4
    assert abs(cd.period_series(a).T - cd.half_period_quad(cd.C_MAX - a).T) < 1e-5


def test_series_gap_scales_like_alpha_squared():
    alphas = np.array([1e-2, 1e-3, 1e-4])
    gaps = [abs(cd.half_period_quad(cd.C_MAX - a).T - cd.period_series(a).T) for a in alphas]
    slope = np.polyfit(np.log(alphas), np.log(gaps), 1)[0]
    assert 1.9 < slope < 2.1


def test_period_function_not_constant():
    cs, Ts = cd.period_table()
    assert Ts.max() - Ts.min() > 1e-3
    assert Ts.max() < cd.T_LIMIT + 1e-9


@pytest.mark.parametrize("ab", [(6, 7), (4, 5), (5, 6)])
def test_rational_round_trip(ab, cones):
    sol = cones[ab]
    target = 2 * math.pi * ab[0] / ab[1]
    assert abs(cd.half_period_quad(sol.c).T - target) < 1e-9
    assert abs(cd.period_from_ode(sol.c).T - target) < 1e-6
    assert sol.closure_error() < 1e-6


def test_target_out_of_range():
    with pytest.raises(TargetOutOfRange) as e:
        cd.find_c_for_target(cd.T_LIMIT)
    assert e.value.t_hi <= cd.T_LIMIT
    with pytest.raises(OutOfRange):
        cd.find_c_for_period(2, 4)


def test_rational_period_detection(cone67):
    assert cd.rational_period(cone67.c) == (6, 7)


def test_scan_rows():
    rows = cd.scan_periods(5, threads=2)
    assert len(rows) == 5
    assert max(r[3] for r in rows) < 1e-6
