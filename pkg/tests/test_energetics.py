import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phclab import energetics as en
from phclab import surfaces as sf
from phclab.errors import RegionClipFailure


@given(st.floats(0.05, 0.95))
@settings(max_examples=8, deadline=None)
def test_e13_tube_energy(r):
    assert en.integrate_form(sf.make_e13(0.3), "omega", en.tube(r)) == pytest.approx(r * r / 2, abs=1e-10)


@given(st.floats(0.05, 0.95))
@settings(max_examples=8, deadline=None)
def test_e14_tube_energy(r):
    assert en.integrate_form(sf.make_e14(-1), "omega", en.tube(r)) == pytest.approx(r * r, abs=1e-10)


def test_e13_four_ball_energy():
    # s ds dt over the half disc t^2 + s^2 <= r^2 gives 2 r^3 / 3
    r = 0.4
    val = en.integrate_form(sf.make_e13(), "omega", en.ball(0.5, r))
    assert val == pytest.approx(2 * r**3 / 3, rel=1e-10)


def test_omega_splits_into_action_pieces():
    surf = sf.make_e16("a", 0.2, 0.05)
    reg = en.tube(0.9)
    total = en.integrate_form(surf, "omega", reg)
    parts = en.integrate_form(surf, "dt_df", reg) + en.integrate_form(surf, "dphi_dh", reg)
    assert total == pytest.approx(parts, rel=1e-9)


def test_area_weighted_by_g_bounds_energy():
    surf = sf.make_e17(2, 1)
    reg = en.tube(0.5)
    e = en.integrate_form(surf, "omega", reg)
    a = en.integrate_form(surf, "area", reg)
    assert 0 < e <= 2 * 0.5 * a * 1.0001


def test_unknown_form():
    with pytest.raises(ValueError):
        en.integrate_form(sf.make_e13(), "nonsense")


def test_delta_c_pieces(cone67):
    d = en.delta_c(cone67)
    assert d.dphidh_part == pytest.approx(2 * math.pi * cone67.winding * cone67.c, rel=1e-14)
    assert d.delta == pytest.approx(d.dtdf_part + d.dphidh_part)
    assert d.error < 1e-10


def test_delta_c_against_surface_integrals(cone67):
    surf = sf.make_e15(cone67, 1, t0=0.5)
    ball = en.ball(0.5, 0.6)
    d = en.delta_c(cone67)
    r3 = 0.6**3
    assert en.integrate_form(surf, "dphi_dh", ball) / r3 == pytest.approx(d.dphidh_part, rel=1e-6)
    assert en.integrate_form(surf, "dt_df", ball) / r3 == pytest.approx(d.dtdf_part, rel=1e-6)
    assert en.integrate_form(surf, "omega", ball) / r3 == pytest.approx(d.delta, rel=1e-6)


def test_dtdf_lower_bounds(cones):
    small = cones[(7, 9)]
    assert small.c < math.sqrt(3) / 24
    b = en.dtdf_lower_bounds(small.c)
    d = en.delta_c(small)
    assert b["uniform"] == pytest.approx(1 / (576 * math.sqrt(3)), rel=1e-15)
    assert d.dtdf_part >= b["uniform"]
    assert d.dtdf_part >= b["graded"]
    assert en.dtdf_lower_bounds(0.3) == {"uniform": None, "graded": None}


def test_smoothstep():
    x = np.array([0, 0.5, 1.0, 1.5, 2.0, 3.0])
    assert np.allclose(en.smoothstep_cutoff(x), [1, 1, 1, 0.5, 0, 0])
    assert np.all(np.diff(en.smoothstep_cutoff(np.linspace(0, 3, 100))) <= 0)


@pytest.mark.parametrize("name", ["e13", "e14", "e17", "e16a"])
def test_sigma_scaled_monotone(name):
    surf = sf.make_family(name)
    rep = en.sigma_profile(surf, 0.3, np.linspace(0.1, 0.45, 4), with_area=False, epsrel=1e-9)
    assert rep.monotone
    assert np.all(rep.sigma >= 0)


def test_sigma_smooth_cutoff_monotone():
    rep = en.sigma_profile(sf.make_e17(2, 1), 0.0, [0.05, 0.2, 0.4], cutoff="smooth",
                           with_area=False, epsrel=1e-9)
    assert rep.monotone


def test_sigma_vanishes_away_from_surface():
    rep = en.sigma_profile(sf.make_e16("a", 0.0, 0.05), 0.0, [0.05, 0.1, 0.15], with_area=False)
    assert np.all(rep.sigma == 0)


def test_sigma_rejects_unsorted_grid():
    with pytest.raises(ValueError):
        en.sigma_profile(sf.make_e13(), 0.0, [0.3, 0.2])


def test_sigma_rejects_radius_past_half_circle():
    with pytest.raises(ValueError):
        en.sigma_profile(sf.make_e13(), 0.0, [0.2, 0.5])


def test_fitted_constants_reported():
    rep = en.sigma_profile(sf.make_e13(), 0.0, [0.2, 0.4])
    assert rep.zeta_sigma == pytest.approx(2 / 3, rel=1e-9)
    assert rep.zeta_area == pytest.approx(math.pi / 2, rel=1e-9)


@pytest.mark.parametrize("name", ["e13", "e14"])
def test_mu_zero_on_flat_families(name):
    mu, sup = en.mu_profile(sf.make_family(name), [0.05, 0.1, 0.2])
    assert np.all(np.abs(mu) < 1e-15)


def test_mu_zero_below_level():
    mu, _ = en.mu_profile(sf.make_e16("a", 0.0, 0.05), [0.1, 0.2, 0.3])
    assert np.all(mu == 0)


def test_mu_delta_range():
    with pytest.raises(ValueError):
        en.mu_profile(sf.make_e13(), [0.1], delta=0.2)


def test_mu_on_cone(cone67):
    surf = sf.make_e15(cone67, 1, t0=0.5)
    s_top = en.e15_mu_range(cone67.c)
    s = np.array([0.5, 1.0]) * s_top
    mu, sup = en.mu_profile(surf, s)
    assert np.allclose(mu / s**3, 2 * math.pi * cone67.winding, rtol=1e-6)


def test_monotone_within_error_bar():
    assert en.monotone_within([1.0, 0.9999], [1e-4, 1e-4])
    assert not en.monotone_within([1.0, 0.9], [1e-4, 1e-4])


def test_region_clip_failure_is_reported():
    # 80 boundary crossings along each radial line
    wild = en.Region("wild", lambda p: np.sin(80 * math.pi * p[..., 1]))
    with pytest.raises(RegionClipFailure):
        en.integrate_form(sf.make_e13(), "omega", wild)
