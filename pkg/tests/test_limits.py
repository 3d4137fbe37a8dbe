import math

import numpy as np
import pytest

from phclab import limits as lm
from phclab import surfaces as sf
from phclab.errors import EmptyIntersection


@pytest.fixture(scope="module")
def e15(cone67):
    return sf.make_e15(cone67, 1, t0=0.5)


def test_dilate_rejects_bad_scale():
    with pytest.raises(ValueError):
        lm.dilate(sf.make_e13(), 0.0)


def test_dilate_keeps_e13_as_a_set():
    d = lm.dilate(sf.make_e13(), 0.3, t0=0.2)
    cloud = lm.sample_ball(d, 1.5, n=60)
    assert np.all(np.abs(cloud.pts[:, 2:]) == 0)
    assert np.all(cloud.pts[:, 1] >= 0)


def test_cone_image_fixed_by_dilation(e15):
    a = lm.sample_ball(lm.dilate(e15, 1.0, 0.5), 2.2)
    b = lm.sample_ball(lm.dilate(e15, 0.25, 0.5), 2.2)
    assert lm.geometric_distance(a, b) < 0.02


def test_dilated_tangents_scale():
    base = sf.make_e17(2, 1)
    d = lm.dilate(base, 0.1)
    p0, t10, t20 = base.sample(np.array([0.4]), np.array([0.3]))
    p1, t11, t21 = d.sample(np.array([0.4]), np.array([0.3]))
    assert np.allclose(t11, 10 * t10) and np.allclose(t21, 10 * t20)
    assert np.allclose(p1[0, 1:], 10 * p0[0, 1:])


def test_distance_to_self_is_zero():
    c = lm.plane_cloud(0.4)
    assert lm.geometric_distance(c, c) == 0.0


def test_distance_separates_planes():
    assert lm.geometric_distance(lm.plane_cloud(0.0), lm.plane_cloud(math.pi / 2)) > 0.3


def test_distance_needs_points_in_annulus():
    far = lm.PointCloud(np.array([[0.0, 0.0, 0.0, 0.1]]), np.zeros((1, 4)), np.zeros((1, 4)))
    with pytest.raises(EmptyIntersection):
        lm.geometric_distance(far, lm.plane_cloud(0.0))


def test_e17_converges_to_two_planes():
    surf = sf.make_e17(2, 1)
    limit = lm.PointCloud.concat(*[lm.plane_cloud(a) for a in lm.e17_limit_angles(surf)])
    seq = lm.dK_sequence(surf, limit, [0.1, 0.03, 0.01])
    assert seq[0] > seq[1] > seq[2]
    assert seq[2] < 0.03


def test_e15_rotation_is_detected(e15, cone67):
    a = lm.sample_ball(lm.dilate(e15, 1.0, 0.5), 2.2)
    b = lm.rotate_phi(a, math.pi / cone67.b)
    assert lm.geometric_distance(a, b) > 0.1


def test_count_e13_cylinder():
    r = lm.count_intersections(sf.make_e13(), lm.cylinder_test(0.0, 0.1))
    assert r.count == 1 and r.stable and r.all_positive


def test_count_e17_cylinder():
    for q, p in ((2, 1), (3, 1), (3, 2)):
        r = lm.count_intersections(sf.make_e17(q, p), lm.cylinder_test(0.0, 0.1, L=2 * math.pi))
        assert r.count == q and r.stable and r.all_positive


def test_count_e14_disks():
    surf = sf.make_e14(1)
    assert lm.count_intersections(surf, lm.disk_test(0.0, 0.1, 1)).count == 1
    assert lm.count_intersections(surf, lm.disk_test(0.0, 0.1, -1)).count == 0


@pytest.mark.parametrize("name, expect", [("e13", (1, 0, 0, 0, 0)), ("e14", (0, 1, 0, 0, 0))])
def test_flat_limits(name, expect):
    d = lm.classify_limit(sf.make_family(name), 0.0)
    assert d.as_tuple() == expect
    assert d.consistent and d.stable


def test_e17_limit_is_q_planes():
    d = lm.classify_limit(sf.make_e17(2, 1), 0.0)
    assert d.as_tuple() == (2, 0, 0, 0, 0)
    assert d.consistent


def test_e15_cone_constant_recovered(e15, cone67):
    d = lm.classify_limit(e15, 0.5)
    assert d.n_plus == 1 and d.n_minus == 0
    assert d.cone_constants["+"][0] == pytest.approx(cone67.c, abs=1e-6)
    assert d.consistent and d.stable


def test_e15_lower_sheet(cone67):
    d = lm.classify_limit(sf.make_e15(cone67, -1, t0=0.5), 0.5)
    assert (d.n_plus, d.n_minus) == (0, 1)
    assert d.cone_constants["-"][0] == pytest.approx(cone67.c, abs=1e-6)


def test_small_cone_constant(cones):
    cone = cones[(7, 9)]
    d = lm.classify_limit(sf.make_e15(cone, 1, t0=0.5), 0.5)
    assert d.stable and d.n_plus == 1
    assert d.cone_constants["+"][0] == pytest.approx(cone.c, abs=1e-6)


@pytest.mark.parametrize("name", ["e13", "e14", "e17", "e16a"])
def test_p_minus_q_scale_invariant(name):
    surf = sf.make_family(name)
    vals = set()
    for s in (1.0, 0.3, 0.1):
        d = lm.classify_limit(surf, 0.0, s)
        vals.add(d.p - d.q_plus - d.q_minus)
        assert d.consistent
    assert len(vals) == 1


def test_p_minus_q_scale_invariant_cone(e15):
    data = [lm.classify_limit(e15, 0.5, s) for s in (0.3, 0.1)]
    assert {d.p - d.q_plus - d.q_minus for d in data} == {0}


def test_transient_constants_filtered():
    # a leaf of the {phi, h} foliation is not a cone; its h-slices must not be reported
    d = lm.classify_limit(sf.make_e16("a", 0.3, 0.05), 0.0)
    assert d.n_plus == d.n_minus == 0


def test_limit_data_dict():
    d = lm.classify_limit(sf.make_e13(), 0.0)
    keys = {"p", "q_plus", "q_minus", "n_plus", "n_minus", "cone_constants", "s_used", "dK_sequence"}
    assert keys <= set(d.to_dict())


def test_cone_residual_on_cones(e15):
    assert lm.cone_field_residual(sf.make_e13(), 0.0).max == 0.0
    assert lm.cone_field_residual(sf.make_e14(1), 0.0).max == 0.0
    assert lm.cone_field_residual(e15, 0.5).max < 1e-8


def test_cone_residual_negative_controls():
    assert lm.cone_field_residual(sf.make_e16("a", 0.3, 0.05), 0.0).max > 1e-3
    assert lm.cone_field_residual(sf.make_e17(2, 1), 0.0).max > 1e-3


def test_cone_constant_from_samples(e15, cone67):
    med, spread = lm.cone_constant_from_samples(e15, 0.5)
    assert med == pytest.approx(cone67.c, rel=1e-9)
    assert spread < 1e-9


def test_winding_of(cones):
    for (a, b), cone in cones.items():
        assert lm.winding_of(cone.c) == cone.winding
