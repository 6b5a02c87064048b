import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation as ScipyRotation

from obversim.geometry import (
    InvalidAxisError,
    Reflection,
    SpherePoint,
    apply,
    conjugate,
    identity_rotation,
    random_points,
    reflect,
    rotation_from_axis_angle,
    su2_from_rotation,
    to_cartesian,
    to_spherical,
)

X, Y, Z = np.eye(3)

angles = st.floats(-10.0, 10.0, allow_nan=False)
thetas = st.floats(1e-6, math.pi - 1e-6)
phis = st.floats(-math.pi, math.pi)


def rodrigues(axis, angle):
    return ScipyRotation.from_rotvec(np.asarray(axis) * angle).as_matrix()


@st.composite
def unit_vectors(draw):
    v = np.array([draw(st.floats(-1, 1)) for _ in range(3)])
    if np.linalg.norm(v) < 1e-3:
        v = np.array([0.0, 0.0, 1.0])
    return v / np.linalg.norm(v)


def test_zero_angle_is_identity():
    for axis in (X, Y, Z, np.ones(3) / math.sqrt(3)):
        assert np.array_equal(rotation_from_axis_angle(axis, 0.0).matrix, np.eye(3))


def test_quarter_turn_about_z_is_right_handed():
    r = rotation_from_axis_angle(Z, math.pi / 2)
    np.testing.assert_allclose(r.matrix @ X, Y, atol=1e-15)


def test_third_turn_about_x():
    s3 = math.sqrt(3) / 2
    expected = np.array([[1, 0, 0], [0, -0.5, -s3], [0, s3, -0.5]])
    got = rotation_from_axis_angle(X, 2 * math.pi / 3).matrix
    np.testing.assert_allclose(got, expected, atol=1e-15)
    np.testing.assert_allclose(got, rodrigues(X, 2 * math.pi / 3), atol=1e-15)


@settings(max_examples=200)
@given(unit_vectors(), angles)
def test_component_formula_matches_rodrigues(axis, angle):
    r = rotation_from_axis_angle(axis, angle)
    np.testing.assert_allclose(r.matrix, rodrigues(axis, angle), atol=1e-12)
    np.testing.assert_allclose(r.matrix @ r.matrix.T, np.eye(3), atol=1e-12)
    assert abs(np.linalg.det(r.matrix) - 1.0) < 1e-12
    np.testing.assert_allclose(r.matrix @ r.axis, r.axis, atol=1e-12)


@settings(max_examples=100)
@given(unit_vectors(), angles, angles)
def test_group_law(axis, t1, t2):
    a = rotation_from_axis_angle(axis, t1)
    b = rotation_from_axis_angle(axis, t2)
    np.testing.assert_allclose(a.then(b), rotation_from_axis_angle(axis, t1 + t2).matrix, atol=1e-12)


def test_axis_validation():
    with pytest.raises(InvalidAxisError):
        rotation_from_axis_angle((0, 0, 0), 1.0)
    with pytest.raises(InvalidAxisError):
        rotation_from_axis_angle((0, 0, 2), 1.0)
    r = rotation_from_axis_angle((0, 0, 1 + 5e-10), 1.0)
    assert np.linalg.norm(r.axis) == pytest.approx(1.0, abs=1e-16)


def test_apply_examples(rng):
    p = SpherePoint(0.0, 0.0, 1.0)
    assert apply(identity_rotation(), p) == p
    q = apply(rotation_from_axis_angle(X, math.pi / 2), p)
    np.testing.assert_allclose(q.as_array(), [0, -1, 0], atol=1e-15)
    for v in random_points(rng, 1000):
        axis = random_points(rng, 1)[0]
        out = apply(rotation_from_axis_angle(axis, rng.uniform(-7, 7)), SpherePoint.from_vector(v))
        assert abs(np.linalg.norm(out.as_array()) - 1.0) < 1e-12


@given(thetas, phis)
def test_spherical_round_trip(theta, phi):
    p = SpherePoint.from_spherical(theta, phi)
    assert abs(p.x**2 + p.y**2 + p.z**2 - 1) < 1e-12
    q = SpherePoint.from_spherical(p.theta, p.phi)
    np.testing.assert_allclose(q.as_array(), p.as_array(), atol=1e-12)
    th, ph = to_spherical(to_cartesian(theta, phi))
    np.testing.assert_allclose(to_cartesian(th, ph), p.as_array(), atol=1e-12)


def test_poles_report_zero_phi():
    assert SpherePoint(0.0, 0.0, 1.0).phi == 0.0
    assert SpherePoint(0.0, 0.0, -1.0).phi == 0.0
    assert SpherePoint(-1.0, 0.0, 0.0).phi == math.pi


def test_rejects_off_sphere_points():
    with pytest.raises(ValueError):
        SpherePoint(1.0, 1.0, 0.0)


def test_conjugation():
    y = SpherePoint(0.0, 1.0, 0.0)
    np.testing.assert_allclose(conjugate(y).as_array(), [0, -1, 0])
    p = SpherePoint.from_spherical(math.pi / 3, math.pi / 4)
    q = conjugate(p)
    assert q.theta == pytest.approx(math.pi / 3, abs=1e-15)
    assert q.phi == pytest.approx(-math.pi / 4, abs=1e-15)
    assert conjugate(q) == p


def test_reflection_examples(rng):
    assert reflect(Reflection(X), SpherePoint(1.0, 0.0, 0.0)) == SpherePoint(-1.0, 0.0, 0.0)
    mirror_y = Reflection(Y)
    for v in random_points(rng, 1000):
        p = SpherePoint.from_vector(v)
        np.testing.assert_allclose(reflect(mirror_y, p).as_array(), conjugate(p).as_array(), atol=1e-15)
    m = Reflection(random_points(rng, 1)[0])
    pts = random_points(rng, 1000)
    np.testing.assert_allclose(m.apply_many(m.apply_many(pts)), pts, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(m.apply_many(pts), axis=1), 1.0, atol=1e-12)


def test_involution_identity_for_planes_containing_the_axis(rng):
    for _ in range(20):
        axis = random_points(rng, 1)[0]
        normal = np.cross(axis, random_points(rng, 1)[0])
        normal /= np.linalg.norm(normal)
        r = rotation_from_axis_angle(axis, rng.uniform(-7, 7)).matrix
        mr = Reflection(normal).matrix
        pts = random_points(rng, 1000)
        np.testing.assert_allclose(pts @ (mr @ r @ mr @ r).T, pts, atol=1e-10)


def test_isometries_preserve_distances(rng):
    pts = random_points(rng, 200)
    r = rotation_from_axis_angle(random_points(rng, 1)[0], 1.234).matrix
    m = Reflection(random_points(rng, 1)[0]).matrix

    def dists(a):
        return np.arccos(np.clip(a @ a.T, -1, 1))

    base = dists(pts)
    np.testing.assert_allclose(dists(pts @ r.T), base, atol=1e-7)
    # arccos loses precision near 0/pi; compare chord lengths at 1e-12 as well
    chord = np.linalg.norm(pts[:, None] - pts[None], axis=2)
    for t in (r, m):
        moved = pts @ t.T
        np.testing.assert_allclose(np.linalg.norm(moved[:, None] - moved[None], axis=2), chord, atol=1e-12)


def test_reversal_intertwining_for_case1a_about_x():
    # S_{-t} M = M S_t for the mirror in the plane holding the axis x and z
    m = Reflection(Y).matrix
    for t in (0.3, 2.1, 2 * math.pi / 3, 5.0):
        lhs = rotation_from_axis_angle(X, -t).matrix @ m
        rhs = m @ rotation_from_axis_angle(X, t).matrix
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_su2_examples():
    np.testing.assert_allclose(su2_from_rotation(X, 0.0).array, np.eye(2), atol=1e-15)
    expected = -1j * np.diag([1.0, -1.0])
    np.testing.assert_allclose(su2_from_rotation(Z, math.pi).array, expected, atol=1e-15)


def test_su2_double_cover(rng):
    for _ in range(100):
        axis = random_points(rng, 1)[0]
        angle = rng.uniform(-2 * math.pi, 2 * math.pi)
        u = su2_from_rotation(axis, angle)
        arr = u.array
        np.testing.assert_allclose(arr @ arr.conj().T, np.eye(2), atol=1e-12)
        assert abs(np.linalg.det(arr) - 1) < 1e-12
        np.testing.assert_allclose(u.adjoint_action(), rotation_from_axis_angle(axis, angle).matrix, atol=1e-12)
        v = su2_from_rotation(axis, angle + 2 * math.pi)
        np.testing.assert_allclose(v.array, -arr, atol=1e-12)
        np.testing.assert_allclose(v.adjoint_action(), u.adjoint_action(), atol=1e-12)


def test_su2_state_evolution_matches_rotation(rng):
    for _ in range(50):
        axis = random_points(rng, 1)[0]
        angle = rng.uniform(-4, 4)
        p = SpherePoint.from_vector(random_points(rng, 1)[0])
        got = su2_from_rotation(axis, angle).act(p)
        want = apply(rotation_from_axis_angle(axis, angle), p)
        np.testing.assert_allclose(got.as_array(), want.as_array(), atol=1e-12)
