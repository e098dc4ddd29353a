import math

import numpy as np
import pytest

from isrubench.geometry import (Pose, compose, inverse, orientation_error,
                                quat_about_axis, quat_from_rpy, random_quat)

from oracles import matrix_compose_quat


def random_pose(rng):
    return Pose(rng.uniform(-1, 1, 3), random_quat(rng))


def test_identity_composition(rng):
    p = random_pose(rng)
    assert compose(Pose.identity(), p).approx_equal(p)
    assert compose(p, Pose.identity()).approx_equal(p)


def test_translations_commute_along_axis():
    a = Pose((0, 0, 0.1))
    b = Pose((0, 0, 0.2))
    assert compose(a, b).approx_equal(Pose((0, 0, 0.3)))


def test_compose_matches_rotation_matrix_product(rng):
    # rot-x 90 then rot-y 90, checked against the scipy matrix product
    a = Pose(orientation=quat_about_axis((1, 0, 0), math.pi / 2))
    b = Pose(orientation=quat_about_axis((0, 1, 0), math.pi / 2))
    expect = matrix_compose_quat(a.orientation, b.orientation)
    got = compose(a, b).orientation
    assert min(np.linalg.norm(got - expect), np.linalg.norm(got + expect)) < 1e-12
    for _ in range(200):
        pa, pb = random_pose(rng), random_pose(rng)
        expect = matrix_compose_quat(pa.orientation, pb.orientation)
        got = compose(pa, pb).orientation
        assert min(np.linalg.norm(got - expect), np.linalg.norm(got + expect)) < 1e-9


def test_compose_inverse_is_identity(rng):
    for _ in range(200):
        p = random_pose(rng)
        r = compose(p, inverse(p))
        assert np.linalg.norm(r.position) < 1e-9
        assert orientation_error(r.orientation, Pose.identity().orientation) < 1e-9


def test_composition_associative(rng):
    a, b, c = (random_pose(rng) for _ in range(3))
    left = compose(compose(a, b), c)
    right = compose(a, compose(b, c))
    assert left.approx_equal(right, pos_tol=1e-9, rot_tol=1e-9)


def test_quaternion_norm_stays_unit_over_many_compositions(rng):
    # renormalization policy: drift stays below 1e-9 across 1e6 compositions
    p = random_pose(rng)
    steps = [random_pose(rng) for _ in range(100)]
    for i in range(1_000_000):
        p = p.compose(steps[i % 100])
        if i % 50_000 == 0:
            assert abs(np.linalg.norm(p.orientation) - 1.0) < 1e-9
    assert abs(np.linalg.norm(p.orientation) - 1.0) < 1e-9


def test_orientation_error_identity_and_double_cover(rng):
    q = random_quat(rng)
    assert orientation_error(q, q) == 0.0
    assert orientation_error(q, -q) == 0.0


def test_orientation_error_analytic():
    q = quat_about_axis((0, 0, 1), math.radians(30))
    err = orientation_error(Pose.identity().orientation, q)
    assert abs(err - 0.5236) < 1e-4


def test_orientation_error_symmetric_and_bounded(rng):
    for _ in range(200):
        qa, qb = random_quat(rng), random_quat(rng)
        e1 = orientation_error(qa, qb)
        e2 = orientation_error(qb, qa)
        assert abs(e1 - e2) < 1e-12
        assert 0.0 <= e1 <= math.pi + 1e-12


def test_pose_canonical_scalar_sign(rng):
    q = random_quat(rng)
    assert Pose(orientation=-q).orientation[3] >= 0.0
    assert np.allclose(Pose(orientation=-q).orientation, Pose(orientation=q).orientation)


def test_pose_validation():
    with pytest.raises(ValueError):
        Pose((0, 0))
    with pytest.raises(ValueError):
        Pose((0, 0, 0), (0, 0, 0, 0))
    with pytest.raises(ValueError):
        Pose((0, 0, 0), (9, 0, 0, 1))


def test_transform_point_matches_matrix(rng):
    p = random_pose(rng)
    v = rng.uniform(-1, 1, 3)
    expect = p.rotation_matrix() @ v + p.position
    assert np.linalg.norm(p.transform_point(v) - expect) < 1e-12


def test_rpy_round_trip_against_matrix():
    q = quat_from_rpy(0.3, -0.5, 1.1)
    from scipy.spatial.transform import Rotation
    expect = Rotation.from_euler("ZYX", [1.1, -0.5, 0.3]).as_quat()
    assert min(np.linalg.norm(q - expect), np.linalg.norm(q + expect)) < 1e-12


def test_pose_list_round_trip(rng):
    p = random_pose(rng)
    assert Pose.from_list(p.to_list()).approx_equal(p, pos_tol=0, rot_tol=1e-15)
