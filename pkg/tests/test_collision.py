import numpy as np
import pytest

from isrubench.collision import check_collision, config_free, config_min_distance, primitive_distance
from isrubench.geometry import Pose, random_quat
from isrubench.kinematics import CollisionPrimitive

from conftest import random_valid_config
from oracles import oracle_distance, oracle_scene_check


def sphere(r, pos, name=""):
    return CollisionPrimitive("sphere", (r,), Pose(pos), "world", name)


def box(half, pos, quat=(0, 0, 0, 1), name=""):
    return CollisionPrimitive("box", tuple(half), Pose(pos, quat), "world", name)


def capsule(r, half_len, pos, quat=(0, 0, 0, 1), name=""):
    return CollisionPrimitive("capsule", (r, half_len), Pose(pos, quat), "world", name)


def test_sphere_pair_intersecting():
    a = sphere(0.1, (0, 0, 0))
    b = sphere(0.1, (0.15, 0, 0))
    d = primitive_distance(a, a.local_pose, b, b.local_pose)
    assert d == pytest.approx(-0.05, abs=1e-12)


def test_sphere_pair_separated():
    a = sphere(0.1, (0, 0, 0))
    b = sphere(0.1, (0.25, 0, 0))
    d = primitive_distance(a, a.local_pose, b, b.local_pose)
    assert d == pytest.approx(0.05, abs=1e-12)


def random_primitive(rng, shapes=("sphere", "capsule", "box")):
    kind = shapes[rng.integers(len(shapes))]
    pos = rng.uniform(-0.6, 0.6, 3)
    quat = random_quat(rng)
    if kind == "sphere":
        return CollisionPrimitive("sphere", (rng.uniform(0.02, 0.2),), Pose(pos))
    if kind == "capsule":
        return CollisionPrimitive("capsule", (rng.uniform(0.02, 0.15), rng.uniform(0.05, 0.3)),
                                  Pose(pos, quat))
    return CollisionPrimitive("box", tuple(rng.uniform(0.02, 0.25, 3)), Pose(pos, quat))


def test_primitive_distances_match_scipy_oracle(rng):
    checked = 0
    for _ in range(400):
        a = random_primitive(rng)
        b = random_primitive(rng)
        if a.shape == "box" and b.shape == "box":
            continue
        d = primitive_distance(a, a.local_pose, b, b.local_pose)
        ref = oracle_distance(a, a.local_pose, b, b.local_pose)
        assert d == pytest.approx(ref, abs=1e-9), (a.shape, b.shape)
        checked += 1
    assert checked > 300


def test_box_box_rejected():
    a = box((0.1, 0.1, 0.1), (0, 0, 0))
    b = box((0.1, 0.1, 0.1), (0.5, 0, 0))
    with pytest.raises(ValueError):
        primitive_distance(a, a.local_pose, b, b.local_pose)


def test_penetration_sign_agreement_with_oracle(rng):
    agree = 0
    for _ in range(400):
        a = random_primitive(rng)
        b = random_primitive(rng)
        if a.shape == "box" and b.shape == "box":
            continue
        d = primitive_distance(a, a.local_pose, b, b.local_pose)
        ref = oracle_distance(a, a.local_pose, b, b.local_pose)
        if abs(ref) > 1e-6:
            assert (d < 0) == (ref < 0)
            agree += 1
    assert agree > 300


def fig_world():
    """Desk scene: rover body, antenna masts, slot block, camera box, soil plane."""
    return [
        box((0.35, 0.25, 0.2), (0.1, 0, -0.2), name="rover_body"),
        box((0.02, 0.02, 0.25), (-0.15, 0.2, 0.25), name="antenna_left"),
        box((0.02, 0.02, 0.25), (-0.15, -0.2, 0.25), name="antenna_right"),
        box((0.05, 0.05, 0.06), (0.35, 0.22, 0.06), name="slot_block"),
        box((0.06, 0.06, 0.06), (0.18, 0.3, 0.35), name="camera_box"),
        box((2.0, 2.0, 0.5), (0, 0, -0.9), name="soil"),
    ]


def test_arm_at_home_in_fig_world_matches_oracle(arm):
    from isrubench.kinematics import link_frames
    world = fig_world()
    report = check_collision(arm, arm.q_home, world)
    ref = oracle_scene_check(arm, arm.q_home, world, link_frames)
    assert report.collided == (ref < 0.0)
    assert report.min_distance == pytest.approx(ref, abs=1e-9)


def test_checker_agrees_with_all_pairs_oracle_on_random_scenes(arm, rng):
    from isrubench.kinematics import link_frames
    disagreements = 0
    for _ in range(1000):
        q = random_valid_config(arm, rng)
        world = [random_primitive(rng, shapes=("sphere", "capsule", "box")) for _ in range(3)]
        report = check_collision(arm, q, world)
        ref = oracle_scene_check(arm, q, world, link_frames)
        if abs(ref) < 1e-7:  # grazing contact: sign is numerically ambiguous
            continue
        if report.collided != (ref < 0.0):
            disagreements += 1
    assert disagreements == 0


def test_fast_path_matches_full_report(arm, rng):
    for _ in range(200):
        q = random_valid_config(arm, rng)
        world = [random_primitive(rng) for _ in range(3)]
        report = check_collision(arm, q, world)
        d, pair = config_min_distance(arm, q, world)
        assert d == pytest.approx(report.min_distance, abs=1e-12)
        assert config_free(arm, q, world) == (not report.collided)


def test_offending_pairs_are_named(arm):
    world = [sphere(0.4, (0.3, 0, 0.5), name="blob")]
    report = check_collision(arm, arm.q_home, world)
    assert report.collided
    assert any("blob" in pair[1] for pair in report.pairs)


def test_primitive_validation():
    with pytest.raises(ValueError):
        CollisionPrimitive("sphere", (-0.1,))
    with pytest.raises(ValueError):
        CollisionPrimitive("capsule", (0.1,))
    with pytest.raises(ValueError):
        CollisionPrimitive("pyramid", (0.1,))
