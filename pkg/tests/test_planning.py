import numpy as np
import pytest

from isrubench.collision import config_free, config_min_distance
from isrubench.geometry import Pose, orientation_error
from isrubench.kinematics import forward_kinematics
from isrubench.planning import (FINE_RESOLUTION, GoalUnreachable, NoPathFound, PlanningError,
                                RehearsalReport, StartInCollision, Trajectory, WorldModel,
                                load_trajectory, plan_p2p, rehearse, save_trajectory)

from conftest import box_at, desk_world, random_valid_config


def fine_recheck(arm, world, traj, resolution=0.002):
    """Independent dense playback: every interpolated config must be free."""
    wps = traj.waypoints
    for i in range(1, len(wps)):
        dist = float(np.max(np.abs(wps[i] - wps[i - 1])))
        n = max(1, int(np.ceil(dist / resolution)))
        for k in range(n + 1):
            q = wps[i - 1] + (wps[i] - wps[i - 1]) * (k / n)
            if not config_free(arm, q, world.obstacles):
                return False
    return True


def reachable_free_config(arm, world, rng):
    while True:
        q = random_valid_config(arm, rng, margin=0.15)
        if config_free(arm, q, world.obstacles):
            return q


def test_empty_world_nearby_goal_is_direct(arm):
    world = WorldModel([])
    q0 = arm.q_home
    goal = forward_kinematics(arm, q0).translated((0.05, 0.02, 0.03))
    traj = plan_p2p(arm, world, q0, goal, seed=1)
    fk_end = forward_kinematics(arm, traj.waypoints[-1])
    assert np.linalg.norm(fk_end.position - goal.position) < 1e-6
    assert orientation_error(fk_end.orientation, goal.orientation) < 1e-4
    assert np.array_equal(traj.waypoints[0], q0)
    # direct shortcut: monotone interpolation start->goal, so every joint stays
    # within the [start, goal] interval
    for j in range(arm.dof):
        lo = min(traj.waypoints[0][j], traj.waypoints[-1][j]) - 1e-9
        hi = max(traj.waypoints[0][j], traj.waypoints[-1][j]) + 1e-9
        assert np.all((traj.waypoints[:, j] >= lo) & (traj.waypoints[:, j] <= hi))


def test_obstacle_bisecting_path_produces_free_plan(arm):
    q0 = arm.q_home
    fk0 = forward_kinematics(arm, q0)
    goal = Pose(fk0.position + np.array([0.0, -0.45, 0.0]), fk0.orientation)
    mid = fk0.position + np.array([0.0, -0.22, 0.0])
    world = WorldModel([box_at((0.22, 0.03, 0.22), mid, name="barrier")])
    traj = plan_p2p(arm, world, q0, goal, seed=3)
    assert fine_recheck(arm, world, traj)
    fk_end = forward_kinematics(arm, traj.waypoints[-1])
    assert np.linalg.norm(fk_end.position - goal.position) < 1e-6


def test_goal_inside_obstacle_unreachable(arm):
    q0 = arm.q_home
    fk0 = forward_kinematics(arm, q0)
    target = fk0.position + np.array([0.0, 0.3, 0.0])
    world = WorldModel([box_at((0.15, 0.15, 0.15), target, name="blocker")])
    with pytest.raises(PlanningError):
        plan_p2p(arm, world, q0, Pose(target, fk0.orientation), seed=5, budget=2000)


def test_start_in_collision_rejected(arm):
    fk0 = forward_kinematics(arm, arm.q_home)
    world = WorldModel([box_at((0.5, 0.5, 0.5), fk0.position, name="engulf")])
    with pytest.raises(StartInCollision):
        plan_p2p(arm, world, arm.q_home, fk0, seed=2)


def test_trajectory_invariants(arm):
    world = WorldModel(desk_world())
    goal = forward_kinematics(arm, arm.q_home).translated((0.0, 0.1, 0.1))
    traj = plan_p2p(arm, world, arm.q_home, goal, seed=7)
    assert traj.times[0] == 0.0
    assert np.all(np.diff(traj.times) > 0)
    assert float(np.max(np.abs(np.diff(traj.waypoints, axis=0)))) <= 0.05 + 1e-9
    assert all(arm.in_limits(q) for q in traj.waypoints)
    # trapezoidal profile respects the velocity cap
    vels = np.max(np.abs(np.diff(traj.waypoints, axis=0)), axis=1) / np.diff(traj.times)
    assert np.max(vels) <= 0.5 + 1e-6
    assert traj.world_hash == world.content_hash


def test_planner_rehearse_consistency_random_scenes(arm, rng):
    # every successful plan must pass its own rehearsal in the same world
    world = WorldModel(desk_world())
    n_ok = 0
    for _ in range(20):
        q0 = reachable_free_config(arm, world, rng)
        q1 = reachable_free_config(arm, world, rng)
        goal = forward_kinematics(arm, q1)
        try:
            traj = plan_p2p(arm, world, q0, goal, seed=int(rng.integers(2**31)))
        except PlanningError:
            continue
        report = rehearse(traj, arm, world)
        assert report.collision_free, report.first_violation
        n_ok += 1
    assert n_ok >= 15


def test_rehearse_detects_obstacle_added_after_planning(arm):
    world = WorldModel(desk_world())
    q0 = arm.q_home
    goal = forward_kinematics(arm, q0).translated((0.0, -0.25, 0.05))
    traj = plan_p2p(arm, world, q0, goal, seed=11)
    # drop a blocker onto the executed path
    mid_q = traj.waypoints[len(traj.waypoints) // 2]
    block_at = forward_kinematics(arm, mid_q).position
    blocked = WorldModel(desk_world() + [box_at((0.06, 0.06, 0.06), block_at, name="late_obstacle")])
    assert blocked.content_hash != world.content_hash  # stale-plan detection handle
    report = rehearse(traj, arm, blocked)
    assert not report.collision_free
    assert report.first_violation is not None
    t, pair = report.first_violation
    assert "late_obstacle" in pair


def test_rehearse_degenerate_single_waypoint(arm):
    world = WorldModel(desk_world())
    traj = Trajectory(id=1, times=[0.0], waypoints=[arm.q_home])
    report = rehearse(traj, arm, world)
    assert report.collision_free
    d, _ = config_min_distance(arm, arm.q_home, world.obstacles)
    assert report.min_clearance == pytest.approx(d, abs=1e-12)


def test_rehearse_flags_limit_violations(arm):
    q_bad = arm.q_home.copy()
    q_bad[0] = arm.limits[0, 1] + 0.2
    q_ok = arm.q_home
    step = np.clip(q_bad - q_ok, -0.05, 0.05)
    # hand-build a path that wanders past the limit
    wps = [q_ok]
    while np.max(np.abs(wps[-1] - q_bad)) > 1e-9:
        wps.append(wps[-1] + np.clip(q_bad - wps[-1], -0.05, 0.05))
    traj = Trajectory(id=2, times=np.arange(len(wps), dtype=float) * 0.1, waypoints=wps)
    report = rehearse(traj, arm, WorldModel([]))
    assert not report.collision_free
    assert report.limit_violations


def test_world_hash_changes_iff_contents_change():
    w1 = WorldModel(desk_world())
    w2 = WorldModel(desk_world())
    assert w1.content_hash == w2.content_hash
    w3 = WorldModel(desk_world() + [box_at((0.01, 0.01, 0.01), (1, 1, 1), name="pebble")])
    assert w3.content_hash != w1.content_hash


def test_trajectory_file_round_trip(arm, tmp_path):
    world = WorldModel(desk_world())
    goal = forward_kinematics(arm, arm.q_home).translated((0.05, 0.0, 0.05))
    traj = plan_p2p(arm, world, arm.q_home, goal, seed=13)
    path = tmp_path / "traj.yaml"
    save_trajectory(traj, path)
    back = load_trajectory(path)
    assert back.id == traj.id
    assert back.world_hash == traj.world_hash
    assert np.allclose(back.times, traj.times)
    assert np.allclose(back.waypoints, traj.waypoints)
