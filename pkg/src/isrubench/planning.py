"""Collision-aware point-to-point planning, rehearsal, and trajectory files.

Plans live in joint space: a bidirectional rapidly-exploring random tree with
goal configurations seeded through IK, straight-line shortcutting, and a
trapezoidal velocity profile. Rehearsal replays a trajectory kinematically at
finer resolution than the planner used and is the gate before uplink.
"""

from __future__ import annotations

import hashlib
import random
import struct
from dataclasses import dataclass, field

import numpy as np
import yaml

from .collision import config_free, config_min_distance
from .kinematics import (ArmModel, JointLimitViolation, NoConvergence,
                         forward_kinematics, solve_ik)

TRAJECTORY_FORMAT_VERSION = 1

COARSE_RESOLUTION = 0.02   # rad between collision checks while planning
FINE_RESOLUTION = 0.005    # rad between collision checks during rehearsal
DENSIFY_STEP = 0.05        # max joint-space distance between stored waypoints
EXTEND_STEP = 0.2          # RRT steering step
VEL_LIMIT = 0.5            # rad/s, conservative autonomous speed
ACC_LIMIT = 1.0            # rad/s^2


class PlanningError(Exception):
    pass


class StartInCollision(PlanningError):
    pass


class GoalUnreachable(PlanningError):
    """IK found no collision-free configuration at the goal pose."""


class NoPathFound(PlanningError):
    """Sampling budget exhausted without joining the trees."""


@dataclass
class Trajectory:
    id: int
    times: np.ndarray          # (n,) strictly increasing, starts at 0
    waypoints: np.ndarray      # (n, dof)
    planner: str = "birrt"
    world_hash: int = 0

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.waypoints = np.asarray(self.waypoints, dtype=float)
        if len(self.times) != len(self.waypoints) or len(self.times) == 0:
            raise ValueError("times and waypoints must align and be non-empty")
        if self.times[0] != 0.0 or (len(self.times) > 1 and np.any(np.diff(self.times) <= 0)):
            raise ValueError("times must start at 0 and strictly increase")
        if len(self.waypoints) > 1:
            gap = float(np.max(np.abs(np.diff(self.waypoints, axis=0))))
            if gap > DENSIFY_STEP + 1e-9:
                raise ValueError(f"waypoint spacing {gap:.3f} exceeds the densification bound")

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    def sample(self, t: float) -> np.ndarray:
        """Linear interpolation of the joint path at time t (clamped)."""
        if t <= 0.0:
            return self.waypoints[0].copy()
        if t >= self.times[-1]:
            return self.waypoints[-1].copy()
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        t0, t1 = self.times[i], self.times[i + 1]
        a = (t - t0) / (t1 - t0)
        return (1 - a) * self.waypoints[i] + a * self.waypoints[i + 1]


@dataclass
class WorldModel:
    obstacles: list = field(default_factory=list)

    @property
    def content_hash(self) -> int:
        h = hashlib.blake2b(digest_size=8)
        for b in sorted(self.obstacles, key=lambda o: (o.name, o.shape)):
            h.update(b.shape.encode())
            h.update(struct.pack("<%dd" % len(b.size), *b.size))
            h.update(struct.pack("<3d", *b.local_pose.position))
            h.update(struct.pack("<4d", *b.local_pose.orientation))
        return int.from_bytes(h.digest(), "little")


@dataclass
class RehearsalReport:
    collision_free: bool
    first_violation: tuple | None      # (time, (name_a, name_b))
    min_clearance: float
    limit_violations: list


def _edge_free(arm, world, qa, qb, resolution) -> bool:
    dist = float(np.max(np.abs(qb - qa)))
    steps = max(1, int(np.ceil(dist / resolution)))
    for k in range(1, steps + 1):
        q = qa + (qb - qa) * (k / steps)
        if not config_free(arm, q, world):
            return False
    return True


def _nearest(nodes, q):
    d = np.max(np.abs(nodes - q), axis=1)
    return int(np.argmin(d))


def _steer(q_from, q_to, step):
    d = float(np.max(np.abs(q_to - q_from)))
    if d <= step:
        return q_to
    return q_from + (q_to - q_from) * (step / d)


def _goal_configs(arm, world, goal, q_start, rng, attempts=12, want=4):
    seeds = [q_start, arm.q_home]
    lo, hi = arm.limits[:, 0], arm.limits[:, 1]
    while len(seeds) < attempts:
        seeds.append(np.array([rng.uniform(lo[i], hi[i]) for i in range(arm.dof)]))
    found = []
    for seed in seeds:
        try:
            q = solve_ik(arm, goal, seed)
        except (NoConvergence, JointLimitViolation):
            continue
        if not config_free(arm, q, world.obstacles):
            continue
        if not any(np.max(np.abs(q - g)) < 1e-3 for g in found):
            found.append(q)
        if len(found) >= want:
            break
    return found


def _shortcut(arm, world, path, rng, attempts=150):
    path = [np.asarray(q) for q in path]
    for _ in range(attempts):
        if len(path) <= 2:
            break
        i = rng.randrange(0, len(path) - 1)
        j = rng.randrange(0, len(path) - 1)
        if abs(i - j) < 2:
            continue
        i, j = min(i, j), max(i, j)
        if _edge_free(arm, world.obstacles, path[i], path[j], COARSE_RESOLUTION):
            path = path[: i + 1] + path[j:]
    return path


def _densify(path, step=DENSIFY_STEP):
    out = [np.asarray(path[0], dtype=float)]
    for q_next in path[1:]:
        q_prev = out[-1]
        dist = float(np.max(np.abs(q_next - q_prev)))
        n = max(1, int(np.ceil(dist / step)))
        for k in range(1, n + 1):
            out.append(q_prev + (q_next - q_prev) * (k / n))
    return np.asarray(out)


def _trapezoidal_times(waypoints, v_max=VEL_LIMIT, a_max=ACC_LIMIT):
    """Timestamp waypoints along the path arc with a trapezoidal speed profile."""
    seg = np.max(np.abs(np.diff(waypoints, axis=0)), axis=1) if len(waypoints) > 1 else np.array([])
    s_total = float(np.sum(seg))
    if s_total <= 0.0:
        return np.zeros(len(waypoints))
    t_acc = v_max / a_max
    s_acc = 0.5 * a_max * t_acc * t_acc
    if 2 * s_acc >= s_total:  # triangular profile
        t_acc = np.sqrt(s_total / a_max)
        s_acc = 0.5 * s_total
        v_peak = a_max * t_acc
        t_total = 2 * t_acc
    else:
        v_peak = v_max
        t_total = 2 * t_acc + (s_total - 2 * s_acc) / v_max

    def time_at(s):
        if s <= s_acc:
            return np.sqrt(2 * s / a_max)
        if s >= s_total - s_acc:
            return t_total - np.sqrt(2 * max(s_total - s, 0.0) / a_max)
        return t_acc + (s - s_acc) / v_peak

    s = np.concatenate([[0.0], np.cumsum(seg)])
    times = np.array([time_at(x) for x in s])
    # numerical guard: strictly increasing
    for i in range(1, len(times)):
        if times[i] <= times[i - 1]:
            times[i] = times[i - 1] + 1e-6
    return times


_traj_counter = [0]


def _next_traj_id(rng) -> int:
    _traj_counter[0] += 1
    return _traj_counter[0] * 1000 + rng.randrange(1000)


def plan_p2p(arm: ArmModel, world: WorldModel, q_start, goal, *,
             seed: int = 0, budget: int = 10_000) -> Trajectory:
    """Collision-free joint-space trajectory from q_start to an IK solution of
    the goal pose, time-parameterized; raises StartInCollision, GoalUnreachable
    or NoPathFound."""
    rng = random.Random(seed)
    q_start = arm.check_config(q_start)
    if not arm.in_limits(q_start):
        raise StartInCollision("start configuration violates joint limits")
    if not config_free(arm, q_start, world.obstacles):
        raise StartInCollision("start configuration is in collision")

    goals = _goal_configs(arm, world, goal, q_start, rng)
    if not goals:
        raise GoalUnreachable(f"no collision-free IK solution at {goal}")

    path = None
    for g in goals:  # direct joint-space interpolation first
        if _edge_free(arm, world.obstacles, q_start, g, COARSE_RESOLUTION):
            path = [q_start, g]
            break

    if path is None:
        path = _birrt(arm, world, q_start, goals, rng, budget)
        path = _shortcut(arm, world, path, rng)

    dense = _densify(path)
    times = _trapezoidal_times(dense)
    traj = Trajectory(id=_next_traj_id(rng), times=times, waypoints=dense,
                      planner="birrt", world_hash=world.content_hash)
    return traj


def _birrt(arm, world, q_start, goals, rng, budget):
    lo, hi = arm.limits[:, 0], arm.limits[:, 1]
    obstacles = world.obstacles
    tree_a = {"q": [q_start], "parent": [-1]}
    tree_b = {"q": [g for g in goals], "parent": [-1] * len(goals)}
    a_is_start = True

    def try_extend(tree, q_rand):
        nodes = np.asarray(tree["q"])
        i = _nearest(nodes, q_rand)
        q_new = _steer(nodes[i], q_rand, EXTEND_STEP)
        if _edge_free(arm, obstacles, nodes[i], q_new, COARSE_RESOLUTION):
            tree["q"].append(q_new)
            tree["parent"].append(i)
            return len(tree["q"]) - 1
        return -1

    def try_connect(tree, q_target):
        # greedily extend toward q_target until reached or blocked
        while True:
            nodes = np.asarray(tree["q"])
            i = _nearest(nodes, q_target)
            q_new = _steer(nodes[i], q_target, EXTEND_STEP)
            if not _edge_free(arm, obstacles, nodes[i], q_new, COARSE_RESOLUTION):
                return -1
            tree["q"].append(q_new)
            tree["parent"].append(i)
            if np.max(np.abs(q_new - q_target)) < 1e-9:
                return len(tree["q"]) - 1

    def backtrack(tree, idx):
        out = []
        while idx >= 0:
            out.append(np.asarray(tree["q"][idx]))
            idx = tree["parent"][idx]
        return out

    for _ in range(budget):
        q_rand = np.array([rng.uniform(lo[i], hi[i]) for i in range(arm.dof)])
        new_i = try_extend(tree_a, q_rand)
        if new_i >= 0:
            q_new = np.asarray(tree_a["q"][new_i])
            join_i = try_connect(tree_b, q_new)
            if join_i >= 0:
                part_a = backtrack(tree_a, new_i)[::-1]
                part_b = backtrack(tree_b, join_i)
                path = part_a + part_b[1:] if len(part_b) > 0 else part_a
                if not a_is_start:
                    path = path[::-1]
                return path
        tree_a, tree_b = tree_b, tree_a
        a_is_start = not a_is_start
    raise NoPathFound(f"no path within {budget} samples")


def rehearse(traj: Trajectory, arm: ArmModel, world: WorldModel,
             resolution: float = FINE_RESOLUTION) -> RehearsalReport:
    """Kinematic playback at fine resolution against the given world model.

    Pure: touches no simulation state. Reports the first collision (time and
    offending pair), the minimum clearance seen, and joint-limit violations.
    """
    min_clear = np.inf
    first = None
    limit_violations = []
    for i, q in enumerate(traj.waypoints):
        if not arm.in_limits(q):
            limit_violations.append((float(traj.times[i]), i))

    wps = traj.waypoints
    times = traj.times
    for i in range(len(wps)):
        if i == 0:
            samples = [(float(times[0]), wps[0])]
        else:
            dist = float(np.max(np.abs(wps[i] - wps[i - 1])))
            n = max(1, int(np.ceil(dist / resolution)))
            samples = [(float(times[i - 1] + (times[i] - times[i - 1]) * k / n),
                        wps[i - 1] + (wps[i] - wps[i - 1]) * (k / n))
                       for k in range(1, n + 1)]
        for t, q in samples:
            d, pair = config_min_distance(arm, q, world.obstacles)
            if d < min_clear:
                min_clear = d
            if d < 0.0 and first is None:
                first = (t, pair)
    return RehearsalReport(collision_free=first is None and not limit_violations,
                           first_violation=first,
                           min_clearance=float(min_clear),
                           limit_violations=limit_violations)


# -- trajectory files ---------------------------------------------------------

def save_trajectory(traj: Trajectory, path):
    data = {
        "format_version": TRAJECTORY_FORMAT_VERSION,
        "id": int(traj.id),
        "planner": traj.planner,
        "world_hash": int(traj.world_hash),
        "dof": int(traj.waypoints.shape[1]),
        "waypoints": [[float(t)] + [float(x) for x in q]
                      for t, q in zip(traj.times, traj.waypoints)],
    }
    with open(path, "w") as fh:
        yaml.safe_dump(data, fh, sort_keys=False)


def load_trajectory(path) -> Trajectory:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if data.get("format_version") != TRAJECTORY_FORMAT_VERSION:
        raise ValueError(f"unsupported trajectory format_version {data.get('format_version')!r}")
    rows = np.asarray(data["waypoints"], dtype=float)
    return Trajectory(id=data["id"], times=rows[:, 0], waypoints=rows[:, 1:],
                      planner=data.get("planner", "unknown"),
                      world_hash=data.get("world_hash", 0))
