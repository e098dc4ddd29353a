"""Collision queries between arm-attached bodies and world primitives.

Distances are exact signed separations (negative = overlap); see the kernel
backends for the per-pair formulas. World-world pairs are never checked and
box-box pairs are unsupported (arm links are spheres/capsules).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels as K
from .geometry import Pose
from .kinematics import ArmModel, CollisionPrimitive, link_frames


@dataclass
class CollisionReport:
    collided: bool
    pairs: list          # (name_a, name_b, signed distance) for every overlap
    min_distance: float
    min_pair: tuple      # names of the closest pair, ("", "") when none


def primitive_distance(a: CollisionPrimitive, pose_a: Pose,
                       b: CollisionPrimitive, pose_b: Pose) -> float:
    """Signed distance between two primitives at the given world poses."""
    return K.pair_distance(a.type_code(), a.padded_size(), pose_a.position, pose_a.orientation,
                           b.type_code(), b.padded_size(), pose_b.position, pose_b.orientation)


def _world_pack(world):
    return (
        np.array([b.type_code() for b in world], dtype=np.int32),
        np.stack([b.padded_size() for b in world]) if world else np.zeros((0, 3)),
        np.stack([b.local_pose.position for b in world]) if world else np.zeros((0, 3)),
        np.stack([b.local_pose.orientation for b in world]) if world else np.zeros((0, 4)),
    )


def config_min_distance(arm: ArmModel, q, world, *, stop_below=-np.inf):
    """Fast path: minimum signed distance over all checked pairs at config q.

    Returns (distance, (name_a, name_b)). ``stop_below`` allows early-out, e.g.
    0.0 when only the boolean answer matters.
    """
    q = arm.check_config(q)
    body_link, body_type, body_params, body_lpos, body_lquat = arm.body_pack()
    wt, wp, wpos, wquat = _world_pack(list(world))
    d, kind, ia, ib = K.arm_config_distance(
        arm.fixed_pos, arm.fixed_quat, arm.axes, q,
        body_link, body_type, body_params, body_lpos, body_lquat,
        wt, wp, wpos, wquat, arm.self_pair_mask(), stop_below)
    if ia < 0:
        return float("inf"), ("", "")
    name_a = arm.collision_bodies[ia].name or f"arm[{ia}]"
    if kind == 0:
        world = list(world)
        name_b = world[ib].name or f"world[{ib}]"
    else:
        name_b = arm.collision_bodies[ib].name or f"arm[{ib}]"
    return float(d), (name_a, name_b)


def config_free(arm: ArmModel, q, world) -> bool:
    d, _ = config_min_distance(arm, q, world, stop_below=0.0)
    return d >= 0.0


def check_collision(arm: ArmModel, q, world) -> CollisionReport:
    """Full report: arm vs world plus non-adjacent arm-arm pairs.

    Adjacent arm bodies (attachment links differing by <= 1) are skipped, the
    usual serial-arm convention since neighbours touch by construction.
    """
    world = list(world)
    frames = link_frames(arm, q)
    placed = []
    for body in arm.collision_bodies:
        placed.append((body, frames[body.attachment].compose(body.local_pose)))

    pairs = []
    min_d = float("inf")
    min_pair = ("", "")

    def record(name_a, name_b, d):
        nonlocal min_d, min_pair
        if d < min_d:
            min_d = d
            min_pair = (name_a, name_b)
        if d < 0.0:
            pairs.append((name_a, name_b, d))

    mask = arm.self_pair_mask()
    for i, (body, pose) in enumerate(placed):
        name_a = body.name or f"arm[{i}]"
        for j, wbody in enumerate(world):
            name_b = wbody.name or f"world[{j}]"
            record(name_a, name_b, primitive_distance(body, pose, wbody, wbody.local_pose))
    for i in range(len(placed)):
        for j in range(i + 1, len(placed)):
            if not mask[i, j]:
                continue
            a, pa = placed[i]
            b, pb = placed[j]
            record(a.name or f"arm[{i}]", b.name or f"arm[{j}]",
                   primitive_distance(a, pa, b, pb))

    return CollisionReport(collided=bool(pairs), pairs=pairs,
                           min_distance=min_d, min_pair=min_pair)
