"""Serial-arm model, forward kinematics, Jacobian, and damped-least-squares IK.

The arm is a fixed-transform + rotation-axis chain (one revolute joint per
link) loaded from a versioned YAML file with explicit units (m, rad). Joint
configurations are plain float64 arrays of length ``arm.dof``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import yaml

from . import kernels as K
from .geometry import Pose, orientation_error, rotation_vector

ARM_CONFIG_VERSION = 1


class KinematicsError(Exception):
    pass


class NoConvergence(KinematicsError):
    """IK ran out of iterations without meeting tolerance."""


class JointLimitViolation(KinematicsError):
    """IK stalled against joint limits and cannot recover by clamping."""


@dataclass(frozen=True)
class CollisionPrimitive:
    """Sphere, capsule (axis = local z), or box, attached to a link or the world.

    size: sphere (radius,), capsule (radius, half_length), box half-extents.
    attachment: "world" or a link index, 0 = arm base, i = frame after joint i.
    """

    shape: str
    size: tuple
    local_pose: Pose = field(default_factory=Pose)
    attachment: object = "world"
    name: str = ""

    def __post_init__(self):
        if self.shape not in ("sphere", "capsule", "box"):
            raise ValueError(f"unknown shape {self.shape!r}")
        expect = {"sphere": 1, "capsule": 2, "box": 3}[self.shape]
        if len(self.size) != expect:
            raise ValueError(f"{self.shape} needs {expect} size entries, got {len(self.size)}")
        if any(s <= 0.0 for s in self.size):
            raise ValueError(f"{self.shape} dimensions must be positive: {self.size}")

    def type_code(self) -> int:
        return {"sphere": K.SPHERE, "capsule": K.CAPSULE, "box": K.BOX}[self.shape]

    def padded_size(self) -> np.ndarray:
        out = np.zeros(3)
        out[: len(self.size)] = self.size
        return out


class ArmModel:
    """Serial chain: per-joint fixed transform + rotation axis, limits, bodies."""

    def __init__(self, joint_xyz, joint_rpy, joint_axes, joint_limits,
                 ee_offset: Pose, collision_bodies=(), q_home=None, name="arm",
                 disabled_self_pairs=()):
        self.dof = len(joint_xyz)
        if self.dof < 6:
            raise ValueError(f"arm needs >= 6 DOF, got {self.dof}")
        self.name = name
        self.fixed_pos = np.asarray(joint_xyz, dtype=float).reshape(self.dof, 3)
        self.fixed_quat = np.stack([Pose.from_xyz_rpy((0, 0, 0), r).orientation for r in joint_rpy])
        axes = np.asarray(joint_axes, dtype=float).reshape(self.dof, 3)
        self.axes = axes / np.linalg.norm(axes, axis=1, keepdims=True)
        self.limits = np.asarray(joint_limits, dtype=float).reshape(self.dof, 2)
        if np.any(self.limits[:, 0] >= self.limits[:, 1]):
            raise ValueError("joint limits must satisfy lo < hi")
        self.ee_offset = ee_offset
        self.collision_bodies = list(collision_bodies)
        for b in self.collision_bodies:
            if not isinstance(b.attachment, int) or not 0 <= b.attachment <= self.dof:
                raise ValueError(f"body {b.name!r} attached to invalid link {b.attachment!r}")
        self.q_home = (np.zeros(self.dof) if q_home is None
                       else np.asarray(q_home, dtype=float).copy())
        # Pairs that touch by construction (like an SRDF disabled-collisions list).
        self.disabled_self_pairs = {frozenset(p) for p in disabled_self_pairs}
        self._pack = None
        self._mask = None

    def self_pair_mask(self) -> np.ndarray:
        """uint8 (nb, nb): 1 where an arm-arm pair must be checked.

        Bodies on the same or neighbouring links are skipped, as are pairs
        disabled by name in the model config.
        """
        if self._mask is None:
            bodies = self.collision_bodies
            nb = len(bodies)
            mask = np.zeros((nb, nb), dtype=np.uint8)
            for i in range(nb):
                for j in range(i + 1, nb):
                    if abs(bodies[i].attachment - bodies[j].attachment) <= 1:
                        continue
                    if frozenset((bodies[i].name, bodies[j].name)) in self.disabled_self_pairs:
                        continue
                    mask[i, j] = 1
                    mask[j, i] = 1
            self._mask = mask
        return self._mask

    def check_config(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if q.shape != (self.dof,):
            raise ValueError(f"expected {self.dof} joint angles, got shape {q.shape}")
        return q

    def in_limits(self, q) -> bool:
        q = self.check_config(q)
        return bool(np.all(q >= self.limits[:, 0]) and np.all(q <= self.limits[:, 1]))

    def clamp(self, q) -> np.ndarray:
        return np.clip(self.check_config(q), self.limits[:, 0], self.limits[:, 1])

    def body_pack(self):
        """Arrays consumed by the collision kernels, cached."""
        if self._pack is None:
            bodies = self.collision_bodies
            self._pack = (
                np.array([b.attachment for b in bodies], dtype=np.int32),
                np.array([b.type_code() for b in bodies], dtype=np.int32),
                np.stack([b.padded_size() for b in bodies]) if bodies else np.zeros((0, 3)),
                np.stack([b.local_pose.position for b in bodies]) if bodies else np.zeros((0, 3)),
                np.stack([b.local_pose.orientation for b in bodies]) if bodies else np.zeros((0, 4)),
            )
        return self._pack

    def with_extra_body(self, body: CollisionPrimitive) -> "ArmModel":
        """Copy of the model with one more attached body (e.g. a held payload)."""
        clone = ArmModel.__new__(ArmModel)
        clone.dof = self.dof
        clone.name = self.name
        clone.fixed_pos = self.fixed_pos
        clone.fixed_quat = self.fixed_quat
        clone.axes = self.axes
        clone.limits = self.limits
        clone.ee_offset = self.ee_offset
        clone.collision_bodies = self.collision_bodies + [body]
        clone.q_home = self.q_home
        clone.disabled_self_pairs = self.disabled_self_pairs
        clone._pack = None
        clone._mask = None
        return clone


def link_frames(arm: ArmModel, q) -> list:
    """Pose of the base and of the frame after each joint, in base coordinates."""
    q = arm.check_config(q)
    pos, quat = K.fk_frames(arm.fixed_pos, arm.fixed_quat, arm.axes, q)
    frames = [Pose.identity()]
    frames.extend(Pose(pos[i], quat[i]) for i in range(arm.dof))
    return frames


def forward_kinematics(arm: ArmModel, q) -> Pose:
    """Grasp-frame pose in the base frame (flange chain + ee offset)."""
    q = arm.check_config(q)
    pos, quat = K.fk_frames(arm.fixed_pos, arm.fixed_quat, arm.axes, q)
    flange = Pose(pos[-1], quat[-1])
    return flange.compose(arm.ee_offset)


def jacobian(arm: ArmModel, q) -> np.ndarray:
    """Geometric Jacobian (6 x dof) of the grasp frame: rows [v; w], base frame."""
    q = arm.check_config(q)
    pos, quat = K.fk_frames(arm.fixed_pos, arm.fixed_quat, arm.axes, q)
    p_ee = Pose(pos[-1], quat[-1]).compose(arm.ee_offset).position
    J = np.zeros((6, arm.dof))
    for i in range(arm.dof):
        z = K.quat_rotate(quat[i], arm.axes[i])
        J[:3, i] = np.cross(z, p_ee - pos[i])
        J[3:, i] = z
    return J


def solve_ik(arm: ArmModel, target: Pose, seed, *, pos_tol=1e-7, rot_tol=1e-5,
             damping=1e-3, max_iters=200, max_step=0.5) -> np.ndarray:
    """Damped least-squares IK with joint-limit clamping.

    Raises NoConvergence when the budget runs out and JointLimitViolation when
    progress stalls with joints pinned at their limits.
    """
    q = arm.clamp(seed)
    lam2 = damping * damping
    stall = 0
    prev_err = np.inf
    for _ in range(max_iters):
        fk = forward_kinematics(arm, q)
        e = np.empty(6)
        e[:3] = target.position - fk.position
        e[3:] = rotation_vector(target.orientation, fk.orientation)
        pos_err = float(np.linalg.norm(e[:3]))
        rot_err = float(np.linalg.norm(e[3:]))
        if pos_err <= pos_tol and rot_err <= rot_tol:
            return q
        J = jacobian(arm, q)
        JJt = J @ J.T + lam2 * np.eye(6)
        dq = J.T @ np.linalg.solve(JJt, e)
        step = float(np.max(np.abs(dq)))
        if step > max_step:
            dq *= max_step / step
        q = arm.clamp(q + dq)
        err = pos_err + rot_err
        if err > prev_err - 1e-12:
            stall += 1
            if stall >= 10:
                at_limit = np.any((q <= arm.limits[:, 0]) | (q >= arm.limits[:, 1]))
                if at_limit:
                    raise JointLimitViolation(
                        f"IK stalled at joint limits, residual {pos_err:.2e} m / {rot_err:.2e} rad")
                raise NoConvergence(
                    f"IK stalled, residual {pos_err:.2e} m / {rot_err:.2e} rad")
        else:
            stall = 0
        prev_err = err
    raise NoConvergence(f"IK did not converge in {max_iters} iterations")


def _pose_from_node(node) -> Pose:
    return Pose.from_xyz_rpy(node.get("xyz", (0, 0, 0)), node.get("rpy", (0, 0, 0)))


def arm_from_dict(data: dict) -> ArmModel:
    version = data.get("format_version")
    if version != ARM_CONFIG_VERSION:
        raise ValueError(f"unsupported arm config format_version {version!r}")
    joints = data["joints"]
    bodies = []
    for node in data.get("collision_bodies", ()):
        bodies.append(CollisionPrimitive(
            shape=node["shape"],
            size=tuple(node["size"]),
            local_pose=_pose_from_node(node),
            attachment=node["link"],
            name=node.get("name", ""),
        ))
    ee = data.get("ee_offset", {})
    return ArmModel(
        joint_xyz=[j["xyz"] for j in joints],
        joint_rpy=[j["rpy"] for j in joints],
        joint_axes=[j.get("axis", (0, 0, 1)) for j in joints],
        joint_limits=[j["limits"] for j in joints],
        ee_offset=_pose_from_node(ee),
        collision_bodies=bodies,
        q_home=data.get("q_home"),
        name=data.get("name", "arm"),
        disabled_self_pairs=[tuple(p) for p in data.get("disabled_self_collisions", ())],
    )


def load_arm_model(path=None) -> ArmModel:
    """Load an arm model YAML; default is the bundled 7-DOF model."""
    if path is None:
        text = resources.files("isrubench.configs").joinpath("arm_7dof.yaml").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    return arm_from_dict(yaml.safe_load(text))
