"""Master-side haptic mapping: engagement, camera-frame 1:1 position mapping,
force-feedback scaling with payload gravity compensation, tremor filtering.

The stylus lives in the device frame; displacements map 1:1 (scale exactly
1.0) into the active camera frame, so pushing the stylus right moves the
end-effector right on that camera's image. Commands are only emitted while
engaged, and engagement requires the stylus orientation (expressed through the
camera frame) to match the end-effector's.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels as K
from .geometry import Pose, orientation_error

GRAVITY = 9.81

# entry-level haptic device workspace, metres (x, y, z half-widths)
DEVICE_WORKSPACE_HALF = (0.08, 0.06, 0.035)

DEFAULT_ENGAGE_TOLERANCE = 0.15  # rad


class AlreadyEngaged(Exception):
    pass


class NotEngaged(Exception):
    pass


@dataclass
class StylusState:
    pose: Pose = field(default_factory=Pose)   # device frame
    button: bool = False


@dataclass
class MappingConfig:
    force_scale: float = 0.1
    active_camera: str = "rear"
    camera_poses: dict = field(default_factory=dict)   # name -> Pose (world)
    payload_mass: float = 0.0
    position_scale: float = 1.0        # fixed by the operations concept
    orientation_lock: bool = False     # lock ee orientation during teleop
    workspace_half: tuple = DEVICE_WORKSPACE_HALF

    def __post_init__(self):
        if self.position_scale != 1.0:
            raise ValueError("position mapping is 1:1 by design; scale must be 1.0")
        if not 0.0 < self.force_scale <= 1.0:
            raise ValueError("force_scale must be in (0, 1]")

    def camera_rotation(self) -> np.ndarray:
        pose = self.camera_poses.get(self.active_camera)
        return pose.orientation if pose is not None else np.array([0.0, 0.0, 0.0, 1.0])

    def in_workspace(self, stylus_pos) -> bool:
        h = self.workspace_half
        return all(abs(float(stylus_pos[i])) <= h[i] + 1e-12 for i in range(3))

    def clamp_to_workspace(self, stylus_pos) -> np.ndarray:
        h = np.asarray(self.workspace_half)
        return np.clip(np.asarray(stylus_pos, dtype=float), -h, h)


@dataclass
class EngagementState:
    engaged: bool = False
    anchor_stylus: Pose | None = None   # device frame, captured at engage
    anchor_ee: Pose | None = None       # world frame, captured at engage


def stylus_orientation_world(cfg: MappingConfig, stylus: StylusState) -> np.ndarray:
    """Stylus orientation expressed through the active camera frame."""
    return K.quat_mul(cfg.camera_rotation(), stylus.pose.orientation)


def try_engage(est: EngagementState, cfg: MappingConfig, stylus: StylusState,
               ee_pose: Pose, tol: float = DEFAULT_ENGAGE_TOLERANCE):
    """Engage iff the stylus and end-effector orientations match within tol.

    On acceptance the current stylus and ee poses become the mapping anchors,
    so the first emitted reference equals the current ee pose (no jump).
    Returns (EngagementState, accepted).
    """
    if est.engaged:
        raise AlreadyEngaged("already engaged")
    err = orientation_error(stylus_orientation_world(cfg, stylus), ee_pose.orientation)
    if err > tol:
        return est, False
    return EngagementState(engaged=True,
                           anchor_stylus=stylus.pose,
                           anchor_ee=ee_pose), True


def disengage(est: EngagementState) -> EngagementState:
    """Drop the anchors; the slave keeps tracking the last emitted reference."""
    if not est.engaged:
        raise NotEngaged("not engaged")
    return EngagementState(engaged=False)


def map_position(est: EngagementState, cfg: MappingConfig, stylus: StylusState) -> Pose:
    """Stylus pose -> end-effector reference (world frame), relative 1:1.

    reference = anchor_ee + R_cam (stylus - anchor_stylus), orientation mapped
    relatively through the camera frame unless orientation_lock is set.
    Positions outside the device workspace are clamped.
    """
    if not est.engaged:
        raise NotEngaged("mapping requires engagement")
    q_cam = cfg.camera_rotation()
    delta_dev = cfg.clamp_to_workspace(stylus.pose.position) - est.anchor_stylus.position
    pos = est.anchor_ee.position + K.quat_rotate(q_cam, delta_dev)
    if cfg.orientation_lock:
        quat = est.anchor_ee.orientation
    else:
        q_delta_dev = K.quat_mul(stylus.pose.orientation,
                                 K.quat_conj(est.anchor_stylus.orientation))
        q_delta_world = K.quat_mul(K.quat_mul(q_cam, q_delta_dev), K.quat_conj(q_cam))
        quat = K.quat_mul(q_delta_world, est.anchor_ee.orientation)
    return Pose(pos, quat)


def map_force(cfg: MappingConfig, wrench, holding: bool) -> np.ndarray:
    """Measured flange force -> device force (N), payload weight compensated.

    The contact force, minus the held sample's weight, is rotated into the
    device frame (through the active camera, matching the position mapping)
    and scaled from tens of newtons down to the order of units.
    """
    force = np.asarray(wrench, dtype=float)[:3].copy()
    if holding:
        force[2] += cfg.payload_mass * GRAVITY  # remove the -mg payload term
    q_cam = cfg.camera_rotation()
    return cfg.force_scale * K.quat_rotate(K.quat_conj(q_cam), force)


class TremorFilter:
    """First-order low-pass on the stylus pose: zero overshoot, DC gain 1.

    Translation filters per axis; orientation is pulled toward the raw input
    by spherical interpolation with the same time constant.
    """

    def __init__(self, cutoff_hz: float = 2.0):
        if cutoff_hz <= 0:
            raise ValueError("cutoff must be positive")
        self.cutoff_hz = cutoff_hz
        self.tau = 1.0 / (2.0 * math.pi * cutoff_hz)
        self._pos = None
        self._quat = None

    def reset(self, pose: Pose | None = None):
        self._pos = None if pose is None else pose.position.copy()
        self._quat = None if pose is None else pose.orientation.copy()

    def filter(self, raw: Pose, dt: float) -> Pose:
        alpha = dt / (self.tau + dt)
        if self._pos is None:
            self._pos = raw.position.copy()
            self._quat = raw.orientation.copy()
        else:
            self._pos = self._pos + alpha * (raw.position - self._pos)
            self._quat = K.quat_slerp(self._quat, raw.orientation, alpha)
        return Pose(self._pos, self._quat)
