"""Rigid-body poses and quaternion helpers.

Pose = translation (m) + unit quaternion, the datum every other module trades
in. Quaternions are scalar-last [x, y, z, w], normalized and canonicalized to
a non-negative scalar part on construction, so q and -q have one
representation.
"""

from __future__ import annotations

import math

import numpy as np

from . import kernels as K


def _canonicalize(q: np.ndarray) -> np.ndarray:
    if q[3] < 0.0:
        return -q
    if q[3] == 0.0:
        for i in range(3):
            if q[i] != 0.0:
                return -q if q[i] < 0.0 else q
    return q


class Pose:
    """Rigid transform: rotate by `orientation`, then translate by `position`."""

    __slots__ = ("position", "orientation")

    def __init__(self, position=(0.0, 0.0, 0.0), orientation=(0.0, 0.0, 0.0, 1.0)):
        p = np.asarray(position, dtype=float)
        q = np.asarray(orientation, dtype=float)
        if p.shape != (3,):
            raise ValueError(f"position must be a 3-vector, got shape {p.shape}")
        if q.shape != (4,):
            raise ValueError(f"orientation must be a quaternion [x,y,z,w], got shape {q.shape}")
        n = float(np.linalg.norm(q))
        if not 0.5 < n < 2.0:
            raise ValueError(f"quaternion norm {n:.3g} too far from 1 to renormalize")
        self.position = p.copy()
        # idempotent normalization: already-unit quaternions pass through
        # bit-exact, so construction round-trips (codecs, copies) exactly
        if abs(n - 1.0) > 1e-12:
            q = q / n
        else:
            q = q.copy()
        self.orientation = _canonicalize(q)

    @staticmethod
    def identity() -> "Pose":
        return Pose()

    @staticmethod
    def from_xyz_rpy(xyz, rpy) -> "Pose":
        """Translation + roll/pitch/yaw (ZYX convention: yaw about z last)."""
        return Pose(xyz, quat_from_rpy(*rpy))

    def compose(self, other: "Pose") -> "Pose":
        """self then other: world_pose_of_b = a.compose(b) when b is in a's frame."""
        p = self.position + K.quat_rotate(self.orientation, other.position)
        q = K.quat_mul(self.orientation, other.orientation)
        return Pose(p, q)

    def __mul__(self, other: "Pose") -> "Pose":
        return self.compose(other)

    def inverse(self) -> "Pose":
        qi = K.quat_conj(self.orientation)
        return Pose(-K.quat_rotate(qi, self.position), qi)

    def transform_point(self, p) -> np.ndarray:
        return self.position + K.quat_rotate(self.orientation, np.asarray(p, dtype=float))

    def rotate_vector(self, v) -> np.ndarray:
        return K.quat_rotate(self.orientation, np.asarray(v, dtype=float))

    def rotation_matrix(self) -> np.ndarray:
        x, y, z, w = self.orientation
        return np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ])

    def translated(self, delta) -> "Pose":
        return Pose(self.position + np.asarray(delta, dtype=float), self.orientation)

    def approx_equal(self, other: "Pose", pos_tol: float = 1e-9, rot_tol: float = 1e-9) -> bool:
        return (float(np.linalg.norm(self.position - other.position)) <= pos_tol
                and orientation_error(self.orientation, other.orientation) <= rot_tol)

    def to_list(self) -> list:
        return [*map(float, self.position), *map(float, self.orientation)]

    @staticmethod
    def from_list(v) -> "Pose":
        if len(v) != 7:
            raise ValueError("pose list must have 7 entries [x,y,z,qx,qy,qz,qw]")
        return Pose(v[:3], v[3:])

    def __repr__(self) -> str:
        p = ", ".join(f"{c:.6g}" for c in self.position)
        q = ", ".join(f"{c:.6g}" for c in self.orientation)
        return f"Pose([{p}], [{q}])"


def compose(a: Pose, b: Pose) -> Pose:
    return a.compose(b)


def inverse(p: Pose) -> Pose:
    return p.inverse()


def orientation_error(qa, qb) -> float:
    """Geodesic angle (rad) between two rotations; q and -q are equal."""
    return K.quat_angle(np.asarray(qa, dtype=float), np.asarray(qb, dtype=float))


def quat_from_rpy(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """ZYX Euler angles to quaternion [x,y,z,w]."""
    cr, sr = math.cos(0.5 * roll), math.sin(0.5 * roll)
    cp, sp = math.cos(0.5 * pitch), math.sin(0.5 * pitch)
    cy, sy = math.cos(0.5 * yaw), math.sin(0.5 * yaw)
    return np.array([
        sr * cp * cy - cr * sp * sy,
        cr * sp * cy + sr * cp * sy,
        cr * cp * sy - sr * sp * cy,
        cr * cp * cy + sr * sp * sy,
    ])


def quat_about_axis(axis, angle: float) -> np.ndarray:
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    return K.quat_from_rotvec(a * angle)


def rotation_vector(qa, qb) -> np.ndarray:
    """World-frame rotation vector taking orientation qb to qa (axis * angle)."""
    return K.quat_to_rotvec(K.quat_mul(np.asarray(qa, dtype=float),
                                       K.quat_conj(np.asarray(qb, dtype=float))))


def look_at_camera(eye, target, up=(0.0, 0.0, 1.0)) -> Pose:
    """Camera pose at `eye` viewing `target`: x right, y up, z backward."""
    eye = np.asarray(eye, dtype=float)
    fwd = np.asarray(target, dtype=float) - eye
    fwd = fwd / np.linalg.norm(fwd)
    z = -fwd
    x = np.cross(np.asarray(up, dtype=float), z)
    n = np.linalg.norm(x)
    if n < 1e-9:  # looking straight up/down: pick an arbitrary right vector
        x = np.array([1.0, 0.0, 0.0])
    else:
        x = x / n
    y = np.cross(z, x)
    m = np.column_stack([x, y, z])
    t = np.trace(m)
    if t > 0:
        s = math.sqrt(t + 1.0) * 2
        q = np.array([(m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s,
                      (m[1, 0] - m[0, 1]) / s, 0.25 * s])
    else:
        i = int(np.argmax(np.diag(m)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = math.sqrt(1.0 + m[i, i] - m[j, j] - m[k, k]) * 2
        q = np.zeros(4)
        q[i] = 0.25 * s
        q[j] = (m[j, i] + m[i, j]) / s
        q[k] = (m[k, i] + m[i, k]) / s
        q[3] = (m[k, j] - m[j, k]) / s
    return Pose(eye, q)


def random_quat(rng) -> np.ndarray:
    """Uniform random unit quaternion from a seeded rng (numpy Generator or Random)."""
    if hasattr(rng, "standard_normal"):
        v = rng.standard_normal(4)
    else:
        v = np.array([rng.gauss(0.0, 1.0) for _ in range(4)])
    return _canonicalize(v / np.linalg.norm(v))
