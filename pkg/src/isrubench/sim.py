"""Slave-side simulation: impedance-controlled end-effector, contact, gripper.

The end-effector is a 6-DOF virtual mass under diagonal stiffness/damping
toward the last received reference pose; contact with the ground and the
assembly slot produces spring-damper wrenches. Joint space is kinematic only
(FK/IK/planning); the tracked dynamics live in Cartesian space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np
import yaml

from . import kernels as K
from .geometry import Pose, quat_about_axis

ENV_CONFIG_VERSION = 1
GRAVITY = 9.81

GRIPPER_OPEN = "open"
GRIPPER_CLOSING = "closing"
GRIPPER_HOLDING = "holding"

# sample grasped between the fingers: sample frame in grasp frame, z flipped
# (tool z points at the sample, sample z points back up)
_GRASP_FLIP = quat_about_axis((1.0, 0.0, 0.0), math.pi)


class NotHolding(Exception):
    """Release requested while no sample is grasped."""


@dataclass
class ImpedanceParams:
    stiffness: np.ndarray
    damping: np.ndarray
    virtual_mass: np.ndarray

    @staticmethod
    def default() -> "ImpedanceParams":
        k = np.array([600.0, 600.0, 600.0, 30.0, 30.0, 30.0])
        m = np.array([5.0, 5.0, 5.0, 0.5, 0.5, 0.5])
        return ImpedanceParams(k, 2.0 * np.sqrt(k * m), m)

    def __post_init__(self):
        self.stiffness = np.asarray(self.stiffness, dtype=float)
        self.damping = np.asarray(self.damping, dtype=float)
        self.virtual_mass = np.asarray(self.virtual_mass, dtype=float)
        for name in ("stiffness", "damping", "virtual_mass"):
            v = getattr(self, name)
            if v.shape != (6,) or np.any(v <= 0):
                raise ValueError(f"{name} must be 6 positive diagonal entries")
        critical = 2.0 * np.sqrt(self.stiffness * self.virtual_mass)
        if np.any(self.damping < 0.7 * critical - 1e-12):
            raise ValueError("damping below 0.7 of critical: tracking would ring")


@dataclass
class SafetyMonitor:
    force_limit: float = 30.0
    torque_limit: float = 10.0

    def __post_init__(self):
        if self.force_limit <= 0 or self.torque_limit <= 0:
            raise ValueError("safety limits must be positive")

    def check(self, wrench) -> bool:
        f = float(np.linalg.norm(wrench[:3]))
        t = float(np.linalg.norm(wrench[3:]))
        return f > self.force_limit or t > self.torque_limit


@dataclass
class SampleSpec:
    half_extents: np.ndarray      # (hx, hy, hz), hz = half length along the peg axis
    pose: Pose
    mass: float = 0.2
    grasp_offset: float = 0.025   # grasp point height above the sample centre

    def __post_init__(self):
        self.half_extents = np.asarray(self.half_extents, dtype=float)
        if np.any(self.half_extents <= 0) or self.mass <= 0:
            raise ValueError("sample dimensions and mass must be positive")


@dataclass
class SlotSpec:
    pose: Pose                    # hole axis = slot frame +z, top plane at origin
    hole_cross_section: float     # square side of the opening
    clearance: float
    depth: float = 0.06
    min_insert_depth: float = 0.04
    block_half: float = 0.05      # half-width of the solid block around the hole

    def __post_init__(self):
        if self.clearance <= 0:
            raise ValueError("clearance must be positive")
        if self.depth <= 0 or self.hole_cross_section <= 0:
            raise ValueError("slot dimensions must be positive")
        if self.block_half <= 0.5 * self.hole_cross_section:
            raise ValueError("slot block must be wider than the hole")


@dataclass
class EnvModel:
    ground_plane_height: float
    sample: SampleSpec
    slot: SlotSpec
    wall_stiffness: float = 5000.0
    wall_damping: float = 50.0

    def __post_init__(self):
        cross = 2.0 * self.sample.half_extents[0]
        expect = cross + self.slot.clearance
        if abs(self.slot.hole_cross_section - expect) > 1e-9:
            raise ValueError(
                f"hole cross-section {self.slot.hole_cross_section} != "
                f"sample cross-section {cross} + clearance {self.slot.clearance}")
        if self.wall_stiffness <= 0 or self.wall_damping < 0:
            raise ValueError("wall stiffness must be positive, damping non-negative")

    def grasp_point(self, sample_pose: Pose) -> np.ndarray:
        return sample_pose.transform_point((0.0, 0.0, self.sample.grasp_offset))

    def grasp_target_pose(self, sample_pose: Pose) -> Pose:
        """EE pose at which the canonical grasp reproduces the sample pose."""
        return Pose(self.grasp_point(sample_pose),
                    K.quat_mul(sample_pose.orientation, _GRASP_FLIP))

    def canonical_grasp_rel(self) -> Pose:
        return Pose((0.0, 0.0, self.sample.grasp_offset), _GRASP_FLIP)

    def insert_target_pose(self, tip_clearance: float = 0.0) -> Pose:
        """EE pose with the held peg centred on the hole, tip at the top plane
        plus ``tip_clearance``."""
        half_len = self.sample.half_extents[2]
        tip = self.slot.pose.transform_point((0.0, 0.0, tip_clearance))
        ee_quat = K.quat_mul(self.slot.pose.orientation, _GRASP_FLIP)
        offset = half_len + self.sample.grasp_offset
        ee_pos = tip + self.slot.pose.rotate_vector((0.0, 0.0, offset))
        return Pose(ee_pos, ee_quat)

    def tip_depth(self, sample_pose: Pose) -> float:
        """Insertion depth of the peg tip below the slot top plane (>0 inside)."""
        tip = sample_pose.transform_point((0.0, 0.0, -self.sample.half_extents[2]))
        tip_s = self.slot.pose.inverse().transform_point(tip)
        return -float(tip_s[2])

    def lateral_offset(self, sample_pose: Pose) -> np.ndarray:
        tip = sample_pose.transform_point((0.0, 0.0, -self.sample.half_extents[2]))
        tip_s = self.slot.pose.inverse().transform_point(tip)
        return tip_s[:2]

    def assembled(self, sample_pose: Pose) -> bool:
        """Sample seated in the slot: centred within the clearance and deep enough."""
        off = self.lateral_offset(sample_pose)
        allowed = 0.5 * self.slot.clearance + 5e-4
        if abs(off[0]) > allowed or abs(off[1]) > allowed:
            return False
        if self.tip_depth(sample_pose) < self.slot.min_insert_depth:
            return False
        axis = sample_pose.rotate_vector((0, 0, 1))
        slot_axis = self.slot.pose.rotate_vector((0, 0, 1))
        return float(np.dot(axis, slot_axis)) > math.cos(0.15)

    def pack(self, sim_cfg: "SimConfig") -> np.ndarray:
        out = np.empty(17)
        out[0] = self.ground_plane_height
        out[1:4] = self.slot.pose.position
        out[4:8] = self.slot.pose.orientation
        out[8] = 0.5 * self.slot.hole_cross_section
        out[9] = self.sample.half_extents[0]
        out[10] = self.slot.depth
        out[11] = self.wall_stiffness
        out[12] = self.wall_damping
        out[13] = self.sample.half_extents[2]
        out[14] = sim_cfg.ee_contact_radius
        out[15] = self.slot.block_half
        out[16] = sim_cfg.tip_edge_radius
        return out


@dataclass
class SimConfig:
    dt: float = 0.01
    impedance: ImpedanceParams = field(default_factory=ImpedanceParams.default)
    safety: SafetyMonitor = field(default_factory=SafetyMonitor)
    capture_radius: float = 0.01
    capture_angle: float = 0.2
    close_time: float = 0.3
    ee_contact_radius: float = 0.01
    tip_edge_radius: float = 0.0025   # peg tip chamfer, sets the self-centring band
    gravity: float = GRAVITY


@dataclass
class SimState:
    ee_pose: Pose
    ee_twist: np.ndarray          # (6,) world [v, w]
    last_reference: Pose
    gripper: str = GRIPPER_OPEN
    grasped_rel: Pose | None = None   # grasp frame -> sample frame while holding
    clock: float = 0.0
    safety_tripped: bool = False

    def copy(self) -> "SimState":
        return replace(self, ee_pose=self.ee_pose, ee_twist=self.ee_twist.copy())


class ManipulatorSim:
    """Single-owner simulation instance; step() advances one fixed dt tick."""

    def __init__(self, env: EnvModel, config: SimConfig | None = None,
                 start_pose: Pose | None = None):
        self.env = env
        self.config = config or SimConfig()
        start = start_pose or Pose((0.3, 0.0, 0.4), _GRASP_FLIP)
        self.state = SimState(ee_pose=start, ee_twist=np.zeros(6), last_reference=start)
        self.sample_pose = env.sample.pose
        self._env_pack = env.pack(self.config)
        self._close_timer = -1.0
        self.last_wrench = np.zeros(6)

    # -- queries -------------------------------------------------------------

    def current_sample_pose(self) -> Pose:
        if self.state.gripper == GRIPPER_HOLDING:
            return self.state.ee_pose.compose(self.state.grasped_rel)
        return self.sample_pose

    def holding(self) -> bool:
        return self.state.gripper == GRIPPER_HOLDING

    # -- gripper -------------------------------------------------------------

    def command_gripper(self, close: bool):
        """close=True starts the finger-closing timer; False releases."""
        if close:
            if self.state.gripper == GRIPPER_OPEN:
                self.state.gripper = GRIPPER_CLOSING
                self._close_timer = self.config.close_time
        else:
            if self.state.gripper == GRIPPER_HOLDING:
                self.release()
            elif self.state.gripper == GRIPPER_CLOSING:
                self.state.gripper = GRIPPER_OPEN
                self._close_timer = -1.0

    def grasp_attempt(self) -> bool:
        """Close the fingers now: holding iff the sample is within the capture
        radius of the grasp frame and the approach axes are aligned."""
        st = self.state
        cfg = self.config
        target = self.env.grasp_point(self.sample_pose)
        pos_err = float(np.linalg.norm(st.ee_pose.position - target))
        ee_axis = st.ee_pose.rotate_vector((0, 0, 1))
        sample_axis = self.sample_pose.rotate_vector((0, 0, 1))
        cosang = float(np.clip(-np.dot(ee_axis, sample_axis), -1.0, 1.0))
        angle = math.acos(cosang)
        if pos_err <= cfg.capture_radius and angle <= cfg.capture_angle:
            # two-finger grippers self-centre the part: snap to the canonical grasp
            st.gripper = GRIPPER_HOLDING
            st.grasped_rel = self.env.canonical_grasp_rel()
            return True
        st.gripper = GRIPPER_OPEN
        return False

    def release(self):
        st = self.state
        if st.gripper != GRIPPER_HOLDING:
            raise NotHolding("release with no sample grasped")
        self.sample_pose = st.ee_pose.compose(st.grasped_rel)
        st.gripper = GRIPPER_OPEN
        st.grasped_rel = None

    # -- dynamics ------------------------------------------------------------

    def measured_wrench(self) -> np.ndarray:
        """External wrench at the flange right now: contact plus payload weight."""
        st = self.state
        holding = st.gripper == GRIPPER_HOLDING
        rel = st.grasped_rel or Pose.identity()
        w = K.contact_wrench(self._env_pack, st.ee_pose.position, st.ee_pose.orientation,
                             st.ee_twist[:3], st.ee_twist[3:], holding,
                             rel.position, rel.orientation)
        if holding:
            fg = np.array([0.0, 0.0, -self.env.sample.mass * self.config.gravity])
            w[:3] += fg
            c = st.ee_pose.rotate_vector(rel.position)
            w[3:] += np.cross(c, fg)
        return w

    def step(self, reference: Pose | None, dt: float | None = None) -> np.ndarray:
        """Advance one tick toward `reference` (None = input starved, hold the
        last one). Returns the measured external wrench for telemetry."""
        st = self.state
        cfg = self.config
        if dt is None:
            dt = cfg.dt
        if abs(dt - cfg.dt) > 1e-12:
            raise ValueError(f"step dt {dt} != configured fixed step {cfg.dt}")

        if reference is not None and not st.safety_tripped:
            st.last_reference = reference

        wrench = self.measured_wrench()
        if not st.safety_tripped and cfg.safety.check(wrench):
            # latch: the commanded setpoint freezes at its current value
            st.safety_tripped = True

        if self._close_timer >= 0.0:
            self._close_timer -= dt
            if self._close_timer < 0.0:
                self.grasp_attempt()

        imp = cfg.impedance
        pos, quat, vel, omg = K.impedance_step(
            st.ee_pose.position, st.ee_pose.orientation,
            st.ee_twist[:3], st.ee_twist[3:],
            st.last_reference.position, st.last_reference.orientation,
            imp.stiffness, imp.damping, imp.virtual_mass, wrench, dt)
        st.ee_pose = Pose(pos, quat)
        st.ee_twist = np.concatenate([vel, omg])
        st.clock += dt
        self.last_wrench = wrench
        return wrench

    def virtual_energy(self) -> float:
        """Kinetic + spring potential toward the current reference (J)."""
        st = self.state
        imp = self.config.impedance
        e_pos = st.last_reference.position - st.ee_pose.position
        e_rot = K.quat_to_rotvec(K.quat_mul(st.last_reference.orientation,
                                            K.quat_conj(st.ee_pose.orientation)))
        v, w = st.ee_twist[:3], st.ee_twist[3:]
        return float(0.5 * (imp.virtual_mass[:3] @ (v * v) + imp.virtual_mass[3:] @ (w * w)
                            + imp.stiffness[:3] @ (e_pos * e_pos) + imp.stiffness[3:] @ (e_rot * e_rot)))


# -- config loading ----------------------------------------------------------

@dataclass
class Scene:
    """Environment plus everything the station/planner layers need from the
    same config file: planning obstacles and camera frames."""
    env: EnvModel
    obstacles: list
    cameras: dict      # name -> Pose (x right, y up, z backward)


def env_from_dict(data: dict):
    """Build an EnvModel from a parsed environment config."""
    version = data.get("format_version")
    if version != ENV_CONFIG_VERSION:
        raise ValueError(f"unsupported env config format_version {version!r}")
    s = data["sample"]
    sample = SampleSpec(
        half_extents=s["half_extents"],
        pose=Pose.from_xyz_rpy(s["xyz"], s.get("rpy", (0, 0, 0))),
        mass=s.get("mass", 0.2),
        grasp_offset=s.get("grasp_offset", 0.025),
    )
    sl = data["slot"]
    slot = SlotSpec(
        pose=Pose.from_xyz_rpy(sl["xyz"], sl.get("rpy", (0, 0, 0))),
        hole_cross_section=sl["hole_cross_section"],
        clearance=sl["clearance"],
        depth=sl.get("depth", 0.06),
        min_insert_depth=sl.get("min_insert_depth", 0.04),
    )
    wall = data.get("wall", {})
    env = EnvModel(
        ground_plane_height=data["ground_plane_height"],
        sample=sample,
        slot=slot,
        wall_stiffness=wall.get("stiffness", 5000.0),
        wall_damping=wall.get("damping", 50.0),
    )
    return env


def scene_from_dict(data: dict) -> Scene:
    from .kinematics import CollisionPrimitive
    from .geometry import look_at_camera

    env = env_from_dict(data)
    obstacles = []
    for node in data.get("obstacles", ()):
        obstacles.append(CollisionPrimitive(
            shape=node["shape"],
            size=tuple(node["size"]),
            local_pose=Pose.from_xyz_rpy(node["xyz"], node.get("rpy", (0, 0, 0))),
            attachment="world",
            name=node.get("name", ""),
        ))
    cameras = {}
    for name, node in data.get("cameras", {}).items():
        cameras[name] = look_at_camera(node["eye"], node["target"])
    return Scene(env=env, obstacles=obstacles, cameras=cameras)


def _read_config(path):
    if path is None:
        text = resources.files("isrubench.configs").joinpath("env_default.yaml").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    return yaml.safe_load(text)


def load_env_model(path=None) -> EnvModel:
    return env_from_dict(_read_config(path))


def load_scene(path=None) -> Scene:
    return scene_from_dict(_read_config(path))
