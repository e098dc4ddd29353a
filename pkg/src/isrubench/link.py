"""Bilateral wire protocol and tick-quantized delay channel.

Frame format (little-endian, bit-exact):

    magic   u32   0x54534C4B
    version u8    1
    kind    u8    message kind code
    seq     u64   strictly increasing per sender
    stamp   f64   sender clock (s)
    length  u32   payload byte count
    payload bytes
    crc     u32   CRC32C over version..payload

The whole testbed runs on a shared logical clock (default 100 Hz), so delays
are quantized to ticks and every experiment is deterministic: a message pushed
at tick T with one-way delay d becomes available at tick T + round(d/dt)
(plus seeded jitter, never earlier than floor(d/dt)).
"""

from __future__ import annotations

import random
import struct
from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose
from .mission import MissionPhase
from .planning import Trajectory

MAGIC = 0x54534C4B
VERSION = 1

KIND_POSE_REF = 1
KIND_GRIPPER_CMD = 2
KIND_TRAJECTORY = 3
KIND_EXEC_ACK = 4
KIND_TELEMETRY = 5
KIND_ENGAGE = 6

EXEC_COMPLETED = 0
EXEC_ABORTED = 1
EXEC_REJECTED = 2

ENGAGE_REQUEST = 0
ENGAGE_ACK = 1
ENGAGE_DENY = 2

_GRIPPER_CODES = {"open": 0, "closing": 1, "holding": 2}
_GRIPPER_NAMES = {v: k for k, v in _GRIPPER_CODES.items()}
_PHASE_CODES = {p: i for i, p in enumerate(MissionPhase)}
_PHASE_NAMES = {i: p for i, p in enumerate(MissionPhase)}

_HEADER = struct.Struct("<IBBQdI")


class LinkError(Exception):
    pass


class MalformedFrame(LinkError):
    pass


class VersionMismatch(LinkError):
    pass


class ChecksumMismatch(LinkError):
    pass


# -- CRC32C (Castagnoli), reflected polynomial 0x82F63B78 ---------------------

def _make_crc_table():
    table = []
    for i in range(256):
        crc = i
        for _ in range(8):
            crc = (crc >> 1) ^ 0x82F63B78 if crc & 1 else crc >> 1
        table.append(crc)
    return table


_CRC_TABLE = _make_crc_table()


def crc32c(data: bytes) -> int:
    crc = 0xFFFFFFFF
    for byte in data:
        crc = _CRC_TABLE[(crc ^ byte) & 0xFF] ^ (crc >> 8)
    return crc ^ 0xFFFFFFFF


# -- message payloads ----------------------------------------------------------

@dataclass
class PoseRef:
    pose: Pose
    kind = KIND_POSE_REF


@dataclass
class GripperCmd:
    close: bool
    kind = KIND_GRIPPER_CMD


@dataclass
class TrajectoryUplink:
    trajectory: Trajectory
    kind = KIND_TRAJECTORY


@dataclass
class ExecAck:
    trajectory_id: int
    status: int
    kind = KIND_EXEC_ACK


@dataclass
class Telemetry:
    ee_pose: Pose
    wrench: np.ndarray
    joints: np.ndarray
    phase: MissionPhase
    gripper: str
    safety_tripped: bool
    kind = KIND_TELEMETRY


@dataclass
class Engage:
    verb: int                 # request / ack / deny
    stylus_quat: np.ndarray   # orientation offered for the match check
    kind = KIND_ENGAGE


@dataclass
class LinkMessage:
    payload: object
    seq: int
    timestamp: float

    @property
    def kind(self) -> int:
        return self.payload.kind


def _encode_payload(p) -> bytes:
    if isinstance(p, PoseRef):
        return struct.pack("<7d", *p.pose.position, *p.pose.orientation)
    if isinstance(p, GripperCmd):
        return struct.pack("<B", 1 if p.close else 0)
    if isinstance(p, TrajectoryUplink):
        t = p.trajectory
        name = t.planner.encode()[:255]
        dof = t.waypoints.shape[1]
        head = struct.pack("<QQB", t.id, t.world_hash, len(name)) + name
        head += struct.pack("<BI", dof, len(t.times))
        rows = b"".join(struct.pack("<%dd" % (dof + 1), t.times[i], *t.waypoints[i])
                        for i in range(len(t.times)))
        return head + rows
    if isinstance(p, ExecAck):
        return struct.pack("<QB", p.trajectory_id, p.status)
    if isinstance(p, Telemetry):
        dof = len(p.joints)
        return (struct.pack("<7d", *p.ee_pose.position, *p.ee_pose.orientation)
                + struct.pack("<6d", *p.wrench)
                + struct.pack("<B%dd" % dof, dof, *p.joints)
                + struct.pack("<BBB", _PHASE_CODES[p.phase],
                              _GRIPPER_CODES[p.gripper], 1 if p.safety_tripped else 0))
    if isinstance(p, Engage):
        return struct.pack("<B4d", p.verb, *p.stylus_quat)
    raise TypeError(f"unknown payload {type(p)!r}")


def _decode_payload(kind: int, raw: bytes):
    try:
        if kind == KIND_POSE_REF:
            v = struct.unpack("<7d", raw)
            return PoseRef(Pose(v[:3], v[3:]))
        if kind == KIND_GRIPPER_CMD:
            return GripperCmd(close=bool(raw[0]))
        if kind == KIND_TRAJECTORY:
            tid, whash, nlen = struct.unpack_from("<QQB", raw, 0)
            off = 17
            name = raw[off:off + nlen].decode()
            off += nlen
            dof, n = struct.unpack_from("<BI", raw, off)
            off += 5
            rows = np.frombuffer(raw, dtype="<f8", count=n * (dof + 1), offset=off)
            rows = rows.reshape(n, dof + 1)
            traj = Trajectory(id=tid, times=rows[:, 0].copy(), waypoints=rows[:, 1:].copy(),
                              planner=name, world_hash=whash)
            return TrajectoryUplink(traj)
        if kind == KIND_EXEC_ACK:
            tid, status = struct.unpack("<QB", raw)
            return ExecAck(tid, status)
        if kind == KIND_TELEMETRY:
            pose_v = struct.unpack_from("<7d", raw, 0)
            wrench = np.frombuffer(raw, dtype="<f8", count=6, offset=56).copy()
            dof = raw[104]
            joints = np.frombuffer(raw, dtype="<f8", count=dof, offset=105).copy()
            phase_c, grip_c, safety = struct.unpack_from("<BBB", raw, 105 + 8 * dof)
            return Telemetry(Pose(pose_v[:3], pose_v[3:]), wrench, joints,
                             _PHASE_NAMES[phase_c], _GRIPPER_NAMES[grip_c], bool(safety))
        if kind == KIND_ENGAGE:
            v = struct.unpack("<B4d", raw)
            return Engage(v[0], np.asarray(v[1:]))
    except (struct.error, IndexError, ValueError, KeyError) as exc:
        raise MalformedFrame(f"bad payload for kind {kind}: {exc}") from exc
    raise MalformedFrame(f"unknown message kind {kind}")


def encode(msg: LinkMessage) -> bytes:
    payload = _encode_payload(msg.payload)
    head = _HEADER.pack(MAGIC, VERSION, msg.kind, msg.seq, msg.timestamp, len(payload))
    body = head[4:] + payload  # crc covers version..payload
    return head + payload + struct.pack("<I", crc32c(body))


def decode(frame: bytes) -> LinkMessage:
    if len(frame) < _HEADER.size + 4:
        raise MalformedFrame(f"frame too short ({len(frame)} bytes)")
    magic, version, kind, seq, stamp, length = _HEADER.unpack_from(frame, 0)
    if magic != MAGIC:
        raise MalformedFrame(f"bad magic 0x{magic:08X}")
    if version != VERSION:
        raise VersionMismatch(f"frame version {version}, expected {VERSION}")
    if len(frame) != _HEADER.size + length + 4:
        raise MalformedFrame(f"length field {length} does not match frame size {len(frame)}")
    (crc,) = struct.unpack_from("<I", frame, _HEADER.size + length)
    body = frame[4:_HEADER.size + length]
    if crc32c(body) != crc:
        raise ChecksumMismatch("payload checksum mismatch")
    payload = _decode_payload(kind, frame[_HEADER.size:_HEADER.size + length])
    return LinkMessage(payload=payload, seq=seq, timestamp=stamp)


# -- delay channel -------------------------------------------------------------

@dataclass
class ChannelConfig:
    delay_each_way: float = 0.0
    jitter: float = 0.0
    loss_probability: float = 0.0
    tick_rate: float = 100.0
    seed: int = 0

    def __post_init__(self):
        if self.delay_each_way < 0:
            raise ValueError("delay must be >= 0")
        if not 0 <= self.loss_probability <= 1:
            raise ValueError("loss probability must be in [0, 1]")
        if self.jitter > self.delay_each_way:
            raise ValueError("jitter half-width cannot exceed the delay")
        if self.tick_rate <= 0:
            raise ValueError("tick rate must be positive")


@dataclass
class LinkStats:
    sent: int = 0
    delivered: int = 0
    dropped: int = 0
    max_in_flight: int = 0


class DelayChannel:
    """One direction of the link: push at the sender's tick, poll at the
    receiver's. Streams kinds (pose refs, telemetry) may be lossy; delivery
    order is (deliver_tick, seq)."""

    def __init__(self, config: ChannelConfig):
        self.config = config
        self._rng = random.Random(config.seed)
        self._queue = []      # (deliver_tick, seq, LinkMessage)
        self.stats = LinkStats()
        self._base_ticks = round(config.delay_each_way * config.tick_rate)
        self._min_ticks = int(config.delay_each_way * config.tick_rate + 1e-9)

    def push(self, msg: LinkMessage, now_tick: int):
        self.stats.sent += 1
        if self.config.loss_probability > 0.0 and self._rng.random() < self.config.loss_probability:
            self.stats.dropped += 1
            return
        deliver = now_tick + self._base_ticks
        if self.config.jitter > 0.0:
            deliver += round(self._rng.uniform(-self.config.jitter, self.config.jitter)
                             * self.config.tick_rate)
        deliver = max(deliver, now_tick + self._min_ticks, now_tick)
        self._queue.append((deliver, msg.seq, msg))
        if len(self._queue) > self.stats.max_in_flight:
            self.stats.max_in_flight = len(self._queue)

    def poll(self, now_tick: int) -> list:
        due = [entry for entry in self._queue if entry[0] <= now_tick]
        if not due:
            return []
        due.sort(key=lambda e: (e[0], e[1]))
        self._queue = [entry for entry in self._queue if entry[0] > now_tick]
        self.stats.delivered += len(due)
        return [entry[2] for entry in due]

    def in_flight(self) -> int:
        return len(self._queue)


class MessageSender:
    """Per-endpoint sequence numbering plus reliable-kind retransmission.

    Pose references and telemetry are state streams (latest wins, no resend);
    trajectory uplinks, exec acks, and engage handshakes are re-pushed after
    `timeout_ticks` until acknowledged or out of attempts.
    """

    RELIABLE_KINDS = (KIND_TRAJECTORY, KIND_EXEC_ACK, KIND_ENGAGE)

    def __init__(self, channel: DelayChannel, timeout_ticks: int = 200, max_attempts: int = 5):
        self.channel = channel
        self.timeout_ticks = timeout_ticks
        self.max_attempts = max_attempts
        self._seq = 0
        self._pending = {}    # key -> [msg, next_resend_tick, attempts_left]

    def send(self, payload, now_tick: int, ack_key=None) -> LinkMessage:
        self._seq += 1
        msg = LinkMessage(payload=payload, seq=self._seq,
                          timestamp=now_tick / self.channel.config.tick_rate)
        self.channel.push(msg, now_tick)
        if payload.kind in self.RELIABLE_KINDS and ack_key is not None:
            self._pending[ack_key] = [msg, now_tick + self.timeout_ticks, self.max_attempts - 1]
        return msg

    def acknowledge(self, ack_key):
        self._pending.pop(ack_key, None)

    def tick(self, now_tick: int):
        for key, entry in list(self._pending.items()):
            msg, due, left = entry
            if now_tick >= due:
                if left <= 0:
                    del self._pending[key]
                    continue
                self.channel.push(msg, now_tick)
                entry[1] = now_tick + self.timeout_ticks
                entry[2] = left - 1


# -- capture files --------------------------------------------------------------

CAPTURE_MAGIC = b"ISRUCAP1"
DIR_TO_ROBOT = 0
DIR_TO_STATION = 1


class CaptureWriter:
    """Tick-stamped frame log for replay and debugging."""

    def __init__(self, path):
        self._fh = open(path, "wb")
        self._fh.write(CAPTURE_MAGIC)

    def record(self, tick: int, direction: int, frame: bytes):
        self._fh.write(struct.pack("<QBI", tick, direction, len(frame)))
        self._fh.write(frame)

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_capture(path):
    """Yield (tick, direction, LinkMessage) from a capture file."""
    with open(path, "rb") as fh:
        if fh.read(8) != CAPTURE_MAGIC:
            raise MalformedFrame("not a capture file")
        while True:
            head = fh.read(13)
            if not head:
                return
            if len(head) != 13:
                raise MalformedFrame("truncated capture record")
            tick, direction, length = struct.unpack("<QBI", head)
            frame = fh.read(length)
            if len(frame) != length:
                raise MalformedFrame("truncated capture frame")
            yield tick, direction, decode(frame)
