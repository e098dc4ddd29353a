"""Pure-Python fallback for the hot numeric kernels.

Same call signatures and semantics as the compiled extension
``isrubench._kernels``; see :mod:`isrubench.kernels` for backend selection.
Quaternions are float64 ``[x, y, z, w]`` throughout.
"""

import math

import numpy as np

SPHERE = 0
CAPSULE = 1
BOX = 2

_GOLDEN = 0.6180339887498949  # (sqrt(5)-1)/2, for 1-D line searches


# ---------------------------------------------------------------------------
# quaternion primitives
# ---------------------------------------------------------------------------

def quat_mul(qa, qb):
    ax, ay, az, aw = qa
    bx, by, bz, bw = qb
    return np.array([
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
        aw * bw - ax * bx - ay * by - az * bz,
    ])


def quat_conj(q):
    return np.array([-q[0], -q[1], -q[2], q[3]])


def quat_normalize(q):
    n = math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    return np.asarray(q, dtype=float) / n


def quat_rotate(q, v):
    # Rodrigues via t = 2 q_vec x v
    x, y, z, w = q
    tx = 2.0 * (y * v[2] - z * v[1])
    ty = 2.0 * (z * v[0] - x * v[2])
    tz = 2.0 * (x * v[1] - y * v[0])
    return np.array([
        v[0] + w * tx + (y * tz - z * ty),
        v[1] + w * ty + (z * tx - x * tz),
        v[2] + w * tz + (x * ty - y * tx),
    ])


def quat_from_rotvec(rv):
    angle = math.sqrt(rv[0] * rv[0] + rv[1] * rv[1] + rv[2] * rv[2])
    if angle < 1e-12:
        return quat_normalize(np.array([0.5 * rv[0], 0.5 * rv[1], 0.5 * rv[2], 1.0]))
    s = math.sin(0.5 * angle) / angle
    return np.array([rv[0] * s, rv[1] * s, rv[2] * s, math.cos(0.5 * angle)])


def quat_to_rotvec(q):
    x, y, z, w = q
    n = math.sqrt(x * x + y * y + z * z)
    if n < 1e-12:
        s = 2.0 if w >= 0.0 else -2.0
        return np.array([s * x, s * y, s * z])
    angle = 2.0 * math.atan2(n, w)
    if angle > math.pi:
        angle -= 2.0 * math.pi
    return np.array([x, y, z]) * (angle / n)


def quat_angle(qa, qb):
    # relative-quaternion atan2 form: stable down to zero angle, unlike acos(dot)
    r = quat_mul(qa, quat_conj(qb))
    n = math.sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2])
    return 2.0 * math.atan2(n, abs(r[3]))


def quat_slerp(qa, qb, t):
    qa = np.asarray(qa, dtype=float)
    qb = np.asarray(qb, dtype=float)
    d = float(np.dot(qa, qb))
    if d < 0.0:
        qb = -qb
        d = -d
    if d > 1.0 - 1e-12:
        return quat_normalize(qa + t * (qb - qa))
    th = math.acos(min(1.0, d))
    sa = math.sin((1.0 - t) * th) / math.sin(th)
    sb = math.sin(t * th) / math.sin(th)
    return quat_normalize(sa * qa + sb * qb)


# ---------------------------------------------------------------------------
# serial-chain forward kinematics
# ---------------------------------------------------------------------------

def fk_frames(fixed_pos, fixed_quat, axes, q):
    """World pose of the frame after each joint of a serial chain.

    fixed_pos/fixed_quat: per-joint fixed transform (parent -> joint frame),
    axes: per-joint rotation axis in the joint frame, q: joint angles.
    Returns (pos (n,3), quat (n,4)) with the chain rooted at the identity.
    """
    n = len(q)
    out_pos = np.empty((n, 3))
    out_quat = np.empty((n, 4))
    p = np.zeros(3)
    r = np.array([0.0, 0.0, 0.0, 1.0])
    for i in range(n):
        p = p + quat_rotate(r, fixed_pos[i])
        r = quat_mul(r, fixed_quat[i])
        r = quat_mul(r, quat_from_rotvec(axes[i] * q[i]))
        r = quat_normalize(r)
        out_pos[i] = p
        out_quat[i] = r
    return out_pos, out_quat


# ---------------------------------------------------------------------------
# primitive distances
# ---------------------------------------------------------------------------

def _point_segment_dist(p, a, b):
    ab = b - a
    denom = float(np.dot(ab, ab))
    if denom < 1e-30:
        return float(np.linalg.norm(p - a))
    t = float(np.dot(p - a, ab)) / denom
    t = min(1.0, max(0.0, t))
    return float(np.linalg.norm(p - (a + t * ab)))


def _segment_segment_dist(p1, q1, p2, q2):
    # Ericson, Real-Time Collision Detection, closest point of two segments.
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = float(np.dot(d1, d1))
    e = float(np.dot(d2, d2))
    f = float(np.dot(d2, r))
    eps = 1e-30
    if a <= eps and e <= eps:
        return float(np.linalg.norm(r))
    if a <= eps:
        s = 0.0
        t = min(1.0, max(0.0, f / e))
    else:
        c = float(np.dot(d1, r))
        if e <= eps:
            t = 0.0
            s = min(1.0, max(0.0, -c / a))
        else:
            b = float(np.dot(d1, d2))
            den = a * e - b * b
            s = min(1.0, max(0.0, (b * f - c * e) / den)) if den > eps else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = min(1.0, max(0.0, -c / a))
            elif t > 1.0:
                t = 1.0
                s = min(1.0, max(0.0, (b - c) / a))
    return float(np.linalg.norm((p1 + s * d1) - (p2 + t * d2)))


def _box_sdf(p, half):
    # Signed distance of a point to a box centred at the origin (negative inside).
    qx = abs(p[0]) - half[0]
    qy = abs(p[1]) - half[1]
    qz = abs(p[2]) - half[2]
    ox = max(qx, 0.0)
    oy = max(qy, 0.0)
    oz = max(qz, 0.0)
    outside = math.sqrt(ox * ox + oy * oy + oz * oz)
    inside = min(0.0, max(qx, max(qy, qz)))
    return outside + inside


def _segment_box_sdf(a, b, half):
    # min over the segment of the box SDF; the SDF of a convex set is convex,
    # so golden-section search converges to the global minimum.
    lo, hi = 0.0, 1.0
    c = hi - _GOLDEN * (hi - lo)
    d = lo + _GOLDEN * (hi - lo)
    fc = _box_sdf(a + c * (b - a), half)
    fd = _box_sdf(a + d * (b - a), half)
    for _ in range(64):
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - _GOLDEN * (hi - lo)
            fc = _box_sdf(a + c * (b - a), half)
        else:
            lo, c, fc = c, d, fd
            d = lo + _GOLDEN * (hi - lo)
            fd = _box_sdf(a + d * (b - a), half)
    f0 = _box_sdf(a, half)
    f1 = _box_sdf(b, half)
    return min(fc, fd, f0, f1)


def _capsule_endpoints(pos, quat, half_len):
    axis = quat_rotate(quat, np.array([0.0, 0.0, 1.0]))
    return pos - half_len * axis, pos + half_len * axis


def pair_distance(type_a, params_a, pos_a, quat_a, type_b, params_b, pos_b, quat_b):
    """Signed distance between two primitives (negative when overlapping).

    Types: 0 sphere (r), 1 capsule (r, half_len, local z axis), 2 box
    (half extents). box-box is unsupported.
    """
    pos_a = np.asarray(pos_a, dtype=float)
    pos_b = np.asarray(pos_b, dtype=float)
    if type_a > type_b:  # canonical order so each pair is handled once
        return pair_distance(type_b, params_b, pos_b, quat_b, type_a, params_a, pos_a, quat_a)
    if type_a == SPHERE and type_b == SPHERE:
        return float(np.linalg.norm(pos_a - pos_b)) - params_a[0] - params_b[0]
    if type_a == SPHERE and type_b == CAPSULE:
        e0, e1 = _capsule_endpoints(pos_b, quat_b, params_b[1])
        return _point_segment_dist(pos_a, e0, e1) - params_a[0] - params_b[0]
    if type_a == SPHERE and type_b == BOX:
        local = quat_rotate(quat_conj(quat_b), pos_a - pos_b)
        return _box_sdf(local, params_b) - params_a[0]
    if type_a == CAPSULE and type_b == CAPSULE:
        a0, a1 = _capsule_endpoints(pos_a, quat_a, params_a[1])
        b0, b1 = _capsule_endpoints(pos_b, quat_b, params_b[1])
        return _segment_segment_dist(a0, a1, b0, b1) - params_a[0] - params_b[0]
    if type_a == CAPSULE and type_b == BOX:
        a0, a1 = _capsule_endpoints(pos_a, quat_a, params_a[1])
        qc = quat_conj(quat_b)
        l0 = quat_rotate(qc, a0 - pos_b)
        l1 = quat_rotate(qc, a1 - pos_b)
        return _segment_box_sdf(l0, l1, params_b) - params_a[0]
    raise ValueError("box-box distance is unsupported")


def arm_config_distance(fixed_pos, fixed_quat, axes, q,
                        body_link, body_type, body_params, body_lpos, body_lquat,
                        world_type, world_params, world_pos, world_quat,
                        self_mask, stop_below):
    """FK + all relevant collision pairs for one joint configuration.

    Checks every arm body against every world body, plus arm body pairs
    enabled in ``self_mask`` (nb x nb uint8). Early-outs once a distance below
    ``stop_below`` is found. Returns (min_dist, pair_kind, idx_a, idx_b) where
    pair_kind is 0 for arm-world (idx_a arm body, idx_b world body) and 1 for
    arm-arm; (-1, -1) when no pair exists.
    """
    link_pos, link_quat = fk_frames(fixed_pos, fixed_quat, axes, q)
    nb = len(body_link)
    bpos = np.empty((nb, 3))
    bquat = np.empty((nb, 4))
    for i in range(nb):
        li = body_link[i]
        if li == 0:
            base_p = np.zeros(3)
            base_q = np.array([0.0, 0.0, 0.0, 1.0])
        else:
            base_p = link_pos[li - 1]
            base_q = link_quat[li - 1]
        bpos[i] = base_p + quat_rotate(base_q, body_lpos[i])
        bquat[i] = quat_mul(base_q, body_lquat[i])

    def bound_radius(t, params):
        if t == SPHERE:
            return params[0]
        if t == CAPSULE:
            return params[0] + params[1]
        return math.sqrt(params[0] ** 2 + params[1] ** 2 + params[2] ** 2)

    brad = [bound_radius(body_type[i], body_params[i]) for i in range(nb)]
    nw = len(world_type)
    wrad = [bound_radius(world_type[j], world_params[j]) for j in range(nw)]

    best = math.inf
    kind, ia, ib = 0, -1, -1
    for i in range(nb):
        for j in range(nw):
            # bounding-sphere prune: skip pairs that cannot beat the current best
            lb = float(np.linalg.norm(bpos[i] - world_pos[j])) - brad[i] - wrad[j]
            if lb >= best:
                continue
            d = pair_distance(body_type[i], body_params[i], bpos[i], bquat[i],
                              world_type[j], world_params[j], world_pos[j], world_quat[j])
            if d < best:
                best, kind, ia, ib = d, 0, i, j
                if best < stop_below:
                    return best, kind, ia, ib
    for i in range(nb):
        for j in range(i + 1, nb):
            if not self_mask[i, j]:
                continue
            lb = float(np.linalg.norm(bpos[i] - bpos[j])) - brad[i] - brad[j]
            if lb >= best:
                continue
            d = pair_distance(body_type[i], body_params[i], bpos[i], bquat[i],
                              body_type[j], body_params[j], bpos[j], bquat[j])
            if d < best:
                best, kind, ia, ib = d, 1, i, j
                if best < stop_below:
                    return best, kind, ia, ib
    return best, kind, ia, ib


# ---------------------------------------------------------------------------
# contact + impedance
# ---------------------------------------------------------------------------

# env_pack layout (float64):
#  0 ground_z | 1:4 slot_pos | 4:8 slot_quat | 8 hole_half | 9 sample_half
# 10 hole_depth | 11 wall_k | 12 wall_d | 13 sample_half_len
# 14 ee_contact_radius | 15 block_margin | 16 tip_edge_radius

def contact_wrench(env_pack, ee_pos, ee_quat, vel, omg, holding, rel_pos, rel_quat):
    """External contact wrench (world frame, about the flange).

    One contact sphere against the ground plane and the slot geometry (four
    wall boxes + bottom box in the slot frame). While holding, the sphere is
    the peg tip edge (radius = the tip chamfer) and the wall faces are shifted
    inward by sample_half - tip_edge_radius, so wall penetration equals
    lateral offset - clearance/2 and a flat-on-rim tip is blocked vertically.
    Each contact is a radial penetration spring with damping along the contact
    normal, clamped non-adhesive, so approach-retract cycles dissipate energy.
    """
    ground_z = env_pack[0]
    slot_pos = env_pack[1:4]
    slot_quat = env_pack[4:8]
    hole_half = env_pack[8]
    sample_half = env_pack[9]
    hole_depth = env_pack[10]
    wall_k = env_pack[11]
    wall_d = env_pack[12]
    half_len = env_pack[13]
    r_ee = env_pack[14]
    margin = env_pack[15]
    edge_r = env_pack[16]

    ee_pos = np.asarray(ee_pos, dtype=float)
    vel = np.asarray(vel, dtype=float)
    omg = np.asarray(omg, dtype=float)
    force = np.zeros(3)
    torque = np.zeros(3)

    if holding:
        c_sample = ee_pos + quat_rotate(ee_quat, rel_pos)
        q_sample = quat_mul(ee_quat, rel_quat)
        # sphere bottom coincides with the peg tip
        centre = c_sample + quat_rotate(q_sample, np.array([0.0, 0.0, edge_r - half_len]))
        radius = edge_r
        inner = hole_half - sample_half + edge_r
    else:
        centre = ee_pos
        radius = r_ee
        inner = hole_half
    v_c = vel + np.cross(omg, centre - ee_pos)
    arm = centre - ee_pos

    def apply(f):
        nonlocal force, torque
        force = force + f
        torque = torque + np.cross(arm, f)

    # ground plane
    pen = ground_z - (centre[2] - radius)
    if pen > 0.0:
        mag = wall_k * pen + wall_d * (-v_c[2])
        if mag > 0.0:
            apply(np.array([0.0, 0.0, mag]))

    # slot walls + bottom, in the slot frame
    qc = quat_conj(slot_quat)
    p = quat_rotate(qc, centre - slot_pos)
    reach = radius + margin
    if (abs(p[0]) < reach and abs(p[1]) < reach
            and -hole_depth - 0.04 - radius < p[2] < radius):
        v_s = quat_rotate(qc, v_c)
        wx = 0.5 * (margin - inner)
        cx = 0.5 * (margin + inner)
        hz = 0.5 * hole_depth
        t = 0.02
        boxes = (
            ((cx, 0.0, -hz), (wx, margin, hz)),
            ((-cx, 0.0, -hz), (wx, margin, hz)),
            ((0.0, cx, -hz), (margin, wx, hz)),
            ((0.0, -cx, -hz), (margin, wx, hz)),
            ((0.0, 0.0, -hole_depth - 0.5 * t), (margin, margin, 0.5 * t)),
        )
        f_s = np.zeros(3)
        for bc, bh in boxes:
            bc = np.asarray(bc)
            bh = np.asarray(bh)
            lo = bc - bh
            hi = bc + bh
            c = np.clip(p, lo, hi)
            d = p - c
            dist = math.sqrt(float(np.dot(d, d)))
            if dist >= radius:
                continue
            if dist > 1e-12:
                n = d / dist
                depth_pen = radius - dist
            else:
                # centre inside the box: push out through the nearest face
                n = np.zeros(3)
                depth_pen = math.inf
                for k in range(3):
                    if hi[k] - p[k] < depth_pen:
                        depth_pen = hi[k] - p[k]
                        n = np.zeros(3)
                        n[k] = 1.0
                    if p[k] - lo[k] < depth_pen:
                        depth_pen = p[k] - lo[k]
                        n = np.zeros(3)
                        n[k] = -1.0
                depth_pen += radius
            mag = wall_k * depth_pen + wall_d * (-float(np.dot(v_s, n)))
            if mag > 0.0:
                f_s = f_s + mag * n
        if np.any(f_s):
            apply(quat_rotate(slot_quat, f_s))

    return np.concatenate([force, torque])


def impedance_step(pos, quat, vel, omg, ref_pos, ref_quat, stiff, damp, mass, f_ext, dt):
    """One semi-implicit Euler step of the 6-DOF end-effector impedance.

    M a = K (ref - x) - D v + f_ext, with the rotational error expressed as a
    world-frame rotation vector. Returns (pos, quat, vel, omg).
    """
    pos = np.asarray(pos, dtype=float)
    vel = np.asarray(vel, dtype=float)
    omg = np.asarray(omg, dtype=float)
    e_pos = np.asarray(ref_pos, dtype=float) - pos
    e_rot = quat_to_rotvec(quat_mul(ref_quat, quat_conj(quat)))
    acc = (stiff[:3] * e_pos - damp[:3] * vel + f_ext[:3]) / mass[:3]
    alp = (stiff[3:] * e_rot - damp[3:] * omg + f_ext[3:]) / mass[3:]
    new_vel = vel + dt * acc
    new_omg = omg + dt * alp
    new_pos = pos + dt * new_vel
    new_quat = quat_normalize(quat_mul(quat_from_rotvec(new_omg * dt), quat))
    return new_pos, new_quat, new_vel, new_omg
