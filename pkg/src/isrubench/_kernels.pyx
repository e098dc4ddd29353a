# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled numeric kernels: chain FK, primitive distances, contact, impedance.

Mirrors isrubench._kernels_py exactly; that module is the reference for the
semantics. Quaternions are float64 [x, y, z, w].
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, sin, cos, atan2, acos, fabs, INFINITY, M_PI

cnp.import_array()

SPHERE = 0
CAPSULE = 1
BOX = 2

cdef double _GOLDEN = 0.6180339887498949


# ---------------------------------------------------------------------------
# C-level quaternion helpers (out must not alias inputs)
# ---------------------------------------------------------------------------

cdef inline void _qmul(const double* a, const double* b, double* out) nogil:
    out[0] = a[3] * b[0] + a[0] * b[3] + a[1] * b[2] - a[2] * b[1]
    out[1] = a[3] * b[1] - a[0] * b[2] + a[1] * b[3] + a[2] * b[0]
    out[2] = a[3] * b[2] + a[0] * b[1] - a[1] * b[0] + a[2] * b[3]
    out[3] = a[3] * b[3] - a[0] * b[0] - a[1] * b[1] - a[2] * b[2]


cdef inline void _qnormalize(double* q) nogil:
    cdef double n = sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    q[0] /= n; q[1] /= n; q[2] /= n; q[3] /= n


cdef inline void _qrot(const double* q, const double* v, double* out) nogil:
    cdef double tx = 2.0 * (q[1] * v[2] - q[2] * v[1])
    cdef double ty = 2.0 * (q[2] * v[0] - q[0] * v[2])
    cdef double tz = 2.0 * (q[0] * v[1] - q[1] * v[0])
    out[0] = v[0] + q[3] * tx + (q[1] * tz - q[2] * ty)
    out[1] = v[1] + q[3] * ty + (q[2] * tx - q[0] * tz)
    out[2] = v[2] + q[3] * tz + (q[0] * ty - q[1] * tx)


cdef inline void _qrot_inv(const double* q, const double* v, double* out) nogil:
    # rotate by the conjugate of q
    cdef double c[4]
    c[0] = -q[0]; c[1] = -q[1]; c[2] = -q[2]; c[3] = q[3]
    _qrot(c, v, out)


cdef inline void _qfromrv(const double* rv, double* out) nogil:
    cdef double angle = sqrt(rv[0] * rv[0] + rv[1] * rv[1] + rv[2] * rv[2])
    cdef double s
    if angle < 1e-12:
        out[0] = 0.5 * rv[0]; out[1] = 0.5 * rv[1]; out[2] = 0.5 * rv[2]; out[3] = 1.0
        _qnormalize(out)
        return
    s = sin(0.5 * angle) / angle
    out[0] = rv[0] * s; out[1] = rv[1] * s; out[2] = rv[2] * s
    out[3] = cos(0.5 * angle)


cdef inline void _qtorv(const double* q, double* out) nogil:
    cdef double n = sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2])
    cdef double angle, s
    if n < 1e-12:
        s = 2.0 if q[3] >= 0.0 else -2.0
        out[0] = s * q[0]; out[1] = s * q[1]; out[2] = s * q[2]
        return
    angle = 2.0 * atan2(n, q[3])
    if angle > M_PI:
        angle -= 2.0 * M_PI
    s = angle / n
    out[0] = q[0] * s; out[1] = q[1] * s; out[2] = q[2] * s


cdef inline double _clamp01(double t) nogil:
    if t < 0.0:
        return 0.0
    if t > 1.0:
        return 1.0
    return t


# ---------------------------------------------------------------------------
# python-visible quaternion ops
# ---------------------------------------------------------------------------

def quat_mul(qa, qb):
    cdef double a[4]
    cdef double b[4]
    cdef double o[4]
    cdef int i
    for i in range(4):
        a[i] = qa[i]
        b[i] = qb[i]
    _qmul(a, b, o)
    return np.array([o[0], o[1], o[2], o[3]])


def quat_conj(q):
    return np.array([-q[0], -q[1], -q[2], q[3]])


def quat_normalize(q):
    cdef double o[4]
    cdef int i
    for i in range(4):
        o[i] = q[i]
    _qnormalize(o)
    return np.array([o[0], o[1], o[2], o[3]])


def quat_rotate(q, v):
    cdef double qq[4]
    cdef double vv[3]
    cdef double o[3]
    cdef int i
    for i in range(4):
        qq[i] = q[i]
    for i in range(3):
        vv[i] = v[i]
    _qrot(qq, vv, o)
    return np.array([o[0], o[1], o[2]])


def quat_from_rotvec(rv):
    cdef double r[3]
    cdef double o[4]
    cdef int i
    for i in range(3):
        r[i] = rv[i]
    _qfromrv(r, o)
    return np.array([o[0], o[1], o[2], o[3]])


def quat_to_rotvec(q):
    cdef double qq[4]
    cdef double o[3]
    cdef int i
    for i in range(4):
        qq[i] = q[i]
    _qtorv(qq, o)
    return np.array([o[0], o[1], o[2]])


def quat_angle(qa, qb):
    # relative-quaternion atan2 form: stable down to zero angle, unlike acos(dot)
    cdef double a[4]
    cdef double c[4]
    cdef double r[4]
    cdef double n
    cdef int i
    for i in range(4):
        a[i] = qa[i]
    c[0] = -qb[0]; c[1] = -qb[1]; c[2] = -qb[2]; c[3] = qb[3]
    _qmul(a, c, r)
    n = sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2])
    return 2.0 * atan2(n, fabs(r[3]))


def quat_slerp(qa, qb, double t):
    cdef double a[4]
    cdef double b[4]
    cdef double o[4]
    cdef double d = 0.0, th, sa, sb
    cdef int i
    for i in range(4):
        a[i] = qa[i]
        b[i] = qb[i]
        d += a[i] * b[i]
    if d < 0.0:
        for i in range(4):
            b[i] = -b[i]
        d = -d
    if d > 1.0 - 1e-12:
        for i in range(4):
            o[i] = a[i] + t * (b[i] - a[i])
        _qnormalize(o)
        return np.array([o[0], o[1], o[2], o[3]])
    if d > 1.0:
        d = 1.0
    th = acos(d)
    sa = sin((1.0 - t) * th) / sin(th)
    sb = sin(t * th) / sin(th)
    for i in range(4):
        o[i] = sa * a[i] + sb * b[i]
    _qnormalize(o)
    return np.array([o[0], o[1], o[2], o[3]])


# ---------------------------------------------------------------------------
# forward kinematics
# ---------------------------------------------------------------------------

cdef void _fk_chain(const double[:, ::1] fixed_pos, const double[:, ::1] fixed_quat,
                    const double[:, ::1] axes, const double[::1] q,
                    double[:, ::1] out_pos, double[:, ::1] out_quat) nogil:
    cdef int n = q.shape[0]
    cdef double p[3]
    cdef double r[4]
    cdef double tmp[4]
    cdef double jq[4]
    cdef double rv[3]
    cdef double rot[3]
    cdef int i, k
    p[0] = 0.0; p[1] = 0.0; p[2] = 0.0
    r[0] = 0.0; r[1] = 0.0; r[2] = 0.0; r[3] = 1.0
    for i in range(n):
        _qrot(r, &fixed_pos[i, 0], rot)
        for k in range(3):
            p[k] += rot[k]
        _qmul(r, &fixed_quat[i, 0], tmp)
        for k in range(3):
            rv[k] = axes[i, k] * q[i]
        _qfromrv(rv, jq)
        _qmul(tmp, jq, r)
        _qnormalize(r)
        for k in range(3):
            out_pos[i, k] = p[k]
        for k in range(4):
            out_quat[i, k] = r[k]


def fk_frames(fixed_pos, fixed_quat, axes, q):
    """World pose of the frame after each joint; see the pure backend docs."""
    cdef double[:, ::1] fp = np.ascontiguousarray(fixed_pos, dtype=np.float64)
    cdef double[:, ::1] fq = np.ascontiguousarray(fixed_quat, dtype=np.float64)
    cdef double[:, ::1] ax = np.ascontiguousarray(axes, dtype=np.float64)
    cdef double[::1] qq = np.ascontiguousarray(q, dtype=np.float64)
    cdef int n = qq.shape[0]
    out_pos = np.empty((n, 3))
    out_quat = np.empty((n, 4))
    cdef double[:, ::1] op = out_pos
    cdef double[:, ::1] oq = out_quat
    _fk_chain(fp, fq, ax, qq, op, oq)
    return out_pos, out_quat


# ---------------------------------------------------------------------------
# primitive distances
# ---------------------------------------------------------------------------

cdef inline double _norm3(const double* v) nogil:
    return sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])


cdef double _point_segment(const double* p, const double* a, const double* b) nogil:
    cdef double ab[3]
    cdef double d[3]
    cdef double denom, t
    cdef int k
    for k in range(3):
        ab[k] = b[k] - a[k]
    denom = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2]
    if denom < 1e-30:
        for k in range(3):
            d[k] = p[k] - a[k]
        return _norm3(d)
    t = ((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1] + (p[2] - a[2]) * ab[2]) / denom
    t = _clamp01(t)
    for k in range(3):
        d[k] = p[k] - (a[k] + t * ab[k])
    return _norm3(d)


cdef double _segment_segment(const double* p1, const double* q1,
                             const double* p2, const double* q2) nogil:
    cdef double d1[3]
    cdef double d2[3]
    cdef double r[3]
    cdef double diff[3]
    cdef double a, e, f, c, b, den, s, t
    cdef double eps = 1e-30
    cdef int k
    for k in range(3):
        d1[k] = q1[k] - p1[k]
        d2[k] = q2[k] - p2[k]
        r[k] = p1[k] - p2[k]
    a = d1[0] * d1[0] + d1[1] * d1[1] + d1[2] * d1[2]
    e = d2[0] * d2[0] + d2[1] * d2[1] + d2[2] * d2[2]
    f = d2[0] * r[0] + d2[1] * r[1] + d2[2] * r[2]
    if a <= eps and e <= eps:
        return _norm3(r)
    if a <= eps:
        s = 0.0
        t = _clamp01(f / e)
    else:
        c = d1[0] * r[0] + d1[1] * r[1] + d1[2] * r[2]
        if e <= eps:
            t = 0.0
            s = _clamp01(-c / a)
        else:
            b = d1[0] * d2[0] + d1[1] * d2[1] + d1[2] * d2[2]
            den = a * e - b * b
            s = _clamp01((b * f - c * e) / den) if den > eps else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = _clamp01(-c / a)
            elif t > 1.0:
                t = 1.0
                s = _clamp01((b - c) / a)
    for k in range(3):
        diff[k] = (p1[k] + s * d1[k]) - (p2[k] + t * d2[k])
    return _norm3(diff)


cdef double _box_sdf(const double* p, const double* half) nogil:
    cdef double qx = fabs(p[0]) - half[0]
    cdef double qy = fabs(p[1]) - half[1]
    cdef double qz = fabs(p[2]) - half[2]
    cdef double ox = qx if qx > 0.0 else 0.0
    cdef double oy = qy if qy > 0.0 else 0.0
    cdef double oz = qz if qz > 0.0 else 0.0
    cdef double outside = sqrt(ox * ox + oy * oy + oz * oz)
    cdef double m = qx
    if qy > m:
        m = qy
    if qz > m:
        m = qz
    cdef double inside = m if m < 0.0 else 0.0
    return outside + inside


cdef double _segment_box_sdf(const double* a, const double* b, const double* half) nogil:
    cdef double lo = 0.0, hi = 1.0
    cdef double c, d, fc, fd, f0, f1, best
    cdef double pt[3]
    cdef int k, it
    c = hi - _GOLDEN * (hi - lo)
    d = lo + _GOLDEN * (hi - lo)
    for k in range(3):
        pt[k] = a[k] + c * (b[k] - a[k])
    fc = _box_sdf(pt, half)
    for k in range(3):
        pt[k] = a[k] + d * (b[k] - a[k])
    fd = _box_sdf(pt, half)
    for it in range(64):
        if fc < fd:
            hi = d
            d = c
            fd = fc
            c = hi - _GOLDEN * (hi - lo)
            for k in range(3):
                pt[k] = a[k] + c * (b[k] - a[k])
            fc = _box_sdf(pt, half)
        else:
            lo = c
            c = d
            fc = fd
            d = lo + _GOLDEN * (hi - lo)
            for k in range(3):
                pt[k] = a[k] + d * (b[k] - a[k])
            fd = _box_sdf(pt, half)
    f0 = _box_sdf(a, half)
    f1 = _box_sdf(b, half)
    best = fc if fc < fd else fd
    if f0 < best:
        best = f0
    if f1 < best:
        best = f1
    return best


cdef inline double _bound_radius(int t, const double* params) nogil:
    if t == 0:
        return params[0]
    if t == 1:
        return params[0] + params[1]
    return sqrt(params[0] * params[0] + params[1] * params[1] + params[2] * params[2])


cdef void _capsule_ends(const double* pos, const double* quat, double half_len,
                        double* e0, double* e1) nogil:
    cdef double z[3]
    cdef double axis[3]
    cdef int k
    z[0] = 0.0; z[1] = 0.0; z[2] = 1.0
    _qrot(quat, z, axis)
    for k in range(3):
        e0[k] = pos[k] - half_len * axis[k]
        e1[k] = pos[k] + half_len * axis[k]


cdef double _pair_distance_c(int ta, const double* pa, const double* posa, const double* qa,
                             int tb, const double* pb, const double* posb, const double* qb) nogil:
    cdef double e0[3]
    cdef double e1[3]
    cdef double f0[3]
    cdef double f1[3]
    cdef double local[3]
    cdef double l0[3]
    cdef double l1[3]
    cdef double diff[3]
    cdef int k
    if ta > tb:
        return _pair_distance_c(tb, pb, posb, qb, ta, pa, posa, qa)
    if ta == 0 and tb == 0:
        for k in range(3):
            diff[k] = posa[k] - posb[k]
        return _norm3(diff) - pa[0] - pb[0]
    if ta == 0 and tb == 1:
        _capsule_ends(posb, qb, pb[1], e0, e1)
        return _point_segment(posa, e0, e1) - pa[0] - pb[0]
    if ta == 0 and tb == 2:
        for k in range(3):
            diff[k] = posa[k] - posb[k]
        _qrot_inv(qb, diff, local)
        return _box_sdf(local, pb) - pa[0]
    if ta == 1 and tb == 1:
        _capsule_ends(posa, qa, pa[1], e0, e1)
        _capsule_ends(posb, qb, pb[1], f0, f1)
        return _segment_segment(e0, e1, f0, f1) - pa[0] - pb[0]
    if ta == 1 and tb == 2:
        _capsule_ends(posa, qa, pa[1], e0, e1)
        for k in range(3):
            diff[k] = e0[k] - posb[k]
        _qrot_inv(qb, diff, l0)
        for k in range(3):
            diff[k] = e1[k] - posb[k]
        _qrot_inv(qb, diff, l1)
        return _segment_box_sdf(l0, l1, pb) - pa[0]
    return -INFINITY  # box-box: rejected at the python layer


def pair_distance(type_a, params_a, pos_a, quat_a, type_b, params_b, pos_b, quat_b):
    """Signed distance between two primitives; see the pure backend docs."""
    cdef int ta = type_a
    cdef int tb = type_b
    if ta == 2 and tb == 2:
        raise ValueError("box-box distance is unsupported")
    cdef double pa[3]
    cdef double pb[3]
    cdef double qa[4]
    cdef double qb[4]
    cdef double sa[3]
    cdef double sb[3]
    cdef int i
    for i in range(3):
        pa[i] = params_a[i] if i < len(params_a) else 0.0
        pb[i] = params_b[i] if i < len(params_b) else 0.0
        sa[i] = pos_a[i]
        sb[i] = pos_b[i]
    for i in range(4):
        qa[i] = quat_a[i]
        qb[i] = quat_b[i]
    return _pair_distance_c(ta, pa, sa, qa, tb, pb, sb, qb)


def arm_config_distance(fixed_pos, fixed_quat, axes, q,
                        body_link, body_type, body_params, body_lpos, body_lquat,
                        world_type, world_params, world_pos, world_quat,
                        self_mask, stop_below):
    """FK + all relevant collision pairs at one config; see the pure backend."""
    cdef double[:, ::1] fp = np.ascontiguousarray(fixed_pos, dtype=np.float64)
    cdef double[:, ::1] fq = np.ascontiguousarray(fixed_quat, dtype=np.float64)
    cdef double[:, ::1] ax = np.ascontiguousarray(axes, dtype=np.float64)
    cdef double[::1] qq = np.ascontiguousarray(q, dtype=np.float64)
    cdef int[::1] blink = np.ascontiguousarray(body_link, dtype=np.int32)
    cdef int[::1] btype = np.ascontiguousarray(body_type, dtype=np.int32)
    cdef double[:, ::1] bparams = np.ascontiguousarray(body_params, dtype=np.float64)
    cdef double[:, ::1] blpos = np.ascontiguousarray(body_lpos, dtype=np.float64)
    cdef double[:, ::1] blquat = np.ascontiguousarray(body_lquat, dtype=np.float64)
    cdef int[::1] wtype = np.ascontiguousarray(world_type, dtype=np.int32)
    cdef double[:, ::1] wparams = np.ascontiguousarray(world_params, dtype=np.float64)
    cdef double[:, ::1] wpos = np.ascontiguousarray(world_pos, dtype=np.float64)
    cdef double[:, ::1] wquat = np.ascontiguousarray(world_quat, dtype=np.float64)
    cdef cnp.uint8_t[:, ::1] mask = np.ascontiguousarray(self_mask, dtype=np.uint8)
    cdef double stop = stop_below

    cdef int n = qq.shape[0]
    cdef int nb = blink.shape[0]
    cdef int nw = wtype.shape[0]
    link_pos_arr = np.empty((n, 3))
    link_quat_arr = np.empty((n, 4))
    cdef double[:, ::1] lp = link_pos_arr
    cdef double[:, ::1] lq = link_quat_arr
    bpos_arr = np.empty((nb, 3))
    bquat_arr = np.empty((nb, 4))
    cdef double[:, ::1] bp = bpos_arr
    cdef double[:, ::1] bq = bquat_arr

    cdef double base_p[3]
    cdef double base_q[4]
    cdef double rot[3]
    cdef double best = INFINITY
    cdef double dist, lb, dx, dy, dz
    cdef int kind = 0, ia = -1, ib = -1
    cdef int i, j, k, li
    brad_arr = np.empty(nb)
    wrad_arr = np.empty(nw)
    cdef double[::1] brad = brad_arr
    cdef double[::1] wrad = wrad_arr

    with nogil:
        _fk_chain(fp, fq, ax, qq, lp, lq)
        for i in range(nb):
            li = blink[i]
            if li == 0:
                base_p[0] = 0.0; base_p[1] = 0.0; base_p[2] = 0.0
                base_q[0] = 0.0; base_q[1] = 0.0; base_q[2] = 0.0; base_q[3] = 1.0
            else:
                for k in range(3):
                    base_p[k] = lp[li - 1, k]
                for k in range(4):
                    base_q[k] = lq[li - 1, k]
            _qrot(base_q, &blpos[i, 0], rot)
            for k in range(3):
                bp[i, k] = base_p[k] + rot[k]
            _qmul(base_q, &blquat[i, 0], &bq[i, 0])

        for i in range(nb):
            brad[i] = _bound_radius(btype[i], &bparams[i, 0])
        for j in range(nw):
            wrad[j] = _bound_radius(wtype[j], &wparams[j, 0])

        for i in range(nb):
            if best < stop:
                break
            for j in range(nw):
                # bounding-sphere prune: pair cannot beat the current best
                dx = bp[i, 0] - wpos[j, 0]
                dy = bp[i, 1] - wpos[j, 1]
                dz = bp[i, 2] - wpos[j, 2]
                lb = sqrt(dx * dx + dy * dy + dz * dz) - brad[i] - wrad[j]
                if lb >= best:
                    continue
                dist = _pair_distance_c(btype[i], &bparams[i, 0], &bp[i, 0], &bq[i, 0],
                                        wtype[j], &wparams[j, 0], &wpos[j, 0], &wquat[j, 0])
                if dist < best:
                    best = dist
                    kind = 0
                    ia = i
                    ib = j
                    if best < stop:
                        break
        if best >= stop:
            for i in range(nb):
                if best < stop:
                    break
                for j in range(i + 1, nb):
                    if not mask[i, j]:
                        continue
                    dx = bp[i, 0] - bp[j, 0]
                    dy = bp[i, 1] - bp[j, 1]
                    dz = bp[i, 2] - bp[j, 2]
                    lb = sqrt(dx * dx + dy * dy + dz * dz) - brad[i] - brad[j]
                    if lb >= best:
                        continue
                    dist = _pair_distance_c(btype[i], &bparams[i, 0], &bp[i, 0], &bq[i, 0],
                                            btype[j], &bparams[j, 0], &bp[j, 0], &bq[j, 0])
                    if dist < best:
                        best = dist
                        kind = 1
                        ia = i
                        ib = j
                        if best < stop:
                            break
    return best, kind, ia, ib


# ---------------------------------------------------------------------------
# contact + impedance
# ---------------------------------------------------------------------------

def contact_wrench(env_pack, ee_pos, ee_quat, vel, omg, holding, rel_pos, rel_quat):
    """External contact wrench (world, about the flange); see the pure backend."""
    cdef double[::1] env = np.ascontiguousarray(env_pack, dtype=np.float64)
    cdef double ep[3]
    cdef double eq[4]
    cdef double vv[3]
    cdef double ww[3]
    cdef double rp[3]
    cdef double rq[4]
    cdef int hold = 1 if holding else 0
    cdef int i
    for i in range(3):
        ep[i] = ee_pos[i]
        vv[i] = vel[i]
        ww[i] = omg[i]
        rp[i] = rel_pos[i]
    for i in range(4):
        eq[i] = ee_quat[i]
        rq[i] = rel_quat[i]

    cdef double ground_z = env[0]
    cdef double hole_half = env[8]
    cdef double sample_half = env[9]
    cdef double hole_depth = env[10]
    cdef double wall_k = env[11]
    cdef double wall_d = env[12]
    cdef double half_len = env[13]
    cdef double r_ee = env[14]
    cdef double margin = env[15]
    cdef double edge_r = env[16]

    cdef double force[3]
    cdef double torque[3]
    cdef double c_sample[3]
    cdef double q_sample[4]
    cdef double centre[3]
    cdef double arm_r[3]
    cdef double v_c[3]
    cdef double down[3]
    cdef double tmp[3]
    cdef double p[3]
    cdef double v_s[3]
    cdef double f_s[3]
    cdef double f_w[3]
    cdef double boxes_c[5][3]
    cdef double boxes_h[5][3]
    cdef double cpt[3]
    cdef double dvec[3]
    cdef double nrm[3]
    cdef double radius, pen, mag, dist, wx, cx, hz, t, lo, hi, reach, vn, inner, fd
    cdef int k, b, any_f, nk, nsign
    for k in range(3):
        force[k] = 0.0
        torque[k] = 0.0

    if hold:
        _qrot(eq, rp, tmp)
        for k in range(3):
            c_sample[k] = ep[k] + tmp[k]
        _qmul(eq, rq, q_sample)
        down[0] = 0.0; down[1] = 0.0; down[2] = edge_r - half_len
        _qrot(q_sample, down, tmp)
        for k in range(3):
            centre[k] = c_sample[k] + tmp[k]
        radius = edge_r
        inner = hole_half - sample_half + edge_r
    else:
        for k in range(3):
            centre[k] = ep[k]
        radius = r_ee
        inner = hole_half

    for k in range(3):
        arm_r[k] = centre[k] - ep[k]
    v_c[0] = vv[0] + ww[1] * arm_r[2] - ww[2] * arm_r[1]
    v_c[1] = vv[1] + ww[2] * arm_r[0] - ww[0] * arm_r[2]
    v_c[2] = vv[2] + ww[0] * arm_r[1] - ww[1] * arm_r[0]

    # ground plane
    pen = ground_z - (centre[2] - radius)
    if pen > 0.0:
        mag = wall_k * pen + wall_d * (-v_c[2])
        if mag > 0.0:
            force[2] += mag
            torque[0] += arm_r[1] * mag
            torque[1] += -arm_r[0] * mag

    # slot walls + bottom, in the slot frame
    for k in range(3):
        tmp[k] = centre[k] - env[1 + k]
    _qrot_inv(&env[4], tmp, p)
    reach = radius + margin
    if (fabs(p[0]) < reach and fabs(p[1]) < reach
            and -hole_depth - 0.04 - radius < p[2] < radius):
        _qrot_inv(&env[4], v_c, v_s)
        wx = 0.5 * (margin - inner)
        cx = 0.5 * (margin + inner)
        hz = 0.5 * hole_depth
        t = 0.02
        boxes_c[0][0] = cx;  boxes_c[0][1] = 0.0; boxes_c[0][2] = -hz
        boxes_h[0][0] = wx;  boxes_h[0][1] = margin; boxes_h[0][2] = hz
        boxes_c[1][0] = -cx; boxes_c[1][1] = 0.0; boxes_c[1][2] = -hz
        boxes_h[1][0] = wx;  boxes_h[1][1] = margin; boxes_h[1][2] = hz
        boxes_c[2][0] = 0.0; boxes_c[2][1] = cx;  boxes_c[2][2] = -hz
        boxes_h[2][0] = margin; boxes_h[2][1] = wx; boxes_h[2][2] = hz
        boxes_c[3][0] = 0.0; boxes_c[3][1] = -cx; boxes_c[3][2] = -hz
        boxes_h[3][0] = margin; boxes_h[3][1] = wx; boxes_h[3][2] = hz
        boxes_c[4][0] = 0.0; boxes_c[4][1] = 0.0; boxes_c[4][2] = -hole_depth - 0.5 * t
        boxes_h[4][0] = margin; boxes_h[4][1] = margin; boxes_h[4][2] = 0.5 * t
        f_s[0] = 0.0; f_s[1] = 0.0; f_s[2] = 0.0
        any_f = 0
        for b in range(5):
            dist = 0.0
            for k in range(3):
                lo = boxes_c[b][k] - boxes_h[b][k]
                hi = boxes_c[b][k] + boxes_h[b][k]
                cpt[k] = p[k]
                if cpt[k] < lo:
                    cpt[k] = lo
                elif cpt[k] > hi:
                    cpt[k] = hi
                dvec[k] = p[k] - cpt[k]
                dist += dvec[k] * dvec[k]
            dist = sqrt(dist)
            if dist >= radius:
                continue
            if dist > 1e-12:
                pen = radius - dist
                for k in range(3):
                    nrm[k] = dvec[k] / dist
            else:
                # centre inside the box: push out through the nearest face
                pen = INFINITY
                nk = 0
                nsign = 1
                for k in range(3):
                    hi = boxes_c[b][k] + boxes_h[b][k]
                    lo = boxes_c[b][k] - boxes_h[b][k]
                    fd = hi - p[k]
                    if fd < pen:
                        pen = fd
                        nk = k
                        nsign = 1
                    fd = p[k] - lo
                    if fd < pen:
                        pen = fd
                        nk = k
                        nsign = -1
                pen += radius
                for k in range(3):
                    nrm[k] = 0.0
                nrm[nk] = nsign
            vn = v_s[0] * nrm[0] + v_s[1] * nrm[1] + v_s[2] * nrm[2]
            mag = wall_k * pen + wall_d * (-vn)
            if mag > 0.0:
                any_f = 1
                for k in range(3):
                    f_s[k] += mag * nrm[k]
        if any_f:
            _qrot(&env[4], f_s, f_w)
            for k in range(3):
                force[k] += f_w[k]
            torque[0] += arm_r[1] * f_w[2] - arm_r[2] * f_w[1]
            torque[1] += arm_r[2] * f_w[0] - arm_r[0] * f_w[2]
            torque[2] += arm_r[0] * f_w[1] - arm_r[1] * f_w[0]

    return np.array([force[0], force[1], force[2], torque[0], torque[1], torque[2]])


def impedance_step(pos, quat, vel, omg, ref_pos, ref_quat, stiff, damp, mass, f_ext, dt):
    """Semi-implicit Euler impedance step; see the pure backend docs."""
    cdef double p[3]
    cdef double qq[4]
    cdef double v[3]
    cdef double w[3]
    cdef double rp[3]
    cdef double rq[4]
    cdef double kk[6]
    cdef double dd[6]
    cdef double mm[6]
    cdef double fe[6]
    cdef double h = dt
    cdef int i
    for i in range(3):
        p[i] = pos[i]
        v[i] = vel[i]
        w[i] = omg[i]
        rp[i] = ref_pos[i]
    for i in range(4):
        qq[i] = quat[i]
        rq[i] = ref_quat[i]
    for i in range(6):
        kk[i] = stiff[i]
        dd[i] = damp[i]
        mm[i] = mass[i]
        fe[i] = f_ext[i]

    cdef double qc[4]
    cdef double qe[4]
    cdef double e_rot[3]
    cdef double e_pos[3]
    cdef double acc, alp
    cdef double new_v[3]
    cdef double new_w[3]
    cdef double new_p[3]
    cdef double rv[3]
    cdef double dq[4]
    cdef double new_q[4]
    qc[0] = -qq[0]; qc[1] = -qq[1]; qc[2] = -qq[2]; qc[3] = qq[3]
    _qmul(rq, qc, qe)
    _qtorv(qe, e_rot)
    for i in range(3):
        e_pos[i] = rp[i] - p[i]
        acc = (kk[i] * e_pos[i] - dd[i] * v[i] + fe[i]) / mm[i]
        new_v[i] = v[i] + h * acc
        alp = (kk[3 + i] * e_rot[i] - dd[3 + i] * w[i] + fe[3 + i]) / mm[3 + i]
        new_w[i] = w[i] + h * alp
        new_p[i] = p[i] + h * new_v[i]
        rv[i] = new_w[i] * h
    _qfromrv(rv, dq)
    _qmul(dq, qq, new_q)
    _qnormalize(new_q)
    return (np.array([new_p[0], new_p[1], new_p[2]]),
            np.array([new_q[0], new_q[1], new_q[2], new_q[3]]),
            np.array([new_v[0], new_v[1], new_v[2]]),
            np.array([new_w[0], new_w[1], new_w[2]]))
