"""Compiled extension vs pure fallback: identical results on random inputs."""

import numpy as np
import pytest

import isrubench._kernels_py as pure
from isrubench import kernels as active
from isrubench.geometry import random_quat

try:
    import isrubench._kernels as compiled
except ImportError:
    compiled = None

needs_compiled = pytest.mark.skipif(compiled is None, reason="extension not built")


def test_active_backend_reported():
    assert active.BACKEND in ("compiled", "pure")


@needs_compiled
def test_quat_ops_parity(rng):
    for _ in range(300):
        qa, qb = random_quat(rng), random_quat(rng)
        v = rng.uniform(-2, 2, 3)
        rv = rng.uniform(-3, 3, 3)
        assert np.allclose(compiled.quat_mul(qa, qb), pure.quat_mul(qa, qb), atol=1e-14)
        assert np.allclose(compiled.quat_rotate(qa, v), pure.quat_rotate(qa, v), atol=1e-14)
        assert np.allclose(compiled.quat_from_rotvec(rv), pure.quat_from_rotvec(rv), atol=1e-14)
        assert np.allclose(compiled.quat_to_rotvec(qa), pure.quat_to_rotvec(qa), atol=1e-12)
        assert compiled.quat_angle(qa, qb) == pytest.approx(pure.quat_angle(qa, qb), abs=1e-12)
        t = rng.uniform()
        assert np.allclose(compiled.quat_slerp(qa, qb, t), pure.quat_slerp(qa, qb, t), atol=1e-12)


@needs_compiled
def test_fk_parity(arm, rng):
    for _ in range(100):
        q = rng.uniform(arm.limits[:, 0], arm.limits[:, 1])
        p1, q1 = compiled.fk_frames(arm.fixed_pos, arm.fixed_quat, arm.axes, q)
        p2, q2 = pure.fk_frames(arm.fixed_pos, arm.fixed_quat, arm.axes, q)
        assert np.allclose(p1, p2, atol=1e-13)
        assert np.allclose(np.abs(np.sum(q1 * q2, axis=1)), 1.0, atol=1e-12)


@needs_compiled
def test_pair_distance_parity(rng):
    types = [(0, (0.1, 0, 0)), (1, (0.08, 0.2, 0)), (2, (0.15, 0.1, 0.2))]
    for _ in range(500):
        ta, pa = types[rng.integers(3)]
        tb, pb = types[rng.integers(3)]
        if ta == 2 and tb == 2:
            continue
        pos_a, pos_b = rng.uniform(-0.5, 0.5, 3), rng.uniform(-0.5, 0.5, 3)
        qa, qb = random_quat(rng), random_quat(rng)
        d1 = compiled.pair_distance(ta, np.array(pa), pos_a, qa, tb, np.array(pb), pos_b, qb)
        d2 = pure.pair_distance(ta, np.array(pa), pos_a, qa, tb, np.array(pb), pos_b, qb)
        assert d1 == pytest.approx(d2, abs=1e-12)


@needs_compiled
def test_contact_and_step_parity(rng):
    env = np.array([-0.4, 0.35, 0.22, 0.12, 0, 0, 0, 1.0,
                    0.016, 0.015, 0.06, 5000.0, 50.0, 0.05, 0.01, 0.05, 0.0025])
    stiff = np.array([600.0, 600, 600, 30, 30, 30])
    damp = 2 * 0.7 * np.sqrt(stiff * np.array([5.0, 5, 5, 0.5, 0.5, 0.5]))
    mass = np.array([5.0, 5, 5, 0.5, 0.5, 0.5])
    rel_pos = np.array([0.0, 0.0, 0.025])
    rel_quat = np.array([1.0, 0.0, 0.0, 0.0])
    for _ in range(300):
        pos = rng.uniform(-0.5, 0.5, 3)
        quat = random_quat(rng)
        vel = rng.uniform(-0.2, 0.2, 3)
        omg = rng.uniform(-0.5, 0.5, 3)
        holding = bool(rng.integers(2))
        w1 = compiled.contact_wrench(env, pos, quat, vel, omg, holding, rel_pos, rel_quat)
        w2 = pure.contact_wrench(env, pos, quat, vel, omg, holding, rel_pos, rel_quat)
        assert np.allclose(w1, w2, atol=1e-10)
        ref_pos = pos + rng.uniform(-0.05, 0.05, 3)
        ref_quat = random_quat(rng)
        s1 = compiled.impedance_step(pos, quat, vel, omg, ref_pos, ref_quat,
                                     stiff, damp, mass, w1, 0.01)
        s2 = pure.impedance_step(pos, quat, vel, omg, ref_pos, ref_quat,
                                 stiff, damp, mass, w2, 0.01)
        for a, b in zip(s1, s2):
            assert np.allclose(a, b, atol=1e-12)
