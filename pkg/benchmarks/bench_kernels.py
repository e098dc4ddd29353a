#!/usr/bin/env python3
"""Throughput comparison: compiled kernels vs the pure-Python fallback.

Run after `pip install -e .`:

    python benchmarks/bench_kernels.py [--repeat N]

Times the three hot paths (chain FK, full-config collision distance, contact +
impedance step) on both backends and prints the speedup.
"""

import argparse
import time

import numpy as np

import isrubench._kernels_py as pure
from isrubench.collision import _world_pack
from isrubench.geometry import Pose
from isrubench.kinematics import CollisionPrimitive, load_arm_model

try:
    import isrubench._kernels as compiled
except ImportError:
    compiled = None


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=2000)
    args = ap.parse_args()
    repeat = args.repeat

    arm = load_arm_model()
    rng = np.random.default_rng(7)
    qs = rng.uniform(arm.limits[:, 0], arm.limits[:, 1], size=(repeat, arm.dof))

    world = [
        CollisionPrimitive("box", (0.35, 0.25, 0.2), Pose((0.1, 0, -0.2)), "world", "rover"),
        CollisionPrimitive("box", (0.02, 0.02, 0.25), Pose((-0.15, 0.2, 0.25)), "world", "ant_l"),
        CollisionPrimitive("box", (0.02, 0.02, 0.25), Pose((-0.15, -0.2, 0.25)), "world", "ant_r"),
        CollisionPrimitive("box", (0.05, 0.05, 0.06), Pose((0.35, 0.22, 0.06)), "world", "slot"),
        CollisionPrimitive("box", (2.0, 2.0, 0.5), Pose((0, 0, -0.9)), "world", "soil"),
    ]
    wt, wp, wpos, wquat = _world_pack(world)
    blink, btype, bparams, blpos, blquat = arm.body_pack()
    mask = arm.self_pair_mask()

    env = np.array([-0.4, 0.35, 0.22, 0.12, 0, 0, 0, 1.0,
                    0.016, 0.015, 0.06, 5000.0, 50.0, 0.05, 0.01, 0.05, 0.0025])
    stiff = np.array([600.0, 600, 600, 30, 30, 30])
    mass = np.array([5.0, 5, 5, 0.5, 0.5, 0.5])
    damp = 2 * np.sqrt(stiff * mass)
    rel_pos = np.array([0.0, 0.0, 0.025])
    rel_quat = np.array([1.0, 0.0, 0.0, 0.0])
    pos = np.array([0.3, 0.0, 0.4])
    quat = np.array([1.0, 0.0, 0.0, 0.0])
    vel = np.zeros(3)
    omg = np.zeros(3)
    ref = np.array([0.31, 0.0, 0.39])

    def time_backend(K):
        out = {}
        t0 = time.perf_counter()
        for k in range(repeat):
            K.fk_frames(arm.fixed_pos, arm.fixed_quat, arm.axes, qs[k])
        out["fk_frames"] = (time.perf_counter() - t0) / repeat
        t0 = time.perf_counter()
        for k in range(repeat):
            K.arm_config_distance(arm.fixed_pos, arm.fixed_quat, arm.axes, qs[k],
                                  blink, btype, bparams, blpos, blquat,
                                  wt, wp, wpos, wquat, mask, 0.0)
        out["config_distance"] = (time.perf_counter() - t0) / repeat
        t0 = time.perf_counter()
        for _ in range(repeat):
            w = K.contact_wrench(env, pos, quat, vel, omg, 1, rel_pos, rel_quat)
            K.impedance_step(pos, quat, vel, omg, ref, quat, stiff, damp, mass, w, 0.01)
        out["contact+step"] = (time.perf_counter() - t0) / repeat
        return out

    backends = [("pure", pure)] + ([("compiled", compiled)] if compiled else [])
    results = {name: time_backend(K) for name, K in backends}

    header = f"{'kernel':<18}" + "".join(f"{name:>14}" for name, _ in backends)
    if compiled:
        header += f"{'speedup':>10}"
    print(header)
    for label in ("fk_frames", "config_distance", "contact+step"):
        row = f"{label:<18}"
        for name, _ in backends:
            row += f"{results[name][label] * 1e6:>12.1f}us"
        if compiled:
            row += f"{results['pure'][label] / results['compiled'][label]:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
