"""Numeric kernel backend selection.

The hot inner loops (chain FK, primitive distances, contact and impedance
stepping) exist twice: a Cython extension (``isrubench._kernels``) and a pure
numpy fallback (``isrubench._kernels_py``). The compiled backend is used when
importable; set ``ISRUBENCH_PURE=1`` to force the fallback. ``BACKEND`` names
the active one. Both implement identical semantics; ``isrubench.cli bench``
compares their throughput.
"""

import os

if os.environ.get("ISRUBENCH_PURE", "") in ("1", "true", "yes"):
    from . import _kernels_py as _impl
    BACKEND = "pure"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
        BACKEND = "compiled"
    except ImportError:
        from . import _kernels_py as _impl
        BACKEND = "pure"

SPHERE = _impl.SPHERE
CAPSULE = _impl.CAPSULE
BOX = _impl.BOX

quat_mul = _impl.quat_mul
quat_conj = _impl.quat_conj
quat_normalize = _impl.quat_normalize
quat_rotate = _impl.quat_rotate
quat_from_rotvec = _impl.quat_from_rotvec
quat_to_rotvec = _impl.quat_to_rotvec
quat_angle = _impl.quat_angle
quat_slerp = _impl.quat_slerp
fk_frames = _impl.fk_frames
pair_distance = _impl.pair_distance
arm_config_distance = _impl.arm_config_distance
contact_wrench = _impl.contact_wrench
impedance_step = _impl.impedance_step
