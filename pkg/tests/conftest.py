import numpy as np
import pytest

from isrubench.geometry import Pose
from isrubench.kinematics import CollisionPrimitive, load_arm_model


@pytest.fixture(scope="session")
def arm():
    return load_arm_model()


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)


def random_valid_config(arm, rng, margin=0.05):
    lo = arm.limits[:, 0] + margin
    hi = arm.limits[:, 1] - margin
    return rng.uniform(lo, hi)


def desk_world():
    """The bundled desk scene's obstacle set (rover, antennas, slot, camera, soil)."""
    from isrubench.sim import load_scene
    return load_scene().obstacles


def box_at(half, pos, name=""):
    return CollisionPrimitive("box", tuple(half), Pose(pos), "world", name)
