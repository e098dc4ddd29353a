"""Desk-scale bilateral teleoperation testbed.

A simulated impedance-controlled manipulator performs fetch-and-assemble
(peg-in-hole) under haptic teleoperation across a delayed link, with
collision-aware offline planning extending the teleoperation workspace, a
scripted virtual operator for reproducible campaigns, and a live console
endpoint for human clients.
"""

__version__ = "0.1.0"

from .geometry import Pose, compose, inverse, orientation_error  # noqa: F401
