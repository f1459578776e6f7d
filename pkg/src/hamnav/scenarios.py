"""Scripted evaluation worlds: an L-bend corridor, a sphere forest, a narrow gap.

Each builder returns a ready-to-run :class:`~hamnav.navigator.Scenario`. The
worlds are sized for the small aerial robot: corridors about two meters wide,
walls spanning the full vertical extent of the planning grid so the planner
cannot fly over them.
"""

from __future__ import annotations

import numpy as np

from .navigator import Scenario
from .world import Box, ObstacleSet, Sphere

FLIGHT_Z = 1.5


def corridor_world() -> Scenario:
    """Two-meter corridor along +x with a left bend to +y."""
    obstacles = ObstacleSet([
        Box([-1.4, -1.4, 0.0], [9.4, -1.0, 3.0]),   # south wall
        Box([-1.4, 1.0, 0.0], [6.6, 1.4, 3.0]),     # north wall, stops at the bend
        Box([9.0, -1.0, 0.0], [9.4, 9.4, 3.0]),     # east wall and end cap
        Box([6.6, 1.4, 0.0], [7.0, 9.4, 3.0]),      # west wall of the second leg
        Box([-1.8, -1.4, 0.0], [-1.4, 1.4, 3.0]),   # cap behind the start
        Box([7.0, 9.0, 0.0], [9.0, 9.4, 3.0]),      # cap beyond the goal
    ])
    return Scenario(
        obstacles=obstacles,
        start=np.array([0.0, 0.0, FLIGHT_Z]),
        goal=np.array([8.0, 8.0, FLIGHT_Z]),
        grid_lo=np.array([-2.0, -2.0, 0.0]),
        grid_hi=np.array([10.0, 10.0, 3.0]),
        duration=90.0,
    )


def forest_world() -> Scenario:
    """Ten-sphere forest between the start and the goal."""
    centers = [
        (2.5, 0.8), (3.4, -1.6), (4.6, 1.9), (5.2, -0.4), (6.1, -2.3),
        (6.9, 1.2), (7.8, -1.0), (8.6, 2.1), (9.4, 0.3), (10.3, -1.8),
    ]
    spheres = [Sphere([x, y, FLIGHT_Z], 0.6) for x, y in centers]
    obstacles = ObstacleSet(spheres)
    return Scenario(
        obstacles=obstacles,
        start=np.array([0.0, 0.0, FLIGHT_Z]),
        goal=np.array([12.0, 0.0, FLIGHT_Z]),
        grid_lo=np.array([-1.5, -4.0, 0.0]),
        grid_hi=np.array([13.5, 4.0, 3.0]),
        duration=90.0,
    )


def narrow_gap_world() -> Scenario:
    """Full-height wall with a one-meter gap; forces the governor to stall."""
    obstacles = ObstacleSet([
        Box([5.0, -4.0, 0.0], [5.5, -0.5, 3.0]),
        Box([5.0, 0.5, 0.0], [5.5, 4.0, 3.0]),
    ])
    return Scenario(
        obstacles=obstacles,
        start=np.array([0.0, 0.0, FLIGHT_Z]),
        goal=np.array([10.0, 0.0, FLIGHT_Z]),
        grid_lo=np.array([-1.5, -4.0, 0.0]),
        grid_hi=np.array([11.5, 4.0, 3.0]),
        duration=120.0,
    )


def stall_gap_world() -> Scenario:
    """Narrow gap driven by an aggressive governor at a fine control tick.

    The governor outruns the robot's energy dissipation into the bottleneck,
    pinning the safety margin near zero: the local safe ball collapses, the
    governor freezes, and progress resumes once the robot has dissipated the
    excess energy.
    """
    scn = narrow_gap_world()
    scn.governor_gain = 35.0
    scn.dt = 0.002
    return scn


def straight_corridor_world() -> Scenario:
    """Obstacle-free straight run (smoke scenario)."""
    return Scenario(
        obstacles=ObstacleSet(),
        start=np.array([0.0, 0.0, FLIGHT_Z]),
        goal=np.array([6.0, 0.0, FLIGHT_Z]),
        grid_lo=np.array([-1.0, -2.0, 0.0]),
        grid_hi=np.array([7.0, 2.0, 3.0]),
        duration=60.0,
    )


SCENARIOS = {
    "corridor": corridor_world,
    "forest": forest_world,
    "narrow-gap": narrow_gap_world,
    "stall-gap": stall_gap_world,
    "straight": straight_corridor_world,
}
