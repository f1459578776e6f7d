"""Closed-loop safe navigation: sense, map, replan, project, govern, control.

Every tick runs the same fixed schedule from the pre-step pose: LiDAR scan,
occupancy update, periodic replanning from the governor position, projected
goal, governor update, reference lift, control, and one RK4 step of the plant
with the wrench held constant over the step. One telemetry row is appended
per tick.

The safety margin used to size the local safe ball is evaluated against the
previous tick's committed reference, which breaks the circular dependency
between the projected goal and the margin.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import se3
from .control import Gains, control, default_gains, desired_hamiltonian, dsm
from .governor import Path, governor_step, lift, local_projected_goal, local_safe_radius
from .rigid_body import AnalyticModel, RigidBodyParams, hexarotor_params, rk4_step, state_from
from .world import ObstacleSet, OccupancyGrid, astar_plan, cloud_distance, lidar_directions, lidar_scan

TELEMETRY_COLUMNS = (
    ["t"]
    + [f"q{i}" for i in range(12)] + [f"pm{i}" for i in range(6)]
    + ["gx", "gy", "gz", "gbarx", "gbary", "gbarz", "sigma", "dE", "Hd",
       "d_p_obs", "dbar_g_obs"]
    + [f"u{i}" for i in range(6)]
)


class ScenarioError(ValueError):
    pass


@dataclass
class Scenario:
    """Everything one navigation episode needs, minus the dynamics model."""

    obstacles: ObstacleSet
    start: np.ndarray
    goal: np.ndarray
    grid_lo: np.ndarray
    grid_hi: np.ndarray
    start_rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    start_twist: np.ndarray = field(default_factory=lambda: np.zeros(6))
    gains: Gains | None = None
    dt: float = 0.01
    duration: float = 60.0
    replan_period: float = 0.5
    governor_gain: float = 1.0
    eps: float = 0.1
    beta: float = 30.0
    grid_resolution: float = 0.25
    inflation_radius: float = 0.3
    lidar_rings: int = 16
    lidar_azimuths: int = 90
    goal_tolerance: float = 0.05
    seed: int = 0

    def __post_init__(self) -> None:
        self.start = np.asarray(self.start, dtype=float)
        self.goal = np.asarray(self.goal, dtype=float)
        self.grid_lo = np.asarray(self.grid_lo, dtype=float)
        self.grid_hi = np.asarray(self.grid_hi, dtype=float)
        self.start_rotation = np.asarray(self.start_rotation, dtype=float)
        self.start_twist = np.asarray(self.start_twist, dtype=float)


@dataclass
class Verdict:
    status: str  # "success" or "timeout"
    t_final: float
    ticks: int
    min_obstacle_distance: float
    min_margin: float
    final_goal_distance: float

    def summary(self) -> str:
        return (
            f"status: {self.status}\n"
            f"t_final: {self.t_final:.17g}\n"
            f"ticks: {self.ticks}\n"
            f"min_obstacle_distance: {self.min_obstacle_distance:.17g}\n"
            f"min_margin: {self.min_margin:.17g}\n"
            f"final_goal_distance: {self.final_goal_distance:.17g}\n"
        )


class Navigator:
    """Stateful navigation episode for one scenario and one dynamics model."""

    def __init__(self, scenario: Scenario, ctrl_model=None,
                 params: RigidBodyParams | None = None):
        self.scenario = scenario
        self.params = params or hexarotor_params()
        self.plant = AnalyticModel(self.params)
        self.ctrl_model = ctrl_model or self.plant
        self.gains = scenario.gains or default_gains(self.params)

        if scenario.obstacles.distance(scenario.start) <= 0.0:
            raise ScenarioError("start position is not strictly inside the free space")
        if scenario.obstacles.distance(scenario.goal) <= 0.0:
            raise ScenarioError("goal position is not strictly inside the free space")

        pm0 = self.params.mass_matrix @ scenario.start_twist
        self.x = state_from(se3.pack_coord(scenario.start, scenario.start_rotation), pm0)
        self.g = scenario.start.copy()
        self.t = 0.0
        self.tick = 0
        self.grid = OccupancyGrid(scenario.grid_lo, scenario.grid_hi,
                                  scenario.grid_resolution, scenario.inflation_radius)
        self._dirs = lidar_directions(scenario.lidar_rings, scenario.lidar_azimuths)
        self.path: Path | None = None
        self.sigma = 0.0
        self._backup_R = np.eye(3)
        self._planned_version = -1
        self._next_replan = 0.0
        self.records: list[np.ndarray] = []

        # startup margin check against the bootstrap reference (gbar = g)
        self.x_ref = lift(self.g, self.g, self._backup_R)
        cloud = self._scan()
        self.grid.update(cloud)
        dbar0 = cloud_distance(self.g, cloud, scenario.beta)
        if dsm(self.x, self.x_ref, dbar0, self.gains, self.ctrl_model) <= 0.0:
            raise ScenarioError("initial safety margin is not positive")
        self._replan(force=True)

    # -- internals -------------------------------------------------------------

    def _scan(self) -> np.ndarray:
        q = self.x[:12]
        return lidar_scan(q[:3], se3.coord_rotation(q), self.scenario.obstacles,
                          self.scenario.beta, self._dirs)

    def _replan(self, force: bool = False) -> None:
        """Plan from the governor position; keep the old path on failure."""
        if not force and self.grid.version == self._planned_version and self.path is not None:
            return
        cell = self.grid.nearest_free_cell(self.g)
        goal_cell = self.grid.world_to_cell(self.scenario.goal)
        if cell is None or goal_cell is None or not self.grid.is_free(goal_cell):
            return
        try:
            cells = astar_plan(self.grid, self.grid.cell_center(cell), self.scenario.goal)
        except ValueError:
            return  # transiently blocked; retry next epoch
        waypoints = [self.g.copy(), *cells, self.scenario.goal.copy()]
        self.path = Path(np.array(waypoints))
        self.sigma = 0.0
        self._planned_version = self.grid.version

    def step(self) -> np.ndarray:
        """One control tick; returns the telemetry row."""
        sc = self.scenario
        cloud = self._scan()
        self.grid.update(cloud)
        if self.t >= self._next_replan:
            self._replan()
            self._next_replan += sc.replan_period

        # margin w.r.t. the previous committed reference sizes the safe ball
        dbar_prev = cloud_distance(self.x_ref[:3], cloud, sc.beta)
        de_prev = dsm(self.x, self.x_ref, dbar_prev, self.gains, self.ctrl_model)
        if self.path is None:
            gbar, advanced = self.g.copy(), False
        else:
            gbar, sigma, advanced = local_projected_goal(
                self.path, self.g, de_prev, sc.eps, sigma_min=self.sigma)
        if advanced:
            self.sigma = max(self.sigma, sigma)
        else:
            gbar = self.g.copy()  # stall: the governor holds its position

        self.g = governor_step(self.g, gbar, sc.governor_gain, sc.dt)
        self.x_ref = lift(self.g, gbar, self._backup_R)
        self._backup_R = se3.coord_rotation(self.x_ref[:12])

        u = control(self.x, self.x_ref, self.gains, self.ctrl_model)

        dbar_g = cloud_distance(self.g, cloud, sc.beta)
        de = dsm(self.x, self.x_ref, dbar_g, self.gains, self.ctrl_model)
        hd = desired_hamiltonian(self.x, self.x_ref, self.gains, self.ctrl_model)
        d_p = sc.obstacles.distance(self.x[:3])
        row = np.concatenate([
            [self.t], self.x, self.g, gbar, [self.sigma, de, hd, d_p, dbar_g], u])
        self.records.append(row)

        self.x = rk4_step(self.x, u, sc.dt, self.plant)
        if not np.all(np.isfinite(self.x)):
            raise RuntimeError("navigation state diverged")
        self.t += sc.dt
        self.tick += 1
        return row

    def goal_reached(self) -> bool:
        zeta = self.plant.minv(self.x[:12]) @ self.x[12:]
        return (np.linalg.norm(self.x[:3] - self.scenario.goal) < self.scenario.goal_tolerance
                and np.linalg.norm(zeta) < self.scenario.goal_tolerance)

    def run(self):
        """Run to the goal or the duration cap; returns (telemetry, verdict)."""
        sc = self.scenario
        max_ticks = int(round(sc.duration / sc.dt))
        status = "timeout"
        while self.tick < max_ticks:
            self.step()
            if self.goal_reached():
                status = "success"
                break
        telemetry = np.array(self.records)
        verdict = Verdict(
            status=status,
            t_final=self.t,
            ticks=self.tick,
            min_obstacle_distance=float(telemetry[:, TELEMETRY_COLUMNS.index("d_p_obs")].min()),
            min_margin=float(telemetry[:, TELEMETRY_COLUMNS.index("dE")].min()),
            final_goal_distance=float(np.linalg.norm(self.x[:3] - sc.goal)),
        )
        return telemetry, verdict


def run_scenario(scenario: Scenario, ctrl_model=None, params: RigidBodyParams | None = None):
    return Navigator(scenario, ctrl_model=ctrl_model, params=params).run()


def telemetry_column(name: str) -> int:
    return TELEMETRY_COLUMNS.index(name)


def save_telemetry(path, telemetry: np.ndarray) -> None:
    """Columnar text log, one row per control tick."""
    with open(path, "w") as fh:
        fh.write("# hamnav telemetry v1\n")
        fh.write("# columns: " + " ".join(TELEMETRY_COLUMNS) + "\n")
        for row in telemetry:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def load_telemetry(path) -> np.ndarray:
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        data = np.loadtxt(path, ndmin=2)
    if data.size == 0 or data.shape[1] != len(TELEMETRY_COLUMNS):
        raise ValueError("malformed telemetry file")
    return data


def save_verdict(path, verdict: Verdict) -> None:
    with open(path, "w") as fh:
        fh.write(verdict.summary())
