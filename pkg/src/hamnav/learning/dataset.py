"""Trajectory windows for dynamics learning: generation, shifting, file I/O.

Each training sample is a short window flown under one constant wrench. The
generator mimics piloted flights: a pose PD loop (with gravity feedforward and
a dash of exploration noise) retargets at window boundaries and holds the
wrench constant in between, which is exactly the constant-input contract the
windows need. Every window is then shifted to start at the origin; the
dynamics do not depend on absolute position, so this costs nothing and
concentrates the data where the networks are evaluated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import se3
from ..rigid_body import RigidBodyParams, rk4_step, state_from

# PD gains sized for the 4 Hz zero-order hold of the data-collection loop
_PD_KP = 0.06
_PD_KV = 0.072
_PD_KR = 8e-5
_PD_KW = 8e-5
_NOISE_FORCE = 0.013
_NOISE_TORQUE = 4e-5

DATASET_FORMAT_VERSION = 1


@dataclass
class Trajectory:
    """Constant-input window: samples of coordinates and twists over time."""

    times: np.ndarray
    coords: np.ndarray
    twists: np.ndarray
    control: np.ndarray

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.coords = np.asarray(self.coords, dtype=float)
        self.twists = np.asarray(self.twists, dtype=float)
        self.control = np.asarray(self.control, dtype=float)
        n = len(self.times)
        if n < 2:
            raise ValueError("a trajectory needs at least two samples")
        if np.any(np.diff(self.times) <= 0.0):
            raise ValueError("times must be strictly increasing")
        if self.coords.shape != (n, 12) or self.twists.shape != (n, 6):
            raise ValueError("coords/twists shape mismatch")
        for q in self.coords:
            if se3.rotation_defect(se3.coord_rotation(q)) > 1e-6:
                raise ValueError("rotation block is not a rotation matrix")

    @property
    def horizon(self) -> int:
        return len(self.times) - 1


def translate_to_origin(traj: Trajectory) -> Trajectory:
    """Shift all positions so the window starts at the origin."""
    coords = traj.coords.copy()
    coords[:, :3] -= traj.coords[0, :3]
    return Trajectory(traj.times.copy(), coords, traj.twists.copy(), traj.control.copy())


def _pd_wrench(x: np.ndarray, p_ref: np.ndarray, R_ref: np.ndarray,
               params: RigidBodyParams) -> np.ndarray:
    q, pm = x[:12], x[12:]
    R = se3.coord_rotation(q)
    v = pm[:3] / params.mass
    w = np.linalg.solve(params.inertia, pm[3:])
    f_world = (params.mass * params.gravity * np.array([0, 0, 1.0])
               + _PD_KP * (p_ref - q[:3]) - _PD_KV * (R @ v))
    S = R_ref.T @ R - R.T @ R_ref
    e_rot = 0.5 * np.array([S[2, 1], S[0, 2], S[1, 0]])
    tau = -_PD_KR * e_rot - _PD_KW * w
    return np.concatenate([R.T @ f_world, tau])


def generate_dataset(params: RigidBodyParams, n_windows: int = 432, horizon: int = 5,
                     seed: int = 0, sample_dt: float = 0.05, sim_dt: float = 0.01,
                     windows_per_flight: int = 4) -> list[Trajectory]:
    """Simulated piloted flights segmented into constant-input windows.

    Returns ``n_windows`` trajectories of ``horizon + 1`` samples each, all
    shifted to start at the origin.
    """
    if n_windows < 1 or horizon < 1:
        raise ValueError("n_windows and horizon must be at least 1")
    from ..rigid_body import AnalyticModel

    rng = np.random.default_rng(seed)
    model = AnalyticModel(params)
    steps_per_sample = round(sample_dt / sim_dt)
    if abs(steps_per_sample * sim_dt - sample_dt) > 1e-12:
        raise ValueError("sim_dt must divide sample_dt")

    windows: list[Trajectory] = []
    while len(windows) < n_windows:
        # fresh flight: random start pose/twist toward a random target pose
        p0 = rng.uniform(-2.0, 2.0, size=3)
        tilt_axis = rng.normal(size=3)
        tilt_axis /= np.linalg.norm(tilt_axis)
        R0 = se3.so3_exp(np.array([0, 0, rng.uniform(-np.pi, np.pi)])) @ \
            se3.so3_exp(rng.uniform(0.0, 0.35) * tilt_axis)
        zeta0 = np.concatenate([rng.uniform(-0.3, 0.3, 3), rng.uniform(-1.0, 1.0, 3)])
        x = state_from(se3.pack_coord(p0, R0), params.mass_matrix @ zeta0)
        p_ref = p0 + rng.uniform(-1.5, 1.5, size=3)
        R_ref = se3.so3_exp(np.array([0, 0, rng.uniform(-np.pi, np.pi)]))

        for _ in range(windows_per_flight):
            u = _pd_wrench(x, p_ref, R_ref, params)
            u[:3] += rng.normal(scale=_NOISE_FORCE, size=3)
            u[3:] += rng.normal(scale=_NOISE_TORQUE, size=3)
            times = sample_dt * np.arange(horizon + 1)
            coords = np.empty((horizon + 1, 12))
            twists = np.empty((horizon + 1, 6))
            coords[0], twists[0] = x[:12], np.linalg.solve(params.mass_matrix, x[12:])
            for k in range(horizon):
                for _ in range(steps_per_sample):
                    x = rk4_step(x, u, sim_dt, model)
                coords[k + 1] = x[:12]
                twists[k + 1] = np.linalg.solve(params.mass_matrix, x[12:])
            windows.append(translate_to_origin(Trajectory(times, coords, twists, u)))
            if len(windows) == n_windows:
                break
    return windows


def estimate_minv_scale(dataset: list[Trajectory]) -> float:
    """Magnitude of the inverse-inertia block, from accelerations vs torques.

    Least squares of finite-difference angular accelerations against the
    applied torques, pooled per axis. Only the order of magnitude matters: it
    normalizes the SPD factor so the networks train from O(1) outputs.
    """
    num = np.zeros(3)
    den = np.zeros(3)
    for traj in dataset:
        tau = traj.control[3:]
        w = traj.twists[:, 3:]
        t = traj.times
        for k in range(1, len(t) - 1):
            wdot = (w[k + 1] - w[k - 1]) / (t[k + 1] - t[k - 1])
            num += wdot * tau
            den += tau * tau
    ok = den > 1e-12
    if not np.any(ok):
        return 1.0
    scale = float(np.mean(np.abs(num[ok] / den[ok])))
    return scale if scale > 0.0 else 1.0


def estimate_input_scales(dataset: list[Trajectory]) -> np.ndarray:
    """Per-channel RMS of the applied wrenches (floored away from zero).

    Used to normalize the input-matrix network: entries coupling large input
    channels into the (stiff) rotation dynamics would otherwise dominate every
    optimizer step.
    """
    u = np.stack([traj.control for traj in dataset])
    return np.maximum(np.sqrt(np.mean(u**2, axis=0)), 1e-8)


def save_dataset(path, trajectories: list[Trajectory]) -> None:
    """Columnar text: one row per sample, constant input repeated per row."""
    with open(path, "w") as fh:
        fh.write(f"# hamnav dataset v{DATASET_FORMAT_VERSION}\n")
        fh.write("# columns: traj_id t q[0..11] zeta[0..5] u[0..5]\n")
        fh.write("# q = [position(3), rotation rows(9)]; zeta = [v(3), omega(3)] body frame\n")
        for i, traj in enumerate(trajectories):
            for k in range(len(traj.times)):
                row = [float(i), traj.times[k], *traj.coords[k], *traj.twists[k], *traj.control]
                fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def load_dataset(path) -> list[Trajectory]:
    data = np.loadtxt(path, ndmin=2)
    if data.size == 0:
        raise ValueError("empty dataset file")
    if data.shape[1] != 1 + 1 + 12 + 6 + 6:
        raise ValueError("malformed dataset file")
    out = []
    for tid in np.unique(data[:, 0]):
        rows = data[data[:, 0] == tid]
        out.append(Trajectory(rows[:, 1], rows[:, 2:14], rows[:, 14:20], rows[0, 20:26]))
    return out


def stack_dataset(trajectories: list[Trajectory]):
    """Batch tensors (times, coords, twists, inputs) for training.

    All trajectories must share the same sampling times.
    """
    t0 = trajectories[0].times
    for traj in trajectories:
        if len(traj.times) != len(t0) or np.max(np.abs(traj.times - t0)) > 1e-12:
            raise ValueError("trajectories must share sampling times")
    coords = np.stack([traj.coords for traj in trajectories])
    twists = np.stack([traj.twists for traj in trajectories])
    inputs = np.stack([traj.control for traj in trajectories])
    return t0.copy(), coords, twists, inputs
