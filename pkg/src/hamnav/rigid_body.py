"""Rigid-body Hamiltonian dynamics and the fixed-step RK4 integrator.

The state vector ``x`` has 18 entries: the 12-entry generalized coordinate
(see :mod:`hamnav.se3`) followed by the 6-entry body-frame generalized
momentum. Dynamics are written against a small "model view" interface so the
same right-hand side serves the analytic ground-truth model and learned
models:

* ``minv(q)``    -> 6x6 inverse generalized mass matrix (SPD)
* ``b(q)``       -> 6xp input matrix
* ``potential(q)``-> scalar potential energy
* ``du_dq(q)``   -> 12-entry gradient of the potential
* ``dminv_dq(q)``-> 6x6x12 derivative of minv w.r.t. the coordinates
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .se3 import coord_cross, coord_rotation, momentum_cross, orthonormalize

GRAVITY = 9.8


@dataclass
class RigidBodyParams:
    """Ground-truth constants of a fully-actuated rigid body."""

    mass: float
    inertia: np.ndarray
    gravity: float = GRAVITY
    input_matrix: np.ndarray = field(default_factory=lambda: np.eye(6))

    def __post_init__(self) -> None:
        self.inertia = np.asarray(self.inertia, dtype=float)
        self.input_matrix = np.asarray(self.input_matrix, dtype=float)
        if self.mass <= 0.0:
            raise ValueError("mass must be positive")
        if np.linalg.norm(self.inertia - self.inertia.T) > 1e-12:
            raise ValueError("inertia must be symmetric")
        if np.any(np.linalg.eigvalsh(self.inertia) <= 0.0):
            raise ValueError("inertia must be positive definite")

    @property
    def mass_matrix(self) -> np.ndarray:
        M = np.zeros((6, 6))
        M[:3, :3] = self.mass * np.eye(3)
        M[3:, 3:] = self.inertia
        return M


def hexarotor_params() -> RigidBodyParams:
    """Constants of the simulated fully-actuated hexarotor."""
    return RigidBodyParams(mass=0.027, inertia=1e-5 * np.diag([2.4, 2.4, 3.2]))


class AnalyticModel:
    """Model view backed by the ground-truth constants (gravity potential m*g*z).

    Useful both as the simulation truth and as a stand-in for a learned model,
    which lets the controller be exercised without any training.
    """

    def __init__(self, params: RigidBodyParams):
        self.params = params
        self._minv = np.linalg.inv(params.mass_matrix)
        self._dudq = np.zeros(12)
        self._dudq[2] = params.mass * params.gravity
        self._dminv = np.zeros((6, 6, 12))

    def minv(self, q: np.ndarray) -> np.ndarray:
        return self._minv

    def b(self, q: np.ndarray) -> np.ndarray:
        return self.params.input_matrix

    def potential(self, q: np.ndarray) -> float:
        return self.params.mass * self.params.gravity * q[2]

    def du_dq(self, q: np.ndarray) -> np.ndarray:
        return self._dudq

    def dminv_dq(self, q: np.ndarray) -> np.ndarray:
        return self._dminv


class ScaledModel:
    """Wrap a model view with the gauge (M, B, U) -> (gamma*M, gamma*B, gamma*U).

    The twist-level dynamics are invariant under this scaling, which is the
    ambiguity a trained model is only determined up to. The potential must
    scale along with the mass for the gravity response to stay put; for the
    hexarotor the potential and linear mass are known, so the residual gauge
    only touches the learned inertia/torque blocks.
    """

    def __init__(self, base, gamma: float):
        self.base = base
        self.gamma = float(gamma)

    def minv(self, q):
        return self.base.minv(q) / self.gamma

    def b(self, q):
        return self.gamma * self.base.b(q)

    def potential(self, q):
        return self.gamma * self.base.potential(q)

    def du_dq(self, q):
        return self.gamma * self.base.du_dq(q)

    def dminv_dq(self, q):
        return self.base.dminv_dq(q) / self.gamma


def generalized_momentum(M: np.ndarray, zeta: np.ndarray) -> np.ndarray:
    """Momentum M @ zeta. Raises ValueError unless ``M`` is symmetric pd."""
    M = np.asarray(M, dtype=float)
    if np.linalg.norm(M - M.T) > 1e-9 * max(1.0, np.abs(M).max()):
        raise ValueError("mass matrix not symmetric positive definite")
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise ValueError("mass matrix not symmetric positive definite") from exc
    return M @ np.asarray(zeta, dtype=float)


def state_from(q: np.ndarray, pm: np.ndarray) -> np.ndarray:
    return np.concatenate([np.asarray(q, dtype=float), np.asarray(pm, dtype=float)])


def hamiltonian(x: np.ndarray, model) -> float:
    """Total energy: kinetic 0.5 pm^T M^{-1} pm plus potential."""
    q, pm = x[:12], x[12:]
    return float(0.5 * pm @ model.minv(q) @ pm + model.potential(q))


def _dh_dq(q: np.ndarray, pm: np.ndarray, model) -> np.ndarray:
    dT = 0.5 * np.einsum("i,ijk,j->k", pm, model.dminv_dq(q), pm)
    return model.du_dq(q) + dT


def dynamics_rhs(x: np.ndarray, u: np.ndarray, model) -> np.ndarray:
    """Hamiltonian equations of motion in (coords, momentum) form."""
    q, pm = x[:12], x[12:]
    Qc = coord_cross(q)
    zeta = model.minv(q) @ pm
    qdot = Qc @ zeta
    pmdot = -Qc.T @ _dh_dq(q, pm, model) + momentum_cross(pm) @ zeta + model.b(q) @ u
    return np.concatenate([qdot, pmdot])


def velocity_rhs(q: np.ndarray, zeta: np.ndarray, u: np.ndarray, model):
    """Equations of motion in (coords, twist) form.

    Returns (qdot, zetadot) with zetadot = d(M^{-1})/dt pm + M^{-1} pmdot,
    consistent with :func:`dynamics_rhs` under pm = M zeta.
    """
    Minv = model.minv(q)
    pm = np.linalg.solve(Minv, zeta)
    Qc = coord_cross(q)
    qdot = Qc @ zeta
    pmdot = -Qc.T @ _dh_dq(q, pm, model) + momentum_cross(pm) @ zeta + model.b(q) @ u
    dMinv_dt = np.einsum("ijk,k->ij", model.dminv_dq(q), qdot)
    zetadot = dMinv_dt @ pm + Minv @ pmdot
    return qdot, zetadot


def _project_rotation(x: np.ndarray) -> np.ndarray:
    x = x.copy()
    x[3:12] = orthonormalize(coord_rotation(x)).reshape(9)
    return x


def rk4_step(x: np.ndarray, u: np.ndarray, dt: float, model) -> np.ndarray:
    """Classical RK4 step on the 18-entry state, then rotation re-projection."""
    if dt == 0.0:
        return x.copy()
    k1 = dynamics_rhs(x, u, model)
    k2 = dynamics_rhs(x + 0.5 * dt * k1, u, model)
    k3 = dynamics_rhs(x + 0.5 * dt * k2, u, model)
    k4 = dynamics_rhs(x + dt * k3, u, model)
    return _project_rotation(x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))


def rk4_step_velocity(q: np.ndarray, zeta: np.ndarray, u: np.ndarray, dt: float, model):
    """RK4 step of the (coords, twist) form with the same rotation projection."""
    if dt == 0.0:
        return q.copy(), zeta.copy()

    def f(qz):
        dq, dz = velocity_rhs(qz[:12], qz[12:], u, model)
        return np.concatenate([dq, dz])

    qz = np.concatenate([q, zeta])
    k1 = f(qz)
    k2 = f(qz + 0.5 * dt * k1)
    k3 = f(qz + 0.5 * dt * k2)
    k4 = f(qz + dt * k3)
    out = _project_rotation(qz + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
    return out[:12], out[12:]


def simulate(x0: np.ndarray, u, dt: float, steps: int, model) -> tuple[np.ndarray, np.ndarray]:
    """Roll out ``steps`` RK4 steps; ``u`` is a wrench or a callable u(t, x).

    Returns (times, states) with states[0] = x0.
    """
    times = dt * np.arange(steps + 1)
    xs = np.empty((steps + 1, 18))
    xs[0] = x0
    x = np.asarray(x0, dtype=float)
    for k in range(steps):
        uk = u(times[k], x) if callable(u) else u
        x = rk4_step(x, uk, dt, model)
        xs[k + 1] = x
    return times, xs
