"""Rollout-based training of the Hamiltonian dynamics model.

The predicted trajectory integrates the learned dynamics in (coords, twist)
form with fixed-step RK4, and the loss sums squared position, rotation-log,
and twist errors over every predicted sample. Gradients come from plain
backpropagation through the unrolled solver steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .. import se3
from ..rigid_body import rk4_step_velocity, velocity_rhs
from .dataset import Trajectory, estimate_input_scales, estimate_minv_scale, stack_dataset
from .model import HamiltonianModel


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    iterations: int = 5000
    learning_rate: float = 1e-3
    batch_size: int | None = None  # None = full batch
    seed: int = 0
    substeps: int = 1

    def __post_init__(self) -> None:
        if self.iterations <= 0:
            raise ValueError("iterations must be positive")
        if self.learning_rate <= 0.0:
            raise ValueError("learning rate must be positive")


# -- torch dynamics ----------------------------------------------------------

def dynamics_rhs_torch(model: HamiltonianModel, q: torch.Tensor, zeta: torch.Tensor,
                       u: torch.Tensor):
    """Batched twist-form equations of motion with learned (M^{-1}, B)."""
    B = q.shape[0]
    r = q[:, 3:]
    R = r.view(B, 3, 3)
    v, w = zeta[:, :3], zeta[:, 3:]
    Minv, dMinv = model.minv_with_jac(r)
    M = torch.linalg.inv(Minv)
    pm = torch.einsum("bij,bj->bi", M, zeta)
    pv, pw = pm[:, :3], pm[:, 3:]

    pdot = torch.einsum("bij,bj->bi", R, v)
    rdot = torch.linalg.cross(R, w.unsqueeze(1).expand(B, 3, 3), dim=2)
    qdot = torch.cat([pdot, rdot.reshape(B, 9)], dim=1)

    # kinetic-energy gradient w.r.t. the rotation entries (momentum held fixed)
    dTdr = 0.5 * torch.einsum("bi,bijk,bj->bk", pm, dMinv, pm)
    Bu = torch.einsum("bij,bj->bi", model.b_matrix(r), u)
    mg = model.mass * model.gravity
    force = -mg * R[:, 2, :] + torch.linalg.cross(pv, w) + Bu[:, :3]
    torque = (torch.linalg.cross(R, dTdr.view(B, 3, 3), dim=2).sum(dim=1)
              + torch.linalg.cross(pv, v) + torch.linalg.cross(pw, w) + Bu[:, 3:])
    pmdot = torch.cat([force, torque], dim=1)

    dMinv_dt = torch.einsum("bijk,bk->bij", dMinv, rdot.reshape(B, 9))
    zetadot = (torch.einsum("bij,bj->bi", dMinv_dt, pm)
               + torch.einsum("bij,bj->bi", Minv, pmdot))
    return qdot, zetadot


def _rk4_qz(model, q, zeta, u, h):
    k1q, k1z = dynamics_rhs_torch(model, q, zeta, u)
    k2q, k2z = dynamics_rhs_torch(model, q + 0.5 * h * k1q, zeta + 0.5 * h * k1z, u)
    k3q, k3z = dynamics_rhs_torch(model, q + 0.5 * h * k2q, zeta + 0.5 * h * k2z, u)
    k4q, k4z = dynamics_rhs_torch(model, q + h * k3q, zeta + h * k3z, u)
    q_next = q + (h / 6.0) * (k1q + 2 * k2q + 2 * k3q + k4q)
    z_next = zeta + (h / 6.0) * (k1z + 2 * k2z + 2 * k3z + k4z)
    return q_next, z_next


def rollout_torch(model: HamiltonianModel, q0: torch.Tensor, zeta0: torch.Tensor,
                  u: torch.Tensor, n_steps: int, h: float, substeps: int = 1):
    """Unrolled RK4 over ``n_steps`` sample intervals; keeps the graph."""
    qs, zs = [q0], [zeta0]
    q, z = q0, zeta0
    for _ in range(n_steps):
        for _ in range(substeps):
            q, z = _rk4_qz(model, q, z, u, h / substeps)
        qs.append(q)
        zs.append(z)
    return torch.stack(qs, dim=1), torch.stack(zs, dim=1)


def tse3_loss_torch(q_pred: torch.Tensor, z_pred: torch.Tensor,
                    q_target: torch.Tensor, z_target: torch.Tensor) -> torch.Tensor:
    """Sum of squared position, rotation-log, and twist errors (samples 1..N)."""
    dp = q_pred[:, 1:, :3] - q_target[:, 1:, :3]
    dz = z_pred[:, 1:] - z_target[:, 1:]
    Rp = q_pred[:, 1:, 3:].reshape(*q_pred[:, 1:].shape[:-1], 3, 3)
    Rt = q_target[:, 1:, 3:].reshape(*q_target[:, 1:].shape[:-1], 3, 3)
    rel = Rp @ Rt.transpose(-1, -2)
    tr = rel[..., 0, 0] + rel[..., 1, 1] + rel[..., 2, 2]
    cos = torch.clamp(0.5 * (tr - 1.0), -1.0 + 1e-12, 1.0 - 1e-12)
    theta2 = torch.acos(cos) ** 2
    return (dp**2).sum() + (dz**2).sum() + theta2.sum()


# -- numpy op surface ---------------------------------------------------------

def tse3_loss(pred_coords, pred_twists, target_coords, target_twists) -> float:
    """Trajectory mismatch: squared position, rotation-log, and twist errors."""
    pred_coords = np.atleast_2d(np.asarray(pred_coords, dtype=float))
    target_coords = np.atleast_2d(np.asarray(target_coords, dtype=float))
    pred_twists = np.atleast_2d(np.asarray(pred_twists, dtype=float))
    target_twists = np.atleast_2d(np.asarray(target_twists, dtype=float))
    if pred_coords.shape != target_coords.shape or pred_twists.shape != target_twists.shape:
        raise ValueError("sequence length mismatch")
    total = 0.0
    for qp, qt, zp, zt in zip(pred_coords, target_coords, pred_twists, target_twists):
        dp = qp[:3] - qt[:3]
        rel = se3.coord_rotation(qp) @ se3.coord_rotation(qt).T
        w = se3.so3_log(se3.orthonormalize(rel))
        total += float(dp @ dp + w @ w + (zp - zt) @ (zp - zt))
    return total


def rollout(view, q0: np.ndarray, zeta0: np.ndarray, u: np.ndarray,
            times: np.ndarray, substeps: int = 1):
    """Integrate a model view along the given timestamps (numpy eval path).

    Returns (coords, twists) aligned with ``times``; raises RuntimeError on a
    non-finite state.
    """
    times = np.asarray(times, dtype=float)
    coords = np.empty((len(times), 12))
    twists = np.empty((len(times), 6))
    coords[0], twists[0] = q0, zeta0
    q, z = np.asarray(q0, dtype=float), np.asarray(zeta0, dtype=float)
    for k in range(len(times) - 1):
        h = (times[k + 1] - times[k]) / substeps
        try:
            for _ in range(substeps):
                q, z = rk4_step_velocity(q, z, u, h, view)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise RuntimeError("rollout diverged") from exc
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(z))):
            raise RuntimeError("rollout diverged")
        coords[k + 1], twists[k + 1] = q, z
    return coords, twists


# -- training loop -----------------------------------------------------------

def _batch_tensors(dataset: list[Trajectory]):
    times, coords, twists, inputs = stack_dataset(dataset)
    h = float(np.diff(times)[0])
    if np.max(np.abs(np.diff(times) - h)) > 1e-12:
        raise ValueError("training requires uniform sample spacing")
    return (
        h,
        len(times) - 1,
        torch.as_tensor(coords, dtype=torch.float64),
        torch.as_tensor(twists, dtype=torch.float64),
        torch.as_tensor(inputs, dtype=torch.float64),
    )


def batch_loss(model: HamiltonianModel, coords: torch.Tensor, twists: torch.Tensor,
               inputs: torch.Tensor, h: float, n_steps: int, substeps: int = 1) -> torch.Tensor:
    q_pred, z_pred = rollout_torch(model, coords[:, 0], twists[:, 0], inputs,
                                   n_steps, h, substeps)
    return tse3_loss_torch(q_pred, z_pred, coords, twists)


def loss_gradient(model: HamiltonianModel, dataset: list[Trajectory],
                  substeps: int = 1):
    """Loss and its exact gradient w.r.t. the flat parameter vector."""
    h, n_steps, coords, twists, inputs = _batch_tensors(dataset)
    model.zero_grad()
    loss = batch_loss(model, coords, twists, inputs, h, n_steps, substeps)
    loss.backward()
    grads = [
        (p.grad if p.grad is not None else torch.zeros_like(p)).reshape(-1)
        for p in model.parameters()
    ]
    return float(loss.detach()), torch.cat(grads).numpy().astype(float)


def train(dataset: list[Trajectory], cfg: TrainConfig, mass: float, gravity: float = 9.8,
          layout: str = "block", hidden: tuple[int, ...] = (64, 64),
          minv_scale: float | None = None):
    """Fit the dynamics model; returns (model, per-iteration loss history)."""
    if not dataset:
        raise ValueError("dataset is empty")
    if minv_scale is None:
        minv_scale = estimate_minv_scale(dataset)
    torch.manual_seed(cfg.seed)
    model = HamiltonianModel(mass=mass, gravity=gravity, layout=layout,
                             hidden=hidden, minv_scale=minv_scale,
                             input_scales=estimate_input_scales(dataset))
    h, n_steps, coords, twists, inputs = _batch_tensors(dataset)
    n = coords.shape[0]
    batch = min(cfg.batch_size or n, n)
    gen = torch.Generator().manual_seed(cfg.seed)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate, betas=(0.9, 0.999))
    history = np.empty(cfg.iterations)
    for it in range(cfg.iterations):
        if batch < n:
            idx = torch.randperm(n, generator=gen)[:batch]
            c, z, uu = coords[idx], twists[idx], inputs[idx]
        else:
            c, z, uu = coords, twists, inputs
        try:
            loss = batch_loss(model, c, z, uu, h, n_steps, cfg.substeps)
        except torch._C._LinAlgError as exc:  # singular mass matrix mid-blowup
            raise TrainingDiverged("training diverged") from exc
        if not torch.isfinite(loss):
            raise TrainingDiverged("training diverged")
        opt.zero_grad()
        loss.backward()
        opt.step()
        history[it] = float(loss.detach())
    return model, history
