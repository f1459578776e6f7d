"""Learnable Hamiltonian dynamics model and its controller-facing surface.

The trainable object holds two networks of the 9 rotation entries: one emits
the lower-triangular factor of the inverse mass matrix, the other the input
matrix. Position never enters the networks, which makes the learned dynamics
translation-equivariant by construction; the potential is the known gravity
term m*g*z (the mass is assumed measured). Two layouts are supported:

* ``block``: linear block of M^{-1} fixed at (1/m) I, the 3x3 inverse-inertia
  block learned — the fully-actuated aerial-robot setup used throughout.
* ``full``: the whole 6x6 M^{-1} learned as one SPD factor.

Trained weights are exported to a flat float64 vector with an architecture
descriptor and normalization constants; :class:`LearnedModelView` rebuilds the
exact same functions in numpy for the control stack.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .nets import (
    MLP,
    mlp_forward_with_jacobian_np,
    mlp_params_numpy,
    spd_from_factor_np,
    spd_from_factor_torch,
    tril_size,
)

MODEL_FORMAT_VERSION = 1
MINV_EPS = 1e-6


class HamiltonianModel(nn.Module):
    """Networks (M^{-1}, B) over the rotation entries plus known gravity potential."""

    def __init__(self, mass: float, gravity: float = 9.8, layout: str = "block",
                 hidden: tuple[int, ...] = (64, 64), minv_scale: float = 1.0,
                 input_scales: np.ndarray | None = None):
        super().__init__()
        if layout not in ("block", "full"):
            raise ValueError("layout must be 'block' or 'full'")
        self.mass = float(mass)
        self.gravity = float(gravity)
        self.layout = layout
        self.hidden = tuple(hidden)
        self.minv_scale = float(minv_scale)
        # similarity scaling D B_raw D^{-1} with D = diag(input channel RMS):
        # equalizes the loss sensitivity of the raw entries and leaves I at I
        scales = np.ones(6) if input_scales is None else np.asarray(input_scales, dtype=float)
        self.input_scales = scales
        self.register_buffer(
            "_b_scale", torch.as_tensor(np.outer(scales, 1.0 / scales), dtype=torch.float64))
        self._spd_n = 3 if layout == "block" else 6
        self.minv_net = MLP(9, self.hidden, tril_size(self._spd_n))
        self.b_net = MLP(9, self.hidden, 36)
        # start from M^{-1} = minv_scale * I and B = I: benign dynamics, and
        # the remaining fit is an O(1) correction of the factor entries
        bias = np.zeros(tril_size(self._spd_n))
        diag_slots = np.cumsum(np.arange(1, self._spd_n + 1)) - 1
        bias[diag_slots] = np.log(np.e - 1.0)  # softplus^{-1}(1)
        self.minv_net.zero_init_output(bias)
        self.b_net.zero_init_output(np.eye(6).reshape(36))

    # -- batched forward pieces (torch) --------------------------------------

    def minv_with_jac(self, r: torch.Tensor):
        """Inverse mass matrix and its Jacobian w.r.t. the 9 rotation entries."""
        y, dy = self.minv_net.forward_with_jacobian(r)
        Mb, dMb = spd_from_factor_torch(y, dy, self._spd_n, self.minv_scale, MINV_EPS)
        if self.layout == "full":
            return Mb, dMb
        B = r.shape[0]
        Minv = torch.zeros(B, 6, 6, dtype=r.dtype, device=r.device)
        Minv[:, 0, 0] = Minv[:, 1, 1] = Minv[:, 2, 2] = 1.0 / self.mass
        Minv[:, 3:, 3:] = Mb
        dMinv = torch.zeros(B, 6, 6, 9, dtype=r.dtype, device=r.device)
        dMinv[:, 3:, 3:, :] = dMb
        return Minv, dMinv

    def b_matrix(self, r: torch.Tensor) -> torch.Tensor:
        return self._b_scale * self.b_net(r).view(-1, 6, 6)

    # -- persistence ----------------------------------------------------------

    def flat_parameters(self) -> np.ndarray:
        return nn.utils.parameters_to_vector(self.parameters()).detach().cpu().numpy().astype(float)

    def load_flat_parameters(self, theta: np.ndarray) -> None:
        nn.utils.vector_to_parameters(
            torch.as_tensor(theta, dtype=torch.float64), self.parameters())

    def architecture(self) -> dict:
        return {
            "layout": self.layout,
            "hidden": list(self.hidden),
            "mass": self.mass,
            "gravity": self.gravity,
            "minv_scale": self.minv_scale,
            "input_scales": [float(v) for v in self.input_scales],
        }


def save_model(path, model: HamiltonianModel) -> None:
    """Versioned model file: architecture descriptor + flat parameter vector."""
    np.savez(
        path,
        version=np.array([MODEL_FORMAT_VERSION]),
        architecture=np.frombuffer(json.dumps(model.architecture()).encode(), dtype=np.uint8),
        theta=model.flat_parameters(),
    )


def load_model(path) -> HamiltonianModel:
    with np.load(path) as data:
        version = int(data["version"][0])
        if version != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model file version {version}")
        arch = json.loads(bytes(data["architecture"]).decode())
        theta = data["theta"]
    model = HamiltonianModel(
        mass=arch["mass"], gravity=arch["gravity"], layout=arch["layout"],
        hidden=tuple(arch["hidden"]), minv_scale=arch["minv_scale"],
        input_scales=np.array(arch["input_scales"]))
    model.load_flat_parameters(theta)
    return model


@dataclass
class ModelEval:
    """All model outputs the controller consumes at one configuration."""

    minv: np.ndarray
    b: np.ndarray
    potential: float
    du_dq: np.ndarray
    dminv_dq: np.ndarray


def model_eval(view, q: np.ndarray) -> ModelEval:
    return ModelEval(
        minv=view.minv(q), b=view.b(q), potential=view.potential(q),
        du_dq=view.du_dq(q), dminv_dq=view.dminv_dq(q))


class LearnedModelView:
    """Numpy mirror of a trained model implementing the model-view interface.

    Reproduces the torch forward pass (including Jacobians) with the same
    arithmetic so the control stack needs no torch at runtime.
    """

    def __init__(self, model: HamiltonianModel):
        self.mass = model.mass
        self.gravity = model.gravity
        self.layout = model.layout
        self.minv_scale = model.minv_scale
        self._spd_n = model._spd_n
        self._minv_params = mlp_params_numpy(model.minv_net)
        self._b_params = mlp_params_numpy(model.b_net)
        self._b_scale = np.outer(model.input_scales, 1.0 / model.input_scales)
        self._dudq = np.zeros(12)
        self._dudq[2] = self.mass * self.gravity

    def _minv_blocks(self, r: np.ndarray):
        y, dy = mlp_forward_with_jacobian_np(self._minv_params, r)
        return spd_from_factor_np(y, dy, self._spd_n, self.minv_scale, MINV_EPS)

    def minv(self, q: np.ndarray) -> np.ndarray:
        Mb, _ = self._minv_blocks(np.asarray(q, dtype=float)[3:12])
        if self.layout == "full":
            return Mb
        out = np.zeros((6, 6))
        out[:3, :3] = np.eye(3) / self.mass
        out[3:, 3:] = Mb
        return out

    def dminv_dq(self, q: np.ndarray) -> np.ndarray:
        _, dMb = self._minv_blocks(np.asarray(q, dtype=float)[3:12])
        out = np.zeros((6, 6, 12))
        if self.layout == "full":
            out[:, :, 3:] = dMb
        else:
            out[3:, 3:, 3:] = dMb
        return out

    def b(self, q: np.ndarray) -> np.ndarray:
        from .nets import mlp_forward_np

        raw = mlp_forward_np(self._b_params, np.asarray(q, dtype=float)[3:12]).reshape(6, 6)
        return self._b_scale * raw

    def potential(self, q: np.ndarray) -> float:
        return self.mass * self.gravity * float(q[2])

    def du_dq(self, q: np.ndarray) -> np.ndarray:
        return self._dudq
