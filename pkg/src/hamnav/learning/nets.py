"""Small tanh MLPs with closed-form input Jacobians, in torch and numpy.

The dynamics right-hand side needs d(M^{-1})/d(coords) as part of its forward
pass, so the networks propagate their input Jacobian alongside the output with
plain tensor ops. Training then needs only a single backward pass, and the
numpy mirror reproduces the exact same arithmetic for the controller.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn


class MLP(nn.Module):
    """Fully-connected tanh network."""

    def __init__(self, n_in: int, hidden: tuple[int, ...], n_out: int):
        super().__init__()
        self.n_in = n_in
        self.n_out = n_out
        sizes = (n_in, *hidden, n_out)
        self.linears = nn.ModuleList(
            nn.Linear(sizes[i], sizes[i + 1], dtype=torch.float64) for i in range(len(sizes) - 1)
        )

    def zero_init_output(self, bias: np.ndarray | None = None) -> None:
        """Start from a constant output (zero weights, optional bias)."""
        last = self.linears[-1]
        with torch.no_grad():
            last.weight.zero_()
            if bias is not None:
                last.bias.copy_(torch.as_tensor(bias, dtype=torch.float64))
            else:
                last.bias.zero_()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = x
        for lin in self.linears[:-1]:
            h = torch.tanh(lin(h))
        return self.linears[-1](h)

    def forward_with_jacobian(self, x: torch.Tensor):
        """Returns (y, dy/dx) with shapes [B, n_out] and [B, n_out, n_in]."""
        h = x
        jac = None
        for lin in self.linears[:-1]:
            h = torch.tanh(lin(h))
            # chain rule: diag(1 - tanh^2) W applied to the running jacobian;
            # the first layer starts the chain from W itself
            gain = (1.0 - h * h).unsqueeze(-1)
            jac = gain * lin.weight if jac is None else gain * torch.matmul(lin.weight, jac)
        last = self.linears[-1]
        y = last(h)
        jac = torch.matmul(last.weight, jac) if jac is not None else \
            last.weight.unsqueeze(0).expand(x.shape[0], -1, -1)
        return y, jac


def mlp_params_numpy(mlp: MLP) -> list[tuple[np.ndarray, np.ndarray]]:
    """Extract (weight, bias) pairs as float64 numpy arrays."""
    return [
        (lin.weight.detach().cpu().numpy().astype(float), lin.bias.detach().cpu().numpy().astype(float))
        for lin in mlp.linears
    ]


def mlp_forward_np(params, x: np.ndarray) -> np.ndarray:
    h = x
    for W, b in params[:-1]:
        h = np.tanh(W @ h + b)
    W, b = params[-1]
    return W @ h + b


def mlp_forward_with_jacobian_np(params, x: np.ndarray):
    h = x
    jac = np.eye(len(x))
    for W, b in params[:-1]:
        h = np.tanh(W @ h + b)
        jac = (1.0 - h * h)[:, None] * (W @ jac)
    W, b = params[-1]
    return W @ h + b, W @ jac


_TRIL_IDX = {
    n: tuple(zip(*[(i, j) for i in range(n) for j in range(i + 1)]))
    for n in (3, 6)
}


def tril_size(n: int) -> int:
    return n * (n + 1) // 2


def spd_from_factor_torch(y: torch.Tensor, dy: torch.Tensor, n: int, scale: float,
                          eps: float = 1e-6):
    """Assemble M = L L^T + eps*I from a packed lower-triangular output.

    ``y`` holds the n(n+1)/2 factor entries (diagonal passed through softplus
    for positivity), ``dy`` their Jacobian w.r.t. the network input. ``scale``
    multiplies L*L^T, folded into L as sqrt(scale). Returns (M, dM/dinput).
    """
    B, n_in = y.shape[0], dy.shape[-1]
    rows, cols = _TRIL_IDX[n]
    diag_mask = torch.tensor([r == c for r, c in zip(rows, cols)], device=y.device)
    sp = torch.nn.functional.softplus(y)
    sig = torch.sigmoid(y)
    vals = torch.where(diag_mask, sp, y)
    dvals = torch.where(diag_mask.unsqueeze(-1), sig.unsqueeze(-1) * dy, dy)
    root = np.sqrt(scale)
    L = torch.zeros(B, n, n, dtype=y.dtype, device=y.device)
    L[:, rows, cols] = root * vals
    dL = torch.zeros(B, n, n, n_in, dtype=y.dtype, device=y.device)
    dL[:, rows, cols, :] = root * dvals
    M = L @ L.transpose(1, 2) + eps * torch.eye(n, dtype=y.dtype, device=y.device)
    dM = torch.einsum("bimk,bjm->bijk", dL, L) + torch.einsum("bim,bjmk->bijk", L, dL)
    return M, dM


def spd_from_factor_np(y: np.ndarray, dy: np.ndarray, n: int, scale: float,
                       eps: float = 1e-6):
    """Numpy mirror of :func:`spd_from_factor_torch` for a single sample."""
    rows, cols = _TRIL_IDX[n]
    n_in = dy.shape[-1]
    root = np.sqrt(scale)
    L = np.zeros((n, n))
    dL = np.zeros((n, n, n_in))
    for k, (r, c) in enumerate(zip(rows, cols)):
        if r == c:
            # matches torch.nn.functional.softplus incl. its linear tail
            sp = y[k] if y[k] > 20.0 else np.log1p(np.exp(y[k]))
            L[r, c] = root * sp
            dL[r, c] = root * (1.0 / (1.0 + np.exp(-y[k]))) * dy[k]
        else:
            L[r, c] = root * y[k]
            dL[r, c] = root * dy[k]
    M = L @ L.T + eps * np.eye(n)
    dM = np.einsum("imk,jm->ijk", dL, L) + np.einsum("im,jmk->ijk", L, dL)
    return M, dM
