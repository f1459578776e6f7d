"""SO(3)/SE(3) primitives shared by the dynamics, learning, and control code.

Conventions used across the package:

* Rotations are 3x3 matrices mapping body-frame vectors to world frame.
* A generalized coordinate vector ``q`` has 12 entries: position followed by
  the three rows of the rotation matrix, so ``q[3:].reshape(3, 3)`` is R.
* Twists stack body-frame linear and angular velocity ``[v, omega]``;
  generalized momenta stack the conjugate linear/angular momenta.

All functions are pure and operate on float64 numpy arrays.
"""

from __future__ import annotations

import numpy as np

SKEW_TOL = 1e-8


def hat(w: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrix of ``w``, satisfying hat(w) @ u = cross(w, u)."""
    w = np.asarray(w, dtype=float)
    return np.array([
        [0.0, -w[2], w[1]],
        [w[2], 0.0, -w[0]],
        [-w[1], w[0], 0.0],
    ])


def vee(S: np.ndarray) -> np.ndarray:
    """Inverse of :func:`hat`. Raises ValueError if ``S`` is not skew-symmetric."""
    S = np.asarray(S, dtype=float)
    if np.linalg.norm(S + S.T) > SKEW_TOL:
        raise ValueError("not skew-symmetric")
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


def so3_exp(w: np.ndarray) -> np.ndarray:
    """Rotation matrix for the rotation vector ``w`` (Rodrigues formula)."""
    w = np.asarray(w, dtype=float)
    angle = np.linalg.norm(w)
    W = hat(w)
    if angle < 1e-8:
        # second-order series; exact enough below the branch point
        return np.eye(3) + W + 0.5 * (W @ W)
    A = np.sin(angle) / angle
    B = (1.0 - np.cos(angle)) / angle**2
    return np.eye(3) + A * W + B * (W @ W)


def so3_log(R: np.ndarray) -> np.ndarray:
    """Rotation vector of ``R`` with norm <= pi.

    The angle ~0 neighborhood uses a series, the angle ~pi neighborhood
    extracts the axis from the dominant column of R + I; both avoid the
    ill-conditioning of the generic sin-based formula.
    """
    R = np.asarray(R, dtype=float)
    cos_angle = np.clip(0.5 * (np.trace(R) - 1.0), -1.0, 1.0)
    # antisymmetric part always encodes axis*sin(angle)
    s_vec = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    sin_angle = min(np.linalg.norm(s_vec), 1.0)

    if cos_angle > 1.0 - 1e-8:
        # angle ~ 0: w = s_vec * (1 + angle^2/6 + ...), truncation below 1e-16
        return s_vec
    if cos_angle < -1.0 + 1e-6:
        # angle ~ pi: acos is ill-conditioned, recover angle from sin instead;
        # the symmetric part of R + I is ~ 2 axis axis^T, free of skew noise
        angle = np.pi - np.arcsin(sin_angle)
        B = 0.5 * (R + R.T) + np.eye(3)
        j = int(np.argmax(np.diag(B)))
        axis = B[:, j] / np.linalg.norm(B[:, j])
        if sin_angle > 1e-12 and np.dot(axis, s_vec) < 0.0:
            axis = -axis
        return angle * axis
    angle = np.arccos(cos_angle)
    return (angle / np.sin(angle)) * s_vec


def orthonormalize(M: np.ndarray) -> np.ndarray:
    """Closest rotation to ``M`` in Frobenius norm (polar projection)."""
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)) or np.linalg.det(M) <= 0.0:
        raise ValueError("orientation degenerate")
    U, _, Vt = np.linalg.svd(M)
    R = U @ Vt
    if np.linalg.det(R) < 0.0:  # unreachable for det(M) > 0, kept as a guard
        U[:, -1] = -U[:, -1]
        R = U @ Vt
    return R


def pack_coord(p: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Stack position and rotation rows into a 12-entry coordinate vector."""
    q = np.empty(12)
    q[:3] = np.asarray(p, dtype=float)
    q[3:] = np.asarray(R, dtype=float).reshape(9)
    return q


def coord_position(q: np.ndarray) -> np.ndarray:
    return np.asarray(q, dtype=float)[:3]


def coord_rotation(q: np.ndarray) -> np.ndarray:
    """Rotation block of a coordinate vector (also accepts a full state)."""
    return np.asarray(q, dtype=float)[3:12].reshape(3, 3)


def coord_cross(q: np.ndarray) -> np.ndarray:
    """12x6 matrix mapping a body twist to coordinate rates.

    The position block is R (pdot = R v) and each rotation-row block is
    hat(r_i) (ri_dot = r_i x omega).
    """
    q = np.asarray(q, dtype=float)
    R = coord_rotation(q)
    out = np.zeros((12, 6))
    out[:3, :3] = R
    for i in range(3):
        out[3 + 3 * i:6 + 3 * i, 3:] = hat(q[3 + 3 * i:6 + 3 * i])
    return out


def momentum_cross(pm: np.ndarray) -> np.ndarray:
    """6x6 block matrix [[0, hat(pv)], [hat(pv), hat(pw)]] of a momentum."""
    pm = np.asarray(pm, dtype=float)
    out = np.zeros((6, 6))
    pv = hat(pm[:3])
    out[:3, 3:] = pv
    out[3:, :3] = pv
    out[3:, 3:] = hat(pm[3:])
    return out


def rotation_defect(R: np.ndarray) -> float:
    """Max of the orthogonality and determinant residuals of ``R``."""
    R = np.asarray(R, dtype=float)
    return max(
        float(np.abs(R @ R.T - np.eye(3)).max()),
        float(abs(np.linalg.det(R) - 1.0)),
    )


def random_rotation(rng: np.random.Generator, max_angle: float = np.pi - 0.1) -> np.ndarray:
    """Random rotation with angle uniform on [0, max_angle], axis uniform."""
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return so3_exp(rng.uniform(0.0, max_angle) * axis)
