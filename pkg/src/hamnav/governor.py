"""Reference governor: safe-set throttled progress along a piecewise-linear path.

The governor is a first-order virtual point ``g`` chasing a projected goal
``gbar`` — the furthest path point inside a ball around ``g`` whose radius is
set by the current safety margin. Lifting (g, gbar) yields the full reference
state for the pose controller: position g, heading aligned with the motion
direction, zero desired momentum.
"""

from __future__ import annotations

import numpy as np

from .se3 import pack_coord


class Path:
    """Arc-length parameterized polyline r(sigma), sigma in [0, 1]."""

    def __init__(self, waypoints):
        wp = np.atleast_2d(np.asarray(waypoints, dtype=float))
        if wp.shape[1] != 3 or len(wp) == 0:
            raise ValueError("waypoints must be an (n, 3) array")
        self.waypoints = wp
        seg = np.diff(wp, axis=0)
        self._seg_len = np.linalg.norm(seg, axis=1) if len(wp) > 1 else np.zeros(0)
        self._cum = np.concatenate([[0.0], np.cumsum(self._seg_len)])
        self.length = float(self._cum[-1])

    @property
    def start(self) -> np.ndarray:
        return self.waypoints[0]

    @property
    def end(self) -> np.ndarray:
        return self.waypoints[-1]

    def point_at(self, sigma: float) -> np.ndarray:
        sigma = float(np.clip(sigma, 0.0, 1.0))
        if self.length == 0.0:
            return self.waypoints[0].copy()
        s = sigma * self.length
        i = int(np.searchsorted(self._cum, s, side="right") - 1)
        i = min(i, len(self._seg_len) - 1)
        t = (s - self._cum[i]) / self._seg_len[i] if self._seg_len[i] > 0 else 0.0
        return self.waypoints[i] + t * (self.waypoints[i + 1] - self.waypoints[i])

    def nearest_parameter(self, g) -> float:
        """Parameter of the polyline point closest to ``g``."""
        g = np.asarray(g, dtype=float)
        if self.length == 0.0:
            return 1.0
        best_d, best_s = np.inf, 0.0
        for i in range(len(self._seg_len)):
            a = self.waypoints[i]
            d = self.waypoints[i + 1] - a
            L2 = self._seg_len[i] ** 2
            t = 0.0 if L2 == 0 else float(np.clip((g - a) @ d / L2, 0.0, 1.0))
            dist = np.linalg.norm(a + t * d - g)
            if dist < best_d:
                best_d = dist
                best_s = (self._cum[i] + t * self._seg_len[i]) / self.length
        return best_s

    def furthest_in_ball(self, g, radius: float, sigma_min: float = 0.0):
        """Largest sigma >= sigma_min with ||r(sigma) - g|| <= radius, or None.

        Exact per-segment sphere intersection (the path is piecewise linear),
        scanning from the last segment down.
        """
        g = np.asarray(g, dtype=float)
        if radius < 0.0:
            return None
        if self.length == 0.0:
            if np.linalg.norm(self.waypoints[0] - g) <= radius:
                return 1.0, self.waypoints[0].copy()
            return None
        # the path end is always the max-sigma candidate; handling it up front
        # avoids roundoff at the sigma_min = 1 boundary
        if np.linalg.norm(self.waypoints[-1] - g) <= radius:
            return 1.0, self.waypoints[-1].copy()
        s_min = float(np.clip(sigma_min, 0.0, 1.0)) * self.length
        for i in range(len(self._seg_len) - 1, -1, -1):
            if self._cum[i + 1] < s_min:
                break
            a = self.waypoints[i]
            d = self.waypoints[i + 1] - a
            L = self._seg_len[i]
            t_lo = 0.0
            if self._cum[i] < s_min and L > 0:
                t_lo = min((s_min - self._cum[i]) / L, 1.0)
            if L == 0.0:
                if np.linalg.norm(a - g) <= radius:
                    sigma = self._cum[i + 1] / self.length
                    return sigma, a.copy()
                continue
            am = a - g
            b = am @ d
            c = am @ am - radius**2
            disc = b * b - (L * L) * c
            if disc < 0.0:
                continue
            sq = np.sqrt(disc)
            t_in = (-b - sq) / (L * L)
            t_out = (-b + sq) / (L * L)
            if t_out < t_lo or t_in > 1.0:
                continue
            t = min(t_out, 1.0)
            if t < t_lo:
                continue
            sigma = (self._cum[i] + t * L) / self.length
            return min(sigma, 1.0), a + t * d
        return None


def governor_step(g: np.ndarray, u_g: np.ndarray, k_g: float, dt: float) -> np.ndarray:
    """Exact update of gdot = -k_g (g - u_g) over one step."""
    if dt <= 0.0 or k_g <= 0.0:
        raise ValueError("dt and k_g must be positive")
    g = np.asarray(g, dtype=float)
    u_g = np.asarray(u_g, dtype=float)
    return u_g + (g - u_g) * np.exp(-k_g * dt)


def local_safe_radius(delta_e: float, eps: float) -> float:
    """Radius of the ball around g certified by the margin ``delta_e``."""
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    return float(np.sqrt(max(0.0, delta_e) / (1.0 + eps)))


def local_projected_goal(path: Path, g: np.ndarray, delta_e: float, eps: float,
                         sigma_min: float = 0.0):
    """Furthest path point inside the local safe ball.

    Returns (gbar, sigma, advanced). When no path point (at sigma >= sigma_min)
    lies in the ball, gbar falls back to g itself, sigma to the parameter of
    the path point nearest g, and advanced is False.
    """
    g = np.asarray(g, dtype=float)
    radius = local_safe_radius(delta_e, eps)
    hit = path.furthest_in_ball(g, radius, sigma_min)
    if hit is None:
        return g.copy(), path.nearest_parameter(g), False
    sigma, point = hit
    return point, sigma, True


def lift(g: np.ndarray, gbar: np.ndarray, backup_rotation: np.ndarray | None = None) -> np.ndarray:
    """Reference state for (g, gbar): position g, heading along gbar - g, zero momentum.

    The desired rotation has its first column along the motion direction and
    stays level; it degenerates to the identity for vertical motion and to the
    most recent backup (or identity) when gbar coincides with g.
    """
    g = np.asarray(g, dtype=float)
    gbar = np.asarray(gbar, dtype=float)
    n = gbar - g
    dist = np.linalg.norm(n)
    if dist < 1e-9:
        R = np.eye(3) if backup_rotation is None else np.asarray(backup_rotation, dtype=float)
    else:
        c1 = n / dist
        e3c1 = np.cross([0.0, 0.0, 1.0], c1)
        s = np.linalg.norm(e3c1)
        if s < 1e-12:
            R = np.eye(3)
        else:
            c2 = e3c1 / s
            c3 = np.cross(c1, c2)
            c3 /= np.linalg.norm(c3)
            R = np.column_stack([c1, c2, c3])
    x_ref = np.zeros(18)
    x_ref[:12] = pack_coord(g, R)
    return x_ref
