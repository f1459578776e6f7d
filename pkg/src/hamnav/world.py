"""Obstacle environments, simulated LiDAR, occupancy mapping, and grid planning.

Obstacles are primitive shapes (spheres and axis-aligned boxes) so distance
queries and ray intersections have closed forms. The occupancy grid marks
cells containing sensed surface points and dilates them by a robot-radius
inflation margin; planning runs on the non-inflated cells.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np


@dataclass
class Sphere:
    center: np.ndarray
    radius: float

    def __post_init__(self) -> None:
        self.center = np.asarray(self.center, dtype=float)
        if self.radius <= 0.0:
            raise ValueError("sphere radius must be positive")

    def distance(self, p: np.ndarray) -> float:
        return max(0.0, float(np.linalg.norm(p - self.center) - self.radius))

    def raycast(self, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        oc = origin - self.center
        b = dirs @ oc
        disc = b**2 - (oc @ oc - self.radius**2)
        t = np.full(len(dirs), np.inf)
        ok = disc >= 0.0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        t_near = -b - sq
        t_far = -b + sq
        hit_near = ok & (t_near > 1e-12)
        hit_far = ok & ~hit_near & (t_far > 1e-12)  # origin inside the sphere
        t[hit_near] = t_near[hit_near]
        t[hit_far] = t_far[hit_far]
        return t


@dataclass
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self) -> None:
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        if not np.all(self.lo < self.hi):
            raise ValueError("box corners must satisfy lo < hi componentwise")

    def distance(self, p: np.ndarray) -> float:
        outside = np.maximum(np.maximum(self.lo - p, p - self.hi), 0.0)
        return float(np.linalg.norm(outside))

    def raycast(self, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / dirs
            t1 = (self.lo - origin) * inv
            t2 = (self.hi - origin) * inv
        t1 = np.where(np.isnan(t1), -np.inf, t1)
        t2 = np.where(np.isnan(t2), np.inf, t2)
        t_near = np.max(np.minimum(t1, t2), axis=1)
        t_far = np.min(np.maximum(t1, t2), axis=1)
        t = np.full(len(dirs), np.inf)
        hit = (t_near <= t_far) & (t_far > 1e-12)
        t[hit] = np.where(t_near[hit] > 1e-12, t_near[hit], t_far[hit])
        return t


class ObstacleSet:
    """Union of primitive obstacles with exact distance and raycast queries."""

    def __init__(self, primitives=()):
        self.primitives = list(primitives)

    def distance(self, p: np.ndarray) -> float:
        p = np.asarray(p, dtype=float)
        if not self.primitives:
            return np.inf
        return min(prim.distance(p) for prim in self.primitives)

    def truncated_distance(self, p: np.ndarray, beta: float) -> float:
        if beta <= 0.0:
            raise ValueError("sensing range must be positive")
        return min(self.distance(p), beta)

    def raycast(self, origin: np.ndarray, dirs: np.ndarray, max_range: float) -> np.ndarray:
        """Range per ray (inf past ``max_range`` or on a miss)."""
        origin = np.asarray(origin, dtype=float)
        dirs = np.asarray(dirs, dtype=float)
        t = np.full(len(dirs), np.inf)
        for prim in self.primitives:
            t = np.minimum(t, prim.raycast(origin, dirs))
        t[t > max_range] = np.inf
        return t


def save_world(path, obstacles: ObstacleSet) -> None:
    """Write the primitive list as one line per obstacle."""
    with open(path, "w") as fh:
        fh.write("# world file: one primitive per line\n")
        fh.write("# sphere cx cy cz r | box xmin ymin zmin xmax ymax zmax\n")
        for prim in obstacles.primitives:
            if isinstance(prim, Sphere):
                c = prim.center
                fh.write(f"sphere {c[0]:.17g} {c[1]:.17g} {c[2]:.17g} {prim.radius:.17g}\n")
            elif isinstance(prim, Box):
                lo, hi = prim.lo, prim.hi
                fh.write("box " + " ".join(f"{v:.17g}" for v in (*lo, *hi)) + "\n")
            else:
                raise ValueError(f"unknown primitive {type(prim).__name__}")


def load_world(path) -> ObstacleSet:
    prims = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            kind, *vals = line.split()
            vals = [float(v) for v in vals]
            if kind == "sphere" and len(vals) == 4:
                prims.append(Sphere(vals[:3], vals[3]))
            elif kind == "box" and len(vals) == 6:
                prims.append(Box(vals[:3], vals[3:]))
            else:
                raise ValueError(f"malformed world line: {line!r}")
    return ObstacleSet(prims)


def lidar_directions(n_rings: int = 16, n_azimuth: int = 90,
                     elevation_span_deg: float = 75.0) -> np.ndarray:
    """Body-frame unit directions: ``n_rings`` elevations x ``n_azimuth`` azimuths."""
    elev = np.deg2rad(np.linspace(-elevation_span_deg, elevation_span_deg, n_rings))
    azim = np.linspace(0.0, 2.0 * np.pi, n_azimuth, endpoint=False)
    E, A = np.meshgrid(elev, azim, indexing="ij")
    dirs = np.stack([
        np.cos(E) * np.cos(A),
        np.cos(E) * np.sin(A),
        np.sin(E),
    ], axis=-1)
    return dirs.reshape(-1, 3)


def lidar_scan(p: np.ndarray, R: np.ndarray, obstacles: ObstacleSet, beta: float,
               directions: np.ndarray) -> np.ndarray:
    """Surface points hit by body-fixed rays within range ``beta`` (world frame)."""
    world_dirs = directions @ np.asarray(R, dtype=float).T
    t = obstacles.raycast(np.asarray(p, dtype=float), world_dirs, beta)
    hit = np.isfinite(t)
    return np.asarray(p, dtype=float) + t[hit, None] * world_dirs[hit]


def cloud_distance(g: np.ndarray, points: np.ndarray, beta: float) -> float:
    """Distance from ``g`` to the nearest cloud point, clamped to the range."""
    if len(points) == 0:
        return beta
    d = float(np.min(np.linalg.norm(points - np.asarray(g, dtype=float), axis=1)))
    return min(d, beta)


class OccupancyGrid:
    """Dense 3D occupancy bitmap plus a robot-radius inflation mask."""

    def __init__(self, lo, hi, resolution: float = 0.25, inflation_radius: float = 0.3):
        if resolution <= 0.0:
            raise ValueError("resolution must be positive")
        self.lo = np.asarray(lo, dtype=float)
        self.resolution = float(resolution)
        self.inflation_radius = float(inflation_radius)
        span = np.asarray(hi, dtype=float) - self.lo
        self.shape = tuple(np.maximum(1, np.ceil(span / resolution).astype(int)))
        self.occupied = np.zeros(self.shape, dtype=bool)
        self.inflated = np.zeros(self.shape, dtype=bool)
        self.version = 0  # bumps when a new cell becomes occupied
        r_cells = int(np.floor(self.inflation_radius / self.resolution + 1e-9))
        offs = []
        rng = range(-r_cells - 1, r_cells + 2)
        for dx in rng:
            for dy in rng:
                for dz in rng:
                    if np.linalg.norm([dx, dy, dz]) * self.resolution <= self.inflation_radius + 1e-12:
                        offs.append((dx, dy, dz))
        self._inflate_offsets = np.array(offs, dtype=int)

    def world_to_cell(self, p) -> tuple[int, int, int] | None:
        idx = np.floor((np.asarray(p, dtype=float) - self.lo) / self.resolution).astype(int)
        if np.any(idx < 0) or np.any(idx >= self.shape):
            return None
        return tuple(idx)

    def cell_center(self, idx) -> np.ndarray:
        return self.lo + (np.asarray(idx, dtype=float) + 0.5) * self.resolution

    def update(self, points: np.ndarray) -> int:
        """Mark cells containing the points; returns the number of new cells."""
        if len(points) == 0:
            return 0
        idx = np.floor((np.asarray(points, dtype=float) - self.lo) / self.resolution).astype(int)
        inside = np.all((idx >= 0) & (idx < np.array(self.shape)), axis=1)
        idx = idx[inside]
        if len(idx) == 0:
            return 0
        fresh = ~self.occupied[idx[:, 0], idx[:, 1], idx[:, 2]]
        new_cells = np.unique(idx[fresh], axis=0)
        if len(new_cells) == 0:
            return 0
        self.occupied[new_cells[:, 0], new_cells[:, 1], new_cells[:, 2]] = True
        neigh = new_cells[:, None, :] + self._inflate_offsets[None, :, :]
        neigh = neigh.reshape(-1, 3)
        ok = np.all((neigh >= 0) & (neigh < np.array(self.shape)), axis=1)
        neigh = neigh[ok]
        self.inflated[neigh[:, 0], neigh[:, 1], neigh[:, 2]] = True
        self.version += 1
        return len(new_cells)

    def is_free(self, idx) -> bool:
        return not self.inflated[idx]

    def nearest_free_cell(self, p, max_cells: int = 3):
        """Free cell nearest to ``p`` within a small search cube, or None."""
        idx = self.world_to_cell(p)
        if idx is None:
            return None
        if self.is_free(idx):
            return idx
        best, best_d = None, np.inf
        for dx in range(-max_cells, max_cells + 1):
            for dy in range(-max_cells, max_cells + 1):
                for dz in range(-max_cells, max_cells + 1):
                    c = (idx[0] + dx, idx[1] + dy, idx[2] + dz)
                    if any(v < 0 for v in c) or any(v >= s for v, s in zip(c, self.shape)):
                        continue
                    if not self.inflated[c]:
                        d = np.linalg.norm(self.cell_center(c) - p)
                        if d < best_d:
                            best, best_d = c, d
        return best

    def dump(self, path) -> None:
        """Text voxel export: grid metadata plus occupied cell indices."""
        with open(path, "w") as fh:
            fh.write("# occupancy grid dump\n")
            fh.write("origin " + " ".join(f"{v:.17g}" for v in self.lo) + "\n")
            fh.write(f"resolution {self.resolution:.17g}\n")
            fh.write(f"inflation {self.inflation_radius:.17g}\n")
            fh.write("shape " + " ".join(str(s) for s in self.shape) + "\n")
            for i, j, k in np.argwhere(self.occupied):
                fh.write(f"{i} {j} {k}\n")


_NEIGHBOR_OFFSETS = np.array([
    (dx, dy, dz)
    for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in (-1, 0, 1)
    if (dx, dy, dz) != (0, 0, 0)
], dtype=int)
_NEIGHBOR_COSTS = np.linalg.norm(_NEIGHBOR_OFFSETS, axis=1)


def astar_plan(grid: OccupancyGrid, start, goal) -> np.ndarray:
    """Shortest 26-connected path between the cells containing start and goal.

    Euclidean edge costs with a straight-line heuristic (admissible and
    consistent, so the cost matches uniform-cost search). Returns the
    waypoints as cell centers; raises ValueError("no path") when the goal
    cannot be reached and ValueError for non-free endpoints.
    """
    s_idx = grid.world_to_cell(start)
    g_idx = grid.world_to_cell(goal)
    if s_idx is None or g_idx is None:
        raise ValueError("start or goal outside the grid")
    if not grid.is_free(s_idx):
        raise ValueError("start cell not free")
    if not grid.is_free(g_idx):
        raise ValueError("goal cell not free")
    if s_idx == g_idx:
        return grid.cell_center(s_idx)[None, :]

    # pad with a blocked border so flat-index neighbor arithmetic cannot wrap
    free = np.pad(~grid.inflated, 1, constant_values=False)
    shape = free.shape
    strides = np.array([shape[1] * shape[2], shape[2], 1], dtype=np.int64)
    flat_free = free.ravel()
    deltas = _NEIGHBOR_OFFSETS @ strides
    costs = _NEIGHBOR_COSTS * grid.resolution

    s_flat = int((np.array(s_idx) + 1) @ strides)
    g_flat = int((np.array(g_idx) + 1) @ strides)
    g_vec = np.array(g_idx, dtype=float)

    gscore = np.full(flat_free.shape, np.inf)
    parent = np.full(flat_free.shape, -1, dtype=np.int64)
    closed = np.zeros(flat_free.shape, dtype=bool)

    def heuristic(flat: int) -> float:
        c = np.array(np.unravel_index(flat, shape)) - 1
        return float(np.linalg.norm(c - g_vec)) * grid.resolution

    gscore[s_flat] = 0.0
    heap = [(heuristic(s_flat), 0, s_flat)]
    tie = 0
    while heap:
        f, _, cur = heapq.heappop(heap)
        if closed[cur]:
            continue
        if cur == g_flat:
            break
        closed[cur] = True
        base = gscore[cur]
        for d, c in zip(deltas, costs):
            nxt = cur + d
            if not flat_free[nxt] or closed[nxt]:
                continue
            cand = base + c
            if cand < gscore[nxt]:
                gscore[nxt] = cand
                parent[nxt] = cur
                tie += 1
                heapq.heappush(heap, (cand + heuristic(nxt), tie, nxt))
    else:
        raise ValueError("no path")

    cells = []
    cur = g_flat
    while cur != -1:
        cells.append(np.array(np.unravel_index(cur, shape)) - 1)
        cur = parent[cur]
    cells.reverse()
    return np.array([grid.cell_center(tuple(c)) for c in cells])


def plan_cost(grid: OccupancyGrid, start, goal) -> float:
    """Total Euclidean cost of the planned path (for oracle comparisons)."""
    wp = astar_plan(grid, start, goal)
    return float(np.sum(np.linalg.norm(np.diff(wp, axis=0), axis=1)))
