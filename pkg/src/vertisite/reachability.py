"""Range-limited reachability over the constraint grid using Jump Point Search.

Movement is 8-connected with octile costs (1 per orthogonal step, sqrt(2) per
diagonal step, times the cell size). A diagonal step is only allowed when both
orthogonal cells it passes between are free, so no corner is ever cut.

Straight jumps are answered from per-direction tables computed once per grid
(distance to the next jump point and to the next wall), which keeps the search
fast on metropolitan-size grids without leaving Python.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .grid import ConstraintStack, GridError, GridSpec

SQRT2 = math.sqrt(2.0)
DEFAULT_RANGE_KM = 30.0
_EPS = 1e-9

Cell = tuple[int, int]

_STRAIGHT = ((0, 1), (0, -1), (1, 0), (-1, 0))
_DIAGONAL = ((1, 1), (1, -1), (-1, 1), (-1, -1))


class PathStatus(str, Enum):
    REACHED = "REACHED"
    UNREACHABLE = "UNREACHABLE"
    OUT_OF_RANGE = "OUT_OF_RANGE"


@dataclass(frozen=True)
class PathResult:
    status: PathStatus
    length_m: Optional[float] = None
    path: Optional[tuple[Cell, ...]] = None
    waypoints: Optional[tuple[Cell, ...]] = None


def octile(a: Cell, b: Cell) -> float:
    """Obstacle-free 8-connected distance in cells."""
    dr, dc = abs(a[0] - b[0]), abs(a[1] - b[1])
    return (SQRT2 - 1.0) * min(dr, dc) + max(dr, dc)


def _east_tables(free: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Jump tables for eastward moves (increasing column).

    ``jp[r, c]`` is the number of steps to the first jump point east of
    ``(r, c)`` (0 if a wall comes first); ``wall[r, c]`` is the number of free
    cells that can be stepped through before hitting a wall or the edge.
    """
    n_rows, n_cols = free.shape
    up = np.zeros_like(free)
    up[:-1, :] = free[1:, :]
    down = np.zeros_like(free)
    down[1:, :] = free[:-1, :]
    up_back = np.zeros_like(free)
    up_back[:-1, 1:] = free[1:, :-1]
    down_back = np.zeros_like(free)
    down_back[1:, 1:] = free[:-1, :-1]
    forced = free & ((up & ~up_back) | (down & ~down_back))

    jp = np.zeros((n_rows, n_cols), dtype=np.int32)
    wall = np.zeros((n_rows, n_cols), dtype=np.int32)
    for c in range(n_cols - 2, -1, -1):
        nf = free[:, c + 1]
        wall[:, c] = np.where(nf, wall[:, c + 1] + 1, 0)
        nxt = jp[:, c + 1]
        jp[:, c] = np.where(nf & forced[:, c + 1], 1, np.where(nf & (nxt > 0), nxt + 1, 0))
    return jp, wall


def _flat(a: np.ndarray) -> memoryview:
    return np.ascontiguousarray(a).ravel().data


class NavGrid:
    """Immutable blocked/free mask plus the lookup tables the search needs."""

    def __init__(self, spec: GridSpec, blocked: np.ndarray):
        blocked = np.array(blocked, dtype=bool, copy=True)
        if blocked.shape != spec.shape:
            raise GridError(f"blocked mask shape {blocked.shape} does not match grid {spec.shape}")
        blocked.setflags(write=False)
        self.spec = spec
        self.blocked = blocked
        self.n_rows, self.n_cols = blocked.shape
        free = ~blocked
        self._free = _flat(free.astype(np.uint8))
        self._jp = {}
        self._wall = {}
        transforms = {
            (0, 1): (lambda a: a, lambda t: t),
            (0, -1): (lambda a: a[:, ::-1], lambda t: t[:, ::-1]),
            (1, 0): (lambda a: a.T, lambda t: t.T),
            (-1, 0): (lambda a: a[::-1, :].T, lambda t: t.T[::-1, :]),
        }
        for d, (fwd, back) in transforms.items():
            jp, wall = _east_tables(np.ascontiguousarray(fwd(free)))
            self._jp[d] = _flat(back(jp))
            self._wall[d] = _flat(back(wall))
        self._labels = None

    @classmethod
    def from_constraints(cls, stack: ConstraintStack) -> "NavGrid":
        return cls(stack.spec, stack.sum > 0)

    def is_free(self, r: int, c: int) -> bool:
        return 0 <= r < self.n_rows and 0 <= c < self.n_cols and bool(self._free[r * self.n_cols + c])

    def component(self, cell: Cell) -> int:
        """Connected-component label; without corner cutting, 4-connectivity is exact."""
        if self._labels is None:
            self._labels, _ = ndimage.label(~self.blocked)
        return int(self._labels[cell])


def _check_endpoint(grid: NavGrid, cell: Cell, which: str):
    r, c = cell
    if not (0 <= r < grid.n_rows and 0 <= c < grid.n_cols):
        raise GridError(f"{which} cell {cell} is outside the {grid.n_rows}x{grid.n_cols} grid")
    if grid.blocked[r, c]:
        raise GridError(f"{which} cell {cell} is blocked")


class _Search:
    def __init__(self, grid: NavGrid, goal: Cell, budget: float):
        self.g = grid
        self.goal = goal
        self.budget = budget + _EPS

    def h(self, r, c):
        return octile((r, c), self.goal)

    def straight(self, r, c, dr, dc) -> int:
        """Steps to the goal or next jump point along a straight ray, 0 if none."""
        idx = r * self.g.n_cols + c
        d = self.g._jp[(dr, dc)][idx]
        w = self.g._wall[(dr, dc)][idx]
        gr, gc = self.goal
        k = 0
        if dr == 0 and gr == r:
            k = (gc - c) * dc
        elif dc == 0 and gc == c:
            k = (gr - r) * dr
        if 0 < k <= w and (d == 0 or k <= d):
            return k
        return d

    def diagonal(self, r, c, dr, dc, g):
        free, n_rows, n_cols = self.g._free, self.g.n_rows, self.g.n_cols
        goal = self.goal
        while True:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < n_rows and 0 <= nc < n_cols):
                return None
            if not (free[nr * n_cols + nc] and free[nr * n_cols + c] and free[r * n_cols + nc]):
                return None
            r, c = nr, nc
            g += SQRT2
            if g + self.h(r, c) > self.budget:
                return None
            if (r, c) == goal:
                return r, c, g
            for sr, sc in ((0, dc), (dr, 0)):
                k = self.straight(r, c, sr, sc)
                if k and g + k + self.h(r + sr * k, c + sc * k) <= self.budget:
                    return r, c, g

    def successors(self, r, c, direction):
        if direction is None:
            return _STRAIGHT + _DIAGONAL
        dr, dc = direction
        if dr and dc:
            return ((dr, dc), (dr, 0), (0, dc))
        is_free = self.g.is_free
        out = [direction]
        if dr == 0:
            for s in (1, -1):
                if is_free(r + s, c) and not is_free(r + s, c - dc):
                    out += [(s, 0), (s, dc)]
        else:
            for s in (1, -1):
                if is_free(r, c + s) and not is_free(r - dr, c + s):
                    out += [(0, s), (dr, s)]
        return out

    def run(self, start: Cell):
        n_cols = self.g.n_cols
        goal_idx = self.goal[0] * n_cols + self.goal[1]
        s_idx = start[0] * n_cols + start[1]
        best = {s_idx: 0.0}
        parent = {s_idx: None}
        heading = {s_idx: None}
        closed = set()
        heap = [(self.h(*start), s_idx, 0.0)]
        while heap:
            _, idx, g = heapq.heappop(heap)
            if idx in closed or g > best[idx] + _EPS:
                continue
            if idx == goal_idx:
                chain = []
                while idx is not None:
                    chain.append(divmod(idx, n_cols))
                    idx = parent[idx]
                return g, chain[::-1]
            closed.add(idx)
            r, c = divmod(idx, n_cols)
            for dr, dc in self.successors(r, c, heading[idx]):
                if dr and dc:
                    hit = self.diagonal(r, c, dr, dc, g)
                    if hit is None:
                        continue
                    nr, nc, ng = hit
                else:
                    k = self.straight(r, c, dr, dc)
                    if not k:
                        continue
                    nr, nc, ng = r + dr * k, c + dc * k, g + k
                nf = ng + self.h(nr, nc)
                if nf > self.budget:
                    continue
                nidx = nr * n_cols + nc
                if nidx in closed or ng >= best.get(nidx, math.inf) - _EPS:
                    continue
                best[nidx] = ng
                parent[nidx] = idx
                heading[nidx] = ((nr > r) - (nr < r), (nc > c) - (nc < c))
                heapq.heappush(heap, (nf, nidx, ng))
        return None


def expand_waypoints(waypoints: Sequence[Cell]) -> tuple[Cell, ...]:
    """Fill in every cell between consecutive collinear waypoints."""
    if not waypoints:
        return ()
    cells = [tuple(waypoints[0])]
    for (r0, c0), (r1, c1) in zip(waypoints, waypoints[1:]):
        dr, dc = (r1 > r0) - (r1 < r0), (c1 > c0) - (c1 < c0)
        r, c = r0, c0
        while (r, c) != (r1, c1):
            r, c = r + dr, c + dc
            cells.append((r, c))
    return tuple(cells)


def jps_shortest_path(grid: NavGrid, start: Cell, goal: Cell,
                      max_length_m: Optional[float] = None) -> PathResult:
    """Optimal octile path between two free cells.

    With ``max_length_m`` the search is pruned at that length and a miss is
    reported as OUT_OF_RANGE (the exact length is then not computed).
    """
    start, goal = (int(start[0]), int(start[1])), (int(goal[0]), int(goal[1]))
    _check_endpoint(grid, start, "start")
    _check_endpoint(grid, goal, "goal")
    cell = grid.spec.cell_size
    budget = math.inf if max_length_m is None else max_length_m / cell
    if start == goal:
        return PathResult(PathStatus.REACHED, 0.0, (start,), (start,))
    found = _Search(grid, goal, budget).run(start)
    if found is None:
        status = PathStatus.UNREACHABLE if max_length_m is None else PathStatus.OUT_OF_RANGE
        return PathResult(status)
    cost, waypoints = found
    return PathResult(PathStatus.REACHED, cost * cell, expand_waypoints(waypoints), tuple(waypoints))


@dataclass
class CoverageSet:
    """Per-candidate reachable destinations (the coverage set of each site)."""

    range_m: float
    reached: dict[str, dict[str, float]] = field(default_factory=dict)
    results: dict[tuple[str, str], PathResult] = field(default_factory=dict)

    def destinations(self, candidate_id: str) -> list[str]:
        return list(self.reached.get(candidate_id, {}))


def compute_coverage(grid: NavGrid, candidates: Sequence, destinations: Sequence,
                     range_km: float = DEFAULT_RANGE_KM) -> CoverageSet:
    """A destination is covered when its constrained path length is at most the range."""
    if not range_km > 0:
        raise ValueError(f"range_km must be positive, got {range_km}")
    range_m = range_km * 1000.0
    cell = grid.spec.cell_size
    budget_cells = range_m / cell
    dest_cells = {}
    for d in destinations:
        dest_cells[d.id] = grid.spec.cell_of(*d.position)
        _check_endpoint(grid, dest_cells[d.id], f"destination {d.id!r}")
    out = CoverageSet(range_m)
    for cand in sorted(candidates, key=lambda c: c.id):
        start = grid.spec.cell_of(*cand.position)
        _check_endpoint(grid, start, f"candidate {cand.id!r}")
        reached = {}
        for dest_id in sorted(dest_cells):
            goal = dest_cells[dest_id]
            if grid.component(start) != grid.component(goal):
                res = PathResult(PathStatus.UNREACHABLE)
            elif octile(start, goal) > budget_cells + _EPS:
                res = PathResult(PathStatus.OUT_OF_RANGE)
            else:
                res = jps_shortest_path(grid, start, goal, max_length_m=range_m)
            if res.status is PathStatus.REACHED and res.length_m > range_m * (1 + 1e-12):
                res = PathResult(PathStatus.OUT_OF_RANGE, res.length_m, res.path, res.waypoints)
            out.results[(cand.id, dest_id)] = res
            if res.status is PathStatus.REACHED:
                reached[dest_id] = res.length_m
        out.reached[cand.id] = reached
    return out
