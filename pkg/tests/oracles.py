"""Independent reference implementations used only by the tests."""

import heapq
import math

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra as sp_dijkstra

SQRT2 = math.sqrt(2.0)


def _moves(blocked, r, c):
    n_rows, n_cols = blocked.shape

    def free(a, b):
        return 0 <= a < n_rows and 0 <= b < n_cols and not blocked[a, b]

    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if (dr, dc) == (0, 0) or not free(r + dr, c + dc):
                continue
            if dr and dc:
                if not (free(r + dr, c) and free(r, c + dc)):
                    continue
                yield r + dr, c + dc, SQRT2
            else:
                yield r + dr, c + dc, 1.0


def dijkstra_from(blocked, start):
    """Plain heap Dijkstra on the 8-connected, no-corner-cutting move set."""
    dist = {start: 0.0}
    heap = [(0.0, start)]
    done = set()
    while heap:
        d, cell = heapq.heappop(heap)
        if cell in done:
            continue
        done.add(cell)
        for r, c, w in _moves(blocked, *cell):
            nd = d + w
            if nd < dist.get((r, c), math.inf):
                dist[(r, c)] = nd
                heapq.heappush(heap, (nd, (r, c)))
    return dist


def grid_graph(blocked):
    """Sparse adjacency of the same move set, built with numpy."""
    n_rows, n_cols = blocked.shape
    free = ~blocked
    ids = np.arange(blocked.size).reshape(blocked.shape)
    rows, cols, wts = [], [], []
    for dr, dc in ((0, 1), (1, 0), (1, 1), (1, -1)):
        r0 = slice(max(0, -dr), n_rows - max(0, dr))
        r1 = slice(max(0, dr), n_rows - max(0, -dr) if dr < 0 else n_rows)
        c0 = slice(max(0, -dc), n_cols - max(0, dc))
        c1 = slice(max(0, dc), n_cols + min(0, dc))
        ok = free[r0, c0] & free[r1, c1]
        if dr and dc:
            ok &= free[r1, c0] & free[r0, c1]
        a, b = ids[r0, c0][ok], ids[r1, c1][ok]
        w = SQRT2 if dr and dc else 1.0
        rows += [a, b]
        cols += [b, a]
        wts += [np.full(a.size, w), np.full(a.size, w)]
    rows, cols, wts = np.concatenate(rows), np.concatenate(cols), np.concatenate(wts)
    return coo_matrix((wts, (rows, cols)), shape=(blocked.size, blocked.size)).tocsr()


def scipy_distances(blocked, start):
    """Distances (in cells) from ``start`` to every cell; inf when unreachable."""
    g = grid_graph(blocked)
    d = sp_dijkstra(g, indices=start[0] * blocked.shape[1] + start[1])
    return d.reshape(blocked.shape)


def point_in_polygon(x, y, rings):
    """Scalar even-odd test; boundary points count as inside."""
    inside = False
    for ring in rings:
        pts = list(ring)
        if pts[0] == pts[-1]:
            pts = pts[:-1]
        n = len(pts)
        for k in range(n):
            x1, y1 = pts[k]
            x2, y2 = pts[(k + 1) % n]
            if min(x1, x2) <= x <= max(x1, x2) and min(y1, y2) <= y <= max(y1, y2):
                if (x2 - x1) * (y - y1) == (y2 - y1) * (x - x1):
                    return True
            if (y1 > y) != (y2 > y):
                if x < x1 + (y - y1) * (x2 - x1) / (y2 - y1):
                    inside = not inside
    return inside
