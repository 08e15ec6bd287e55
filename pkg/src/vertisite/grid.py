"""Analysis grid, layer rasterization and the facility/constraint selection filter.

Cell ``(i, j)`` is row ``i`` (counted northward from ``origin_y``) and column
``j`` (counted eastward from ``origin_x``). Layer arrays therefore have shape
``(n_rows, n_cols)`` and row 0 is the southern edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .models import Position

CATEGORIES = (
    "Prohibited Area",
    "Restricted Area",
    "Danger Zone",
    "Military Operational Area",
    "Control Zone",
    "Aerodrome Traffic Zone",
    "Alert Area",
    "Terrain Obstacles",
)
TERRAIN = "Terrain Obstacles"

DEFAULT_DEM_THRESHOLD_M = 300.0

# Rows of centers handled per vectorized block in polygon rasterization.
_ROW_BLOCK = 256


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    origin_x: float
    origin_y: float
    cell_size: float
    n_cols: int
    n_rows: int

    def __post_init__(self):
        if not (self.cell_size > 0 and math.isfinite(self.cell_size)):
            raise GridError(f"cell_size must be positive, got {self.cell_size}")
        if self.n_cols < 1 or self.n_rows < 1:
            raise GridError(f"grid must be at least 1x1, got {self.n_rows}x{self.n_cols}")

    @classmethod
    def from_extent(cls, origin_x, origin_y, width_m, height_m, cell_size=100.0):
        """Smallest grid of ``cell_size`` cells covering the given extent."""
        n_cols = max(1, math.ceil(width_m / cell_size - 1e-9))
        n_rows = max(1, math.ceil(height_m / cell_size - 1e-9))
        return cls(float(origin_x), float(origin_y), float(cell_size), n_cols, n_rows)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def max_x(self) -> float:
        return self.origin_x + self.n_cols * self.cell_size

    @property
    def max_y(self) -> float:
        return self.origin_y + self.n_rows * self.cell_size

    def contains(self, x: float, y: float) -> bool:
        return self.origin_x <= x < self.max_x and self.origin_y <= y < self.max_y

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        """Cell ``(i, j)`` holding the point; raises if it lies off the grid."""
        if not (math.isfinite(x) and math.isfinite(y)) or not self.contains(x, y):
            raise GridError(f"point ({x!r}, {y!r}) lies outside the grid extent "
                            f"[{self.origin_x}, {self.max_x}) x [{self.origin_y}, {self.max_y})")
        j = min(int((x - self.origin_x) // self.cell_size), self.n_cols - 1)
        i = min(int((y - self.origin_y) // self.cell_size), self.n_rows - 1)
        return i, j

    def cell_center(self, i: int, j: int) -> Position:
        return (self.origin_x + (j + 0.5) * self.cell_size,
                self.origin_y + (i + 0.5) * self.cell_size)

    def center_xs(self) -> np.ndarray:
        return self.origin_x + (np.arange(self.n_cols) + 0.5) * self.cell_size

    def center_ys(self) -> np.ndarray:
        return self.origin_y + (np.arange(self.n_rows) + 0.5) * self.cell_size


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class BinaryLayer:
    spec: GridSpec
    cells: np.ndarray

    def __post_init__(self):
        cells = np.asarray(self.cells)
        if cells.shape != self.spec.shape:
            raise GridError(f"layer shape {cells.shape} does not match grid {self.spec.shape}")
        if cells.size and not np.isin(cells, (0, 1)).all():
            raise GridError("binary layer cells must be 0 or 1")
        object.__setattr__(self, "cells", _readonly(cells.astype(np.uint8)))

    def __eq__(self, other):
        if not isinstance(other, BinaryLayer):
            return NotImplemented
        return self.spec == other.spec and np.array_equal(self.cells, other.cells)

    def nonzero_cells(self) -> list[tuple[int, int]]:
        return [(int(i), int(j)) for i, j in zip(*np.nonzero(self.cells))]


SelectedLayer = BinaryLayer


@dataclass(frozen=True, eq=False)
class ConstraintStack:
    spec: GridSpec
    categories: tuple[str, ...]
    layers: tuple[BinaryLayer, ...]
    sum: np.ndarray = field(repr=False)

    def __eq__(self, other):
        if not isinstance(other, ConstraintStack):
            return NotImplemented
        return (self.spec == other.spec and self.categories == other.categories
                and self.layers == other.layers and np.array_equal(self.sum, other.sum))

    def layer(self, category: str) -> BinaryLayer:
        return self.layers[self.categories.index(category)]


@dataclass(frozen=True)
class Polygon:
    """One polygon (outer ring plus optional holes) tagged with a category."""

    category: str
    rings: tuple[tuple[Position, ...], ...]


@dataclass(frozen=True)
class PolygonSet:
    polygons: tuple[Polygon, ...] = ()

    def of_category(self, category: str) -> list[Polygon]:
        return [p for p in self.polygons if p.category == category]


@dataclass(frozen=True, eq=False)
class DemRaster:
    """Elevation grid. ``values`` rows run south to north like every other layer.

    When ``xll``/``yll``/``cellsize`` are given the raster is georeferenced and
    is resampled onto the analysis grid by cell-center lookup; otherwise its
    shape must equal the grid shape.
    """

    values: np.ndarray
    nodata: Optional[float] = None
    xll: Optional[float] = None
    yll: Optional[float] = None
    cellsize: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(np.asarray(self.values, dtype=float)))

    def __eq__(self, other):
        if not isinstance(other, DemRaster):
            return NotImplemented
        return (np.array_equal(self.values, other.values) and self.nodata == other.nodata
                and (self.xll, self.yll, self.cellsize) == (other.xll, other.yll, other.cellsize))

    @property
    def georeferenced(self) -> bool:
        return None not in (self.xll, self.yll, self.cellsize)


def rasterize_points(spec: GridSpec, points: Iterable[Position]) -> BinaryLayer:
    cells = np.zeros(spec.shape, dtype=np.uint8)
    for x, y in points:
        i, j = spec.cell_of(x, y)
        cells[i, j] = 1
    return BinaryLayer(spec, cells)


def _clean_ring(ring: Sequence[Position]) -> np.ndarray:
    pts = np.asarray(ring, dtype=float).reshape(-1, 2)
    if len(pts) > 1 and np.array_equal(pts[0], pts[-1]):
        pts = pts[:-1]
    if len({(float(x), float(y)) for x, y in pts}) < 3:
        raise GridError(f"degenerate polygon ring with fewer than 3 distinct vertices: {ring!r}")
    if not np.isfinite(pts).all():
        raise GridError("polygon ring has non-finite coordinates")
    return pts


def points_in_polygon(px: np.ndarray, py: np.ndarray, rings: Sequence[np.ndarray],
                      eps: float = 0.0) -> np.ndarray:
    """Even-odd containment over all rings; points within ``eps`` of an edge count as inside."""
    inside = np.zeros(px.shape, dtype=bool)
    on_edge = np.zeros(px.shape, dtype=bool)
    for pts in rings:
        x1, y1 = pts[:, 0], pts[:, 1]
        x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
        for ax, ay, bx, by in zip(x1, y1, x2, y2):
            crosses = (ay > py) != (by > py)
            if crosses.any():
                xint = ax + (py - ay) * (bx - ax) / ((by - ay) if by != ay else 1.0)
                inside ^= crosses & (px < xint)
            dx, dy = bx - ax, by - ay
            cross = dx * (py - ay) - dy * (px - ax)
            tol = eps * math.hypot(dx, dy)
            within = ((px >= min(ax, bx) - eps) & (px <= max(ax, bx) + eps)
                      & (py >= min(ay, by) - eps) & (py <= max(ay, by) + eps))
            on_edge |= within & (np.abs(cross) <= tol)
    return inside | on_edge


def rasterize_polygons(spec: GridSpec, polys: PolygonSet, category: str) -> BinaryLayer:
    """Mark cells whose center lies inside (or on the boundary of) a polygon of ``category``."""
    if category not in CATEGORIES:
        raise GridError(f"unknown constraint category {category!r}")
    cells = np.zeros(spec.shape, dtype=bool)
    xs, ys = spec.center_xs(), spec.center_ys()
    eps = 1e-9 * spec.cell_size
    for poly in polys.of_category(category):
        rings = [_clean_ring(r) for r in poly.rings]
        allpts = np.vstack(rings)
        xmin, ymin = allpts.min(axis=0)
        xmax, ymax = allpts.max(axis=0)
        j0, j1 = np.searchsorted(xs, xmin - eps), np.searchsorted(xs, xmax + eps, side="right")
        i0, i1 = np.searchsorted(ys, ymin - eps), np.searchsorted(ys, ymax + eps, side="right")
        if j0 >= j1 or i0 >= i1:
            continue
        for b0 in range(i0, i1, _ROW_BLOCK):
            b1 = min(b0 + _ROW_BLOCK, i1)
            px, py = np.meshgrid(xs[j0:j1], ys[b0:b1])
            cells[b0:b1, j0:j1] |= points_in_polygon(px, py, rings, eps)
    return BinaryLayer(spec, cells.astype(np.uint8))


def resample_dem(spec: GridSpec, dem: DemRaster) -> np.ndarray:
    """Elevation per analysis cell with nodata mapped to NaN."""
    vals = np.asarray(dem.values, dtype=float)
    if dem.georeferenced:
        cols = np.floor((spec.center_xs() - dem.xll) / dem.cellsize).astype(int)
        rows = np.floor((spec.center_ys() - dem.yll) / dem.cellsize).astype(int)
        nr, nc = vals.shape
        col_ok = (cols >= 0) & (cols < nc)
        row_ok = (rows >= 0) & (rows < nr)
        out = np.full(spec.shape, np.nan)
        sub = vals[np.ix_(rows[row_ok], cols[col_ok])]
        out[np.ix_(row_ok, col_ok)] = sub
    else:
        out = vals.copy()
    if out.shape != spec.shape:
        raise GridError(f"DEM shape {out.shape} does not match grid shape {spec.shape}")
    if dem.nodata is not None:
        out[out == dem.nodata] = np.nan
    return out


def rasterize_dem(spec: GridSpec, dem: DemRaster,
                  max_elevation_m: float = DEFAULT_DEM_THRESHOLD_M) -> BinaryLayer:
    if not math.isfinite(max_elevation_m):
        raise GridError(f"max_elevation_m must be finite, got {max_elevation_m!r}")
    elev = resample_dem(spec, dem)
    with np.errstate(invalid="ignore"):
        cells = np.nan_to_num(elev, nan=-np.inf) > max_elevation_m
    return BinaryLayer(spec, cells.astype(np.uint8))


def stack_constraints(layers: Sequence[BinaryLayer],
                      categories: Sequence[str] = CATEGORIES) -> ConstraintStack:
    if len(layers) != len(categories):
        raise GridError(f"expected {len(categories)} layers, got {len(layers)}")
    if not layers:
        raise GridError("no constraint layers given")
    spec = layers[0].spec
    for cat, lay in zip(categories, layers):
        if lay.spec != spec:
            raise GridError(f"layer {cat!r} grid {lay.spec} differs from {spec}")
    total = np.zeros(spec.shape, dtype=np.int16)
    for lay in layers:
        total += lay.cells
    return ConstraintStack(spec, tuple(categories), tuple(layers), _readonly(total))


def select(facilities: BinaryLayer, constraints: ConstraintStack) -> SelectedLayer:
    """Keep facility cells that carry no constraint at all."""
    if facilities.spec != constraints.spec:
        raise GridError(f"facility grid {facilities.spec} differs from constraint grid {constraints.spec}")
    cells = (facilities.cells == 1) & (constraints.sum == 0)
    return BinaryLayer(facilities.spec, cells.astype(np.uint8))


def build_constraints(spec: GridSpec, polys: PolygonSet, dem: Optional[DemRaster] = None,
                      dem_threshold_m: float = DEFAULT_DEM_THRESHOLD_M) -> ConstraintStack:
    """Rasterize every category; terrain combines its polygons with the DEM ceiling test."""
    layers = []
    for cat in CATEGORIES:
        lay = rasterize_polygons(spec, polys, cat)
        if cat == TERRAIN and dem is not None:
            dem_lay = rasterize_dem(spec, dem, dem_threshold_m)
            lay = BinaryLayer(spec, lay.cells | dem_lay.cells)
        layers.append(lay)
    return stack_constraints(layers)
