import numpy as np
import pytest
from hypothesis import given, strategies as st

from vertisite.grid import (CATEGORIES, TERRAIN, BinaryLayer, DemRaster, GridError, GridSpec, Polygon,
                            PolygonSet, build_constraints, points_in_polygon, rasterize_dem,
                            rasterize_points, rasterize_polygons, resample_dem, select, stack_constraints)

from oracles import point_in_polygon


def layer(spec, cells):
    return BinaryLayer(spec, np.asarray(cells, dtype=np.uint8))


def test_cell_of_half_open_cells():
    spec = GridSpec(0.0, 0.0, 100.0, 3, 2)
    assert spec.cell_of(0.0, 0.0) == (0, 0)
    assert spec.cell_of(99.999, 0.0) == (0, 0)
    assert spec.cell_of(100.0, 0.0) == (0, 1)
    assert spec.cell_of(250.0, 150.0) == (1, 2)
    with pytest.raises(GridError):
        spec.cell_of(300.0, 0.0)
    with pytest.raises(GridError):
        spec.cell_of(-0.1, 5.0)


def test_grid_spec_rejects_bad_sizes():
    with pytest.raises(GridError):
        GridSpec(0, 0, 0.0, 3, 3)
    with pytest.raises(GridError):
        GridSpec(0, 0, 10.0, 0, 3)
    assert GridSpec.from_extent(0, 0, 150_000, 150_000, 100).shape == (1500, 1500)
    assert GridSpec.from_extent(0, 0, 250, 90, 100).shape == (1, 3)


def test_rasterize_points_marks_cells():
    spec = GridSpec(0.0, 0.0, 10.0, 4, 4)
    lay = rasterize_points(spec, [(5, 5), (7, 3), (35, 25)])
    assert lay.nonzero_cells() == [(0, 0), (2, 3)]


def test_binary_layer_validates():
    spec = GridSpec(0.0, 0.0, 1.0, 2, 2)
    with pytest.raises(GridError):
        layer(spec, [[0, 2], [0, 0]])
    with pytest.raises(GridError):
        layer(spec, [[0, 1, 0]])
    lay = layer(spec, [[0, 1], [1, 0]])
    with pytest.raises(ValueError):
        lay.cells[0, 0] = 1


def test_square_polygon_covers_center_cells():
    spec = GridSpec(0.0, 0.0, 100.0, 10, 10)
    square = ((200, 200), (500, 200), (500, 500), (200, 500))
    lay = rasterize_polygons(spec, PolygonSet((Polygon("Danger Zone", (square,)),)), "Danger Zone")
    expect = np.zeros((10, 10), np.uint8)
    expect[2:5, 2:5] = 1
    assert np.array_equal(lay.cells, expect)


def test_polygon_center_on_boundary_counts_inside():
    spec = GridSpec(0.0, 0.0, 100.0, 4, 4)
    # right edge passes through the centers of column 2
    tri = ((0, 0), (250, 0), (250, 400), (0, 400))
    lay = rasterize_polygons(spec, PolygonSet((Polygon("Alert Area", (tri,)),)), "Alert Area")
    assert lay.cells[:, 2].all() and not lay.cells[:, 3].any()


def test_polygon_hole_is_excluded():
    spec = GridSpec(0.0, 0.0, 1.0, 10, 10)
    outer = ((0, 0), (10, 0), (10, 10), (0, 10))
    hole = ((3, 3), (7, 3), (7, 7), (3, 7))
    lay = rasterize_polygons(spec, PolygonSet((Polygon("Control Zone", (outer, hole)),)), "Control Zone")
    assert lay.cells.sum() == 100 - 16
    assert lay.cells[5, 5] == 0


def test_degenerate_ring_rejected():
    spec = GridSpec(0.0, 0.0, 1.0, 4, 4)
    bad = PolygonSet((Polygon("Danger Zone", (((0, 0), (1, 1)),)),))
    with pytest.raises(GridError):
        rasterize_polygons(spec, bad, "Danger Zone")


def test_unknown_category_rejected():
    spec = GridSpec(0.0, 0.0, 1.0, 4, 4)
    with pytest.raises(GridError):
        rasterize_polygons(spec, PolygonSet(()), "Parking Lot")


def test_polygon_rasterization_matches_scalar_oracle():
    rng = np.random.default_rng(3)
    spec = GridSpec(-50.0, 20.0, 7.0, 40, 30)
    for _ in range(30):
        n = int(rng.integers(3, 9))
        pts = [tuple(p) for p in rng.uniform([-60, 10], [240, 250], (n, 2))]
        lay = rasterize_polygons(spec, PolygonSet((Polygon("Danger Zone", (pts,)),)), "Danger Zone")
        xs, ys = spec.center_xs(), spec.center_ys()
        expect = np.array([[point_in_polygon(x, y, [pts]) for x in xs] for y in ys], dtype=np.uint8)
        assert np.array_equal(lay.cells, expect)


def test_points_in_polygon_vectorized():
    ring = np.array([(0, 0), (4, 0), (4, 4), (0, 4)], float)
    px = np.array([2.0, 5.0, 4.0, 0.0])
    py = np.array([2.0, 2.0, 1.0, 0.0])
    assert points_in_polygon(px, py, [ring]).tolist() == [True, False, True, True]


def write_dem_values():
    # south row first in memory
    return np.array([[100.0, 400.0], [301.0, -9999.0]])


def test_dem_threshold_and_nodata():
    spec = GridSpec(0.0, 0.0, 50.0, 2, 2)
    dem = DemRaster(write_dem_values(), -9999.0, 0.0, 0.0, 50.0)
    lay = rasterize_dem(spec, dem, 300.0)
    assert lay.cells.tolist() == [[0, 1], [1, 0]]
    assert rasterize_dem(spec, dem, 300.9).cells.tolist() == [[0, 1], [1, 0]]
    assert rasterize_dem(spec, dem, 301.0).cells.tolist() == [[0, 1], [0, 0]]
    with pytest.raises(GridError):
        rasterize_dem(spec, dem, float("nan"))


def test_dem_resampled_to_finer_grid():
    spec = GridSpec(0.0, 0.0, 25.0, 4, 4)
    dem = DemRaster(write_dem_values(), -9999.0, 0.0, 0.0, 50.0)
    res = resample_dem(spec, dem)
    assert res.shape == (4, 4)
    assert res[0, 0] == 100.0 and res[1, 3] == 400.0 and res[3, 0] == 301.0


def test_dem_shape_mismatch_without_georeference():
    spec = GridSpec(0.0, 0.0, 25.0, 4, 4)
    dem = DemRaster(np.zeros((3, 3)), None, None, None, None)
    with pytest.raises(GridError, match=r"\(3, 3\).*\(4, 4\)|\(4, 4\).*\(3, 3\)"):
        resample_dem(spec, dem)


def test_select_trivial_cases():
    spec = GridSpec(0.0, 0.0, 1.0, 3, 3)
    ones = layer(spec, np.ones((3, 3)))
    zero_layers = [layer(spec, np.zeros((3, 3)))] * 8
    assert np.array_equal(select(ones, stack_constraints(zero_layers)).cells, np.ones((3, 3)))
    layers = [layer(spec, np.eye(3)) if k < 3 else layer(spec, np.zeros((3, 3))) for k in range(8)]
    stack = stack_constraints(layers)
    assert stack.sum[1, 1] == 3
    assert select(ones, stack).cells[1, 1] == 0


def test_stack_rejects_spec_mismatch():
    a = GridSpec(0.0, 0.0, 1.0, 3, 3)
    b = GridSpec(0.0, 0.0, 2.0, 3, 3)
    layers = [layer(a, np.zeros((3, 3)))] * 7 + [layer(b, np.zeros((3, 3)))]
    with pytest.raises(GridError):
        stack_constraints(layers)


def test_build_constraints_terrain_uses_polygons_or_dem():
    spec = GridSpec(0.0, 0.0, 50.0, 2, 2)
    dem = DemRaster(write_dem_values(), -9999.0, 0.0, 0.0, 50.0)
    poly = PolygonSet((Polygon(TERRAIN, (((0, 0), (50, 0), (50, 50), (0, 50)),)),))
    stack = build_constraints(spec, poly, dem, 300.0)
    assert stack.layer(TERRAIN).cells.tolist() == [[1, 1], [1, 0]]
    assert stack.categories == CATEGORIES


grids = st.tuples(st.integers(1, 24), st.integers(1, 24), st.integers(0, 2**32 - 1))


@given(grids)
def test_select_equals_per_cell_rule(args):
    n_rows, n_cols, seed = args
    rng = np.random.default_rng(seed)
    spec = GridSpec(0.0, 0.0, 1.0, n_cols, n_rows)
    fac = layer(spec, rng.random((n_rows, n_cols)) < 0.4)
    layers = [layer(spec, rng.random((n_rows, n_cols)) < 0.15) for _ in range(8)]
    stack = stack_constraints(layers)
    out = select(fac, stack)
    for i in range(n_rows):
        for j in range(n_cols):
            c = sum(int(lay.cells[i, j]) for lay in layers)
            assert 0 <= stack.sum[i, j] <= 8
            assert out.cells[i, j] == int(fac.cells[i, j] == 1 and c == 0)


@given(grids, st.permutations(range(8)))
def test_stack_order_does_not_change_sum(args, perm):
    n_rows, n_cols, seed = args
    rng = np.random.default_rng(seed)
    spec = GridSpec(0.0, 0.0, 1.0, n_cols, n_rows)
    layers = [layer(spec, rng.random((n_rows, n_cols)) < 0.3) for _ in range(8)]
    a = stack_constraints(layers)
    b = stack_constraints([layers[k] for k in perm], [CATEGORIES[k] for k in perm])
    assert np.array_equal(a.sum, b.sum)


@given(st.lists(st.tuples(st.floats(0, 100), st.floats(0, 100)), min_size=3, max_size=8))
def test_rasterization_is_idempotent(pts):
    spec = GridSpec(0.0, 0.0, 5.0, 20, 20)
    polys = PolygonSet((Polygon("Danger Zone", (tuple(pts),)),))
    try:
        a = rasterize_polygons(spec, polys, "Danger Zone")
    except GridError:
        return
    assert a == rasterize_polygons(spec, polys, "Danger Zone")
