import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vertisite.altfilter import Exclusion, SpatialIndex, filter_alternatives, radius_query
from vertisite.grid import BinaryLayer, GridError, GridSpec
from vertisite.models import AltKind, AltNode, Candidate, Destination, FacilityType

SPEC = GridSpec(0.0, 0.0, 100.0, 50, 50)


def all_free():
    return BinaryLayer(SPEC, np.ones(SPEC.shape, np.uint8))


def cand(cid, x, y):
    return Candidate(cid, cid, FacilityType.TOLL_GATE, (x, y), 10)


def node(nid, x, y):
    return AltNode(nid, AltKind.TAXI_ROAD, (x, y))


def linear_scan(sites, selected, nodes, r):
    kept = []
    for s in sites:
        i, j = selected.spec.cell_of(*s.position)
        if selected.cells[i, j] and any(math.dist(s.position, n.position) <= r for n in nodes):
            kept.append(s.id)
    return kept


def test_buffer_boundary_closed():
    sites = [cand("a", 1000, 1000), cand("b", 2000, 2000)]
    nodes = [node("n1", 1450, 1000), node("n2", 2451, 2000)]
    res = filter_alternatives(sites, all_free(), nodes, 450.0)
    assert [s.id for s in res.kept] == ["a"]
    assert res.excluded == {"b": Exclusion.NO_ALTERNATIVE}


def test_constrained_cell_reason():
    cells = np.ones(SPEC.shape, np.uint8)
    cells[10, 10] = 0
    res = filter_alternatives([cand("a", 1050, 1050)], BinaryLayer(SPEC, cells), [node("n", 1050, 1050)])
    assert res.excluded == {"a": Exclusion.CONSTRAINED}
    assert res.kept == []


def test_works_for_destinations():
    d = Destination("P", "Park", (300.0, 300.0))
    res = filter_alternatives([d], all_free(), [AltNode("s", AltKind.SUBWAY, (500.0, 500.0))])
    assert res.kept == [d]


def test_site_off_grid_names_the_site():
    with pytest.raises(GridError, match="'z'"):
        filter_alternatives([cand("z", -5.0, 10.0)], all_free(), [])


def test_nonpositive_radius_rejected():
    with pytest.raises(ValueError):
        filter_alternatives([], all_free(), [], 0.0)


def test_radius_query_sorted_and_closed():
    idx = SpatialIndex([node("c", 3, 4), node("a", 0, 0), node("b", 5.0001, 0)], bucket_m=2.0)
    assert [n.id for n in radius_query(idx, (0, 0), 5.0)] == ["a", "c"]
    assert len(idx) == 3


def test_index_rejects_nan():
    with pytest.raises(ValueError):
        SpatialIndex([node("x", math.nan, 0.0)])


def test_matches_linear_scan_on_random_sets():
    rng = np.random.default_rng(11)
    for _ in range(50):
        sites = [cand(f"c{k}", *rng.uniform(0, 5000, 2)) for k in range(40)]
        nodes = [node(f"n{k}", *rng.uniform(-200, 5200, 2)) for k in range(int(rng.integers(0, 60)))]
        sel = BinaryLayer(SPEC, (rng.random(SPEC.shape) < 0.8).astype(np.uint8))
        r = float(rng.uniform(50, 900))
        res = filter_alternatives(sites, sel, nodes, r)
        assert [s.id for s in res.kept] == linear_scan(sites, sel, nodes, r)


coords = st.floats(0, 4999, allow_nan=False)
site_lists = st.lists(st.tuples(coords, coords), min_size=0, max_size=15)
node_lists = st.lists(st.tuples(st.floats(-500, 5500), st.floats(-500, 5500)), max_size=25)


@given(site_lists, node_lists, st.floats(10, 1000), st.randoms(use_true_random=False))
def test_filter_properties(site_xy, node_xy, r, rnd):
    sites = [cand(f"c{k:02d}", x, y) for k, (x, y) in enumerate(site_xy)]
    nodes = [node(f"n{k:02d}", x, y) for k, (x, y) in enumerate(node_xy)]
    sel = all_free()
    once = filter_alternatives(sites, sel, nodes, r)
    ids = [s.id for s in once.kept]
    assert set(ids) <= {s.id for s in sites}
    # idempotent
    assert [s.id for s in filter_alternatives(once.kept, sel, nodes, r).kept] == ids
    # alt node order is irrelevant
    shuffled = list(nodes)
    rnd.shuffle(shuffled)
    assert [s.id for s in filter_alternatives(sites, sel, shuffled, r).kept] == ids
    # a smaller radius never adds survivors
    smaller = filter_alternatives(sites, sel, nodes, r / 2)
    assert {s.id for s in smaller.kept} <= set(ids)
