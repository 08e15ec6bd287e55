"""Random but reproducible metropolitan scenarios for stress and property testing."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .grid import CATEGORIES, DemRaster, Polygon, PolygonSet
from .ingest import PARAMETER_DEFAULTS, ScenarioBundle, dump_scenario
from .models import (AltKind, AltNode, Candidate, Destination, FacilityType, Mode, ODRecord,
                     Timeframe, TransportNode, TravelTimeRecord)
from .scoring import nearest_nodes


def _blob(rng, cx, cy, radius):
    """Star-shaped polygon around a center; always simple."""
    n = int(rng.integers(8, 17))
    angles = np.sort(rng.uniform(0, 2 * math.pi, n))
    radii = radius * rng.uniform(0.5, 1.0, n)
    return tuple((float(cx + r * math.cos(a)), float(cy + r * math.sin(a))) for a, r in zip(angles, radii))


def synthetic_bundle(seed: int = 0, size: int = 1500, cell_m: float = 100.0, n_facilities: int = 150,
                     n_destinations: int = 10, dem_cell_m: float = 500.0) -> ScenarioBundle:
    rng = np.random.default_rng(seed)
    extent = size * cell_m

    def point(margin=0.02):
        return tuple(float(v) for v in rng.uniform(margin * extent, (1 - margin) * extent, 2))

    polys = []
    for cat in CATEGORIES:
        for _ in range(int(rng.integers(2, 5))):
            cx, cy = point(0.0)
            polys.append(Polygon(cat, (_blob(rng, cx, cy, rng.uniform(0.01, 0.05) * extent),)))

    n_dem = max(2, int(round(extent / dem_cell_m)))
    yy, xx = np.mgrid[0:n_dem, 0:n_dem] * dem_cell_m
    elev = np.full((n_dem, n_dem), 40.0)
    for _ in range(6):
        hx, hy = point(0.0)
        height, width = rng.uniform(150, 600), rng.uniform(0.02, 0.06) * extent
        elev += height * np.exp(-((xx - hx) ** 2 + (yy - hy) ** 2) / (2 * width ** 2))
    elev = np.round(elev, 1)
    elev[0, 0] = -9999.0
    dem = DemRaster(elev, -9999.0, 0.0, 0.0, dem_cell_m)

    types = list(FacilityType)
    facilities = [Candidate(f"F{k:04d}", f"Facility {k}", types[int(rng.integers(len(types)))], point(),
                            int(rng.geometric(0.03)) - 1)
                  for k in range(n_facilities)]
    destinations = [Destination(f"D{k:03d}", f"Park {k}", point(0.1)) for k in range(n_destinations)]

    alt_nodes = []
    for site in facilities + destinations:
        if rng.random() < 0.85:
            ang, dist = rng.uniform(0, 2 * math.pi), rng.uniform(0, 400)
            alt_nodes.append((site.position[0] + dist * math.cos(ang), site.position[1] + dist * math.sin(ang)))
    alt_nodes += [point(0.0) for _ in range(50)]
    kinds = list(AltKind)
    alt = [AltNode(f"A{k:05d}", kinds[k % 2], (float(x), float(y))) for k, (x, y) in enumerate(alt_nodes)]

    nodes = []
    for d in destinations:
        for mode in Mode:
            ang, dist = rng.uniform(0, 2 * math.pi), rng.uniform(200, 3000)
            nodes.append(TransportNode(f"N{len(nodes):04d}", mode,
                                       (d.position[0] + dist * math.cos(ang), d.position[1] + dist * math.sin(ang))))
    modes = list(Mode)
    for _ in range(3 * n_destinations):
        nodes.append(TransportNode(f"N{len(nodes):04d}", modes[int(rng.integers(3))], point(0.0)))

    times, ods = [], []
    for d in destinations:
        for node in nearest_nodes(d, nodes):
            times.append(TravelTimeRecord(d.id, node.id, round(float(rng.uniform(5, 60)), 3)))
            for tf in Timeframe:
                ods.append(ODRecord(d.id, node.id, tf, float(rng.integers(0, 800))))

    params = dict(PARAMETER_DEFAULTS, cell_m=cell_m)
    return ScenarioBundle(
        name=f"synthetic-{seed}", grid={"origin_x": 0.0, "origin_y": 0.0, "width_m": extent, "height_m": extent},
        facilities=facilities, destinations=destinations, polygons=PolygonSet(tuple(polys)),
        alt_nodes=alt, transport_nodes=nodes, travel_times=times, od_records=ods,
        parameters=params, dem=dem)


def gen_synthetic(seed: int, outdir, **kw) -> Path:
    return dump_scenario(synthetic_bundle(seed, **kw), outdir)
