"""Regenerate src/vertisite/data/case_study from the reference case study values.

Destination totals, candidate bus counts and reachable-park sets are the
reference values. Positions are made up: parks are placed so that every
reachable set is realized inside a 120 km square, and each candidate sits
well inside its region (included parks at most 29 km octile away, excluded
parks at least 31 km away) so the 30 km range test is unambiguous on the
100 m grid.

Run:  python tools/build_case_study.py
"""

import math
import sys
from pathlib import Path

import numpy as np

from vertisite.grid import DemRaster, Polygon, PolygonSet
from vertisite.ingest import PARAMETER_DEFAULTS, ScenarioBundle, dump_scenario
from vertisite.models import (AltKind, AltNode, Candidate, Destination, FacilityType, Mode, ODRecord,
                              Timeframe, TransportNode, TravelTimeRecord)

OUT = Path(__file__).resolve().parents[1] / "src" / "vertisite" / "data" / "case_study"
EXTENT = 120_000.0

PARKS = {  # id: (name, total minutes, total OD)
    "A": ("Banwol", 71.696, 1107),
    "B": ("Sihwa", 60.89, 3788),
    "C": ("Asan Wojeong", 131.452, 80),
    "D": ("Yongin", 72.081, 44),
    "E": ("Paju Publishing", 73.346, 199),
}

# name, bus routes, reachable parks (in printed order)
CANDIDATES = [
    ("E.Gunpo T", 213, "AB"), ("Guseong E", 478, "AD"), ("Dongcheon E", 477, "AD"),
    ("Gunja T", 190, "AB"), ("Ansan R", 125, "AB"), ("Siheung T", 101, "AB"),
    ("Jukjeon (S) R", 241, "AD"), ("Mado T", 54, "ABC"), ("Songsan Mado T", 54, "ABC"),
    ("Joam T", 54, "ABC"), ("Hwaseong (M) R", 53, "ABC"), ("Hwaseong (S) R", 53, "ABC"),
    ("N.Suwon T", 81, "ABD"), ("W.Seoul T", 75, "AB"), ("W.Ansan T", 67, "AB"),
    ("Siheung Sky R", 61, "AB"), ("W.Siheung T", 49, "AB"), ("Geumjeong E", 34, "AB"),
    ("Anseong (S) R", 292, "D"), ("Maesong T", 17, "ABC"), ("Uiwang T", 23, "ABD"),
    ("Icheon (N) R", 174, "D"), ("Icheon (H) R", 174, "D"), ("Bugok T", 17, "ABD"),
    ("S.Incheon T", 17, "AB"), ("New Airport T", 17, "BE"), ("Yeongjong Br. R", 17, "BE"),
    ("Anseong T", 65, "D"), ("Gonjiam T", 63, "D"), ("W.Suji T", 16, "AD"),
    ("S.Anseong T", 5, "AB"), ("Balan T", 3, "AC"), ("W.Anseong T", 24, "D"),
    ("Cheongbuk T", 2, "AC"), ("Anseong (M.P) R", 16, "D"), ("Bibong T", 1, "ABC"),
    ("Anseong (M.J) R", 11, "D"),
    # printed sum 0.237903 is 3 x score(D); reachable set {D} reproduces the printed Score_v
    ("S.Anseong T", 3, "D"), ("W.Icheon T", 3, "D"),
    ("Goyang T", 0, "E"), ("S.Gwang myeong T", 0, "AB"), ("S.Gunpo T", 0, "AB"),
    ("S.Bibong T", 0, "ABC"), ("Docheok T", 0, "D"), ("Dongtan T", 0, "D"),
    ("Munhak Tunnel T", 0, "AB"), ("Mulwang T", 0, "AB"), ("W.Yongin T", 0, "D"),
    ("Shihwa T", 0, "AB"), ("Yeonseong T", 0, "AB"), ("Ilsan Br. T", 0, "E"),
    ("Jungri T", 0, "D"), ("Cheongna T", 0, "BE"), ("Hwaseong T", 0, "ABC"),
]
TYPES = {"T": FacilityType.TOLL_GATE, "E": FacilityType.EX_HUB, "R": FacilityType.REST_AREA}

CELL = 100.0
IN_MAX = 29_000.0
OUT_MIN = 31_000.0


def octile_m(p, q):
    a = (int(p[0] // CELL), int(p[1] // CELL))
    b = (int(q[0] // CELL), int(q[1] // CELL))
    dx, dy = abs(a[0] - b[0]), abs(a[1] - b[1])
    return CELL * ((math.sqrt(2) - 1) * min(dx, dy) + max(dx, dy))


def pattern_at(p, parks):
    inc, ok = "", True
    for k, q in parks.items():
        if octile_m(p, q) <= IN_MAX:
            inc += k
        elif math.dist(p, q) < OUT_MIN:
            ok = False
    return inc if ok else None


PARK_POS = {"A": (50_000.0, 60_000.0), "B": (40_000.0, 80_000.0), "C": (55_000.0, 30_000.0),
            "D": (80_000.0, 55_000.0), "E": (25_000.0, 105_000.0)}


def lattice_regions(parks, step=1000.0, margin=5000.0):
    regions = {}
    for x in np.arange(margin, EXTENT - margin, step):
        for y in np.arange(margin, EXTENT - margin, step):
            pat = pattern_at((float(x), float(y)), parks)
            if pat:
                regions.setdefault(pat, []).append((float(x) + 50.0, float(y) + 50.0))
    return regions


def split_exact(total, fracs=(0.4, 0.3)):
    """Three addends whose left-to-right float sum is exactly ``total``."""
    for nudge in range(200):
        a = round(total * fracs[0], 1) + nudge * 0.001
        b = round(total * fracs[1], 1)
        c = round(total - a - b, 3)
        if ((0.0 + a) + b) + c == total and min(a, b, c) >= 0:
            return [a, b, c]
    raise RuntimeError(f"cannot split {total}")


def main():
    regions = lattice_regions(PARK_POS)
    needed = sorted({p for _, _, p in CANDIDATES})
    missing = [p for p in needed if p not in regions]
    if missing:
        sys.exit(f"patterns not realizable with current park layout: {missing}")

    rng = np.random.default_rng(7)
    facilities, alt = [], []
    used = {p: 0 for p in needed}
    for k, (name, buses, pat) in enumerate(CANDIDATES, 1):
        pool = regions[pat]
        pos = pool[(used[pat] * 37 + len(pool) // 2) % len(pool)]
        used[pat] += 1
        facilities.append(Candidate(f"V{k:02d}", name, TYPES[name.split()[-1]], pos, buses))
        alt.append(AltNode(f"ALT{k:02d}", AltKind.TAXI_ROAD if k % 3 else AltKind.SUBWAY,
                           (pos[0] + 150.0, pos[1] + 200.0)))

    # filtered-out facilities: six inside constraint zones, four with no alternative transport
    blocked_sites = [(112_050.0, 8_050.0), (113_050.0, 9_050.0), (8_050.0, 12_050.0),
                     (110_050.0, 100_050.0), (100_050.0, 112_050.0), (9_050.0, 40_050.0)]
    for k, pos in enumerate(blocked_sites, 1):
        facilities.append(Candidate(f"X{k:02d}", f"Constrained {k}", FacilityType.TOLL_GATE, pos, 20))
        alt.append(AltNode(f"ALTX{k:02d}", AltKind.TAXI_ROAD, (pos[0] + 100.0, pos[1])))
    for k, pos in enumerate([(100_050.0, 20_050.0), (105_050.0, 60_050.0),
                             (70_050.0, 110_050.0), (15_050.0, 70_050.0)], 1):
        facilities.append(Candidate(f"Y{k:02d}", f"Isolated {k}", FacilityType.REST_AREA, pos, 40))

    def square(cx, cy, half):
        return ((cx - half, cy - half), (cx + half, cy - half), (cx + half, cy + half),
                (cx - half, cy + half), (cx - half, cy - half))

    polys = [
        Polygon("Prohibited Area", (square(112_500.0, 8_500.0, 3000.0),)),
        Polygon("Restricted Area", (square(8_000.0, 12_000.0, 2500.0),)),
        Polygon("Danger Zone", (square(110_000.0, 100_000.0, 2000.0),)),
        Polygon("Military Operational Area", (square(100_000.0, 112_000.0, 2000.0),)),
        Polygon("Control Zone", (square(9_000.0, 40_000.0, 1500.0),)),
        Polygon("Aerodrome Traffic Zone", (square(5_000.0, 115_000.0, 1500.0),)),
        Polygon("Alert Area", (square(115_000.0, 40_000.0, 1500.0),)),
        Polygon("Terrain Obstacles", (((2_000.0, 2_000.0), (6_000.0, 2_000.0), (4_000.0, 6_000.0)),)),
    ]
    # coarse 1 km DEM with one peak above the 300 m ceiling in the north-east corner
    n = 120
    yy, xx = (np.mgrid[0:n, 0:n] + 0.5) * 1000.0
    elev = 50.0 + 400.0 * np.exp(-((xx - 116_000.0) ** 2 + (yy - 75_000.0) ** 2) / (2 * 2500.0 ** 2))
    dem = DemRaster(np.round(elev, 1), -9999.0, 0.0, 0.0, 1000.0)

    destinations = []
    for pid, (name, *_rest) in PARKS.items():
        destinations.append(Destination(pid, f"{pid}({name})", PARK_POS[pid]))
        alt.append(AltNode(f"ALTP{pid}", AltKind.SUBWAY, (PARK_POS[pid][0] - 120.0, PARK_POS[pid][1] + 80.0)))
    destinations += [Destination("F", "F(Constrained park 1)", (112_550.0, 9_550.0)),
                     Destination("G", "G(Constrained park 2)", (110_550.0, 99_550.0)),
                     Destination("H", "H(Isolated park 1)", (95_050.0, 95_050.0)),
                     Destination("I", "I(Isolated park 2)", (20_050.0, 20_050.0))]
    alt += [AltNode("ALTPF", AltKind.SUBWAY, (112_600.0, 9_600.0)),
            AltNode("ALTPG", AltKind.SUBWAY, (110_600.0, 99_600.0))]

    nodes, times, ods = [], [], []
    for pid, (name, minutes, od) in PARKS.items():
        px, py = PARK_POS[pid]
        parts = split_exact(minutes)
        for m_i, mode in enumerate(Mode):
            nid = f"{pid}-{mode.value}"
            ang = 2 * math.pi * m_i / 3
            nodes.append(TransportNode(nid, mode, (px + 500 * math.cos(ang), py + 500 * math.sin(ang))))
            times.append(TravelTimeRecord(pid, nid, parts[m_i]))
            if pid == "D":
                vols = [44.0, 0.0, 0.0] if mode is Mode.BUS else [0.0, 0.0, 0.0]
            else:
                share = [int(od * 0.5), int(od * 0.3)]
                share.append(od - sum(share))
                node_total = share[m_i]
                vols = [float(node_total // 2), float(node_total // 4), float(node_total - node_total // 2 - node_total // 4)]
            for tf, v in zip(Timeframe, vols):
                ods.append(ODRecord(pid, nid, tf, v))
    for pid in "FGHI":
        d = next(x for x in destinations if x.id == pid)
        for mode in Mode:
            nid = f"{pid}-{mode.value}"
            nodes.append(TransportNode(nid, mode, (d.position[0] + 300.0, d.position[1])))
            times.append(TravelTimeRecord(pid, nid, 10.0))
            for tf in Timeframe:
                ods.append(ODRecord(pid, nid, tf, 10.0))

    bundle = ScenarioBundle(
        name="case-study",
        grid={"origin_x": 0.0, "origin_y": 0.0, "width_m": EXTENT, "height_m": EXTENT},
        facilities=facilities, destinations=destinations, polygons=PolygonSet(tuple(polys)),
        alt_nodes=alt, transport_nodes=nodes, travel_times=times, od_records=ods,
        parameters=dict(PARAMETER_DEFAULTS), dem=dem)
    OUT.mkdir(parents=True, exist_ok=True)
    dump_scenario(bundle, OUT)

    from vertisite.ingest import load_scenario
    from vertisite.pipeline import run_pipeline

    report = run_pipeline(load_scenario(OUT))
    want = {f"V{k:02d}": tuple(p) for k, (_, _, p) in enumerate(CANDIDATES, 1)}
    got = {s.candidate_id: s.coverage for s in report.ranking}
    bad = {k: (want[k], got.get(k)) for k in want if got.get(k) != want[k]}
    assert not bad, f"coverage mismatch: {bad}"
    assert report.stage_counts["facilities_final"] == len(CANDIDATES), report.stage_counts
    print(report.stage_counts)
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
