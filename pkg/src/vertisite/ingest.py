"""Scenario loading, validation and serialization.

A scenario is a JSON manifest naming CSV, GeoJSON and ASCII-grid files plus
run parameters. Every reader collects all problems it finds and
``load_scenario`` reports them together in one :class:`ScenarioError`.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .grid import CATEGORIES, DemRaster, Polygon, PolygonSet
from .models import (AltKind, AltNode, Candidate, Destination, FacilityType, Mode, ODRecord,
                     Timeframe, TransportNode, TravelTimeRecord)

MANIFEST_NAME = "manifest.json"
CASE_STUDY = "case-study"

PARAMETER_DEFAULTS = {
    "gamma": 0.5,
    "buffer_m": 450.0,
    "range_km": 30.0,
    "cell_m": 100.0,
    "dem_threshold_m": 300.0,
    "timeframes": [t.value for t in Timeframe],
    "top_k": 10,
}

FACILITY_COLUMNS = ("id", "name", "type", "x_m", "y_m", "num_bus_routes")
DESTINATION_COLUMNS = ("id", "name", "x_m", "y_m")
ALT_NODE_COLUMNS = ("id", "kind", "x_m", "y_m")
TRANSPORT_NODE_COLUMNS = ("id", "mode", "x_m", "y_m")
TRAVEL_TIME_COLUMNS = ("dest_id", "node_id", "minutes")
OD_COLUMNS = ("dest_id", "node_id", "timeframe", "volume")


@dataclass(frozen=True)
class Issue:
    file: str
    line: Optional[int]
    message: str

    def __str__(self):
        where = self.file if self.line is None else f"{self.file}:{self.line}"
        return f"{where}: {self.message}"


class ScenarioError(ValueError):
    def __init__(self, issues: Sequence[Issue]):
        self.issues = list(issues)
        super().__init__(f"{len(self.issues)} validation issue(s):\n"
                         + "\n".join(f"  {i}" for i in self.issues))


class _Issues(list):
    def add(self, file, line, message):
        self.append(Issue(str(file), line, message))

    def raise_if_any(self):
        if self:
            raise ScenarioError(self)


def _finite(text: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise ValueError(f"non-finite number {text!r}")
    return v


def _nonneg(text: str) -> float:
    v = _finite(text)
    if v < 0:
        raise ValueError(f"negative value {text!r}")
    return v


def _count(text: str) -> int:
    v = int(text)
    if v < 0:
        raise ValueError(f"negative count {text!r}")
    return v


def _enum(cls):
    def parse(text: str):
        try:
            return cls(text)
        except ValueError:
            raise ValueError(f"unknown {cls.__name__} {text!r}; expected one of "
                             f"{[m.value for m in cls]}") from None
    return parse


def _read_rows(path: Path, columns: Sequence[str], parsers: dict[str, Callable], issues: _Issues):
    """Yield ``(line, parsed_row)`` for every valid row; record every problem."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        issues.add(path, None, f"cannot read file: {exc}")
        return
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != list(columns):
            issues.add(path, 1, f"header must be exactly {','.join(columns)}, got "
                                f"{','.join(header) if header else '<empty>'}")
            return
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(columns):
                issues.add(path, line, f"expected {len(columns)} fields, got {len(row)}")
                continue
            out = {}
            ok = True
            for col, raw in zip(columns, row):
                raw = raw.strip()
                try:
                    out[col] = parsers.get(col, str)(raw)
                except ValueError as exc:
                    issues.add(path, line, f"column {col}: {exc}")
                    ok = False
            if ok:
                yield line, out


def _unique(items, path, issues, key=lambda r: r.id):
    seen = {}
    for line, item in items:
        k = key(item)
        if k in seen:
            issues.add(path, line, f"duplicate id {k!r} (first at line {seen[k]})")
        else:
            seen[k] = line
    return [item for _, item in items]


def _facilities(path, issues):
    parsers = {"type": _enum(FacilityType), "x_m": _finite, "y_m": _finite, "num_bus_routes": _count}
    rows = [(ln, Candidate(r["id"], r["name"], r["type"], (r["x_m"], r["y_m"]), r["num_bus_routes"]))
            for ln, r in _read_rows(path, FACILITY_COLUMNS, parsers, issues)]
    return _unique(rows, path, issues)


def _destinations(path, issues):
    parsers = {"x_m": _finite, "y_m": _finite}
    rows = [(ln, Destination(r["id"], r["name"], (r["x_m"], r["y_m"])))
            for ln, r in _read_rows(path, DESTINATION_COLUMNS, parsers, issues)]
    return _unique(rows, path, issues)


def _alt_nodes(path, issues):
    parsers = {"kind": _enum(AltKind), "x_m": _finite, "y_m": _finite}
    rows = [(ln, AltNode(r["id"], r["kind"], (r["x_m"], r["y_m"])))
            for ln, r in _read_rows(path, ALT_NODE_COLUMNS, parsers, issues)]
    return _unique(rows, path, issues)


def _transport_nodes(path, issues):
    parsers = {"mode": _enum(Mode), "x_m": _finite, "y_m": _finite}
    rows = [(ln, TransportNode(r["id"], r["mode"], (r["x_m"], r["y_m"])))
            for ln, r in _read_rows(path, TRANSPORT_NODE_COLUMNS, parsers, issues)]
    return _unique(rows, path, issues)


def _travel_times(path, issues):
    rows = [(ln, TravelTimeRecord(r["dest_id"], r["node_id"], r["minutes"]))
            for ln, r in _read_rows(path, TRAVEL_TIME_COLUMNS, {"minutes": _nonneg}, issues)]
    return _unique(rows, path, issues, key=lambda r: (r.dest_id, r.node_id)), rows


def _od(path, issues):
    parsers = {"timeframe": _enum(Timeframe), "volume": _nonneg}
    rows = [(ln, ODRecord(r["dest_id"], r["node_id"], r["timeframe"], r["volume"]))
            for ln, r in _read_rows(path, OD_COLUMNS, parsers, issues)]
    return _unique(rows, path, issues, key=lambda r: (r.dest_id, r.node_id, r.timeframe)), rows


def _raising(reader):
    def read(path):
        issues = _Issues()
        out = reader(Path(path), issues)
        issues.raise_if_any()
        return out[0] if isinstance(out, tuple) else out
    return read


read_facilities = _raising(_facilities)
read_destinations = _raising(_destinations)
read_alt_nodes = _raising(_alt_nodes)
read_transport_nodes = _raising(_transport_nodes)
read_travel_times = _raising(_travel_times)
read_od = _raising(_od)


def _rings(coords, path, where, issues):
    rings = []
    for ring in coords:
        try:
            pts = tuple((_finite(str(p[0])), _finite(str(p[1]))) for p in ring)
        except (TypeError, ValueError, IndexError) as exc:
            issues.add(path, None, f"{where}: bad coordinates ({exc})")
            return None
        distinct = set(pts)
        if len(distinct) < 3:
            issues.add(path, None, f"{where}: ring has fewer than 3 distinct vertices")
            return None
        rings.append(pts)
    if not rings:
        issues.add(path, None, f"{where}: polygon without rings")
        return None
    return tuple(rings)


def _constraints(path: Path, issues, category: Optional[str] = None) -> list[Polygon]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        issues.add(path, None, f"cannot read GeoJSON: {exc}")
        return []
    if doc.get("type") != "FeatureCollection" or not isinstance(doc.get("features"), list):
        issues.add(path, None, "expected a GeoJSON FeatureCollection")
        return []
    out = []
    for k, feat in enumerate(doc["features"]):
        where = f"feature {k}"
        props = feat.get("properties") or {}
        cat = props.get("category", category)
        if not isinstance(cat, str) or cat not in CATEGORIES:
            issues.add(path, None, f"{where}: category {cat!r} is not one of {list(CATEGORIES)}")
            continue
        geom = feat.get("geometry") or {}
        gtype = geom.get("type")
        if gtype == "Polygon":
            parts = [geom.get("coordinates", [])]
        elif gtype == "MultiPolygon":
            parts = geom.get("coordinates", [])
        else:
            issues.add(path, None, f"{where}: geometry type {gtype!r} is not Polygon/MultiPolygon")
            continue
        for part in parts:
            rings = _rings(part, path, where, issues)
            if rings:
                out.append(Polygon(cat, rings))
    return out


def read_constraints(path, category: Optional[str] = None) -> PolygonSet:
    issues = _Issues()
    polys = _constraints(Path(path), issues, category)
    issues.raise_if_any()
    return PolygonSet(tuple(polys))


def write_constraints(path, polys: PolygonSet):
    features = [{"type": "Feature", "properties": {"category": p.category},
                 "geometry": {"type": "Polygon",
                              "coordinates": [[list(pt) for pt in ring] for ring in p.rings]}}
                for p in polys.polygons]
    Path(path).write_text(json.dumps({"type": "FeatureCollection", "features": features}),
                          encoding="utf-8")


def read_ascii_grid(path) -> DemRaster:
    """ESRI ASCII grid. Rows come north-first in the file and are flipped to south-first."""
    text = Path(path).read_text(encoding="ascii").split()
    header = {}
    pos = 0
    while pos + 1 < len(text) and text[pos][0].isalpha():
        header[text[pos].lower()] = text[pos + 1]
        pos += 2
    try:
        ncols, nrows = int(header["ncols"]), int(header["nrows"])
        cellsize = float(header["cellsize"])
        if "xllcorner" in header:
            xll, yll = float(header["xllcorner"]), float(header["yllcorner"])
        else:
            xll = float(header["xllcenter"]) - cellsize / 2
            yll = float(header["yllcenter"]) - cellsize / 2
    except KeyError as exc:
        raise ScenarioError([Issue(str(path), None, f"ASCII grid header lacks {exc.args[0]}")]) from None
    nodata = float(header["nodata_value"]) if "nodata_value" in header else None
    values = np.array(text[pos:], dtype=float)
    if values.size != ncols * nrows:
        raise ScenarioError([Issue(str(path), None,
                                   f"expected {nrows}x{ncols}={ncols * nrows} values, got {values.size}")])
    return DemRaster(values.reshape(nrows, ncols)[::-1], nodata, xll, yll, cellsize)


def write_ascii_grid(path, dem: DemRaster):
    vals = np.asarray(dem.values)
    nrows, ncols = vals.shape
    lines = [f"ncols {ncols}", f"nrows {nrows}",
             f"xllcorner {dem.xll if dem.xll is not None else 0.0!r}",
             f"yllcorner {dem.yll if dem.yll is not None else 0.0!r}",
             f"cellsize {dem.cellsize if dem.cellsize is not None else 1.0!r}"]
    if dem.nodata is not None:
        lines.append(f"nodata_value {dem.nodata!r}")
    for row in vals[::-1]:
        lines.append(" ".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


@dataclass
class ScenarioBundle:
    name: str
    grid: dict[str, float]
    facilities: list[Candidate]
    destinations: list[Destination]
    polygons: PolygonSet
    alt_nodes: list[AltNode]
    transport_nodes: list[TransportNode]
    travel_times: list[TravelTimeRecord]
    od_records: list[ODRecord]
    parameters: dict[str, Any] = field(default_factory=lambda: dict(PARAMETER_DEFAULTS))
    dem: Optional[DemRaster] = None
    provider: dict[str, Any] = field(default_factory=lambda: {"kind": "file"})
    root: Optional[Path] = field(default=None, compare=False)


def case_study_manifest() -> Path:
    return Path(str(resources.files("vertisite") / "data" / "case_study" / MANIFEST_NAME))


def _manifest_path(path) -> Path:
    if str(path) == CASE_STUDY:
        return case_study_manifest()
    p = Path(path)
    return p / MANIFEST_NAME if p.is_dir() else p


def validate_parameters(params: dict, issues: _Issues, source="manifest"):
    out = dict(PARAMETER_DEFAULTS)
    for key, value in params.items():
        if key not in PARAMETER_DEFAULTS:
            issues.add(source, None, f"unknown parameter {key!r}")
            continue
        out[key] = value
    try:
        if not 0.0 <= float(out["gamma"]) <= 1.0:
            issues.add(source, None, f"gamma must lie in [0, 1], got {out['gamma']!r}")
        for key in ("buffer_m", "range_km", "cell_m"):
            if not (math.isfinite(float(out[key])) and float(out[key]) > 0):
                issues.add(source, None, f"{key} must be positive, got {out[key]!r}")
        if not math.isfinite(float(out["dem_threshold_m"])):
            issues.add(source, None, "dem_threshold_m must be finite")
        if int(out["top_k"]) < 2:
            issues.add(source, None, f"top_k must be at least 2, got {out['top_k']!r}")
    except (TypeError, ValueError) as exc:
        issues.add(source, None, f"bad parameter value: {exc}")
    tfs = out["timeframes"]
    if isinstance(tfs, str):
        tfs = [t for t in tfs.split(",") if t]
    bad = [t for t in tfs if t not in {x.value for x in Timeframe}]
    if bad or not tfs:
        issues.add(source, None, f"timeframes must be a non-empty subset of "
                                 f"{[t.value for t in Timeframe]}, got {tfs!r}")
    out["timeframes"] = [t.value for t in Timeframe if t.value in tfs]
    return out


def _cross_check(bundle: ScenarioBundle, files: dict, tt_rows, od_rows, issues: _Issues):
    from .scoring import DEFAULT_MODES, ScoringError, nearest_nodes

    dest_ids = {d.id for d in bundle.destinations}
    node_ids = {n.id for n in bundle.transport_nodes}
    for label, rows in (("travel_times", tt_rows), ("od", od_rows)):
        for line, rec in rows:
            if rec.dest_id not in dest_ids:
                issues.add(files.get(label, label), line, f"dest_id {rec.dest_id!r} is not a known destination")
            if rec.node_id not in node_ids:
                issues.add(files.get(label, label), line, f"node_id {rec.node_id!r} is not a known transport node")
    g = bundle.grid
    x0, y0 = g["origin_x"], g["origin_y"]
    x1, y1 = x0 + g["width_m"], y0 + g["height_m"]
    for label, items in (("facilities", bundle.facilities), ("destinations", bundle.destinations)):
        for item in items:
            x, y = item.position
            if not (x0 <= x < x1 and y0 <= y < y1):
                issues.add(files.get(label, label), None,
                           f"{item.id!r} at ({x!r}, {y!r}) lies outside the grid extent "
                           f"[{x0}, {x1}) x [{y0}, {y1})")
    tt_pairs = {(r.dest_id, r.node_id) for r in bundle.travel_times}
    od_pairs = {(r.dest_id, r.node_id) for r in bundle.od_records}
    file_provider = bundle.provider.get("kind", "file") == "file"
    for dest in bundle.destinations:
        try:
            chosen = nearest_nodes(dest, bundle.transport_nodes, DEFAULT_MODES)
        except ScoringError as exc:
            issues.add(files.get("transport_nodes", "transport_nodes"), None, str(exc))
            continue
        for node in chosen:
            if file_provider and (dest.id, node.id) not in tt_pairs:
                issues.add(files.get("travel_times", "travel_times"), None,
                           f"no travel time for destination {dest.id!r} and its nearest "
                           f"{node.mode.value} node {node.id!r}")
            if (dest.id, node.id) not in od_pairs:
                issues.add(files.get("od", "od"), None,
                           f"no OD record for destination {dest.id!r} and its nearest "
                           f"{node.mode.value} node {node.id!r}")


def load_scenario(path) -> ScenarioBundle:
    """Load and fully validate a manifest (a file, a directory holding one, or ``case-study``)."""
    mpath = _manifest_path(path)
    issues = _Issues()
    try:
        manifest = json.loads(mpath.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ScenarioError([Issue(str(mpath), None, f"cannot read manifest: {exc}")]) from None
    root = mpath.parent
    files = manifest.get("files", {})
    required = ("facilities", "destinations", "alt_nodes", "transport_nodes", "od")
    for key in required:
        if key not in files:
            issues.add(mpath, None, f"files.{key} is required")
    grid = manifest.get("grid", {})
    for key in ("origin_x", "origin_y", "width_m", "height_m"):
        try:
            grid[key] = _finite(str(grid[key]))
        except (KeyError, ValueError):
            issues.add(mpath, None, f"grid.{key} must be a finite number")
    if all(isinstance(grid.get(k), float) for k in ("width_m", "height_m")):
        if grid["width_m"] <= 0 or grid["height_m"] <= 0:
            issues.add(mpath, None, "grid width_m and height_m must be positive")
    provider = manifest.get("travel_time_provider", {"kind": "file"})
    if provider.get("kind") not in ("file", "http"):
        issues.add(mpath, None, f"travel_time_provider.kind must be 'file' or 'http', got {provider.get('kind')!r}")
    if provider.get("kind", "file") == "file" and "travel_times" not in files:
        issues.add(mpath, None, "files.travel_times is required with the file provider")
    if provider.get("kind") == "http" and not provider.get("endpoint"):
        issues.add(mpath, None, "travel_time_provider.endpoint is required for the http provider")
    params = validate_parameters(manifest.get("parameters", {}), issues, str(mpath))
    issues.raise_if_any()

    fpath = {k: root / v for k, v in files.items() if isinstance(v, str)}
    facilities = _facilities(fpath["facilities"], issues)
    destinations = _destinations(fpath["destinations"], issues)
    alt_nodes = _alt_nodes(fpath["alt_nodes"], issues)
    transport_nodes = _transport_nodes(fpath["transport_nodes"], issues)
    travel_times, tt_rows = _travel_times(fpath["travel_times"], issues) if "travel_times" in fpath else ([], [])
    od_records, od_rows = _od(fpath["od"], issues)
    polys = []
    for entry in files.get("constraints", []):
        if isinstance(entry, str):
            polys += _constraints(root / entry, issues)
        else:
            polys += _constraints(root / entry["path"], issues, entry.get("category"))
    dem = None
    if files.get("dem"):
        try:
            dem = read_ascii_grid(root / files["dem"])
        except ScenarioError as exc:
            issues.extend(exc.issues)
        except (OSError, ValueError) as exc:
            issues.add(root / files["dem"], None, f"cannot read DEM: {exc}")

    bundle = ScenarioBundle(
        name=str(manifest.get("name", mpath.parent.name)), grid=grid, facilities=facilities,
        destinations=destinations, polygons=PolygonSet(tuple(polys)), alt_nodes=alt_nodes,
        transport_nodes=transport_nodes, travel_times=travel_times, od_records=od_records,
        parameters=params, dem=dem, provider=provider, root=root)
    _cross_check(bundle, {k: str(v) for k, v in fpath.items()}, tt_rows, od_rows, issues)
    issues.raise_if_any()
    return bundle


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def dump_scenario(bundle: ScenarioBundle, outdir) -> Path:
    """Write the bundle as a manifest plus data files; ``load_scenario`` reads it back unchanged."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "facilities.csv", FACILITY_COLUMNS,
               [(c.id, c.name, c.type.value, repr(c.position[0]), repr(c.position[1]), c.num_bus_routes)
                for c in bundle.facilities])
    _write_csv(out / "destinations.csv", DESTINATION_COLUMNS,
               [(d.id, d.name, repr(d.position[0]), repr(d.position[1])) for d in bundle.destinations])
    _write_csv(out / "alt_nodes.csv", ALT_NODE_COLUMNS,
               [(n.id, n.kind.value, repr(n.position[0]), repr(n.position[1])) for n in bundle.alt_nodes])
    _write_csv(out / "transport_nodes.csv", TRANSPORT_NODE_COLUMNS,
               [(n.id, n.mode.value, repr(n.position[0]), repr(n.position[1])) for n in bundle.transport_nodes])
    _write_csv(out / "travel_times.csv", TRAVEL_TIME_COLUMNS,
               [(r.dest_id, r.node_id, repr(r.minutes)) for r in bundle.travel_times])
    _write_csv(out / "od.csv", OD_COLUMNS,
               [(r.dest_id, r.node_id, r.timeframe.value, repr(r.volume)) for r in bundle.od_records])
    write_constraints(out / "constraints.geojson", bundle.polygons)
    files = {"facilities": "facilities.csv", "destinations": "destinations.csv",
             "alt_nodes": "alt_nodes.csv", "transport_nodes": "transport_nodes.csv",
             "travel_times": "travel_times.csv", "od": "od.csv",
             "constraints": ["constraints.geojson"]}
    if bundle.dem is not None:
        write_ascii_grid(out / "dem.asc", bundle.dem)
        files["dem"] = "dem.asc"
    manifest = {"name": bundle.name, "grid": bundle.grid, "files": files,
                "parameters": bundle.parameters, "travel_time_provider": bundle.provider}
    path = out / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
