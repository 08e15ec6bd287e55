"""Write a RunReport to CSV, GeoJSON, JSON and an SVG quadrant plot."""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .ingest import write_ascii_grid  # noqa: E402
from .grid import DemRaster  # noqa: E402
from .pipeline import RunReport  # noqa: E402

RANKING_COLUMNS = ("rank", "candidate_id", "name", "type", "num_bus", "sum_score", "score_v",
                   "display_score", "destinations")
DESTINATION_COLUMNS = ("destination_id", "name", "raw_time", "scaled_time", "raw_od", "scaled_od",
                       "score", "gamma")
QUADRANT_COLUMNS = ("candidate_id", "name", "num_bus", "sum_score", "score_v", "quadrant")

_PLOT_RC = {
    "svg.hashsalt": "vertisite",
    "svg.fonttype": "path",
    "font.size": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


class ReportError(OSError):
    pass


def _csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")


def _center(spec, cell):
    x, y = spec.cell_center(*cell)
    return [x, y]


def coverage_geojson(report: RunReport) -> dict:
    spec = report.spec
    feats = []
    for (cid, did), res in sorted(report.coverage.results.items()):
        if res.status.value != "REACHED":
            continue
        pts = [_center(spec, c) for c in res.waypoints]
        if len(pts) == 1:
            pts = pts * 2
        feats.append({"type": "Feature",
                      "properties": {"candidate_id": cid, "destination_id": did, "length_m": res.length_m},
                      "geometry": {"type": "LineString", "coordinates": pts}})
    return {"type": "FeatureCollection", "features": feats}


def selected_cells_geojson(report: RunReport) -> dict:
    spec = report.spec
    feats = []
    for i, j in report.selected.nonzero_cells():
        x0 = spec.origin_x + j * spec.cell_size
        y0 = spec.origin_y + i * spec.cell_size
        x1, y1 = x0 + spec.cell_size, y0 + spec.cell_size
        feats.append({"type": "Feature",
                      "properties": {"i": i, "j": j, "candidate_ids": report.cell_members.get((i, j), [])},
                      "geometry": {"type": "Polygon",
                                   "coordinates": [[[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]]}})
    return {"type": "FeatureCollection", "features": feats}


def plot_quadrants(report: RunReport, path: Path):
    """Scatter of bus routes against summed desirability for the top-k candidates."""
    q = report.quadrants
    top = report.ranking[:q.top_k]
    with plt.rc_context(_PLOT_RC):
        fig, ax = plt.subplots(figsize=(6.4, 4.8))
        if top:
            xs = [s.num_bus for s in top]
            ys = [s.sum_score for s in top]
            colors = {"I": "tab:green", "II": "tab:blue", "III": "tab:gray", "IV": "tab:orange"}
            ax.scatter(xs, ys, c=[colors[q.assignments[s.candidate_id]] for s in top], zorder=3)
            for s in top:
                ax.annotate(report.names.get(s.candidate_id, s.candidate_id), (s.num_bus, s.sum_score),
                            textcoords="offset points", xytext=(4, 4), fontsize=7)
            ax.axvline(q.mean_num_bus, color="k", lw=0.8, ls="--")
            ax.axhline(q.mean_sum_score, color="k", lw=0.8, ls="--")
            for label, (hx, hy) in {"I": (0.97, 0.97), "II": (0.03, 0.97),
                                    "III": (0.03, 0.03), "IV": (0.97, 0.03)}.items():
                ax.text(hx, hy, label, transform=ax.transAxes, fontsize=12, alpha=0.5,
                        ha="right" if hx > 0.5 else "left", va="top" if hy > 0.5 else "bottom")
        ax.set_xlabel("bus routes through candidate")
        ax.set_ylabel("summed destination score")
        ax.set_title(f"Top {q.top_k} candidates")
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def _f(v):
    return repr(float(v))


def emit_reports(report: RunReport, outdir, emit_intermediate: bool = False,
                 timestamp: str | None = None) -> dict[str, Path]:
    """Write every report file into ``outdir`` and return them by name."""
    out = Path(outdir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        return _emit(report, out, emit_intermediate, timestamp)
    except OSError as exc:
        raise ReportError(f"writing reports to {out}: {exc}") from exc


def _emit(report: RunReport, out: Path, emit_intermediate: bool, timestamp):
    written = {}
    names, types = report.names, report.types

    p = out / "ranking.csv"
    _csv(p, RANKING_COLUMNS, [
        (k, s.candidate_id, names.get(s.candidate_id, ""), types.get(s.candidate_id, ""), s.num_bus,
         _f(s.sum_score), _f(s.score_v), f"{s.display_score:.2f}", ";".join(s.coverage))
        for k, s in enumerate(report.ranking, 1)])
    written["ranking.csv"] = p

    p = out / "destinations.csv"
    _csv(p, DESTINATION_COLUMNS, [
        (d.destination_id, names.get(d.destination_id, ""), _f(d.raw_time), _f(d.scaled_time),
         _f(d.raw_od), _f(d.scaled_od), _f(d.score), _f(d.gamma))
        for _, d in sorted(report.destination_scores.items())])
    written["destinations.csv"] = p

    p = out / "quadrants.csv"
    q = report.quadrants
    _csv(p, QUADRANT_COLUMNS, [
        (s.candidate_id, names.get(s.candidate_id, ""), s.num_bus, _f(s.sum_score), _f(s.score_v),
         q.assignments[s.candidate_id])
        for s in report.ranking[:q.top_k]])
    written["quadrants.csv"] = p

    for name, doc in (("coverage.geojson", coverage_geojson(report)),
                      ("selected_cells.geojson", selected_cells_geojson(report))):
        p = out / name
        p.write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")
        written[name] = p

    p = out / "quadrant_plot.svg"
    plot_quadrants(report, p)
    written["quadrant_plot.svg"] = p

    if report.gamma_sweep:
        p = out / "gamma_sweep.csv"
        cols = ("destination_a", "destination_b", "gamma", "leader_below", "leader_above")
        _csv(p, cols, [(r["destination_a"], r["destination_b"], _f(r["gamma"]),
                        r["leader_below"], r["leader_above"]) for r in report.gamma_sweep])
        written["gamma_sweep.csv"] = p

    if emit_intermediate:
        written.update(_emit_intermediate(report, out / "intermediate"))

    file_hashes = {name: hashlib.sha256(path.read_bytes()).hexdigest()
                   for name, path in sorted(written.items())}
    run = {
        "content_hash": report.content_hash,
        "files": file_hashes,
        "generated_at": timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        **report.content(),
    }
    p = out / "run.json"
    _json(p, run)
    written["run.json"] = p
    return written


def _emit_intermediate(report: RunReport, out: Path) -> dict[str, Path]:
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    spec = report.spec
    p = out / "constraint_sum.asc"
    write_ascii_grid(p, DemRaster(report.constraints.sum.astype(float), None,
                                  spec.origin_x, spec.origin_y, spec.cell_size))
    written["intermediate/constraint_sum.asc"] = p

    for name, excl, kept in (("facility_filter.csv", report.facility_exclusions,
                              [s.candidate_id for s in report.ranking]),
                             ("destination_filter.csv", report.destination_exclusions,
                              list(report.destination_scores))):
        rows = [(i, "KEPT", "") for i in kept] + [(i, "EXCLUDED", r) for i, r in excl.items()]
        p = out / name
        _csv(p, ("id", "status", "reason"), sorted(rows))
        written[f"intermediate/{name}"] = p

    p = out / "coverage.csv"
    _csv(p, ("candidate_id", "destination_id", "status", "length_m"), [
        (c, d, r.status.value, "" if r.length_m is None else _f(r.length_m))
        for (c, d), r in sorted(report.coverage.results.items())])
    written["intermediate/coverage.csv"] = p
    return written
