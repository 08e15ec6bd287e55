"""End-to-end site selection: constraint filter, buffer filter, coverage, scoring, ranking."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Any, Optional

from .altfilter import Exclusion, filter_alternatives
from .grid import BinaryLayer, ConstraintStack, GridSpec, build_constraints, rasterize_points, select
from .ingest import PARAMETER_DEFAULTS, ScenarioBundle, validate_parameters, _Issues
from .models import Timeframe
from .providers import FileTravelTimeProvider, HttpTravelTimeProvider
from .reachability import CoverageSet, NavGrid, compute_coverage
from .scoring import (DestinationScore, QuadrantSplit, ScoredCandidate, aggregate_destination,
                      classify_quadrants, gamma_crossovers, rank_candidates, score_destinations,
                      transfer_score)

log = logging.getLogger(__name__)


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: Exception):
        self.stage = stage
        self.cause = exc
        super().__init__(f"[{stage}] {exc}")


@dataclass(frozen=True)
class RunConfig:
    gamma: float = 0.5
    buffer_m: float = 450.0
    range_km: float = 30.0
    cell_m: float = 100.0
    dem_threshold_m: float = 300.0
    timeframes: tuple[str, ...] = tuple(t.value for t in Timeframe)
    top_k: int = 10

    @classmethod
    def resolve(cls, manifest_params: Optional[dict] = None, overrides: Optional[dict] = None) -> "RunConfig":
        """Defaults, then manifest parameters, then explicit overrides (``None`` values ignored)."""
        merged = dict(PARAMETER_DEFAULTS)
        merged.update(manifest_params or {})
        merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
        issues = _Issues()
        params = validate_parameters(merged, issues, "config")
        if issues:
            from .ingest import ScenarioError
            raise ScenarioError(issues)
        return cls(gamma=float(params["gamma"]), buffer_m=float(params["buffer_m"]),
                   range_km=float(params["range_km"]), cell_m=float(params["cell_m"]),
                   dem_threshold_m=float(params["dem_threshold_m"]),
                   timeframes=tuple(params["timeframes"]), top_k=int(params["top_k"]))

    def as_dict(self) -> dict:
        d = asdict(self)
        d["timeframes"] = list(self.timeframes)
        return d


@dataclass
class RunReport:
    scenario: str
    config: RunConfig
    spec: GridSpec
    stage_counts: dict[str, int]
    facility_exclusions: dict[str, str]
    destination_exclusions: dict[str, str]
    destination_scores: dict[str, DestinationScore]
    ranking: list[ScoredCandidate]
    coverage: CoverageSet
    quadrants: QuadrantSplit
    constraints: ConstraintStack = field(repr=False)
    selected: BinaryLayer = field(repr=False)
    names: dict[str, str] = field(default_factory=dict)
    types: dict[str, str] = field(default_factory=dict)
    cell_members: dict[tuple[int, int], list[str]] = field(default_factory=dict)
    gamma_sweep: list[dict] = field(default_factory=list)
    content_hash: str = ""

    def content(self) -> dict[str, Any]:
        """Canonical, timestamp-free view of the results; the content hash is taken over this."""
        return {
            "scenario": self.scenario,
            "config": self.config.as_dict(),
            "grid": asdict(self.spec),
            "stage_counts": self.stage_counts,
            "facility_exclusions": dict(sorted(self.facility_exclusions.items())),
            "destination_exclusions": dict(sorted(self.destination_exclusions.items())),
            "destination_scores": [asdict(self.destination_scores[k]) for k in sorted(self.destination_scores)],
            "ranking": [{"candidate_id": s.candidate_id, "num_bus": s.num_bus,
                         "coverage": list(s.coverage), "sum_score": s.sum_score,
                         "score_v": s.score_v, "display_score": s.display_score}
                        for s in self.ranking],
            "coverage": {c: dict(sorted(d.items())) for c, d in sorted(self.coverage.reached.items())},
            "quadrants": {"top_k": self.quadrants.top_k,
                          "mean_num_bus": _num(self.quadrants.mean_num_bus),
                          "mean_sum_score": _num(self.quadrants.mean_sum_score),
                          "assignments": dict(sorted(self.quadrants.assignments.items()))},
        }


def _num(v):
    return None if isinstance(v, float) and math.isnan(v) else v


def content_hash(content: dict) -> str:
    blob = json.dumps(content, sort_keys=True, separators=(",", ":"), allow_nan=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def build_grid_spec(bundle: ScenarioBundle, cell_m: float) -> GridSpec:
    g = bundle.grid
    return GridSpec.from_extent(g["origin_x"], g["origin_y"], g["width_m"], g["height_m"], cell_m)


def make_provider(bundle: ScenarioBundle):
    prov = bundle.provider or {"kind": "file"}
    if prov.get("kind", "file") == "file":
        return FileTravelTimeProvider(bundle.travel_times)
    kw = {k: prov[k] for k in ("max_attempts", "backoff_s", "timeout_s") if k in prov}
    return HttpTravelTimeProvider(prov["endpoint"], {d.id: d.position for d in bundle.destinations},
                                  {n.id: n.position for n in bundle.transport_nodes},
                                  prov.get("api_key_env", "VERTISITE_API_KEY"), **kw)


class _stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        log.info("stage %s", self.name)

    def __exit__(self, et, exc, tb):
        if exc is not None and not isinstance(exc, StageError) and isinstance(exc, Exception):
            raise StageError(self.name, exc) from exc
        return False


def run_pipeline(bundle: ScenarioBundle, config: Optional[RunConfig] = None, provider=None,
                 gamma_sweep: bool = False) -> RunReport:
    config = config or RunConfig.resolve(bundle.parameters)
    with _stage("grid"):
        spec = build_grid_spec(bundle, config.cell_m)
        constraints = build_constraints(spec, bundle.polygons, bundle.dem, config.dem_threshold_m)

    with _stage("constraint-filter"):
        fac_sel = select(rasterize_points(spec, [c.position for c in bundle.facilities]), constraints)
        dest_sel = select(rasterize_points(spec, [d.position for d in bundle.destinations]), constraints)

    with _stage("alternative-filter"):
        fac = filter_alternatives(bundle.facilities, fac_sel, bundle.alt_nodes, config.buffer_m)
        dest = filter_alternatives(bundle.destinations, dest_sel, bundle.alt_nodes, config.buffer_m)

    with _stage("coverage"):
        nav = NavGrid.from_constraints(constraints)
        coverage = compute_coverage(nav, fac.kept, dest.kept, config.range_km)

    with _stage("destination-scores"):
        provider = provider or make_provider(bundle)
        tfs = [Timeframe(t) for t in config.timeframes]
        raw = {d.id: aggregate_destination(d, bundle.transport_nodes, provider, bundle.od_records, tfs)
               for d in dest.kept}
        dscores = score_destinations(raw, config.gamma)

    with _stage("transfer-scores"):
        scored = [transfer_score(c, coverage.destinations(c.id), dscores) for c in fac.kept]
        ranking = rank_candidates(scored)
        with warnings.catch_warnings():
            # small candidate lists are clamped on purpose here
            warnings.simplefilter("ignore")
            quadrants = classify_quadrants(ranking, config.top_k)

    def count(result, reason):
        return sum(1 for r in result.excluded.values() if r is reason)

    n_fac, n_dest = len(bundle.facilities), len(bundle.destinations)
    stage_counts = {
        "facilities_in": n_fac,
        "facilities_after_constraints": n_fac - count(fac, Exclusion.CONSTRAINED),
        "facilities_after_alternatives": len(fac.kept),
        "facilities_final": len(ranking),
        "destinations_in": n_dest,
        "destinations_after_constraints": n_dest - count(dest, Exclusion.CONSTRAINED),
        "destinations_after_alternatives": len(dest.kept),
    }
    final_cells = rasterize_points(spec, [c.position for c in fac.kept])
    members: dict[tuple[int, int], list[str]] = {}
    for c in sorted(fac.kept, key=lambda c: c.id):
        members.setdefault(spec.cell_of(*c.position), []).append(c.id)
    report = RunReport(
        scenario=bundle.name, config=config, spec=spec, stage_counts=stage_counts,
        facility_exclusions={k: v.value for k, v in fac.excluded.items()},
        destination_exclusions={k: v.value for k, v in dest.excluded.items()},
        destination_scores=dscores, ranking=ranking, coverage=coverage, quadrants=quadrants,
        constraints=constraints, selected=final_cells,
        names={**{c.id: c.name for c in bundle.facilities}, **{d.id: d.name for d in bundle.destinations}},
        types={c.id: c.type.value for c in bundle.facilities},
        cell_members=members,
        gamma_sweep=gamma_crossovers(dscores) if gamma_sweep else [],
    )
    report.content_hash = content_hash(report.content())
    return report
