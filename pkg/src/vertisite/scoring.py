"""Destination desirability and candidate transfer-effectiveness scores."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from decimal import ROUND_FLOOR, Decimal
from typing import Iterable, Mapping, Optional, Sequence

from .models import Destination, Mode, ODRecord, Timeframe, TransportNode

DEFAULT_GAMMA = 0.5
DEFAULT_MODES = (Mode.BUS, Mode.RAIL, Mode.SUBWAY)


class ScoringError(ValueError):
    pass


class MissingRecordsError(ScoringError):
    def __init__(self, gaps):
        self.gaps = sorted(gaps)
        super().__init__("missing records for (dest, node, table): "
                         + ", ".join(f"({d}, {n}, {t})" for d, n, t in self.gaps))


@dataclass(frozen=True)
class DestinationScore:
    destination_id: str
    raw_time: float
    raw_od: float
    scaled_time: float
    scaled_od: float
    score: float
    gamma: float


@dataclass(frozen=True)
class ScoredCandidate:
    candidate_id: str
    num_bus: int
    coverage: tuple[str, ...]
    sum_score: float
    score_v: float
    name: str = ""

    @property
    def display_score(self) -> float:
        return truncate2(self.score_v)


def truncate2(value: float) -> float:
    """Floor to two decimals, working on the shortest decimal form of ``value``."""
    return float(Decimal(repr(float(value))).quantize(Decimal("0.01"), rounding=ROUND_FLOOR))


def check_gamma(gamma: float) -> float:
    if not (0.0 <= gamma <= 1.0):
        raise ScoringError(f"gamma must lie in [0, 1], got {gamma!r}")
    return float(gamma)


def nearest_nodes(dest: Destination, nodes: Sequence[TransportNode],
                  modes: Sequence[Mode] = DEFAULT_MODES) -> list[TransportNode]:
    """The Euclidean-nearest node of each mode (ties go to the smaller id)."""
    picked = []
    dx, dy = dest.position
    for mode in modes:
        pool = [n for n in nodes if n.mode == mode]
        if not pool:
            raise ScoringError(f"no transport node of mode {mode.value} for destination {dest.id!r}")
        picked.append(min(pool, key=lambda n: (math.hypot(n.position[0] - dx, n.position[1] - dy), n.id)))
    return picked


def aggregate_destination(dest: Destination, nodes: Sequence[TransportNode], times,
                          ods: Iterable[ODRecord],
                          timeframes: Optional[Iterable[Timeframe]] = None,
                          modes: Sequence[Mode] = DEFAULT_MODES) -> tuple[float, float]:
    """Total access time and total OD volume over the destination's nearest nodes.

    ``times`` is anything with ``query(dest_id, node_id) -> minutes`` or a
    mapping keyed by ``(dest_id, node_id)``. OD volumes are summed over the
    selected timeframes (all of them by default).
    """
    chosen = nearest_nodes(dest, nodes, modes)
    tf = set(Timeframe) if timeframes is None else set(timeframes)
    od_by_pair: dict[tuple[str, str], list[ODRecord]] = {}
    for rec in ods:
        if rec.dest_id == dest.id:
            od_by_pair.setdefault((rec.dest_id, rec.node_id), []).append(rec)

    gaps = []
    raw_time = 0.0
    raw_od = 0.0
    for node in chosen:
        key = (dest.id, node.id)
        try:
            raw_time += times[key] if isinstance(times, Mapping) else times.query(*key)
        except KeyError:
            gaps.append((dest.id, node.id, "travel_time"))
        recs = od_by_pair.get(key)
        if not recs:
            gaps.append((dest.id, node.id, "od"))
            continue
        raw_od += math.fsum(r.volume for r in recs if r.timeframe in tf)
    if gaps:
        raise MissingRecordsError(gaps)
    return raw_time, raw_od


def minmax_scale(values: Sequence[float]) -> list[float]:
    """Scale to [0, 1]; a constant input maps to all zeros."""
    vals = [float(v) for v in values]
    if not vals:
        raise ScoringError("cannot min-max scale an empty sequence")
    lo, hi = min(vals), max(vals)
    if hi == lo:
        return [0.0] * len(vals)
    span = hi - lo
    return [(v - lo) / span for v in vals]


def destination_score(scaled_time: float, scaled_od: float, gamma: float = DEFAULT_GAMMA) -> float:
    gamma = check_gamma(gamma)
    return gamma * scaled_time + (1.0 - gamma) * scaled_od


def score_destinations(raw: Mapping[str, tuple[float, float]],
                       gamma: float = DEFAULT_GAMMA) -> dict[str, DestinationScore]:
    """Scale raw (time, od) totals across the destination group and combine them."""
    gamma = check_gamma(gamma)
    ids = sorted(raw)
    if not ids:
        return {}
    st = minmax_scale([raw[i][0] for i in ids])
    so = minmax_scale([raw[i][1] for i in ids])
    return {
        i: DestinationScore(i, raw[i][0], raw[i][1], t, o, destination_score(t, o, gamma), gamma)
        for i, t, o in zip(ids, st, so)
    }


def transfer_score(candidate, coverage: Iterable[str], dest_scores: Mapping[str, float]) -> ScoredCandidate:
    """Bus-route count times the summed desirability of the covered destinations."""
    cov = tuple(sorted(coverage))
    missing = [d for d in cov if d not in dest_scores]
    if missing:
        raise ScoringError(f"candidate {candidate.id!r}: no score for destinations {missing}")
    vals = [dest_scores[d] for d in cov]
    vals = [v.score if isinstance(v, DestinationScore) else float(v) for v in vals]
    total = math.fsum(vals)
    return ScoredCandidate(candidate.id, int(candidate.num_bus_routes), cov, total,
                           candidate.num_bus_routes * total, getattr(candidate, "name", ""))


def rank_candidates(scored: Iterable[ScoredCandidate]) -> list[ScoredCandidate]:
    """Descending score, then descending bus count, then ascending id."""
    return sorted(scored, key=lambda s: (-s.score_v, -s.num_bus, s.candidate_id))


@dataclass
class QuadrantSplit:
    top_k: int
    mean_num_bus: float
    mean_sum_score: float
    assignments: dict[str, str] = field(default_factory=dict)


def quadrant_of(x: float, y: float, mean_x: float, mean_y: float) -> str:
    if x >= mean_x:
        return "I" if y >= mean_y else "IV"
    return "II" if y >= mean_y else "III"


def classify_quadrants(final: Sequence[ScoredCandidate], top_k: int = 10) -> QuadrantSplit:
    """Quadrants of the top ``top_k`` candidates split at their bus-count and score means."""
    if top_k < 2:
        raise ScoringError(f"top_k must be at least 2, got {top_k}")
    ranked = rank_candidates(final)
    if top_k > len(ranked):
        warnings.warn(f"top_k={top_k} exceeds the {len(ranked)} ranked candidates; clamping",
                      stacklevel=2)
    top = ranked[:top_k]
    if not top:
        return QuadrantSplit(0, math.nan, math.nan)
    mx = math.fsum(s.num_bus for s in top) / len(top)
    my = math.fsum(s.sum_score for s in top) / len(top)
    split = QuadrantSplit(len(top), mx, my)
    for s in top:
        split.assignments[s.candidate_id] = quadrant_of(s.num_bus, s.sum_score, mx, my)
    return split


def gamma_crossovers(dest_scores: Mapping[str, DestinationScore]) -> list[dict]:
    """Gamma values in (0, 1) where two destinations swap order.

    Each score is linear in gamma with slope ``scaled_time - scaled_od``, so a
    pair swaps at most once.
    """
    rows = []
    ids = sorted(dest_scores)
    for a_i, a in enumerate(ids):
        for b in ids[a_i + 1:]:
            da, db = dest_scores[a], dest_scores[b]
            slope = (da.scaled_time - da.scaled_od) - (db.scaled_time - db.scaled_od)
            offset = da.scaled_od - db.scaled_od
            if slope == 0:
                continue
            g = -offset / slope
            if 0.0 < g < 1.0:
                below = a if offset > 0 else b
                above = a if offset + slope > 0 else b
                rows.append({"destination_a": a, "destination_b": b, "gamma": g,
                             "leader_below": below, "leader_above": above})
    rows.sort(key=lambda r: (r["gamma"], r["destination_a"], r["destination_b"]))
    return rows
