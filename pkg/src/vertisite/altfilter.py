"""Buffer filter: keep sites that have a taxi road or subway station nearby."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .grid import BinaryLayer, GridError
from .models import AltNode, Position

DEFAULT_BUFFER_M = 450.0


class Exclusion(str, Enum):
    CONSTRAINED = "CONSTRAINED"
    NO_ALTERNATIVE = "NO_ALTERNATIVE"


class SpatialIndex:
    """Uniform bucket index; bucket side defaults to the expected query radius."""

    def __init__(self, nodes: Iterable[AltNode], bucket_m: float = DEFAULT_BUFFER_M):
        if not bucket_m > 0:
            raise ValueError(f"bucket size must be positive, got {bucket_m}")
        self.bucket_m = float(bucket_m)
        self._buckets: dict[tuple[int, int], list[AltNode]] = defaultdict(list)
        self._size = 0
        for node in nodes:
            x, y = node.position
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ValueError(f"alt node {node.id!r} has non-finite position")
            self._buckets[self._key(x, y)].append(node)
            self._size += 1

    def __len__(self):
        return self._size

    def _key(self, x, y):
        return (math.floor(x / self.bucket_m), math.floor(y / self.bucket_m))

    def radius_query(self, center: Position, radius_m: float) -> list[AltNode]:
        """All nodes within the closed ball, sorted by id."""
        if not radius_m > 0:
            raise ValueError(f"radius must be positive, got {radius_m}")
        cx, cy = center
        kx0, ky0 = self._key(cx - radius_m, cy - radius_m)
        kx1, ky1 = self._key(cx + radius_m, cy + radius_m)
        found = []
        r2 = radius_m * radius_m
        for kx in range(kx0, kx1 + 1):
            for ky in range(ky0, ky1 + 1):
                for node in self._buckets.get((kx, ky), ()):
                    dx, dy = node.position[0] - cx, node.position[1] - cy
                    if dx * dx + dy * dy <= r2:
                        found.append(node)
        found.sort(key=lambda n: n.id)
        return found


def radius_query(index: SpatialIndex, center: Position, radius_m: float) -> list[AltNode]:
    return index.radius_query(center, radius_m)


@dataclass
class FilterResult:
    kept: list = field(default_factory=list)
    excluded: dict[str, Exclusion] = field(default_factory=dict)


def filter_alternatives(sites: Sequence, selected: BinaryLayer, alt_nodes: Sequence[AltNode],
                        radius_m: float = DEFAULT_BUFFER_M) -> FilterResult:
    """Split ``sites`` (candidates or destinations) into survivors and exclusions.

    A site survives when its cell is set in ``selected`` and at least one
    alternative node lies within ``radius_m``. Input order is preserved.
    """
    if not radius_m > 0:
        raise ValueError(f"buffer radius must be positive, got {radius_m}")
    index = SpatialIndex(alt_nodes, bucket_m=radius_m)
    result = FilterResult()
    for site in sites:
        try:
            i, j = selected.spec.cell_of(*site.position)
        except GridError as exc:
            raise GridError(f"site {site.id!r}: {exc}") from None
        if not selected.cells[i, j]:
            result.excluded[site.id] = Exclusion.CONSTRAINED
        elif not index.radius_query(site.position, radius_m):
            result.excluded[site.id] = Exclusion.NO_ALTERNATIVE
        else:
            result.kept.append(site)
    return result
