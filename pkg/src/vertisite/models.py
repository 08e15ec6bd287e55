"""Record types shared across the pipeline stages."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Tuple

Position = Tuple[float, float]


class FacilityType(str, Enum):
    TOLL_GATE = "TOLL_GATE"
    REST_AREA = "REST_AREA"
    EX_HUB = "EX_HUB"


class AltKind(str, Enum):
    TAXI_ROAD = "TAXI_ROAD"
    SUBWAY = "SUBWAY"


class Mode(str, Enum):
    BUS = "BUS"
    RAIL = "RAIL"
    SUBWAY = "SUBWAY"


class Timeframe(str, Enum):
    MORNING_PEAK = "MORNING_PEAK"
    EVENING_PEAK = "EVENING_PEAK"
    OFF_PEAK = "OFF_PEAK"


@dataclass(frozen=True)
class Candidate:
    """A highway facility considered as a transfer vertiport site."""

    id: str
    name: str
    type: FacilityType
    position: Position
    num_bus_routes: int = 0


@dataclass(frozen=True)
class Destination:
    id: str
    name: str
    position: Position


@dataclass(frozen=True)
class AltNode:
    id: str
    kind: AltKind
    position: Position


@dataclass(frozen=True)
class TransportNode:
    id: str
    mode: Mode
    position: Position


@dataclass(frozen=True)
class TravelTimeRecord:
    dest_id: str
    node_id: str
    minutes: float


@dataclass(frozen=True)
class ODRecord:
    dest_id: str
    node_id: str
    timeframe: Timeframe
    volume: float
