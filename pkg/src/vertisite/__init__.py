"""Highway-transfer vertiport site selection."""

from .grid import (CATEGORIES, BinaryLayer, ConstraintStack, DemRaster, GridSpec, Polygon, PolygonSet,
                   rasterize_dem, rasterize_points, rasterize_polygons, select, stack_constraints)
from .altfilter import SpatialIndex, filter_alternatives, radius_query
from .reachability import NavGrid, PathResult, PathStatus, compute_coverage, jps_shortest_path
from .scoring import (aggregate_destination, classify_quadrants, destination_score, minmax_scale,
                      rank_candidates, transfer_score)
from .ingest import ScenarioBundle, ScenarioError, load_scenario
from .pipeline import RunConfig, RunReport, run_pipeline

__version__ = "0.1.0"
