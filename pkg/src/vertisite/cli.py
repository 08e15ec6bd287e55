"""Command line entry point: ``vertisite run | validate | gen-synthetic``."""

from __future__ import annotations

import argparse
import logging
import sys

from .ingest import ScenarioError, load_scenario
from .pipeline import RunConfig, StageError, run_pipeline
from .providers import ProviderError

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3

log = logging.getLogger("vertisite")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vertisite",
                                     description="Select and rank highway-transfer vertiport sites.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log pipeline stages")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the full pipeline and write reports")
    run.add_argument("--manifest", required=True,
                     help="manifest JSON, a directory holding manifest.json, or 'case-study'")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--gamma", type=float, help="travel-time weight in [0, 1] (default 0.5)")
    run.add_argument("--buffer-m", type=float, help="alternative-transport buffer radius (default 450)")
    run.add_argument("--range-km", type=float, help="one-way UAM range (default 30)")
    run.add_argument("--cell-m", type=float, help="grid cell size (default 100)")
    run.add_argument("--dem-threshold-m", type=float, help="terrain ceiling (default 300)")
    run.add_argument("--top-k", type=int, help="candidates in the quadrant plot (default 10)")
    run.add_argument("--timeframes", help="comma separated OD timeframes (default all)")
    run.add_argument("--emit-intermediate", action="store_true", help="also write per-stage outputs")
    run.add_argument("--gamma-sweep", action="store_true", help="write destination rank crossovers in gamma")
    run.add_argument("--timestamp", help=argparse.SUPPRESS)

    val = sub.add_parser("validate", help="load and validate a scenario")
    val.add_argument("--manifest", required=True)

    gen = sub.add_parser("gen-synthetic", help="write a random metropolitan scenario")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--out", required=True)
    gen.add_argument("--size", type=int, default=1500, help="grid cells per side (default 1500)")
    gen.add_argument("--cell-m", type=float, default=100.0)
    gen.add_argument("--facilities", type=int, default=150)
    gen.add_argument("--destinations", type=int, default=10)
    return parser


def _run(args) -> int:
    from .report import emit_reports

    bundle = load_scenario(args.manifest)
    overrides = {"gamma": args.gamma, "buffer_m": args.buffer_m, "range_km": args.range_km,
                 "cell_m": args.cell_m, "dem_threshold_m": args.dem_threshold_m, "top_k": args.top_k,
                 "timeframes": args.timeframes.split(",") if args.timeframes else None}
    config = RunConfig.resolve(bundle.parameters, overrides)
    report = run_pipeline(bundle, config, gamma_sweep=args.gamma_sweep)
    emit_reports(report, args.out, emit_intermediate=args.emit_intermediate, timestamp=args.timestamp)
    counts = report.stage_counts
    print(f"{bundle.name}: facilities {counts['facilities_in']} -> {counts['facilities_after_constraints']} "
          f"-> {counts['facilities_after_alternatives']}, destinations {counts['destinations_in']} -> "
          f"{counts['destinations_after_alternatives']}; {len(report.ranking)} ranked; "
          f"hash {report.content_hash[:12]}")
    for k, s in enumerate(report.ranking[:5], 1):
        print(f"  {k}. {report.names.get(s.candidate_id, s.candidate_id)}  {s.display_score:.2f}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return _run(args)
        if args.command == "validate":
            bundle = load_scenario(args.manifest)
            print(f"{bundle.name}: OK ({len(bundle.facilities)} facilities, "
                  f"{len(bundle.destinations)} destinations, {len(bundle.polygons.polygons)} constraint polygons)")
            return EXIT_OK
        if args.command == "gen-synthetic":
            from .synthetic import gen_synthetic

            path = gen_synthetic(args.seed, args.out, size=args.size, cell_m=args.cell_m,
                                 n_facilities=args.facilities, n_destinations=args.destinations)
            print(path)
            return EXIT_OK
    except ScenarioError as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except StageError as exc:
        if isinstance(exc.cause, ScenarioError):
            print(f"validation failed: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ProviderError, OSError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
