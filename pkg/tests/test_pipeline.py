import csv
import json

import pytest

from vertisite.cli import main
from vertisite.grid import PolygonSet
from vertisite.ingest import ScenarioBundle, dump_scenario, load_scenario
from vertisite.pipeline import RunConfig, run_pipeline
from vertisite.report import RANKING_COLUMNS, emit_reports
from vertisite.synthetic import synthetic_bundle

from reference_values import candidate_id

OUTPUTS = ("ranking.csv", "destinations.csv", "quadrants.csv", "coverage.geojson",
           "selected_cells.geojson", "quadrant_plot.svg")


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def case_out(tmp_path_factory):
    out = tmp_path_factory.mktemp("case")
    assert main(["run", "--manifest", "case-study", "--out", str(out), "--gamma-sweep",
                 "--emit-intermediate"]) == 0
    return out


def test_case_study_ranking_csv(case_out):
    rows = read_csv(case_out / "ranking.csv")
    assert rows[0]["name"] == "E.Gunpo T" and rows[0]["display_score"] == "153.04"
    assert len(rows) == 54
    assert [r["candidate_id"] for r in rows] == [candidate_id(k) for k in range(1, 55)]
    assert tuple(rows[0]) == RANKING_COLUMNS


def test_case_study_quadrants_csv(case_out):
    rows = {r["name"]: r["quadrant"] for r in read_csv(case_out / "quadrants.csv")}
    assert len(rows) == 10
    assert rows["Mado T"] == "II"


def test_case_study_outputs_present(case_out):
    for name in OUTPUTS + ("run.json", "gamma_sweep.csv"):
        assert (case_out / name).stat().st_size > 0
    svg = (case_out / "quadrant_plot.svg").read_text()
    assert svg.lstrip().startswith("<?xml") and "<svg" in svg
    run = json.loads((case_out / "run.json").read_text())
    assert run["stage_counts"]["facilities_final"] == 54
    assert set(run["files"]) >= set(OUTPUTS)


def test_case_study_intermediate(case_out):
    inter = case_out / "intermediate"
    fac = read_csv(inter / "facility_filter.csv")
    reasons = {r["reason"] for r in fac if r["status"] == "EXCLUDED"}
    assert reasons == {"CONSTRAINED", "NO_ALTERNATIVE"}
    dest = read_csv(inter / "destination_filter.csv")
    assert sorted(r["id"] for r in dest if r["status"] == "KEPT") == list("ABCDE")
    cov = read_csv(inter / "coverage.csv")
    assert len(cov) == 54 * 5
    assert (inter / "constraint_sum.asc").read_text().startswith("ncols")


def test_gamma_sweep_table(case_out):
    rows = read_csv(case_out / "gamma_sweep.csv")
    assert rows and all(0 < float(r["gamma"]) < 1 for r in rows)
    assert [float(r["gamma"]) for r in rows] == sorted(float(r["gamma"]) for r in rows)


def test_coverage_geojson_lines(case_out):
    doc = json.loads((case_out / "coverage.geojson").read_text())
    feats = doc["features"]
    ranking = read_csv(case_out / "ranking.csv")
    reached = {(r["candidate_id"], d) for r in ranking for d in r["destinations"].split(";") if d}
    assert {(f["properties"]["candidate_id"], f["properties"]["destination_id"]) for f in feats} == reached
    assert all(f["geometry"]["type"] == "LineString" for f in feats)
    assert all(f["properties"]["length_m"] <= 30_000 for f in feats)


def test_byte_identical_reruns(tmp_path):
    for name in ("a", "b"):
        assert main(["run", "--manifest", "case-study", "--out", str(tmp_path / name)]) == 0
    for name in OUTPUTS:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
    ra = json.loads((tmp_path / "a" / "run.json").read_text())
    rb = json.loads((tmp_path / "b" / "run.json").read_text())
    ra.pop("generated_at"), rb.pop("generated_at")
    assert ra == rb


def test_gamma_from_manifest_or_flag_hashes_equal(tmp_path):
    bundle = load_scenario("case-study")
    bundle.parameters["gamma"] = 0.3
    dump_scenario(bundle, tmp_path / "m")
    assert main(["run", "--manifest", str(tmp_path / "m"), "--out", str(tmp_path / "o1")]) == 0
    assert main(["run", "--manifest", "case-study", "--gamma", "0.3", "--out", str(tmp_path / "o2")]) == 0
    h1 = json.loads((tmp_path / "o1" / "run.json").read_text())["content_hash"]
    h2 = json.loads((tmp_path / "o2" / "run.json").read_text())["content_hash"]
    assert h1 == h2


def test_flag_overrides_manifest():
    cfg = RunConfig.resolve({"gamma": 0.2, "top_k": 5}, {"gamma": 0.9, "top_k": None})
    assert cfg.gamma == 0.9 and cfg.top_k == 5


def test_stage_counts_never_increase():
    for seed in range(3):
        b = synthetic_bundle(seed, size=80, n_facilities=40, n_destinations=6)
        c = run_pipeline(b).stage_counts
        assert (c["facilities_in"] >= c["facilities_after_constraints"]
                >= c["facilities_after_alternatives"] >= c["facilities_final"])
        assert c["destinations_in"] >= c["destinations_after_constraints"] >= c["destinations_after_alternatives"]


def test_empty_report_writes_headers_only(tmp_path):
    empty = ScenarioBundle("empty", {"origin_x": 0.0, "origin_y": 0.0, "width_m": 1000.0, "height_m": 1000.0},
                           [], [], PolygonSet(()), [], [], [], [])
    report = run_pipeline(empty)
    emit_reports(report, tmp_path, timestamp="t")
    for name in ("ranking.csv", "destinations.csv", "quadrants.csv"):
        lines = (tmp_path / name).read_text().splitlines()
        assert len(lines) == 1
    assert json.loads((tmp_path / "coverage.geojson").read_text())["features"] == []


def test_validate_command(capsys):
    assert main(["validate", "--manifest", "case-study"]) == 0
    assert "OK" in capsys.readouterr().out


def test_exit_code_validation(tmp_path, capsys):
    assert main(["validate", "--manifest", str(tmp_path / "missing.json")]) == 2
    assert main(["run", "--manifest", "case-study", "--gamma", "2", "--out", str(tmp_path)]) == 2
    assert "gamma" in capsys.readouterr().err


def test_exit_code_runtime(tmp_path, monkeypatch):
    monkeypatch.setenv("VERTISITE_API_KEY", "k")
    bundle = load_scenario("case-study")
    bundle.provider = {"kind": "http", "endpoint": "http://127.0.0.1:9/none", "backoff_s": 0.0,
                       "max_attempts": 1, "timeout_s": 2}
    dump_scenario(bundle, tmp_path / "m")
    assert main(["run", "--manifest", str(tmp_path / "m"), "--out", str(tmp_path / "o")]) == 3


def test_unwritable_output_is_runtime_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["run", "--manifest", "case-study", "--out", str(blocker / "sub")]) == 3


def test_timeframe_filter_changes_od(tmp_path):
    full = run_pipeline(load_scenario("case-study"))
    morning = run_pipeline(load_scenario("case-study"),
                           RunConfig.resolve(None, {"timeframes": ["MORNING_PEAK"]}))
    assert morning.destination_scores["A"].raw_od < full.destination_scores["A"].raw_od
    assert morning.destination_scores["D"].raw_od == 44.0


def test_gen_synthetic_command(tmp_path):
    assert main(["gen-synthetic", "--seed", "2", "--out", str(tmp_path), "--size", "50",
                 "--facilities", "10", "--destinations", "3"]) == 0
    b = load_scenario(tmp_path)
    assert len(b.facilities) == 10 and len(b.destinations) == 3
