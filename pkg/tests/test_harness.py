import csv
import io
import json

import numpy as np
import pytest

from voigrid.errors import InvalidParameterError, NormalizationError, SamplingError
from voigrid.grid import Cell, OccupancyGrid
from voigrid.harness import (
    SweepSpec,
    WorldSpec,
    emit_tradeoff,
    metrics_csv_text,
    run_sweep,
    run_trials,
    sample_endpoints,
    summary_dict,
    tradeoff_csv_text,
    tradeoff_points,
)
from voigrid.planning import AgentKind, shortest_path

TERRAIN16 = WorldSpec("terrain", size=16, seed=2)


class TestWorldSpec:
    def test_bad_kind_rejected(self):
        with pytest.raises(InvalidParameterError):
            WorldSpec("perlin")

    def test_file_needs_path(self):
        with pytest.raises(InvalidParameterError):
            WorldSpec("file")

    def test_build_deterministic_with_offset(self):
        a = TERRAIN16.build(seed_offset=3)
        b = WorldSpec("terrain", size=16, seed=5).build()
        assert np.array_equal(a.occupancy, b.occupancy)

    def test_file_world_cannot_vary(self):
        spec = WorldSpec("file", path="whatever.map")
        with pytest.raises(InvalidParameterError):
            spec.build(seed_offset=1)


class TestSweepSpecValidation:
    def test_frameworks_required_and_known(self):
        with pytest.raises(InvalidParameterError):
            SweepSpec(TERRAIN16, frameworks=())
        with pytest.raises(InvalidParameterError):
            SweepSpec(TERRAIN16, frameworks=("UI", "MILP9"))
        with pytest.raises(InvalidParameterError):
            SweepSpec(TERRAIN16, frameworks=("UI", "UI"))

    def test_counts_and_bandwidths(self):
        with pytest.raises(InvalidParameterError):
            SweepSpec(TERRAIN16, frameworks=("UI",), trials=0)
        with pytest.raises(InvalidParameterError):
            SweepSpec(TERRAIN16, frameworks=("UI",), bandwidths=())
        with pytest.raises(InvalidParameterError):
            SweepSpec(TERRAIN16, frameworks=("UI",), bandwidths=(9, 0))
        with pytest.raises(InvalidParameterError):
            SweepSpec(TERRAIN16, frameworks=("UI",), bandwidths=(9, 9))
        with pytest.raises(InvalidParameterError):
            SweepSpec(TERRAIN16, frameworks=("UI",), seekers=0)

    def test_endpoint_count_must_match_seekers(self):
        with pytest.raises(InvalidParameterError):
            SweepSpec(
                TERRAIN16,
                frameworks=("UI",),
                seekers=3,
                endpoints=((Cell(1, 1), Cell(2, 2)),),
            )

    def test_override_keys_checked(self):
        with pytest.raises(InvalidParameterError):
            SweepSpec(TERRAIN16, frameworks=("UI",), overrides={"bandwidth": 9})
        with pytest.raises(InvalidParameterError):
            SweepSpec(TERRAIN16, frameworks=("UI",), overrides={"windspeed": 3})
        SweepSpec(TERRAIN16, frameworks=("UI",), overrides={"m": 4, "max_steps": 50})


class TestSampleEndpoints:
    def test_deterministic_and_feasible(self):
        world = TERRAIN16.build()
        a = sample_endpoints(world, 3, seed=11)
        b = sample_endpoints(world, 3, seed=11)
        assert a == b
        starts, goals = a
        for s, g in zip(starts, goals):
            assert s != g
            assert world.traversable(s) and world.traversable(g)
            assert shortest_path(world, AgentKind.SEEKER, s, g) is not None

    def test_seed_changes_draw(self):
        world = TERRAIN16.build()
        assert sample_endpoints(world, 3, seed=11) != sample_endpoints(world, 3, seed=12)

    def test_untraversable_world_raises(self):
        blocked = OccupancyGrid.world(np.full((8, 8), 90, dtype=int))
        with pytest.raises(SamplingError):
            sample_endpoints(blocked, 1, seed=0)


class TestRunTrials:
    def test_single_trial_single_framework(self):
        rows = run_trials(SweepSpec(TERRAIN16, frameworks=("UI",), trials=1))
        assert len(rows) == 1
        assert rows[0].framework == "UI"
        assert rows[0].bandwidth is None
        assert rows[0].metrics.completed

    def test_repeat_is_identical(self):
        spec = SweepSpec(TERRAIN16, frameworks=("UI", "MILP1"), trials=2, seed_base=7)
        assert run_trials(spec) == run_trials(spec)

    def test_frameworks_paired_within_trial(self):
        spec = SweepSpec(TERRAIN16, frameworks=("UI", "FI1", "MILP1"), trials=2)
        rows = run_trials(spec)
        for n in (0, 1):
            trial = [r for r in rows if r.trial == n]
            assert {r.framework for r in trial} == {"UI", "FI1", "MILP1"}
            assert len({(r.starts, r.goals) for r in trial}) == 1

    def test_bandwidth_sweep_expands_milp_only(self):
        spec = SweepSpec(
            TERRAIN16, frameworks=("UI", "FI1", "MILP1"), bandwidths=(9, 27), trials=1
        )
        rows = run_trials(spec)
        assert [(r.framework, r.bandwidth) for r in rows] == [
            ("UI", None),
            ("FI1", None),
            ("MILP1", 9),
            ("MILP1", 27),
        ]

    def test_explicit_endpoints_pin_every_trial(self):
        world = TERRAIN16.build()
        starts, goals = sample_endpoints(world, 2, seed=5)
        spec = SweepSpec(
            TERRAIN16,
            frameworks=("UI",),
            trials=2,
            seekers=2,
            endpoints=tuple(zip(starts, goals)),
        )
        rows = run_trials(spec)
        assert all(r.starts == starts and r.goals == goals for r in rows)
        # same world, same endpoints: both trials are the same episode
        assert rows[0].metrics.nav_costs == rows[1].metrics.nav_costs

    def test_vary_map_changes_world_per_trial(self):
        spec = SweepSpec(
            TERRAIN16, frameworks=("UI",), trials=2, vary_map=True, seed_base=3
        )
        rows = run_trials(spec)
        fixed = run_trials(
            SweepSpec(WorldSpec("terrain", size=16, seed=3), frameworks=("UI",), trials=1, seed_base=4)
        )
        # trial 1 of the varying sweep equals a fresh run on the offset map
        assert rows[1].metrics.nav_costs == fixed[0].metrics.nav_costs

    def test_parallel_equals_serial(self):
        spec = SweepSpec(TERRAIN16, frameworks=("UI", "MILP1"), trials=2)
        assert run_trials(spec, jobs=2) == run_trials(spec, jobs=1)

    def test_bad_jobs_rejected(self):
        with pytest.raises(InvalidParameterError):
            run_trials(SweepSpec(TERRAIN16, frameworks=("UI",), trials=1), jobs=0)


@pytest.fixture(scope="module")
def rows():
    spec = SweepSpec(
        TERRAIN16, frameworks=("UI", "FI1", "MILP1"), bandwidths=(9, 27), trials=3
    )
    return run_trials(spec)


class TestTradeoff:
    def test_reference_points(self, rows):
        points = {(p.framework, p.bandwidth): p for p in tradeoff_points(rows)}
        ui = points[("UI", None)]
        assert (ui.norm_data, ui.norm_cost) == (0.0, 1.0)
        assert points[("FI1", None)].norm_data == 1.0
        for b in (9, 27):
            assert 0.0 < points[("MILP1", b)].norm_data < 1.0

    def test_row_accounting(self, rows):
        points = tradeoff_points(rows)
        assert [p.framework for p in points] == ["FI1", "UI", "MILP1", "MILP1"]
        assert all(p.trials == 3 for p in points)

    def test_missing_references_raise(self, rows):
        milp_only = [r for r in rows if r.framework == "MILP1"]
        with pytest.raises(NormalizationError):
            tradeoff_points(milp_only)
        no_fi = [r for r in rows if r.framework != "FI1"]
        with pytest.raises(NormalizationError):
            tradeoff_points(no_fi)
        no_ui = [r for r in rows if r.framework != "UI"]
        with pytest.raises(NormalizationError):
            tradeoff_points(no_ui)

    def test_csv_round_trip_exact(self, rows, tmp_path):
        points = emit_tradeoff(rows, tmp_path / "tradeoff.csv")
        reader = csv.DictReader(io.StringIO((tmp_path / "tradeoff.csv").read_text()))
        for p, rec in zip(points, reader, strict=True):
            assert rec["framework"] == p.framework
            assert rec["B"] == ("" if p.bandwidth is None else str(p.bandwidth))
            assert float(rec["norm_data"]) == p.norm_data
            assert float(rec["norm_cost"]) == p.norm_cost
            assert float(rec["raw_data"]) == p.raw_data
            assert float(rec["raw_cost"]) == p.raw_cost

    def test_metrics_csv_shape(self, rows):
        lines = metrics_csv_text(rows).splitlines()
        assert lines[0] == "framework,B,trial,seed,steps,completed,total_nav_cost,data_sent"
        assert len(lines) == 1 + len(rows)

    def test_summary_groups(self, rows):
        summary = summary_dict(rows)
        by_key = {(g["framework"], g["bandwidth"]): g for g in summary["groups"]}
        assert set(by_key) == {("UI", None), ("FI1", None), ("MILP1", 9), ("MILP1", 27)}
        for g in summary["groups"]:
            assert g["trials"] == 3
            assert g["completed"] == 3
            assert g["std_nav_cost"] >= 0.0


class TestRunSweep:
    def test_writes_all_artifacts(self, tmp_path):
        spec = SweepSpec(TERRAIN16, frameworks=("UI", "FI1", "MILP1"), trials=1)
        run_sweep(spec, tmp_path / "out")
        metrics = (tmp_path / "out" / "metrics.csv").read_text()
        tradeoff = (tmp_path / "out" / "tradeoff.csv").read_text()
        summary = json.loads((tmp_path / "out" / "summary.json").read_text())
        assert metrics.startswith("framework,")
        assert tradeoff.startswith("framework,")
        assert {g["framework"] for g in summary["groups"]} == {"UI", "FI1", "MILP1"}

    def test_tradeoff_skipped_without_references(self, tmp_path):
        spec = SweepSpec(TERRAIN16, frameworks=("MILP1",), trials=1)
        run_sweep(spec, tmp_path / "out")
        assert (tmp_path / "out" / "metrics.csv").exists()
        assert not (tmp_path / "out" / "tradeoff.csv").exists()

    def test_reproducible_bytes(self, tmp_path):
        spec = SweepSpec(TERRAIN16, frameworks=("UI", "FI0", "MILP0"), trials=2)
        run_sweep(spec, tmp_path / "a")
        run_sweep(spec, tmp_path / "b")
        for name in ("metrics.csv", "tradeoff.csv", "summary.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
