"""Paired multi-trial experiment runner.

A sweep runs every requested framework on the identical world and endpoints
within each trial, so framework comparisons are paired. Endpoints are drawn
uniformly from traversable cells with trial-indexed seeds; bandwidth-dependent
frameworks are repeated at each swept budget. Outputs are a flat metrics CSV,
a normalized trade-off CSV (data scaled by the full-information mean, cost
scaled by the uninformed mean), and a JSON summary of per-group means.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from statistics import fmean, pstdev

import numpy as np

from .engine import EpisodeMetrics, Framework, SimConfig, run_episode
from .errors import (
    InvalidParameterError,
    NormalizationError,
    SamplingError,
)
from .grid import Cell, OccupancyGrid, generate_maze, generate_terrain, load_map
from .planning import AgentKind, CostParams, shortest_path

_ENDPOINT_TRIES = 1000
# SimConfig fields the sweep machinery owns; user overrides may not touch them.
_RESERVED_OVERRIDES = frozenset({"starts", "goals", "bandwidth", "seed"})


@dataclass(frozen=True)
class WorldSpec:
    """Recipe for one world: a generator kind plus its parameters."""

    kind: str
    size: int = 32
    seed: int = 0
    path: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("terrain", "maze", "file"):
            raise InvalidParameterError(
                f"world kind must be terrain, maze or file, got {self.kind!r}"
            )
        if self.kind == "file" and not self.path:
            raise InvalidParameterError("world kind 'file' requires a path")

    def build(self, seed_offset: int = 0) -> OccupancyGrid:
        if self.kind == "terrain":
            return generate_terrain(self.size, self.seed + seed_offset)
        if self.kind == "maze":
            return generate_maze(self.size, self.seed + seed_offset)
        if seed_offset:
            raise InvalidParameterError("a map loaded from file cannot vary per trial")
        return load_map(self.path)


@dataclass(frozen=True)
class SweepSpec:
    """Full experiment description: world recipe, team size, frameworks,
    swept bandwidths, and trial seeding.

    ``vary_map`` regenerates the world per trial (generator seed + trial
    index); otherwise all trials share one map and only endpoints vary.
    Explicit ``endpoints`` pin every trial to the same start/goal pairs.
    """

    world: WorldSpec
    frameworks: tuple[str, ...]
    bandwidths: tuple[int, ...] = (27,)
    trials: int = 50
    seed_base: int = 0
    seekers: int = 3
    vary_map: bool = False
    endpoints: tuple[tuple[Cell, Cell], ...] | None = None
    overrides: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.frameworks:
            raise InvalidParameterError("at least one framework is required")
        for label in self.frameworks:
            Framework.from_label(label)
        if len(set(self.frameworks)) != len(self.frameworks):
            raise InvalidParameterError("framework list contains duplicates")
        if self.trials < 1:
            raise InvalidParameterError(f"trial count must be >= 1, got {self.trials}")
        if not self.bandwidths or any(b < 1 for b in self.bandwidths):
            raise InvalidParameterError("bandwidth list must be nonempty and positive")
        if len(set(self.bandwidths)) != len(self.bandwidths):
            raise InvalidParameterError("bandwidth list contains duplicates")
        if self.seekers < 1:
            raise InvalidParameterError(f"seeker count must be >= 1, got {self.seekers}")
        if self.endpoints is not None and len(self.endpoints) != self.seekers:
            raise InvalidParameterError(
                f"{len(self.endpoints)} endpoint pairs given for {self.seekers} seekers"
            )
        if self.vary_map and self.world.kind == "file":
            raise InvalidParameterError("a map loaded from file cannot vary per trial")
        bad = _RESERVED_OVERRIDES & set(self.overrides)
        if bad:
            raise InvalidParameterError(f"overrides may not set {sorted(bad)}")
        known = {f.name for f in dataclasses.fields(SimConfig)}
        unknown = set(self.overrides) - known
        if unknown:
            raise InvalidParameterError(f"unknown config overrides {sorted(unknown)}")


@dataclass(frozen=True)
class TrialRow:
    """One episode inside a sweep. ``bandwidth`` is None for frameworks that
    ignore the budget (UI and full-information); endpoints are recorded so the
    pairing of frameworks within a trial stays auditable."""

    framework: str
    bandwidth: int | None
    trial: int
    starts: tuple[Cell, ...]
    goals: tuple[Cell, ...]
    metrics: EpisodeMetrics

    def to_dict(self) -> dict:
        return {
            "framework": self.framework,
            "bandwidth": self.bandwidth,
            "trial": self.trial,
            "starts": [[c.x, c.y] for c in self.starts],
            "goals": [[c.x, c.y] for c in self.goals],
            "metrics": self.metrics.to_dict(),
        }


@dataclass(frozen=True)
class TradeoffPoint:
    framework: str
    bandwidth: int | None
    norm_data: float
    norm_cost: float
    raw_data: float
    raw_cost: float
    trials: int


def sample_endpoints(
    world: OccupancyGrid,
    count: int,
    seed: int,
    cost_params: CostParams | None = None,
) -> tuple[tuple[Cell, ...], tuple[Cell, ...]]:
    """Draw ``count`` start/goal pairs uniformly from traversable cells,
    rejecting identical or mutually unreachable pairs. Deterministic in seed."""
    cells = [
        Cell(x, y)
        for y in range(1, world.size + 1)
        for x in range(1, world.size + 1)
        if world.traversable(Cell(x, y))
    ]
    if len(cells) < 2:
        raise SamplingError("world has fewer than two traversable cells")
    cost_params = cost_params if cost_params is not None else CostParams()
    rng = np.random.default_rng(seed)
    starts: list[Cell] = []
    goals: list[Cell] = []
    for _ in range(count):
        for _ in range(_ENDPOINT_TRIES):
            i, j = rng.integers(0, len(cells), size=2)
            s, g = cells[int(i)], cells[int(j)]
            if s == g:
                continue
            if shortest_path(world, AgentKind.SEEKER, s, g, cost_params) is None:
                continue
            starts.append(s)
            goals.append(g)
            break
        else:
            raise SamplingError(
                f"no feasible start/goal pair after {_ENDPOINT_TRIES} draws (seed {seed})"
            )
    return tuple(starts), tuple(goals)


def _framework_budgets(spec: SweepSpec) -> list[tuple[str, int | None]]:
    """Expand the framework list against the bandwidth sweep: budgeted
    frameworks run once per bandwidth, the rest run once."""
    out: list[tuple[str, int | None]] = []
    for label in spec.frameworks:
        if label.upper().startswith("MILP"):
            out.extend((label.upper(), b) for b in spec.bandwidths)
        else:
            out.append((label.upper(), None))
    return out


def _trial_rows(spec: SweepSpec, n: int) -> list[TrialRow]:
    seed = spec.seed_base + n
    world = spec.world.build(seed_offset=n if spec.vary_map else 0)
    if spec.endpoints is not None:
        starts = tuple(p[0] for p in spec.endpoints)
        goals = tuple(p[1] for p in spec.endpoints)
    else:
        cost_params = CostParams(spec.overrides.get("lambda1", 1.0))
        starts, goals = sample_endpoints(world, spec.seekers, seed, cost_params)
    rows = []
    for label, bandwidth in _framework_budgets(spec):
        config = SimConfig(
            starts=starts,
            goals=goals,
            bandwidth=bandwidth if bandwidth is not None else 27,
            seed=seed,
            **spec.overrides,
        )
        metrics = run_episode(world, config, Framework.from_label(label))
        rows.append(TrialRow(label, bandwidth, n, starts, goals, metrics))
    return rows


def run_trials(spec: SweepSpec, jobs: int = 1) -> list[TrialRow]:
    """Run the paired experiment; rows come back in (trial, framework) order
    regardless of worker count."""
    if jobs < 1:
        raise InvalidParameterError(f"jobs must be >= 1, got {jobs}")
    if jobs == 1 or spec.trials == 1:
        per_trial = [_trial_rows(spec, n) for n in range(spec.trials)]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_trial = list(pool.map(partial(_trial_rows, spec), range(spec.trials)))
    return [row for rows in per_trial for row in rows]


def _grouped(rows: list[TrialRow]) -> dict[tuple[str, int | None], list[TrialRow]]:
    groups: dict[tuple[str, int | None], list[TrialRow]] = {}
    for row in rows:
        groups.setdefault((row.framework, row.bandwidth), []).append(row)
    # deterministic presentation: unbudgeted frameworks first, MILP* by budget
    def order(key):
        label, bandwidth = key
        return (label.startswith("MILP"), label, bandwidth if bandwidth is not None else -1)

    return {key: groups[key] for key in sorted(groups, key=order)}


def _data_reference(label: str, fi_means: dict[str, float]) -> float:
    """Full-information mean data used to normalize ``label``'s data column.

    Utility-exploration rows normalize against FI1 and the rest against FI0,
    falling back to whichever reference exists when only one was run.
    """
    if not fi_means:
        raise NormalizationError("trade-off table needs a full-information framework")
    preferred = "FI1" if label.endswith("1") else "FI0"
    return fi_means.get(preferred, next(iter(fi_means.values())))


def tradeoff_points(rows: list[TrialRow]) -> list[TradeoffPoint]:
    """Collapse trial rows into normalized (data, cost) points per framework
    and budget. Requires UI rows for the cost scale and at least one
    full-information framework for the data scale."""
    groups = _grouped(rows)
    means = {
        key: (
            fmean(r.metrics.data_sent for r in group),
            fmean(r.metrics.total_nav_cost for r in group),
        )
        for key, group in groups.items()
    }
    ui = next((key for key in means if key[0] == "UI"), None)
    if ui is None:
        raise NormalizationError("trade-off table needs the uninformed framework")
    ui_cost = means[ui][1]
    if ui_cost <= 0:
        raise NormalizationError("uninformed mean cost is zero; nothing to normalize by")
    fi_means = {key[0]: mean[0] for key, mean in means.items() if key[0].startswith("FI")}
    points = []
    for key, (mean_data, mean_cost) in means.items():
        label, bandwidth = key
        reference = _data_reference(label, fi_means)
        if reference <= 0:
            raise NormalizationError("full-information mean data is zero")
        points.append(
            TradeoffPoint(
                framework=label,
                bandwidth=bandwidth,
                norm_data=mean_data / reference,
                norm_cost=mean_cost / ui_cost,
                raw_data=mean_data,
                raw_cost=mean_cost,
                trials=len(groups[key]),
            )
        )
    return points


def tradeoff_csv_text(points: list[TradeoffPoint]) -> str:
    """CSV with full-precision floats, so reading it back reproduces the
    table exactly."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["framework", "B", "norm_data", "norm_cost", "raw_data", "raw_cost", "trials"])
    for p in points:
        writer.writerow(
            [
                p.framework,
                "" if p.bandwidth is None else p.bandwidth,
                repr(p.norm_data),
                repr(p.norm_cost),
                repr(p.raw_data),
                repr(p.raw_cost),
                p.trials,
            ]
        )
    return out.getvalue()


def emit_tradeoff(rows: list[TrialRow], out: str | Path) -> list[TradeoffPoint]:
    points = tradeoff_points(rows)
    Path(out).write_text(tradeoff_csv_text(points))
    return points


def metrics_csv_text(rows: list[TrialRow]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(
        ["framework", "B", "trial", "seed", "steps", "completed", "total_nav_cost", "data_sent"]
    )
    for row in rows:
        m = row.metrics
        writer.writerow(
            [
                row.framework,
                "" if row.bandwidth is None else row.bandwidth,
                row.trial,
                m.seed,
                m.steps,
                int(m.completed),
                repr(m.total_nav_cost),
                m.data_sent,
            ]
        )
    return out.getvalue()


def summary_dict(rows: list[TrialRow]) -> dict:
    """Per-(framework, budget) means and population standard deviations."""
    groups = _grouped(rows)
    out = []
    for (label, bandwidth), group in groups.items():
        costs = [r.metrics.total_nav_cost for r in group]
        data = [float(r.metrics.data_sent) for r in group]
        out.append(
            {
                "framework": label,
                "bandwidth": bandwidth,
                "trials": len(group),
                "completed": sum(r.metrics.completed for r in group),
                "mean_nav_cost": fmean(costs),
                "std_nav_cost": pstdev(costs) if len(costs) > 1 else 0.0,
                "mean_data": fmean(data),
                "std_data": pstdev(data) if len(data) > 1 else 0.0,
            }
        )
    return {"groups": out}


def run_sweep(spec: SweepSpec, out_dir: str | Path, jobs: int = 1) -> list[TrialRow]:
    """Run the experiment and write metrics.csv, tradeoff.csv and summary.json
    into ``out_dir``. The trade-off file is skipped when the reference
    frameworks were not part of the sweep."""
    rows = run_trials(spec, jobs=jobs)
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "metrics.csv").write_text(metrics_csv_text(rows))
    (directory / "summary.json").write_text(
        json.dumps(summary_dict(rows), indent=2, sort_keys=True) + "\n"
    )
    try:
        emit_tradeoff(rows, directory / "tradeoff.csv")
    except NormalizationError:
        pass
    return rows
