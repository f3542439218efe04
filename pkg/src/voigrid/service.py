"""HTTP facade over map generation, single episodes and sweeps.

The service is stateless: every request carries a full world recipe (either a
generator spec or an inline map text) and returns JSON-serializable results,
so clients never depend on server-side paths. Domain failures map to a 400
with a machine-readable ``code``; an episode hitting its step budget is a
normal response with ``completed`` false, not an error.
"""

from __future__ import annotations

import os
import tempfile
from typing import Any, Literal

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict, Field, model_validator

from . import __version__
from .engine import Episode, Framework, SimConfig
from .errors import InvalidParameterError, NormalizationError, VoigridError
from .grid import Cell, OccupancyGrid, generate_maze, generate_terrain, parse_map, serialize_map
from .harness import (
    SweepSpec,
    WorldSpec,
    metrics_csv_text,
    run_trials,
    sample_endpoints,
    summary_dict,
    tradeoff_csv_text,
    tradeoff_points,
)
from .planning import CostParams

XY = tuple[int, int]


class WorldModel(BaseModel):
    """Generator recipe for a world supplied over the wire."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["terrain", "maze"]
    size: int = Field(default=32, ge=8, le=512)
    seed: int = 0


class MapRequest(WorldModel):
    pass


class MapResponse(BaseModel):
    kind: str
    size: int
    seed: int
    map_text: str


class RunRequest(BaseModel):
    """One episode. Omitting ``starts``/``goals`` samples them uniformly from
    traversable cells with the request seed; omitting ``supporter_start``
    spawns the supporter at the map center."""

    model_config = ConfigDict(extra="forbid")

    framework: str = "MILP1"
    world: WorldModel | None = None
    map_text: str | None = None
    starts: list[XY] | None = None
    goals: list[XY] | None = None
    seekers: int = Field(default=3, ge=1)
    seed: int = 0
    supporter_start: XY | None = None
    bandwidth: int = 27
    b0: int = 1
    period: int = 1
    m: int = 3
    n_seeker: int = 3
    n_supporter: int = 7
    lambda1: float = 1.0
    w1: float = 0.4
    w2: float = 0.6
    alpha: float = 1000.0
    beta: float = 1.0
    sigma: float = 2.0
    roi_weight_order: str = "prose"
    fi_accounting: str = "broadcast"
    lawnmower_spacing: int | None = None
    max_steps: int | None = None
    record_events: bool = False

    @model_validator(mode="after")
    def _check_sources(self) -> "RunRequest":
        if (self.world is None) == (self.map_text is None):
            raise ValueError("exactly one of 'world' and 'map_text' is required")
        if (self.starts is None) != (self.goals is None):
            raise ValueError("'starts' and 'goals' must be given together")
        if self.starts is not None and len(self.starts) != len(self.goals):
            raise ValueError("'starts' and 'goals' must have equal length")
        return self


class RunResponse(BaseModel):
    framework: str
    starts: list[XY]
    goals: list[XY]
    supporter_start: XY
    metrics: dict
    events: list[dict] | None = None


class SweepRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    world: WorldModel | None = None
    map_text: str | None = None
    frameworks: list[str]
    bandwidths: list[int] = [27]
    trials: int = Field(default=50, ge=1)
    seed_base: int = 0
    seekers: int = Field(default=3, ge=1)
    vary_map: bool = False
    starts: list[XY] | None = None
    goals: list[XY] | None = None
    overrides: dict[str, Any] = {}
    jobs: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _check_sources(self) -> "SweepRequest":
        if (self.world is None) == (self.map_text is None):
            raise ValueError("exactly one of 'world' and 'map_text' is required")
        if (self.starts is None) != (self.goals is None):
            raise ValueError("'starts' and 'goals' must be given together")
        return self


class SweepResponse(BaseModel):
    frameworks: list[str]
    trials: int
    summary: dict
    metrics_csv: str
    tradeoff_csv: str | None = None


def _build_world(world: WorldModel | None, map_text: str | None) -> OccupancyGrid:
    if map_text is not None:
        return parse_map(map_text)
    if world.kind == "terrain":
        return generate_terrain(world.size, world.seed)
    return generate_maze(world.size, world.seed)


def _run_config(req: RunRequest, starts: tuple[Cell, ...], goals: tuple[Cell, ...]) -> SimConfig:
    return SimConfig(
        starts=starts,
        goals=goals,
        supporter_start=Cell(*req.supporter_start) if req.supporter_start else None,
        n_seeker=req.n_seeker,
        n_supporter=req.n_supporter,
        m=req.m,
        period=req.period,
        bandwidth=req.bandwidth,
        b0=req.b0,
        lambda1=req.lambda1,
        w1=req.w1,
        w2=req.w2,
        alpha=req.alpha,
        beta=req.beta,
        sigma=req.sigma,
        roi_weight_order=req.roi_weight_order,
        fi_accounting=req.fi_accounting,
        lawnmower_spacing=req.lawnmower_spacing,
        max_steps=req.max_steps,
        seed=req.seed,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="voigrid", version=__version__)

    @app.exception_handler(VoigridError)
    async def _domain_error(request: Request, exc: VoigridError) -> JSONResponse:
        return JSONResponse(
            status_code=400,
            content={"code": type(exc).__name__, "message": str(exc)},
        )

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/maps/generate", response_model=MapResponse)
    def generate(req: MapRequest) -> MapResponse:
        world = _build_world(req, None)
        return MapResponse(
            kind=req.kind, size=req.size, seed=req.seed, map_text=serialize_map(world)
        )

    @app.post("/episodes/run", response_model=RunResponse)
    def run(req: RunRequest) -> RunResponse:
        world = _build_world(req.world, req.map_text)
        framework = Framework.from_label(req.framework)
        if req.starts is not None:
            starts = tuple(Cell(*p) for p in req.starts)
            goals = tuple(Cell(*p) for p in req.goals)
        else:
            starts, goals = sample_endpoints(
                world, req.seekers, req.seed, CostParams(req.lambda1)
            )
        config = _run_config(req, starts, goals)
        events: list[dict] = []
        episode = Episode(world, config, framework, events.append if req.record_events else None)
        supporter_start = episode.supporter.position
        metrics = episode.run()
        return RunResponse(
            framework=framework.label,
            starts=[(c.x, c.y) for c in starts],
            goals=[(c.x, c.y) for c in goals],
            supporter_start=(supporter_start.x, supporter_start.y),
            metrics=metrics.to_dict(),
            events=events if req.record_events else None,
        )

    @app.post("/sweeps/run", response_model=SweepResponse)
    def sweep(req: SweepRequest) -> SweepResponse:
        tmp_path: str | None = None
        try:
            if req.map_text is not None:
                fd, tmp_path = tempfile.mkstemp(suffix=".map", text=True)
                with os.fdopen(fd, "w") as f:
                    f.write(req.map_text)
                world_spec = WorldSpec("file", path=tmp_path)
            else:
                world_spec = WorldSpec(req.world.kind, size=req.world.size, seed=req.world.seed)
            endpoints = None
            if req.starts is not None:
                if len(req.starts) != len(req.goals):
                    raise InvalidParameterError("'starts' and 'goals' must have equal length")
                endpoints = tuple(
                    (Cell(*s), Cell(*g)) for s, g in zip(req.starts, req.goals)
                )
            spec = SweepSpec(
                world=world_spec,
                frameworks=tuple(req.frameworks),
                bandwidths=tuple(req.bandwidths),
                trials=req.trials,
                seed_base=req.seed_base,
                seekers=len(endpoints) if endpoints is not None else req.seekers,
                vary_map=req.vary_map,
                endpoints=endpoints,
                overrides=dict(req.overrides),
            )
            rows = run_trials(spec, jobs=req.jobs)
        finally:
            if tmp_path is not None:
                os.unlink(tmp_path)
        try:
            tradeoff = tradeoff_csv_text(tradeoff_points(rows))
        except NormalizationError:
            tradeoff = None
        return SweepResponse(
            frameworks=list(req.frameworks),
            trials=req.trials,
            summary=summary_dict(rows),
            metrics_csv=metrics_csv_text(rows),
            tradeoff_csv=tradeoff,
        )

    return app
