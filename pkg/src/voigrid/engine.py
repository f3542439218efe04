"""Per-timestep orchestration of seekers and supporter under one framework.

Frameworks combine a communication mode with a supporter exploration mode:

* ``UI``   — no communication; the supporter flies its default sweep.
* ``FI0``  — the supporter's whole sensing window is broadcast every step
  while it flies the default sweep.
* ``FI1``  — same broadcast, but the supporter chases utility-scored targets.
* ``MILP0`` — budgeted top-value cell transmission, default sweep.
* ``MILP1`` — budgeted transmission plus utility-driven exploration.

The step order is fixed: seekers replan and publish requests, the supporter
picks its path and moves one cell and senses, communication happens, then
seekers merge what they received, replan if their map changed, and move one
cell. Everything is deterministic given (world, config, framework).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from .allocation import AllocationProblem, allocate, select_cells
from .errors import ConfigurationError, InvalidParameterError, PlanningFaultError
from .grid import Cell, OccupancyGrid, SensorSpec, lawnmower_waypoints, sense, window_cells
from .planning import AgentKind, CostParams, shortest_path
from .seeker import (
    SeekerState,
    make_seeker,
    merge_received,
    plan_and_request,
    replan,
    step_move,
)
from .supporter import (
    SupporterState,
    UtilityParams,
    advance,
    exploration_policy,
    filter_unexplored_waypoints,
    make_supporter,
    refresh_ledger,
    select_target,
)

EventSink = Callable[[dict], None]


class Comm(Enum):
    UI = "UI"
    FI = "FI"
    MILP = "MILP"


class Exploration(Enum):
    LAWNMOWER = "lawnmower"
    UTILITY = "utility"


@dataclass(frozen=True)
class Framework:
    comm: Comm
    exploration: Exploration

    @property
    def label(self) -> str:
        if self.comm is Comm.UI:
            return "UI"
        suffix = "1" if self.exploration is Exploration.UTILITY else "0"
        return f"{self.comm.value}{suffix}"

    @classmethod
    def from_label(cls, label: str) -> "Framework":
        try:
            return FRAMEWORKS[label.upper()]
        except KeyError:
            raise InvalidParameterError(
                f"unknown framework {label!r}; expected one of {sorted(FRAMEWORKS)}"
            )


FRAMEWORKS = {
    "UI": Framework(Comm.UI, Exploration.LAWNMOWER),
    "FI0": Framework(Comm.FI, Exploration.LAWNMOWER),
    "FI1": Framework(Comm.FI, Exploration.UTILITY),
    "MILP0": Framework(Comm.MILP, Exploration.LAWNMOWER),
    "MILP1": Framework(Comm.MILP, Exploration.UTILITY),
}


@dataclass(frozen=True)
class SimConfig:
    """Episode parameters. Defaults follow the reference scenario: unit move
    cost, 3-cell seeker and 7-cell supporter windows, waypoint interval 3,
    transmission every step under a 27-cell budget."""

    starts: tuple[Cell, ...]
    goals: tuple[Cell, ...]
    supporter_start: Cell | None = None
    n_seeker: int = 3
    n_supporter: int = 7
    m: int = 3
    period: int = 1
    bandwidth: int = 27
    b0: int = 1
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
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.starts or len(self.starts) != len(self.goals):
            raise InvalidParameterError("starts and goals must be nonempty and equal-length")
        if self.m < 1 or self.period < 1 or self.bandwidth < 1 or self.b0 < 1:
            raise InvalidParameterError("m, period, bandwidth and b0 must be positive")
        if self.fi_accounting not in ("broadcast", "per_seeker"):
            raise InvalidParameterError(
                f"fi_accounting must be 'broadcast' or 'per_seeker', got {self.fi_accounting!r}"
            )
        SensorSpec(self.n_seeker)
        SensorSpec(self.n_supporter)

    @property
    def cost_params(self) -> CostParams:
        return CostParams(self.lambda1)

    @property
    def utility_params(self) -> UtilityParams:
        return UtilityParams(
            w1=self.w1,
            w2=self.w2,
            alpha=self.alpha,
            beta=self.beta,
            sigma=self.sigma,
            roi_weight_order=self.roi_weight_order,
        )


@dataclass(frozen=True)
class EpisodeMetrics:
    framework: str
    seed: int
    steps: int
    completed: bool
    nav_costs: tuple[float, ...]
    cells_received: tuple[int, ...]
    seeker_steps: tuple[int, ...]
    data_sent: int

    @property
    def total_nav_cost(self) -> float:
        return sum(self.nav_costs)

    def to_dict(self) -> dict:
        return {
            "framework": self.framework,
            "seed": self.seed,
            "steps": self.steps,
            "completed": self.completed,
            "total_nav_cost": self.total_nav_cost,
            "data_sent": self.data_sent,
            "nav_costs": list(self.nav_costs),
            "cells_received": list(self.cells_received),
            "seeker_steps": list(self.seeker_steps),
        }


class Episode:
    """One live simulation; ``step()`` advances a single timestep."""

    def __init__(
        self,
        world: OccupancyGrid,
        config: SimConfig,
        framework: Framework,
        sink: EventSink | None = None,
    ) -> None:
        self.world = world
        self.config = config
        self.framework = framework
        self.sink = sink
        self._validate_endpoints()

        self.seekers: list[SeekerState] = [
            make_seeker(i + 1, s, g, world)
            for i, (s, g) in enumerate(zip(config.starts, config.goals))
        ]
        spacing = config.lawnmower_spacing or min(config.n_supporter, world.size - 1)
        waypoints = lawnmower_waypoints(world.size, spacing)
        # Default spawn is the map center: it minimizes the expected flight to
        # whichever seeker first wins the utility argmax.
        center = max(1, world.size // 2)
        supporter_start = (
            config.supporter_start if config.supporter_start is not None else Cell(center, center)
        )
        self.supporter: SupporterState = make_supporter(
            world, waypoints, [s.id for s in self.seekers], start=supporter_start
        )

        self.seeker_sensor = SensorSpec(config.n_seeker)
        self.supporter_sensor = SensorSpec(config.n_supporter)
        self.t = 0
        self.data_sent = 0
        self.cells_received = {s.id: 0 for s in self.seekers}
        self.max_steps = (
            config.max_steps
            if config.max_steps is not None
            else 10 * world.size * world.size
        )
        # Engine-side safety ledgers, independent of the supporter's own
        # bookkeeping: budgeted delivery must never repeat a (seeker, cell).
        self._delivered: dict[int, set[Cell]] = {s.id: set() for s in self.seekers}

        for s in self.seekers:
            sense(world, s.belief, s.position, self.seeker_sensor)
        sense(world, self.supporter.belief, self.supporter.position, self.supporter_sensor)

    def _validate_endpoints(self) -> None:
        world, config = self.world, self.config
        for label, cell in (("start", config.supporter_start),):
            if cell is not None and not world.in_bounds(cell):
                raise ConfigurationError(f"supporter {label} {tuple(cell)} out of bounds")
        for i, (s, g) in enumerate(zip(config.starts, config.goals), start=1):
            for label, cell in (("start", s), ("goal", g)):
                if not world.in_bounds(cell):
                    raise ConfigurationError(f"seeker {i} {label} {tuple(cell)} out of bounds")
                if not world.traversable(cell):
                    raise ConfigurationError(
                        f"seeker {i} {label} {tuple(cell)} is an obstacle in the true world"
                    )
            if shortest_path(world, AgentKind.SEEKER, s, g, config.cost_params) is None:
                raise ConfigurationError(f"seeker {i} has no true path {tuple(s)} -> {tuple(g)}")

    @property
    def active_seekers(self) -> list[SeekerState]:
        return [s for s in self.seekers if s.active]

    @property
    def done(self) -> bool:
        return not self.active_seekers

    def _emit(self, record: dict) -> None:
        if self.sink is not None:
            self.sink(record)

    def step(self) -> None:
        if self.done:
            raise InvalidParameterError("episode already terminated")
        config, framework = self.config, self.framework
        cost_params = config.cost_params
        utility_params = config.utility_params

        # (1) active seekers replan and publish requests, ascending id
        requests = {}
        for s in self.seekers:
            if not s.active:
                continue
            req = plan_and_request(s, config.m, cost_params)
            requests[s.id] = req
            self._emit(
                {
                    "event": "request",
                    "t": self.t,
                    "seeker": s.id,
                    "epsilon": req.epsilon,
                    "waypoints": [[c.x, c.y] for c in req.waypoints],
                }
            )

        # (2) supporter picks a path, moves one cell, senses
        partitions = {}
        if requests and framework.comm is not Comm.UI:
            partitions = {
                rid: filter_unexplored_waypoints(requests[rid], self.supporter.belief)
                for rid in sorted(requests)
            }
        target = None
        if framework.comm is not Comm.UI and framework.exploration is Exploration.UTILITY:
            candidates = [(requests[rid], partitions[rid][0]) for rid in sorted(requests)]
            target = select_target(candidates, self.supporter.position, utility_params)
        exploration_policy(self.supporter, target, cost_params)
        advance(self.supporter)
        sense(self.world, self.supporter.belief, self.supporter.position, self.supporter_sensor)
        self._emit(
            {
                "event": "supporter_move",
                "t": self.t,
                "position": [self.supporter.position.x, self.supporter.position.y],
                "target_seeker": target[0] if target else None,
            }
        )

        # (3) communication
        delivered: dict[int, list[tuple[Cell, int]]] = {}
        if framework.comm is Comm.FI:
            window = window_cells(self.world, self.supporter.position, self.supporter_sensor)
            receivers = sorted(requests)
            for rid in receivers:
                delivered[rid] = window
            if receivers:
                if config.fi_accounting == "broadcast":
                    self.data_sent += len(window)
                else:
                    self.data_sent += len(window) * len(receivers)
            for rid in receivers:
                self._emit(
                    {
                        "event": "transmit",
                        "t": self.t,
                        "seeker": rid,
                        "cells": [[c.x, c.y, occ] for c, occ in window],
                    }
                )
        elif framework.comm is Comm.MILP and self.t % config.period == 0 and requests:
            req_ids = sorted(requests)
            for rid in req_ids:
                refresh_ledger(
                    self.supporter.ledgers[rid],
                    partitions[rid][1],
                    self.supporter.belief,
                    utility_params,
                )
            problem = AllocationProblem.build(
                d=[self.supporter.ledgers[rid].informative_count for rid in req_ids],
                e=[requests[rid].epsilon for rid in req_ids],
                bandwidth=config.bandwidth,
                b0=config.b0,
                team_size=len(self.seekers),
            )
            grants = allocate(problem)
            budget_cells = config.bandwidth // config.b0
            if sum(grants) > budget_cells:
                raise RuntimeError(
                    f"budget violated at t={self.t}: {sum(grants)} > {budget_cells}"
                )
            for rid, grant in zip(req_ids, grants):
                picked = select_cells(
                    self.supporter.ledgers[rid], self.supporter.belief, grant * config.b0, config.b0
                )
                for cell, _ in picked:
                    if cell in self._delivered[rid]:
                        raise RuntimeError(
                            f"cell {tuple(cell)} retransmitted to seeker {rid} at t={self.t}"
                        )
                    self._delivered[rid].add(cell)
                if picked:
                    delivered[rid] = picked
                    self.data_sent += len(picked) * config.b0
                    self._emit(
                        {
                            "event": "transmit",
                            "t": self.t,
                            "seeker": rid,
                            "cells": [[c.x, c.y, occ] for c, occ in picked],
                        }
                    )

        # (4) seekers merge, replan when stale, move one cell, sense
        for s in self.seekers:
            if not s.active:
                continue
            got = delivered.get(s.id)
            if got:
                merge_received(s, got)
                self.cells_received[s.id] += len(got)
            if s.plan_is_stale():
                replan(s, cost_params)
            refusals = 0
            while not step_move(s, self.world, self.seeker_sensor, cost_params):
                refusals += 1
                if refusals > 8 * self.world.size:
                    raise PlanningFaultError(
                        f"seeker {s.id} stuck at {tuple(s.position)} at t={self.t}"
                    )
                replan(s, cost_params)
            self._emit(
                {
                    "event": "seeker_move",
                    "t": self.t,
                    "seeker": s.id,
                    "position": [s.position.x, s.position.y],
                    "nav_cost": s.nav_cost,
                    "refusals": refusals,
                }
            )

        # (5) advance the clock; activity was updated by step_move
        self.t += 1

    def run(self) -> EpisodeMetrics:
        while not self.done and self.t < self.max_steps:
            self.step()
        return self.metrics()

    def metrics(self) -> EpisodeMetrics:
        return EpisodeMetrics(
            framework=self.framework.label,
            seed=self.config.seed,
            steps=self.t,
            completed=self.done,
            nav_costs=tuple(s.nav_cost for s in self.seekers),
            cells_received=tuple(self.cells_received[s.id] for s in self.seekers),
            seeker_steps=tuple(len(s.trace) - 1 for s in self.seekers),
            data_sent=self.data_sent,
        )


def run_episode(
    world: OccupancyGrid,
    config: SimConfig,
    framework: Framework,
    sink: EventSink | None = None,
) -> EpisodeMetrics:
    """Validate, run to completion (or step budget), and report metrics."""
    return Episode(world, config, framework, sink).run()
