"""Seeker agent lifecycle: replan, request help, merge received cells, move.

Each timestep an active seeker replans on its own belief, publishes a
PathRequest (sampled waypoints plus a path-uncertainty score), folds in any
cells the supporter sent, and executes one move, paying the true occupancy of
the destination. A planned move onto a cell that turns out to be an obstacle
is refused, not executed: the true value lands in the belief and the caller
replans within the same timestep.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InvalidParameterError, PlanningFaultError, ProtocolError
from .grid import Cell, OccupancyGrid, SensorSpec, sense
from .planning import DEFAULT_COST, AgentKind, CostParams, shortest_path


@dataclass(frozen=True)
class PathRequest:
    """What a seeker tells the supporter: sampled unexplored waypoints along
    its planned path, ordered nearest-to-seeker first, and the fraction of the
    plan lying in cells the seeker has not explored."""

    seeker_id: int
    waypoints: tuple[Cell, ...]
    epsilon: float


@dataclass
class SeekerState:
    id: int
    position: Cell
    start: Cell
    goal: Cell
    belief: OccupancyGrid
    current_plan: list[Cell] | None = None
    nav_cost: float = 0.0
    active: bool = True
    plan_revision: int = -1
    trace: list[Cell] = field(default_factory=list)

    def plan_is_stale(self) -> bool:
        return self.current_plan is None or self.plan_revision != self.belief.revision


def make_seeker(seeker_id: int, start: Cell, goal: Cell, world: OccupancyGrid) -> SeekerState:
    world.require_in_bounds(start)
    world.require_in_bounds(goal)
    return SeekerState(
        id=seeker_id,
        position=start,
        start=start,
        goal=goal,
        belief=OccupancyGrid.belief_like(world),
        active=start != goal,
        trace=[start],
    )


def replan(state: SeekerState, params: CostParams = DEFAULT_COST) -> list[Cell]:
    """Recompute the optimal path from the current position on the current belief."""
    plan = shortest_path(state.belief, AgentKind.SEEKER, state.position, state.goal, params)
    if plan is None:
        raise PlanningFaultError(
            f"seeker {state.id} has no believed path {tuple(state.position)} -> {tuple(state.goal)}"
        )
    state.current_plan = plan
    state.plan_revision = state.belief.revision
    return plan


def plan_and_request(
    state: SeekerState, m: int, params: CostParams = DEFAULT_COST
) -> PathRequest:
    """Replan and produce this timestep's PathRequest.

    Waypoints are every m-th cell along the fresh plan, skipping any the seeker
    already explored. epsilon is the unexplored fraction of the whole plan,
    start cell included.
    """
    if not state.active:
        raise InvalidParameterError(f"seeker {state.id} is inactive")
    if m < 1:
        raise InvalidParameterError(f"sampling interval must be >= 1, got {m}")
    plan = replan(state, params)
    candidates = [plan[m * k] for k in range(1, (len(plan) - 1) // m + 1)]
    waypoints = tuple(c for c in candidates if not state.belief.is_explored(c))
    unexplored = sum(1 for c in plan if not state.belief.is_explored(c))
    epsilon = unexplored / len(plan)
    return PathRequest(seeker_id=state.id, waypoints=waypoints, epsilon=epsilon)


def merge_received(state: SeekerState, cells: list[tuple[Cell, int]]) -> int:
    """Fold supporter-sent (cell, occupancy) pairs into the belief.

    Returns the number of newly explored cells. Idempotent for repeated values;
    out-of-bounds coordinates are a protocol violation, not a planner concern.
    """
    for cell, _ in cells:
        if not state.belief.in_bounds(cell):
            raise ProtocolError(
                f"seeker {state.id} received out-of-bounds cell {tuple(cell)}"
            )
    return state.belief.write_cells(cells)


def step_move(
    state: SeekerState,
    world: OccupancyGrid,
    sensor: SensorSpec,
    params: CostParams = DEFAULT_COST,
) -> bool:
    """Attempt one move along the current plan.

    Returns True when the move was executed (nav cost accrued, window sensed,
    goal arrival deactivates the seeker). Returns False when the next planned
    cell is truly an obstacle: the move is refused and the obstacle's true
    value is written into the belief so the caller can replan immediately.
    """
    if not state.active:
        raise InvalidParameterError(f"seeker {state.id} is inactive")
    if not state.current_plan or len(state.current_plan) < 2:
        raise PlanningFaultError(f"seeker {state.id} has no planned move")
    nxt = state.current_plan[1]
    true_occ = world.value_at(nxt)
    if true_occ > world.phi_obs:
        state.belief.write_cells([(nxt, true_occ)])
        state.current_plan = None
        return False
    state.position = nxt
    state.nav_cost += true_occ + params.lambda1
    state.current_plan = state.current_plan[1:]
    state.trace.append(nxt)
    sense(world, state.belief, nxt, sensor)
    if state.position == state.goal:
        state.active = False
    return True
