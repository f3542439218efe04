"""Supporter agent: whom to help, where to fly, and what each cell is worth.

The supporter keeps its own belief map and one ledger per seeker. Each
timestep it scores the seekers' path requests, flies toward the unexplored
waypoints of the best-scoring seeker (visiting them in reverse, so the cell
nearest that seeker is reached last), and falls back to a periodic default
sweep when nobody needs help. The ledger tracks, per seeker, which cells were
already transferred and how valuable every explored cell would be to send
next.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError, UtilityUndefinedError
from .grid import Cell, OccupancyGrid, euclidean
from .planning import DEFAULT_COST, AgentKind, CostParams, shortest_path
from .seeker import PathRequest

ROI_WEIGHT_ORDERS = ("prose", "formula")


@dataclass(frozen=True)
class UtilityParams:
    """Scoring knobs: w1/w2 weigh path uncertainty against detour geometry;
    alpha/beta/sigma shape the per-cell region-of-interest field."""

    w1: float = 0.4
    w2: float = 0.6
    alpha: float = 1000.0
    beta: float = 1.0
    sigma: float = 2.0
    roi_weight_order: str = "prose"

    def __post_init__(self) -> None:
        if self.w1 < 0 or self.w2 < 0 or self.w1 + self.w2 <= 0:
            raise InvalidParameterError(f"need w1, w2 >= 0 and w1 + w2 > 0, got {self.w1}, {self.w2}")
        if self.alpha <= 0 or self.beta <= 0 or self.sigma <= 0:
            raise InvalidParameterError("alpha, beta and sigma must be positive")
        if self.roi_weight_order not in ROI_WEIGHT_ORDERS:
            raise InvalidParameterError(
                f"roi_weight_order must be one of {ROI_WEIGHT_ORDERS}, got {self.roi_weight_order!r}"
            )


DEFAULT_UTILITY = UtilityParams()


@dataclass
class SeekerLedger:
    """Per-seeker transfer bookkeeping on the supporter.

    ``transferred`` marks cells already sent (never resent: their value is
    zero forever). ``voi`` is the current worth of sending each cell, nonzero
    only on supporter-explored, untransferred cells whose occupancy differs
    from the optimistic prior. ``order`` lists those informative cells as flat
    row-major indices, best first.
    """

    size: int
    transferred: np.ndarray
    roi: np.ndarray
    voi: np.ndarray
    order: np.ndarray

    @classmethod
    def fresh(cls, size: int) -> "SeekerLedger":
        return cls(
            size=size,
            transferred=np.zeros((size, size), dtype=bool),
            roi=np.zeros((size, size)),
            voi=np.zeros((size, size)),
            order=np.empty(0, dtype=np.int64),
        )

    @property
    def informative_count(self) -> int:
        return int(self.order.size)

    def informative_cells(self) -> list[Cell]:
        n = self.size
        return [Cell(int(i % n) + 1, int(i // n) + 1) for i in self.order]

    def transferred_cells(self) -> set[Cell]:
        ys, xs = np.nonzero(self.transferred)
        return {Cell(int(x) + 1, int(y) + 1) for y, x in zip(ys, xs)}


@dataclass
class SupporterState:
    position: Cell
    belief: OccupancyGrid
    default_waypoints: list[Cell]
    current_target: tuple[int, tuple[Cell, ...]] | None = None
    current_path: list[Cell] | None = None
    ledgers: dict[int, SeekerLedger] = field(default_factory=dict)
    default_index: int | None = None
    trace: list[Cell] = field(default_factory=list)


def make_supporter(
    world: OccupancyGrid,
    default_waypoints: list[Cell],
    seeker_ids: list[int],
    start: Cell | None = None,
) -> SupporterState:
    if not default_waypoints:
        raise InvalidParameterError("supporter needs at least one default waypoint")
    position = start if start is not None else default_waypoints[0]
    world.require_in_bounds(position)
    for wp in default_waypoints:
        world.require_in_bounds(wp)
    return SupporterState(
        position=position,
        belief=OccupancyGrid.belief_like(world),
        default_waypoints=list(default_waypoints),
        ledgers={sid: SeekerLedger.fresh(world.size) for sid in seeker_ids},
        trace=[position],
    )


def filter_unexplored_waypoints(
    req: PathRequest, belief: OccupancyGrid
) -> tuple[tuple[Cell, ...], tuple[Cell, ...]]:
    """Split request waypoints by the supporter's own map: (unexplored chi,
    explored upsilon), both preserving request order."""
    chi = tuple(w for w in req.waypoints if not belief.is_explored(w))
    upsilon = tuple(w for w in req.waypoints if belief.is_explored(w))
    return chi, upsilon


def utility_score(
    req: PathRequest,
    chi: tuple[Cell, ...],
    supporter_pos: Cell,
    params: UtilityParams = DEFAULT_UTILITY,
) -> float:
    """How much helping this seeker is worth right now.

    Combines the seeker's reported path uncertainty with how much of the
    unexplored wayline would be covered en route: distance from the far
    waypoint back to the near one, relative to the supporter's flight to get
    there (clamped below by one cell to avoid dividing by zero)."""
    if not chi:
        raise UtilityUndefinedError(f"seeker {req.seeker_id} has no unexplored waypoints")
    q1, qv = chi[0], chi[-1]
    span = euclidean(qv, q1)
    approach = max(euclidean(qv, supporter_pos), 1.0)
    return params.w1 * req.epsilon + params.w2 * span / approach


def select_target(
    candidates: list[tuple[PathRequest, tuple[Cell, ...]]],
    supporter_pos: Cell,
    params: UtilityParams = DEFAULT_UTILITY,
) -> tuple[int, tuple[Cell, ...]] | None:
    """Pick the (seeker_id, chi) with the highest utility; ties go to the
    smaller seeker id; None when no candidate has unexplored waypoints."""
    best: tuple[int, tuple[Cell, ...]] | None = None
    best_score = -math.inf
    for req, chi in sorted(candidates, key=lambda pair: pair[0].seeker_id):
        if not chi:
            continue
        score = utility_score(req, chi, supporter_pos, params)
        if score > best_score:
            best = (req.seeker_id, chi)
            best_score = score
    return best


def build_exploration_path(
    supporter_pos: Cell,
    chi: tuple[Cell, ...],
    belief: OccupancyGrid,
    params: CostParams = DEFAULT_COST,
) -> list[Cell]:
    """Flight plan visiting chi in reverse order: fly to the last (goal-side)
    waypoint first and finish on the first (seeker-side) one. Segment seams
    are not duplicated."""
    if not chi:
        raise InvalidParameterError("cannot build an exploration path for empty chi")
    path = [supporter_pos]
    cur = supporter_pos
    for target in reversed(chi):
        segment = shortest_path(belief, AgentKind.SUPPORTER, cur, target, params)
        path.extend(segment[1:])
        cur = target
    return path


def _unique_default_waypoints(state: SupporterState) -> list[Cell]:
    wps = state.default_waypoints
    if len(wps) > 1 and wps[0] == wps[-1]:
        return wps[:-1]
    return list(wps)


def _nearest_default_index(state: SupporterState) -> int:
    wps = _unique_default_waypoints(state)
    dists = [euclidean(state.position, wp) for wp in wps]
    return dists.index(min(dists))


def _build_default_leg(state: SupporterState, params: CostParams) -> None:
    """Plan the path to the current default waypoint, skipping waypoints the
    supporter is already standing on."""
    wps = _unique_default_waypoints(state)
    for _ in range(len(wps)):
        target = wps[state.default_index]
        if target != state.position:
            state.current_path = shortest_path(
                state.belief, AgentKind.SUPPORTER, state.position, target, params
            )
            return
        state.default_index = (state.default_index + 1) % len(wps)
    state.current_path = [state.position]  # degenerate: every waypoint is here


def exploration_policy(
    state: SupporterState,
    target: tuple[int, tuple[Cell, ...]] | None,
    params: CostParams = DEFAULT_COST,
) -> list[Cell]:
    """Decide this timestep's flight path.

    No target: default-sweep mode, entering at the nearest default waypoint
    and cycling. Unchanged target: keep flying the current path. New target:
    rebuild the exploration path from the current position.
    """
    if target is None:
        state.current_target = None
        if state.default_index is None:  # just dropped out of target mode
            state.default_index = _nearest_default_index(state)
            _build_default_leg(state, params)
        elif not state.current_path or len(state.current_path) < 2:
            wps = _unique_default_waypoints(state)
            state.default_index = (state.default_index + 1) % len(wps)
            _build_default_leg(state, params)
        return state.current_path
    if target == state.current_target and state.current_path and len(state.current_path) >= 2:
        return state.current_path
    state.current_target = target
    state.default_index = None
    state.current_path = build_exploration_path(state.position, target[1], state.belief, params)
    return state.current_path


def advance(state: SupporterState) -> Cell:
    """Fly one cell along the current path (or hover when there is none)."""
    if state.current_path and len(state.current_path) >= 2:
        state.current_path = state.current_path[1:]
        state.position = state.current_path[0]
    state.trace.append(state.position)
    return state.position


def roi_coefficients(count: int, params: UtilityParams) -> list[float]:
    """Per-waypoint interest weights for the k-th of ``count`` explored
    waypoints, ordered seeker-to-goal.

    The default gives the waypoint nearest the seeker the largest weight
    (alpha * count down to alpha); the alternative ordering grows with k
    instead.
    """
    if params.roi_weight_order == "prose":
        return [params.alpha * (count - k + 1) for k in range(1, count + 1)]
    return [params.alpha * k for k in range(1, count + 1)]


def refresh_ledger(
    ledger: SeekerLedger,
    upsilon: tuple[Cell, ...],
    belief: OccupancyGrid,
    params: UtilityParams = DEFAULT_UTILITY,
) -> SeekerLedger:
    """Recompute the interest and value fields for one seeker.

    Interest is a baseline plus Gaussian bumps around the seeker's explored
    waypoints. A cell's value is its interest times how far its true occupancy
    sits from the optimistic prior the seeker assumes; transferred and
    unexplored cells are worth exactly zero. ``order`` ranks informative cells
    by absolute value, ties toward smaller (y, x).
    """
    n = ledger.size
    coords = np.arange(1, n + 1, dtype=float)
    roi = np.full((n, n), params.beta)
    two_sigma_sq = 2.0 * params.sigma * params.sigma
    for weight, q in zip(roi_coefficients(len(upsilon), params), upsilon):
        d_sq = (coords[None, :] - q.x) ** 2 + (coords[:, None] - q.y) ** 2
        roi += weight * np.exp(-d_sq / two_sigma_sq)
    ledger.roi = roi

    sendable = belief.explored & ~ledger.transferred
    gap = np.where(sendable, belief.phi_u - belief.occupancy.astype(float), 0.0)
    voi = roi * gap
    ledger.voi = voi

    magnitude = np.abs(voi).ravel()
    informative = np.flatnonzero(magnitude > 0)
    ledger.order = informative[np.argsort(-magnitude[informative], kind="stable")]
    return ledger
