"""Edge-cost models and optimal path search for both agent kinds.

Seekers are ground vehicles: 4-connected, and each move pays the destination
cell's occupancy on top of the lateral constant, with cells above ``phi_obs``
impassable. The supporter is aerial: 8-connected and occupancy-free, paying
only distance. Unexplored cells carry the optimistic prior already encoded in
the belief grid, so planning needs no special handling for them.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from enum import Enum

from .errors import InvalidParameterError, InvalidPathError
from .grid import Cell, OccupancyGrid

SQRT2 = math.sqrt(2)


class AgentKind(Enum):
    SEEKER = "seeker"
    SUPPORTER = "supporter"


@dataclass(frozen=True)
class CostParams:
    """Movement cost constants. ``lambda1`` prices a lateral move; a diagonal
    supporter move costs ``lambda1 * sqrt(2)`` exactly."""

    lambda1: float = 1.0

    def __post_init__(self) -> None:
        if self.lambda1 <= 0:
            raise InvalidParameterError(f"lambda1 must be positive, got {self.lambda1}")

    @property
    def diagonal(self) -> float:
        return self.lambda1 * SQRT2


DEFAULT_COST = CostParams()


def edge_cost_seeker(dest_occupancy: int, params: CostParams, phi_obs: int) -> float:
    """Cost of a seeker move into a cell with the given believed occupancy."""
    if dest_occupancy > phi_obs:
        return math.inf
    return dest_occupancy + params.lambda1


def edge_cost_supporter(diagonal: bool, params: CostParams) -> float:
    """Cost of a supporter move; occupancy never enters."""
    return params.diagonal if diagonal else params.lambda1


def _check_adjacency(a: Cell, b: Cell, kind: AgentKind) -> bool:
    dx, dy = abs(b.x - a.x), abs(b.y - a.y)
    if kind is AgentKind.SEEKER:
        return dx + dy == 1
    return 0 < max(dx, dy) <= 1


def path_cost(
    path: list[Cell],
    kind: AgentKind,
    belief: OccupancyGrid,
    params: CostParams = DEFAULT_COST,
) -> float:
    """Total traversal cost of a path; a single-cell path costs 0."""
    if not path:
        raise InvalidPathError("empty path")
    for cell in path:
        belief.require_in_bounds(cell)
    total = 0.0
    for a, b in zip(path, path[1:]):
        if not _check_adjacency(a, b, kind):
            raise InvalidPathError(f"cells {tuple(a)} -> {tuple(b)} violate {kind.value} adjacency")
        if kind is AgentKind.SEEKER:
            total += edge_cost_seeker(belief.value_at(b), params, belief.phi_obs)
        else:
            total += edge_cost_supporter(abs(b.x - a.x) == 1 and abs(b.y - a.y) == 1, params)
    return total


# Neighbor tables in flat row-major indexing, cached per (size, kind): rebuilding
# them dominates search time on small grids otherwise. Entries are
# (neighbor_index, distance_scale) with scale sqrt(2) on diagonals.
_NEIGHBOR_CACHE: dict[tuple[int, AgentKind], list[list[tuple[int, float]]]] = {}

_SEEKER_STEPS = ((-1, 0), (0, -1), (0, 1), (1, 0))
_SUPPORTER_STEPS = tuple(
    (dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if (dr, dc) != (0, 0)
)


def _neighbor_table(n: int, kind: AgentKind) -> list[list[tuple[int, float]]]:
    key = (n, kind)
    cached = _NEIGHBOR_CACHE.get(key)
    if cached is not None:
        return cached
    steps = _SEEKER_STEPS if kind is AgentKind.SEEKER else _SUPPORTER_STEPS
    table: list[list[tuple[int, float]]] = []
    for idx in range(n * n):
        r, c = divmod(idx, n)
        entries = []
        for dr, dc in steps:
            nr, nc = r + dr, c + dc
            if 0 <= nr < n and 0 <= nc < n:
                scale = SQRT2 if dr != 0 and dc != 0 else 1.0
                entries.append((nr * n + nc, scale))
        table.append(entries)
    _NEIGHBOR_CACHE[key] = table
    return table


def shortest_path(
    belief: OccupancyGrid,
    kind: AgentKind,
    start: Cell,
    goal: Cell,
    params: CostParams = DEFAULT_COST,
) -> list[Cell] | None:
    """Minimum-cost path from start to goal on the belief grid, or None.

    A* over the flat grid with an admissible, consistent heuristic (scaled
    Manhattan for seekers, octile distance for the supporter). Frontier ties
    break toward the smaller (y, x) destination, so identical inputs always
    yield the identical cell sequence. A seeker goal believed to be an obstacle
    is unreachable by definition.
    """
    belief.require_in_bounds(start)
    belief.require_in_bounds(goal)
    if kind is AgentKind.SEEKER and belief.value_at(goal) > belief.phi_obs:
        return None
    if start == goal:
        return [start]

    n = belief.size
    lam = params.lambda1
    table = _neighbor_table(n, kind)
    occ = belief.occupancy.ravel()
    phi_obs = belief.phi_obs
    start_idx = (start.y - 1) * n + (start.x - 1)
    goal_idx = (goal.y - 1) * n + (goal.x - 1)
    gr, gc = divmod(goal_idx, n)

    seeker = kind is AgentKind.SEEKER
    # Admissible because every seeker move costs at least lambda1 + phi_min and
    # every supporter move at least its octile distance contribution.
    h_scale = lam + belief.phi_min

    def heuristic(idx: int) -> float:
        r, c = divmod(idx, n)
        dy, dx = abs(r - gr), abs(c - gc)
        if seeker:
            return h_scale * (dx + dy)
        lo, hi = (dx, dy) if dx < dy else (dy, dx)
        return lam * (lo * SQRT2 + (hi - lo))

    dist = [math.inf] * (n * n)
    parent = [-1] * (n * n)
    done = bytearray(n * n)
    dist[start_idx] = 0.0
    heap: list[tuple[float, int]] = [(heuristic(start_idx), start_idx)]
    while heap:
        _, idx = heapq.heappop(heap)
        if done[idx]:
            continue
        done[idx] = 1
        if idx == goal_idx:
            break
        d = dist[idx]
        for nidx, scale in table[idx]:
            if done[nidx]:
                continue
            if seeker:
                o = occ[nidx]
                if o > phi_obs:
                    continue
                nd = d + o + lam
            else:
                nd = d + lam * scale
            if nd < dist[nidx]:
                dist[nidx] = nd
                parent[nidx] = idx
                heapq.heappush(heap, (nd + heuristic(nidx), nidx))

    if not done[goal_idx]:
        return None
    cells: list[Cell] = []
    idx = goal_idx
    while idx != -1:
        r, c = divmod(idx, n)
        cells.append(Cell(c + 1, r + 1))
        idx = parent[idx]
    cells.reverse()
    return cells
