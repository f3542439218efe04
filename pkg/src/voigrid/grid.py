"""Occupancy-grid world model: sensing, procedural map generation, map file I/O.

Cells are addressed by 1-based ``(x, y)`` center coordinates with ``y`` as the
row; arrays are stored row-major, so ``occupancy[y - 1, x - 1]`` is the value
of cell ``(x, y)``.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np
from scipy import ndimage

from .errors import (
    GenerationError,
    InvalidCoordinateError,
    InvalidParameterError,
    MapFormatError,
)

PHI_MIN = 0
PHI_MAX = 100
PHI_OBS = 50
PHI_U = 50

_TERRAIN_OCTAVES = ((3, 1.0), (6, 0.5))
# Contour bands of the noise field, by quantile level and band half-width
# (as a fraction of all cells). Wall bands become obstacles, vein bands become
# free corridors, and everything else sits at the optimistic prior, so a belief
# holds no usable cost signal until walls or veins are actually observed.
_TERRAIN_WALL_LEVELS = (0.07, 0.21, 0.35, 0.50, 0.65, 0.79, 0.93)
_TERRAIN_WALL_WIDTH = 0.055
_TERRAIN_VEIN_LEVELS = (0.14, 0.28, 0.42, 0.57, 0.72, 0.86)
_TERRAIN_VEIN_WIDTH = 0.045

_FOUR_CONN = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])


class Cell(NamedTuple):
    """A grid cell identified by its 1-based center coordinates."""

    x: int
    y: int


@dataclass
class SensorSpec:
    """Square sensing footprint of side ``window`` (odd), centered on the agent."""

    window: int

    def __post_init__(self) -> None:
        if self.window < 1 or self.window % 2 == 0:
            raise InvalidParameterError(f"sensor window must be odd and positive, got {self.window}")


@dataclass
class OccupancyGrid:
    """An N x N occupancy field plus an explored mask.

    The same type serves as the ground-truth world (fully explored) and as an
    agent's belief (unexplored cells hold the optimistic prior ``phi_u``).
    ``revision`` increments whenever a write changes an occupancy value, which
    lets planners cheaply detect that a cached plan may be stale.
    """

    size: int
    occupancy: np.ndarray
    explored: np.ndarray
    phi_min: int = PHI_MIN
    phi_max: int = PHI_MAX
    phi_obs: int = PHI_OBS
    phi_u: int = PHI_U
    revision: int = field(default=0, compare=False)

    @classmethod
    def world(
        cls,
        occupancy: np.ndarray,
        *,
        phi_min: int = PHI_MIN,
        phi_max: int = PHI_MAX,
        phi_obs: int = PHI_OBS,
        phi_u: int = PHI_U,
    ) -> "OccupancyGrid":
        """Wrap a fully-known occupancy array as a world grid."""
        occupancy = np.asarray(occupancy, dtype=np.int16)
        n = occupancy.shape[0]
        if occupancy.shape != (n, n):
            raise InvalidParameterError(f"world array must be square, got {occupancy.shape}")
        grid = cls(
            size=n,
            occupancy=occupancy,
            explored=np.ones((n, n), dtype=bool),
            phi_min=phi_min,
            phi_max=phi_max,
            phi_obs=phi_obs,
            phi_u=phi_u,
        )
        grid.validate()
        return grid

    @classmethod
    def unknown(
        cls,
        size: int,
        *,
        phi_min: int = PHI_MIN,
        phi_max: int = PHI_MAX,
        phi_obs: int = PHI_OBS,
        phi_u: int = PHI_U,
    ) -> "OccupancyGrid":
        """A fresh belief grid: nothing explored, all cells priced at ``phi_u``."""
        return cls(
            size=size,
            occupancy=np.full((size, size), phi_u, dtype=np.int16),
            explored=np.zeros((size, size), dtype=bool),
            phi_min=phi_min,
            phi_max=phi_max,
            phi_obs=phi_obs,
            phi_u=phi_u,
        )

    @classmethod
    def belief_like(cls, world: "OccupancyGrid") -> "OccupancyGrid":
        """A fresh unexplored belief sharing the world's phi parameters."""
        return cls.unknown(
            world.size,
            phi_min=world.phi_min,
            phi_max=world.phi_max,
            phi_obs=world.phi_obs,
            phi_u=world.phi_u,
        )

    def validate(self) -> None:
        if not (self.phi_min <= self.phi_u <= self.phi_obs <= self.phi_max):
            raise InvalidParameterError(
                f"phi ordering violated: min={self.phi_min} u={self.phi_u} "
                f"obs={self.phi_obs} max={self.phi_max}"
            )
        lo = int(self.occupancy.min())
        hi = int(self.occupancy.max())
        if lo < self.phi_min or hi > self.phi_max:
            raise InvalidParameterError(
                f"occupancy values [{lo}, {hi}] exceed [{self.phi_min}, {self.phi_max}]"
            )

    def in_bounds(self, cell: Cell) -> bool:
        return 1 <= cell.x <= self.size and 1 <= cell.y <= self.size

    def require_in_bounds(self, cell: Cell) -> None:
        if not self.in_bounds(cell):
            raise InvalidCoordinateError(f"cell {tuple(cell)} outside 1..{self.size} grid")

    def value_at(self, cell: Cell) -> int:
        return int(self.occupancy[cell.y - 1, cell.x - 1])

    def is_explored(self, cell: Cell) -> bool:
        return bool(self.explored[cell.y - 1, cell.x - 1])

    def traversable(self, cell: Cell) -> bool:
        return self.value_at(cell) <= self.phi_obs

    def explored_count(self) -> int:
        return int(self.explored.sum())

    def write_cells(self, cells: Iterable[tuple[Cell, int]]) -> int:
        """Write (cell, value) pairs, marking them explored.

        Returns the number of cells that were newly explored. ``revision`` is
        bumped only when some written value differs from the current belief.
        """
        new_explored = 0
        value_changed = False
        occ = self.occupancy
        exp = self.explored
        for cell, value in cells:
            self.require_in_bounds(cell)
            r, c = cell.y - 1, cell.x - 1
            if not exp[r, c]:
                new_explored += 1
                exp[r, c] = True
            if occ[r, c] != value:
                occ[r, c] = value
                value_changed = True
        if value_changed:
            self.revision += 1
        return new_explored

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(
            size=self.size,
            occupancy=self.occupancy.copy(),
            explored=self.explored.copy(),
            phi_min=self.phi_min,
            phi_max=self.phi_max,
            phi_obs=self.phi_obs,
            phi_u=self.phi_u,
            revision=self.revision,
        )

    def same_as(self, other: "OccupancyGrid") -> bool:
        return (
            self.size == other.size
            and np.array_equal(self.occupancy, other.occupancy)
            and np.array_equal(self.explored, other.explored)
            and (self.phi_min, self.phi_max, self.phi_obs, self.phi_u)
            == (other.phi_min, other.phi_max, other.phi_obs, other.phi_u)
        )


def clip_window(center: Cell, window: int, size: int) -> tuple[int, int, int, int]:
    """Inclusive 1-based bounds (x0, x1, y0, y1) of a sensing window clipped to the grid."""
    half = window // 2
    x0 = max(1, center.x - half)
    x1 = min(size, center.x + half)
    y0 = max(1, center.y - half)
    y1 = min(size, center.y + half)
    return x0, x1, y0, y1


def window_cells(world: OccupancyGrid, center: Cell, spec: SensorSpec) -> list[tuple[Cell, int]]:
    """All (cell, true occupancy) pairs of the clipped window, row-major order."""
    world.require_in_bounds(center)
    x0, x1, y0, y1 = clip_window(center, spec.window, world.size)
    occ = world.occupancy
    return [
        (Cell(x, y), int(occ[y - 1, x - 1]))
        for y in range(y0, y1 + 1)
        for x in range(x0, x1 + 1)
    ]


def sense(
    world: OccupancyGrid,
    belief: OccupancyGrid,
    center: Cell,
    spec: SensorSpec,
) -> list[tuple[Cell, int]]:
    """Observe the clipped window around ``center`` and fold it into ``belief``.

    Returns every cell of the clipped window (including already-explored ones)
    with its true occupancy, in row-major order.
    """
    world.require_in_bounds(center)
    if world.size != belief.size:
        raise InvalidParameterError("world and belief grids differ in size")
    x0, x1, y0, y1 = clip_window(center, spec.window, world.size)
    rows = slice(y0 - 1, y1)
    cols = slice(x0 - 1, x1)
    block = world.occupancy[rows, cols]
    if (belief.occupancy[rows, cols] != block).any():
        belief.revision += 1
    belief.occupancy[rows, cols] = block
    belief.explored[rows, cols] = True
    return [
        (Cell(x, y), int(block[y - y0, x - x0]))
        for y in range(y0, y1 + 1)
        for x in range(x0, x1 + 1)
    ]


def _value_noise(size: int, rng: np.random.Generator) -> np.ndarray:
    """Multi-octave value noise sampled at cell centers of the unit square.

    Lattice resolutions are fixed regardless of ``size``, so grids of different
    resolution generated from the same seed sample the same underlying field.
    """
    u = (np.arange(size) + 0.5) / size
    total = np.zeros((size, size))
    weight = 0.0
    for res, amp in _TERRAIN_OCTAVES:
        lattice = rng.random((res + 1, res + 1))
        g = u * res
        i = np.minimum(g.astype(int), res - 1)
        f = g - i
        iy, ix = np.meshgrid(i, i, indexing="ij")
        fy, fx = f[:, None], f[None, :]
        v00 = lattice[iy, ix]
        v01 = lattice[iy, ix + 1]
        v10 = lattice[iy + 1, ix]
        v11 = lattice[iy + 1, ix + 1]
        total += amp * ((1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11))
        weight += amp
    return total / weight


def _border_region_labels(traversable: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """4-connected component labels plus the sorted labels touching the border."""
    labels, _ = ndimage.label(traversable, structure=_FOUR_CONN)
    border = np.zeros_like(traversable)
    border[0, :] = border[-1, :] = True
    border[:, 0] = border[:, -1] = True
    found = sorted(set(np.unique(labels[border & traversable]).tolist()) - {0})
    return labels, found


def _rank01(values: np.ndarray) -> np.ndarray:
    """Map values to their normalized rank in [0, 1], ties broken stably."""
    flat = values.ravel()
    order = np.argsort(np.argsort(flat, kind="stable"), kind="stable")
    return (order / (flat.size - 1)).reshape(values.shape)


def _carve_connectivity(occupancy: np.ndarray) -> None:
    """Open minimal doorways until all traversable border regions join one
    component, setting carved cells to PHI_MIN.

    Doorways follow the cheapest excess-over-threshold route, so carving
    breaches the thinnest stretch of wall and leaves the field otherwise
    intact.
    """
    n = occupancy.shape[0]
    for _ in range(n * n):  # each pass merges two components; always terminates
        labels, border_labels = _border_region_labels(occupancy <= PHI_OBS)
        if len(border_labels) <= 1:
            return
        source = labels == border_labels[0]
        targets = np.isin(labels, border_labels[1:])
        # Multi-source Dijkstra over cells; stepping onto an obstacle costs its
        # excess above the threshold (scaled), plus 1 per step to prefer short routes.
        excess = np.maximum(occupancy.astype(np.int64) - PHI_OBS, 0) * 1024 + 1
        dist = np.full(n * n, np.iinfo(np.int64).max, dtype=np.int64)
        parent = np.full(n * n, -1, dtype=np.int64)
        heap = [(0, int(i)) for i in np.flatnonzero(source.ravel())]
        dist[[i for _, i in heap]] = 0
        heapq.heapify(heap)
        flat_excess = excess.ravel()
        flat_target = targets.ravel()
        goal = -1
        while heap:
            d, idx = heapq.heappop(heap)
            if d > dist[idx]:
                continue
            if flat_target[idx]:
                goal = idx
                break
            r, c = divmod(idx, n)
            for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                if 0 <= nr < n and 0 <= nc < n:
                    nidx = nr * n + nc
                    nd = d + flat_excess[nidx]
                    if nd < dist[nidx]:
                        dist[nidx] = nd
                        parent[nidx] = idx
                        heapq.heappush(heap, (nd, nidx))
        if goal < 0:
            raise GenerationError("connectivity carve failed to reach a border region")
        idx = goal
        while idx >= 0:
            r, c = divmod(idx, n)
            if occupancy[r, c] > PHI_OBS:
                occupancy[r, c] = PHI_MIN
            idx = parent[idx]


def generate_terrain(size: int, seed: int) -> OccupancyGrid:
    """Procedural terrain built from contour bands of smooth value noise.

    Winding obstacle walls trace several quantile level sets of the field and
    free-cost veins trace the level sets in between; the remaining plateau sits
    exactly at ``PHI_U``. Band membership is decided on normalized ranks, so
    wall and vein area fractions are stable across seeds and sizes.

    Deterministic in ``(size, seed)``. Because noise lattices are sampled in
    the unit square, the same seed yields the same underlying field at every
    resolution; connectivity of traversable border regions is then enforced by
    carving minimal doorways rather than by rerolling the field, so
    cross-resolution maps stay aligned.
    """
    if size < 8:
        raise InvalidParameterError(f"terrain size must be >= 8, got {size}")
    rng = np.random.default_rng([seed, 0])
    f = _value_noise(size, rng)
    occupancy = np.full((size, size), PHI_U, dtype=np.int16)
    for level in _TERRAIN_VEIN_LEVELS:
        band = _rank01(np.abs(f - np.quantile(f, level))) < _TERRAIN_VEIN_WIDTH
        occupancy[band] = PHI_MIN
    for level in _TERRAIN_WALL_LEVELS:
        band = _rank01(np.abs(f - np.quantile(f, level))) < _TERRAIN_WALL_WIDTH
        occupancy[band] = PHI_MAX
    _carve_connectivity(occupancy)
    return OccupancyGrid.world(occupancy)


def generate_maze(size: int, seed: int) -> OccupancyGrid:
    """Binary maze: walls at ``PHI_MAX``, corridors at ``PHI_MIN``.

    A recursive-backtracker perfect maze on a coarse lattice, rendered onto the
    grid, then a bounded number of interior walls are knocked out to create
    loops. Deterministic in ``(size, seed)``; the corridor graph is connected.
    """
    if size < 8:
        raise InvalidParameterError(f"maze size must be >= 8, got {size}")
    rng = np.random.default_rng(seed)
    cells = size // 2  # lattice side; rendered maze is 2*cells + 1 >= size
    m = 2 * cells + 1
    grid = np.full((m, m), PHI_MAX, dtype=np.int16)
    grid[1::2, 1::2] = PHI_MIN

    visited = np.zeros((cells, cells), dtype=bool)
    visited[0, 0] = True
    stack = [(0, 0)]
    while stack:
        cy, cx = stack[-1]
        options = []
        for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            ny, nx = cy + dy, cx + dx
            if 0 <= ny < cells and 0 <= nx < cells and not visited[ny, nx]:
                options.append((ny, nx))
        if not options:
            stack.pop()
            continue
        ny, nx = options[rng.integers(len(options))]
        visited[ny, nx] = True
        grid[cy + ny + 1, cx + nx + 1] = PHI_MIN  # wall midway between the two lattice cells
        stack.append((ny, nx))

    # Knock out a few remaining interior walls so the maze has loops.
    walls = [
        (r, c)
        for r in range(1, m - 1)
        for c in range(1, m - 1)
        if grid[r, c] == PHI_MAX
        and (r + c) % 2 == 1
        and (
            (r % 2 == 1 and grid[r, c - 1] == PHI_MIN and grid[r, c + 1] == PHI_MIN)
            or (r % 2 == 0 and grid[r - 1, c] == PHI_MIN and grid[r + 1, c] == PHI_MIN)
        )
    ]
    n_loops = min(cells, len(walls))
    if n_loops:
        for idx in rng.choice(len(walls), size=n_loops, replace=False):
            r, c = walls[idx]
            grid[r, c] = PHI_MIN

    return OccupancyGrid.world(grid[:size, :size])


def lawnmower_waypoints(size: int, spacing: int) -> list[Cell]:
    """Boustrophedon sweep corners: rows every ``spacing`` cells, alternating
    direction, first waypoint repeated at the end so the path is periodic."""
    if not 1 <= spacing < size:
        raise InvalidParameterError(f"spacing must be in [1, {size - 1}], got {spacing}")
    margin = max(1, spacing // 2)
    x_left, x_right = margin, size + 1 - margin
    rows = list(range(margin, size + 1, spacing))
    waypoints: list[Cell] = []
    for i, y in enumerate(rows):
        xs = (x_left, x_right) if i % 2 == 0 else (x_right, x_left)
        for x in xs:
            if not waypoints or waypoints[-1] != Cell(x, y):
                waypoints.append(Cell(x, y))
    waypoints.append(waypoints[0])
    return waypoints


def serialize_map(grid: OccupancyGrid) -> str:
    """Map file content: a header line, then one row of occupancy values per line."""
    lines = [
        f"N {grid.size} PHI_MIN {grid.phi_min} PHI_MAX {grid.phi_max} "
        f"PHI_OBS {grid.phi_obs} PHI_U {grid.phi_u}"
    ]
    for y in range(grid.size):
        lines.append(" ".join(str(int(v)) for v in grid.occupancy[y]))
    return "\n".join(lines) + "\n"


def save_map(grid: OccupancyGrid, path: str | Path) -> None:
    """Write a grid as a text map file."""
    Path(path).write_text(serialize_map(grid), encoding="utf-8")


def parse_map(text: str) -> OccupancyGrid:
    """Parse map file content; raises MapFormatError naming the offending line."""
    header: list[str] | None = None
    rows: list[list[int]] = []
    row_lines: list[int] = []
    header_line = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if header is None:
            header = line.split()
            header_line = lineno
            continue
        try:
            rows.append([int(tok) for tok in line.split()])
        except ValueError:
            raise MapFormatError(f"line {lineno}: non-integer occupancy value")
        row_lines.append(lineno)

    if header is None:
        raise MapFormatError("line 1: missing header")
    expected_keys = ("N", "PHI_MIN", "PHI_MAX", "PHI_OBS", "PHI_U")
    if len(header) != 10 or tuple(header[0::2]) != expected_keys:
        raise MapFormatError(f"line {header_line}: malformed header {' '.join(header)!r}")
    try:
        n, phi_min, phi_max, phi_obs, phi_u = (int(tok) for tok in header[1::2])
    except ValueError:
        raise MapFormatError(f"line {header_line}: non-integer header value")
    if n < 1:
        raise MapFormatError(f"line {header_line}: grid size must be positive")
    if not (phi_min <= phi_u <= phi_obs <= phi_max):
        raise MapFormatError(f"line {header_line}: phi values out of order")

    if len(rows) != n:
        raise MapFormatError(f"line {row_lines[-1] if row_lines else header_line}: expected {n} rows, got {len(rows)}")
    for lineno, row in zip(row_lines, rows):
        if len(row) != n:
            raise MapFormatError(f"line {lineno}: expected {n} values, got {len(row)}")
        for v in row:
            if v < phi_min or v > phi_max:
                raise MapFormatError(f"line {lineno}: value {v} outside [{phi_min}, {phi_max}]")

    return OccupancyGrid.world(
        np.array(rows, dtype=np.int16),
        phi_min=phi_min,
        phi_max=phi_max,
        phi_obs=phi_obs,
        phi_u=phi_u,
    )


def load_map(path: str | Path) -> OccupancyGrid:
    """Read a map file written by save_map."""
    return parse_map(Path(path).read_text(encoding="utf-8"))


def manhattan(a: Cell, b: Cell) -> int:
    return abs(a.x - b.x) + abs(a.y - b.y)


def euclidean(a: Cell, b: Cell) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)
