"""Per-timestep bandwidth split across seekers and top-value cell selection.

The budget problem is a one-row integer knapsack with box bounds: maximize
e . b subject to sum(b) <= B and b_min <= b <= d. Because the objective is
separable and linear, spending the residual budget greedily on the largest
coefficient with remaining slack is exact; a brute-force oracle in the test
suite cross-checks that claim.

Bandwidth is counted in cell units by default (b0 = 1, so B caps the cells
sent per communication event). A coarser b0 makes grants multiples of b0.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import AllocationError, InvalidParameterError
from .grid import Cell, OccupancyGrid
from .supporter import SeekerLedger


@dataclass(frozen=True)
class AllocationProblem:
    """Inputs for one allocation round, all in cell units.

    ``d`` is the number of informative cells available per seeker, ``e`` the
    per-seeker path uncertainty, ``budget_cells`` the shared cap, ``b_min``
    the guaranteed floor (uncertainty share of the budget, clamped to
    availability).
    """

    d: tuple[int, ...]
    e: tuple[float, ...]
    budget_cells: int
    b_min: tuple[int, ...]

    @classmethod
    def build(
        cls,
        d: list[int],
        e: list[float],
        bandwidth: int,
        b0: int = 1,
        team_size: int | None = None,
    ) -> "AllocationProblem":
        if len(d) != len(e):
            raise InvalidParameterError("d and e must have equal length")
        if bandwidth < 1 or b0 < 1:
            raise InvalidParameterError("bandwidth and b0 must be positive")
        if any(v < 0 for v in d):
            raise InvalidParameterError(f"availability must be nonnegative, got {d}")
        if any(not 0.0 <= v <= 1.0 for v in e):
            raise InvalidParameterError(f"uncertainty values must lie in [0, 1], got {e}")
        size = team_size if team_size is not None else len(d)
        if size < max(1, len(d)):
            raise InvalidParameterError("team_size cannot be smaller than the problem")
        budget_cells = bandwidth // b0
        b_min = tuple(
            min(int(e_r * budget_cells / size), d_r) for e_r, d_r in zip(e, d)
        )
        return cls(d=tuple(d), e=tuple(e), budget_cells=budget_cells, b_min=b_min)


def allocate(problem: AllocationProblem) -> list[int]:
    """Optimal integer grants, starting from the floor and topping up the
    highest-uncertainty seekers first (ties toward the smaller index).

    Seekers with zero uncertainty keep their floor: any split of leftover
    budget among them scores the same, and the floor is the canonical one.
    """
    b = list(problem.b_min)
    residual = problem.budget_cells - sum(b)
    if residual < 0:
        raise AllocationError(
            f"floor allocation {problem.b_min} exceeds budget {problem.budget_cells}"
        )
    by_preference = sorted(
        range(len(b)), key=lambda r: (-problem.e[r], r)
    )
    for r in by_preference:
        if residual == 0 or problem.e[r] == 0.0:
            break
        topup = min(problem.d[r] - b[r], residual)
        b[r] += topup
        residual -= topup
    return b


def select_cells(
    ledger: SeekerLedger,
    belief: OccupancyGrid,
    grant: int,
    b0: int = 1,
) -> list[tuple[Cell, int]]:
    """Consume a grant: take the highest-value cells off the ledger's priority
    order, pair them with their occupancy, and mark them transferred.

    ``grant`` is in bandwidth units and must be a multiple of ``b0``; the cell
    count is grant / b0. Marked cells keep zero value at every later refresh,
    so a (seeker, cell) pair can never be sent twice.
    """
    if grant < 0:
        raise InvalidParameterError(f"grant must be nonnegative, got {grant}")
    if grant % b0 != 0:
        raise InvalidParameterError(f"grant {grant} is not a multiple of b0={b0}")
    tau = grant // b0
    if tau > ledger.informative_count:
        raise AllocationError(
            f"grant of {tau} cells exceeds {ledger.informative_count} informative cells"
        )
    if tau == 0:
        return []
    taken = ledger.order[:tau]
    ledger.order = ledger.order[tau:]
    n = ledger.size
    flat_occ = belief.occupancy.ravel()
    out = []
    for idx in taken.tolist():
        y, x = divmod(idx, n)
        ledger.transferred[y, x] = True
        ledger.voi[y, x] = 0.0
        out.append((Cell(x + 1, y + 1), int(flat_occ[idx])))
    return out
