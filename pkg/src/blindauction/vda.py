"""Multi-item unit-demand Vickrey-Dutch auction.

Prices start at a uniform high level and descend by ``delta_p`` on every item in
excess supply until each item is universally allocated. With integer valuations
and ``delta_p == 1`` the result is the minimal equilibrium (VCG) price vector.

Arrays follow one convention everywhere: a valuation matrix ``v`` has shape
``(B, I + 1)`` with column 0 the null item; price vectors and reserve vectors
have length ``I + 1`` with entry 0 pinned to 0. Bidders are 0-based row
indices, items are 1-based column indices.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

log = logging.getLogger(__name__)


class SolverError(ValueError):
    pass


class DimensionMismatch(SolverError):
    pass


class TooLarge(SolverError):
    pass


@dataclass(frozen=True)
class Solution:
    """Assignment ``x_b`` per bidder, price per item (index 0 is the null item) and declared score."""

    assignment: tuple[int, ...]
    prices: tuple[int, ...]
    score: int

    def to_dict(self) -> dict:
        return {"assignment": list(self.assignment), "prices": list(self.prices), "score": self.score}

    @classmethod
    def from_dict(cls, data: dict) -> Solution:
        return cls(
            tuple(int(x) for x in data["assignment"]),
            tuple(int(x) for x in data["prices"]),
            int(data["score"]),
        )

    def replace(self, **changes) -> Solution:
        fields = {"assignment": self.assignment, "prices": self.prices, "score": self.score}
        fields.update(changes)
        return Solution(tuple(fields["assignment"]), tuple(fields["prices"]), int(fields["score"]))


@dataclass(frozen=True)
class VdaConfig:
    delta_p: int = 1
    # None: start every item at the largest valuation in the matrix
    p_max: int | None = None

    def __post_init__(self):
        if self.delta_p < 1:
            raise SolverError("delta_p must be >= 1")


@dataclass
class VdaStats:
    iterations: int = 0
    rounds: int = 0
    p_start: int = 0
    price_path: list = field(default_factory=list)


def reserve_vector(reserves: Sequence[int], n_items: int | None = None) -> np.ndarray:
    """Prepend the null item's reserve (0) to per-item reservation prices."""
    r = np.concatenate([[0], np.asarray(list(reserves), dtype=np.int64)]).astype(np.int64)
    if n_items is not None and len(r) != n_items + 1:
        raise DimensionMismatch(f"expected {n_items} reservation prices, got {len(r) - 1}")
    if (r < 0).any():
        raise SolverError("reservation prices must be >= 0")
    return r


def _check(v: np.ndarray, p: np.ndarray | None = None) -> None:
    if v.ndim != 2 or v.shape[1] < 1:
        raise DimensionMismatch(f"valuation matrix must be 2-D with a null column, got shape {v.shape}")
    if p is not None and len(p) != v.shape[1]:
        raise DimensionMismatch(f"price vector has {len(p)} entries, matrix has {v.shape[1]} columns")


def demand_matrix(v: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Boolean ``(B, I + 1)`` matrix; row b marks ``D_b(p)``."""
    v = np.asarray(v, dtype=np.int64)
    p = np.asarray(p, dtype=np.int64)
    _check(v, p)
    nets = v - p
    if nets.shape[0] == 0:
        return np.zeros(nets.shape, dtype=bool)
    return nets == nets.max(axis=1, keepdims=True)


def demand_correspondence(v_row: Sequence[int], p: Sequence[int]) -> frozenset[int]:
    v_row = np.asarray(v_row, dtype=np.int64)
    p = np.asarray(p, dtype=np.int64)
    if v_row.shape != p.shape:
        raise DimensionMismatch(f"valuation row has {len(v_row)} entries, prices {len(p)}")
    nets = v_row - p
    return frozenset(int(i) for i in np.flatnonzero(nets == nets.max()))


def _as_demand_matrix(demands, n_items: int | None) -> np.ndarray:
    if isinstance(demands, np.ndarray):
        return demands.astype(bool)
    demands = [set(d) for d in demands]
    if n_items is None:
        n_items = max((max(d) for d in demands if d), default=0)
    D = np.zeros((len(demands), n_items + 1), dtype=bool)
    for b, d in enumerate(demands):
        D[b, sorted(d)] = True
    return D


def provisional_assignment(demands, above_reserve: Iterable[int] | None = None, n_items: int | None = None) -> tuple[int, ...]:
    """Match bidders to items in their demand sets.

    The matching is maximum-cardinality and, among those, covers as many
    ``above_reserve`` items and as many bidders who strictly prefer some real
    item to the null item as possible. A single matching attains all three
    maxima at once, so one weighted assignment with positive per-edge bonuses
    finds it. Covering the above-reserve items is what makes the universal
    allocation closure exact; the plain maximum-cardinality matching is not
    enough when some items already sit at their reserve.
    """
    D = _as_demand_matrix(demands, n_items)
    n_bidders, width = D.shape
    assignment = [0] * n_bidders
    if n_bidders == 0 or width <= 1:
        return tuple(assignment)
    edges = D[:, 1:]
    weight = edges.astype(np.int64)
    if above_reserve is not None:
        bonus = np.zeros(width - 1, dtype=np.int64)
        idx = [i - 1 for i in above_reserve]
        bonus[idx] = 1
        weight += edges * bonus[None, :]
    must_buy = ~D[:, 0]
    weight += edges * must_buy[:, None]
    rows, cols = linear_sum_assignment(weight, maximize=True)
    for b, c in zip(rows, cols):
        if weight[b, c] > 0:
            assignment[b] = int(c) + 1
    return tuple(assignment)


def universally_allocated(p, demands, assignment: Sequence[int], reserves) -> set[int]:
    """Closure of items at reserve or reachable from unassigned bidders' demands.

    Seed with items priced at their reserve plus items demanded by bidders who
    hold the null item; then repeatedly add every item demanded by a bidder who
    holds an item already in the set.
    """
    p = np.asarray(p, dtype=np.int64)
    n_items = len(p) - 1
    r = reserve_vector(reserves, n_items) if len(reserves) == n_items else np.asarray(reserves, dtype=np.int64)
    D = _as_demand_matrix(demands, n_items)
    return {int(i) for i in np.flatnonzero(closure_mask(p, r, D, np.asarray(assignment, dtype=np.int64)))}


def closure_mask(p: np.ndarray, r: np.ndarray, D: np.ndarray, x: np.ndarray) -> np.ndarray:
    n_items = len(p) - 1
    inside = np.zeros(n_items + 1, dtype=bool)
    inside[1:] = p[1:] == r[1:]
    if len(x):
        inside[1:] |= D[x == 0, 1:].any(axis=0)
    holder = np.full(n_items + 1, -1, dtype=np.int64)
    owned = x > 0
    holder[x[owned]] = np.flatnonzero(owned)
    expanded = np.zeros(n_items + 1, dtype=bool)
    while True:
        frontier = inside & ~expanded
        frontier[0] = False
        if not frontier.any():
            return inside
        expanded |= frontier
        bidders = holder[frontier]
        bidders = bidders[bidders >= 0]
        if len(bidders):
            inside[1:] |= D[bidders, 1:].any(axis=0)


def excess_supply(p, universally: Iterable[int], reserves) -> set[int]:
    p = np.asarray(p, dtype=np.int64)
    n_items = len(p) - 1
    r = reserve_vector(reserves, n_items) if len(reserves) == n_items else np.asarray(reserves, dtype=np.int64)
    universally = set(universally)
    return {i for i in range(1, n_items + 1) if p[i] > r[i] and i not in universally}


def score_of(assignment: Sequence[int], prices: Sequence[int], v: np.ndarray) -> int:
    if len(assignment) == 0:
        return 0
    x = np.asarray(assignment, dtype=np.int64)
    p = np.asarray(prices, dtype=np.int64)
    return int((v[np.arange(len(x)), x] - p[x]).sum())


def _stable_steps(v, p, r, D, si, delta_p) -> int:
    """How many consecutive decrements of ``si`` leave demands and reserves unchanged, plus one."""
    steps = math.inf
    gaps = p[si] - r[si]
    steps = min(steps, int(np.min(-(-gaps // delta_p))))
    if v.shape[0]:
        nets = v - p
        in_si = D & si[None, :]
        out_si = D & ~si[None, :]
        if (in_si.any(axis=1) & out_si.any(axis=1)).any():
            return 1
        only_out = ~in_si.any(axis=1)
        if only_out.any():
            best = nets[only_out].max(axis=1)
            best_si = nets[only_out][:, si].max(axis=1)
            gap = best - best_si
            steps = min(steps, int(np.min(-(-gap // delta_p))))
    return max(1, int(steps))


def run_vda(v, reserves: Sequence[int], cfg: VdaConfig | None = None, stats: VdaStats | None = None,
            record_prices: bool = False) -> Solution:
    """Solve the auction for valuation matrix ``v`` and per-item reservation prices.

    Iterations in which nothing but the prices of excess-supply items would
    change are applied in one jump; ``stats.iterations`` still counts each
    ``delta_p`` decrement.
    """
    cfg = cfg or VdaConfig()
    v = np.asarray(v, dtype=np.int64)
    _check(v)
    n_bidders, width = v.shape
    n_items = width - 1
    r = reserve_vector(reserves, n_items)
    stats = stats if stats is not None else VdaStats()

    p_bar = cfg.p_max if cfg.p_max is not None else (int(v.max()) if v.size else 0)
    p = np.maximum(np.full(width, p_bar, dtype=np.int64), r)
    p[0] = 0
    stats.p_start = p_bar

    while True:
        stats.rounds += 1
        if record_prices:
            stats.price_path.append(tuple(int(c) for c in p))
        D = demand_matrix(v, p)
        above = np.flatnonzero(p[1:] > r[1:]) + 1
        x = np.asarray(provisional_assignment(D, above), dtype=np.int64)
        inside = closure_mask(p, r, D, x)
        si = (p > r) & ~inside
        si[0] = False
        stats.iterations += 1
        if not si.any():
            prices = tuple(int(c) for c in p)
            assignment = tuple(int(c) for c in x)
            log.debug("vda done: %d iterations in %d rounds", stats.iterations, stats.rounds)
            return Solution(assignment, prices, score_of(assignment, prices, v))
        steps = _stable_steps(v, p, r, D, si, cfg.delta_p)
        p[si] = np.maximum(p[si] - steps * cfg.delta_p, r[si])
        stats.iterations += steps - 1


# -- brute-force reference ------------------------------------------------------

ORACLE_MAX_BIDDERS = 8
ORACLE_MAX_ITEMS = 6


def _best_allocation(surplus: np.ndarray, bidders: Sequence[int], n_items: int):
    """Max total surplus over feasible allocations of ``bidders``, by DP over item subsets."""
    full = 1 << n_items
    best = np.zeros(full, dtype=np.int64)
    choices = []
    for b in reversed(bidders):
        new = best.copy()
        choice = np.zeros(full, dtype=np.int64)
        for mask in range(full):
            for i in range(1, n_items + 1):
                bit = 1 << (i - 1)
                s = surplus[b, i]
                if s > 0 and not mask & bit and s + best[mask | bit] > new[mask]:
                    new[mask] = s + best[mask | bit]
                    choice[mask] = i
        choices.append(choice)
        best = new
    choices.reverse()
    allocation = {}
    mask = 0
    for b, choice in zip(bidders, choices):
        i = int(choice[mask])
        allocation[b] = i
        if i:
            mask |= 1 << (i - 1)
    return int(best[0]), allocation


def vcg_oracle(v, reserves: Sequence[int]) -> Solution:
    """Efficient allocation with Clarke-pivot prices, by exhaustive search.

    Each winner pays ``v_b,x_b - (W(B) - W(B minus b))``; unassigned items are
    priced at their reserve.
    """
    v = np.asarray(v, dtype=np.int64)
    _check(v)
    n_bidders, width = v.shape
    n_items = width - 1
    if n_bidders > ORACLE_MAX_BIDDERS or n_items > ORACLE_MAX_ITEMS:
        raise TooLarge(f"oracle limited to {ORACLE_MAX_BIDDERS}x{ORACLE_MAX_ITEMS}, got {n_bidders}x{n_items}")
    r = reserve_vector(reserves, n_items)
    surplus = v - r[None, :]
    everyone = list(range(n_bidders))
    total, allocation = _best_allocation(surplus, everyone, n_items)
    prices = r.copy()
    assignment = [0] * n_bidders
    for b, i in allocation.items():
        if i == 0:
            continue
        assignment[b] = i
        without_b, _ = _best_allocation(surplus, [c for c in everyone if c != b], n_items)
        prices[i] = v[b, i] - (total - without_b)
    prices[0] = 0
    prices_t = tuple(int(c) for c in prices)
    return Solution(tuple(assignment), prices_t, score_of(assignment, prices_t, v))


def total_surplus(sol: Solution, v, reserves) -> int:
    """Bidder valuations minus reserves over assigned items."""
    v = np.asarray(v, dtype=np.int64)
    r = reserve_vector(reserves, v.shape[1] - 1)
    x = np.asarray(sol.assignment, dtype=np.int64)
    if len(x) == 0:
        return 0
    return int((v[np.arange(len(x)), x] - r[x]).sum())


def is_feasible(assignment: Sequence[int], n_bidders: int, n_items: int) -> bool:
    if len(assignment) != n_bidders:
        return False
    real = [i for i in assignment if i != 0]
    return all(0 <= i <= n_items for i in assignment) and len(real) == len(set(real))


def is_equilibrium(sol: Solution, v, reserves) -> bool:
    v = np.asarray(v, dtype=np.int64)
    _check(v)
    n_bidders, width = v.shape
    n_items = width - 1
    r = reserve_vector(reserves, n_items)
    p = np.asarray(sol.prices, dtype=np.int64)
    if len(p) != width or p[0] != 0:
        return False
    if not is_feasible(sol.assignment, n_bidders, n_items):
        return False
    if (p[1:] < r[1:]).any():
        return False
    x = np.asarray(sol.assignment, dtype=np.int64)
    if n_bidders:
        D = demand_matrix(v, p)
        if not D[np.arange(n_bidders), x].all():
            return False
    assigned = np.zeros(width, dtype=bool)
    assigned[x[x > 0]] = True
    unassigned = ~assigned
    unassigned[0] = False
    return bool((p[unassigned] == r[unassigned]).all())
