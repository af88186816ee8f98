"""Scoring: penalised fitness, adaptive penalty weights, grade-scoped
sub-fitness, balance classification with incentives, and rank weights.

All scores are minimised.  Each function has a single-individual form and,
where the engine needs it, a batch form working on stacked cover arrays.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .model import N_DAYS, Individual, Instance, cumulative_cover, raw_cost, shortfall

DEFAULT_ALPHA = 8.0
DEFAULT_FLOOR = 5.0
INITIAL_WEIGHT = 10.0
DEFAULT_INCENTIVE = 3.0


class BalanceClass(enum.IntEnum):
    FEASIBLE = 0
    BALANCED = 1
    UNBALANCED = 2
    UNDECIDED = 3


@dataclass(frozen=True)
class PenaltyState:
    """Adaptive under-cover weight of one population.

    ``best_violations`` is None until the first update, in which case the
    initial ``weight`` is in force.
    """

    weight: float = INITIAL_WEIGHT
    alpha: float = DEFAULT_ALPHA
    floor: float = DEFAULT_FLOOR
    best_violations: int | None = None

    def __post_init__(self):
        if self.alpha <= 0 or self.floor <= 0:
            raise ValueError("alpha and floor must be positive")


def penalty_weight(alpha: float, floor: float, q: int) -> float:
    return alpha * q if q > 0 else floor


def update_penalty(state: PenaltyState, best_q: int) -> PenaltyState:
    if best_q < 0:
        raise ValueError("violation count must be non-negative")
    return replace(state, best_violations=int(best_q),
                   weight=penalty_weight(state.alpha, state.floor, best_q))


@dataclass(frozen=True)
class GradeScope:
    """Grades a population is scored on.

    Split scopes use exact-grade cover against the grade-exclusive demand;
    the cumulative scope is the original whole-problem fitness.
    """

    grades: frozenset[int]
    cumulative: bool = False

    def __post_init__(self):
        if not self.grades or not self.grades <= {1, 2, 3}:
            raise ValueError(f"bad grade scope {set(self.grades)}")
        if self.cumulative and self.grades != {1, 2, 3}:
            raise ValueError("cumulative scope must span all grades")

    @property
    def mask(self) -> np.ndarray:
        return np.array([g in self.grades for g in (1, 2, 3)])

    def __str__(self):
        label = "+".join(str(g) for g in sorted(self.grades))
        return f"{label} (cumulative)" if self.cumulative else label


POPULATION_SCOPES: dict[int, GradeScope] = {
    1: GradeScope(frozenset({1})),
    2: GradeScope(frozenset({2})),
    3: GradeScope(frozenset({3})),
    4: GradeScope(frozenset({1, 2})),
    5: GradeScope(frozenset({1, 3})),
    6: GradeScope(frozenset({2, 3})),
    7: GradeScope(frozenset({1, 2, 3})),
    8: GradeScope(frozenset({1, 2, 3}), cumulative=True),
}


def penalized_fitness(inst: Instance, ind: Individual, weight: float) -> float:
    return raw_cost(inst, ind) + weight * int(shortfall(inst, ind.cover).sum())


def split_shortfall(inst: Instance, cover: np.ndarray) -> np.ndarray:
    """Per-(k, s) shortfall of exact-grade cover against split demand."""
    return np.maximum(inst.split.S - cover, 0)


def grade_costs(inst: Instance, genes: np.ndarray) -> np.ndarray:
    """Preference cost summed per grade block, shape (..., 3)."""
    per_nurse = inst.cost_matrix[np.arange(inst.n), genes]
    return np.stack([per_nurse[..., sl].sum(axis=-1) for sl in inst.grade_slices], axis=-1)


def sub_fitness(inst: Instance, ind: Individual, scope: GradeScope, weight: float) -> float:
    if scope.cumulative:
        return penalized_fitness(inst, ind, weight)
    mask = scope.mask
    cost = grade_costs(inst, ind.genes)[mask].sum()
    under = split_shortfall(inst, ind.cover)[:, mask].sum()
    return float(cost + weight * under)


def scope_violations(inst: Instance, ind: Individual, scope: GradeScope) -> int:
    if scope.cumulative:
        return int((shortfall(inst, ind.cover) > 0).sum())
    return int((split_shortfall(inst, ind.cover)[:, scope.mask] > 0).sum())


def over_cover(inst: Instance, cover: np.ndarray) -> np.ndarray:
    """Aggregate over(+)/under(-) cover per shift, using all grades."""
    return cumulative_cover(cover)[..., 2] - inst.demand[:, 2]


_HALVES = np.zeros((14, 2), dtype=np.float32)
_HALVES[:N_DAYS, 0] = 1
_HALVES[N_DAYS:, 1] = 1


def classify_over(o) -> np.ndarray:
    """Balance class codes for over-cover rows of shape (..., 14)."""
    o = np.asarray(o, dtype=np.float32)
    over = np.maximum(o, 0) @ _HALVES     # (..., 2): days, nights
    under = np.maximum(-o, 0) @ _HALVES
    over_d, over_n = over[..., 0], over[..., 1]
    under_d, under_n = under[..., 0], under[..., 1]
    has_ud, has_od = under_d > 0, over_d > 0
    has_un, has_on = under_n > 0, over_n > 0

    feasible = ~(has_ud | has_un)
    perfect_d = ~has_ud & ~has_od
    perfect_n = ~has_un & ~has_on
    balanced = (
        (perfect_d & has_un & has_on & (over_n >= under_n))
        | (perfect_n & has_ud & has_od & (over_d >= under_d))
    )
    unbalanced = (
        (has_ud | has_un)
        & ~(has_od & has_on)
        & ~(has_ud & has_od & (over_d >= under_d))
        & ~(has_un & has_on & (over_n >= under_n))
    )
    codes = np.full(o.shape[:-1], int(BalanceClass.UNDECIDED), dtype=np.int64)
    codes[unbalanced] = BalanceClass.UNBALANCED
    codes[balanced] = BalanceClass.BALANCED
    codes[feasible] = BalanceClass.FEASIBLE
    return codes


def classify_balance(inst: Instance, ind: Individual) -> BalanceClass:
    return BalanceClass(int(classify_over(over_cover(inst, ind.cover))))


def incentive_shift(codes, weight: float, factor: float,
                    bonus: bool = True, malus: bool = True) -> np.ndarray:
    """Score offset per class: minus for balanced, plus for unbalanced."""
    codes = np.asarray(codes)
    shift = np.zeros(codes.shape, dtype=float)
    if bonus:
        shift[codes == BalanceClass.BALANCED] = -factor * weight
    if malus:
        shift[codes == BalanceClass.UNBALANCED] = factor * weight
    return shift


def adjusted_score(inst: Instance, ind: Individual, weight: float,
                   incentive_factor: float = DEFAULT_INCENTIVE,
                   *, bonus: bool = True, malus: bool = True) -> float:
    if incentive_factor < 0:
        raise ValueError("incentive factor must be non-negative")
    base = penalized_fitness(inst, ind, weight)
    code = classify_balance(inst, ind)
    return float(base + incentive_shift(int(code), weight, incentive_factor, bonus, malus))


def rank_population(scores) -> tuple[np.ndarray, np.ndarray]:
    """Linear ranking: rank 1 is the lowest score, weight of rank r is N - r + 1.

    Ties keep index order.  Returns (ranks, normalised selection weights),
    both aligned with the input order.
    """
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        raise ValueError("cannot rank an empty population")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(scores.size, dtype=np.int64)
    ranks[order] = np.arange(1, scores.size + 1)
    w = (scores.size - ranks + 1).astype(float)
    return ranks, w / w.sum()


def linear_rank_probabilities(size: int) -> np.ndarray:
    """Selection probability by rank position (index 0 = best)."""
    w = np.arange(size, 0, -1, dtype=float)
    return w / w.sum()


@lru_cache(maxsize=None)
def _rank_cdf(size: int) -> np.ndarray:
    return np.cumsum(linear_rank_probabilities(size))


def sample_ranks(size: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` rank positions (0 = best) with linear-rank probabilities."""
    pos = np.searchsorted(_rank_cdf(size), rng.random(count), side="right")
    return np.minimum(pos, size - 1)


@dataclass
class BatchStats:
    """Per-row scoring terms for a stacked set of rosters."""

    cost_by_grade: np.ndarray   # (N, 3)
    split_under: np.ndarray     # (N, 3) summed over shifts
    split_violations: np.ndarray  # (N, 3)
    cum_under: np.ndarray       # (N,)
    cum_violations: np.ndarray  # (N,)
    balance: np.ndarray         # (N,) BalanceClass codes

    @property
    def raw_cost(self) -> np.ndarray:
        return self.cost_by_grade.sum(axis=1)

    @property
    def feasible(self) -> np.ndarray:
        return self.cum_under == 0

    def take(self, rows) -> "BatchStats":
        return BatchStats(*(getattr(self, f)[rows] for f in _STAT_FIELDS))

    def put(self, rows, other: "BatchStats") -> None:
        for f in _STAT_FIELDS:
            getattr(self, f)[rows] = getattr(other, f)


_STAT_FIELDS = ("cost_by_grade", "split_under", "split_violations",
                "cum_under", "cum_violations", "balance")


def batch_stats(inst: Instance, genes: np.ndarray) -> tuple[BatchStats, np.ndarray]:
    """Scoring terms and exact-grade cover (N, 14, 3) for ``genes`` (N, n).

    Everything is routed through float32 matmuls, which are exact for these
    small integer counts and far cheaper than strided integer reductions.
    """
    tables = _batch_tables(inst)
    per_nurse = inst.covers_f32[genes]                    # (N, n, 14)
    # rows 0-2: exact-grade cover, rows 3-5: cumulative cover
    cover6 = np.matmul(tables["weights"], per_nurse)      # (N, 6, 14)
    gap = tables["targets"] - cover6                       # [split gap | cumulative gap]
    ones = tables["ones"]
    under = np.maximum(gap, 0) @ ones                      # (N, 6)
    violated = (gap > 0).astype(np.float32) @ ones
    costs = inst.cost_matrix_f64[np.arange(inst.n), genes] @ tables["onehot64"]
    stats = BatchStats(
        cost_by_grade=np.rint(costs).astype(np.int64),
        split_under=under[:, :3].astype(np.int64),
        split_violations=violated[:, :3].astype(np.int64),
        cum_under=under[:, 3:].sum(axis=1).astype(np.int64),
        cum_violations=violated[:, 3:].sum(axis=1).astype(np.int64),
        balance=classify_over(-gap[:, 5, :]),
    )
    cover = np.swapaxes(cover6[:, :3, :], 1, 2).astype(np.int64)
    return stats, cover


def _batch_tables(inst: Instance) -> dict:
    cached = inst.__dict__.get("_batch_tables")
    if cached is None:
        upper = np.triu(np.ones((3, 3), dtype=np.float32))
        onehot = inst.grade_onehot
        weights = np.concatenate([onehot, onehot @ upper], axis=1).T   # (6, n)
        targets = np.concatenate([inst.split.S, inst.demand], axis=1).T  # (6, 14)
        cached = {
            "weights": np.ascontiguousarray(weights, dtype=np.float32),
            "targets": np.ascontiguousarray(targets, dtype=np.float32),
            "ones": np.ones(14, dtype=np.float32),
            "onehot64": onehot.astype(np.float64),
        }
        inst.__dict__["_batch_tables"] = cached
    return cached


def batch_scores(stats: BatchStats, scope: GradeScope, weight: float) -> np.ndarray:
    """Unadjusted scores of every row under ``scope``."""
    if scope.cumulative:
        return stats.raw_cost + weight * stats.cum_under
    mask = scope.mask
    return stats.cost_by_grade[:, mask].sum(1) + weight * stats.split_under[:, mask].sum(1)


def batch_violations(stats: BatchStats, scope: GradeScope) -> np.ndarray:
    if scope.cumulative:
        return stats.cum_violations
    return stats.split_violations[:, scope.mask].sum(1)
