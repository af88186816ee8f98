"""Problem model for the weekly nurse-rostering covering problem.

A roster assigns every nurse exactly one weekly shift pattern.  A pattern is a
14-element 0/1 vector: positions 0-6 are the day shifts Sun..Sat and positions
7-13 the corresponding nights.  Demand ``R[k, s]`` is the number of nurses of
grade ``s`` *or higher* required on shift ``k`` (grade 1 is the most senior),
so higher grades may stand in for lower ones.

Internally everything is 0-based: shift ``k`` in ``0..13`` and grade column
``s`` in ``0..2`` for grades 1..3.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Mapping, Sequence

import numpy as np

N_DAYS = 7
N_SHIFTS = 14
N_GRADES = 3
MAX_COST = 100

# cost placeholder for (nurse, pattern) pairs outside F(i); never read for valid genes
_INFEASIBLE_COST = 10**6


class InstanceError(ValueError):
    """Base class for malformed instance descriptions."""


class EmptyFeasibleSet(InstanceError):
    def __init__(self, nurse):
        super().__init__(f"nurse {nurse!r} has an empty feasible pattern set")
        self.nurse = nurse


class NonMonotoneDemand(InstanceError):
    def __init__(self, shift: int):
        super().__init__(
            f"demand row for shift {shift + 1} decreases with grade; "
            "R[k][s] must be cumulative (grade s or above)"
        )
        self.shift = shift


class BadCost(InstanceError):
    def __init__(self, nurse, pattern, value):
        super().__init__(
            f"cost {value!r} of nurse {nurse!r} on pattern {pattern!r} "
            f"is outside [0, {MAX_COST}]"
        )
        self.nurse = nurse
        self.pattern = pattern
        self.value = value


class DanglingPattern(InstanceError):
    def __init__(self, nurse, pattern):
        super().__init__(f"nurse {nurse!r} references unknown pattern {pattern!r}")
        self.nurse = nurse
        self.pattern = pattern


class BadPattern(InstanceError):
    pass


class PatternKind(enum.Enum):
    DAY = "day"
    NIGHT = "night"


@dataclass(frozen=True)
class ShiftPattern:
    id: int
    cover: tuple[int, ...]
    kind: PatternKind

    def __post_init__(self):
        if len(self.cover) != N_SHIFTS or any(b not in (0, 1) for b in self.cover):
            raise BadPattern(f"pattern {self.id}: cover must be 14 zero/one values")
        if not any(self.cover):
            raise BadPattern(f"pattern {self.id}: cover is empty")
        days, nights = self.cover[:N_DAYS], self.cover[N_DAYS:]
        if self.kind is PatternKind.DAY and any(nights):
            raise BadPattern(f"pattern {self.id}: day pattern covers a night")
        if self.kind is PatternKind.NIGHT and any(days):
            raise BadPattern(f"pattern {self.id}: night pattern covers a day")

    @classmethod
    def from_cover(cls, id: int, cover: Sequence[int]) -> "ShiftPattern":
        cover = tuple(int(b) for b in cover)
        if len(cover) != N_SHIFTS:
            raise BadPattern(f"pattern {id}: cover must have 14 entries")
        kind = PatternKind.NIGHT if not any(cover[:N_DAYS]) else PatternKind.DAY
        return cls(id, cover, kind)

    @property
    def cover_string(self) -> str:
        return "".join(str(b) for b in self.cover)


@dataclass(frozen=True)
class Nurse:
    index: int
    grade: int
    feasible: tuple[int, ...]
    cost: Mapping[int, int]
    name: str = ""

    def __post_init__(self):
        if self.grade not in (1, 2, 3):
            raise InstanceError(f"nurse {self.name or self.index}: grade must be 1, 2 or 3")
        if not self.feasible:
            raise EmptyFeasibleSet(self.name or self.index)
        if set(self.cost) != set(self.feasible):
            raise InstanceError(
                f"nurse {self.name or self.index}: costs must be given for exactly the feasible patterns"
            )
        for j, c in self.cost.items():
            if not 0 <= c <= MAX_COST:
                raise BadCost(self.name or self.index, j, c)


@dataclass(frozen=True)
class DemandSplit:
    """Grade-exclusive demand: ``S[k, s]`` excludes cover owed by higher grades."""

    S: np.ndarray


def compute_split(R) -> DemandSplit:
    R = np.asarray(R, dtype=np.int64)
    S = R.copy()
    S[:, 1:] = R[:, 1:] - R[:, :-1]
    return DemandSplit(S)


@dataclass(frozen=True, eq=False)
class Instance:
    """A validated stage-two rostering instance.

    Nurses are stored in grade blocks (all grade 1, then grade 2, then grade 3);
    ``grade_boundaries`` holds the two split indices between the blocks.  The
    instance is immutable and the derived numpy tables below are computed once.
    """

    nurses: tuple[Nurse, ...]
    patterns: tuple[ShiftPattern, ...]
    demand: np.ndarray
    grade_boundaries: tuple[int, int]
    pattern_ids: tuple[Any, ...] = field(default=())

    @property
    def n(self) -> int:
        return len(self.nurses)

    @property
    def m(self) -> int:
        return len(self.patterns)

    @cached_property
    def grades(self) -> np.ndarray:
        return np.array([nu.grade for nu in self.nurses], dtype=np.int64)

    @cached_property
    def grade_slices(self) -> tuple[slice, slice, slice]:
        b1, b2 = self.grade_boundaries
        return slice(0, b1), slice(b1, b2), slice(b2, self.n)

    @cached_property
    def covers(self) -> np.ndarray:
        """(m, 14) int array, row j is the cover vector of pattern j."""
        return np.array([p.cover for p in self.patterns], dtype=np.int64).reshape(-1, N_SHIFTS)

    @cached_property
    def covers_f32(self) -> np.ndarray:
        return self.covers.astype(np.float32)

    @cached_property
    def grade_onehot(self) -> np.ndarray:
        """(n, 3) float32 indicator of each nurse's grade column."""
        out = np.zeros((self.n, N_GRADES), dtype=np.float32)
        out[np.arange(self.n), self.grades - 1] = 1
        return out

    @cached_property
    def cost_matrix(self) -> np.ndarray:
        """(n, m) cost table; entries outside F(i) hold a huge sentinel."""
        table = np.full((self.n, self.m), _INFEASIBLE_COST, dtype=np.int64)
        for i, nu in enumerate(self.nurses):
            for j, c in nu.cost.items():
                table[i, j] = c
        return table

    @cached_property
    def cost_matrix_f64(self) -> np.ndarray:
        return self.cost_matrix.astype(np.float64)

    @cached_property
    def feasible_sizes(self) -> np.ndarray:
        return np.array([len(nu.feasible) for nu in self.nurses], dtype=np.int64)

    @cached_property
    def feasible_table(self) -> np.ndarray:
        """(n, max|F|) pattern indices, rows right-padded with their first entry."""
        width = int(self.feasible_sizes.max()) if self.n else 0
        table = np.zeros((self.n, width), dtype=np.int64)
        for i, nu in enumerate(self.nurses):
            table[i, :] = nu.feasible[0]
            table[i, : len(nu.feasible)] = nu.feasible
        return table

    @cached_property
    def feasible_position(self) -> np.ndarray:
        """(n, m) position of pattern j inside nurse i's feasible tuple, -1 if absent."""
        pos = np.full((self.n, self.m), -1, dtype=np.int64)
        for i, nu in enumerate(self.nurses):
            pos[i, list(nu.feasible)] = np.arange(len(nu.feasible))
        return pos

    @cached_property
    def split(self) -> DemandSplit:
        return compute_split(self.demand)

    def q(self, i: int, s: int) -> int:
        """1 if nurse i is of grade s or higher (s is 1-based)."""
        return int(self.nurses[i].grade <= s)

    def r(self, i: int, s: int) -> int:
        """1 if nurse i is exactly of grade s (s is 1-based)."""
        return int(self.nurses[i].grade == s)


def enumerate_patterns(days_on: int, nights_on: int, start_id: int = 0) -> list[ShiftPattern]:
    """All weekly patterns working ``days_on`` days or ``nights_on`` nights.

    Day patterns come first, then night patterns, each group in ascending
    lexicographic order of its 7-bit mask.  A count of zero contributes no
    patterns of that kind.
    """
    if not (0 <= days_on <= N_DAYS and 0 <= nights_on <= N_DAYS):
        raise ValueError("days_on and nights_on must lie in 0..7")
    if days_on == 0 and nights_on == 0:
        raise ValueError("a contract must work at least one day or night")
    out: list[ShiftPattern] = []
    for count, kind in ((days_on, PatternKind.DAY), (nights_on, PatternKind.NIGHT)):
        if count == 0:
            continue
        masks = sorted(m for m in itertools.product((0, 1), repeat=N_DAYS) if sum(m) == count)
        for mask in masks:
            cover = mask + (0,) * N_DAYS if kind is PatternKind.DAY else (0,) * N_DAYS + mask
            out.append(ShiftPattern(start_id + len(out), cover, kind))
    return out


def validate_instance(raw: Mapping[str, Any]) -> Instance:
    """Build an :class:`Instance` from a parsed instance description.

    ``raw`` has keys ``patterns`` (``id``, ``cover`` as a 14-char 0/1 string or
    list), ``nurses`` (``id``, ``grade``, ``feasible`` pattern ids, ``costs``
    parallel to ``feasible``) and ``demand`` (14 rows of 3 cumulative values).
    Nurses are stably re-sorted into grade blocks.
    """
    try:
        raw_patterns = list(raw["patterns"])
        raw_nurses = list(raw["nurses"])
        raw_demand = raw["demand"]
    except (KeyError, TypeError) as exc:
        raise InstanceError(f"instance description is missing {exc}") from None

    pattern_ids: list[Any] = []
    patterns: list[ShiftPattern] = []
    index_of: dict[Any, int] = {}
    for entry in raw_patterns:
        pid = entry["id"]
        if pid in index_of:
            raise BadPattern(f"duplicate pattern id {pid!r}")
        cover = entry["cover"]
        if isinstance(cover, str):
            if any(ch not in "01" for ch in cover):
                raise BadPattern(f"pattern {pid!r}: cover string must contain only 0 and 1")
            cover = [int(ch) for ch in cover]
        index_of[pid] = len(patterns)
        pattern_ids.append(pid)
        patterns.append(ShiftPattern.from_cover(len(patterns), cover))

    demand = np.asarray(raw_demand, dtype=np.int64)
    if demand.shape != (N_SHIFTS, N_GRADES):
        raise InstanceError(f"demand must be 14 rows of 3 values, got shape {demand.shape}")
    if (demand < 0).any():
        raise InstanceError("demand values must be non-negative")
    for k in range(N_SHIFTS):
        if demand[k, 0] > demand[k, 1] or demand[k, 1] > demand[k, 2]:
            raise NonMonotoneDemand(k)

    staged = []
    for pos, entry in enumerate(raw_nurses):
        name = str(entry.get("id", pos))
        feasible_ids = list(entry.get("feasible", []))
        if not feasible_ids:
            raise EmptyFeasibleSet(name)
        costs = list(entry.get("costs", []))
        if len(costs) != len(feasible_ids):
            raise InstanceError(f"nurse {name!r}: costs and feasible lists differ in length")
        feasible: list[int] = []
        cost: dict[int, int] = {}
        for pid, c in zip(feasible_ids, costs):
            if pid not in index_of:
                raise DanglingPattern(name, pid)
            j = index_of[pid]
            if j in cost:
                raise InstanceError(f"nurse {name!r} lists pattern {pid!r} twice")
            if isinstance(c, bool) or not isinstance(c, (int, np.integer)) or not 0 <= c <= MAX_COST:
                raise BadCost(name, pid, c)
            feasible.append(j)
            cost[j] = int(c)
        staged.append((int(entry["grade"]), name, tuple(feasible), cost))

    staged.sort(key=lambda t: t[0])  # stable: keeps file order within a grade
    nurses = tuple(
        Nurse(index=i, grade=g, feasible=f, cost=c, name=name)
        for i, (g, name, f, c) in enumerate(staged)
    )
    grades = [nu.grade for nu in nurses]
    b1 = sum(1 for g in grades if g == 1)
    b2 = b1 + sum(1 for g in grades if g == 2)
    return Instance(
        nurses=nurses,
        patterns=tuple(patterns),
        demand=demand,
        grade_boundaries=(b1, b2),
        pattern_ids=tuple(pattern_ids),
    )


def grade_block_cover(inst: Instance, genes: np.ndarray) -> np.ndarray:
    """Exact-grade cover for one or many gene vectors.

    ``genes`` of shape (..., n) gives cover of shape (..., 14, 3).
    """
    # float32 matmul is exact for these small counts and much faster than int sums
    per_nurse = inst.covers_f32[genes]  # (..., n, 14)
    cover = np.matmul(np.swapaxes(per_nurse, -1, -2), inst.grade_onehot)
    return cover.astype(np.int64)


class Individual:
    """One roster: ``genes[i]`` is the pattern index worked by nurse ``i``.

    ``cover`` caches the exact-grade cover matrix (14, 3) and is kept in step
    with the genes by :meth:`set_gene`.  ``score`` is a free slot for whatever
    adjusted fitness the caller last computed; it is cleared on every change.
    """

    __slots__ = ("inst", "genes", "cover", "score")

    def __init__(self, inst: Instance, genes, cover: np.ndarray | None = None):
        self.inst = inst
        self.genes = np.array(genes, dtype=np.int64)
        if self.genes.shape != (inst.n,):
            raise ValueError(f"expected {inst.n} genes, got shape {self.genes.shape}")
        if cover is None:
            cover = grade_block_cover(inst, self.genes)
        self.cover = cover
        self.score: float | None = None

    def set_gene(self, i: int, j: int) -> None:
        old = self.genes[i]
        if old == j:
            return
        col = self.inst.nurses[i].grade - 1
        self.cover[:, col] += self.inst.covers[j] - self.inst.covers[old]
        self.genes[i] = j
        self.score = None

    def copy(self) -> "Individual":
        return Individual(self.inst, self.genes.copy(), self.cover.copy())

    def is_valid(self) -> bool:
        return all(int(g) in nu.cost for g, nu in zip(self.genes, self.inst.nurses))

    def __eq__(self, other):
        if not isinstance(other, Individual):
            return NotImplemented
        return self.inst is other.inst and np.array_equal(self.genes, other.genes)

    def __repr__(self):
        return f"Individual({self.genes.tolist()})"


def raw_cost(inst: Instance, ind: Individual) -> int:
    return int(inst.cost_matrix[np.arange(inst.n), ind.genes].sum())


def cover_counts(inst: Instance, ind: Individual) -> np.ndarray:
    """Exact-grade cover ``C[k, s]`` recomputed from the genes."""
    return grade_block_cover(inst, ind.genes)


def cumulative_cover(cover: np.ndarray) -> np.ndarray:
    return np.cumsum(cover, axis=-1)


def shortfall(inst: Instance, cover: np.ndarray) -> np.ndarray:
    """Per-(k, s) under-cover against the cumulative demand."""
    return np.maximum(inst.demand - cumulative_cover(cover), 0)


def deficit(inst: Instance, ind: Individual) -> tuple[int, int]:
    """Total under-cover and number of violated (shift, grade) constraints."""
    short = shortfall(inst, ind.cover)
    return int(short.sum()), int((short > 0).sum())


def is_feasible(inst: Instance, ind: Individual) -> bool:
    return deficit(inst, ind)[0] == 0
