"""Synthetic ward instances.

Wards have 20-30 nurses in three grade bands working one of four contracts
(5 days or 4 nights, 4d/3n, 3d/3n, 3d/2n).  Demand is laid out from a hidden
day/night split of the workforce: for each grade the weekly capacity of
its nurses assigned to days (resp. nights) is scaled by the tightness and
spread as evenly as possible over the seven shifts.  The cumulative demand
R is the running sum over grades, so it is monotone in the grade.  For
tightness <= 1 each grade's share is also capped by a cyclic reference
roster, which therefore satisfies both the cumulative and the per-grade
demands.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .model import (
    MAX_COST,
    N_DAYS,
    N_GRADES,
    N_SHIFTS,
    Instance,
    PatternKind,
    ShiftPattern,
    enumerate_patterns,
    validate_instance,
)

CONTRACTS: dict[str, tuple[int, int]] = {
    "5d/4n": (5, 4),
    "4d/3n": (4, 3),
    "3d/3n": (3, 3),
    "3d/2n": (3, 2),
}


class UnsatisfiableSpec(ValueError):
    pass


class CostMode(enum.Enum):
    BIASED_LOW = "biased"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class GenSpec:
    nurse_count: int | None = None  # None: drawn from 20..30
    grade_mix: tuple[float, float, float] = (0.25, 0.35, 0.40)
    contract_mix: tuple[float, ...] = (0.55, 0.20, 0.10, 0.15)
    demand_tightness: float = 0.9
    cost_mode: CostMode = CostMode.BIASED_LOW
    seed: int = 0
    night_fraction: float = 0.3
    max_patterns: int | None = None  # subsample F(i) for down-scaled variants

    def __post_init__(self):
        if len(self.grade_mix) != N_GRADES or not np.isclose(sum(self.grade_mix), 1.0):
            raise ValueError("grade_mix must be three proportions summing to 1")
        if len(self.contract_mix) != len(CONTRACTS) or not np.isclose(sum(self.contract_mix), 1.0):
            raise ValueError(f"contract_mix must be {len(CONTRACTS)} proportions summing to 1")
        if min(self.grade_mix) < 0 or min(self.contract_mix) < 0:
            raise ValueError("proportions must be non-negative")
        if not 0 < self.demand_tightness <= 1.2:
            raise ValueError("demand_tightness must lie in (0, 1.2]")
        if self.nurse_count is not None and self.nurse_count < 1:
            raise ValueError("nurse_count must be positive")
        if not 0 <= self.night_fraction <= 1:
            raise ValueError("night_fraction must lie in [0, 1]")
        if self.max_patterns is not None and self.max_patterns < 1:
            raise ValueError("max_patterns must be positive")


@dataclass
class PatternLibrary:
    """Distinct patterns of a set of contracts, indexed by cover vector."""

    patterns: list[ShiftPattern] = field(default_factory=list)
    index: dict[tuple[int, ...], int] = field(default_factory=dict)
    by_contract: dict[tuple[int, int], list[int]] = field(default_factory=dict)

    def add_contract(self, days_on: int, nights_on: int) -> list[int]:
        key = (days_on, nights_on)
        if key not in self.by_contract:
            ids = []
            for p in enumerate_patterns(days_on, nights_on):
                if p.cover not in self.index:
                    self.index[p.cover] = len(self.patterns)
                    self.patterns.append(ShiftPattern(len(self.patterns), p.cover, p.kind))
                ids.append(self.index[p.cover])
            self.by_contract[key] = ids
        return self.by_contract[key]

    def cyclic(self, kind: PatternKind, start: int, length: int) -> int:
        """Index of the pattern working ``length`` consecutive shifts from ``start`` (mod 7)."""
        week = [0] * N_DAYS
        for t in range(length):
            week[(start + t) % N_DAYS] = 1
        cover = tuple(week) + (0,) * N_DAYS if kind is PatternKind.DAY else (0,) * N_DAYS + tuple(week)
        return self.index[cover]


def biased_low_costs(rng: np.random.Generator, size) -> np.ndarray:
    u = rng.random(size)
    return np.floor(MAX_COST * u * u).astype(np.int64)


def draw_costs(rng: np.random.Generator, mode: CostMode, size) -> np.ndarray:
    if mode is CostMode.UNIFORM:
        return rng.integers(0, MAX_COST + 1, size=size)
    return biased_low_costs(rng, size)


def _apportion(total: int, mix) -> np.ndarray:
    raw = np.asarray(mix, dtype=float) * total
    counts = np.floor(raw).astype(np.int64)
    short = total - counts.sum()
    for idx in np.argsort(-(raw - counts), kind="stable")[:short]:
        counts[idx] += 1
    return counts


def _spread(total: int, priority: np.ndarray) -> np.ndarray:
    """Split ``total`` over 7 shifts as evenly as possible; extras by priority rank."""
    base, rem = divmod(int(total), N_DAYS)
    return base + (priority < rem).astype(np.int64)


def raw_instance(library: PatternLibrary, grades, feasible, costs, demand) -> dict:
    return {
        "format_version": 1,
        "patterns": [{"id": p.id, "cover": p.cover_string} for p in library.patterns],
        "nurses": [
            {"id": f"N{i + 1:02d}", "grade": int(g), "feasible": [int(j) for j in f],
             "costs": [int(c) for c in cs]}
            for i, (g, f, cs) in enumerate(zip(grades, feasible, costs))
        ],
        "demand": np.asarray(demand, dtype=np.int64).tolist(),
    }


def generate(spec: GenSpec) -> Instance:
    return generate_with_witness(spec)[0]


def generate_with_witness(spec: GenSpec) -> tuple[Instance, np.ndarray | None]:
    """Instance plus the hidden reference roster (genes in sorted nurse order).

    The witness is None when tightness exceeds 1, since the demand is then
    not capped by the reference roster and it need not be feasible.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.nurse_count if spec.nurse_count is not None else int(rng.integers(20, 31))
    grades = np.repeat([1, 2, 3], _apportion(n, spec.grade_mix))
    contract_keys = list(CONTRACTS.values())
    contract_of = rng.choice(len(contract_keys), size=n, p=np.asarray(spec.contract_mix))
    on_nights = np.zeros(n, dtype=bool)
    on_nights[rng.choice(n, size=int(round(spec.night_fraction * n)), replace=False)] = True
    lengths = np.array([contract_keys[c][1 if night else 0] for c, night in zip(contract_of, on_nights)])

    library = PatternLibrary()
    for key in contract_keys:
        library.add_contract(*key)

    # cyclic reference roster: consecutive blocks laid end to end in grade order
    reference = np.zeros(n, dtype=np.int64)
    pointer = {PatternKind.DAY: int(rng.integers(N_DAYS)), PatternKind.NIGHT: int(rng.integers(N_DAYS))}
    for i in range(n):
        kind = PatternKind.NIGHT if on_nights[i] else PatternKind.DAY
        reference[i] = library.cyclic(kind, pointer[kind], int(lengths[i]))
        pointer[kind] = (pointer[kind] + int(lengths[i])) % N_DAYS
    ref_cover = library_covers(library)[reference]  # (n, 14)
    ref_split = np.stack([ref_cover[grades == s].sum(axis=0) for s in (1, 2, 3)], axis=1)

    # grade-exclusive demand from each grade's capacity on its half of the week
    split = np.zeros((N_SHIFTS, N_GRADES), dtype=np.int64)
    for half, mask in ((slice(0, N_DAYS), ~on_nights), (slice(N_DAYS, N_SHIFTS), on_nights)):
        priority = rng.permutation(N_DAYS)
        for s in (1, 2, 3):
            total = int(np.floor(spec.demand_tightness * lengths[mask & (grades == s)].sum() + 1e-9))
            split[half, s - 1] = _spread(total, priority)
    if spec.demand_tightness <= 1:
        split = np.minimum(split, ref_split)
    demand = np.cumsum(split, axis=1)
    if spec.demand_tightness <= 1 and (demand[:, 2] > n).any():
        raise UnsatisfiableSpec("demand exceeds the number of available nurses")

    feasible = []
    costs = []
    for i in range(n):
        options = library.by_contract[contract_keys[contract_of[i]]]
        if spec.max_patterns is not None and spec.max_patterns < len(options):
            others = [j for j in options if j != reference[i]]
            keep = rng.choice(len(others), size=spec.max_patterns - 1, replace=False)
            options = sorted([reference[i]] + [others[t] for t in keep])
        feasible.append(list(options))
        costs.append(draw_costs(rng, spec.cost_mode, len(options)))

    # listing order is shuffled; validation re-sorts nurses into grade blocks
    order = rng.permutation(n)
    raw = raw_instance(
        library,
        grades[order],
        [feasible[i] for i in order],
        [costs[i] for i in order],
        demand,
    )
    inst = validate_instance(raw)
    if spec.demand_tightness > 1:
        return inst, None
    by_name = {f"N{t + 1:02d}": int(reference[i]) for t, i in enumerate(order)}
    index = {pid: j for j, pid in enumerate(inst.pattern_ids)}
    witness = np.array([index[by_name[nu.name]] for nu in inst.nurses], dtype=np.int64)
    return inst, witness


def library_covers(library: PatternLibrary) -> np.ndarray:
    return np.array([p.cover for p in library.patterns], dtype=np.int64)
