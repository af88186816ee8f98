"""Co-operative co-evolutionary GA.

Eight populations share one stacked gene array.  Populations 1-7 are scored
on grade subsets of the split covering constraints, population 8 on the
whole problem (plus balance incentives).  Higher populations breed half of
their children by copying grade blocks from parents of the lower ones.

With ``coevolution=False`` the engine runs a single population of the full
size with uniform crossover only, i.e. the plain penalty GA.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .fitness import (
    DEFAULT_ALPHA,
    DEFAULT_FLOOR,
    DEFAULT_INCENTIVE,
    INITIAL_WEIGHT,
    POPULATION_SCOPES,
    BalanceClass,
    BatchStats,
    GradeScope,
    PenaltyState,
    batch_stats,
    batch_violations,
    incentive_shift,
    sample_ranks,
    update_penalty,
)
from .model import Individual, Instance
from .operators import assemble_blocks, hill_climb_genes, mutate_genes, uniform_crossover_genes

MAIN = 8

# grade -> source population for grade-based children; None = receiving population
GRADE_SOURCES: dict[int, dict[int, int | None]] = {
    4: {1: 1, 2: 2, 3: None},
    5: {1: 1, 2: None, 3: 3},
    6: {1: None, 2: 2, 3: 3},
    7: {1: 1, 2: 2, 3: 3},
}

# ways of tiling the three grade blocks with the lower populations' scopes
MAIN_TILINGS: tuple[tuple[tuple[tuple[int, ...], int], ...], ...] = (
    (((1,), 1), ((2,), 2), ((3,), 3)),
    (((1, 2), 4), ((3,), 3)),
    (((1, 3), 5), ((2,), 2)),
    (((2, 3), 6), ((1,), 1)),
    (((1, 2, 3), 7),),
)


@dataclass(frozen=True)
class GAConfig:
    total_population: int = 1000
    sub_population_size: int = 100
    crossover_chance: float = 0.75
    mutation_chance: float = 0.02
    elite_fraction: float = 0.10
    stall_limit: int = 30
    alpha: float = DEFAULT_ALPHA
    floor_v: float = DEFAULT_FLOOR
    initial_weight: float = INITIAL_WEIGHT
    incentive_factor: float = DEFAULT_INCENTIVE
    grade_crossover_share: float = 0.5
    migration_interval: int = 5
    repair_top_k: int = 5
    runs: int = 20
    rng_seed: int = 0
    coevolution: bool = True
    incentive: bool = True
    disincentive: bool = True
    repair: bool = True
    max_generations: int = 1000
    escalate_alpha: bool = False

    def __post_init__(self):
        for name in ("crossover_chance", "mutation_chance", "elite_fraction", "grade_crossover_share"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.coevolution:
            main = self.total_population - 7 * self.sub_population_size
            if self.sub_population_size < 1 or main < 1:
                raise ValueError("population sizes must be positive")
            smallest = min(self.sub_population_size, main)
        else:
            smallest = self.total_population
        if smallest < 2:
            raise ValueError("populations need at least two members")
        if self.elite_fraction * smallest < 1:
            raise ValueError("elite_fraction leaves a population without survivors")
        if self.alpha <= 0 or self.floor_v <= 0 or self.initial_weight <= 0:
            raise ValueError("penalty parameters must be positive")
        if self.incentive_factor < 0:
            raise ValueError("incentive_factor must be non-negative")
        if min(self.stall_limit, self.migration_interval, self.runs, self.max_generations) < 1:
            raise ValueError("stall_limit, migration_interval, runs and max_generations must be positive")
        if self.repair_top_k < 0:
            raise ValueError("repair_top_k must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


PRESETS: dict[str, dict] = {
    "canonical": dict(coevolution=False, incentive=False, disincentive=False, repair=False),
    "coevo": dict(incentive=False, disincentive=False, repair=False),
    "incentive": dict(incentive=True, disincentive=False, repair=False),
    "repair": dict(incentive=True, disincentive=False, repair=True),
    "disincentive": dict(incentive=False, disincentive=True, repair=False),
    "full": dict(incentive=True, disincentive=True, repair=True),
}


def preset(name: str, base: GAConfig | None = None, **overrides) -> GAConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return replace(base or GAConfig(), **{**PRESETS[name], **overrides})


@dataclass
class SubPopulation:
    id: int
    scope: GradeScope
    start: int
    size: int
    penalty: PenaltyState

    @property
    def stop(self) -> int:
        return self.start + self.size

    @property
    def rows(self) -> slice:
        return slice(self.start, self.stop)


_ONES3 = np.ones(3)
_SCOPE_MASKS = {pid: scope.mask.astype(float) for pid, scope in POPULATION_SCOPES.items()}


class PopulationState:
    """All populations of one run at a generation boundary."""

    def __init__(self, inst: Instance, cfg: GAConfig, pops: list[SubPopulation], genes: np.ndarray):
        self.inst = inst
        self.cfg = cfg
        self.pops = pops
        self.genes = genes
        self.stats, self.cover = batch_stats(inst, genes)
        self.generation = 0
        self.repairs_last = 0
        self._repair_cache: dict[tuple[bytes, float], np.ndarray] = {}

    def pop(self, pid: int) -> SubPopulation:
        for p in self.pops:
            if p.id == pid:
                return p
        raise KeyError(pid)

    @property
    def main(self) -> SubPopulation:
        return self.pop(MAIN)

    def scores(self, p: SubPopulation, rows: slice | None = None) -> np.ndarray:
        """Scores of ``rows`` (default: p's own members) under p's scoring."""
        st, weight = self.stats, p.penalty.weight
        rows = p.rows if rows is None else rows
        if p.scope.cumulative:
            sc = st.cost_by_grade[rows] @ _ONES3 + weight * st.cum_under[rows]
        else:
            mask = _SCOPE_MASKS[p.id]
            sc = st.cost_by_grade[rows] @ mask + weight * (st.split_under[rows] @ mask)
        if p.id == MAIN and (self.cfg.incentive or self.cfg.disincentive):
            sc = sc + incentive_shift(st.balance[rows], weight, self.cfg.incentive_factor,
                                      self.cfg.incentive, self.cfg.disincentive)
        return sc

    def best_row(self, p: SubPopulation) -> int:
        return p.start + int(np.argmin(self.scores(p)))

    def members(self, p: SubPopulation) -> list[Individual]:
        return [Individual(self.inst, self.genes[r], self.cover[r].copy()) for r in range(p.start, p.stop)]

    def elite_count(self, p: SubPopulation) -> int:
        return max(1, int(round(self.cfg.elite_fraction * p.size)))

    def refresh_penalties(self) -> None:
        """Recompute every population's weight from its current best.

        Once a population's best has been feasible the weight stays at the
        post-feasibility floor.
        """
        for p in self.pops:
            if p.penalty.best_violations == 0:
                q = 0
            else:
                row = self.best_row(p)
                q = int(batch_violations(self.stats.take([row]), p.scope)[0])
            p.penalty = update_penalty(p.penalty, q)

    def write_rows(self, rows, genes: np.ndarray) -> None:
        rows = np.atleast_1d(rows)
        self.genes[rows] = genes
        stats, cover = batch_stats(self.inst, self.genes[rows])
        self.cover[rows] = cover
        self.stats.put(rows, stats)


def init_populations(inst: Instance, cfg: GAConfig, rng: np.random.Generator) -> PopulationState:
    if cfg.coevolution:
        layout = [(pid, cfg.sub_population_size) for pid in range(1, 8)]
        layout.append((MAIN, cfg.total_population - 7 * cfg.sub_population_size))
    else:
        layout = [(MAIN, cfg.total_population)]
    pops = []
    start = 0
    for pid, size in layout:
        penalty = PenaltyState(weight=cfg.initial_weight, alpha=cfg.alpha, floor=cfg.floor_v)
        pops.append(SubPopulation(pid, POPULATION_SCOPES[pid], start, size, penalty))
        start += size
    pos = np.floor(rng.random((start, inst.n)) * inst.feasible_sizes).astype(np.int64)
    genes = inst.feasible_table[np.arange(inst.n), pos]
    state = PopulationState(inst, cfg, pops, genes)
    state.refresh_penalties()
    return state


def _select(state: PopulationState, receiver: SubPopulation, source: int, count: int,
            orders: dict, rng) -> np.ndarray:
    """Rank-select members of ``source`` ranked under the receiver's scoring."""
    src = state.pop(source)
    key = (receiver.id, source)
    if key not in orders:
        orders[key] = np.argsort(state.scores(receiver, src.rows), kind="stable")
    return src.start + orders[key][sample_ranks(src.size, count, rng)]


def _uniform_children(state, p, count, orders, rng) -> np.ndarray:
    pairs = -(-count // 2)
    a = state.genes[_select(state, p, p.id, pairs, orders, rng)]
    b = state.genes[_select(state, p, p.id, pairs, orders, rng)]
    crossed = rng.random(pairs) < state.cfg.crossover_chance
    masks = rng.random((pairs, state.inst.n)) < 0.5
    masks[~crossed] = True  # no crossover: children are clones of the parents
    kids = np.stack([uniform_crossover_genes(a, b, masks), uniform_crossover_genes(b, a, masks)], axis=1)
    return kids.reshape(-1, state.inst.n)[:count]


def _grade_donors(state, p, count, orders, rng) -> np.ndarray:
    """(3, count) donor rows, one per grade block."""
    donors = np.empty((3, count), dtype=np.int64)
    if p.id == MAIN:
        choice = rng.integers(0, len(MAIN_TILINGS), size=count)
        for t, tiling in enumerate(MAIN_TILINGS):
            idx = np.flatnonzero(choice == t)
            if idx.size == 0:
                continue
            for grades, source in tiling:
                rows = _select(state, p, source, idx.size, orders, rng)
                for g in grades:
                    donors[g - 1, idx] = rows
    else:
        for g, source in GRADE_SOURCES[p.id].items():
            donors[g - 1] = _select(state, p, p.id if source is None else source, count, orders, rng)
    return donors


def step_generation(state: PopulationState, rng: np.random.Generator, record: dict | None = None) -> None:
    """Advance every population by one generation, in place.

    ``record``, if given, receives per population the elite count and the
    donor rows (indices into the pre-step gene array) of grade-based children.
    """
    inst, cfg = state.inst, state.cfg
    orders = {(p.id, p.id): np.argsort(state.scores(p), kind="stable") for p in state.pops}
    new_genes = np.empty_like(state.genes)
    source = np.zeros(len(new_genes), dtype=np.int64)
    child_rows = []
    for p in state.pops:
        n_elite = state.elite_count(p)
        n_child = p.size - n_elite
        share = cfg.grade_crossover_share if (p.id >= 4 and len(state.pops) > 1) else 0.0
        n_grade = int(round(share * n_child))
        n_uniform = n_child - n_grade

        elite = p.start + orders[p.id, p.id][:n_elite]
        new_genes[p.start:p.start + n_elite] = state.genes[elite]
        source[p.start:p.start + n_elite] = elite
        parts = []
        if n_uniform:
            parts.append(_uniform_children(state, p, n_uniform, orders, rng))
        donors = None
        if n_grade:
            donors = _grade_donors(state, p, n_grade, orders, rng)
            parts.append(assemble_blocks(inst, [state.genes[d] for d in donors]))
        if parts:
            new_genes[p.start + n_elite:p.stop] = np.concatenate(parts)
        child_rows.append(np.arange(p.start + n_elite, p.stop))
        if record is not None:
            record[p.id] = {"elite": n_elite, "uniform": n_uniform, "grade_donors": donors}

    children = np.concatenate(child_rows)
    mutated = children[rng.random(children.size) < cfg.mutation_chance]
    mutate_genes(inst, new_genes, mutated, rng)

    cover = state.cover[source]
    stats = state.stats.take(source)
    child_stats, child_cover = batch_stats(inst, new_genes[children])
    cover[children] = child_cover
    stats.put(children, child_stats)
    state.genes, state.cover, state.stats = new_genes, cover, stats

    state.repairs_last = _repair_main(state) if cfg.repair else 0
    state.refresh_penalties()
    state.generation += 1


def _repair_main(state: PopulationState) -> int:
    """Hill-climb the top-ranked balanced or feasible members of population 8."""
    cfg = state.cfg
    try:
        p = state.main
    except KeyError:
        return 0
    scores = state.scores(p)
    classes = state.stats.balance[p.rows]
    eligible = np.flatnonzero((classes == BalanceClass.FEASIBLE) | (classes == BalanceClass.BALANCED))
    chosen = eligible[np.argsort(scores[eligible], kind="stable")][: cfg.repair_top_k]
    weight = p.penalty.weight
    for local in chosen:
        row = p.start + int(local)
        key = (state.genes[row].tobytes(), weight)
        improved = state._repair_cache.get(key)
        if improved is None:
            improved, _, _ = hill_climb_genes(
                state.inst, state.genes[row], state.cover[row], weight,
                cfg.incentive_factor, cfg.incentive, cfg.disincentive,
            )
            state._repair_cache[key] = improved
        if not np.array_equal(improved, state.genes[row]):
            state.write_rows(row, improved)
    return int(chosen.size)


def migrate(state: PopulationState, rng: np.random.Generator) -> list[tuple[int, int, int]]:
    """Copy one random member of every population over the worst member of
    another randomly chosen population.

    Returns (source population, destination population, destination row) per move.
    """
    pops = state.pops
    if len(pops) < 2:
        return []
    picks = [p.start + int(rng.integers(p.size)) for p in pops]
    dests = []
    for idx in range(len(pops)):
        d = int(rng.integers(len(pops) - 1))
        dests.append(d + 1 if d >= idx else d)
    migrants = state.genes[picks].copy()
    cover = state.cover[picks].copy()
    stats = state.stats.take(picks)
    protected: set[int] = set()
    moves = []
    for idx, d in enumerate(dests):
        dest = pops[d]
        sc = state.scores(dest).astype(float)
        for row in protected:
            if dest.start <= row < dest.stop:
                sc[row - dest.start] = -np.inf
        row = dest.start + int(np.argmax(sc))
        state.genes[row] = migrants[idx]
        state.cover[row] = cover[idx]
        state.stats.put([row], stats.take([idx]))
        protected.add(row)
        moves.append((pops[idx].id, dest.id, row))
    return moves


@dataclass
class RunResult:
    best: Individual
    feasible: bool
    best_raw_cost: int | None
    generations: int
    wall_time: float
    trace: list[float] = field(default_factory=list)
    total_under: int = 0

    def same_outcome(self, other: "RunResult") -> bool:
        """Equality ignoring wall time."""
        return (
            np.array_equal(self.best.genes, other.best.genes)
            and self.feasible == other.feasible
            and self.best_raw_cost == other.best_raw_cost
            and self.generations == other.generations
            and self.trace == other.trace
        )


def _main_candidate(state: PopulationState) -> tuple[tuple, int]:
    p = state.main
    stats = state.stats.take(p.rows)
    raw = stats.raw_cost
    feasible = np.flatnonzero(stats.feasible)
    if feasible.size:
        local = int(feasible[np.argmin(raw[feasible])])
        return (0, int(raw[local]), 0), p.start + local
    local = int(np.lexsort((raw, stats.cum_under))[0])
    return (1, int(stats.cum_under[local]), int(raw[local])), p.start + local


def run(inst: Instance, cfg: GAConfig, rng_seed=None) -> RunResult:
    """One GA run until the main population stalls for ``stall_limit`` generations."""
    seed = cfg.rng_seed if rng_seed is None else rng_seed
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    state = init_populations(inst, cfg, rng)

    best_key, row = _main_candidate(state)
    best_genes = state.genes[row].copy()
    best_score = float(state.scores(state.main).min())
    trace = [best_score]
    stall = 0
    while stall < cfg.stall_limit and state.generation < cfg.max_generations:
        step_generation(state, rng)
        if len(state.pops) > 1 and state.generation % cfg.migration_interval == 0:
            migrate(state, rng)
        improved = False
        score = float(state.scores(state.main).min())
        trace.append(score)
        if score < best_score:
            best_score = score
            improved = True
        key, row = _main_candidate(state)
        if key < best_key:
            if key[0] == 0:
                improved = True
            best_key, best_genes = key, state.genes[row].copy()
        stall = 0 if improved else stall + 1

    best = Individual(inst, best_genes)
    feasible = best_key[0] == 0
    under = 0 if feasible else best_key[1]
    return RunResult(
        best=best,
        feasible=feasible,
        best_raw_cost=best_key[1] if feasible else None,
        generations=state.generation,
        wall_time=time.perf_counter() - t0,
        trace=trace,
        total_under=under,
    )


def run_many(inst: Instance, cfg: GAConfig, runs: int | None = None, seed=None) -> list[RunResult]:
    """Independent multi-start runs with spawned random streams.

    With ``escalate_alpha`` the severity parameter doubles after every batch
    of five runs that found nothing feasible.
    """
    runs = cfg.runs if runs is None else runs
    base = cfg.rng_seed if seed is None else seed
    streams = np.random.SeedSequence(base).spawn(runs)
    results: list[RunResult] = []
    current = cfg
    for t, stream in enumerate(streams):
        results.append(run(inst, current, stream))
        if cfg.escalate_alpha and (t + 1) % 5 == 0 and not any(r.feasible for r in results[-5:]):
            current = replace(current, alpha=current.alpha * 2)
    return results
