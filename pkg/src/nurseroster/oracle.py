"""Exact reference solver and the canonical micro instances.

``exact_solve`` is a depth-first search over nurses with a cost bound and a
cover-reachability bound; ``enumerate_solve`` is the unpruned enumeration it
is checked against.  Both are only meant for desk-scale instances.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from .instgen import PatternLibrary, biased_low_costs, library_covers, raw_instance
from .model import N_GRADES, N_SHIFTS, Instance, validate_instance


class BudgetExceeded(RuntimeError):
    def __init__(self, budget: int):
        super().__init__(f"node budget of {budget} exhausted before optimality was proven")
        self.budget = budget


class OracleStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"


@dataclass(frozen=True)
class OracleResult:
    status: OracleStatus
    best_cost: int | None
    best_genes: tuple[int, ...] | None
    nodes_explored: int


def exact_solve(inst: Instance, node_budget: int = 10_000_000) -> OracleResult:
    n = inst.n
    R = inst.demand
    covers = inst.covers
    cols = [np.arange(N_GRADES) >= nu.grade - 1 for nu in inst.nurses]
    # cheapest-first so good incumbents appear early
    options = [sorted(nu.feasible, key=lambda j, nu=nu: (nu.cost[j], j)) for nu in inst.nurses]
    min_cost = [min(nu.cost.values()) for nu in inst.nurses]
    cost_to_go = np.concatenate([np.cumsum(min_cost[::-1])[::-1], [0]])

    # reach[i][k, s]: most cover nurses i.. can still add at (k, s)
    reach = np.zeros((n + 1, N_SHIFTS, N_GRADES), dtype=np.int64)
    for i in range(n - 1, -1, -1):
        can = covers[list(inst.nurses[i].feasible)].max(axis=0)
        reach[i] = reach[i + 1] + can[:, None] * cols[i][None, :]

    best_cost: int | None = None
    best_genes: list[int] | None = None
    genes = [0] * n
    cum = np.zeros((N_SHIFTS, N_GRADES), dtype=np.int64)
    nodes = 0

    def dfs(i: int, cost: int) -> None:
        nonlocal best_cost, best_genes, nodes
        if (R - cum > reach[i]).any():
            return
        if i == n:
            if best_cost is None or cost < best_cost:
                best_cost, best_genes = cost, genes.copy()
            return
        for j in options[i]:
            c = cost + inst.nurses[i].cost[j]
            if best_cost is not None and c + cost_to_go[i + 1] >= best_cost:
                break  # options are cost-sorted
            nodes += 1
            if nodes > node_budget:
                raise BudgetExceeded(node_budget)
            delta = covers[j][:, None] * cols[i][None, :]
            cum[:] += delta
            genes[i] = j
            dfs(i + 1, c)
            cum[:] -= delta

    dfs(0, 0)
    if best_cost is None:
        return OracleResult(OracleStatus.INFEASIBLE, None, None, nodes)
    return OracleResult(OracleStatus.OPTIMAL, best_cost, tuple(best_genes), nodes)


def enumerate_solve(inst: Instance) -> OracleResult:
    """Unpruned enumeration of every assignment, in plain Python."""
    covers = [p.cover for p in inst.patterns]
    grades = [nu.grade for nu in inst.nurses]
    demand = inst.demand.tolist()
    best_cost = None
    best_genes = None
    count = 0
    for combo in itertools.product(*(nu.feasible for nu in inst.nurses)):
        count += 1
        ok = True
        for k in range(N_SHIFTS):
            for s in range(1, N_GRADES + 1):
                have = sum(covers[j][k] for j, g in zip(combo, grades) if g <= s)
                if have < demand[k][s - 1]:
                    ok = False
                    break
            if not ok:
                break
        if not ok:
            continue
        cost = sum(nu.cost[j] for j, nu in zip(combo, inst.nurses))
        if best_cost is None or cost < best_cost:
            best_cost, best_genes = cost, combo
    if best_cost is None:
        return OracleResult(OracleStatus.INFEASIBLE, None, None, count)
    return OracleResult(OracleStatus.OPTIMAL, best_cost, tuple(best_genes), count)


MICRO_CONTRACTS = ((3, 2), (4, 3))


def make_micro_instance(seed: int, grades, min_patterns: int = 4, max_patterns: int = 8,
                        relax_fraction: float = 0.3, inflate: int = 0) -> Instance:
    """A small instance whose demand comes from a hidden reference roster.

    Each nurse gets a random 3d/2n or 4d/3n contract and a random subset of its
    patterns that always contains the reference pattern.  Demand equals the
    reference cover, with a fraction of the shifts relaxed by one, so the
    instance is feasible and tight on the remaining shifts.  ``inflate`` adds
    a constant to every demand entry (used to build infeasible variants).
    """
    rng = np.random.default_rng(seed)
    library = PatternLibrary()
    for contract in MICRO_CONTRACTS:
        library.add_contract(*contract)
    covers = library_covers(library)
    grades = np.asarray(grades, dtype=np.int64)
    feasible, costs, reference = [], [], []
    for _ in grades:
        pool = library.by_contract[MICRO_CONTRACTS[rng.integers(len(MICRO_CONTRACTS))]]
        size = int(rng.integers(min_patterns, max_patterns + 1))
        chosen = sorted(int(j) for j in rng.choice(pool, size=size, replace=False))
        feasible.append(chosen)
        reference.append(chosen[int(rng.integers(size))])
        costs.append(biased_low_costs(rng, size))
    ref = covers[reference]
    demand = np.stack([ref[grades <= s].sum(axis=0) for s in (1, 2, 3)], axis=1)
    relax = rng.random(N_SHIFTS) < relax_fraction
    demand[relax] = np.maximum(demand[relax] - 1, 0)
    demand = demand + inflate
    return validate_instance(raw_instance(library, grades, feasible, costs, demand))


def define_micro_instances() -> dict[str, Instance]:
    micro_a = make_micro_instance(seed=9, grades=(2, 1, 2, 3, 3))
    micro_b = make_micro_instance(seed=9, grades=(2, 1, 2, 3, 3), inflate=2)
    return {"MICRO-A": micro_a, "MICRO-B": micro_b}


def micro_suite(count: int = 30, seed: int = 2024) -> dict[str, Instance]:
    """Seeded micro instances with 4-6 nurses and mixed grades."""
    rng = np.random.default_rng(seed)
    suite = {}
    for t in range(count):
        n = int(rng.integers(4, 7))
        grades = rng.integers(1, 4, size=n)
        suite[f"micro-{t:02d}"] = make_micro_instance(int(rng.integers(2**31)), grades)
    return suite
