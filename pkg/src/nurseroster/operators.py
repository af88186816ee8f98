"""Genetic operators on rosters.

Every operator only ever writes pattern indices drawn from the nurse's own
feasible set, so the one-pattern-per-nurse constraint holds by construction.
The ``*_genes`` variants work on stacked gene arrays and are what the engine
calls; the Individual-level functions wrap them.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np

from .fitness import DEFAULT_INCENTIVE, classify_over, incentive_shift
from .model import Individual, Instance


class ScopeMismatch(ValueError):
    pass


def random_mask(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.random(n) < 0.5


def uniform_crossover_genes(a: np.ndarray, b: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return np.where(mask, a, b)


def uniform_crossover(a: Individual, b: Individual, mask) -> Individual:
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != a.genes.shape:
        raise ValueError(f"mask length {mask.size} does not match {a.genes.size} nurses")
    return Individual(a.inst, uniform_crossover_genes(a.genes, b.genes, mask))


def block_mask(inst: Instance, grades) -> np.ndarray:
    """Boolean nurse mask selecting the given grade blocks."""
    return np.isin(inst.grades, list(grades))


def assemble_blocks(inst: Instance, donors) -> np.ndarray:
    """Child genes taking grade block g wholesale from ``donors[g - 1]``.

    Each donor is a gene array of shape (n,) or (N, n).
    """
    child = np.array(donors[0], copy=True)
    for g in (2, 3):
        sl = inst.grade_slices[g - 1]
        child[..., sl] = donors[g - 1][..., sl]
    return child


def grade_crossover(a: Individual, b: Individual, inst: Instance,
                    cut_plan: Mapping[int, str], c: Individual | None = None) -> Individual:
    """Fixed-point crossover on grade boundaries.

    ``cut_plan`` maps each grade 1..3 to the parent ("a", "b" or "c") whose
    block the child copies.
    """
    if set(cut_plan) != {1, 2, 3}:
        raise ScopeMismatch(f"cut plan covers grades {sorted(cut_plan)}, expected 1, 2 and 3")
    parents = {"a": a, "b": b, "c": c}
    donors = []
    for g in (1, 2, 3):
        src = parents.get(cut_plan[g])
        if src is None:
            raise ScopeMismatch(f"grade {g} assigned to missing parent {cut_plan[g]!r}")
        donors.append(src.genes)
    return Individual(inst, assemble_blocks(inst, donors))


def mutate_genes(inst: Instance, genes: np.ndarray, rows, rng: np.random.Generator) -> None:
    """Give one uniformly chosen nurse of each listed row a different pattern.

    Works in place on ``genes`` (N, n).  A nurse with a single feasible
    pattern keeps it.
    """
    rows = np.asarray(rows, dtype=np.int64)
    if rows.size == 0:
        return
    nurses = rng.integers(0, inst.n, size=rows.size)
    sizes = inst.feasible_sizes[nurses]
    draw = np.floor(rng.random(rows.size) * (sizes - 1)).astype(np.int64)
    current = inst.feasible_position[nurses, genes[rows, nurses]]
    new_pos = draw + (draw >= current)
    movable = sizes > 1
    genes[rows[movable], nurses[movable]] = inst.feasible_table[nurses[movable], new_pos[movable]]


def mutate(ind: Individual, inst: Instance, rng: np.random.Generator) -> Individual:
    genes = ind.genes[None, :].copy()
    mutate_genes(inst, genes, [0], rng)
    return Individual(inst, genes[0])


def hill_climb_genes(inst: Instance, genes: np.ndarray, cover: np.ndarray, weight: float,
                     factor: float = DEFAULT_INCENTIVE, bonus: bool = True,
                     malus: bool = True) -> tuple[np.ndarray, np.ndarray, int]:
    """First-improvement descent over single-nurse pattern changes.

    Nurses are visited in index order and each nurse's feasible patterns in
    their listed order; a pattern is accepted as soon as it strictly lowers
    the adjusted score.  Stops after a full pass without acceptance.
    Returns new genes, their exact-grade cover and the number of moves.

    The candidate scores for nurse ``i`` do not depend on its current
    pattern, so scanning them in order and accepting every strict
    improvement ends on the first occurrence of their minimum; that is what
    the argmin below computes.
    """
    genes = genes.copy()
    cover = cover.copy()
    R = inst.demand
    covers = inst.covers
    costs = inst.cost_matrix
    rows = np.arange(inst.n)
    total_cost = int(costs[rows, genes].sum())
    grade_cols = inst.grades - 1
    upper = np.arange(3)
    moves = 0
    improved = True
    while improved:
        improved = False
        for i in range(inst.n):
            cur = genes[i]
            g = grade_cols[i]
            cand = inst.nurses[i].feasible
            if len(cand) == 1:
                continue
            base = cover.copy()
            base[:, g] -= covers[cur]
            base_cum = np.cumsum(base, axis=1)
            add = covers[list(cand)]
            cum = base_cum[None, :, :] + add[:, :, None] * (upper >= g)
            under = np.maximum(R - cum, 0).sum(axis=(1, 2))
            codes = classify_over(cum[:, :, 2] - R[:, 2])
            cand_cost = costs[i, list(cand)]
            scores = (total_cost - costs[i, cur] + cand_cost) + weight * under
            if factor:
                scores = scores + incentive_shift(codes, weight, factor, bonus, malus)
            current = scores[inst.feasible_position[i, cur]]
            best = int(np.argmin(scores))
            if scores[best] < current:
                new = cand[best]
                total_cost += int(cand_cost[best] - costs[i, cur])
                cover[:, g] += covers[new] - covers[cur]
                genes[i] = new
                moves += 1
                improved = True
    return genes, cover, moves


def repair_hill_climb(ind: Individual, inst: Instance, weight: float,
                      factor: float = DEFAULT_INCENTIVE, *, bonus: bool = True,
                      malus: bool = True) -> Individual:
    genes, cover, _ = hill_climb_genes(inst, ind.genes, ind.cover, weight, factor, bonus, malus)
    return Individual(inst, genes, cover)
