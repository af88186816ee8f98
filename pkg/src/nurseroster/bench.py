"""Multi-start benchmarking over a set of instances."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .engine import GAConfig, RunResult, run_many
from .model import Instance

NEAR_OPTIMAL = 3  # cost units


@dataclass
class BenchRow:
    instance: str
    runs: int
    feasible_runs: int
    mean_cost: float | None
    optimal: int | None
    near_optimal: int | None
    mean_seconds: float
    costs: list[int | None] = field(default_factory=list)
    generations: list[int] = field(default_factory=list)

    @property
    def feasible_pct(self) -> float:
        return 100.0 * self.feasible_runs / self.runs if self.runs else 0.0

    @property
    def all_infeasible(self) -> bool:
        return self.feasible_runs == 0

    def to_dict(self) -> dict:
        return {
            "instance": self.instance,
            "runs": self.runs,
            "feasible_runs": self.feasible_runs,
            "feasible_pct": round(self.feasible_pct, 4),
            "all_infeasible": self.all_infeasible,
            "mean_cost": None if self.mean_cost is None else round(self.mean_cost, 4),
            "optimal": self.optimal,
            "near_optimal": self.near_optimal,
            "mean_seconds": round(self.mean_seconds, 4),
            "costs": self.costs,
            "generations": self.generations,
        }


def summarize(name: str, results: list[RunResult], optimum: int | None = None) -> BenchRow:
    costs = [r.best_raw_cost if r.feasible else None for r in results]
    feasible = [c for c in costs if c is not None]
    optimal = near = None
    if optimum is not None:
        optimal = sum(c == optimum for c in feasible)
        near = sum(c - optimum <= NEAR_OPTIMAL for c in feasible)
    return BenchRow(
        instance=name,
        runs=len(results),
        feasible_runs=len(feasible),
        mean_cost=float(np.mean(feasible)) if feasible else None,
        optimal=optimal,
        near_optimal=near,
        mean_seconds=float(np.mean([r.wall_time for r in results])) if results else 0.0,
        costs=costs,
        generations=[r.generations for r in results],
    )


def aggregate(rows: list[BenchRow], name: str = "ALL") -> BenchRow:
    costs = [c for row in rows for c in row.costs]
    feasible = [c for c in costs if c is not None]
    with_opt = [row for row in rows if row.optimal is not None]
    runs = sum(row.runs for row in rows)
    seconds = sum(row.mean_seconds * row.runs for row in rows)
    return BenchRow(
        instance=name,
        runs=runs,
        feasible_runs=len(feasible),
        mean_cost=float(np.mean(feasible)) if feasible else None,
        optimal=sum(row.optimal for row in with_opt) if with_opt else None,
        near_optimal=sum(row.near_optimal for row in with_opt) if with_opt else None,
        mean_seconds=seconds / runs if runs else 0.0,
        costs=costs,
        generations=[g for row in rows for g in row.generations],
    )


def bench(instances: dict[str, Instance], cfg: GAConfig, runs: int | None = None,
          optima: dict[str, int | None] | None = None, seed: int | None = None) -> list[BenchRow]:
    """One row per instance (sorted by name) for ``runs`` seeded multi-starts each."""
    optima = optima or {}
    rows = []
    for name in sorted(instances):
        results = run_many(instances[name], cfg, runs=runs, seed=seed)
        rows.append(summarize(name, results, optima.get(name)))
    return rows


def instances_with_feasible_run(rows: list[BenchRow]) -> int:
    return sum(not row.all_infeasible for row in rows)


def format_table(rows: list[BenchRow], label: str = "") -> str:
    header = f"{'instance':<16}{'runs':>6}{'feas%':>8}{'mean cost':>11}{'opt':>5}{'<=3':>5}{'sec':>8}"
    lines = [f"[{label}]" if label else "", header]
    for row in rows:
        cost = "-" if row.mean_cost is None else f"{row.mean_cost:.2f}"
        opt = "-" if row.optimal is None else str(row.optimal)
        near = "-" if row.near_optimal is None else str(row.near_optimal)
        lines.append(f"{row.instance:<16}{row.runs:>6}{row.feasible_pct:>8.1f}{cost:>11}"
                     f"{opt:>5}{near:>5}{row.mean_seconds:>8.3f}")
    return "\n".join(line for line in lines if line or label) + "\n"
