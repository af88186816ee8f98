"""Command-line interface: solve, generate, oracle, bench."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import io
from .bench import aggregate, bench, format_table
from .engine import PRESETS, GAConfig, RunResult, preset, run_many
from .instgen import CostMode, GenSpec, UnsatisfiableSpec, generate
from .model import InstanceError, raw_cost
from .oracle import BudgetExceeded, OracleStatus, exact_solve

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NO_FEASIBLE = 2
EXIT_BUDGET = 3


def _common(parser: argparse.ArgumentParser, runs: bool = True) -> None:
    parser.add_argument("--seed", type=int, default=None, help="base random seed")
    parser.add_argument("--config", type=Path, default=None, help="GAConfig JSON file")
    parser.add_argument("--out", type=Path, default=None, help="output path")
    if runs:
        parser.add_argument("--runs", type=int, default=None, help="number of multi-starts")
    parser.add_argument("--quiet", action="store_true", help="suppress per-run output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nurseroster", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run the GA on an instance file")
    p.add_argument("instance", type=Path)
    p.add_argument("--preset", choices=sorted(PRESETS), default="full",
                   help="feature preset applied before the config file (default: full)")
    _common(p)

    p = sub.add_parser("generate", help="write a synthetic instance")
    p.add_argument("--nurses", type=int, default=None, help="ward size (default: drawn from 20-30)")
    p.add_argument("--tightness", type=float, default=0.9)
    p.add_argument("--cost-mode", choices=[m.value for m in CostMode], default=CostMode.BIASED_LOW.value)
    _common(p, runs=False)

    p = sub.add_parser("oracle", help="solve a small instance exactly")
    p.add_argument("instance", type=Path)
    p.add_argument("--budget", type=int, default=10_000_000, help="search node budget")
    _common(p, runs=False)

    p = sub.add_parser("bench", help="multi-start benchmark over a directory of instances")
    p.add_argument("instance_dir", type=Path)
    p.add_argument("--toggle", action="append", choices=list(PRESETS), default=None,
                   help="configuration to benchmark; repeatable (default: full)")
    _common(p)
    return parser


def _load_config(args, name: str) -> GAConfig:
    cfg = preset(name)
    if args.config is not None:
        cfg = io.read_config(args.config, base=cfg)
    overrides = {}
    if getattr(args, "runs", None) is not None:
        overrides["runs"] = args.runs
    if args.seed is not None:
        overrides["rng_seed"] = args.seed
    return replace(cfg, **overrides)


def _best(results: list[RunResult]) -> RunResult:
    """Cheapest feasible run, else the run closest to feasibility (earliest on ties)."""
    def key(r: RunResult):
        if r.feasible:
            return (0, r.best_raw_cost, 0)
        return (1, r.total_under, raw_cost(r.best.inst, r.best))
    return min(results, key=key)


def cmd_solve(args) -> int:
    inst = io.read_instance(args.instance)
    cfg = _load_config(args, args.preset)
    results = run_many(inst, cfg)
    if not args.quiet:
        for t, r in enumerate(results, 1):
            status = f"feasible cost={r.best_raw_cost}" if r.feasible else f"infeasible under={r.total_under}"
            print(f"run {t:02d}: {status} generations={r.generations} seconds={r.wall_time:.2f}")
    best = _best(results)
    doc = io.solution_to_dict(inst, best.best.genes, cfg, cfg.rng_seed, results)
    out = args.out or Path(f"{args.instance.stem}.solution.json")
    io.write_solution(doc, out)
    feasible_runs = sum(r.feasible for r in results)
    print(f"best: {'feasible' if best.feasible else 'infeasible'} raw_cost={doc['raw_cost']} "
          f"feasible_runs={feasible_runs}/{len(results)} -> {out}")
    return EXIT_OK if feasible_runs else EXIT_NO_FEASIBLE


def cmd_generate(args) -> int:
    spec = GenSpec(
        nurse_count=args.nurses,
        demand_tightness=args.tightness,
        cost_mode=CostMode(args.cost_mode),
        seed=0 if args.seed is None else args.seed,
    )
    text = io.dumps_instance(generate(spec))
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text)
        if not args.quiet:
            print(f"wrote {args.out}")
    return EXIT_OK


def oracle_to_dict(inst, result) -> dict:
    genes = None
    if result.best_genes is not None:
        genes = {nu.name: inst.pattern_ids[j] for nu, j in zip(inst.nurses, result.best_genes)}
    return {
        "status": result.status.value,
        "best_cost": result.best_cost,
        "assignment": genes,
        "nodes_explored": result.nodes_explored,
    }


def cmd_oracle(args) -> int:
    inst = io.read_instance(args.instance)
    try:
        result = exact_solve(inst, node_budget=args.budget)
    except BudgetExceeded as exc:
        print(f"BudgetExceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    if result.status is OracleStatus.OPTIMAL:
        print(f"Optimal cost={result.best_cost} nodes={result.nodes_explored}")
    else:
        print(f"Infeasible nodes={result.nodes_explored}")
    if args.out is not None:
        args.out.write_text(json.dumps(oracle_to_dict(inst, result), indent=2) + "\n")
    return EXIT_OK


def _instance_files(folder: Path) -> list[Path]:
    return sorted(p for p in folder.glob("*.json")
                  if not p.name.endswith((".oracle.json", ".solution.json")))


def cmd_bench(args) -> int:
    files = _instance_files(args.instance_dir)
    if not files:
        raise InstanceError(f"no instance files in {args.instance_dir}")
    instances = {p.stem: io.read_instance(p) for p in files}
    optima = {}
    for p in files:
        oracle_file = p.with_name(f"{p.stem}.oracle.json")
        if oracle_file.exists():
            optima[p.stem] = json.loads(oracle_file.read_text()).get("best_cost")
    lines = []
    for name in args.toggle or ["full"]:
        cfg = _load_config(args, name)
        rows = bench(instances, cfg, optima=optima)
        total = aggregate(rows)
        print(format_table(rows + [total], label=name), end="")
        for row in rows + [total]:
            lines.append(json.dumps({"toggle": name, **row.to_dict()}))
    if args.out is not None:
        args.out.write_text("\n".join(lines) + "\n")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "generate": cmd_generate, "oracle": cmd_oracle, "bench": cmd_bench}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (InstanceError, UnsatisfiableSpec, OSError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
