"""JSON carriers for instances, solutions and solver configuration."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .engine import GAConfig, RunResult
from .model import (
    InstanceError,
    Individual,
    Instance,
    deficit,
    raw_cost,
    shortfall,
    validate_instance,
)

FORMAT_VERSION = 1


class FormatError(InstanceError):
    """Document is not a supported instance, solution or config file."""


class SolutionMismatch(ValueError):
    """Stated solution values disagree with a replay through the model."""


def _dumps(doc: Mapping[str, Any]) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _canonical(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def _check_version(doc: Mapping[str, Any], what: str) -> None:
    if not isinstance(doc, Mapping):
        raise FormatError(f"{what} must be a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported {what} format_version {version!r} (expected {FORMAT_VERSION})")


# -- instances ---------------------------------------------------------------

def instance_to_dict(inst: Instance) -> dict:
    """Instance document with nurses in grade-block order."""
    ids = inst.pattern_ids
    return {
        "format_version": FORMAT_VERSION,
        "patterns": [{"id": ids[p.id], "cover": p.cover_string} for p in inst.patterns],
        "nurses": [
            {
                "id": nu.name,
                "grade": nu.grade,
                "feasible": [ids[j] for j in nu.feasible],
                "costs": [nu.cost[j] for j in nu.feasible],
            }
            for nu in inst.nurses
        ],
        "demand": inst.demand.tolist(),
    }


def instance_from_dict(doc: Mapping[str, Any]) -> Instance:
    _check_version(doc, "instance")
    return validate_instance(doc)


def dumps_instance(inst: Instance) -> str:
    return _dumps(instance_to_dict(inst))


def loads_instance(text: str) -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"instance is not valid JSON: {exc}") from None
    return instance_from_dict(doc)


def read_instance(path) -> Instance:
    return loads_instance(Path(path).read_text())


def write_instance(inst: Instance, path) -> None:
    Path(path).write_text(dumps_instance(inst))


def instance_digest(inst: Instance) -> str:
    return hashlib.sha256(_canonical(instance_to_dict(inst)).encode()).hexdigest()


# -- configuration -----------------------------------------------------------

def config_hash(cfg: GAConfig) -> str:
    return hashlib.sha256(_canonical(cfg.to_dict()).encode()).hexdigest()


def config_from_dict(doc: Mapping[str, Any], base: GAConfig | None = None) -> GAConfig:
    if not isinstance(doc, Mapping):
        raise FormatError("config must be a JSON object")
    names = {f.name for f in dataclasses.fields(GAConfig)}
    unknown = sorted(set(doc) - names)
    if unknown:
        raise FormatError(f"unknown config keys: {', '.join(unknown)}")
    return dataclasses.replace(base or GAConfig(), **doc)


def read_config(path, base: GAConfig | None = None) -> GAConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"config is not valid JSON: {exc}") from None
    return config_from_dict(doc, base)


def write_config(cfg: GAConfig, path) -> None:
    Path(path).write_text(_dumps(cfg.to_dict()))


# -- solutions ---------------------------------------------------------------

def solution_to_dict(inst: Instance, genes, cfg: GAConfig, seed: int,
                     results: list[RunResult] | None = None) -> dict:
    """Solution document for ``genes``; wall-clock time is deliberately left out."""
    ind = Individual(inst, np.asarray(genes, dtype=np.int64))
    total, violated = deficit(inst, ind)
    ids = inst.pattern_ids
    solver = {
        "seed": int(seed),
        "runs": len(results) if results is not None else None,
        "generations": [r.generations for r in results] if results is not None else None,
        "feasible_runs": sum(r.feasible for r in results) if results is not None else None,
        "config_hash": config_hash(cfg),
    }
    return {
        "format_version": FORMAT_VERSION,
        "instance_digest": instance_digest(inst),
        "assignment": [
            {"nurse": nu.name, "grade": nu.grade, "pattern": ids[int(j)],
             "cover": inst.patterns[int(j)].cover_string}
            for nu, j in zip(inst.nurses, ind.genes)
        ],
        "raw_cost": raw_cost(inst, ind),
        "feasible": total == 0,
        "deficit": {
            "total": total,
            "violated": violated,
            "by_shift_grade": shortfall(inst, ind.cover).tolist(),
        },
        "solver": solver,
    }


def dumps_solution(doc: Mapping[str, Any]) -> str:
    return _dumps(doc)


def loads_solution(text: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"solution is not valid JSON: {exc}") from None
    _check_version(doc, "solution")
    return doc


def read_solution(path) -> dict:
    return loads_solution(Path(path).read_text())


def write_solution(doc: Mapping[str, Any], path) -> None:
    Path(path).write_text(dumps_solution(doc))


def solution_genes(inst: Instance, doc: Mapping[str, Any]) -> np.ndarray:
    """Gene vector of a solution document, matched to nurses by id."""
    index = {pid: j for j, pid in enumerate(inst.pattern_ids)}
    chosen = {row["nurse"]: row["pattern"] for row in doc["assignment"]}
    genes = []
    for nu in inst.nurses:
        if nu.name not in chosen:
            raise SolutionMismatch(f"nurse {nu.name!r} has no assignment")
        pid = chosen[nu.name]
        if pid not in index or index[pid] not in nu.cost:
            raise SolutionMismatch(f"nurse {nu.name!r} is assigned pattern {pid!r} outside their feasible set")
        genes.append(index[pid])
    if len(chosen) != inst.n:
        raise SolutionMismatch("assignment lists nurses that are not in the instance")
    return np.array(genes, dtype=np.int64)


def check_solution(inst: Instance, doc: Mapping[str, Any]) -> None:
    """Replay the assignment and compare with the stated cost and deficit."""
    ind = Individual(inst, solution_genes(inst, doc))
    total, violated = deficit(inst, ind)
    gene_of = {nu.name: int(j) for nu, j in zip(inst.nurses, ind.genes)}
    for row in doc["assignment"]:
        if row["cover"] != inst.patterns[gene_of[row["nurse"]]].cover_string:
            raise SolutionMismatch(f"cover string of nurse {row['nurse']!r} does not match its pattern")
    checks = [
        ("raw_cost", doc["raw_cost"], raw_cost(inst, ind)),
        ("feasible", doc["feasible"], total == 0),
        ("deficit total", doc["deficit"]["total"], total),
        ("deficit violated", doc["deficit"]["violated"], violated),
        ("deficit table", doc["deficit"]["by_shift_grade"], shortfall(inst, ind.cover).tolist()),
    ]
    for label, stated, actual in checks:
        if stated != actual:
            raise SolutionMismatch(f"{label}: file says {stated!r}, replay gives {actual!r}")
