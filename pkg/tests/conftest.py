import numpy as np
import pytest

from nurseroster.model import N_SHIFTS, validate_instance
from nurseroster.oracle import define_micro_instances

# Frozen by unpruned enumeration of every MICRO-A assignment (16464 of them);
# re-checked against both solvers in test_oracle.py.
MICRO_A_OPTIMUM = 74

ACCEPTANCE: dict[int, str] = {}


def cover_of(text: str) -> list[int]:
    return [int(ch) for ch in text]


def day(*days) -> str:
    """Cover string working the given 1-based days."""
    bits = ["0"] * N_SHIFTS
    for d in days:
        bits[d - 1] = "1"
    return "".join(bits)


def night(*nights) -> str:
    bits = ["0"] * N_SHIFTS
    for d in nights:
        bits[6 + d] = "1"
    return "".join(bits)


def tiny_instance(nurses, demand=None):
    """Build an instance from ``nurses`` = [(grade, {cover string: cost})].

    ``demand`` maps 0-based shift index to a cumulative (R1, R2, R3) row.
    """
    patterns: dict[str, int] = {}
    rows = []
    for t, (grade, options) in enumerate(nurses):
        ids, costs = [], []
        for cover, cost in options.items():
            pid = patterns.setdefault(cover, len(patterns))
            ids.append(pid)
            costs.append(cost)
        rows.append({"id": f"T{t}", "grade": grade, "feasible": ids, "costs": costs})
    R = np.zeros((N_SHIFTS, 3), dtype=int)
    for k, row in (demand or {}).items():
        R[k] = row
    return validate_instance({
        "patterns": [{"id": pid, "cover": cover} for cover, pid in patterns.items()],
        "nurses": rows,
        "demand": R.tolist(),
    })


@pytest.fixture(scope="session")
def micro():
    return define_micro_instances()


@pytest.fixture(scope="session")
def micro_a(micro):
    return micro["MICRO-A"]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[key])
