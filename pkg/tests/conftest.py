import math

import numpy as np
import pytest

from thermocluster.lattice import build_lattice, star_graph


@pytest.fixture(scope="session")
def small_graphs():
    return {
        "chain-3": build_lattice("chain", [3], "open"),
        "chain-4": build_lattice("chain", [4], "open"),
        "square-2x2": build_lattice("square", [2, 2], "open"),
        "star-4": star_graph(4),
    }


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_density(rng, n_qubits=1, rank=None):
    dim = 2 ** n_qubits
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


HALF_PI = math.pi / 2


# acceptance results: criterion -> list of (part, passed, detail)
ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = {}


def record(criterion: int, part: str, passed: bool, detail: str) -> None:
    ACCEPTANCE.setdefault(criterion, []).append((part, bool(passed), detail))
    print(f"criterion {criterion} {part}: {'PASS' if passed else 'FAIL'} ({detail})")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[crit]
        ok = all(p for _, p, _ in parts)
        detail = "; ".join(f"{name}: {'ok' if p else 'FAIL'} {d}" for name, p, d in parts)
        terminalreporter.write_line(f"criterion {crit:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
