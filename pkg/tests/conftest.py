from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from lifted_ltc.grassmann import complete_system, grassmann_mas, rs_base_codes
from lifted_ltc.set_system import LayeredSystem
from lifted_ltc.tanner import LiftedCodeFamily


def uniform_system(V, T, K, S, name="toy") -> LayeredSystem:
    """Uniform downward chain over explicit layers: each step picks a containing set uniformly."""
    def up(children, parents):
        return {
            i: {j: Fraction(1, n) for j in js}
            for i, c in enumerate(children)
            for js in [[j for j, par in enumerate(parents) if set(c) <= set(par)]]
            for n in [len(js)]
        }

    t_given_v = {v: row for v, row in zip(V, up([(v,) for v in V], T).values())}
    return LayeredSystem(
        V=tuple(V), T=tuple(T), K=tuple(K), S=tuple(S),
        v_marginal={v: Fraction(1, len(V)) for v in V},
        t_given_v=t_given_v, k_given_t=up(T, K), s_given_k=up(K, S), name=name,
    )


@pytest.fixture(scope="session")
def plane3():
    """RS degree-1 lift on F_3^2 with three copies of the plane as S."""
    system, graph = complete_system(3, 2, 1, copies=3)
    base = rs_base_codes(system, 3, 2, 1)
    return system, graph, LiftedCodeFamily(system, base, 3)


@pytest.fixture(scope="session")
def grass231():
    system, graph = grassmann_mas(2, 3, 1, 2, 3)
    return system, graph


@pytest.fixture(scope="session")
def grass3413():
    system, graph = grassmann_mas(3, 4, 1, 2, 3)
    base = rs_base_codes(system, 3, 4, 1)
    return system, graph, LiftedCodeFamily(system, base, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
