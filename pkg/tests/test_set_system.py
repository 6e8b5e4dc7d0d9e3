from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import uniform_system
from lifted_ltc.errors import ResourceError, UnsupportedError
from lifted_ltc.grassmann import grassmann_mas
from lifted_ltc.set_system import (BipartiteWeighted, LayeredSystem, containment_graph, marginal,
                                   sample_chain, sample_chains, sampler_condition_holds, sampler_lambda_estimate,
                                   sampler_lambda_exact, validate)


def brute_lambda(left_n, right_n, weights):
    """Smallest lambda over every nonempty B and every achieved gap, recomputed from scratch."""
    lm = [sum(weights.get((i, j), 0) for j in range(right_n)) for i in range(left_n)]
    rm = [sum(weights.get((i, j), 0) for i in range(left_n)) for j in range(right_n)]
    best = Fraction(0)
    for r in range(1, left_n + 1):
        for B in itertools.combinations(range(left_n), r):
            pb = sum(lm[i] for i in B)
            if pb == 0:
                continue
            cond = [sum(weights.get((i, j), 0) for i in B) / rm[j] if rm[j] else None for j in range(right_n)]
            for g in {c - pb for c in cond if c is not None and c > pb}:
                pn = sum(rm[j] for j in range(right_n) if cond[j] is not None and cond[j] - pb >= g)
                best = max(best, g * g * pn / pb)
    return best


def matching():
    return BipartiteWeighted((0, 1), (0, 1), {(0, 0): Fraction(1, 2), (1, 1): Fraction(1, 2)})


def product(left, right):
    lw = [Fraction(i + 1) for i in range(left)]
    rw = [Fraction(2 * j + 1) for j in range(right)]
    lt, rt = sum(lw), sum(rw)
    return BipartiteWeighted(tuple(range(left)), tuple(range(right)),
                             {(i, j): lw[i] / lt * rw[j] / rt for i in range(left) for j in range(right)})


SMALL = uniform_system(
    V=(0, 1, 2, 3),
    T=((0, 1), (1, 2), (2, 3), (0, 3)),
    K=((0, 1, 2), (1, 2, 3), (0, 2, 3), (0, 1, 3)),
    S=((0, 1, 2, 3),),
)


def test_valid_system_has_empty_report(grass231):
    system, _ = grass231
    assert validate(system).ok
    assert validate(SMALL).violations == ()


def test_normalization_violation_listed():
    bad = LayeredSystem(SMALL.V, SMALL.T, SMALL.K, SMALL.S, SMALL.v_marginal, SMALL.t_given_v,
                        {**SMALL.k_given_t, 0: {0: Fraction(1, 2)}}, SMALL.s_given_k)
    report = validate(bad)
    assert not report.ok
    assert any(v.startswith("normalization") and "k_given_t[0]" in v for v in report.violations)


def test_containment_violation_listed():
    row = dict(SMALL.k_given_t[0])
    row = {1: Fraction(1)}  # T[0] = (0, 1) is not inside K[1] = (1, 2, 3)
    bad = LayeredSystem(SMALL.V, SMALL.T, SMALL.K, SMALL.S, SMALL.v_marginal, SMALL.t_given_v,
                        {**SMALL.k_given_t, 0: row}, SMALL.s_given_k)
    assert any(v.startswith("containment") for v in validate(bad).violations)


def test_zero_marginal_is_non_degeneracy_violation():
    bad = LayeredSystem(SMALL.V, SMALL.T + ((0, 2),), SMALL.K, SMALL.S, SMALL.v_marginal, SMALL.t_given_v,
                        {**SMALL.k_given_t, 4: {0: Fraction(1)}}, SMALL.s_given_k)
    assert any(v.startswith("non-degeneracy: T[4]") for v in validate(bad).violations)


def test_marginals_uniform_and_normalized(grass231):
    system, _ = grass231
    mt = marginal(system, "T")
    assert len(system.T) == 28 and set(mt.values()) == {Fraction(1, 28)}
    for layer in ("V", "T", "K", "S"):
        assert sum(marginal(system, layer).values()) == 1
    single = uniform_system((0,), ((0,),), ((0,),), ((0,),))
    assert marginal(single, "S") == {0: 1}


def test_point_mass_chain_gives_perfect_matching():
    system = uniform_system((0, 1, 2), ((0,), (1,), (2,)), ((0,), (1,), (2,)), ((0, 1, 2),))
    G = containment_graph(system, "T", "K")
    assert G.weights == {(i, i): Fraction(1, 3) for i in range(3)}


def test_grassmann_t_vs_k_is_containment(grass231):
    system, _ = grass231
    G = containment_graph(system, "T", "K")
    for i, t in enumerate(system.T):
        for j, k in enumerate(system.K):
            assert ((i, j) in G.weights) == (set(t) <= set(k))
    assert sum(G.weights.values()) == 1
    GK = containment_graph(system, "K", "T")
    assert GK.left_marginal == [system.k_marginal[k] for k in range(len(system.K))]
    assert GK.right_marginal == [system.t_marginal[t] for t in range(len(system.T))]


def test_non_adjacent_layers_unsupported():
    with pytest.raises(UnsupportedError):
        containment_graph(SMALL, "V", "K")


def test_lambda_complete_product_is_zero():
    G = product(3, 4)
    assert sampler_lambda_exact(G) == 0
    assert sampler_lambda_estimate(G, 20, seed=5).value == 0


def test_lambda_perfect_matching():
    assert brute_lambda(2, 2, matching().weights) == Fraction(1, 4)
    assert sampler_lambda_exact(matching()) == Fraction(1, 4)
    assert sampler_lambda_estimate(matching(), 1, seed=0).value == Fraction(1, 4)


def test_lambda_grassmann_fact(grass231):
    system, _ = grass231
    G = containment_graph(system, "K", "T")
    lam, (B, g) = sampler_lambda_exact(G, return_witness=True)
    assert lam <= Fraction(1, 2)
    assert lam == Fraction(121, 588)
    # minimality: the witness attains lam as delta approaches g from below
    assert sampler_condition_holds(G, lam, B, g)
    assert not sampler_condition_holds(G, lam * Fraction(999, 1000), B, g * Fraction(999999, 1000000))


def test_lambda_budget_guard():
    G = product(21, 2)
    with pytest.raises(ResourceError) as exc:
        sampler_lambda_exact(G)
    assert exc.value.guard == "lambda_exhaustive"


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.data())
def test_lambda_matches_brute_force(left, right, data):
    raw = {(i, j): data.draw(st.integers(0, 4)) for i in range(left) for j in range(right)}
    if not any(raw.values()):
        raw[(0, 0)] = 1
    total = sum(raw.values())
    weights = {k: Fraction(v, total) for k, v in raw.items() if v}
    G = BipartiteWeighted(tuple(range(left)), tuple(range(right)), weights)
    exact = sampler_lambda_exact(G)
    assert exact == brute_lambda(left, right, weights)
    assert sampler_lambda_estimate(G, 10, seed=data.draw(st.integers(0, 99))).value <= exact
    for r in range(1, left + 1):
        for B in itertools.combinations(range(left), r):
            for d in (Fraction(1, 10), Fraction(1, 3), Fraction(1, 2)):
                assert sampler_condition_holds(G, exact, B, d)


def test_estimator_is_deterministic_and_lower_bound(grass231):
    system, _ = grass231
    G = containment_graph(system, "K", "T")
    a = sampler_lambda_estimate(G, 50, seed=3)
    b = sampler_lambda_estimate(G, 50, seed=3)
    assert a == b
    assert a.value <= sampler_lambda_exact(G)
    assert a.trace["kind"] == "lower_bound"


def test_sample_chain_support_and_determinism(grass231):
    system, _ = grass231
    for draw in range(200):
        v, t, k, s = sample_chain(system, seed=11, draw=draw)
        assert v in system.T[t] and set(system.T[t]) <= set(system.K[k]) <= set(system.S[s])
    assert sample_chain(system, 11, 7) == sample_chain(system, 11, 7)
    point = uniform_system((4,), ((4,),), ((4,),), ((4,),))
    assert sample_chain(point, 0) == (4, 0, 0, 0)


def test_sample_chain_frequencies_within_three_sigma():
    system = uniform_system(
        V=(0, 1, 2), T=((0,), (0, 1), (1, 2), (2,)), K=((0, 1, 2),), S=((0, 1, 2),)
    )
    n = 100_000
    draws = sample_chains(system, n, seed=42)
    counts = np.bincount(draws[:, 1], minlength=len(system.T))
    for t, q in system.t_marginal.items():
        q = float(q)
        assert abs(counts[t] / n - q) <= 3 * math.sqrt(q * (1 - q) / n)
