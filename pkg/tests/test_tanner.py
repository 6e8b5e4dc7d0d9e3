from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from lifted_ltc.errors import ResourceError
from lifted_ltc.field import Word
from lifted_ltc.grassmann import decode_point, reed_muller
from lifted_ltc.linear_code import LinearCode
from lifted_ltc.tanner import (LiftedCodeFamily, fail_probability, lift, rate_report, rejection_rate, rho_estimate,
                               rho_exact, tanner_test_once)


def full_base(system, p):
    return {t: LinearCode(c, [], p) for t, c in enumerate(system.T)}


def constants(coords, p):
    """x_0 - x_i = 0 for every i."""
    n = len(coords)
    return LinearCode(coords, [[1] + [p - 1 if j == i else 0 for j in range(1, n)] for i in range(1, n)], p)


def degree_one_words(p=3, n=2):
    """Evaluations of a0 + a.x over F_p^n in point-id order."""
    pts = [decode_point(i, p, n) for i in range(p**n)]
    for coeffs in itertools.product(range(p), repeat=n + 1):
        yield tuple((coeffs[0] + sum(c * x for c, x in zip(coeffs[1:], pt))) % p for pt in pts)


def line_oracle(system, w, p, degree_ok):
    """Lines on which w restricts to something outside the base code, by direct check."""
    return [t for t, line in enumerate(system.T) if not degree_ok(tuple(w[v] for v in line))]


def test_full_space_lift(grass231):
    system, _ = grass231
    code = lift(system, full_base(system, 2))
    assert code.dimension == len(system.V)


def test_lift_to_t_is_base(plane3):
    system, _, family = plane3
    for t in range(len(system.T)):
        assert np.array_equal(family.lift(("T", t)).parity_checks, family.base[t].parity_checks)


def test_rs_lift_on_plane(plane3):
    system, _, family = plane3
    code = family.code
    assert code.dimension == 3
    assert code.rank == 6
    for w in degree_one_words():
        assert code.contains(np.array(w))
        assert all(family.base[t].contains(np.array([w[v] for v in line])) for t, line in enumerate(system.T))


def test_lift_without_contained_t_is_full_space(plane3, caplog):
    _, _, family = plane3
    code = family.lift((0, 4))
    assert code.dimension == 2
    assert "full space" in caplog.text


def test_fail_three_of_28(grass231):
    system, _ = grass231
    w = np.array([0, 1, 1, 0, 1, 0, 0, 1])
    nonconst = [t for t, line in enumerate(system.T) if len({int(w[v]) for v in line}) > 1]
    chosen = nonconst[:3]
    base = full_base(system, 2)
    for t in chosen:
        base[t] = constants(system.T[t], 2)
    family = LiftedCodeFamily(system, base)
    assert sorted(np.flatnonzero(family.violations(w))) == chosen
    assert fail_probability(family, w) == Fraction(3, 28)


def test_fail_zero_iff_in_code(plane3, rng):
    system, _, family = plane3
    for _ in range(200):
        w = rng.integers(0, 3, size=9)
        if rng.random() < 0.3:
            w = np.array(next(itertools.islice(degree_one_words(), int(rng.integers(27)), None)))
        fail = family.fail_probability(w)
        assert (fail == 0) == family.code.contains(w)
        bad = line_oracle(system, {v: int(w[v]) for v in system.V}, 3,
                          lambda vals: (vals[0] + vals[2] - 2 * vals[1]) % 3 == 0)
        assert fail == Fraction(len(bad), len(system.T))


def test_tester_accepts_codewords_and_draws_real_t(plane3):
    system, _, family = plane3
    w = np.array(next(degree_one_words()))
    for draw in range(50):
        out = tanner_test_once(family, w, seed=3, draw=draw)
        assert out.accept and system.t_marginal[out.t] > 0
    assert tanner_test_once(family, w, 3, 9) == tanner_test_once(family, w, 3, 9)


def test_rejection_rate_within_three_sigma(plane3, rng):
    _, _, family = plane3
    w = rng.integers(0, 3, size=9)
    fail = float(family.fail_probability(w))
    rate, n = rejection_rate(family, w, 100_000, seed=1)
    assert abs(float(rate) - fail) <= 3 * math.sqrt(fail * (1 - fail) / n)


def test_violations_many_matches_single(plane3, rng):
    _, _, family = plane3
    words = rng.integers(0, 3, size=(30, 9))
    many = family.violations_many(words)
    for row, w in zip(many, words):
        assert np.array_equal(row, family.violations(w))


def test_rho_estimate(plane3):
    _, _, family = plane3
    est = rho_estimate(family, [0, 1, 2, 4], trials_per_level=6, seed=2)
    level0 = [s for s in est.samples if s.level == 0]
    assert all(s.distance == 0 and s.ratio is None for s in level0)
    for s in est.samples:
        if s.distance:
            assert s.fail > 0 and s.ratio > 0
            assert est.rho <= s.ratio
    assert rho_estimate(family, [1, 2], 4, seed=2).rho == rho_estimate(family, [1, 2], 4, seed=2).rho


def test_rho_estimate_budget(plane3):
    system, _, _ = plane3
    family = LiftedCodeFamily(system, full_base(system, 3), budget=100)
    with pytest.raises(ResourceError):
        rho_estimate(family, [1], 1, seed=0)


def test_rho_exact_brute_force(plane3):
    _, _, family = plane3
    res = rho_exact(family)
    code = family.code
    best = None
    for w in itertools.product(range(3), repeat=9):
        d = code.distance_to(np.array(w))
        if d:
            r = family.fail_probability(np.array(w)) / d
            best = r if best is None else min(best, r)
    assert res.rho == best
    assert res.words == 3**9


def test_local_testability_on_s(plane3):
    _, _, family = plane3
    est = rho_estimate(family, [1, 3], 5, seed=4, target=("S", 1))
    assert est.target == ("S", 1)
    assert rho_exact(family, ("S", 0)).rho == rho_exact(family).rho


def test_nesting_k_into_s(grass3413, rng):
    system, _, family = grass3413
    for s in rng.choice(len(system.S), size=4, replace=False):
        cs = family.lift(("S", int(s)))
        words = cs.codewords()
        for k in [k for k, kk in enumerate(system.K) if set(kk) <= set(system.S[s])][:3]:
            ck = family.lift(("K", k))
            pos = [cs.coords.index(c) for c in ck.coords]
            assert ck.contains_many(words[:, pos]).all()


def test_rate_report_bound(grass3413):
    _, _, family = grass3413
    report = rate_report(family)
    assert report["dimension"] >= report["counting_bound"]
    assert report["dimension"] == reed_muller(3, 4, 1).dimension == 5
