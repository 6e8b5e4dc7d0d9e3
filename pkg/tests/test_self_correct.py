from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from conftest import uniform_system
from lifted_ltc.agreement import AgreementGraph
from lifted_ltc.field import Word
from lifted_ltc.linear_code import LinearCode
from lifted_ltc.self_correct import (FAIL_ZERO, ROUND_CAP, STALL, build_ensemble, claim_checks, correction_round,
                                     hypothesis_audit, iterative_self_correct)
from lifted_ltc.tanner import LiftedCodeFamily, rho_exact


def random_codeword(code, rng):
    return (rng.integers(0, code.p, size=code.dimension) @ code.generator) % code.p


def corrupt(w, count, p, rng):
    w = w.copy()
    pos = rng.choice(len(w), size=count, replace=False)
    w[pos] = (w[pos] + rng.integers(1, p, size=count)) % p
    return w


def cycle_instance():
    """Equality constraints on the edges of a 4-cycle; every S set is one edge."""
    T = ((0, 1), (1, 2), (2, 3), (0, 3))
    system = uniform_system((0, 1, 2, 3), T, T, T)
    A = AgreementGraph(system.S, system.K, [(i, i, i, Fraction(1, 4)) for i in range(4)])
    family = LiftedCodeFamily(system, {t: LinearCode(c, [[1, 1]], 2) for t, c in enumerate(T)}, 2)
    return system, A, family


def test_ensemble_of_codeword_is_its_restrictions(plane3, rng):
    system, _, family = plane3
    w = random_codeword(family.code, rng)
    E = build_ensemble(family, w)
    word = Word.from_array(system.V, w, 3)
    assert all(E[s] == word.restrict(system.S[s]) for s in range(len(system.S)))


def test_ensemble_undoes_single_corruption(plane3, rng):
    system, _, family = plane3
    w = random_codeword(family.code, rng)
    bad = corrupt(w, 1, 3, rng)
    E = build_ensemble(family, bad)
    word = Word.from_array(system.V, w, 3)
    assert all(E[s] == word.restrict(system.S[s]) for s in range(len(system.S)))


def test_fixed_point(grass3413, rng):
    _, A, family = grass3413
    w = random_codeword(family.code, rng)
    r = correction_round(family, A, w)
    assert r.output_word == r.input_word
    assert r.agreement == 1
    assert r.fail_in == r.fail_out == r.distance == r.k_distance == 0
    trace = iterative_self_correct(family, A, w)
    assert len(trace.rounds) == 1 and trace.reason == FAIL_ZERO and trace.total_distance == 0


def test_single_corruption_one_round(plane3, rng):
    _, A, family = plane3
    for _ in range(10):
        bad = corrupt(random_codeword(family.code, rng), 1, 3, rng)
        trace = iterative_self_correct(family, A, bad)
        assert trace.reason == FAIL_ZERO and len(trace.rounds) == 1
        assert trace.rounds[0].fail_out == 0
        assert trace.total_distance == Fraction(1, 9)


def test_stall_is_reported_not_claimed():
    _, A, family = cycle_instance()
    trace = iterative_self_correct(family, A, np.array([1, 1, 1, 0]))
    assert trace.reason == STALL
    assert not trace.corrected
    assert family.fail_probability(trace.terminal) > 0


def test_round_cap(grass3413, rng):
    _, A, family = grass3413
    w = rng.integers(0, 3, size=81)
    trace = iterative_self_correct(family, A, w, round_cap=1)
    assert len(trace.rounds) == 1
    assert trace.reason in (FAIL_ZERO, ROUND_CAP, STALL)
    with pytest.raises(ValueError):
        iterative_self_correct(family, A, w, round_cap=0)


def test_default_round_cap(grass3413):
    system, _, family = grass3413
    pmin = min(system.t_marginal.values())
    assert family.default_round_cap() == math.ceil(math.log2(1 / pmin)) + 1


def test_trace_invariants_and_determinism(grass3413, rng):
    _, A, family = grass3413
    for _ in range(4):
        w = rng.integers(0, 3, size=81)
        a = iterative_self_correct(family, A, w)
        b = iterative_self_correct(family, A, w)
        assert [r.metrics() for r in a.rounds] == [r.metrics() for r in b.rounds]
        for prev, nxt in zip(a.rounds, a.rounds[1:]):
            assert prev.output_word == nxt.input_word
            assert prev.fail_out < prev.fail_in
        for r in a.rounds:
            assert 0 <= r.agreement <= 1 and 0 <= r.distance <= 1 and r.fail_out >= 0
        assert (a.reason == FAIL_ZERO) == (family.fail_probability(a.terminal) == 0)


def test_audit_flags():
    unmet = hypothesis_audit(None, None, {"rho": 1, "delta": Fraction(1, 2), "lambda": Fraction(1, 10), "alpha": 1})
    assert not unmet.hypothesis_met
    assert unmet.threshold == Fraction(1, 128) and unmet.testability == Fraction(1, 32)
    degenerate = hypothesis_audit(None, None, {"rho": 1, "delta": 0, "lambda": 0, "alpha": 1})
    assert degenerate.degenerate and not degenerate.hypothesis_met
    met = hypothesis_audit(None, None, {"rho": Fraction(1, 1000), "delta": Fraction(1, 9), "lambda": 0,
                                        "alpha": Fraction(1, 50), "exact": {"rho": True}})
    assert met.hypothesis_met and met.exact["rho"] and not met.exact["alpha"]
    regime = hypothesis_audit(None, None, {"rho": 1, "delta": 1, "lambda": 0, "alpha": 1}, grassmann=(2, 3))
    assert any("regime" in n for n in regime.notes)


def test_claims_on_complete_fixture(plane3, rng):
    system, A, family = plane3
    rho = rho_exact(family, ("S", 0)).rho
    audit = hypothesis_audit(family, A, {"rho": rho, "delta": family.local_distance(), "lambda": 0,
                                         "alpha": Fraction(2, 3)})
    assert audit.hypothesis_met
    for level in range(1, 6):
        bad = corrupt(random_codeword(family.code, rng), level, 3, rng)
        trace = iterative_self_correct(family, A, bad)
        checks = claim_checks(trace, audit)
        assert all(checks.values()), checks
