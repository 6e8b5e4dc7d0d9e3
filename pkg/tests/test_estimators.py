from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from lifted_ltc.errors import StructuralError
from lifted_ltc.estimators import SelfCorrector, TannerTester


def test_tester_predict_and_scores(plane3, rng):
    system, _, family = plane3
    est = TannerTester(system=system, base=family.base).fit()
    code = family.code
    words = np.vstack([(rng.integers(0, 3, size=3) @ code.generator) % 3, rng.integers(0, 3, size=(5, 9))])
    pred = est.predict(words)
    assert pred.tolist() == [int(code.contains(w)) for w in words]
    scores = est.score_samples(words)
    assert scores[0] == 0.0
    assert est.fail_probabilities(words)[1] == family.fail_probability(words[1])
    assert est.get_params()["budget"] == family.budget
    assert clone(est).get_params()["system"].V == system.V


def test_tester_validation(plane3):
    system, _, family = plane3
    with pytest.raises(NotFittedError):
        TannerTester(system=system, base=family.base).predict(np.zeros((1, 9)))
    est = TannerTester(system=system, base=family.base).fit()
    with pytest.raises(StructuralError):
        est.predict(np.zeros((1, 8)))
    with pytest.raises(StructuralError):
        est.predict(np.full((1, 9), 3))
    with pytest.raises(ValueError):
        est.predict(np.full((1, 9), np.nan))


def test_self_corrector_transform(plane3, rng):
    system, A, family = plane3
    code = family.code
    clean = (rng.integers(0, 3, size=(4, 3)) @ code.generator) % 3
    noisy = clean.copy()
    noisy[:, 2] = (noisy[:, 2] + 1) % 3
    sc = SelfCorrector(system=system, base=family.base, graph=A)
    out = sc.fit_transform(noisy)
    assert np.array_equal(out, clean)
    traces = sc.correct(noisy[:1])
    assert traces[0].total_distance == Fraction(1, 9)
