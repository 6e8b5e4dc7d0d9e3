from __future__ import annotations

import json
from fractions import Fraction

import numpy as np
import pytest

from lifted_ltc.agreement import LocalEnsemble
from lifted_ltc.errors import StructuralError
from lifted_ltc.field import Word
from lifted_ltc.io import (ensemble_from_json, ensemble_to_json, fraction_str, load_system, save_system,
                           system_from_json, system_to_json, trace_to_json, unpair)
from lifted_ltc.self_correct import iterative_self_correct
from lifted_ltc.set_system import validate


def test_system_roundtrip(plane3, tmp_path):
    system, A, family = plane3
    path = tmp_path / "sys.json"
    save_system(path, system, 3, A, family.base)
    system2, A2, base2, p = load_system(path)
    assert p == 3 and validate(system2).ok
    assert system_to_json(system2, 3) == system_to_json(system, 3)
    assert A2.edges == A.edges
    assert all(np.array_equal(base2[t].parity_checks, family.base[t].parity_checks) for t in base2)
    assert system_to_json(system2, 3, A2, base2) == json.loads(path.read_text())


def test_malformed_system_document():
    with pytest.raises(StructuralError):
        system_from_json({"p": 3, "V": [0]})
    with pytest.raises(StructuralError):
        unpair("1/2")


def test_ensemble_roundtrip(plane3):
    system, _, _ = plane3
    w = Word(system.V, tuple(v % 3 for v in system.V), 3)
    E = LocalEnsemble.from_global(w, system.S)
    doc = json.loads(json.dumps(ensemble_to_json(E)))
    assert ensemble_from_json(doc, system.S, 3).functions == E.functions
    with pytest.raises(StructuralError):
        ensemble_from_json({"0": [1, 2]}, system.S, 3)


def test_trace_json(plane3):
    system, A, family = plane3
    w = np.zeros(9, dtype=np.int64)
    w[4] = 1
    doc = trace_to_json(iterative_self_correct(family, A, w))
    assert doc["reason"] == "fail-zero"
    assert doc["total_distance"] == {"num": 1, "den": 9}
    assert doc["rounds"][0]["metrics"]["fail_out"] == {"num": 0, "den": 1}
    assert doc["rounds"][0]["input_word"] == w.tolist()
    assert fraction_str(Fraction(2, 6)) == "1/3"
