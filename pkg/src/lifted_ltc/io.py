"""JSON interchange for systems, ensembles and correction traces.

Rationals are written as ``[num, den]`` pairs inside system documents and
as ``{"num": .., "den": ..}`` objects inside traces.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Mapping

import numpy as np

from .agreement import AgreementGraph, LocalEnsemble
from .errors import StructuralError
from .field import Word, check_modulus
from .linear_code import LinearCode
from .self_correct import CorrectionTrace
from .set_system import LayeredSystem

SYSTEM_FORMAT = "lifted-ltc/system"
SYSTEM_VERSION = 1


def pair(x: Fraction) -> list[int]:
    x = Fraction(x)
    return [x.numerator, x.denominator]


def unpair(obj) -> Fraction:
    if isinstance(obj, Mapping):
        return Fraction(int(obj["num"]), int(obj["den"]))
    if isinstance(obj, (list, tuple)) and len(obj) == 2:
        return Fraction(int(obj[0]), int(obj[1]))
    raise StructuralError(f"not a rational: {obj!r}")


def rational(x: Fraction) -> dict[str, int]:
    x = Fraction(x)
    return {"num": x.numerator, "den": x.denominator}


def fraction_str(x) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def system_to_json(system: LayeredSystem, p: int, graph: AgreementGraph | None = None,
                   base: Mapping[int, LinearCode] | None = None) -> dict:
    def kernel(k):
        return [[a, b, *pair(x)] for a in sorted(k) for b, x in sorted(k[a].items())]

    doc = {
        "format": SYSTEM_FORMAT,
        "version": SYSTEM_VERSION,
        "name": system.name,
        "p": p,
        "V": list(system.V),
        "layers": {name: [list(s) for s in system.layer(name)] for name in ("T", "K", "S")},
        "chain": {
            "v_marginal": [[v, *pair(x)] for v, x in sorted(system.v_marginal.items())],
            "t_given_v": kernel(system.t_given_v),
            "k_given_t": kernel(system.k_given_t),
            "s_given_k": kernel(system.s_given_k),
        },
    }
    if graph is not None:
        doc["edges"] = [[a, b, k, pair(w)] for a, b, k, w in graph.edges]
    if base is not None:
        doc["base"] = {str(t): {"checks": base[t].parity_checks.tolist()} for t in sorted(base)}
    return doc


def system_from_json(doc: Mapping):
    """Inverse of :func:`system_to_json`: ``(system, graph or None, base or None, p)``."""
    try:
        p = check_modulus(int(doc["p"]))
        layers = doc["layers"]
        chain = doc["chain"]

        def kernel(rows):
            out: dict[int, dict[int, Fraction]] = {}
            for a, b, num, den in rows:
                out.setdefault(int(a), {})[int(b)] = Fraction(int(num), int(den))
            return out

        system = LayeredSystem(
            V=tuple(doc["V"]),
            T=tuple(tuple(s) for s in layers["T"]),
            K=tuple(tuple(s) for s in layers["K"]),
            S=tuple(tuple(s) for s in layers["S"]),
            v_marginal={int(v): Fraction(int(n), int(d)) for v, n, d in chain["v_marginal"]},
            t_given_v=kernel(chain["t_given_v"]),
            k_given_t=kernel(chain["k_given_t"]),
            s_given_k=kernel(chain["s_given_k"]),
            name=doc.get("name", ""),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, StructuralError):
            raise
        raise StructuralError(f"malformed system document: {exc!r}") from None
    graph = None
    if "edges" in doc:
        graph = AgreementGraph.from_system(system, [(a, b, k, unpair(w)) for a, b, k, w in doc["edges"]])
    base = None
    if "base" in doc:
        base = {}
        for key, entry in doc["base"].items():
            t = int(key)
            coords = system.T[t]
            checks = np.array(entry["checks"], dtype=np.int64).reshape(-1, len(coords))
            base[t] = LinearCode(coords, checks, p)
    return system, graph, base, p


def save_system(path, system: LayeredSystem, p: int, graph=None, base=None) -> None:
    Path(path).write_text(json.dumps(system_to_json(system, p, graph, base), indent=1) + "\n")


def load_system(path):
    return system_from_json(json.loads(Path(path).read_text()))


def ensemble_to_json(E: LocalEnsemble) -> dict[str, list[int]]:
    return {str(s): list(E[s].values) for s in sorted(E.functions)}


def ensemble_from_json(doc: Mapping, S, p: int) -> LocalEnsemble:
    funcs = {}
    for key, vals in doc.items():
        s = int(key)
        if len(vals) != len(S[s]):
            raise StructuralError(f"ensemble entry {s} has {len(vals)} values for {len(S[s])} coordinates")
        funcs[s] = Word(S[s], tuple(int(v) for v in vals), p)
    return LocalEnsemble(funcs)


def trace_rounds_to_json(trace: CorrectionTrace) -> list[dict]:
    return [
        {
            "round": r.index,
            "input_word": list(r.input_word.values),
            "output_word": list(r.output_word.values),
            "metrics": {k: rational(v) for k, v in r.metrics().items()},
        }
        for r in trace.rounds
    ]


def trace_to_json(trace: CorrectionTrace) -> dict:
    return {
        "reason": trace.reason,
        "total_distance": rational(trace.total_distance),
        "terminal_word": list(trace.terminal.values),
        "rounds": trace_rounds_to_json(trace),
    }
