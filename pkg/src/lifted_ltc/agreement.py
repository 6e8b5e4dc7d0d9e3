"""Agreement graphs on ``S``, local ensembles, and agreement measurements."""

from __future__ import annotations

import itertools
import weakref
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ResourceError, StructuralError
from .field import Word
from .set_system import LayeredSystem


@dataclass(frozen=True, eq=False)
class AgreementGraph:
    """Weighted edges ``(s, s', k, weight)`` over the sets ``S`` labelled by sets ``K``.

    ``D`` optionally fixes the per-``s`` label distribution; by default it is
    read off the edges as P(k | first endpoint = s).
    """

    S: tuple[tuple[int, ...], ...]
    K: tuple[tuple[int, ...], ...]
    edges: tuple[tuple[int, int, int, Fraction], ...]
    D: Mapping[int, Mapping[int, Fraction]] | None = field(default=None)

    def __post_init__(self):
        S = tuple(tuple(sorted(s)) for s in self.S)
        K = tuple(tuple(sorted(k)) for k in self.K)
        edges = tuple((int(a), int(b), int(k), Fraction(w)) for a, b, k, w in self.edges)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "edges", edges)
        total = Fraction(0)
        for a, b, k, w in edges:
            if w < 0:
                raise StructuralError(f"edge ({a}, {b}, {k}) has negative weight")
            if not set(K[k]) <= set(S[a]) & set(S[b]):
                raise StructuralError(f"label K[{k}] is not inside S[{a}] ∩ S[{b}]")
            total += w
        if edges and total != 1:
            raise StructuralError(f"edge weights sum to {total}, not 1")

    @classmethod
    def from_system(cls, system: LayeredSystem, edges) -> "AgreementGraph":
        return cls(system.S, system.K, tuple(edges))

    @cached_property
    def pair_marginal(self) -> dict[tuple[int, int], Fraction]:
        """Law of ``(s, k)`` when an edge is drawn and its first endpoint kept."""
        out: dict[tuple[int, int], Fraction] = defaultdict(Fraction)
        for a, _, k, w in self.edges:
            out[(a, k)] += w
        return dict(out)

    @cached_property
    def s_marginal(self) -> dict[int, Fraction]:
        out: dict[int, Fraction] = defaultdict(Fraction)
        for (s, _), w in self.pair_marginal.items():
            out[s] += w
        return dict(out)

    @cached_property
    def label_law(self) -> dict[int, dict[int, Fraction]]:
        """``D_s`` as ``{s: {k: P(k | s)}}``."""
        if self.D is not None:
            return {int(s): {int(k): Fraction(x) for k, x in row.items()} for s, row in self.D.items()}
        out: dict[int, dict[int, Fraction]] = defaultdict(dict)
        for (s, k), w in self.pair_marginal.items():
            out[s][k] = w / self.s_marginal[s]
        return dict(out)

    @cached_property
    def _positions(self) -> dict[tuple[int, int], np.ndarray]:
        pairs = {(a, k) for a, _, k, _ in self.edges} | {(b, k) for _, b, k, _ in self.edges}
        pairs |= {(s, k) for s, row in self.label_law.items() for k in row}
        out = {}
        for s, k in pairs:
            pos = {c: i for i, c in enumerate(self.S[s])}
            out[(s, k)] = np.array([pos[c] for c in self.K[k]], dtype=np.intp)
        return out

    def matches_chain(self, system: LayeredSystem) -> bool:
        """Whether the (s, k) edge marginal equals the chain's (s, k) marginal."""
        chain = {(s, k): w for (k, s), w in system.joint_ks.items() if w}
        mine = {key: w for key, w in self.pair_marginal.items() if w}
        return chain == mine


@dataclass(frozen=True, eq=False)
class LocalEnsemble:
    """An assignment ``s -> f_s`` of Words, ``f_s`` living on ``S[s]``."""

    functions: Mapping[int, Word]

    def __getitem__(self, s: int) -> Word:
        return self.functions[s]

    def __contains__(self, s: int) -> bool:
        return s in self.functions

    def __len__(self) -> int:
        return len(self.functions)

    @classmethod
    def from_global(cls, w: Word, S: Sequence[Sequence[int]], indices: Iterable[int] | None = None) -> "LocalEnsemble":
        idx = range(len(S)) if indices is None else indices
        return cls({s: w.restrict(S[s]) for s in idx})

    @cached_property
    def arrays(self) -> dict[int, np.ndarray]:
        return {s: f.as_array() for s, f in self.functions.items()}

    def _get(self, s: int) -> np.ndarray:
        try:
            return self.arrays[s]
        except KeyError:
            raise StructuralError(f"ensemble has no function on S[{s}]") from None


def _restricted(A: AgreementGraph, E: LocalEnsemble, s: int, k: int) -> tuple[int, ...]:
    return tuple(E._get(s)[A._positions[(s, k)]].tolist())


def agreement_value(A: AgreementGraph, E: LocalEnsemble) -> Fraction:
    """Probability that a random edge's endpoints agree on its whole label."""
    cache: dict[tuple[int, int], tuple[int, ...]] = {}

    def r(s, k):
        key = (s, k)
        if key not in cache:
            cache[key] = _restricted(A, E, s, k)
        return cache[key]

    return sum((w for a, b, k, w in A.edges if r(a, k) == r(b, k)), Fraction(0))


def is_delta_ensemble(A: AgreementGraph, E: LocalEnsemble, delta) -> tuple[bool, tuple[int, int, int] | None]:
    """Each edge must agree on its label or differ on at least ``delta * |k|`` points."""
    delta = Fraction(delta)
    for a, b, k, w in A.edges:
        if not w:
            continue
        ra = E._get(a)[A._positions[(a, k)]]
        rb = E._get(b)[A._positions[(b, k)]]
        diff = int(np.count_nonzero(ra != rb))
        if diff and diff < delta * len(A.K[k]):
            return False, (a, b, k)
    return True, None


_VOTES: "weakref.WeakKeyDictionary[LayeredSystem, list]" = weakref.WeakKeyDictionary()


def _vote_table(system: LayeredSystem) -> list[list[tuple[int, int, Fraction]]]:
    table = _VOTES.get(system)
    if table is None:
        table = []
        for v in system.V:
            row = []
            for s, w in sorted(system.s_given_v[v].items()):
                if w > 0:
                    row.append((s, system.S[s].index(v), w))
            table.append(row)
        _VOTES[system] = table
    return table


def plurality_global(system: LayeredSystem, A: AgreementGraph | None, E: LocalEnsemble) -> Word:
    """Per-vertex plurality of ``f_s(v)`` weighted by P(s | v); ties go to the smallest value.

    Existence of a close global word is all agreement soundness promises;
    this is the constructive stand-in used throughout.
    """
    if not len(E):
        raise StructuralError("empty ensemble")
    p = next(iter(E.functions.values())).p
    out = []
    for v, row in zip(system.V, _vote_table(system)):
        tally: dict[int, Fraction] = defaultdict(Fraction)
        for s, pos, w in row:
            if s in E:
                tally[int(E._get(s)[pos])] += w
        if not tally:
            raise StructuralError(f"vertex {v} is not covered by any weighted set (non-degeneracy)")
        top = max(tally.values())
        out.append(min(a for a, x in tally.items() if x == top))
    return Word(system.V, tuple(out), p)


def distance_to_global(A: AgreementGraph, E: LocalEnsemble, w: Word, mode: str = "K") -> Fraction:
    """Disagreement probability between ``E`` and the perfectly global ensemble of ``w``.

    ``mode="S"`` compares whole local functions with ``s`` from the edge
    marginal; ``mode="K"`` compares restrictions to ``k ~ D_s``.
    """
    vals = w.as_array()
    vpos = {c: i for i, c in enumerate(w.coords)}
    s_idx = {s: np.array([vpos[c] for c in A.S[s]], dtype=np.intp) for s in A.s_marginal}
    total = Fraction(0)
    if mode == "S":
        for s, ps in A.s_marginal.items():
            if ps and np.any(E._get(s) != vals[s_idx[s]]):
                total += ps
        return total
    if mode != "K":
        raise ValueError(f"mode must be 'S' or 'K', got {mode!r}")
    for s, ps in A.s_marginal.items():
        if not ps:
            continue
        fs = E._get(s)
        ws = vals[s_idx[s]]
        for k, q in A.label_law.get(s, {}).items():
            pos = A._positions[(s, k)]
            if np.any(fs[pos] != ws[pos]):
                total += ps * q
    return total


def exact_global_distance(
    A: AgreementGraph, E: LocalEnsemble, V: Sequence[int], p: int, mode: str = "K", budget: int = 2**16
) -> tuple[Fraction, Word]:
    """Minimum of :func:`distance_to_global` over every global word (brute force)."""
    if p ** len(V) > budget:
        raise ResourceError(f"{p}^{len(V)} global words over budget {budget}", guard="enumeration")
    best, arg = None, None
    for vals in itertools.product(range(p), repeat=len(V)):
        w = Word(tuple(V), vals, p)
        d = distance_to_global(A, E, w, mode)
        if best is None or d < best:
            best, arg = d, w
    return best, arg


@dataclass(frozen=True)
class AlphaSample:
    trial: int
    strategy: str
    corrupted: int
    agreement: Fraction
    k_distance: Fraction

    @property
    def ratio(self) -> Fraction | None:
        if not self.k_distance:
            return None
        return (1 - self.agreement) / self.k_distance


@dataclass
class AlphaEstimate:
    value: Fraction | None
    samples: list[AlphaSample]
    trace: dict

    @property
    def inconclusive(self) -> bool:
        return self.value is None


_RATES = (Fraction(1, 20), Fraction(1, 10), Fraction(1, 4), Fraction(1, 2))


def _sample_ensemble(system: LayeredSystem, rng: np.random.Generator, p: int, trial: int):
    n_s = len(system.S)
    rate = _RATES[trial % len(_RATES)]
    strategy = "shift" if (trial // len(_RATES)) % 2 == 0 else "alternative"
    g = rng.integers(0, p, size=len(system.V))
    count = max(1, min(n_s, round(rate * n_s)))
    corrupted = set(int(x) for x in rng.choice(n_s, size=count, replace=False))
    alt = rng.integers(0, p, size=len(system.V))
    vpos = system.v_position
    funcs = {}
    for s, coords in enumerate(system.S):
        idx = [vpos[c] for c in coords]
        vals = g[idx]
        if s in corrupted:
            if strategy == "shift":
                vals = (vals + int(rng.integers(1, p))) % p
            else:
                vals = alt[idx]
        funcs[s] = Word(coords, tuple(int(x) for x in vals), p)
    return strategy, count, LocalEnsemble(funcs)


def soundness_alpha_estimate(
    system: LayeredSystem, A: AgreementGraph, trials: int, delta, seed: int, *, p: int = 2
) -> AlphaEstimate:
    """Smallest observed ``(1 - A(E)) / dist_K(E, plurality(E))`` over sampled δ-ensembles.

    Ensembles start from a uniformly random global word; a fraction of the
    local functions is either shifted by a nonzero constant or replaced by
    the restriction of a second random global word.  Samples that are not
    δ-ensembles are rejected, samples at K-distance 0 are skipped.  Trial
    ``i`` uses the generator seeded with ``(seed, i)``, so extending
    ``trials`` never changes earlier samples.

    The decoder is the plurality word rather than the closest global word,
    so the result is an empirical figure for the plurality decoder; it
    is ``None`` (inconclusive) if no sample had positive K-distance.
    """
    delta = Fraction(delta)
    samples: list[AlphaSample] = []
    rejected = skipped = 0
    for i in range(trials):
        rng = np.random.default_rng([int(seed), i])
        strategy, count, E = _sample_ensemble(system, rng, p, i)
        ok, _ = is_delta_ensemble(A, E, delta)
        if not ok:
            rejected += 1
            continue
        w = plurality_global(system, A, E)
        kd = distance_to_global(A, E, w, "K")
        sample = AlphaSample(i, strategy, count, agreement_value(A, E), kd)
        samples.append(sample)
        if not kd:
            skipped += 1
    ratios = [s.ratio for s in samples if s.ratio is not None]
    value = min(ratios) if ratios else None
    trace = {
        "kind": "empirical",
        "decoder": "plurality",
        "trials": trials,
        "delta": delta,
        "rejected_not_delta_ensemble": rejected,
        "skipped_zero_distance": skipped,
        "used": len(ratios),
        "inconclusive": value is None,
        "seed": int(seed),
    }
    return AlphaEstimate(value, samples, trace)
