"""Lifted (Tanner) codes on a layered system and the natural Tanner tester."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .errors import ResourceError, StructuralError
from .field import Word
from .linear_code import DEFAULT_BUDGET, LinearCode
from .set_system import LayeredSystem

log = logging.getLogger(__name__)


def _lcm_denominator(values) -> int:
    d = 1
    for x in values:
        d = d * x.denominator // math.gcd(d, x.denominator)
    return d


class LiftedCodeFamily:
    """Base codes ``C_t`` on ``T`` together with their lifts to ``K``, ``S`` and ``V``.

    Lifts are parity-check systems: the union of the base checks of every
    ``t`` contained in the target, re-indexed into the target's coordinates.
    They are built lazily and cached.
    """

    def __init__(self, system: LayeredSystem, base: Mapping[int, LinearCode], p: int | None = None,
                 budget: int = DEFAULT_BUDGET):
        self.system = system
        self.budget = budget
        missing = [t for t in range(len(system.T)) if t not in base]
        if missing:
            raise StructuralError(f"no base code for T{missing[:5]}")
        moduli = {c.p for c in base.values()}
        if p is None:
            if len(moduli) != 1:
                raise StructuralError(f"base codes disagree on the modulus: {sorted(moduli)}")
            p = moduli.pop()
        elif moduli - {p}:
            raise StructuralError(f"base codes must all be over F_{p}")
        self.p = p
        self.base = {t: base[t] for t in range(len(system.T))}
        for t, code in self.base.items():
            if code.coords != system.T[t]:
                raise StructuralError(f"base code for T[{t}] lives on different coordinates")
        self._lifts: dict = {}
        vpos = system.v_position
        n = len(system.V)
        rows, owner = [], []
        inc = np.zeros((len(system.T), n), dtype=bool)
        for t, code in self.base.items():
            inc[t, [vpos[c] for c in code.coords]] = True
            h = code.reindex_checks(system.V)
            rows.append(h)
            owner.extend([t] * len(h))
        self._H = np.vstack(rows) if rows else np.zeros((0, n), dtype=np.int64)
        self._owner = np.array(owner, dtype=np.intp)
        self._incidence = inc
        tm = system.t_marginal
        self._t_prob = [tm[t] for t in range(len(system.T))]
        self._t_denom = _lcm_denominator(self._t_prob)
        self._t_int = np.array([int(x * self._t_denom) for x in self._t_prob], dtype=object)

    # lifting -------------------------------------------------------------

    def _target_coords(self, target) -> tuple[int, ...]:
        if target == "V":
            return self.system.V
        if isinstance(target, tuple) and len(target) == 2 and target[0] in ("S", "K", "T"):
            return self.system.layer(target[0])[target[1]]
        return tuple(sorted(int(c) for c in target))

    def contained_t(self, target) -> np.ndarray:
        """Indices of every ``t`` with ``t ⊆ target``."""
        coords = self._target_coords(target)
        vpos = self.system.v_position
        mask = np.zeros(len(self.system.V), dtype=bool)
        mask[[vpos[c] for c in coords]] = True
        return np.flatnonzero(~np.any(self._incidence & ~mask, axis=1))

    def lift(self, target="V") -> LinearCode:
        """``C_x`` for ``x`` = ``"V"``, ``("S", i)``, ``("K", i)`` or an explicit coordinate set."""
        coords = self._target_coords(target)
        code = self._lifts.get(coords)
        if code is None:
            ts = self.contained_t(coords)
            if not len(ts):
                log.warning("no t in T is contained in the target; lift is the full space")
            rows = [self.base[int(t)].reindex_checks(coords) for t in ts]
            checks = np.vstack(rows) if rows else np.zeros((0, len(coords)), dtype=np.int64)
            code = LinearCode(coords, checks, self.p)
            self._lifts[coords] = code
        return code

    @property
    def code(self) -> LinearCode:
        return self.lift("V")

    def local_code(self, layer: str, index: int) -> LinearCode:
        return self.lift((layer, index))

    # testing -------------------------------------------------------------

    def global_values(self, w) -> np.ndarray:
        if isinstance(w, Word):
            if w.coords != self.system.V:
                raise StructuralError("word must live on V")
            if w.p != self.p:
                raise StructuralError(f"word is over F_{w.p}, family over F_{self.p}")
            return w.as_array()
        arr = np.asarray(w, dtype=np.int64)
        if arr.shape != (len(self.system.V),):
            raise StructuralError(f"expected {len(self.system.V)} values, got shape {arr.shape}")
        return arr % self.p

    def violations(self, w) -> np.ndarray:
        """Boolean vector over ``T``: whether ``w|_t`` is outside ``C_t``."""
        vals = self.global_values(w)
        bad = (self._H @ vals) % self.p != 0
        out = np.zeros(len(self.system.T), dtype=bool)
        out[self._owner[bad]] = True
        return out

    def violations_many(self, words) -> np.ndarray:
        arr = np.atleast_2d(np.asarray(words, dtype=np.int64)) % self.p
        synd = ((arr @ self._H.T) % self.p != 0).astype(np.int64)
        onehot = np.zeros((len(self._H), len(self.system.T)), dtype=np.int64)
        onehot[np.arange(len(self._H)), self._owner] = 1
        return synd @ onehot > 0

    def fail_probability(self, w) -> Fraction:
        bad = self.violations(w)
        return sum((self._t_prob[t] for t in np.flatnonzero(bad)), Fraction(0))

    def local_fail_probability(self, w, s: int) -> Fraction:
        """Rejection probability of ``w`` when ``t`` is drawn from P(t | s)."""
        return self._local_fail(self.violations(w), s)

    def _local_fail(self, bad: np.ndarray, s: int) -> Fraction:
        law = self.system.t_given_s.get(s, {})
        return sum((q for t, q in law.items() if bad[t]), Fraction(0))

    def local_distance(self, budget: int | None = None) -> Fraction:
        """``min_k dist(C_k)``; zero if some ``C_k`` is trivial."""
        budget = budget or self.budget
        best = None
        seen: dict[tuple, Fraction] = {}
        for k in range(len(self.system.K)):
            code = self.lift(("K", k))
            if code.dimension == 0:
                return Fraction(0)
            key = (code.length, code.parity_checks.tobytes())
            d = seen.get(key)
            if d is None:
                d = seen[key] = code.minimum_distance(budget)
            best = d if best is None else min(best, d)
        return best if best is not None else Fraction(0)

    def default_round_cap(self) -> int:
        pmin = min(x for x in self._t_prob if x > 0)
        return math.ceil(math.log2(1 / pmin)) + 1 if pmin < 1 else 1


def lift(system: LayeredSystem, base: Mapping[int, LinearCode], target="V") -> LinearCode:
    return LiftedCodeFamily(system, base).lift(target)


def fail_probability(family: LiftedCodeFamily, w) -> Fraction:
    """Exact P_t[w|_t not in C_t] under the T marginal."""
    return family.fail_probability(w)


@dataclass(frozen=True)
class TestOutcome:
    __test__ = False

    accept: bool
    t: int
    seed: int
    draw: int


def _sample_index(weights_int: np.ndarray, denom: int, rng: np.random.Generator, size=None):
    cum = np.cumsum(weights_int.astype(np.int64))
    r = rng.integers(0, denom, size=size)
    return np.searchsorted(cum, r, side="right")


def tanner_test_once(family: LiftedCodeFamily, w, seed: int, draw: int = 0) -> TestOutcome:
    """Draw ``t`` from the T marginal and accept iff ``w|_t`` lies in ``C_t``."""
    rng = np.random.default_rng([int(seed), 0, int(draw)])
    t = int(_sample_index(family._t_int, family._t_denom, rng))
    return TestOutcome(not bool(family.violations(w)[t]), t, int(seed), int(draw))


def rejection_rate(family: LiftedCodeFamily, w, draws: int, seed: int) -> tuple[Fraction, int]:
    """Empirical rejection frequency over ``draws`` independent tester runs."""
    rng = np.random.default_rng([int(seed), 1])
    ts = _sample_index(family._t_int, family._t_denom, rng, size=draws)
    bad = family.violations(w)
    return Fraction(int(bad[ts].sum()), draws), draws


# testability -----------------------------------------------------------


@dataclass(frozen=True)
class RhoSample:
    level: int
    trial: int
    distance: Fraction
    fail: Fraction

    @property
    def ratio(self) -> Fraction | None:
        return self.fail / self.distance if self.distance else None


@dataclass
class RhoEstimate:
    rho: Fraction | None
    rows: list[dict]
    samples: list[RhoSample] = field(default_factory=list)
    target: object = "V"


def _target_code_and_fail(family: LiftedCodeFamily, target):
    if target in (None, "V"):
        code = family.code
        return code, "V", (lambda vals: family.fail_probability(vals))
    layer, idx = target
    if layer != "S":
        raise StructuralError("local testability is measured on S sets")
    code = family.lift(("S", idx))
    vpos = family.system.v_position
    cols = np.array([vpos[c] for c in code.coords], dtype=np.intp)
    n = len(family.system.V)

    def fail(vals):
        full = np.zeros(n, dtype=np.int64)
        full[cols] = vals
        # t outside s is never drawn under P(t | s), so the padding is harmless
        return family._local_fail(family.violations(full), idx)

    return code, ("S", idx), fail


def rho_estimate(family: LiftedCodeFamily, corruption_levels: Sequence[int], trials_per_level: int, seed: int,
                 target=None) -> RhoEstimate:
    """Fail/dist ratios of random corrupted codewords; the minimum is the estimate.

    ``target=None`` measures ``C`` against the T marginal, ``("S", i)``
    measures ``C_s`` against P(t | s).  Each corrupted coordinate is moved to
    a uniformly random different value.
    """
    code, tgt, fail = _target_code_and_fail(family, target)
    if code.size > family.budget:
        raise ResourceError(
            f"exact distance needs {code.p}^{code.dimension} codewords (budget {family.budget}); "
            "use smaller parameters", guard="enumeration")
    samples: list[RhoSample] = []
    rows = []
    for li, level in enumerate(corruption_levels):
        level = int(level)
        if not 0 <= level <= code.length:
            raise ValueError(f"corruption level {level} outside [0, {code.length}]")
        level_samples = []
        for j in range(trials_per_level):
            rng = np.random.default_rng([int(seed), li, j])
            coeffs = rng.integers(0, code.p, size=code.dimension)
            word = (coeffs @ code.generator) % code.p if code.dimension else np.zeros(code.length, np.int64)
            pos = rng.choice(code.length, size=level, replace=False)
            word[pos] = (word[pos] + rng.integers(1, code.p, size=level)) % code.p
            d = code.distance_to(word, family.budget)
            level_samples.append(RhoSample(level, j, d, fail(word)))
        samples.extend(level_samples)
        used = [s for s in level_samples if s.ratio is not None]
        m = len(level_samples) or 1
        rows.append({
            "level": level,
            "trials": len(level_samples),
            "used": len(used),
            "mean_distance": sum((s.distance for s in level_samples), Fraction(0)) / m,
            "mean_fail": sum((s.fail for s in level_samples), Fraction(0)) / m,
            "min_ratio": min((s.ratio for s in used), default=None),
        })
    ratios = [s.ratio for s in samples if s.ratio is not None]
    return RhoEstimate(min(ratios) if ratios else None, rows, samples, tgt)


@dataclass
class RhoExact:
    rho: Fraction | None
    witness: tuple[int, ...] | None
    words: int


def rho_exact(family: LiftedCodeFamily, target=None, budget: int = 2**20) -> RhoExact:
    """``min_{w not in C} Fail(w) / dist(w, C)`` over every word of the target."""
    code, tgt, _ = _target_code_and_fail(family, target)
    n = code.length
    if code.p**n > budget:
        raise ResourceError(f"{code.p}^{n} words over budget {budget}", guard="enumeration")
    words = np.indices((code.p,) * n).reshape(n, -1).T.astype(np.int64) if n else np.zeros((1, 0), np.int64)
    cw = code.codewords(family.budget)
    dist = np.full(len(words), n + 1, dtype=np.int64)
    for c in cw:
        dist = np.minimum(dist, np.count_nonzero(words != c, axis=1))
    vpos = family.system.v_position
    cols = np.array([vpos[c] for c in code.coords], dtype=np.intp)
    full = np.zeros((len(words), len(family.system.V)), dtype=np.int64)
    full[:, cols] = words
    viol = family.violations_many(full)
    if tgt == "V":
        law = {t: q for t, q in enumerate(family._t_prob) if q}
    else:
        law = family.system.t_given_s.get(tgt[1], {})
    ts = sorted(law)
    denom = _lcm_denominator(law.values()) if law else 1
    wint = np.array([int(law[t] * denom) for t in ts], dtype=np.int64)
    fail_num = viol[:, ts].astype(np.int64) @ wint if ts else np.zeros(len(words), np.int64)
    outside = dist > 0
    if not outside.any():
        return RhoExact(None, None, len(words))
    ratio = np.where(outside, fail_num * n / (denom * np.maximum(dist, 1)), np.inf)
    fmin = ratio.min()
    best, arg = None, None
    for i in np.flatnonzero(ratio <= fmin * (1 + 1e-9) + 1e-15):
        r = Fraction(int(fail_num[i]) * n, denom * int(dist[i]))
        if best is None or r < best:
            best, arg = r, tuple(int(x) for x in words[i])
    return RhoExact(best, arg, len(words))


def rate_report(family: LiftedCodeFamily) -> dict:
    """Dimension of ``C`` next to the constraint-counting lower bound."""
    code = family.code
    check_ranks = sum(c.rank for c in family.base.values())
    n = len(family.system.V)
    return {
        "length": n,
        "dimension": code.dimension,
        "rate": Fraction(code.dimension, n),
        "counting_bound": max(0, n - check_ranks),
        "base_check_rank_sum": check_ranks,
    }
