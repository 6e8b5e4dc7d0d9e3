"""Four-layer set systems ``V, T, K, S`` with a downward Markov chain.

The chain picks ``v`` from a marginal, then ``t`` given ``v``, ``k`` given
``t`` and ``s`` given ``k``, always with ``v in t ⊆ k ⊆ s``.  All
probabilities are exact :class:`~fractions.Fraction` values.

Layers ``T``, ``K``, ``S`` are tuples of sorted coordinate tuples and are
referred to by index; ``V`` elements are referred to by their identifier.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ResourceError, StructuralError, UnsupportedError

LAYERS = ("V", "T", "K", "S")
Kernel = Mapping[int, Mapping[int, Fraction]]


def _fsum(values: Iterable[Fraction]) -> Fraction:
    return sum(values, Fraction(0))


@dataclass(frozen=True, eq=False)
class LayeredSystem:
    """Layers plus the factorized chain.

    ``t_given_v[v][t]`` is P(t | v) keyed by the identifier ``v`` and the
    index ``t``; ``k_given_t`` and ``s_given_k`` are keyed by indices.
    """

    V: tuple[int, ...]
    T: tuple[tuple[int, ...], ...]
    K: tuple[tuple[int, ...], ...]
    S: tuple[tuple[int, ...], ...]
    v_marginal: Mapping[int, Fraction]
    t_given_v: Kernel
    k_given_t: Kernel
    s_given_k: Kernel
    name: str = field(default="", compare=False)

    def __post_init__(self):
        norm = lambda fam: tuple(tuple(sorted(int(x) for x in s)) for s in fam)
        object.__setattr__(self, "V", tuple(sorted(int(v) for v in self.V)))
        object.__setattr__(self, "T", norm(self.T))
        object.__setattr__(self, "K", norm(self.K))
        object.__setattr__(self, "S", norm(self.S))
        fr = lambda kern: {int(a): {int(b): Fraction(x) for b, x in row.items()} for a, row in kern.items()}
        object.__setattr__(self, "v_marginal", {int(v): Fraction(x) for v, x in self.v_marginal.items()})
        object.__setattr__(self, "t_given_v", fr(self.t_given_v))
        object.__setattr__(self, "k_given_t", fr(self.k_given_t))
        object.__setattr__(self, "s_given_k", fr(self.s_given_k))

    def layer(self, name: str):
        if name not in LAYERS:
            raise UnsupportedError(f"unknown layer {name!r}")
        return getattr(self, name)

    @cached_property
    def v_position(self) -> dict[int, int]:
        return {v: i for i, v in enumerate(self.V)}

    # marginals -----------------------------------------------------------

    @cached_property
    def t_marginal(self) -> dict[int, Fraction]:
        out: dict[int, Fraction] = defaultdict(Fraction)
        for v, pv in self.v_marginal.items():
            for t, q in self.t_given_v.get(v, {}).items():
                out[t] += pv * q
        return {t: out.get(t, Fraction(0)) for t in range(len(self.T))}

    @cached_property
    def k_marginal(self) -> dict[int, Fraction]:
        out: dict[int, Fraction] = defaultdict(Fraction)
        for t, pt in self.t_marginal.items():
            for k, q in self.k_given_t.get(t, {}).items():
                out[k] += pt * q
        return {k: out.get(k, Fraction(0)) for k in range(len(self.K))}

    @cached_property
    def s_marginal(self) -> dict[int, Fraction]:
        out: dict[int, Fraction] = defaultdict(Fraction)
        for k, pk in self.k_marginal.items():
            for s, q in self.s_given_k.get(k, {}).items():
                out[s] += pk * q
        return {s: out.get(s, Fraction(0)) for s in range(len(self.S))}

    def marginal_of(self, layer: str) -> dict[int, Fraction]:
        if layer == "V":
            return {v: self.v_marginal.get(v, Fraction(0)) for v in self.V}
        return getattr(self, f"{layer.lower()}_marginal")

    # joints and derived conditionals -------------------------------------

    @cached_property
    def joint_vt(self) -> dict[tuple[int, int], Fraction]:
        return {(v, t): pv * q for v, pv in self.v_marginal.items() for t, q in self.t_given_v.get(v, {}).items()}

    @cached_property
    def joint_tk(self) -> dict[tuple[int, int], Fraction]:
        return {(t, k): pt * q for t, pt in self.t_marginal.items() for k, q in self.k_given_t.get(t, {}).items()}

    @cached_property
    def joint_ks(self) -> dict[tuple[int, int], Fraction]:
        return {(k, s): pk * q for k, pk in self.k_marginal.items() for s, q in self.s_given_k.get(k, {}).items()}

    @cached_property
    def _s_given_t(self) -> dict[int, dict[int, Fraction]]:
        out = {}
        for t in range(len(self.T)):
            row: dict[int, Fraction] = defaultdict(Fraction)
            for k, q in self.k_given_t.get(t, {}).items():
                for s, r in self.s_given_k.get(k, {}).items():
                    row[s] += q * r
            out[t] = dict(row)
        return out

    @cached_property
    def s_given_v(self) -> dict[int, dict[int, Fraction]]:
        """P(s | v) under the chain."""
        out = {}
        for v in self.V:
            row: dict[int, Fraction] = defaultdict(Fraction)
            for t, q in self.t_given_v.get(v, {}).items():
                for s, r in self._s_given_t[t].items():
                    row[s] += q * r
            out[v] = dict(row)
        return out

    @cached_property
    def t_given_s(self) -> dict[int, dict[int, Fraction]]:
        """P(t | s) under the chain; the local tester's distribution inside ``s``."""
        out: dict[int, dict[int, Fraction]] = defaultdict(dict)
        for t, pt in self.t_marginal.items():
            for s, q in self._s_given_t[t].items():
                out[s][t] = pt * q
        for s, row in out.items():
            ps = self.s_marginal[s]
            for t in row:
                row[t] /= ps
        return dict(out)

    @cached_property
    def k_given_s(self) -> dict[int, dict[int, Fraction]]:
        """P(k | s) under the chain."""
        out: dict[int, dict[int, Fraction]] = defaultdict(dict)
        for (k, s), q in self.joint_ks.items():
            out[s][k] = q / self.s_marginal[s]
        return dict(out)


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate(system: LayeredSystem) -> ValidationReport:
    """List containment, normalization and non-degeneracy violations."""
    out: list[str] = []
    vset = set(system.V)
    if len(vset) != len(system.V):
        out.append("V: duplicate identifiers")
    for name in ("T", "K", "S"):
        for i, s in enumerate(system.layer(name)):
            if len(set(s)) != len(s):
                out.append(f"{name}[{i}]: duplicate coordinates")
            if not set(s) <= vset:
                out.append(f"{name}[{i}]: coordinates outside V")

    def check_row(label: str, row: Mapping[int, Fraction]):
        if any(x < 0 for x in row.values()):
            out.append(f"normalization: {label} has a negative entry")
        total = _fsum(row.values())
        if total != 1:
            out.append(f"normalization: {label} sums to {total}")

    check_row("v_marginal", system.v_marginal)
    for v in system.v_marginal:
        if v not in vset:
            out.append(f"v_marginal: unknown vertex {v}")

    sets = {name: system.layer(name) for name in ("T", "K", "S")}

    def check_kernel(label, kern, parent_support, child_layer, parent_set):
        children = sets[child_layer]
        for a in parent_support:
            row = kern.get(a)
            if row is None:
                out.append(f"normalization: {label} row {a} missing")
                continue
            check_row(f"{label}[{a}]", row)
        for a, row in kern.items():
            for b, x in row.items():
                if not 0 <= b < len(children):
                    out.append(f"{label}[{a}]: index {b} out of range")
                    continue
                if x > 0 and not parent_set(a) <= set(children[b]):
                    out.append(f"containment: {label}[{a}] -> {child_layer}[{b}] with positive weight")

    check_kernel("t_given_v", system.t_given_v, [v for v, x in system.v_marginal.items() if x > 0], "T", lambda v: {v})
    check_kernel(
        "k_given_t", system.k_given_t, [t for t, x in system.t_marginal.items() if x > 0], "K", lambda t: set(system.T[t])
    )
    check_kernel(
        "s_given_k", system.s_given_k, [k for k, x in system.k_marginal.items() if x > 0], "S", lambda k: set(system.K[k])
    )
    for v in system.V:
        if system.v_marginal.get(v, 0) <= 0:
            out.append(f"non-degeneracy: V element {v} has zero marginal")
    for name in ("T", "K", "S"):
        for i, x in system.marginal_of(name).items():
            if x <= 0:
                out.append(f"non-degeneracy: {name}[{i}] has zero marginal")
    return ValidationReport(tuple(out))


def marginal(system: LayeredSystem, layer: str) -> dict[int, Fraction]:
    """Exact marginal of one layer (keyed by identifier for V, index otherwise)."""
    if layer not in LAYERS:
        raise UnsupportedError(f"unknown layer {layer!r}")
    return dict(system.marginal_of(layer))


# bipartite graphs and samplers --------------------------------------------


@dataclass(frozen=True, eq=False)
class BipartiteWeighted:
    """Weighted bipartite graph; ``weights[(i, j)]`` for left index ``i``, right index ``j``.

    In sampler audits the test set ``B`` ranges over the left side and the
    exceptional set ``N`` over the right side.
    """

    left: tuple
    right: tuple
    weights: Mapping[tuple[int, int], Fraction]

    def __post_init__(self):
        object.__setattr__(self, "weights", {(int(i), int(j)): Fraction(w) for (i, j), w in self.weights.items() if w})
        if any(w < 0 for w in self.weights.values()):
            raise StructuralError("negative edge weight")
        if _fsum(self.weights.values()) != 1:
            raise StructuralError("edge weights must sum to 1")

    @cached_property
    def left_marginal(self) -> list[Fraction]:
        out = [Fraction(0)] * len(self.left)
        for (i, _), w in self.weights.items():
            out[i] += w
        return out

    @cached_property
    def right_marginal(self) -> list[Fraction]:
        out = [Fraction(0)] * len(self.right)
        for (_, j), w in self.weights.items():
            out[j] += w
        return out

    @cached_property
    def _integer_form(self):
        denom = 1
        for w in self.weights.values():
            denom = denom * w.denominator // math.gcd(denom, w.denominator)
        mat = np.zeros((len(self.left), len(self.right)), dtype=object)
        for (i, j), w in self.weights.items():
            mat[i, j] = int(w * denom)
        return mat, denom

    def conditional(self, subset: Iterable[int]) -> list[Fraction]:
        """P(u in B | right vertex) for every right vertex."""
        mat, _ = self._integer_form
        idx = sorted(set(subset))
        num = mat[idx].sum(axis=0) if idx else np.zeros(len(self.right), dtype=object)
        return [
            Fraction(int(num[j]), int(mat[:, j].sum())) if self.right_marginal[j] else Fraction(0)
            for j in range(len(self.right))
        ]

    def mass(self, subset: Iterable[int]) -> Fraction:
        return _fsum(self.left_marginal[i] for i in set(subset))


def containment_graph(system: LayeredSystem, layer_a: str, layer_b: str) -> BipartiteWeighted:
    """Bipartite graph of two adjacent layers weighted by the chain's joint law."""
    pair = {layer_a, layer_b}
    if pair == {"V", "T"}:
        joint, names = system.joint_vt, ("V", "T")
    elif pair == {"T", "K"}:
        joint, names = system.joint_tk, ("T", "K")
    elif pair == {"K", "S"}:
        joint, names = system.joint_ks, ("K", "S")
    else:
        raise UnsupportedError(f"layers {layer_a} and {layer_b} are not adjacent in the chain")
    labels = {name: (list(system.V) if name == "V" else list(range(len(system.layer(name))))) for name in names}
    pos = {name: {x: i for i, x in enumerate(labels[name])} for name in names}
    weights = {}
    for (a, b), w in joint.items():
        key = (pos[names[0]][a], pos[names[1]][b])
        if layer_a != names[0]:
            key = key[::-1]
        weights[key] = w
    return BipartiteWeighted(tuple(labels[layer_a]), tuple(labels[layer_b]), weights)


def _sampler_value(G: BipartiteWeighted, subset: Sequence[int]) -> tuple[Fraction, Fraction | None]:
    """max over achieved gaps g of g^2 P(gap >= g) / P(B), with the maximizing g."""
    pb = G.mass(subset)
    if pb == 0:
        return Fraction(0), None
    cond = G.conditional(subset)
    rm = G.right_marginal
    gaps = sorted(((c - pb, rm[j]) for j, c in enumerate(cond) if c > pb and rm[j]), reverse=True)
    best, arg = Fraction(0), None
    acc = Fraction(0)
    i = 0
    while i < len(gaps):
        g = gaps[i][0]
        while i < len(gaps) and gaps[i][0] == g:
            acc += gaps[i][1]
            i += 1
        val = g * g * acc / pb
        if val > best:
            best, arg = val, g
    return best, arg


def sampler_condition_holds(G: BipartiteWeighted, lam: Fraction, subset: Sequence[int], delta: Fraction) -> bool:
    """The defining inequality P(N(B, delta)) <= lam / delta^2 * P(B), N with strict excess."""
    pb = G.mass(subset)
    cond = G.conditional(subset)
    pn = _fsum(G.right_marginal[j] for j, c in enumerate(cond) if c > pb + delta)
    return pn * delta * delta <= lam * pb


def _float_values(G: BipartiteWeighted, bits: np.ndarray) -> np.ndarray:
    """Float screen of the sampler value for each row of a 0/1 membership matrix."""
    mat, denom = G._integer_form
    w = mat.astype(np.float64)
    wl = w.sum(axis=1)
    wr = w.sum(axis=0)
    safe_wr = np.where(wr > 0, wr, 1.0)
    numer = bits @ w
    mb = bits @ wl
    pb = mb / float(denom)
    gaps = numer / safe_wr - pb[:, None]
    gaps[:, wr == 0] = 0.0
    order = np.argsort(-gaps, axis=1, kind="stable")
    sg = np.take_along_axis(gaps, order, axis=1)
    mass = np.cumsum((wr / float(denom))[order], axis=1)
    vals = np.where(sg > 0, sg * sg * mass, 0.0).max(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(pb > 0, vals / np.where(pb > 0, pb, 1.0), 0.0)


def sampler_lambda_exact(G: BipartiteWeighted, *, budget: int = 20, return_witness: bool = False):
    """Least lambda for which ``G`` is a lambda-sampler, by exhausting every ``B``.

    Only achieved gaps change ``N(B, delta)``; the supremum over ``delta`` in
    each piece is reached as ``delta`` tends to a gap from below, so the
    answer is ``max_B max_g g^2 P(gap >= g) / P(B)``.
    """
    m = len(G.left)
    if m > budget:
        raise ResourceError(
            f"exhaustive audit needs 2^{m} subsets (budget 2^{budget}); use sampler_lambda_estimate",
            guard="lambda_exhaustive",
        )
    shifts = np.arange(m, dtype=np.int64)
    fmax = 0.0
    candidates: list[tuple[int, float]] = []
    chunk = 1 << 15
    total = 1 << m
    for start in range(1, total, chunk):
        masks = np.arange(start, min(start + chunk, total), dtype=np.int64)
        bits = ((masks[:, None] >> shifts) & 1).astype(np.float64)
        vals = _float_values(G, bits)
        fmax = max(fmax, float(vals.max()))
        cut = fmax * (1 - 1e-9)
        candidates = [(x, v) for x, v in candidates if v >= cut]
        if fmax > 0:
            sel = vals >= cut
            candidates.extend(zip(masks[sel].tolist(), vals[sel].tolist()))
    best, witness = Fraction(0), ((), None)
    for mask, _ in candidates:
        subset = [i for i in range(m) if mask >> i & 1]
        val, g = _sampler_value(G, subset)
        if val > best:
            best, witness = val, (tuple(subset), g)
    if return_witness:
        return best, witness
    return best


@dataclass
class LambdaEstimate:
    value: Fraction
    subset: tuple[int, ...]
    delta: Fraction | None
    trace: dict


def sampler_lambda_estimate(G: BipartiteWeighted, trials: int, seed: int, *, refine: bool = True) -> LambdaEstimate:
    """Lower bound on lambda from structured and random test sets.

    Structured families (singletons and right-vertex neighborhoods) are
    always included; ``trials`` random subsets at mixed densities follow,
    and the best few are improved by single-element toggles.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    m = len(G.left)
    rng = np.random.default_rng([int(seed), 0])
    mat, _ = G._integer_form
    adj = mat.astype(np.float64) > 0
    fam: list[np.ndarray] = []
    fam.extend(np.eye(m, dtype=bool))
    fam.extend(adj[:, j].copy() for j in range(adj.shape[1]) if adj[:, j].any())
    n_structured = len(fam)
    densities = (0.02, 0.05, 0.1, 0.25, 0.5)
    for i in range(trials):
        d = densities[i % len(densities)]
        row = rng.random(m) < d
        if not row.any():
            row[rng.integers(m)] = True
        fam.append(row)
    bits = np.array(fam, dtype=np.float64)
    vals = _float_values(G, bits)
    order = np.argsort(-vals, kind="stable")
    pool = [bits[i].astype(bool) for i in order[: min(8, len(order))]]
    improved = 0
    if refine:
        for row in list(pool):
            cur = _float_values(G, row[None, :].astype(np.float64))[0]
            for _ in range(4):
                flips = np.repeat(row[None, :], m, axis=0)
                flips[np.arange(m), np.arange(m)] ^= True
                fv = _float_values(G, flips.astype(np.float64))
                j = int(np.argmax(fv))
                if fv[j] <= cur * (1 + 1e-12):
                    break
                row, cur = flips[j], fv[j]
                improved += 1
            pool.append(row)
    best, best_b, best_g = Fraction(0), (), None
    for row in pool:
        subset = [int(x) for x in np.flatnonzero(row)]
        val, g = _sampler_value(G, subset)
        if val > best:
            best, best_b, best_g = val, tuple(subset), g
    trace = {
        "kind": "lower_bound",
        "caveat": "maximum over sampled test sets only; does not certify the sampler property",
        "structured_sets": n_structured,
        "random_sets": trials,
        "refinement_steps": improved,
        "seed": int(seed),
    }
    return LambdaEstimate(best, best_b, best_g, trace)


# chain sampling ------------------------------------------------------------


def _draw(row: Mapping[int, Fraction], rng: np.random.Generator) -> int:
    keys = sorted(row)
    denom = 1
    for k in keys:
        d = row[k].denominator
        denom = denom * d // math.gcd(denom, d)
    if denom >= 2**62:
        raise ResourceError("kernel denominators too large for exact sampling", guard="sampling")
    cum = np.cumsum([int(row[k] * denom) for k in keys])
    r = int(rng.integers(0, denom))
    return keys[int(np.searchsorted(cum, r, side="right"))]


def sample_chain(system: LayeredSystem, seed: int, draw: int = 0) -> tuple[int, int, int, int]:
    """One draw ``(v, t, k, s)``; a pure function of ``(seed, draw)``."""
    rng = np.random.default_rng([int(seed), 0, int(draw)])
    v = _draw(system.v_marginal, rng)
    t = _draw(system.t_given_v[v], rng)
    k = _draw(system.k_given_t[t], rng)
    s = _draw(system.s_given_k[k], rng)
    return v, t, k, s


def _batch_step(states: np.ndarray, kernel: Kernel, rng: np.random.Generator) -> np.ndarray:
    out = np.empty_like(states)
    for x in np.unique(states):
        sel = np.flatnonzero(states == x)
        row = kernel[int(x)]
        keys = sorted(row)
        denom = 1
        for k in keys:
            denom = denom * row[k].denominator // math.gcd(denom, row[k].denominator)
        if denom >= 2**62:
            raise ResourceError("kernel denominators too large for exact sampling", guard="sampling")
        cum = np.cumsum([int(row[k] * denom) for k in keys])
        r = rng.integers(0, denom, size=sel.size)
        out[sel] = np.asarray(keys)[np.searchsorted(cum, r, side="right")]
    return out


def sample_chains(system: LayeredSystem, n: int, seed: int) -> np.ndarray:
    """``n`` chain draws as an ``(n, 4)`` array; deterministic in ``seed``.

    Uses its own stream, so rows do not coincide with :func:`sample_chain`.
    """
    rng = np.random.default_rng([int(seed), 1])
    v = _batch_step(np.zeros(n, dtype=np.int64), {0: system.v_marginal}, rng)
    t = _batch_step(v, system.t_given_v, rng)
    k = _batch_step(t, system.k_given_t, rng)
    s = _batch_step(k, system.s_given_k, rng)
    return np.stack([v, t, k, s], axis=1)
