"""Affine flats of ``F_p^n``, the Grassmannian layered system, RS and RM codes.

Points of ``F_p^n`` are identified with integers by reading the coordinate
vector as base-``p`` digits, least significant first.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .agreement import AgreementGraph
from .errors import ResourceError, StructuralError
from .field import check_modulus
from .linear_code import LinearCode, rank, rref
from .set_system import LayeredSystem

ENUMERATION_GUARD = 3**5


def encode_point(x: Sequence[int], p: int) -> int:
    return int(sum(int(c) * p**i for i, c in enumerate(x)))


def decode_point(pid: int, p: int, n: int) -> tuple[int, ...]:
    out = []
    for _ in range(n):
        pid, r = divmod(pid, p)
        out.append(r)
    return tuple(out)


def gaussian_binomial(n: int, d: int, p: int) -> int:
    """Number of ``d``-dimensional linear subspaces of ``F_p^n``."""
    if d < 0 or d > n:
        return 0
    num = den = 1
    for i in range(d):
        num *= p ** (n - i) - 1
        den *= p ** (i + 1) - 1
    return num // den


def affine_count(p: int, n: int, d: int) -> int:
    return p ** (n - d) * gaussian_binomial(n, d, p)


@dataclass(frozen=True)
class AffineSubspace:
    """``offset + span(basis)`` in canonical form.

    The basis is kept in reduced row-echelon form and the offset has zeros in
    the pivot columns, so equal point sets give equal objects.
    """

    p: int
    n: int
    offset: tuple[int, ...]
    basis: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self):
        p, n = self.p, self.n
        off = np.array(self.offset, dtype=np.int64).reshape(n) % p
        if self.basis:
            b = np.array(self.basis, dtype=np.int64).reshape(-1, n)
            red, pivots = rref(b, p)
            if len(red) != len(b):
                raise StructuralError("basis vectors are linearly dependent")
            for row, c in zip(red, pivots):
                off = (off - off[c] * row) % p
            basis = tuple(tuple(int(x) for x in row) for row in red)
        else:
            basis = ()
        object.__setattr__(self, "offset", tuple(int(x) for x in off))
        object.__setattr__(self, "basis", basis)

    @property
    def dim(self) -> int:
        return len(self.basis)

    @cached_property
    def _pivots(self) -> list[int]:
        return [next(i for i, x in enumerate(row) if x) for row in self.basis]

    def points(self) -> list[tuple[int, ...]]:
        off = np.array(self.offset, dtype=np.int64)
        if not self.basis:
            return [tuple(off.tolist())]
        b = np.array(self.basis, dtype=np.int64)
        coeffs = np.array(list(itertools.product(range(self.p), repeat=self.dim)), dtype=np.int64)
        pts = (off + coeffs @ b) % self.p
        return [tuple(row) for row in pts.tolist()]

    @cached_property
    def point_ids(self) -> tuple[int, ...]:
        return tuple(sorted(encode_point(x, self.p) for x in self.points()))

    def _reduce(self, x) -> np.ndarray:
        x = np.array(x, dtype=np.int64) % self.p
        for row, c in zip(self.basis, self._pivots):
            x = (x - x[c] * np.array(row)) % self.p
        return x

    def contains_point(self, x: Sequence[int]) -> bool:
        return not np.any(self._reduce(np.array(x) - np.array(self.offset)))

    def contains(self, other: "AffineSubspace") -> bool:
        """Whether ``other`` is a subset of ``self``, decided algebraically."""
        if (other.p, other.n) != (self.p, self.n) or other.dim > self.dim:
            return False
        if not self.contains_point(other.offset):
            return False
        return all(not np.any(self._reduce(v)) for v in other.basis)

    def parameterize(self, coeffs: Sequence[int]) -> tuple[int, ...]:
        x = np.array(self.offset, dtype=np.int64)
        for c, row in zip(coeffs, self.basis):
            x = x + int(c) * np.array(row)
        return tuple(int(v) for v in x % self.p)

    @classmethod
    def from_points(cls, p: int, n: int, ids: Iterable[int]) -> "AffineSubspace":
        pts = [np.array(decode_point(i, p, n)) for i in ids]
        if not pts:
            raise StructuralError("empty point set")
        base = pts[0]
        diffs = np.array([(x - base) % p for x in pts[1:]], dtype=np.int64).reshape(-1, n)
        red, _ = rref(diffs, p) if len(diffs) else (diffs, [])
        flat = cls(p, n, tuple(base), tuple(tuple(int(v) for v in row) for row in red))
        if flat.point_ids != tuple(sorted(set(ids))):
            raise StructuralError("point set is not an affine subspace")
        return flat


def _guard(p: int, n: int, guard: int) -> None:
    if p**n > guard:
        raise ResourceError(f"F_{p}^{n} has {p**n} points, over the enumeration guard {guard}", guard="grassmann")


def _linear_subspaces(p: int, n: int, d: int):
    """All ``d``-dimensional subspaces as RREF bases."""
    for pivots in itertools.combinations(range(n), d):
        free = [(i, c) for i, pc in enumerate(pivots) for c in range(pc + 1, n) if c not in pivots]
        for vals in itertools.product(range(p), repeat=len(free)):
            b = np.zeros((d, n), dtype=np.int64)
            for i, pc in enumerate(pivots):
                b[i, pc] = 1
            for (i, c), x in zip(free, vals):
                b[i, c] = x
            yield pivots, b


def enumerate_affine(p: int, n: int, d: int, guard: int = ENUMERATION_GUARD) -> list[AffineSubspace]:
    """Every affine ``d``-flat of ``F_p^n`` exactly once, in a fixed order."""
    check_modulus(p)
    if not 0 <= d <= n:
        raise ValueError(f"need 0 <= d <= n, got d={d}, n={n}")
    _guard(p, n, guard)
    out = []
    for pivots, b in _linear_subspaces(p, n, d):
        rest = [c for c in range(n) if c not in pivots]
        basis = tuple(tuple(int(x) for x in row) for row in b)
        for vals in itertools.product(range(p), repeat=len(rest)):
            off = [0] * n
            for c, x in zip(rest, vals):
                off[c] = x
            out.append(AffineSubspace(p, n, tuple(off), basis))
    return out


def subflats(flat: AffineSubspace, d: int) -> list[AffineSubspace]:
    """All ``d``-flats contained in ``flat``."""
    inner = enumerate_affine(flat.p, flat.dim, d, guard=max(ENUMERATION_GUARD, flat.p**flat.dim))
    B = np.array(flat.basis, dtype=np.int64).reshape(flat.dim, flat.n)
    off = np.array(flat.offset, dtype=np.int64)
    out = []
    for g in inner:
        o = (off + np.array(g.offset, dtype=np.int64) @ B) % flat.p
        basis = tuple(tuple(int(x) for x in (np.array(row) @ B) % flat.p) for row in g.basis)
        out.append(AffineSubspace(flat.p, flat.n, tuple(o), basis))
    return out


# layered systems ---------------------------------------------------------


def _uniform_kernel(children: dict[int, list[int]]) -> dict[int, dict[int, Fraction]]:
    return {a: {b: Fraction(1, len(kids)) for b in kids} for a, kids in children.items()}


def _flag_system(p: int, n: int, dims: Sequence[int], guard: int):
    flats = [enumerate_affine(p, n, d, guard) for d in dims]
    index = [{f: i for i, f in enumerate(layer)} for layer in flats]
    # up[j][i]: indices of layer j+1 flats containing flat i of layer j
    up = []
    for j in range(len(dims) - 1):
        sup: dict[int, list[int]] = {i: [] for i in range(len(flats[j]))}
        for b, big in enumerate(flats[j + 1]):
            for small in subflats(big, dims[j]):
                sup[index[j][small]].append(b)
        up.append(sup)
    return flats, up


def grassmann_mas(
    p: int, n: int, q0: int, q1: int, q2: int, guard: int = ENUMERATION_GUARD
) -> tuple[LayeredSystem, AgreementGraph]:
    """Flats of dimensions ``q0 < q1 < q2`` with the uniform flag chain and the q2,q1 agreement test.

    The agreement edge ``(s, s', k)`` has weight P(k) P(s | k) P(s' | k).
    The regime ``q2 >= 3 q1 + 2`` is not enforced here.
    """
    check_modulus(p)
    if not 0 < q0 < q1 < q2 <= n:
        raise ValueError(f"need 0 < q0 < q1 < q2 <= n, got {(q0, q1, q2, n)}")
    flats, up = _flag_system(p, n, (0, q0, q1, q2), guard)
    points, T, K, S = flats
    V = tuple(encode_point(f.offset, p) for f in points)
    t_given_v = {V[i]: {t: Fraction(1, len(ts)) for t in ts} for i, ts in up[0].items()}
    system = LayeredSystem(
        V=V,
        T=tuple(f.point_ids for f in T),
        K=tuple(f.point_ids for f in K),
        S=tuple(f.point_ids for f in S),
        v_marginal={v: Fraction(1, len(V)) for v in V},
        t_given_v=t_given_v,
        k_given_t=_uniform_kernel(up[1]),
        s_given_k=_uniform_kernel(up[2]),
        name=f"grassmann(p={p}, n={n}, q=({q0}, {q1}, {q2}))",
    )
    edges = []
    for k, pk in system.k_marginal.items():
        row = system.s_given_k[k]
        for s in sorted(row):
            for s2 in sorted(row):
                edges.append((s, s2, k, pk * row[s] * row[s2]))
    return system, AgreementGraph.from_system(system, edges)


def complete_system(
    p: int, n: int, q0: int, copies: int = 1, guard: int = ENUMERATION_GUARD
) -> tuple[LayeredSystem, AgreementGraph]:
    """``T`` = all ``q0``-flats, ``K`` = {F_p^n}, ``S`` = ``copies`` copies of F_p^n.

    Every ``t`` lies in the single ``k``, so the K-vs-T graph is a product
    and its sampler constant is 0.  Correction on this system is one-shot.
    """
    check_modulus(p)
    if not 0 < q0 <= n:
        raise ValueError(f"need 0 < q0 <= n, got q0={q0}, n={n}")
    if copies < 1:
        raise ValueError("copies must be >= 1")
    flats, up = _flag_system(p, n, (0, q0), guard)
    points, T = flats
    V = tuple(encode_point(f.offset, p) for f in points)
    whole = tuple(sorted(V))
    system = LayeredSystem(
        V=V,
        T=tuple(f.point_ids for f in T),
        K=(whole,),
        S=(whole,) * copies,
        v_marginal={v: Fraction(1, len(V)) for v in V},
        t_given_v={V[i]: {t: Fraction(1, len(ts)) for t in ts} for i, ts in up[0].items()},
        k_given_t={t: {0: Fraction(1)} for t in range(len(T))},
        s_given_k={0: {s: Fraction(1, copies) for s in range(copies)}},
        name=f"complete(p={p}, n={n}, q0={q0}, copies={copies})",
    )
    w = Fraction(1, copies * copies)
    edges = [(a, b, 0, w) for a in range(copies) for b in range(copies)]
    return system, AgreementGraph.from_system(system, edges)


# codes -------------------------------------------------------------------


def reed_solomon_base(p: int, r: int, line: AffineSubspace) -> LinearCode:
    """Degree-``<= r`` polynomials along ``line`` as a code on its point identifiers."""
    if line.dim != 1:
        raise StructuralError(f"expected a line, got a flat of dimension {line.dim}")
    coords = line.point_ids
    if r >= p - 1:
        return LinearCode(coords, np.zeros((0, len(coords)), dtype=np.int64), p)
    pos = {c: i for i, c in enumerate(coords)}
    gen = np.zeros((r + 1, p), dtype=np.int64)
    for tau in range(p):
        col = pos[encode_point(line.parameterize([tau]), p)]
        for j in range(r + 1):
            gen[j, col] = pow(tau, j, p)
    return LinearCode.from_generator(coords, gen, p)


def reduced_monomials(p: int, n: int, r: int) -> list[tuple[int, ...]]:
    return [e for e in itertools.product(range(p), repeat=n) if sum(e) <= r]


def reed_muller(p: int, n: int, r: int, guard: int = ENUMERATION_GUARD) -> LinearCode:
    """Evaluations on ``F_p^n`` of polynomials of total degree ``<= r`` (individual degrees ``< p``)."""
    check_modulus(p)
    _guard(p, n, guard)
    coords = list(range(p**n))
    pts = np.array([decode_point(c, p, n) for c in coords], dtype=np.int64).reshape(len(coords), n)
    rows = []
    for e in reduced_monomials(p, n, r):
        rows.append(np.prod([pts[:, i] ** e[i] for i in range(n)], axis=0) % p if n else np.ones(1, dtype=np.int64))
    return LinearCode.from_generator(coords, np.array(rows, dtype=np.int64), p)


def rs_base_codes(system: LayeredSystem, p: int, n: int, r: int) -> dict[int, LinearCode]:
    """Reed-Solomon degree-``r`` base code on every line of ``system.T``."""
    return {i: reed_solomon_base(p, r, AffineSubspace.from_points(p, n, t)) for i, t in enumerate(system.T)}


@dataclass
class LiftComparison:
    p: int
    n: int
    r: int
    lift_dimension: int
    rm_dimension: int
    rm_contained: bool
    witness: tuple[int, ...] | None

    @property
    def relation(self) -> str:
        if self.lift_dimension == self.rm_dimension and self.rm_contained:
            return "equal"
        if self.lift_dimension > self.rm_dimension and self.rm_contained:
            return "lift strictly larger"
        return "inconsistent"


def lift_vs_rm_compare(p: int, n: int, r: int, guard: int = ENUMERATION_GUARD) -> LiftComparison:
    """Compare the lift of degree-``r`` RS codes on lines with RM(p, n, r) by exact rank."""
    from .tanner import LiftedCodeFamily

    system, _ = complete_system(p, n, 1, guard=guard)
    family = LiftedCodeFamily(system, rs_base_codes(system, p, n, r), p)
    lifted = family.lift("V")
    rm = reed_muller(p, n, r, guard)
    contained = bool(np.all(lifted.contains_many(rm.generator))) if rm.dimension else True
    witness = None
    if lifted.dimension > rm.dimension:
        base_rank = rank(rm.generator, p) if rm.dimension else 0
        for row in lifted.generator:
            stacked = np.vstack([rm.generator, row]) if rm.dimension else row[None, :]
            if rank(stacked, p) > base_rank:
                witness = tuple(int(x) for x in row)
                break
    return LiftComparison(p, n, r, lifted.dimension, rm.dimension, contained, witness)
