"""Linear codes given by parity checks, with exhaustive oracles.

Codes are small at the scales this package targets, so distance and
nearest-codeword queries enumerate the code outright.  The enumeration is
guarded by a budget on ``p ** dimension``.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DomainError, ResourceError, StructuralError
from .field import Word, check_modulus

DEFAULT_BUDGET = 2**24


def rref(matrix, p: int) -> tuple[np.ndarray, list[int]]:
    """Reduced row-echelon form over ``F_p``; zero rows dropped."""
    m = np.array(matrix, dtype=np.int64) % p
    if m.ndim != 2:
        raise StructuralError("expected a 2-d matrix")
    rows, cols = m.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.nonzero(m[r:, c])[0]
        if nz.size == 0:
            continue
        piv = r + nz[0]
        if piv != r:
            m[[r, piv]] = m[[piv, r]]
        m[r] = (m[r] * pow(int(m[r, c]), -1, p)) % p
        others = np.nonzero(m[:, c])[0]
        others = others[others != r]
        if others.size:
            m[others] = (m[others] - np.outer(m[others, c], m[r])) % p
        pivots.append(c)
        r += 1
    return m[:r], pivots


def rank(matrix, p: int) -> int:
    m = np.asarray(matrix)
    if m.size == 0:
        return 0
    return len(rref(m, p)[1])


def nullspace(matrix, p: int, ncols: int | None = None) -> np.ndarray:
    """Basis (as rows) of ``{x : matrix @ x = 0}`` over ``F_p``."""
    m = np.asarray(matrix, dtype=np.int64)
    if ncols is None:
        ncols = m.shape[1]
    if m.size == 0:
        return np.eye(ncols, dtype=np.int64)
    r, pivots = rref(m.reshape(-1, ncols), p)
    free = [c for c in range(ncols) if c not in set(pivots)]
    basis = np.zeros((len(free), ncols), dtype=np.int64)
    for i, f in enumerate(free):
        basis[i, f] = 1
        for row, pc in enumerate(pivots):
            basis[i, pc] = (-r[row, f]) % p
    # lex-canonical basis so enumeration order is reproducible
    if len(free):
        basis, _ = rref(basis, p)
    return basis


class LinearCode:
    """The kernel of a list of parity checks on a coordinate set.

    Parameters
    ----------
    coords : sequence of int
        Coordinate identifiers; stored sorted.
    checks : array-like, shape (m, len(coords))
        Each row is a linear functional; row ``i`` column ``j`` is the
        coefficient of ``coords[j]``.
    p : int
        Prime modulus.
    """

    def __init__(self, coords: Sequence[int], checks, p: int):
        self.p = check_modulus(p)
        coords = tuple(int(c) for c in coords)
        order = sorted(range(len(coords)), key=coords.__getitem__)
        self.coords = tuple(coords[i] for i in order)
        if len(set(self.coords)) != len(self.coords):
            raise StructuralError("duplicate coordinates")
        n = len(self.coords)
        h = np.asarray(checks, dtype=np.int64)
        if h.size == 0:
            h = np.zeros((0, n), dtype=np.int64)
        if h.ndim != 2 or h.shape[1] != n:
            raise StructuralError(f"checks must have {n} columns, got shape {h.shape}")
        self.checks = h[:, order] % self.p
        self._rref, self._pivots = rref(self.checks, self.p) if len(h) else (self.checks[:0], [])
        self.generator = nullspace(self._rref, self.p, n)
        if self.generator.size and np.any((self.checks @ self.generator.T) % self.p):
            raise AssertionError("kernel basis does not satisfy checks")

    @classmethod
    def from_generator(cls, coords: Sequence[int], generator, p: int) -> "LinearCode":
        """The code spanned by the rows of ``generator``."""
        g = np.asarray(generator, dtype=np.int64).reshape(-1, len(coords))
        return cls(coords, nullspace(g, p, len(coords)), p)

    @property
    def length(self) -> int:
        return len(self.coords)

    @property
    def rank(self) -> int:
        return len(self._pivots)

    @property
    def dimension(self) -> int:
        return self.length - self.rank

    @property
    def size(self) -> int:
        return self.p**self.dimension

    @property
    def parity_checks(self) -> np.ndarray:
        """Independent checks (row-reduced)."""
        return self._rref

    def __repr__(self) -> str:
        return f"LinearCode(n={self.length}, k={self.dimension}, p={self.p})"

    def _values(self, w) -> np.ndarray:
        if isinstance(w, Word):
            if w.coords != self.coords:
                raise StructuralError("word and code live on different coordinates")
            if w.p != self.p:
                raise StructuralError(f"moduli differ: {w.p} vs {self.p}")
            return w.as_array()
        arr = np.asarray(w, dtype=np.int64)
        if arr.shape[-1] != self.length:
            raise StructuralError(f"expected {self.length} values, got {arr.shape[-1]}")
        return arr % self.p

    def syndrome(self, w) -> np.ndarray:
        return (self._rref @ self._values(w).T) % self.p

    def contains(self, w) -> bool:
        return not np.any(self.syndrome(w))

    def contains_many(self, words) -> np.ndarray:
        arr = np.atleast_2d(self._values(words))
        if not self.rank:
            return np.ones(len(arr), dtype=bool)
        return ~np.any((arr @ self._rref.T) % self.p, axis=1)

    def check_budget(self, budget: int) -> None:
        if self.size > budget:
            raise ResourceError(
                f"code has {self.p}^{self.dimension} codewords, over budget {budget}",
                guard="enumeration",
            )

    def codewords(self, budget: int = DEFAULT_BUDGET) -> np.ndarray:
        """All codewords, rows sorted lexicographically in coordinate order."""
        cached = self.__dict__.get("_codewords")
        if cached is not None:
            return cached
        self.check_budget(budget)
        k = self.dimension
        if k == 0:
            words = np.zeros((1, self.length), dtype=np.int64)
        else:
            coeffs = np.array(list(itertools.product(range(self.p), repeat=k)), dtype=np.int64)
            words = (coeffs @ self.generator) % self.p
            words = words[np.lexsort(words.T[::-1])]
        words.setflags(write=False)
        self.__dict__["_codewords"] = words
        return words

    def minimum_distance(self, budget: int = DEFAULT_BUDGET) -> Fraction:
        """Relative minimum weight over nonzero codewords."""
        if self.dimension == 0:
            raise DomainError("the trivial code {0} has no minimum distance")
        words = self.codewords(budget)
        weights = np.count_nonzero(words, axis=1)
        return Fraction(int(weights[weights > 0].min()), self.length)

    def nearest_codeword(self, w, budget: int = DEFAULT_BUDGET) -> tuple[Word, Fraction]:
        """Closest codeword and its distance; ties go to the lexicographically smallest."""
        vals = self._values(w)
        words = self.codewords(budget)
        dists = np.count_nonzero(words != vals, axis=1)
        best = int(np.argmin(dists))
        n = max(self.length, 1)
        return Word(self.coords, tuple(int(x) for x in words[best]), self.p), Fraction(int(dists[best]), n)

    def distance_to(self, w, budget: int = DEFAULT_BUDGET) -> Fraction:
        return self.nearest_codeword(w, budget)[1]

    @cached_property
    def _position(self) -> dict[int, int]:
        return {c: i for i, c in enumerate(self.coords)}

    def reindex_checks(self, target_coords: Sequence[int]) -> np.ndarray:
        """Checks re-expressed as functionals on a superset of coordinates."""
        tpos = {c: i for i, c in enumerate(target_coords)}
        out = np.zeros((len(self._rref), len(target_coords)), dtype=np.int64)
        try:
            cols = [tpos[c] for c in self.coords]
        except KeyError as exc:
            raise StructuralError(f"coordinate {exc.args[0]} missing from target") from None
        out[:, cols] = self._rref
        return out


def code_from_checks(coords: Sequence[int], checks: Sequence[Word] | np.ndarray, p: int) -> LinearCode:
    """Build a code from checks given either as Words on ``coords`` or as a matrix."""
    coords = tuple(sorted(int(c) for c in coords))
    if len(checks) and isinstance(checks[0], Word):
        rows = []
        for chk in checks:
            if chk.coords != coords:
                raise StructuralError("check lives on different coordinates than the code")
            if chk.p != p:
                raise StructuralError(f"check modulus {chk.p} differs from {p}")
            rows.append(chk.values)
        checks = np.array(rows, dtype=np.int64)
    return LinearCode(coords, checks, p)


def contains(code: LinearCode, w: Word) -> bool:
    return code.contains(w)


def minimum_distance(code: LinearCode, budget: int = DEFAULT_BUDGET) -> Fraction:
    return code.minimum_distance(budget)


def nearest_codeword(code: LinearCode, w: Word, budget: int = DEFAULT_BUDGET) -> tuple[Word, Fraction]:
    return code.nearest_codeword(w, budget)
