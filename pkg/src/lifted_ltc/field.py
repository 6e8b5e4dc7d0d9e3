"""Prime-field arithmetic and words indexed by finite coordinate sets.

A :class:`Word` is a total function from a sorted tuple of integer
coordinate identifiers to ``F_p``.  Every received word, codeword and local
function in the package is a ``Word``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError, StructuralError

MAX_MODULUS = 2**16


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    if p < 4:
        return True
    if p % 2 == 0:
        return False
    f = 3
    while f * f <= p:
        if p % f == 0:
            return False
        f += 2
    return True


def check_modulus(p: int) -> int:
    p = int(p)
    if not is_prime(p):
        raise DomainError(f"modulus {p} is not prime")
    if p > MAX_MODULUS:
        raise DomainError(f"modulus {p} exceeds {MAX_MODULUS}")
    return p


@dataclass(frozen=True)
class FieldElement:
    """An element of ``F_p``."""

    value: int
    p: int

    def __post_init__(self):
        check_modulus(self.p)
        if not 0 <= self.value < self.p:
            raise DomainError(f"value {self.value} not in [0, {self.p})")

    def _coerce(self, other) -> int:
        if isinstance(other, FieldElement):
            if other.p != self.p:
                raise StructuralError(f"moduli differ: {self.p} vs {other.p}")
            return other.value
        return int(other) % self.p

    def __add__(self, other):
        return FieldElement((self.value + self._coerce(other)) % self.p, self.p)

    __radd__ = __add__

    def __sub__(self, other):
        return FieldElement((self.value - self._coerce(other)) % self.p, self.p)

    def __rsub__(self, other):
        return FieldElement((self._coerce(other) - self.value) % self.p, self.p)

    def __mul__(self, other):
        return FieldElement((self.value * self._coerce(other)) % self.p, self.p)

    __rmul__ = __mul__

    def __neg__(self):
        return FieldElement((-self.value) % self.p, self.p)

    def __truediv__(self, other):
        if not isinstance(other, FieldElement):
            other = FieldElement(int(other) % self.p, self.p)
        return self * field_inverse(other)

    def __int__(self):
        return self.value


def field_inverse(a: FieldElement) -> FieldElement:
    """Multiplicative inverse; raises :class:`DomainError` on zero."""
    if a.value == 0:
        raise DomainError("zero has no multiplicative inverse")
    return FieldElement(pow(a.value, -1, a.p), a.p)


def inverse_mod(a: int, p: int) -> int:
    a %= p
    if a == 0:
        raise DomainError("zero has no multiplicative inverse")
    return pow(a, -1, p)


@dataclass(frozen=True)
class Word:
    """A function ``coords -> F_p``.

    ``coords`` is kept sorted so restriction and serialization are
    deterministic; ``values[i]`` is the value at ``coords[i]``.
    """

    coords: tuple[int, ...]
    values: tuple[int, ...]
    p: int

    def __post_init__(self):
        coords = tuple(int(c) for c in self.coords)
        values = tuple(int(v) for v in self.values)
        if len(coords) != len(values):
            raise StructuralError(f"{len(coords)} coordinates but {len(values)} values")
        if any(a >= b for a, b in zip(coords, coords[1:])):
            order = sorted(range(len(coords)), key=coords.__getitem__)
            coords = tuple(coords[i] for i in order)
            values = tuple(values[i] for i in order)
            if any(a == b for a, b in zip(coords, coords[1:])):
                raise StructuralError("duplicate coordinate identifiers")
        if any(not 0 <= v < self.p for v in values):
            raise DomainError(f"values must lie in [0, {self.p})")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_mapping(cls, mapping: Mapping[int, int], p: int) -> "Word":
        coords = sorted(mapping)
        return cls(tuple(coords), tuple(int(mapping[c]) % p for c in coords), p)

    @classmethod
    def from_array(cls, coords: Sequence[int], values, p: int) -> "Word":
        return cls(tuple(coords), tuple(int(v) % p for v in np.asarray(values).ravel()), p)

    @classmethod
    def zeros(cls, coords: Sequence[int], p: int) -> "Word":
        return cls(tuple(coords), (0,) * len(coords), p)

    def __len__(self) -> int:
        return len(self.coords)

    def __getitem__(self, coord: int) -> FieldElement:
        return FieldElement(self.values[self._index()[coord]], self.p)

    def _index(self) -> dict[int, int]:
        idx = self.__dict__.get("_idx")
        if idx is None:
            idx = {c: i for i, c in enumerate(self.coords)}
            object.__setattr__(self, "_idx", idx)
        return idx

    def positions(self, subset: Iterable[int]) -> np.ndarray:
        """Indices into ``values`` of the coordinates in ``subset``."""
        idx = self._index()
        try:
            return np.array([idx[c] for c in subset], dtype=np.intp)
        except KeyError as exc:
            raise StructuralError(f"coordinate {exc.args[0]} not in word") from None

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=np.int64)

    def as_dict(self) -> dict[int, int]:
        return dict(zip(self.coords, self.values))

    def restrict(self, subset: Iterable[int]) -> "Word":
        return word_restrict(self, subset)


def word_restrict(w: Word, subset: Iterable[int]) -> Word:
    """The restriction of ``w`` to ``subset``; raises if ``subset`` escapes ``w.coords``."""
    sub = sorted(set(int(c) for c in subset))
    pos = w.positions(sub)
    return Word(tuple(sub), tuple(w.values[i] for i in pos), w.p)


def word_distance(u: Word, v: Word) -> Fraction:
    """Relative Hamming distance, exact."""
    if u.coords != v.coords:
        raise StructuralError("words live on different coordinate sets")
    if u.p != v.p:
        raise StructuralError(f"moduli differ: {u.p} vs {v.p}")
    if not u.coords:
        return Fraction(0)
    diff = sum(a != b for a, b in zip(u.values, v.values))
    return Fraction(diff, len(u.coords))
