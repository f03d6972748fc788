"""Exact arithmetic for pair-indexed distance vectors under max-plus operations.

All distances and scalars are arbitrary-precision rationals
(:class:`fractions.Fraction`).  Every comparison in this module is exact;
there is no tolerance anywhere.  Floating point inputs are converted to
their exact binary value at the boundary; decimal strings such as ``"0.1"``
are converted to the exact decimal value.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from functools import lru_cache
from math import lcm
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

ExactScalar = Fraction
ScalarLike = Union[Fraction, int, str, float]

# int64 headroom for the vectorized condition checks
_INT64_SAFE = 2**62


class DimensionMismatch(ValueError):
    """Two vectors with different leaf counts were combined."""


def as_scalar(value: ScalarLike) -> Fraction:
    """Coerce a number or string to an exact rational."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not scalars")
    if isinstance(value, (int, str, float)):
        return Fraction(value)
    raise TypeError(f"cannot convert {value!r} to an exact scalar")


def pair_count(n: int) -> int:
    return n * (n - 1) // 2


@lru_cache(maxsize=None)
def pair_list(n: int) -> Tuple[Tuple[int, int], ...]:
    """All leaf pairs (i, j), 1 <= i < j <= n, in lexicographic order."""
    return tuple(itertools.combinations(range(1, n + 1), 2))


def pair_index(n: int, i: int, j: int) -> int:
    """Linear position of the pair (i, j) in lexicographic order."""
    if not (1 <= i < j <= n):
        raise ValueError(f"pair ({i}, {j}) out of range for n={n}")
    return (i - 1) * (2 * n - i) // 2 + (j - i - 1)


class UltraVector:
    """A point of R^(n choose 2): a candidate or certified ultrametric.

    Entries are indexed by leaf pairs in lexicographic order
    (1,2), (1,3), ..., (n-1,n).
    """

    __slots__ = ("n", "entries")

    def __init__(self, n: int, entries: Iterable[ScalarLike]):
        if n < 2:
            raise ValueError("need at least 2 leaves")
        ent = tuple(as_scalar(e) for e in entries)
        if len(ent) != pair_count(n):
            raise DimensionMismatch(
                f"expected {pair_count(n)} entries for n={n}, got {len(ent)}"
            )
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "entries", ent)

    def __setattr__(self, name, value):
        raise AttributeError("UltraVector is immutable")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, key) -> Fraction:
        if isinstance(key, tuple):
            i, j = key
            if i > j:
                i, j = j, i
            return self.entries[pair_index(self.n, i, j)]
        return self.entries[key]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, UltraVector)
            and self.n == other.n
            and self.entries == other.entries
        )

    def __hash__(self) -> int:
        return hash((self.n, self.entries))

    def __repr__(self) -> str:
        return f"UltraVector(n={self.n}, entries={list(map(str, self.entries))})"

    def min_entry(self) -> Fraction:
        return min(self.entries)


class ProjectivePoint:
    """An ultrametric modulo the all-ones direction, in canonical form.

    The canonical representative has minimum entry 0.
    """

    __slots__ = ("rep",)

    def __init__(self, u: UltraVector):
        m = u.min_entry()
        if m == 0:
            rep = u
        else:
            rep = UltraVector(u.n, (e - m for e in u.entries))
        object.__setattr__(self, "rep", rep)

    def __setattr__(self, name, value):
        raise AttributeError("ProjectivePoint is immutable")

    def __eq__(self, other) -> bool:
        return isinstance(other, ProjectivePoint) and self.rep == other.rep

    def __hash__(self) -> int:
        return hash(("proj", self.rep))

    def __repr__(self) -> str:
        return f"ProjectivePoint({self.rep!r})"


# ---------------------------------------------------------------------------
# max-plus operations


def trop_add(u: UltraVector, v: UltraVector) -> UltraVector:
    """Entrywise maximum of two vectors."""
    if u.n != v.n:
        raise DimensionMismatch(f"n={u.n} vs n={v.n}")
    return UltraVector(u.n, (max(a, b) for a, b in zip(u.entries, v.entries)))


def trop_scale(lam: ScalarLike, v: UltraVector) -> UltraVector:
    """Add the scalar to every entry (tropical scalar multiplication)."""
    c = as_scalar(lam)
    return UltraVector(v.n, (c + e for e in v.entries))


def normalize_projective(u: UltraVector) -> ProjectivePoint:
    return ProjectivePoint(u)


def projective_equal(u: UltraVector, v: UltraVector) -> bool:
    """True iff u - v is a constant vector."""
    if u.n != v.n:
        raise DimensionMismatch(f"n={u.n} vs n={v.n}")
    d = u.entries[0] - v.entries[0]
    return all(a - b == d for a, b in zip(u.entries, v.entries))


# ---------------------------------------------------------------------------
# integer grids
#
# A vector of rationals is mapped onto a common integer grid so the hot
# loops (condition checks, segment computation) can run on machine or
# Python ints.  The scale factor is the lcm of all denominators, so the
# representation is exact.


def integerize(*vectors: UltraVector) -> Tuple[int, list]:
    """Return (scale, [int entry lists]) with entry = rational * scale."""
    scale = 1
    for v in vectors:
        for e in v.entries:
            scale = lcm(scale, e.denominator)
    out = []
    for v in vectors:
        out.append([int(e * scale) for e in v.entries])
    return scale, out


# ---------------------------------------------------------------------------
# three- and four-point conditions


@lru_cache(maxsize=None)
def _triple_arrays(n: int):
    triples = tuple(itertools.combinations(range(1, n + 1), 3))
    ij = np.fromiter((pair_index(n, i, j) for i, j, k in triples), dtype=np.int64)
    ik = np.fromiter((pair_index(n, i, k) for i, j, k in triples), dtype=np.int64)
    jk = np.fromiter((pair_index(n, j, k) for i, j, k in triples), dtype=np.int64)
    return triples, ij, ik, jk


@lru_cache(maxsize=None)
def _quadruple_arrays(n: int):
    quads = tuple(itertools.combinations(range(1, n + 1), 4))
    cols = []
    for pos in ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)):
        cols.append(
            np.fromiter(
                (pair_index(n, q[pos[0]], q[pos[1]]) for q in quads), dtype=np.int64
            )
        )
    return quads, cols


def first_three_point_violation(
    u: UltraVector,
) -> Optional[Tuple[int, int, int]]:
    """First triple (i, j, k) whose maximum is achieved only once, if any."""
    if u.n < 3:
        raise ValueError("three-point condition needs n >= 3")
    scale, (vals,) = integerize(u)
    return _three_point_violation_ints(vals, u.n)


def _three_point_violation_ints(
    vals: Sequence[int], n: int
) -> Optional[Tuple[int, int, int]]:
    triples, ij, ik, jk = _triple_arrays(n)
    if max(abs(x) for x in vals) < _INT64_SAFE:
        arr = np.asarray(vals, dtype=np.int64)
        a, b, c = arr[ij], arr[ik], arr[jk]
        hi = np.maximum(a, np.maximum(b, c))
        hits = (a == hi).astype(np.int8) + (b == hi) + (c == hi)
        bad = hits < 2
        if not bad.any():
            return None
        return triples[int(np.argmax(bad))]
    for t, ka, kb, kc in zip(triples, ij, ik, jk):
        a, b, c = vals[ka], vals[kb], vals[kc]
        hi = max(a, b, c)
        if (a == hi) + (b == hi) + (c == hi) < 2:
            return t
    return None


def three_point_check(u: UltraVector) -> bool:
    """True iff every triple's maximum is attained at least twice (exactly)."""
    return first_three_point_violation(u) is None


def first_four_point_violation(
    u: UltraVector,
) -> Optional[Tuple[int, int, int, int]]:
    """First 4-subset whose pair-sum maximum is achieved only once, if any."""
    if u.n < 4:
        raise ValueError("four-point condition needs n >= 4")
    scale, (vals,) = integerize(u)
    quads, cols = _quadruple_arrays(u.n)
    if max(abs(x) for x in vals) < _INT64_SAFE // 2:
        arr = np.asarray(vals, dtype=np.int64)
        s1 = arr[cols[0]] + arr[cols[5]]  # ij + kl
        s2 = arr[cols[1]] + arr[cols[4]]  # ik + jl
        s3 = arr[cols[2]] + arr[cols[3]]  # il + jk
        hi = np.maximum(s1, np.maximum(s2, s3))
        hits = (s1 == hi).astype(np.int8) + (s2 == hi) + (s3 == hi)
        bad = hits < 2
        if not bad.any():
            return None
        return quads[int(np.argmax(bad))]
    for idx, q in enumerate(quads):
        s1 = vals[cols[0][idx]] + vals[cols[5][idx]]
        s2 = vals[cols[1][idx]] + vals[cols[4][idx]]
        s3 = vals[cols[2][idx]] + vals[cols[3][idx]]
        hi = max(s1, s2, s3)
        if (s1 == hi) + (s2 == hi) + (s3 == hi) < 2:
            return q
    return None


def four_point_check(u: UltraVector) -> bool:
    return first_four_point_violation(u) is None


# ---------------------------------------------------------------------------
# text format: first line n, then C(n,2) rationals in lexicographic pair order


def parse_vector(text: str) -> UltraVector:
    tokens = text.split()
    if not tokens:
        raise ValueError("empty vector file")
    try:
        n = int(tokens[0])
    except ValueError as exc:
        raise ValueError(f"first token must be the leaf count, got {tokens[0]!r}") from exc
    body = tokens[1:]
    if len(body) != pair_count(n):
        raise ValueError(
            f"expected {pair_count(n)} entries for n={n}, got {len(body)}"
        )
    try:
        entries = [Fraction(tok) for tok in body]
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"bad rational in vector file: {exc}") from exc
    return UltraVector(n, entries)


def format_vector(u: UltraVector) -> str:
    return f"{u.n}\n" + " ".join(str(e) for e in u.entries) + "\n"
