"""Multiplicative energy and the line geometry of A x A.

Every point (x, y) of A x A (0 not in A) lies on exactly one line through
the origin, identified by its slope y/x.  The per-slope populations n(xi)
carry the multiplicative energy, and their dyadic grouping picks out the
"popular" family of lines used downstream.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil, log2

import numpy as np

from .fpcore import DomainError, ElementSet, _inverses

__all__ = [
    "LineIncidence",
    "DyadicGroup",
    "PointSet",
    "mult_energy",
    "line_statistics",
    "dyadic_decompose",
    "select_popular_group",
    "popular_lines_mode",
    "point_set",
    "fibers",
    "log_bound",
    "stats_csv",
    "stats_summary",
]


def _require_nonzero(A: ElementSet) -> None:
    if 0 in A:
        raise DomainError("0 lies in A; slopes through the origin are undefined")
    if len(A) == 0:
        raise DomainError("A is empty")


def mult_energy(A: ElementSet) -> int:
    """Number of quadruples in A^4 with a1*a2 = a3*a4."""
    _require_nonzero(A)
    a = A.elements
    prods = ((a[:, None] * a[None, :]) % A.prime).ravel()
    counts = np.bincount(prods, minlength=A.prime)
    return int(np.dot(counts, counts))


@dataclass(frozen=True)
class LineIncidence:
    A: ElementSet
    counts: dict[int, int]
    abscissae: dict[int, ElementSet] = field(repr=False)

    @property
    def total_points(self) -> int:
        return sum(self.counts.values())

    @property
    def slopes(self) -> list[int]:
        return sorted(self.counts)

    def energy(self) -> int:
        return sum(n * n for n in self.counts.values())


def line_statistics(A: ElementSet) -> LineIncidence:
    _require_nonzero(A)
    p = A.prime
    a = A.elements
    # slopes[i, k] = a_k / a_i, the line through (a_i, a_k)
    slopes = (_inverses(a, p)[:, None] * a[None, :]) % p
    xs = np.repeat(a, a.size)
    flat = slopes.ravel()
    order = np.argsort(flat, kind="stable")
    flat, xs = flat[order], xs[order]
    uniq, starts, counts = np.unique(flat, return_index=True, return_counts=True)
    count_map: dict[int, int] = {}
    fiber_map: dict[int, ElementSet] = {}
    for xi, s, n in zip(uniq.tolist(), starts.tolist(), counts.tolist()):
        count_map[xi] = n
        fiber_map[xi] = ElementSet.from_array(p, xs[s : s + n])
    return LineIncidence(A, count_map, fiber_map)


@dataclass(frozen=True)
class DyadicGroup:
    """Slopes with N_lo <= n(xi) < N_hi.

    ``j >= 1`` is a dyadic class (N_lo = 2^(j-1), N_hi = 2^j).  ``j == 0``
    marks a popular-lines family built from a ratio-set hypothesis, where
    [N_lo, N_hi) is simply the observed population range.
    """

    j: int
    slopes: tuple[int, ...]
    populations: tuple[int, ...]
    N_lo: int
    N_hi: int

    @property
    def L(self) -> int:
        return len(self.slopes)

    @property
    def M(self) -> int:
        return sum(n * n for n in self.populations)

    @property
    def points(self) -> int:
        return sum(self.populations)

    @property
    def N_avg(self) -> Fraction:
        return Fraction(self.points, self.L)

    def population(self, xi: int) -> int:
        return self.populations[self.slopes.index(xi)]

    def to_dict(self) -> dict:
        return {"j": self.j, "L": self.L, "N_lo": self.N_lo, "N_hi": self.N_hi, "M": self.M}


def dyadic_decompose(stats: LineIncidence) -> list[DyadicGroup]:
    if not stats.counts:
        raise DomainError("empty line statistics")
    buckets: dict[int, list[int]] = {}
    for xi in stats.slopes:
        buckets.setdefault(stats.counts[xi].bit_length(), []).append(xi)
    groups = []
    for j in sorted(buckets):
        slopes = tuple(buckets[j])
        groups.append(
            DyadicGroup(j, slopes, tuple(stats.counts[x] for x in slopes), 1 << (j - 1), 1 << j)
        )
    return groups


def log_bound(size: int) -> int:
    """1 + ceil(log2 |A|): the number of dyadic classes that can occur."""
    return 1 + ceil(log2(size)) if size > 1 else 1


def select_popular_group(groups: list[DyadicGroup]) -> DyadicGroup:
    """Group carrying the most energy; ties go to the smaller j."""
    if not groups:
        raise DomainError("no dyadic groups")
    return min(groups, key=lambda g: (-g.M, g.j))


@dataclass(frozen=True)
class PointSet:
    """Points of A x A lying on a chosen family of lines."""

    prime: int
    points: tuple[tuple[int, int], ...]

    def __len__(self) -> int:
        return len(self.points)

    def __contains__(self, pt) -> bool:
        return tuple(pt) in self._lookup

    @property
    def _lookup(self) -> frozenset:
        cached = self.__dict__.get("_lookup_cache")
        if cached is None:
            cached = frozenset(self.points)
            object.__setattr__(self, "_lookup_cache", cached)
        return cached

    def slope_fibers(self) -> dict[int, ElementSet]:
        """Abscissae A_xi of the points on each line."""
        p = self.prime
        out: dict[int, list[int]] = {}
        for x, y in self.points:
            out.setdefault(y * pow(x, -1, p) % p, []).append(x)
        return {xi: ElementSet.from_iterable(p, xs) for xi, xs in sorted(out.items())}


def point_set(stats: LineIncidence, slopes) -> PointSet:
    p = stats.A.prime
    pts = []
    for xi in slopes:
        for x in stats.abscissae[xi]:
            pts.append((x, xi * x % p))
    return PointSet(p, tuple(sorted(pts)))


def fibers(P: PointSet) -> tuple[dict[int, ElementSet], dict[int, ElementSet]]:
    """(A_x, A_y): ordinates over each abscissa x, abscissae over each ordinate y."""
    p = P.prime
    by_x: dict[int, list[int]] = {}
    by_y: dict[int, list[int]] = {}
    for x, y in P.points:
        by_x.setdefault(x, []).append(y)
        by_y.setdefault(y, []).append(x)
    return (
        {x: ElementSet.from_iterable(p, ys) for x, ys in sorted(by_x.items())},
        {y: ElementSet.from_iterable(p, xs) for y, xs in sorted(by_y.items())},
    )


def popular_lines_mode(A: ElementSet, K) -> tuple[DyadicGroup | None, PointSet]:
    """Lines carrying at least |A|/K points, for a hypothesis on |A:A|.

    Returns the family packaged as a ``j == 0`` group (None when empty) and
    its point set.
    """
    K = Fraction(K)
    if K < 1:
        raise DomainError("K must be >= 1")
    stats = line_statistics(A)
    size = len(A)
    keep = tuple(xi for xi in stats.slopes if stats.counts[xi] * K >= size)
    if not keep:
        return None, PointSet(A.prime, ())
    pops = tuple(stats.counts[x] for x in keep)
    group = DyadicGroup(0, keep, pops, min(pops), max(pops) + 1)
    return group, point_set(stats, keep)


def stats_csv(stats: LineIncidence) -> str:
    lines = ["slope,count"]
    lines += [f"{xi},{stats.counts[xi]}" for xi in stats.slopes]
    return "\n".join(lines) + "\n"


def stats_summary(stats: LineIncidence) -> dict:
    return {
        "E": stats.energy(),
        "groups": [{"j": g.j, "L": g.L, "M": g.M} for g in dyadic_decompose(stats)],
    }


def stats_json(stats: LineIncidence) -> str:
    return json.dumps(stats_summary(stats), sort_keys=True)
