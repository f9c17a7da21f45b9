"""Constructive versions of the covering, Pluennecke-Ruzsa and focus lemmas.

The lemmas only assert existence with unspecified constants; here each one
is realised by an explicit (greedy or pigeonhole) construction that returns
the objects together with the constants it actually achieved.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import ceil, prod

import numpy as np

from .energy import DyadicGroup, PointSet
from .fpcore import DomainError, ElementSet, difference_set, sumset, translate

__all__ = [
    "CoverResult",
    "PRResult",
    "FocusConfig",
    "FocusResult",
    "FocusError",
    "greedy_cover",
    "exact_min_cover",
    "pr_refine",
    "pr_exact",
    "quadruple_refine",
    "QuadrupleRefinement",
    "focus_lemma",
    "focus_sums",
    "E_r_count",
    "size_floor",
]

EXACT_PR_LIMIT = 12


def size_floor(size: int, eps) -> int:
    """Smallest integer >= (1 - eps) * size."""
    return ceil((1 - Fraction(eps)) * size)


# --------------------------------------------------------------------------
# covering
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CoverResult:
    translates: tuple[int, ...]
    covered: ElementSet
    covered_fraction: Fraction
    bound_ratio: Fraction

    def union(self, X2: ElementSet) -> ElementSet:
        out = ElementSet.empty(X2.prime)
        for t in self.translates:
            out = out.union(translate(X2, t))
        return out


def greedy_cover(X1: ElementSet, X2: ElementSet, eps=Fraction(1, 100)) -> CoverResult:
    """Cover (1 - eps)|X1| points of X1 by translates X2 + t, greedily.

    Each step takes the shift hitting the most still-uncovered points of X1
    (smallest shift on ties).
    """
    X1._check(X2)
    if not len(X1) or not len(X2):
        raise DomainError("covering needs nonempty sets")
    eps = Fraction(eps)
    if not 0 <= eps < 1:
        raise DomainError("eps must lie in [0, 1)")
    p = X1.prime
    need = size_floor(len(X1), eps)
    remaining = X1.mask.copy()
    b = X2.elements
    shifts: list[int] = []
    covered = 0
    while covered < need:
        rem = np.flatnonzero(remaining)
        hits = np.bincount(((rem[:, None] - b[None, :]) % p).ravel(), minlength=p)
        t = int(np.argmax(hits))
        shifts.append(t)
        covered += int(hits[t])
        remaining[(b + t) % p] = False
    covered_set = ElementSet(p, X1.mask & ~remaining)
    denom = min(len(sumset(X1, X2)), len(difference_set(X1, X2)))
    return CoverResult(
        tuple(shifts),
        covered_set,
        Fraction(covered, len(X1)),
        Fraction(len(shifts) * len(X2), denom),
    )


def exact_min_cover(X1: ElementSet, X2: ElementSet, eps=Fraction(0)) -> int:
    """Fewest translates of X2 covering (1 - eps)|X1| points of X1 (BFS over bitmasks)."""
    X1._check(X2)
    n = len(X1)
    if n > 20:
        raise DomainError("exact cover oracle is limited to |X1| <= 20")
    need = size_floor(n, eps)
    if need == 0:
        return 0
    index = {int(x): i for i, x in enumerate(X1.elements)}
    masks = set()
    for t in np.unique((X1.elements[:, None] - X2.elements[None, :]) % X1.prime):
        m = 0
        for y in X2.elements:
            i = index.get(int((y + t) % X1.prime))
            if i is not None:
                m |= 1 << i
        masks.add(m)
    frontier = {0}
    seen = {0}
    for depth in range(1, n + 1):
        nxt = set()
        for state in frontier:
            for m in masks:
                s = state | m
                if s in seen:
                    continue
                if s.bit_count() >= need:
                    return depth
                seen.add(s)
                nxt.add(s)
        frontier = nxt
    raise AssertionError("unreachable: every point of X1 has a covering translate")


# --------------------------------------------------------------------------
# Pluennecke-Ruzsa refinement
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PRResult:
    Y_prime: ElementSet
    constant: Fraction
    sum_size: int  # |Y' + X_1 + ... + X_k|


def _iterated_sum(sets: list[ElementSet]) -> ElementSet:
    acc = sets[0]
    for S in sets[1:]:
        acc = sumset(acc, S)
    return acc


def _sum_size(z: np.ndarray, s: np.ndarray, p: int) -> int:
    mask = np.zeros(p, dtype=bool)
    mask[((z[:, None] + s[None, :]) % p).ravel()] = True
    return int(mask.sum())


def _pr_constant(Y: ElementSet, X_list: list[ElementSet], sum_size: int) -> Fraction:
    k = len(X_list)
    denom = prod(len(sumset(Y, X)) for X in X_list)
    return Fraction(sum_size * len(Y) ** (k - 1), denom)


def _min_ratio_subset(z: list[int], s: np.ndarray, p: int) -> list[int]:
    """Greedy single-element descent on |Z + S| / |Z|; returns the best Z seen."""
    current = list(z)
    best = list(current)
    best_ratio = Fraction(_sum_size(np.array(current), s, p), len(current))
    while len(current) > 1:
        step = None
        for e in current:
            trial = [x for x in current if x != e]
            ratio = Fraction(_sum_size(np.array(trial), s, p), len(trial))
            if step is None or ratio < step[0]:
                step = (ratio, trial)
        current = step[1]
        if step[0] < best_ratio:
            best_ratio, best = step[0], list(current)
    return best


def _polish(chosen: list[int], pool: list[int], floor: int, s: np.ndarray, p: int) -> list[int]:
    """Trim ``chosen`` to ``floor`` elements, then swap single elements while |Z + S| drops."""
    size = lambda z: _sum_size(np.array(z, dtype=np.int64), s, p)
    while len(chosen) > floor:
        chosen = min(([x for x in chosen if x != e] for e in chosen), key=size)
    current = size(chosen)
    improved = True
    while improved:
        improved = False
        outside = [y for y in pool if y not in set(chosen)]
        for i in range(len(chosen)):
            for y in outside:
                trial = chosen[:i] + [y] + chosen[i + 1 :]
                t = size(trial)
                if t < current:
                    chosen, current, improved = sorted(trial), t, True
                    break
            if improved:
                break
    return chosen


def pr_refine(Y: ElementSet, X_list: list[ElementSet], eps=Fraction(1, 10)) -> PRResult:
    """Large Y' in Y with |Y' + X_1 + ... + X_k| small.

    Repeatedly extracts a subset of the not-yet-chosen part of Y with the
    smallest expansion ratio |Z + X_1 + ... + X_k| / |Z| (found by greedy
    element removal) until Y' reaches (1 - eps)|Y| elements, then trims the
    overshoot and runs a one-swap local search on |Y' + X_1 + ... + X_k|.  Signed forms
    such as Y' - X are handled by passing the negated set.
    """
    if not X_list:
        raise DomainError("need at least one summand")
    for X in X_list:
        Y._check(X)
        if not len(X):
            raise DomainError("summands must be nonempty")
    if not len(Y):
        raise DomainError("Y must be nonempty")
    p = Y.prime
    s = _iterated_sum(X_list).elements
    floor = size_floor(len(Y), eps)
    remaining = Y.tolist()
    chosen: list[int] = []
    while len(chosen) < floor:
        Z = _min_ratio_subset(remaining, s, p)
        chosen += Z
        remaining = [x for x in remaining if x not in set(Z)]
    chosen = _polish(sorted(chosen), Y.tolist(), floor, s, p)
    Yp = ElementSet.from_iterable(p, chosen)
    size = _sum_size(Yp.elements, s, p)
    return PRResult(Yp, _pr_constant(Y, X_list, size), size)


def pr_exact(Y: ElementSet, X_list: list[ElementSet], eps=Fraction(1, 10)) -> PRResult:
    """Optimal Y' by enumeration (|Y| <= 12); ties go to the lexicographically first subset.

    |Y' + S| is monotone in Y', so the optimum sits at the size floor.
    """
    if len(Y) > EXACT_PR_LIMIT:
        raise DomainError(f"exact enumeration is limited to |Y| <= {EXACT_PR_LIMIT}")
    p = Y.prime
    s = _iterated_sum(X_list).elements
    floor = size_floor(len(Y), eps)
    best = None
    for sub in combinations(Y.tolist(), floor):
        size = _sum_size(np.array(sub, dtype=np.int64), s, p) if sub else 0
        if best is None or size < best[0]:
            best = (size, sub)
    Yp = ElementSet.from_iterable(p, best[1])
    return PRResult(Yp, _pr_constant(Y, X_list, best[0]), best[0])


@dataclass(frozen=True)
class QuadrupleRefinement:
    A_prime: ElementSet
    pr: PRResult
    constant: Fraction  # |A' + A + A + A| / (K^3 |A|)


def quadruple_refine(A: ElementSet, K, eps=Fraction(1, 10)) -> QuadrupleRefinement:
    """A' in A with |A'| >= (1 - eps)|A| and |A' + A + A + A| <= C K^3 |A|."""
    K = Fraction(K)
    if len(sumset(A, A)) > K * len(A):
        raise DomainError("precondition |A+A| <= K|A| fails")
    res = pr_refine(A, [A, A, A], eps)
    return QuadrupleRefinement(res.Y_prime, res, Fraction(res.sum_size) / (K**3 * len(A)))


# --------------------------------------------------------------------------
# focus lemma
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FocusConfig:
    row: Fraction = Fraction(1, 2)
    column: Fraction = Fraction(1, 2)
    line: Fraction = Fraction(1, 4)
    floor: Fraction = Fraction(1, 2)
    max_rounds: int = 10

    def scaled(self, factor) -> "FocusConfig":
        f = Fraction(factor)
        return FocusConfig(self.row * f, self.column * f, self.line * f, self.floor * f, self.max_rounds)

    def to_dict(self) -> dict:
        return {
            "row": str(self.row),
            "column": str(self.column),
            "line": str(self.line),
            "floor": str(self.floor),
            "max_rounds": self.max_rounds,
        }


class FocusError(RuntimeError):
    """No nonempty B~ at the configured popularity constants."""

    def __init__(self, message: str, best: dict):
        super().__init__(f"{message}; best achieved: {best}")
        self.best = best


@dataclass(frozen=True)
class FocusResult:
    x_tilde: int
    y_tilde: int
    B: ElementSet  # A_{x~}, ordinates over x~
    C: ElementSet  # A_{y~}, abscissae under y~
    B_tilde: ElementSet
    intersections: dict[int, ElementSet] = field(repr=False)
    c1: Fraction = Fraction(0)
    c2: Fraction = Fraction(0)
    c3: Fraction = Fraction(0)
    sigma: int = 0
    sigma_pair: int = 0
    c_sigma: Fraction = Fraction(0)
    refined: PointSet | None = field(default=None, repr=False)
    rounds: int = 0
    config: FocusConfig = FocusConfig()


def _slope(x: int, y: int, p: int) -> int:
    return y * pow(x, -1, p) % p


def _refine_points(P: PointSet, base: Fraction, N: Fraction, cfg: FocusConfig):
    p = P.prime
    pts = list(P.points)
    rounds = 0
    while rounds < cfg.max_rounds:
        rounds += 1
        before = len(pts)
        rows: dict[int, int] = {}
        for _, y in pts:
            rows[y] = rows.get(y, 0) + 1
        pts = [pt for pt in pts if rows[pt[1]] >= cfg.row * base]
        cols: dict[int, int] = {}
        for x, _ in pts:
            cols[x] = cols.get(x, 0) + 1
        pts = [pt for pt in pts if cols[pt[0]] >= cfg.column * base]
        lines: dict[int, int] = {}
        for x, y in pts:
            xi = _slope(x, y, p)
            lines[xi] = lines.get(xi, 0) + 1
        pts = [pt for pt in pts if lines[_slope(*pt, p)] >= cfg.line * N]
        if len(pts) == before:
            break
    return PointSet(p, tuple(sorted(pts))), rounds


def focus_sums(P: PointSet):
    """Matrix of sum_{z in A_x} |A_{z/x} cap A_y| over abscissae x and ordinates y of P.

    Returns (xs, ys, S) with S[i, k] the sum for (xs[i], ys[k]).
    """
    p = P.prime
    xs = sorted({x for x, _ in P.points})
    ys = sorted({y for _, y in P.points})
    xi_ = {x: i for i, x in enumerate(xs)}
    yi_ = {y: k for k, y in enumerate(ys)}
    inc = np.zeros((len(xs), len(ys)), dtype=np.int64)
    line_abs: dict[int, np.ndarray] = {}
    for x, y in P.points:
        inc[xi_[x], yi_[y]] = 1
        xi = _slope(x, y, p)
        vec = line_abs.setdefault(xi, np.zeros(len(xs), dtype=np.int64))
        vec[xi_[x]] = 1
    # W[x, u] = #{z in A_x : u is an abscissa on the line through (x, z)}
    W = np.zeros((len(xs), len(xs)), dtype=np.int64)
    for x, z in P.points:
        W[xi_[x]] += line_abs[_slope(x, z, p)]
    return xs, ys, W @ inc


def focus_lemma(
    group: DyadicGroup, P: PointSet, A_size: int, config: FocusConfig = FocusConfig()
) -> FocusResult:
    """Popular abscissa x~, popular ordinate y~ and B~ in A_{x~} per the pigeonhole argument.

    The typical line population N is taken as |P| / L.
    """
    if not len(P):
        raise DomainError("empty point set")
    p = P.prime
    L, M = group.L, group.M
    N = Fraction(len(P), L)
    base = Fraction(len(P), A_size)  # L N / |A|
    Pr, rounds = _refine_points(P, base, N, config)
    if not len(Pr):
        raise FocusError("refinement removed every point", {"rounds": rounds})
    xs, ys, S = focus_sums(Pr)
    flat = int(np.argmax(S))
    i, k = divmod(flat, S.shape[1])
    x_t, y_t = xs[i], ys[k]

    by_x: dict[int, list[int]] = {}
    by_y: dict[int, list[int]] = {}
    on_line: dict[int, list[int]] = {}
    for x, y in Pr.points:
        by_x.setdefault(x, []).append(y)
        by_y.setdefault(y, []).append(x)
        on_line.setdefault(_slope(x, y, p), []).append(x)
    B = ElementSet.from_iterable(p, by_x[x_t])
    C = ElementSet.from_iterable(p, by_y[y_t])
    inter = {}
    for z in B:
        inter[z] = ElementSet.from_iterable(p, on_line[_slope(x_t, z, p)]).intersection(C)
    lmn = L * M * N
    threshold = config.floor * lmn / A_size**4
    keep = {z: I for z, I in inter.items() if len(I) and len(I) >= threshold}
    c3 = Fraction(min(len(B), len(C)) * A_size) / (L * N)
    sigma = int(S.sum())
    c_sigma = Fraction(sigma * A_size) / lmn
    if not keep:
        best = max(len(I) for I in inter.values())
        raise FocusError(
            "no z meets the intersection floor",
            {"c2": Fraction(best * A_size**4) / lmn, "c3": c3, "c_sigma": c_sigma},
        )
    B_tilde = ElementSet.from_iterable(p, keep)
    return FocusResult(
        x_tilde=x_t,
        y_tilde=y_t,
        B=B,
        C=C,
        B_tilde=B_tilde,
        intersections=keep,
        c1=Fraction(len(B_tilde) * A_size**3, L * M),
        c2=Fraction(min(len(I) for I in keep.values()) * A_size**4) / lmn,
        c3=c3,
        sigma=sigma,
        sigma_pair=int(S[i, k]),
        c_sigma=c_sigma,
        refined=Pr,
        rounds=rounds,
        config=config,
    )


# --------------------------------------------------------------------------
# E_r
# --------------------------------------------------------------------------


def E_r_count(C: ElementSet, r: int) -> int:
    """Number of (a1, a2, a3, a4) in C^4 with a1 + r a2 = a3 + r a4."""
    r %= C.prime
    if r == 0:
        raise DomainError("r must be nonzero")
    a = C.elements
    vals = ((a[:, None] + r * a[None, :]) % C.prime).ravel()
    counts = np.bincount(vals, minlength=C.prime)
    return int(np.dot(counts, counts))
