"""Empirical sum-product measurements: exhaustive scans, random sampling,
annealing towards extremal sets, and log-log exponent fits.

Randomness comes from ``random.Random`` (MT19937) seeded with plain ints;
subsets are drawn by a partial Fisher-Yates shuffle of [1, p-1], so a given
seed produces the same sets on every platform.
"""

from __future__ import annotations

import csv
import io
import math
import random
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import combinations, islice

import numpy as np

from .fpcore import DomainError, Prime, mod_inverse

__all__ = [
    "ScanRecord",
    "ExponentFit",
    "BudgetExceeded",
    "objective_parts",
    "exhaustive_scan",
    "random_subset",
    "random_scan",
    "anneal_extremal",
    "fit_exponent",
    "records_csv",
    "DEFAULT_BUDGET",
]

DEFAULT_BUDGET = 5_000_000
EXPONENT = 12 / 11
CSV_FIELDS = ("p", "n", "s", "m", "objective", "normalized", "seed")
_BATCH = 4096


class BudgetExceeded(RuntimeError):
    def __init__(self, count: int, budget: int):
        super().__init__(f"{count} subsets exceeds the budget of {budget}")
        self.count = count
        self.budget = budget


@dataclass(frozen=True)
class ScanRecord:
    p: int
    n: int
    s: int  # |A+A| (or |A-A|)
    m: int  # |A.A| (or |A:A|)
    seed: int | None = None
    members: tuple[int, ...] | None = None

    @property
    def objective(self) -> int:
        return max(self.s, self.m)

    @property
    def normalized(self) -> float:
        return self.objective / self.n**EXPONENT

    def row(self) -> dict:
        return {
            "p": self.p,
            "n": self.n,
            "s": self.s,
            "m": self.m,
            "objective": self.objective,
            "normalized": f"{self.normalized:.6f}",
            "seed": "" if self.seed is None else self.seed,
        }


def _check_size(p: int, n: int) -> None:
    if n < 1:
        raise DomainError("n must be positive")
    if n * n > p:
        raise DomainError(f"n = {n} exceeds sqrt(p) for p = {p}")


def _distinct_rows(vals: np.ndarray) -> np.ndarray:
    s = np.sort(vals.reshape(vals.shape[0], -1), axis=1)
    return 1 + np.count_nonzero(np.diff(s, axis=1), axis=1)


def objective_parts(batch: np.ndarray, p: int, additive="sum", multiplicative="prod"):
    """(|A +- A|, |A .: A|) for each row A of ``batch`` (shape (B, n), entries in F_p^*)."""
    batch = np.asarray(batch, dtype=np.int64)
    a, b = batch[:, :, None], batch[:, None, :]
    if additive == "sum":
        s = _distinct_rows((a + b) % p)
    elif additive == "diff":
        s = _distinct_rows((a - b) % p)
    else:
        raise ValueError(f"unknown additive variant {additive!r}")
    if multiplicative == "prod":
        m = _distinct_rows((a * b) % p)
    elif multiplicative == "ratio":
        inv = np.vectorize(lambda x: mod_inverse(int(x), p), otypes=[np.int64])(batch)
        m = _distinct_rows((a * inv[:, None, :]) % p)
    else:
        raise ValueError(f"unknown multiplicative variant {multiplicative!r}")
    return s, m


def _scan_chunk(args):
    p, n, firsts, additive, multiplicative = args
    hist: Counter = Counter()
    best = None
    for first in firsts:
        it = ((first,) + rest for rest in combinations(range(first + 1, p), n - 1))
        while True:
            chunk = list(islice(it, _BATCH))
            if not chunk:
                break
            arr = np.array(chunk, dtype=np.int64)
            s, m = objective_parts(arr, p, additive, multiplicative)
            obj = np.maximum(s, m)
            hist.update(obj.tolist())
            i = int(np.argmin(obj))
            cand = (int(obj[i]), tuple(chunk[i]), int(s[i]), int(m[i]))
            if best is None or cand[:2] < best[:2]:
                best = cand
    return best, hist


def exhaustive_scan(
    p: int,
    n: int,
    budget: int = DEFAULT_BUDGET,
    additive: str = "sum",
    multiplicative: str = "prod",
    workers: int = 1,
) -> tuple[ScanRecord, dict[int, int]]:
    """Minimise max(|A+A|, |A.A|) over every n-subset of F_p^*.

    Returns the minimiser (lexicographically first on ties) and the
    histogram objective -> number of subsets.
    """
    p = Prime(p)
    _check_size(p, n)
    count = math.comb(p - 1, n)
    if count > budget:
        raise BudgetExceeded(count, budget)
    firsts = list(range(1, p - n + 1))
    if workers <= 1:
        parts = [_scan_chunk((p, n, firsts, additive, multiplicative))]
    else:
        jobs = [(p, n, firsts[k::workers], additive, multiplicative) for k in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_scan_chunk, jobs))
    hist: Counter = Counter()
    best = None
    for cand, h in parts:
        hist.update(h)
        if cand is not None and (best is None or cand[:2] < best[:2]):
            best = cand
    obj, members, s, m = best
    return ScanRecord(int(p), n, s, m, members=members), dict(sorted(hist.items()))


def random_subset(rng: random.Random, p: int, n: int) -> tuple[int, ...]:
    """n distinct elements of [1, p-1] by a partial Fisher-Yates shuffle."""
    size = p - 1
    swapped: dict[int, int] = {}
    out = []
    for i in range(n):
        j = rng.randrange(i, size)
        vi, vj = swapped.get(i, i + 1), swapped.get(j, j + 1)
        swapped[j] = vi
        out.append(vj)
    return tuple(sorted(out))


def _eval_sets(args):
    p, sets, additive, multiplicative = args
    if not sets:
        return [], []
    s, m = objective_parts(np.array(sets), p, additive, multiplicative)
    return s.tolist(), m.tolist()


def random_scan(
    p: int,
    n: int,
    samples: int,
    seed: int,
    additive: str = "sum",
    multiplicative: str = "prod",
    workers: int = 1,
    keep_sets: bool = False,
) -> list[ScanRecord]:
    p = Prime(p)
    _check_size(p, n)
    rng = random.Random(seed)
    sets = [random_subset(rng, p, n) for _ in range(samples)]
    chunks = [sets[i : i + _BATCH] for i in range(0, len(sets), _BATCH)]
    jobs = [(int(p), c, additive, multiplicative) for c in chunks]
    if workers <= 1 or len(jobs) <= 1:
        results = [_eval_sets(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_eval_sets, jobs))
    out = []
    for chunk, (s, m) in zip(chunks, results):
        for A, si, mi in zip(chunk, s, m):
            out.append(ScanRecord(int(p), n, si, mi, seed, A if keep_sets else None))
    return out


def anneal_extremal(
    p: int,
    n: int,
    steps: int = 10_000,
    seed: int = 0,
    t0: float | None = None,
    cooling: float = 0.995,
    additive: str = "sum",
    multiplicative: str = "prod",
    history: list | None = None,
    restarts: int = 1,
) -> ScanRecord:
    """Simulated annealing on n-subsets of F_p^* with single-element swaps.

    Temperature starts at ``t0`` (default n) and is multiplied by
    ``cooling`` after every step.  ``restarts`` independent chains run from
    one seeded stream, each from a fresh random start.  The best record seen
    is returned; if ``history`` is given, the best objective after each step
    is appended.
    """
    p = Prime(p)
    _check_size(p, n)
    rng = random.Random(seed)
    best = None
    for _ in range(max(1, restarts)):
        best = _anneal_chain(rng, p, n, steps, t0, cooling, additive, multiplicative, history, best)
    obj, members, (s, m) = best
    return ScanRecord(int(p), n, s, m, seed, members)


def _anneal_chain(rng, p, n, steps, t0, cooling, additive, multiplicative, history, best):
    temp = float(n if t0 is None else t0)
    current = list(random_subset(rng, p, n))

    def score(A):
        s, m = objective_parts(np.array([A]), p, additive, multiplicative)
        return int(s[0]), int(m[0])

    cur_sm = score(current)
    start = (max(cur_sm), tuple(sorted(current)), cur_sm)
    if best is None or start[:2] < best[:2]:
        best = start
    if n == p - 1:
        steps = 0
    for _ in range(steps):
        members = set(current)
        out_idx = rng.randrange(n)
        while True:
            new = rng.randrange(1, p)
            if new not in members:
                break
        cand = list(current)
        cand[out_idx] = new
        cand_sm = score(cand)
        delta = max(cand_sm) - max(cur_sm)
        if delta <= 0 or (temp > 0 and rng.random() < math.exp(-delta / temp)):
            current, cur_sm = cand, cand_sm
            key = (max(cur_sm), tuple(sorted(current)))
            if key < best[:2]:
                best = (*key, cur_sm)
        temp *= cooling
        if history is not None:
            history.append(best[0])
    return best


@dataclass(frozen=True)
class ExponentFit:
    pairs: tuple[tuple[float, float], ...]  # (log n, log min objective)
    slope: float
    intercept: float
    residual: float  # root-mean-square residual in log space

    def to_dict(self) -> dict:
        return {
            "pairs": [list(pr) for pr in self.pairs],
            "slope": self.slope,
            "intercept": self.intercept,
            "residual": self.residual,
        }


def fit_exponent(records) -> ExponentFit:
    """Least-squares slope of log(min objective) against log n.

    ``records`` holds ScanRecords or (n, objective) pairs; the minimum per
    size is used.
    """
    minima: dict[int, int] = {}
    for rec in records:
        n, obj = (rec.n, rec.objective) if isinstance(rec, ScanRecord) else rec
        minima[n] = min(obj, minima.get(n, obj))
    if len(minima) < 3:
        raise DomainError(f"need at least 3 distinct sizes, got {len(minima)}")
    ns = sorted(minima)
    x = np.log(np.array(ns, dtype=float))
    y = np.log(np.array([minima[k] for k in ns], dtype=float))
    design = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - (slope * x + intercept)
    return ExponentFit(
        tuple(zip(x.tolist(), y.tolist())),
        float(slope),
        float(intercept),
        float(np.sqrt(np.mean(resid**2))),
    )


def records_csv(records) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for rec in records:
        w.writerow(rec.row())
    return buf.getvalue()
