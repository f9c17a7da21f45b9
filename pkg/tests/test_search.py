import math
import random
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sumproduct import DomainError
from sumproduct.search import (
    BudgetExceeded,
    ScanRecord,
    anneal_extremal,
    exhaustive_scan,
    fit_exponent,
    objective_parts,
    random_scan,
    random_subset,
    records_csv,
)


def brute_parts(A, p, additive, multiplicative):
    if additive == "sum":
        s = {(a + b) % p for a in A for b in A}
    else:
        s = {(a - b) % p for a in A for b in A}
    if multiplicative == "prod":
        m = {a * b % p for a in A for b in A}
    else:
        m = {a * pow(b, p - 2, p) % p for a in A for b in A}
    return len(s), len(m)


@given(
    st.sampled_from([31, 101]),
    st.data(),
    st.sampled_from(["sum", "diff"]),
    st.sampled_from(["prod", "ratio"]),
)
def test_objective_parts_oracle(p, data, add, mul):
    rows = [tuple(data.draw(st.sets(st.integers(1, p - 1), min_size=4, max_size=4))) for _ in range(3)]
    s, m = objective_parts(np.array(rows), p, add, mul)
    for A, si, mi in zip(rows, s, m):
        assert (si, mi) == brute_parts(A, p, add, mul)


def test_exhaustive_matches_enumeration():
    p, n = 11, 3
    rec, hist = exhaustive_scan(p, n)
    best = min(
        (max(brute_parts(A, p, "sum", "prod")), A) for A in combinations(range(1, p), n)
    )
    assert (rec.objective, rec.members) == best
    assert sum(hist.values()) == math.comb(p - 1, n)
    assert min(hist) == rec.objective


def test_exhaustive_variants_and_workers():
    a, _ = exhaustive_scan(13, 3, additive="diff", multiplicative="ratio")
    b, _ = exhaustive_scan(13, 3, additive="diff", multiplicative="ratio", workers=2)
    assert a == b


def test_budget_refusal():
    with pytest.raises(BudgetExceeded) as info:
        exhaustive_scan(101, 10, budget=1000)
    assert info.value.count == math.comb(100, 10)
    with pytest.raises(DomainError):
        exhaustive_scan(11, 4)  # 16 > 11


@given(st.integers(0, 2**32), st.sampled_from([11, 101, 10007]), st.integers(1, 3))
def test_random_subset(seed, p, n):
    A = random_subset(random.Random(seed), p, n)
    assert len(set(A)) == n and list(A) == sorted(A)
    assert all(1 <= a < p for a in A)
    assert A == random_subset(random.Random(seed), p, n)


def test_random_subset_is_uniformish():
    rng = random.Random(1)
    counts = np.zeros(11, dtype=int)
    for _ in range(4000):
        for a in random_subset(rng, 11, 3):
            counts[a] += 1
    expected = 4000 * 3 / 10
    assert np.all(np.abs(counts[1:] - expected) < 0.1 * expected)


def test_random_scan_reproducible_and_floor():
    a = random_scan(1009, 12, 200, seed=4, keep_sets=True)
    b = random_scan(1009, 12, 200, seed=4, keep_sets=True, workers=2)
    assert a == b
    assert all(r.objective >= 2 * 12 - 1 for r in a)
    assert random_scan(1009, 12, 0, seed=4) == []


def test_anneal_initial_and_history():
    rec = anneal_extremal(19, 4, steps=0, seed=3)
    start = random_subset(random.Random(3), 19, 4)
    assert rec.members == start
    hist = []
    rec = anneal_extremal(19, 4, steps=300, seed=3, history=hist)
    assert len(hist) == 300
    assert all(x >= y for x, y in zip(hist, hist[1:]))
    assert hist[-1] == rec.objective
    assert (rec.s, rec.m) == brute_parts(rec.members, 19, "sum", "prod")


def test_fit_exponent():
    fit = fit_exponent([(n, 3 * n**2) for n in (4, 8, 16, 32)])
    assert fit.slope == pytest.approx(2.0)
    assert fit.intercept == pytest.approx(math.log(3))
    assert fit.residual == pytest.approx(0, abs=1e-12)
    recs = [ScanRecord(101, n, obj, 1) for n, obj in ((3, 9), (3, 5), (5, 25), (7, 49))]
    assert fit_exponent(recs).pairs[0][1] == pytest.approx(math.log(5))
    with pytest.raises(DomainError):
        fit_exponent([(3, 5), (4, 7)])


def test_records_csv():
    text = records_csv([ScanRecord(19, 4, 7, 6, members=(1, 3, 16, 18))])
    lines = text.splitlines()
    assert lines[0] == "p,n,s,m,objective,normalized,seed"
    assert lines[1] == f"19,4,7,6,7,{7 / 4 ** (12 / 11):.6f},"
    assert records_csv([]) == lines[0] + "\n"
