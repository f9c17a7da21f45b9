import json
from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given

from conftest import element_sets
from sumproduct import DomainError, ElementSet, product_set
from sumproduct.energy import (
    dyadic_decompose,
    fibers,
    line_statistics,
    log_bound,
    mult_energy,
    point_set,
    popular_lines_mode,
    select_popular_group,
    stats_csv,
    stats_json,
)

nonzero_sets = element_sets(min_size=1, max_size=12, nonzero=True)


def energy_by_quadruples(A):
    p = A.prime
    return sum(1 for a, b, c, d in product(A, repeat=4) if (a * b - c * d) % p == 0)


@given(nonzero_sets)
def test_energy_matches_quadruple_count(A):
    assert mult_energy(A) == energy_by_quadruples(A)


@given(nonzero_sets)
def test_energy_identity(A):
    stats = line_statistics(A)
    assert stats.total_points == len(A) ** 2
    assert mult_energy(A) == stats.energy()


@given(nonzero_sets)
def test_line_fibers_are_exact(A):
    p = A.prime
    stats = line_statistics(A)
    for xi in stats.slopes:
        want = {x for x in A if xi * x % p in A}
        assert set(stats.abscissae[xi]) == want
        assert stats.counts[xi] == len(want)


@given(nonzero_sets)
def test_slope_symmetry(A):
    # (x, y) on slope xi iff (y, x) on slope 1/xi
    p = A.prime
    stats = line_statistics(A)
    for xi, n in stats.counts.items():
        assert stats.counts[pow(xi, p - 2, p)] == n


@given(nonzero_sets)
def test_cauchy_schwarz(A):
    assert mult_energy(A) * len(product_set(A, A)) >= len(A) ** 4


@given(nonzero_sets)
def test_dyadic_partition_and_guarantee(A):
    stats = line_statistics(A)
    groups = dyadic_decompose(stats)
    seen = [xi for g in groups for xi in g.slopes]
    assert sorted(seen) == stats.slopes
    for g in groups:
        assert all(g.N_lo <= n < g.N_hi for n in g.populations)
    assert sum(g.M for g in groups) == stats.energy()
    assert len(groups) <= log_bound(len(A))
    best = select_popular_group(groups)
    assert best.M * log_bound(len(A)) >= stats.energy()
    assert all((-g.M, g.j) >= (-best.M, best.j) for g in groups)


def test_f7_worked_example(f7_witness):
    stats = line_statistics(f7_witness)
    assert stats.counts == {1: 3, 2: 3, 4: 3}
    assert mult_energy(f7_witness) == 27
    (g,) = dyadic_decompose(stats)
    assert (g.j, g.L, g.M, g.N_avg) == (2, 3, 27, 3)


def test_point_set_and_fibers(f7_witness):
    stats = line_statistics(f7_witness)
    P = point_set(stats, [2])
    assert P.points == ((1, 2), (2, 4), (4, 1))
    assert (2, 4) in P and (1, 1) not in P
    A_x, A_y = fibers(P)
    assert A_x[1].tolist() == [2]
    assert A_y[1].tolist() == [4]
    assert P.slope_fibers()[2] == f7_witness


def test_popular_lines_mode():
    A = ElementSet.from_iterable(101, [1, 2, 4, 8, 16, 3])
    stats = line_statistics(A)
    g, P = popular_lines_mode(A, 2)
    assert g.j == 0
    assert set(g.slopes) == {xi for xi in stats.slopes if 2 * stats.counts[xi] >= 6}
    assert len(P) == g.points
    diag, _ = popular_lines_mode(A, Fraction(1))
    assert diag.slopes == (1,)  # only the diagonal is fully populated
    with pytest.raises(DomainError):
        popular_lines_mode(A, Fraction(1, 2))


def test_zero_rejected():
    A = ElementSet.from_iterable(7, [0, 1])
    with pytest.raises(DomainError):
        mult_energy(A)
    with pytest.raises(DomainError):
        line_statistics(A)


def test_emitters(f7_witness):
    stats = line_statistics(f7_witness)
    assert stats_csv(stats) == "slope,count\n1,3\n2,3\n4,3\n"
    assert json.loads(stats_json(stats)) == {"E": 27, "groups": [{"j": 2, "L": 3, "M": 27}]}
