import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import element_sets, set_pairs
from sumproduct import (
    DomainError,
    ElementSet,
    Prime,
    SetLiteralError,
    difference_set,
    dilate,
    format_set_literal,
    mod_inverse,
    parse_set_literal,
    product_set,
    ratio_of_differences,
    ratio_set_simple,
    signed_sumset,
    sumset,
    translate,
)
from sumproduct.fpcore import inverse_table


def brute(A, B, op):
    p = A.prime
    return {op(a, b) % p for a in A for b in B}


# --- oracles: plain double loops over tiny fields ----------------------------


@given(set_pairs())
def test_sumset_matches_double_loop(AB):
    A, B = AB
    assert set(sumset(A, B)) == brute(A, B, lambda a, b: a + b)


@given(set_pairs())
def test_difference_matches_double_loop(AB):
    A, B = AB
    assert set(difference_set(A, B)) == brute(A, B, lambda a, b: a - b)


@given(set_pairs())
def test_product_matches_double_loop(AB):
    A, B = AB
    assert set(product_set(A, B)) == brute(A, B, lambda a, b: a * b)


@given(set_pairs(nonzero=True))
def test_ratio_matches_double_loop(AB):
    A, B = AB
    p = A.prime
    assert set(ratio_set_simple(A, B)) == brute(A, B, lambda a, b: a * pow(b, p - 2, p))


@given(set_pairs(min_size=2))
def test_ratio_of_differences_matches_quadruple_loop(AB):
    S1, S2 = AB
    p = S1.prime
    want = {
        (u - v) * pow(s - t, p - 2, p) % p
        for u in S1 for v in S1 if u != v
        for s in S2 for t in S2 if s != t
    }
    assert set(ratio_of_differences(S1, S2)) == want


# --- structural invariants ----------------------------------------------------


@given(set_pairs())
def test_cauchy_davenport(AB):
    A, B = AB
    assert len(sumset(A, B)) >= min(A.prime, len(A) + len(B) - 1)


@given(element_sets(), st.integers(1, 30))
def test_dilation_preserves_sizes(A, r):
    r %= A.prime
    if r == 0:
        r = 1
    D = dilate(A, r)
    assert len(D) == len(A)
    assert len(sumset(D, D)) == len(sumset(A, A))
    assert len(difference_set(D, D)) == len(difference_set(A, A))


@given(element_sets(), st.integers(-40, 40))
def test_translate_is_shift(A, t):
    assert set(translate(A, t)) == {(a + t) % A.prime for a in A}


@given(element_sets(min_size=2))
def test_R_closed_under_negation_and_inverse(C):
    R = ratio_of_differences(C, C)
    p = C.prime
    assert 0 not in R
    for r in R:
        assert (-r) % p in R
        assert pow(r, p - 2, p) in R


@given(element_sets(min_size=1))
def test_signed_sumset_composes(A):
    got = signed_sumset([(1, A), (1, A), (-1, A)])
    assert got == difference_set(sumset(A, A), A)
    assert signed_sumset([(-1, A)]) == dilate(A, -1)


@given(element_sets())
def test_literal_round_trip(A):
    assert parse_set_literal(format_set_literal(A)) == A


# --- elementary API -------------------------------------------------------------


def test_mod_inverse_table():
    for p in (3, 7, 101, 1009):
        inv = inverse_table(p)
        a = np.arange(1, p)
        assert np.all(a * inv[1:] % p == 1)
        assert mod_inverse(p - 1, p) == p - 1
    with pytest.raises(DomainError):
        mod_inverse(0, 7)


@pytest.mark.parametrize("bad", [1, 2, 9, 15, 1 << 31])
def test_prime_rejects(bad):
    with pytest.raises(DomainError):
        Prime(bad)


def test_prime_accepts_large():
    assert Prime(2147483647) == 2147483647


def test_element_set_basics():
    A = ElementSet.from_iterable(7, [9, 2, 4, -6])
    assert A.tolist() == [1, 2, 4]
    assert len(A) == A.cardinality == 3
    assert 3 not in A and 1 in A and 8 in A  # membership is mod p
    assert A.elements.flags.writeable is False
    assert hash(A) == hash(ElementSet.from_iterable(7, [1, 2, 4]))
    with pytest.raises(DomainError):
        A.union(ElementSet.from_iterable(11, [1]))
    with pytest.raises(DomainError):
        ElementSet.from_iterable(7, [0, 1], nonzero=True)


def test_domain_errors():
    A = ElementSet.from_iterable(7, [0, 1])
    with pytest.raises(DomainError):
        ratio_set_simple(A, A)
    with pytest.raises(DomainError):
        dilate(A, 14)
    with pytest.raises(DomainError):
        ratio_of_differences(ElementSet.from_iterable(7, [1]), A)


@pytest.mark.parametrize(
    "text,column",
    [
        ("q=7:{1}", 1),
        ("p=7{1,2}", 4),
        ("p=7:{1,x,3}", 8),
        ("p=8:{1}", 3),
        ("p=7:{1,2", 9),
    ],
)
def test_literal_errors_report_column(text, column):
    with pytest.raises(SetLiteralError) as info:
        parse_set_literal(text)
    assert info.value.column == column


def test_f7_witness_sizes(f7_witness):
    A = f7_witness
    assert len(product_set(A, A)) == 3
    assert len(ratio_set_simple(A, A)) == 3
    assert len(sumset(A, A)) == 6
