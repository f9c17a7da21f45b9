import random

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from sumproduct import ElementSet

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

SMALL_PRIMES = [3, 5, 7, 11, 13, 17, 19, 23, 29, 31]


@st.composite
def element_sets(draw, primes=SMALL_PRIMES, min_size=1, max_size=None, nonzero=False):
    p = draw(st.sampled_from(primes))
    lo = 1 if nonzero else 0
    hi = p - 1
    cap = hi - lo + 1 if max_size is None else min(max_size, hi - lo + 1)
    items = draw(st.sets(st.integers(lo, hi), min_size=min(min_size, cap), max_size=cap))
    return ElementSet.from_iterable(p, items)


@st.composite
def set_pairs(draw, primes=SMALL_PRIMES, min_size=1, max_size=None, nonzero=False):
    p = draw(st.sampled_from(primes))
    A = draw(element_sets([p], min_size, max_size, nonzero))
    B = draw(element_sets([p], min_size, max_size, nonzero))
    return A, B


def seeded_set(seed, p, n):
    rng = random.Random(seed)
    return ElementSet.from_iterable(p, rng.sample(range(1, p), n))


@pytest.fixture
def f7_witness():
    return ElementSet.from_iterable(7, [1, 2, 4])
