"""Exact arithmetic and set algebra in a prime field F_p.

Sets are stored as dense boolean indicators of length p, so every
operation below is exact and membership tests are O(1).
"""

from __future__ import annotations

import re
from functools import lru_cache
from typing import Iterable

import numpy as np

__all__ = [
    "DomainError",
    "Prime",
    "ElementSet",
    "mod_inverse",
    "inverse_table",
    "sumset",
    "difference_set",
    "product_set",
    "ratio_set_simple",
    "signed_sumset",
    "dilate",
    "translate",
    "ratio_of_differences",
    "parse_set_literal",
    "format_set_literal",
    "SetLiteralError",
]

INVERSE_TABLE_LIMIT = 1 << 16


class DomainError(ValueError):
    """Raised for arguments outside an operation's domain (zero divisors, bad primes...)."""


class SetLiteralError(ValueError):
    """Malformed ``p=<prime>:{...}`` literal. ``column`` is 1-based."""

    def __init__(self, message: str, column: int):
        super().__init__(f"column {column}: {message}")
        self.column = column


class Prime(int):
    """An int that is guaranteed to be a prime >= 3."""

    def __new__(cls, value: int):
        value = int(value)
        if value < 3:
            raise DomainError(f"prime must be >= 3, got {value}")
        if value >= 1 << 31:
            raise DomainError(f"prime {value} exceeds the supported machine-word range")
        from sympy import isprime  # deterministic below 2**64

        if not isprime(value):
            raise DomainError(f"{value} is not prime")
        return super().__new__(cls, value)


def _as_prime(p) -> Prime:
    return p if isinstance(p, Prime) else Prime(p)


def mod_inverse(a: int, p: int) -> int:
    """Inverse of ``a`` modulo ``p`` (extended Euclid via ``pow``)."""
    a %= p
    if a == 0:
        raise DomainError("0 has no multiplicative inverse")
    return pow(a, -1, p)


@lru_cache(maxsize=8)
def inverse_table(p: int) -> np.ndarray:
    """Table ``inv[a] = a^{-1} mod p`` with ``inv[0] = 0``; only for p <= 2**16."""
    if p > INVERSE_TABLE_LIMIT:
        raise DomainError(f"inverse table only built for p <= {INVERSE_TABLE_LIMIT}")
    inv = [0, 1] + [0] * (p - 2)
    for i in range(2, p):
        inv[i] = (p - (p // i) * inv[p % i] % p) % p
    table = np.array(inv, dtype=np.int64)
    table.setflags(write=False)
    return table


def _inverses(values: np.ndarray, p: int) -> np.ndarray:
    if p <= INVERSE_TABLE_LIMIT:
        return inverse_table(p)[values]
    return np.array([pow(int(v), -1, p) for v in values], dtype=np.int64)


class ElementSet:
    """Immutable subset of F_p backed by a boolean indicator array."""

    __slots__ = ("prime", "_mask", "_elements", "_hash")

    def __init__(self, prime: int, mask: np.ndarray):
        prime = _as_prime(prime)
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (prime,):
            raise DomainError(f"indicator must have length {prime}, got {mask.shape}")
        mask = mask.copy()
        mask.setflags(write=False)
        self.prime = prime
        self._mask = mask
        self._elements = None
        self._hash = None

    @classmethod
    def from_iterable(cls, p: int, items: Iterable[int], nonzero: bool = False) -> "ElementSet":
        p = _as_prime(p)
        mask = np.zeros(p, dtype=bool)
        values = np.fromiter((int(x) for x in items), dtype=np.int64)
        if values.size:
            values %= p
            mask[values] = True
        if nonzero and mask[0]:
            raise DomainError("set must lie in F_p^* but contains 0")
        return cls(p, mask)

    @classmethod
    def from_array(cls, p: int, values: np.ndarray) -> "ElementSet":
        mask = np.zeros(int(p), dtype=bool)
        mask[np.asarray(values, dtype=np.int64) % p] = True
        return cls(p, mask)

    @classmethod
    def empty(cls, p: int) -> "ElementSet":
        return cls(p, np.zeros(int(p), dtype=bool))

    @property
    def mask(self) -> np.ndarray:
        return self._mask

    @property
    def elements(self) -> np.ndarray:
        """Sorted member array (read-only)."""
        if self._elements is None:
            el = np.flatnonzero(self._mask).astype(np.int64)
            el.setflags(write=False)
            self._elements = el
        return self._elements

    @property
    def cardinality(self) -> int:
        return int(self.elements.size)

    def __len__(self) -> int:
        return self.cardinality

    def __iter__(self):
        return (int(x) for x in self.elements)

    def __contains__(self, x) -> bool:
        return bool(self._mask[int(x) % self.prime])

    def __eq__(self, other) -> bool:
        if not isinstance(other, ElementSet):
            return NotImplemented
        return self.prime == other.prime and np.array_equal(self._mask, other._mask)

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((int(self.prime), np.packbits(self._mask).tobytes()))
        return self._hash

    def __repr__(self) -> str:
        return f"ElementSet({format_set_literal(self)})"

    def __bool__(self) -> bool:
        return bool(self._mask.any())

    def _check(self, other: "ElementSet") -> None:
        if self.prime != other.prime:
            raise DomainError(f"prime mismatch: {self.prime} vs {other.prime}")

    def union(self, other: "ElementSet") -> "ElementSet":
        self._check(other)
        return ElementSet(self.prime, self._mask | other._mask)

    def intersection(self, other: "ElementSet") -> "ElementSet":
        self._check(other)
        return ElementSet(self.prime, self._mask & other._mask)

    def difference(self, other: "ElementSet") -> "ElementSet":
        self._check(other)
        return ElementSet(self.prime, self._mask & ~other._mask)

    def issubset(self, other: "ElementSet") -> bool:
        self._check(other)
        return not bool((self._mask & ~other._mask).any())

    def tolist(self) -> list[int]:
        return [int(x) for x in self.elements]

    def min(self) -> int:
        return int(self.elements[0])


def _combine(A: ElementSet, B: ElementSet, values: np.ndarray) -> ElementSet:
    mask = np.zeros(A.prime, dtype=bool)
    mask[values.ravel()] = True
    return ElementSet(A.prime, mask)


def sumset(A: ElementSet, B: ElementSet) -> ElementSet:
    A._check(B)
    a, b = A.elements, B.elements
    return _combine(A, B, (a[:, None] + b[None, :]) % A.prime)


def difference_set(A: ElementSet, B: ElementSet) -> ElementSet:
    A._check(B)
    a, b = A.elements, B.elements
    return _combine(A, B, (a[:, None] - b[None, :]) % A.prime)


def product_set(A: ElementSet, B: ElementSet) -> ElementSet:
    A._check(B)
    a, b = A.elements, B.elements
    return _combine(A, B, (a[:, None] * b[None, :]) % A.prime)


def ratio_set_simple(A: ElementSet, B: ElementSet) -> ElementSet:
    """{a/b : a in A, b in B}; requires 0 not in B."""
    A._check(B)
    if 0 in B:
        raise DomainError("ratio set divisor contains 0")
    a, b = A.elements, B.elements
    return _combine(A, B, (a[:, None] * _inverses(b, A.prime)[None, :]) % A.prime)


def signed_sumset(terms: list[tuple[int, ElementSet]]) -> ElementSet:
    """Sum of ``sign * S`` over ``(sign, S)`` pairs, e.g. A + A - A - A."""
    if not terms:
        raise DomainError("empty signed sum")
    sign, acc = terms[0]
    if sign < 0:
        acc = dilate(acc, -1)
    for sign, S in terms[1:]:
        acc = sumset(acc, S) if sign > 0 else difference_set(acc, S)
    return acc


def dilate(A: ElementSet, r: int) -> ElementSet:
    r %= A.prime
    if r == 0:
        raise DomainError("dilation by 0")
    return ElementSet.from_array(A.prime, A.elements * r)


def translate(A: ElementSet, t: int) -> ElementSet:
    return ElementSet(A.prime, np.roll(A.mask, int(t) % A.prime))


def ratio_of_differences(S1: ElementSet, S2: ElementSet) -> ElementSet:
    """R(S1, S2) = {(u - v)/(s - t) : u != v in S1, s != t in S2}."""
    S1._check(S2)
    if len(S1) < 2 or len(S2) < 2:
        raise DomainError("ratio_of_differences needs sets of size >= 2")
    p = S1.prime
    num = nonzero_differences(S1)
    den = _inverses(nonzero_differences(S2), p)
    return _combine(S1, S2, (num[:, None] * den[None, :]) % p)


def nonzero_differences(S: ElementSet) -> np.ndarray:
    """Distinct values of u - v over u != v in S."""
    a = S.elements
    d = (a[:, None] - a[None, :]) % S.prime
    return np.unique(d[d != 0])


_LITERAL = re.compile(r"\s*p\s*=\s*(\d+)\s*:\s*\{(.*)\}\s*$", re.S)


def _first_bad_column(text: str) -> int:
    """1-based column where ``text`` stops following the literal grammar."""
    pos = 0
    for token in (r"\s*p", r"\s*=", r"\s*\d+", r"\s*:", r"\s*\{"):
        m = re.compile(token).match(text, pos)
        if m is None:
            return pos + len(text[pos:]) - len(text[pos:].lstrip()) + 1
        pos = m.end()
    return len(text.rstrip()) + 1  # unterminated body


def parse_set_literal(text: str, nonzero: bool = False) -> ElementSet:
    """Parse ``p=7:{1,2,4}``."""
    m = _LITERAL.match(text)
    if m is None:
        raise SetLiteralError("expected p=<prime>:{e1,e2,...}", _first_bad_column(text))
    try:
        p = Prime(int(m.group(1)))
    except DomainError as exc:
        raise SetLiteralError(str(exc), m.start(1) + 1) from None
    body, offset = m.group(2), m.start(2)
    items = []
    if body.strip():
        pos = 0
        for chunk in body.split(","):
            token = chunk.strip()
            if not re.fullmatch(r"-?\d+", token):
                col = offset + pos + (len(chunk) - len(chunk.lstrip())) + 1
                raise SetLiteralError(f"bad element {token!r}", col)
            items.append(int(token))
            pos += len(chunk) + 1
    try:
        return ElementSet.from_iterable(p, items, nonzero=nonzero)
    except DomainError as exc:
        raise SetLiteralError(str(exc), offset + 1) from None


def format_set_literal(A: ElementSet) -> str:
    return f"p={int(A.prime)}:{{{','.join(str(x) for x in A)}}}"
