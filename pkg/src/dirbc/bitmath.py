"""Bit strings and the closed-form quantities used by the binding proofs.

Strings print most-significant position first: position j = 1 is the
leftmost character, and also the most significant bit of ``to_int``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

SQRT2 = math.sqrt(2.0)
HONEST_WIN = (2.0 + SQRT2) / 4.0
HONEST_MISMATCH = 0.5 - 1.0 / (2.0 * SQRT2)


class BitString:
    """Fixed-length immutable bit string backed by a uint8 array."""

    __slots__ = ("_bits",)

    def __init__(self, bits):
        arr = np.array(bits, dtype=np.uint8).reshape(-1)
        if arr.size == 0:
            raise ValueError("BitString must have positive length")
        if arr.max() > 1:
            raise ValueError("BitString entries must be 0 or 1")
        arr.flags.writeable = False
        self._bits = arr

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "BitString":
        obj = cls.__new__(cls)
        arr.flags.writeable = False
        obj._bits = arr
        return obj

    @classmethod
    def zeros(cls, n: int) -> "BitString":
        return cls._wrap(np.zeros(n, dtype=np.uint8))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "BitString":
        return cls._wrap(rng.integers(0, 2, size=n, dtype=np.uint8))

    @classmethod
    def from_str(cls, text: str) -> "BitString":
        text = text.strip()
        if not text or set(text) - {"0", "1"}:
            raise ValueError(f"not a bit string: {text!r}")
        return cls._wrap(np.frombuffer(text.encode("ascii"), dtype=np.uint8) - ord("0"))

    @classmethod
    def from_int(cls, value: int, n: int) -> "BitString":
        if not 0 <= value < (1 << n):
            raise ValueError(f"{value} does not fit in {n} bits")
        return cls._wrap(np.array([(value >> (n - 1 - k)) & 1 for k in range(n)], dtype=np.uint8))

    @property
    def bits(self) -> np.ndarray:
        return self._bits

    def __len__(self):
        return self._bits.size

    def __getitem__(self, j):
        if isinstance(j, slice):
            return BitString._wrap(self._bits[j].copy())
        return int(self._bits[j])

    def __iter__(self):
        return (int(b) for b in self._bits)

    def __eq__(self, other):
        if not isinstance(other, BitString):
            return NotImplemented
        return np.array_equal(self._bits, other._bits)

    def __hash__(self):
        return hash(self._bits.tobytes())

    def __str__(self):
        return (self._bits + ord("0")).tobytes().decode("ascii")

    def __repr__(self):
        return f"BitString('{self}')"

    def to_int(self) -> int:
        return int(str(self), 2)

    def weight(self) -> int:
        return int(self._bits.sum())

    def select(self, positions) -> "BitString":
        return BitString._wrap(self._bits[np.asarray(positions, dtype=np.intp)].copy())

    def __xor__(self, other):
        return bitwise_xor(self, other)

    def __and__(self, other):
        return bitwise_and(self, other)

    def __invert__(self):
        return complement(self)


def _check_same_length(a: BitString, b: BitString):
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} != {len(b)}")


def hamming_distance(a: BitString, b: BitString) -> int:
    _check_same_length(a, b)
    return int(np.count_nonzero(a.bits != b.bits))


def bitwise_xor(a: BitString, b: BitString) -> BitString:
    _check_same_length(a, b)
    return BitString._wrap(a.bits ^ b.bits)


def bitwise_and(a: BitString, b: BitString) -> BitString:
    _check_same_length(a, b)
    return BitString._wrap(a.bits & b.bits)


def complement(a: BitString) -> BitString:
    return BitString._wrap(a.bits ^ 1)


@lru_cache(maxsize=None)
def popcount_table(n: int) -> np.ndarray:
    """Weights of all integers below 2**n, for packed-word loops."""
    values = np.arange(1 << n, dtype=np.int64)
    counts = np.zeros(1 << n, dtype=np.int64)
    for k in range(n):
        counts += (values >> k) & 1
    return counts


def binary_entropy(x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary entropy needs 0 <= x <= 1, got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def hamming_ball_volume(n: int, r: float) -> int:
    """Exact number of n-bit strings within Hamming distance r of a centre."""
    if n < 1:
        raise ValueError("n must be positive")
    if not 0 <= r <= n:
        raise ValueError(f"radius {r} outside [0, {n}]")
    return sum(math.comb(n, k) for k in range(int(math.floor(r)) + 1))


def hamming_ball_bound(n: int, r: float) -> float:
    """Upper bound 2**(n H(r/n)) on the ball volume, valid for r <= n/2."""
    if n < 1:
        raise ValueError("n must be positive")
    if not 0 <= r <= n:
        raise ValueError(f"radius {r} outside [0, {n}]")
    if r > n / 2:
        raise ValueError(f"volume bound requires r <= n/2, got r={r}, n={n}")
    return 2.0 ** (n * binary_entropy(r / n))


def xi_upper_limit() -> float:
    """Largest admissible tolerance: xi must stay strictly below 1/(2 sqrt 2) - 1/4."""
    return 1.0 / (2.0 * SQRT2) - 0.25


def check_xi(xi: float) -> None:
    limit = xi_upper_limit()
    if not 0.0 < xi < limit:
        raise ValueError(f"xi={xi} outside the admissible range 0 < xi < {limit:.7f}")


def chsh_score_threshold(n: int, xi: float) -> float:
    """The CHSH game score must exceed this for acceptance."""
    return n * (HONEST_WIN - xi)


def mismatch_threshold(n: int, xi: float) -> float:
    """Largest tolerated mismatch count; complement of ``chsh_score_threshold``."""
    return n * (HONEST_MISMATCH + xi)


def max_mismatches(n: int, xi: float) -> int:
    """Largest integer mismatch count that is <= mismatch_threshold."""
    # nudge guards against thresholds that land on an integer up to rounding
    return int(math.floor(mismatch_threshold(n, xi) + 1e-12))


def chsh_value_from_score(n: int, r_score: int) -> float:
    if not 0 <= r_score <= n:
        raise ValueError(f"score {r_score} outside [0, {n}]")
    return (4.0 / n) * (2.0 * r_score - n)


@dataclass(frozen=True)
class SecurityBound:
    n: int
    xi: float
    radius_fraction: float
    entropy: float
    epsilon: float

    @property
    def radius(self) -> float:
        return self.n * self.radius_fraction


def epsilon_bound(n: int, xi: float) -> SecurityBound:
    """Analytic cap on p0 + p1 - 1 for the CHSH protocols."""
    if n < 1:
        raise ValueError("n must be positive")
    check_xi(xi)
    frac = 1.0 - 1.0 / SQRT2 + 2.0 * xi
    h = binary_entropy(frac)
    return SecurityBound(n=n, xi=xi, radius_fraction=frac, entropy=h, epsilon=2.0 ** (-n * (1.0 - h)))


def rccbc_distance_check(s0J: BitString, s1J: BitString, n: int, c_param: float) -> bool:
    """| d(S0_J, S1_J) - n/4 | < C n^(3/4) on the revealed half-strings."""
    if n % 2:
        raise ValueError("n must be even")
    if c_param <= 0:
        raise ValueError("C must be positive")
    if len(s0J) != n // 2 or len(s1J) != n // 2:
        raise ValueError(f"revealed substrings must have length {n // 2}")
    d = hamming_distance(s0J, s1J)
    return abs(d - n / 4.0) < c_param * n ** 0.75
