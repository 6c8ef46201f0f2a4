"""Exact arithmetic on rationals, dyadics and binary strings.

Bit strings are plain Python ``str`` objects over ``"01"``.  Every value that
enters a measure or slope computation is a :class:`fractions.Fraction`.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import total_ordering
from math import isqrt
from typing import Iterable, Sequence, Union

Rational = Fraction
BitString = str
Number = Union[int, Fraction, "Dyadic"]


class DegenerateIntervalError(ValueError):
    """Raised when a slope is requested over an interval with a = b."""


class ContractViolation(RuntimeError):
    """A documented invariant of an operation failed on the given inputs."""

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.context = context


def as_fraction(x: Number | str) -> Fraction:
    if isinstance(x, Dyadic):
        return x.value
    if isinstance(x, str):
        return parse_rational(x)
    return Fraction(x)


def format_rational(q: Fraction | int) -> str:
    q = Fraction(q)
    return f"{q.numerator}/{q.denominator}"


def parse_rational(text: str) -> Fraction:
    text = text.strip()
    if "*2^-" in text:
        return Dyadic.parse(text).value
    return Fraction(text)


@total_ordering
@dataclass(frozen=True)
class Dyadic:
    """The number ``mantissa * 2**-exponent`` in canonical form."""

    mantissa: int
    exponent: int = 0

    def __post_init__(self):
        m, e = self.mantissa, self.exponent
        if m == 0:
            e = 0
        else:
            while e > 0 and m % 2 == 0:
                m //= 2
                e -= 1
            while e < 0:
                m *= 2
                e += 1
        object.__setattr__(self, "mantissa", m)
        object.__setattr__(self, "exponent", e)

    @classmethod
    def from_fraction(cls, q: Fraction | int) -> "Dyadic":
        q = Fraction(q)
        d = q.denominator
        if d & (d - 1):
            raise ValueError(f"{q} is not a dyadic rational")
        return cls(q.numerator, d.bit_length() - 1)

    @classmethod
    def round_down(cls, q: Fraction | int, n: int) -> "Dyadic":
        """Largest multiple of 2^-n that is <= q."""
        q = Fraction(q)
        return cls((q.numerator << n) // q.denominator, n)

    @classmethod
    def parse(cls, text: str) -> "Dyadic":
        m, _, e = text.partition("*2^-")
        return cls(int(m), int(e or 0))

    @property
    def value(self) -> Fraction:
        return Fraction(self.mantissa, 1 << self.exponent)

    def __str__(self) -> str:
        return f"{self.mantissa}*2^-{self.exponent}"

    def __eq__(self, other):
        if isinstance(other, Dyadic):
            return self.mantissa == other.mantissa and self.exponent == other.exponent
        if isinstance(other, (int, Fraction)):
            return self.value == other
        return NotImplemented

    def __lt__(self, other):
        return self.value < as_fraction(other)

    def __hash__(self):
        return hash(self.value)

    def __add__(self, other):
        if isinstance(other, Dyadic):
            return Dyadic.from_fraction(self.value + other.value)
        return self.value + as_fraction(other)

    def __sub__(self, other):
        if isinstance(other, Dyadic):
            return Dyadic.from_fraction(self.value - other.value)
        return self.value - as_fraction(other)

    def __neg__(self):
        return Dyadic(-self.mantissa, self.exponent)

    def __abs__(self):
        return Dyadic(abs(self.mantissa), self.exponent)


@dataclass(frozen=True)
class DyadicInterval:
    """Open interval (left, right)."""

    left: Fraction
    right: Fraction

    def __post_init__(self):
        if not self.left < self.right:
            raise ValueError("interval needs left < right")

    @property
    def length(self) -> Fraction:
        return self.right - self.left

    def contains(self, x: Number) -> bool:
        x = as_fraction(x)
        return self.left < x < self.right

    def shifted(self, by: Fraction) -> "DyadicInterval":
        return DyadicInterval(self.left + by, self.right + by)


# ---------------------------------------------------------------- strings


def check_bits(sigma: str) -> str:
    if any(c not in "01" for c in sigma):
        raise ValueError(f"not a bit string: {sigma!r}")
    return sigma


def is_prefix(a: str, b: str) -> bool:
    return b.startswith(a)


def comparable(a: str, b: str) -> bool:
    return a.startswith(b) or b.startswith(a)


def string_value(sigma: str) -> Fraction:
    """The dyadic rational 0.sigma."""
    if not sigma:
        return Fraction(0)
    return Fraction(int(sigma, 2), 1 << len(sigma))


def interval_of_string(sigma: str) -> DyadicInterval:
    left = string_value(check_bits(sigma))
    return DyadicInterval(left, left + Fraction(1, 1 << len(sigma)))


def strings_of_length(n: int) -> Iterable[str]:
    if n == 0:
        yield ""
        return
    for k in range(1 << n):
        yield format(k, f"0{n}b")


def prefix_minimal(strings: Iterable[str]) -> list[str]:
    """Strings of the set with no proper prefix in the set, sorted."""
    kept: set[str] = set()
    for s in sorted(set(strings), key=len):
        if not any(s[:k] in kept for k in range(len(s))):
            kept.add(s)
    return sorted(kept)


def antichain_measure(strings: Iterable[str]) -> Fraction:
    total = Fraction(0)
    for s in prefix_minimal(strings):
        total += Fraction(1, 1 << len(s))
    return total


def kraft_sum(strings: Iterable[str]) -> Fraction:
    """Sum of 2^-|s| without any reduction."""
    return sum((Fraction(1, 1 << len(s)) for s in strings), Fraction(0))


def is_prefix_free(strings: Sequence[str]) -> bool:
    ordered = sorted(strings)
    return all(not ordered[k + 1].startswith(ordered[k]) for k in range(len(ordered) - 1))


def binary_digits(x: Fraction, k: int) -> str:
    """First k binary digits of x in [0,1) (the expansion not ending in 1s)."""
    x = Fraction(x)
    if not 0 <= x < 1:
        raise ValueError("binary_digits expects 0 <= x < 1")
    return format((x.numerator << k) // x.denominator, f"0{k}b") if k else ""


# ---------------------------------------------------------------- slopes


def slope(fa: Number, fb: Number, a: Number, b: Number) -> Fraction:
    a, b = as_fraction(a), as_fraction(b)
    if a == b:
        raise DegenerateIntervalError("slope over a degenerate interval a = b")
    return (as_fraction(fa) - as_fraction(fb)) / (a - b)


def thirds_grid_gap(m: int, window: int | None = None) -> Fraction:
    """Minimum distance between a point k*2^-m and a point 1/3 + k'*2^-m.

    k and k' range over {-window, ..., window}; the default window covers a
    full period of both grids.  The distance only depends on j = k' - k, and
    |1/3 + j*2^-m| is convex in j, so the nearest integers to -2^m/3 suffice.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    if window is None:
        window = 1 << m
    lo, hi = -2 * window, 2 * window
    centre = -(1 << m) // 3
    candidates = {min(max(j, lo), hi) for j in (centre - 1, centre, centre + 1, centre + 2)}
    return min(Fraction(abs((1 << m) + 3 * j), 3 << m) for j in candidates)


# ---------------------------------------------------------------- codings


def string_to_nat(sigma: str) -> int:
    """Length-lexicographic rank of sigma: "" -> 0, "0" -> 1, "1" -> 2, ..."""
    return (1 << len(sigma)) - 1 + (int(sigma, 2) if sigma else 0)


def nat_to_string(n: int) -> str:
    if n < 0:
        raise ValueError("negative code")
    length = (n + 1).bit_length() - 1
    offset = n - ((1 << length) - 1)
    return format(offset, f"0{length}b") if length else ""


def pair(a: int, b: int) -> int:
    """Cantor pairing."""
    return (a + b) * (a + b + 1) // 2 + b


def unpair(z: int) -> tuple[int, int]:
    w = (isqrt(8 * z + 1) - 1) // 2
    b = z - w * (w + 1) // 2
    return w - b, b


def triple(a: int, b: int, c: int) -> int:
    return pair(pair(a, b), c)


def untriple(z: int) -> tuple[int, int, int]:
    ab, c = unpair(z)
    a, b = unpair(ab)
    return a, b, c


def encode_tuple(items: Sequence[int]) -> int:
    code = 0
    for x in reversed(items):
        code = pair(x, code) + 1
    return code


def decode_tuple(code: int) -> tuple[int, ...]:
    out = []
    while code:
        x, code = unpair(code - 1)
        out.append(x)
    return tuple(out)
