"""Slope martingales and the conversion of slopes into a martingale without debt.

For a string sigma, ``(sigma)`` is the dyadic interval (0.sigma, 0.sigma +
2^-|sigma|).  The slope of f over (sigma) is a martingale in sigma for any f,
because the slope over an interval is the average of the slopes over its two
halves.  It can take negative values; :func:`debt_free_convert` rebuilds a
nonnegative martingale with the same betting factors wherever that is safe.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field
from itertools import accumulate
from fractions import Fraction
from typing import Callable, Iterable, Optional, Protocol, Union

from .core_numeric import ContractViolation, slope, string_value, strings_of_length


@dataclass(frozen=True)
class FunctionOracle:
    """f on rationals: ``eval(q, n)`` is within 2^-n of f(q).

    ``exact`` marks oracles that return f(q) itself regardless of n.
    ``modulus(n)``, when given, is a uniform modulus of continuity on [0,1]:
    |x - y| <= 2^-modulus(n) implies |f(x) - f(y)| <= 2^-n.
    """

    eval: Callable[[Fraction, int], Fraction]
    markov_style: bool = False
    exact: bool = False
    name: str = "f"
    modulus: Optional[Callable[[int], int]] = None

    def __call__(self, q, n: int = 0) -> Fraction:
        return Fraction(self.eval(Fraction(q), n))


def exact_oracle(fn: Callable[[Fraction], Fraction], name: str = "f",
                 modulus: Optional[Callable[[int], int]] = None) -> FunctionOracle:
    return FunctionOracle(lambda q, n: Fraction(fn(q)), markov_style=True, exact=True,
                          name=name, modulus=modulus)


def approximate_oracle(fn: Callable[[Fraction], Fraction], name: str = "f",
                       modulus: Optional[Callable[[int], int]] = None) -> FunctionOracle:
    """Oracle returning f(q) rounded down to a multiple of 2^-(n+1)."""
    def ev(q, n):
        v = Fraction(fn(q))
        scale = 1 << (n + 1)
        return Fraction((v.numerator * scale) // v.denominator, scale)
    return FunctionOracle(ev, markov_style=True, exact=False, name=name, modulus=modulus)


def identity_oracle() -> FunctionOracle:
    return exact_oracle(lambda x: x, "identity", lambda n: n)


def square_oracle() -> FunctionOracle:
    return exact_oracle(lambda x: x * x, "x^2", lambda n: n + 1)


def staircase_oracle(jumps: Iterable[tuple[Fraction, Fraction]], name: str = "staircase") -> FunctionOracle:
    """Right-continuous nondecreasing step function sum of h * [x >= x_j]."""
    table = sorted((Fraction(x), Fraction(h)) for x, h in jumps)
    if any(h < 0 for _, h in table):
        raise ValueError("staircase heights must be nonnegative")
    xs = [x for x, _ in table]
    heights = list(accumulate((h for _, h in table), initial=Fraction(0)))

    def fn(x):
        return heights[bisect_right(xs, x)]
    return exact_oracle(fn, name)


# ---------------------------------------------------------------- martingales


@dataclass
class Martingale:
    values: dict[str, Fraction]
    base: str = ""
    cases: dict[str, tuple] = field(default_factory=dict)
    flags: list[dict] = field(default_factory=list)

    def __getitem__(self, tau: str) -> Fraction:
        return self.values[tau]

    def depth(self) -> int:
        return max(len(t) for t in self.values) - len(self.base)

    def fairness_violations(self) -> list[str]:
        bad = []
        for tau, v in self.values.items():
            kids = (self.values.get(tau + "0"), self.values.get(tau + "1"))
            if None not in kids and kids[0] + kids[1] != 2 * v:
                bad.append(tau)
        return bad

    def negative_nodes(self) -> list[str]:
        return [t for t, v in self.values.items() if v < 0]

    def to_json(self) -> dict:
        return {
            "base": self.base,
            "values": {t: f"{v.numerator}/{v.denominator}" for t, v in sorted(self.values.items())},
        }


def slope_martingale(f: FunctionOracle, shift, sigma: str, n: int = 0) -> Fraction:
    """Slope of f over the interval shift + (sigma), endpoints read at precision n+|sigma|+2."""
    shift = Fraction(shift)
    a = shift + string_value(sigma)
    b = a + Fraction(1, 1 << len(sigma))
    p = n + len(sigma) + 2
    return slope(f(b, p), f(a, p), b, a)


def slope_table(f: FunctionOracle, shift=0, depth: int = 12, n: int = 0, base: str = "") -> Martingale:
    values = {}
    for k in range(depth + 1):
        for tail in strings_of_length(k):
            values[base + tail] = slope_martingale(f, shift, base + tail, n)
    return Martingale(values, base)


class SlopeSource(Protocol):
    def value(self, tau: str) -> Fraction: ...
    def entry(self, tau: str, k: int) -> Fraction: ...


@dataclass
class OracleSlopes:
    """Slopes S_g(tau) read from a function oracle.

    ``value`` uses one fixed endpoint precision for every node, so the values
    satisfy the martingale identity exactly.  ``entry(tau, k)`` is the k-th
    term of a Cauchy name for S_g(tau).
    """

    g: FunctionOracle
    precision: int = 64
    _cache: dict[str, Fraction] = field(default_factory=dict, repr=False, compare=False)

    def value(self, tau: str) -> Fraction:
        if tau not in self._cache:
            self._cache[tau] = slope_martingale(self.g, 0, tau, self.precision)
        return self._cache[tau]

    def entry(self, tau: str, k: int) -> Fraction:
        if self.g.exact:
            return self.value(tau)
        return slope_martingale(self.g, 0, tau, k)


@dataclass
class ScriptedSlopes:
    """Explicit slope table; missing Cauchy entries default to the value.

    Nodes absent from the table are read from ``fallback``.
    """

    values: dict[str, Fraction]
    entries: dict[tuple[str, int], Fraction] = field(default_factory=dict)
    fallback: Optional[SlopeSource] = None

    def value(self, tau: str) -> Fraction:
        if tau not in self.values and self.fallback is not None:
            return self.fallback.value(tau)
        return Fraction(self.values[tau])

    def entry(self, tau: str, k: int) -> Fraction:
        if (tau, k) in self.entries:
            return Fraction(self.entries[(tau, k)])
        if tau not in self.values and self.fallback is not None:
            return self.fallback.entry(tau, k)
        return self.value(tau)


def debt_free_convert(g: Union[FunctionOracle, SlopeSource], sigma0: str, depth: int,
                      threshold: Fraction = Fraction(4)) -> Martingale:
    """Nonnegative martingale on extensions of sigma0 betting like S_g.

    At a node tau with positive capital: if the second Cauchy entry of
    S_g(tau v) is below 1 for some side v, capital doubles on the other side u
    and the tau v branch is set to 0 from there on (Case 1, u = 0 checked
    first).  Otherwise both children get M(tau) * S_g(tau u) / S_g(tau)
    (Case 2).  Nodes whose observed slope is not above ``threshold`` are
    flagged, not repaired.
    """
    source = OracleSlopes(g) if isinstance(g, FunctionOracle) else g
    values = {sigma0: source.value(sigma0)}
    cases: dict[str, tuple] = {}
    flags: list[dict] = []
    frontier = [sigma0]
    for _ in range(depth):
        nxt = []
        for tau in frontier:
            m = values[tau]
            s_tau = source.value(tau)
            if s_tau <= threshold and m > 0:
                flags.append({"node": tau, "slope": str(s_tau), "issue": "slope not above threshold"})
            if m == 0:
                values[tau + "0"] = values[tau + "1"] = Fraction(0)
                cases[tau] = ("stopped",)
            else:
                for v in "01":
                    if abs(source.entry(tau + v, 1) - source.value(tau + v)) > Fraction(1, 2):
                        raise ContractViolation("Cauchy entry more than 1/2 from the slope",
                                                node=tau + v)
                small = [u for u in (0, 1) if source.entry(tau + str(1 - u), 1) < 1]
                if small:
                    u = small[0]
                    values[tau + str(u)] = 2 * m
                    values[tau + str(1 - u)] = Fraction(0)
                    cases[tau] = ("double", u)
                else:
                    if s_tau <= 0:
                        raise ContractViolation("Case 2 reached with nonpositive slope", node=tau)
                    for u in "01":
                        values[tau + u] = m * source.value(tau + u) / s_tau
                    cases[tau] = ("ratio",)
            nxt.extend((tau + "0", tau + "1"))
        frontier = nxt
    M = Martingale(values, sigma0, cases, flags)
    if M.fairness_violations():
        raise ContractViolation("slope source broke the martingale identity",
                                nodes=M.fairness_violations()[:5])
    return M


@dataclass(frozen=True)
class CapitalTrace:
    values: tuple[Fraction, ...]
    maximum: Fraction
    doublings: int
    oscillation: Fraction


def capital_trace(M: Martingale, path: str) -> CapitalTrace:
    """Capital along base + path, with the count of Case-1 doublings taken."""
    out = []
    doublings = 0
    tau = M.base
    out.append(M.values[tau])
    for bit in path:
        case = M.cases.get(tau)
        if case and case[0] == "double" and str(case[1]) == bit:
            doublings += 1
        tau += bit
        if tau not in M.values:
            raise ContractViolation("path leaves the materialized depth", node=tau)
        out.append(M.values[tau])
    return CapitalTrace(tuple(out), max(out), doublings, max(out) - min(out))
