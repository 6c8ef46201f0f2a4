"""Finite-precision probes of slopes, pseudo-derivatives and closed classes.

Nothing here decides differentiability of a real.  The probes compute exact
slopes over explicit finite grids and report one-sided bounds; every report
carries its grid so the numbers can be reproduced.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import floor
from typing import Optional, Sequence, Union

from .core_numeric import (
    ContractViolation,
    Dyadic,
    antichain_measure,
    interval_of_string,
    slope,
)
from .martingale import FunctionOracle

Item = Union[str, tuple]


class EmptyClassError(ContractViolation):
    """The class has no points left at the probed stage and resolution."""


def _half(k: int) -> Fraction:
    return Fraction(1, 1 << k)


@dataclass(frozen=True)
class PiClass:
    """A closed class given by a staged enumeration of its complement.

    ``schedule`` holds ``(stage, item)`` pairs; an item is a bit string (the
    open interval or cylinder it names) or an open rational interval
    ``(a, b)``.  ``ambient`` is ``"unit"`` for [0,1] or ``"cantor"``.
    """

    schedule: tuple = ()
    ambient: str = "unit"
    name: str = "E"

    @classmethod
    def from_items(cls, items: Sequence, ambient: str = "unit", name: str = "E",
                   stage: int = 0) -> "PiClass":
        return cls(tuple((stage, it) for it in items), ambient, name)

    def removed(self, s: int) -> list:
        return [item for t, item in self.schedule if t <= s]

    def last_stage(self) -> int:
        return max((t for t, _ in self.schedule), default=0)

    # ------------------------------------------------ unit interval view
    def open_intervals(self, s: int) -> list[tuple[Fraction, Fraction]]:
        out = []
        for item in self.removed(s):
            if isinstance(item, str):
                iv = interval_of_string(item)
                out.append((iv.left, iv.right))
            else:
                out.append((Fraction(item[0]), Fraction(item[1])))
        return out

    def components(self, s: int) -> list[tuple[Fraction, Fraction]]:
        """E_s as a sorted list of disjoint closed intervals (possibly points)."""
        merged: list[list[Fraction]] = []
        for a, b in sorted(self.open_intervals(s)):
            if merged and a < merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        comps = []
        cur = Fraction(0)
        for a, b in merged:
            if b <= cur:
                continue
            if a >= cur:
                if cur > 1:
                    break
                comps.append((cur, min(a, Fraction(1))))
            cur = max(cur, b)
        if cur <= 1:
            comps.append((cur, Fraction(1)))
        return [(c, d) for c, d in comps if c <= d]

    def intersect(self, lo, hi, s: int) -> list[tuple[Fraction, Fraction]]:
        lo, hi = Fraction(lo), Fraction(hi)
        out = []
        for c, d in self.components(s):
            a, b = max(c, lo), min(d, hi)
            if a <= b:
                out.append((a, b))
        return out

    def contains(self, x, s: int) -> bool:
        x = Fraction(x)
        return any(c <= x <= d for c, d in self.components(s))

    # ------------------------------------------------ Cantor space view
    def removed_strings(self, s: int) -> list[str]:
        return [it for it in self.removed(s) if isinstance(it, str)]

    def string_meets(self, sigma: str, s: int) -> bool:
        """Whether the cylinder [sigma] contains a point of E_s."""
        below = []
        for r in self.removed_strings(s):
            if sigma.startswith(r):
                return False
            if r.startswith(sigma):
                below.append(r)
        return antichain_measure(below) < _half(len(sigma))

    def measure(self, s: int) -> Fraction:
        if self.ambient == "cantor":
            return 1 - antichain_measure(self.removed_strings(s))
        return sum((d - c for c, d in self.components(s)), Fraction(0))


# ---------------------------------------------------------------- slope windows


@dataclass(frozen=True)
class SlopeWindow:
    """Grid of rationals around z at resolution 2^-resolution within h/2 of z."""

    z: Fraction
    h: Fraction
    resolution: int
    points: Optional[tuple] = None

    def grid(self) -> list[Fraction]:
        if self.points is not None:
            return sorted(Fraction(p) for p in self.points)
        step = _half(self.resolution)
        lo = self.z - self.h / 2
        hi = self.z + self.h / 2
        k = -((-lo) // step)
        out = []
        x = k * step
        while x <= hi:
            if x >= lo:
                out.append(x)
            x += step
        return out

    def pairs(self):
        g = self.grid()
        for a in g:
            if a > self.z:
                break
            for b in g:
                if b >= self.z and 0 < b - a <= self.h:
                    yield a, b


def _f(f: FunctionOracle, x, n: int) -> Fraction:
    return f(Fraction(x), n)


def slope_window_bounds(f: FunctionOracle, w: SlopeWindow, n: int = 40) -> tuple[Fraction, Fraction]:
    values = [slope(_f(f, b, n), _f(f, a, n), b, a) for a, b in w.pairs()]
    if not values:
        raise ContractViolation("slope window has no admissible pair", window=str(w))
    return min(values), max(values)


@dataclass
class DenjoyReport:
    z: Fraction
    scales: list
    bounds: list
    classification: str
    growth: list

    def to_json(self) -> dict:
        return {
            "z": str(self.z),
            "scales": [str(h) for h in self.scales],
            "bounds": [[str(lo), str(hi)] for lo, hi in self.bounds],
            "classification": self.classification,
        }


def denjoy_probe(f: FunctionOracle, z, scales: Sequence, extra_resolution: int = 3,
                 growth_base: int = 2) -> DenjoyReport:
    """Classify the trend of grid slope bounds over strictly decreasing scales.

    The growth schedule is growth_base^k at the k-th scale.  Labels:
    ``two-sided diverging`` if the last scale has hi >= schedule and
    lo <= -schedule, ``diverging-up`` if only hi keeps pace, ``converging``
    if hi - lo at the last scale is at most half of its value at the first
    scale (or zero throughout), and ``inconclusive`` otherwise.
    """
    z = Fraction(z)
    scales = [Fraction(h) for h in scales]
    if any(b >= a for a, b in zip(scales, scales[1:])):
        raise ValueError("scales must be strictly decreasing")
    bounds = []
    for h in scales:
        res = _scale_exponent(h) + extra_resolution
        bounds.append(slope_window_bounds(f, SlopeWindow(z, h, res)))
    k = len(scales) - 1
    schedule = Fraction(growth_base) ** k
    lo, hi = bounds[-1]
    width0 = bounds[0][1] - bounds[0][0]
    widthk = hi - lo
    growth = [bool(b[1] >= Fraction(growth_base) ** j) for j, b in enumerate(bounds)]
    if k >= 1 and hi >= schedule and lo <= -schedule:
        label = "two-sided diverging"
    elif k >= 1 and hi >= schedule:
        label = "diverging-up"
    elif widthk == 0 or (width0 > 0 and widthk * 2 <= width0):
        label = "converging"
    else:
        label = "inconclusive"
    return DenjoyReport(z, scales, bounds, label, growth)


def _scale_exponent(h: Fraction) -> int:
    """Least k >= 0 with 2^-k <= h."""
    k = 0
    while _half(k) > h:
        k += 1
    return k


def two_sided_slope_gap(f: FunctionOracle, z, eps, delta, resolution: int, n: int = 40) -> dict:
    """max |c - S_f(z - s, z + r)| over grid r, s in (0, delta], c the finest right slope."""
    z, eps, delta = Fraction(z), Fraction(eps), Fraction(delta)
    step = _half(resolution)
    offsets = [k * step for k in range(1, int(delta / step) + 1)]
    if not offsets:
        raise ContractViolation("grid too coarse for delta")
    r0 = offsets[0]
    c = slope(_f(f, z + r0, n), _f(f, z, n), z + r0, z)
    gap = Fraction(0)
    for r in offsets:
        for s in offsets:
            g = abs(c - slope(_f(f, z + r, n), _f(f, z - s, n), z + r, z - s))
            gap = max(gap, g)
    return {"c": c, "gap": gap, "within_eps": gap <= eps, "grid": resolution}


def oscillating_oracle(z, levels: int = 12) -> FunctionOracle:
    """Piecewise linear f with f(z) = 0 and f(z +- 2^-k) = (-1)^k.

    The slope over [z, z + 2^-k] is (-1)^k 2^k and over [z - 2^-k, z] it is
    -(-1)^k 2^k, so slopes of both signs grow without bound near z.
    """
    z = Fraction(z)
    knots = {z: Fraction(0)}
    for k in range(levels + 1):
        knots[z + _half(k)] = Fraction((-1) ** k)
        knots[z - _half(k)] = Fraction(-((-1) ** k))
    xs = sorted(knots)

    def fn(x):
        if x <= xs[0]:
            return knots[xs[0]]
        if x >= xs[-1]:
            return knots[xs[-1]]
        for a, b in zip(xs, xs[1:]):
            if a <= x <= b:
                return knots[a] + (x - a) * (knots[b] - knots[a]) / (b - a)
        return Fraction(0)

    return FunctionOracle(lambda q, n: fn(q), markov_style=True, exact=True, name="oscillator")


# ---------------------------------------------------------------- classes E_{n,r,s} and C(p)


def first_entry_slope(f: FunctionOracle, a: Fraction, b: Fraction) -> Fraction:
    """Entry 0 of a Cauchy name for S_f(a, b): endpoints read to precision 1 + log(1/(b-a))."""
    k = 0
    while _half(k) > b - a:
        k += 1
    return slope(_f(f, b, k + 1), _f(f, a, k + 1), b, a)


def enrs_member(f: FunctionOracle, n: int, r, s, x, grid: Sequence) -> bool:
    """Grid check of x in E_{n,r,s}: every grid pair r <= a <= x <= b <= s has S_f(a,b)_0 > -n+1."""
    r, s, x = Fraction(r), Fraction(s), Fraction(x)
    pts = sorted(Fraction(g) for g in grid if r <= g <= s)
    for a in pts:
        if a > x:
            break
        for b in pts:
            if b >= x and b > a and first_entry_slope(f, a, b) <= -n + 1:
                return False
    return True


def lower_class_probe(f: FunctionOracle, p, z, t, resolution: int) -> dict:
    """Witnesses a <= z <= b, 0 < b - a <= t, on a dyadic grid, with S_f(a,b) < p and <= p."""
    w = SlopeWindow(Fraction(z), 2 * Fraction(t), resolution)
    strict = nonstrict = 0
    p = Fraction(p)
    for a, b in w.pairs():
        if b - a > t:
            continue
        v = slope(_f(f, b, 40), _f(f, a, 40), b, a)
        strict += v < p
        nonstrict += v <= p
    return {"p": p, "strict": strict, "nonstrict": nonstrict, "resolution": resolution}


def upper_class_probe(f: FunctionOracle, q, z, t, resolution: int) -> dict:
    """Witnesses with S_f(a,b) > q and >= q."""
    w = SlopeWindow(Fraction(z), 2 * Fraction(t), resolution)
    strict = nonstrict = 0
    q = Fraction(q)
    for a, b in w.pairs():
        if b - a > t:
            continue
        v = slope(_f(f, b, 40), _f(f, a, 40), b, a)
        strict += v > q
        nonstrict += v >= q
    return {"q": q, "strict": strict, "nonstrict": nonstrict, "resolution": resolution}


# ---------------------------------------------------------------- sup / inf over a class


def _raw_bound(h: FunctionOracle, E: PiClass, lo, hi, n: int, s: int, upper: bool) -> Optional[Fraction]:
    """One sweep of the computation tree at precision 2^-n against E_s, restricted to [lo, hi]."""
    if h.modulus is None:
        raise ContractViolation("sup/inf over a class needs a modulus of continuity", oracle=h.name)
    pieces = E.intersect(lo, hi, s)
    if not pieces:
        return None
    w = _half(h.modulus(n + 2))
    slack = _half(n + 1)
    best = None
    for c, d in pieces:
        k = floor(c / w)
        while k * w <= d:
            x = max(c, k * w)
            if x <= min(d, (k + 1) * w):
                v = h(x, n + 2)
                if upper:
                    b = -Dyadic.round_down(-(v + slack), n + 2).value
                    best = b if best is None else max(best, b)
                else:
                    b = Dyadic.round_down(v - slack, n + 2).value
                    best = b if best is None else min(best, b)
            k += 1
    return best


class ClassBounds:
    """Right-c.e. sup and left-c.e. inf approximations of h over E, memoized."""

    def __init__(self, h: FunctionOracle, E: PiClass, lo=0, hi=1):
        self.h, self.E, self.lo, self.hi = h, E, Fraction(lo), Fraction(hi)
        self._memo: dict = {}

    def _get(self, n: int, s: int, upper: bool):
        key = (n, s, upper)
        if key in self._memo:
            return self._memo[key]
        raw = _raw_bound(self.h, self.E, self.lo, self.hi, n, s, upper)
        if raw is None:
            raise EmptyClassError("class is empty at this stage", stage=s, region=(str(self.lo), str(self.hi)))
        cands = [raw]
        if n > 0:
            cands.append(self._get(n - 1, s, upper))
        if s > 0:
            cands.append(self._get(n, s - 1, upper))
        val = min(cands) if upper else max(cands)
        self._memo[key] = val
        return val

    def sup(self, n: int, s: int) -> Fraction:
        return self._get(n, s, True)

    def inf(self, n: int, s: int) -> Fraction:
        return self._get(n, s, False)


def pi_class_sup(h: FunctionOracle, E: PiClass, n: int, s: int) -> Dyadic:
    return Dyadic.from_fraction(ClassBounds(h, E).sup(n, s))


def pi_class_inf(h: FunctionOracle, E: PiClass, n: int, s: int) -> Dyadic:
    return Dyadic.from_fraction(ClassBounds(h, E).inf(n, s))


# ---------------------------------------------------------------- monotone extension


@dataclass(frozen=True)
class Segment:
    x0: Fraction
    x1: Fraction
    y0: Fraction
    y1: Fraction
    kind: str

    def at(self, x: Fraction) -> Fraction:
        if self.x1 == self.x0:
            return self.y0
        return self.y0 + (x - self.x0) * (self.y1 - self.y0) / (self.x1 - self.x0)


@dataclass
class Level:
    n: int
    p: int
    stage: int
    segments: list
    bridges: list


class MonotoneExtension:
    """Computable nondecreasing extension of h restricted to E, level by level.

    Level n searches delta = 2^-p, p = 0, 1, ..., with E read at stage p, for
    an n-fit partition.  Intervals inside a region bridged at an earlier level
    keep that bridge; intervals where the sup and inf approximations differ by
    less than 2^-n get the line (l_k, i_k) -> (l_{k+1}, s_k); the remaining
    runs miss E and are bridged linearly between their neighbours.  The
    returned value is the running maximum from the left of the level-n
    piecewise linear function, so each level is nondecreasing.
    """

    def __init__(self, h: FunctionOracle, E: PiClass, max_p: int = 14, stage_offset: int = 0):
        self.h, self.E, self.max_p, self.stage_offset = h, E, max_p, stage_offset
        self.levels: dict[int, Level] = {}

    def _treated(self, lo: Fraction, hi: Fraction, upto: int) -> Optional[Segment]:
        for m in range(upto):
            for seg in self.levels[m].bridges:
                if seg.x0 <= lo and hi <= seg.x1:
                    return seg
        return None

    def level(self, n: int) -> Level:
        if n in self.levels:
            return self.levels[n]
        for m in range(n):
            self.level(m)
        for p in range(self.max_p + 1):
            built = self._attempt(n, p)
            if built is not None:
                self.levels[n] = built
                return built
        raise ContractViolation("no n-fit partition found", level=n, max_p=self.max_p)

    def _attempt(self, n: int, p: int) -> Optional[Level]:
        s = p + self.stage_offset
        delta = _half(p)
        kinds = []
        for k in range(1 << p):
            lo, hi = k * delta, (k + 1) * delta
            seg = self._treated(lo, hi, n)
            if seg is not None:
                kinds.append(("treated", lo, hi, seg))
                continue
            pieces = self.E.intersect(lo, hi, s)
            if hi < 1:
                pieces = [(c, d) for c, d in pieces if c < hi]
            if not pieces:
                kinds.append(("gap", lo, hi, None))
                continue
            bounds = ClassBounds(self.h, self.E, lo, hi)
            i_k, s_k = bounds.inf(n + 4, s), bounds.sup(n + 4, s)
            if s_k - i_k >= _half(n):
                return None
            kinds.append(("fit", lo, hi, (i_k, s_k)))
        for a, b in zip(kinds, kinds[1:]):
            if a[0] == "fit" and b[0] == "fit" and not b[3][0] < a[3][1]:
                return None
        self._check_monotone(kinds, n)
        segments: list[Segment] = []
        for kind, lo, hi, data in kinds:
            if kind == "treated":
                segments.append(Segment(lo, hi, data.at(lo), data.at(hi), "treated"))
            elif kind == "fit":
                segments.append(Segment(lo, hi, data[0], data[1], "fit"))
            else:
                segments.append(None)
        bridges = []
        k = 0
        while k < len(kinds):
            if segments[k] is not None:
                k += 1
                continue
            j = k
            while j < len(kinds) and segments[j] is None:
                j += 1
            left = segments[k - 1].y1 if k > 0 else None
            right = segments[j].y0 if j < len(kinds) else None
            if left is None and right is None:
                raise EmptyClassError("class is empty", stage=s)
            if left is None:
                left = right
            if right is None:
                right = left
            bridge = Segment(kinds[k][1], kinds[j - 1][2], left, right, "bridge")
            bridges.append(bridge)
            for t in range(k, j):
                lo, hi = kinds[t][1], kinds[t][2]
                segments[t] = Segment(lo, hi, bridge.at(lo), bridge.at(hi), "bridge")
            k = j
        return Level(n, p, s, segments, bridges)

    def _check_monotone(self, kinds, n: int) -> None:
        # For h nondecreasing on E, the inf over a later interval is at least the
        # sup over any earlier one, up to the approximation slack of both bounds.
        tol = _half(n + 2)
        top, where = None, None
        for kind, lo, hi, d in kinds:
            if kind != "fit":
                continue
            if top is not None and d[0] < top - tol:
                raise ContractViolation("h is not nondecreasing on E", left=str(where), right=str(lo))
            if top is None or d[1] > top:
                top, where = d[1], lo

    def raw_value(self, x, n: int) -> Fraction:
        x = Fraction(x)
        for seg in self.level(n).segments:
            if seg.x0 <= x <= seg.x1:
                return seg.at(x)
        raise ValueError("x outside [0,1]")

    def value(self, x, n: int) -> Fraction:
        x = Fraction(x)
        if not 0 <= x <= 1:
            raise ValueError("x outside [0,1]")
        best = None
        for seg in self.level(n).segments:
            if seg.x0 > x:
                break
            top = max(seg.y0, seg.at(min(x, seg.x1)))
            if seg.x1 <= x:
                top = max(top, seg.y1)
            best = top if best is None else max(best, top)
        return best


@lru_cache(maxsize=64)
def _extension(h: FunctionOracle, E: PiClass) -> MonotoneExtension:
    return MonotoneExtension(h, E)


def monotone_extension(h: FunctionOracle, E: PiClass, x, n: int) -> Fraction:
    return _extension(h, E).value(x, n)


# ---------------------------------------------------------------- porosity


@dataclass(frozen=True)
class PorosityWitness:
    alpha: Fraction
    beta: Fraction
    hole: tuple


def porosity_probe(E: PiClass, z, eps, alphas: Sequence, s: int, halvings: int = 6,
                   refinements: int = 3) -> dict:
    """Holes of length eps*beta inside (z - beta, z + beta) missing E_s.

    For each alpha, beta runs through alpha, alpha/2, ...; candidate holes are
    closed intervals [u, u + eps*beta] with u on a grid of step eps*beta,
    refined up to ``refinements`` times, scanned from the left inside [0,1].
    """
    z, eps = Fraction(z), Fraction(eps)
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0,1]")
    comps = E.components(s)
    witnesses = []
    missing = []
    for alpha in alphas:
        alpha = Fraction(alpha)
        found = None
        for j in range(halvings + 1):
            beta = alpha * _half(j)
            length = eps * beta
            lo, hi = max(z - beta, Fraction(0)), min(z + beta, Fraction(1))
            for r in range(refinements + 1):
                step = length * _half(r)
                u = -((-lo) // step) * step
                while u + length <= hi:
                    if lo <= u and u + length <= hi and (z - beta < u) and (u + length < z + beta):
                        if not any(c <= u + length and u <= d for c, d in comps):
                            found = PorosityWitness(alpha, beta, (u, u + length))
                            break
                    u += step
                if found:
                    break
            if found:
                break
        if found:
            witnesses.append(found)
        else:
            missing.append(alpha)
    return {"witnesses": witnesses, "missing": missing, "stage": s}
