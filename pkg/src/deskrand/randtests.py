"""Staged randomness tests, Solovay ledgers and cost functions.

Open sets are finite sets of bit strings; their measure is computed exactly
with :func:`antichain_measure`.  Nothing here decides whether an infinite
sequence is random: every report is a finite-stage observation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Optional, Sequence

from .core_numeric import (
    ContractViolation,
    antichain_measure,
    binary_digits,
    format_rational,
    prefix_minimal,
    string_value,
    strings_of_length,
)
from .derivative import PiClass
from .martingale import FunctionOracle


def _half(k: int) -> Fraction:
    return Fraction(1, 1 << k)


def _union_measure(a: Iterable[str], b: Iterable[str]) -> Fraction:
    return antichain_measure(list(a) + list(b))


def measure_inside_class(strings: Iterable[str], P: PiClass, s: int) -> Fraction:
    """lambda([strings] intersected with P_s) for a Cantor-space class."""
    removed = P.removed_strings(s)
    return _union_measure(strings, removed) - antichain_measure(removed)


def _in_open(Z: str, strings: Iterable[str]) -> bool:
    """Whether Z lies in the open set; raises if Z is too short to tell."""
    undecided = False
    for sigma in strings:
        if Z.startswith(sigma):
            return True
        if sigma.startswith(Z):
            undecided = True
    if undecided:
        raise ContractViolation("sequence prefix too short to decide membership", length=len(Z))
    return False


# ---------------------------------------------------------------- Demuth tests


@dataclass
class DemuthTest:
    """Components S_m given by versions: S_m[t] is W_{g(m,t)} read at stage t.

    ``components`` maps a generator id to its staged enumeration, a list of
    ``(stage, string)`` pairs.
    """

    index_approx: Callable[[int, int], int]
    change_bound: Callable[[int], int]
    components: dict = field(default_factory=dict)

    def component(self, gid: int, t: int) -> list[str]:
        return [sigma for stage, sigma in self.components.get(gid, ()) if stage <= t]


@dataclass(frozen=True)
class DemuthVersion:
    m: int
    t: int
    generator: int
    strings: tuple
    changes: int
    measure: Fraction

    def to_json(self) -> dict:
        return {"m": self.m, "t": self.t, "generator": self.generator,
                "strings": list(self.strings), "changes": self.changes,
                "measure": format_rational(self.measure)}


def demuth_eval(test: DemuthTest, m: int, t: int) -> DemuthVersion:
    if t < 0:
        raise ValueError("stage must be nonnegative")
    changes = sum(1 for u in range(1, t + 1) if test.index_approx(m, u) != test.index_approx(m, u - 1))
    if changes > test.change_bound(m):
        raise ContractViolation("version changes exceed the bound", m=m, t=t, changes=changes)
    gid = test.index_approx(m, t)
    strings = tuple(prefix_minimal(test.component(gid, t)))
    mu = antichain_measure(strings)
    if mu > _half(m):
        raise ContractViolation("version measure exceeds 2^-m", m=m, t=t, measure=str(mu))
    return DemuthVersion(m, t, gid, strings, changes, mu)


@dataclass
class DemuthTrace:
    members: dict
    weak_pass: bool
    last_failure: Optional[int]

    def to_json(self) -> dict:
        return {"members": {str(m): v for m, v in self.members.items()},
                "weak_pass": self.weak_pass, "last_failure": self.last_failure}


def demuth_pass_trace(Z: str, test: DemuthTest, horizon: int, stage: int,
                      start: int = 1) -> DemuthTrace:
    """Membership of Z in the stage-``stage`` version of S_m for start <= m <= horizon.

    ``weak_pass`` says some observed component misses Z.  ``last_failure`` is
    the largest observed m with Z in S_m; passing for almost every m can only
    be suggested by it, never witnessed.
    """
    members = {m: _in_open(Z, demuth_eval(test, m, stage).strings) for m in range(start, horizon + 1)}
    fails = [m for m, inside in members.items() if inside]
    return DemuthTrace(members, any(not v for v in members.values()), max(fails) if fails else None)


def monotonized_version(test: DemuthTest, m: int, t: int, horizon: int) -> tuple[str, ...]:
    """Union of the versions of S_k for m < k <= horizon; measure at most 2^-m, nested in m."""
    out: list[str] = []
    for k in range(m + 1, horizon + 1):
        out.extend(demuth_eval(test, k, t).strings)
    return tuple(prefix_minimal(out))


# ---------------------------------------------------------------- difference tests


@dataclass
class DifferenceTest:
    """A Cantor-space class P with a staged family of open sets U_n[s]."""

    P: PiClass
    U: Callable[[int, int], Sequence[str]]

    def measure(self, n: int, s: int) -> Fraction:
        return measure_inside_class(self.U(n, s), self.P, s)

    def check(self, n: int, s: int) -> Fraction:
        mu = self.measure(n, s)
        if mu > _half(n):
            raise ContractViolation("difference test component too large", n=n, stage=s, measure=str(mu))
        return mu


def dyadic_prefix_interval(right: Fraction, n: int) -> list[str]:
    """Minimal prefix-free strings whose cylinders tile [0, right), right a multiple of 2^-n.

    With right = k 2^-n and k written with n bits, every 1 at position j
    contributes the string of the first j bits followed by 0.
    """
    k = int(right * (1 << n))
    if k >= 1 << n:
        return [""]
    bits = format(k, f"0{n}b") if n else ""
    return [bits[:j] + "0" for j in range(n) if bits[j] == "1"]


@dataclass(frozen=True)
class OmegaDifferenceReport:
    alpha: Fraction
    n: int
    i: Optional[int]
    right: Fraction
    strings: tuple
    measure: Fraction
    alpha_inside: bool

    def to_json(self) -> dict:
        return {"alpha": format_rational(self.alpha), "n": self.n, "i": self.i,
                "U": ["0", format_rational(self.right)], "measure": format_rational(self.measure),
                "alpha_inside": self.alpha_inside}


def difference_component(alpha, n: int) -> OmegaDifferenceReport:
    """P = [alpha, 1] and U_n = [0, (i+1) 2^-n) with i largest such that i 2^-n < alpha.

    For alpha = 0 no such i exists; U_n is then [0, 2^-n) and i is None.
    """
    alpha = Fraction(alpha)
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0,1]")
    if alpha == 0:
        i, right = None, _half(n)
    else:
        scaled = alpha * (1 << n)
        i = -(-scaled.numerator // scaled.denominator) - 1
        right = Fraction(i + 1, 1 << n)
    mu = max(Fraction(0), min(right, Fraction(1)) - alpha)
    if mu > _half(n):
        raise ContractViolation("difference component too large", n=n, alpha=str(alpha))
    return OmegaDifferenceReport(alpha, n, i, right, tuple(dyadic_prefix_interval(min(right, Fraction(1)), n)),
                                 mu, alpha < right)


def difference_test_omega(U, n: int, s: int) -> OmegaDifferenceReport:
    return difference_component(U.omega_at(s), n)


# ---------------------------------------------------------------- Solovay ledger


@dataclass(frozen=True)
class LedgerEntry:
    stage: int
    position: int
    string: str
    weight: Fraction
    later_hits: tuple


@dataclass
class SolovayTestLedger:
    entries: list = field(default_factory=list)
    budget: Optional[Fraction] = None

    @property
    def total_weight(self) -> Fraction:
        return sum((e.weight for e in self.entries), Fraction(0))

    def weight_by_position(self) -> dict[int, Fraction]:
        out: dict[int, Fraction] = {}
        for e in self.entries:
            out[e.position] = out.get(e.position, Fraction(0)) + e.weight
        return out

    def to_json(self) -> dict:
        return {
            "total_weight": format_rational(self.total_weight),
            "entries": [{"stage": e.stage, "position": e.position, "string": e.string,
                         "weight": format_rational(e.weight), "later_hits": list(e.later_hits)}
                        for e in self.entries],
        }


def _expansion_length(q: Fraction) -> int:
    return q.denominator.bit_length() - 1


def omega_change_test(U, horizon: int, budget: Optional[Fraction] = None) -> SolovayTestLedger:
    """Enumerate [Omega_s restricted to i+1] whenever bit i is the first bit to change at stage s."""
    omegas = [U.omega_at(s) for s in range(horizon + 1)]
    ledger = SolovayTestLedger(budget=budget)
    for s in range(1, horizon + 1):
        prev, cur = omegas[s - 1], omegas[s]
        if cur == prev:
            continue
        if cur >= 1:
            raise ContractViolation("halting probability reached 1", stage=s)
        length = max(_expansion_length(prev), _expansion_length(cur))
        a, b = binary_digits(prev, length), binary_digits(cur, length)
        i = next(k for k in range(length) if a[k] != b[k])
        if b[i] != "1":
            raise ContractViolation("halting probability decreased", stage=s)
        sigma = b[: i + 1]
        lo = string_value(sigma)
        hi = lo + _half(i + 1)
        hits = tuple(t for t in range(s, horizon + 1) if lo <= omegas[t] < hi)
        ledger.entries.append(LedgerEntry(s, i, sigma, _half(i + 1), hits))
    if budget is not None and ledger.total_weight > budget:
        raise ContractViolation("ledger weight exceeds the budget", weight=str(ledger.total_weight))
    return ledger


# ---------------------------------------------------------------- cost functions


@dataclass
class CostFunction:
    c: Callable[[int, int], Fraction]
    nonincreasing_in_x: bool = True
    nondecreasing_in_s: bool = True
    name: str = "c"

    def __call__(self, x: int, s: int) -> Fraction:
        v = Fraction(self.c(x, s))
        if v < 0:
            raise ContractViolation("negative cost", x=x, s=s)
        return v

    def check_flags(self, bound: int) -> list[tuple]:
        """Sampled pairs (x, s) with x < s <= bound where a flagged monotonicity fails."""
        bad = []
        for s in range(1, bound + 1):
            for x in range(s):
                if self.nonincreasing_in_x and x + 1 < s and self(x + 1, s) > self(x, s):
                    bad.append(("x", x, s))
                if self.nondecreasing_in_s and self(x, s + 1) < self(x, s):
                    bad.append(("s", x, s))
        return bad


def power_cost() -> CostFunction:
    return CostFunction(lambda x, s: _half(x), name="2^-x")


def measure_cost(G: dict) -> CostFunction:
    """c(m, s) = lambda G_{m,s} for staged string sets G[m] = [(stage, string), ...]."""
    def c(m, s):
        return antichain_measure([sigma for t, sigma in G.get(m, ()) if t <= s])
    return CostFunction(c, nonincreasing_in_x=False, name="measure")


def disjoint_witness_count(c: CostFunction, e: int, horizon: int) -> int:
    """Most pairwise disjoint intervals [x, s), x < s <= horizon, with c(x, s) >= 2^-e."""
    threshold = _half(e)
    count, free_from = 0, 0
    for s in range(1, horizon + 1):
        if any(c(x, s) >= threshold for x in range(free_from, s)):
            count += 1
            free_from = s
    return count


@dataclass
class CostReport:
    total: Fraction
    ledger: list
    benignity: dict

    def to_json(self) -> dict:
        return {"total": format_rational(self.total),
                "ledger": [{"x": x, "s": s, "cost": format_rational(v)} for x, s, v in self.ledger],
                "benignity": {str(e): v for e, v in self.benignity.items()}}


def cost_report(c: CostFunction, changes: Sequence[tuple[int, int]],
                bound: Optional[Callable[[int], int]] = None, e_max: int = 6,
                horizon: int = 32) -> CostReport:
    stages = [s for _, s in changes]
    if stages != sorted(stages):
        raise ValueError("changes must be sorted by stage")
    ledger = [(x, s, c(x, s)) for x, s in changes]
    total = sum((v for _, _, v in ledger), Fraction(0))
    benign = {}
    for e in range(e_max + 1):
        count = disjoint_witness_count(c, e, horizon)
        entry = {"count": count}
        if bound is not None:
            entry["bound"] = bound(e)
            entry["ok"] = count <= bound(e)
        benign[e] = entry
    return CostReport(total, ledger, benign)


# ---------------------------------------------------------------- bounded variation


@dataclass(frozen=True)
class BVTestReport:
    r: int
    n: int
    strings: tuple
    measure: Fraction
    variation: Fraction


@lru_cache(maxsize=64)
def _samples(f: FunctionOracle, n: int, precision: int) -> tuple[tuple, Fraction]:
    """Values of f on the grid k/2^n and their total variation; shared across r."""
    vals = tuple(f(Fraction(k, 1 << n), precision) for k in range((1 << n) + 1))
    variation = sum((abs(b - a) for a, b in zip(vals, vals[1:])), Fraction(0))
    return vals, variation


def bv_ml_test(f: FunctionOracle, r: int, n: int, variation_bound=1, precision: int = 64) -> BVTestReport:
    """G_{r,n}: length-n strings sigma with S_f over (sigma) above 2^r."""
    vals, variation = _samples(f, n, precision)
    if variation > variation_bound:
        raise ContractViolation("sampled variation exceeds the declared bound",
                                variation=str(variation), n=n)
    # slope (v' - v) * 2^n > 2^r, compared without dividing
    threshold = Fraction(1 << r, 1 << n) if r <= n else Fraction(1 << (r - n))
    chosen = tuple(sigma for k, sigma in enumerate(strings_of_length(n))
                   if vals[k + 1] - vals[k] > threshold)
    return BVTestReport(r, n, chosen, Fraction(len(chosen), 1 << n), variation)


def step_oracle(sigma: str, height=1) -> FunctionOracle:
    """Rises linearly by ``height`` across the interval of sigma and is flat elsewhere."""
    lo = string_value(sigma)
    hi = lo + _half(len(sigma))
    height = Fraction(height)

    def fn(x):
        if x <= lo:
            return Fraction(0)
        if x >= hi:
            return height
        return height * (x - lo) / (hi - lo)
    return FunctionOracle(lambda q, n: fn(q), markov_style=True, exact=True, name=f"step[{sigma}]")


# ---------------------------------------------------------------- porosity difference test


@dataclass
class PorosityTestReport:
    c: int
    n: int
    t: int
    levels: list
    measure_stage: Fraction
    node_checks: list

    @property
    def component(self) -> tuple:
        return tuple(self.levels[self.n])

    def to_json(self) -> dict:
        return {"c": self.c, "n": self.n, "t": self.t,
                "U": list(self.component), "measure": format_rational(self.measure_stage),
                "bound": format_rational((1 - _half(self.c + 2)) ** self.n)}


def porous_extensions(C: PiClass, sigma: str, c: int, t: int, max_len: int = 12) -> list[str]:
    """N_t(sigma) restricted to strings of length at most max_len."""
    found: list[str] = []
    span = 1 << c
    for L in range(len(sigma), max_len + 1):
        extra = L - len(sigma)
        base = int(sigma, 2) << extra if sigma else 0
        holes = [k for k in range(1 << extra)
                 if not C.string_meets(format(base + k, f"0{L}b") if L else "", t)]
        if not holes:
            continue
        ok = set()
        for h in holes:
            ok.update(range(max(0, h - span), min(1 << extra, h + span + 1)))
        for k in sorted(ok):
            rho = format(base + k, f"0{L}b") if L else ""
            if not any(rho.startswith(p) for p in found):
                found.append(rho)
    return sorted(found)


def porosity_difference_test(C: PiClass, c: int, n: int, t: int, max_len: int = 12,
                             check: bool = True) -> PorosityTestReport:
    """U_n[t] generated by B_{n,t}, iterating N_t from the empty string."""
    if c < 1:
        raise ValueError("c must be at least 1")
    factor = 1 - _half(c + 2)
    levels = [[""]]
    node_checks = []
    for _ in range(n):
        nxt: list[str] = []
        for sigma in levels[-1]:
            ext = porous_extensions(C, sigma, c, t, max_len)
            meeting = sum((_half(len(r)) for r in ext if C.string_meets(r, t)), Fraction(0))
            ok = meeting <= factor * _half(len(sigma))
            node_checks.append({"sigma": sigma, "meeting": meeting, "ok": ok})
            if check and not ok:
                raise ContractViolation("per-node bound fails", sigma=sigma, meeting=str(meeting))
            nxt.extend(ext)
        levels.append(sorted(set(nxt)))
    mu = measure_inside_class(levels[n], C, t)
    if check and mu > factor ** n:
        raise ContractViolation("level bound fails", n=n, measure=str(mu))
    return PorosityTestReport(c, n, t, levels, mu, node_checks)


def nested_union_failures(C: PiClass, c: int, n: int, t: int, max_len: int = 12) -> list[str]:
    """Strings of B_{n,t} with no prefix in B_{n,t+1}."""
    now = porosity_difference_test(C, c, n, t, max_len, check=False).levels[n]
    later = porosity_difference_test(C, c, n, t + 1, max_len, check=False).levels[n]
    return [rho for rho in now if not any(rho.startswith(p) for p in later)]


def sample_porous_classes() -> dict[str, PiClass]:
    """Five hand-built classes in Cantor space for the porosity test.

    Holes are placed at a fixed relative depth below every node of certain
    lengths, so each class is porous at its points with a known constant.
    """
    def holes(lengths, tail, stage_of=lambda k: 0):
        return [(stage_of(k), s + tail) for k in lengths for s in strings_of_length(k)]

    return {
        "holes-11": PiClass(tuple(holes((0, 2, 4, 6), "11")), "cantor", "holes-11"),
        "holes-11-staged": PiClass(tuple(holes((0, 2, 4, 6), "11", lambda k: k)), "cantor",
                                   "holes-11-staged"),
        "holes-01": PiClass(tuple(holes((0, 2, 4, 6), "01")), "cantor", "holes-01"),
        "full": PiClass((), "cantor", "full"),
        "right-half-removed": PiClass(((0, "1"),) + tuple(
            (0, "0" + s + "11") for k in (0, 2, 4) for s in strings_of_length(k)), "cantor",
            "right-half-removed"),
    }
