"""Prefix-free machines, Kraft-Chaitin compilation and a staged universal machine.

Words are natural numbers.  Bit strings are coded by their length-lexicographic
rank and tuples by iterated Cantor pairing (see :mod:`deskrand.core_numeric`).

The universal machine runs on one clock.  At stage ``s`` it lets machine
``e < s`` halt on inputs ``sigma`` with ``|sigma| < s`` whose own halting step
is at most ``s``; the combined input is ``0^e 1 sigma``.  With
``one_new_minimum_per_stage`` set, at most one halting computation that lowers
some ``K_s(w)`` is released per stage and any further one is held back to a
later stage in arrival order.  Constructions that need the one-event-per-stage
convention normally serialize events themselves instead (see
:mod:`deskrand.constructions`).
"""

from __future__ import annotations

import heapq
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Optional

from .core_numeric import (
    ContractViolation,
    nat_to_string,
    string_to_nat,
    triple,
    unpair,
    untriple,
)

INFINITY = float("inf")


class BudgetExceeded(ContractViolation):
    """A Kraft-Chaitin request would push the machine's weight above 1."""


@dataclass(frozen=True)
class KCRequest:
    length: int
    word: int


@dataclass(frozen=True)
class Entry:
    input: str
    word: int
    halt: int


Generator = Callable[[int], Iterable[tuple[str, int]]]
Hook = Callable[["UniversalMachine", "StageSnapshot"], None]


class MachineTable:
    """A staged prefix-free machine graph.

    Entries are added either directly (:meth:`add`) or through Kraft-Chaitin
    requests (:meth:`kc_extend`); the two styles are not mixed on one table.
    ``generator(s)`` may supply entries halting at step ``s`` and ``hook`` is
    called after every universal stage to let the machine react to it.
    """

    def __init__(self, id: int, name: str = "", generator: Optional[Generator] = None,
                 hook: Optional[Hook] = None):
        self.id = id
        self.name = name or f"M{id}"
        self.generator = generator
        self.hook = hook
        self.entries: dict[str, Entry] = {}
        self.weight = Fraction(0)
        self._prefixes: set[str] = set()
        self._free: Optional[list[str]] = None
        self._direct = False
        self._listeners: list[Callable[["MachineTable", Entry], None]] = []

    @property
    def reserved_constant(self) -> int:
        return self.id + 1

    def __repr__(self):
        return f"MachineTable(id={self.id}, name={self.name!r}, entries={len(self.entries)})"

    def _check_fits(self, sigma: str) -> None:
        if sigma in self._prefixes or any(sigma[:k] in self.entries for k in range(len(sigma) + 1)):
            raise ContractViolation(f"{self.name}: input {sigma!r} breaks prefix-freeness",
                                    machine=self.id, input=sigma)

    def _record(self, sigma: str, word: int, halt: int) -> Entry:
        entry = Entry(sigma, word, halt)
        self.entries[sigma] = entry
        for k in range(len(sigma)):
            self._prefixes.add(sigma[:k])
        self.weight += Fraction(1, 1 << len(sigma))
        for listener in self._listeners:
            listener(self, entry)
        return entry

    def add(self, sigma: str, word: int, halt: int) -> Entry:
        if self._free is not None:
            raise ContractViolation(f"{self.name}: direct entries on a Kraft-Chaitin machine")
        self._direct = True
        self._check_fits(sigma)
        if self.weight + Fraction(1, 1 << len(sigma)) > 1:
            raise BudgetExceeded(f"{self.name}: weight would exceed 1", machine=self.id)
        return self._record(sigma, word, halt)

    def kc_extend(self, request: KCRequest, halt: int = 0) -> str:
        """Assign a fresh input of the requested length (Kraft-Chaitin).

        The free part of Cantor space is kept as an antichain of strings with
        pairwise distinct lengths; a request of length l takes the longest free
        string of length <= l, extends it by zeros and frees the siblings
        passed on the way down.
        """
        if self._direct:
            raise ContractViolation(f"{self.name}: Kraft-Chaitin request on a direct machine")
        if self._free is None:
            self._free = [""]
        length = request.length
        if self.weight + Fraction(1, 1 << length) > 1:
            raise BudgetExceeded(f"{self.name}: request of length {length} exceeds the budget",
                                 machine=self.id, length=length, weight=str(self.weight))
        fitting = [t for t in self._free if len(t) <= length]
        tau = max(fitting, key=lambda t: (len(t), [-ord(c) for c in t]))
        self._free.remove(tau)
        for j in range(length - len(tau)):
            self._free.append(tau + "0" * j + "1")
        sigma = tau + "0" * (length - len(tau))
        self._record(sigma, request.word, halt)
        return sigma

    def complexity(self, word: int, stage: Optional[int] = None) -> float:
        """Shortest own-input for word among entries halting by stage."""
        best = INFINITY
        for e in self.entries.values():
            if e.word == word and (stage is None or e.halt <= stage) and len(e.input) < best:
                best = len(e.input)
        return best


@dataclass(frozen=True)
class StageSnapshot:
    stage: int
    omega: Fraction
    domain_size: int
    new_halts: tuple[tuple[str, int], ...]
    new_minima: tuple[tuple[int, int, str], ...]
    held_back: int

    def to_json(self) -> dict:
        return {
            "stage": self.stage,
            "omega": f"{self.omega.numerator}/{self.omega.denominator}",
            "domain_size": self.domain_size,
            "new_halts": [[c, w] for c, w in self.new_halts],
            "new_minima": [[w, k, c] for w, k, c in self.new_minima],
            "held_back": self.held_back,
        }


class UniversalMachine:
    def __init__(self, one_new_minimum_per_stage: bool = False):
        self.registry: list[MachineTable] = []
        self.one_new_minimum_per_stage = one_new_minimum_per_stage
        self.stage = -1
        self.snapshots: list[StageSnapshot] = []
        self.omega = Fraction(0)
        self.halt_stage: dict[str, int] = {}
        self.output: dict[str, int] = {}
        self.history: dict[int, list[tuple[int, int, str]]] = {}
        self._pending: list[tuple[int, int, int, str]] = []
        self._held: deque[tuple[int, str]] = deque()
        self._order = 0
        self.run_universal_stage(0)

    # ------------------------------------------------------------ registry
    def reserve_machine(self, name: str = "", generator: Optional[Generator] = None,
                        hook: Optional[Hook] = None) -> MachineTable:
        machine = MachineTable(len(self.registry), name, generator, hook)
        machine._listeners.append(self._on_entry)
        self.registry.append(machine)
        return machine

    def code_of(self, machine: MachineTable, sigma: str) -> str:
        return "0" * machine.id + "1" + sigma

    def decode(self, code: str) -> tuple[int, str]:
        e = code.index("1")
        return e, code[e + 1:]

    def _on_entry(self, machine: MachineTable, entry: Entry) -> None:
        visible = max(machine.id + 1, len(entry.input) + 1, entry.halt, self.stage + 1)
        self._order += 1
        heapq.heappush(self._pending, (visible, self._order, machine.id, entry.input))

    # ------------------------------------------------------------ clock
    def run_universal_stage(self, s: int) -> StageSnapshot:
        """Advance the clock through stage s and return the stage-s snapshot."""
        while self.stage < s:
            self._step()
        return self.snapshots[s]

    def run(self, stages: int) -> StageSnapshot:
        return self.run_universal_stage(stages)

    def _current_k(self, word: int) -> float:
        h = self.history.get(word)
        return h[-1][1] if h else INFINITY

    def _step(self) -> None:
        s = self.stage + 1
        self.stage = s
        for machine in self.registry:
            if machine.generator is not None:
                for sigma, word in machine.generator(s):
                    machine.add(sigma, word, s)
        arrivals = []
        while self._pending and self._pending[0][0] <= s:
            _, _, e, sigma = heapq.heappop(self._pending)
            arrivals.append((e, sigma))
        candidates = list(self._held) + arrivals
        self._held = deque()
        new_halts, new_minima = [], []
        lowered = False
        for e, sigma in candidates:
            entry = self.registry[e].entries[sigma]
            code = "0" * e + "1" + sigma
            lowers = len(code) < self._current_k(entry.word)
            if lowers and lowered and self.one_new_minimum_per_stage:
                self._held.append((e, sigma))
                continue
            self.halt_stage[code] = s
            self.output[code] = entry.word
            self.omega += Fraction(1, 1 << len(code))
            new_halts.append((code, entry.word))
            if lowers:
                lowered = True
                self.history.setdefault(entry.word, []).append((s, len(code), code))
                new_minima.append((entry.word, len(code), code))
        if self.omega > 1:
            raise ContractViolation("Kraft sum of the universal domain exceeds 1", stage=s)
        snap = StageSnapshot(s, self.omega, len(self.halt_stage), tuple(new_halts),
                             tuple(new_minima), len(self._held))
        self.snapshots.append(snap)
        for machine in self.registry:
            if machine.hook is not None:
                machine.hook(self, snap)

    # ------------------------------------------------------------ queries
    def omega_at(self, s: int) -> Fraction:
        self.run_universal_stage(s)
        return self.snapshots[s].omega

    def domain_at(self, s: int) -> dict[str, int]:
        self.run_universal_stage(s)
        return {c: self.output[c] for c, t in self.halt_stage.items() if t <= s}

    def K(self, word: int, s: Optional[int] = None) -> float:
        if s is None:
            s = self.stage
        self.run_universal_stage(s)
        h = self.history.get(word)
        if not h:
            return INFINITY
        k = bisect_right(h, (s, INFINITY, "")) - 1
        return h[k][1] if k >= 0 else INFINITY

    def shortest_description(self, word: int, s: Optional[int] = None) -> Optional[str]:
        if s is None:
            s = self.stage
        h = self.history.get(word, [])
        k = bisect_right(h, (s, INFINITY, "")) - 1
        return h[k][2] if k >= 0 else None

    def described_words(self, s: Optional[int] = None) -> dict[int, int]:
        """Every word with finite K_s, mapped to K_s."""
        if s is None:
            s = self.stage
        out = {}
        for w, h in self.history.items():
            k = bisect_right(h, (s, INFINITY, "")) - 1
            if k >= 0:
                out[w] = h[k][1]
        return out


def K_stage(U: UniversalMachine, word: int, s: int) -> float:
    return U.K(word, s)


def run_universal_stage(U: UniversalMachine, s: int) -> StageSnapshot:
    return U.run_universal_stage(s)


def reserve_machine(U: UniversalMachine, name: str = "", **kwargs) -> MachineTable:
    return U.reserve_machine(name, **kwargs)


def kc_extend(machine: MachineTable, request: KCRequest, halt: int = 0) -> str:
    return machine.kc_extend(request, halt)


# ---------------------------------------------------------------- Solovay function


def solovay_h(U: UniversalMachine, r: int) -> int:
    """|sigma| if r codes <sigma, n, t> with t least such that U_t(sigma) = n, else r."""
    a, n, t = untriple(r)
    sigma = nat_to_string(a)
    if t > U.stage:
        U.run_universal_stage(t)
    if U.halt_stage.get(sigma) == t and U.output.get(sigma) == n:
        return len(sigma)
    return r


def solovay_code(sigma: str, n: int, t: int) -> int:
    return triple(string_to_nat(sigma), n, t)


@dataclass
class SolovayAudit:
    stage: int
    c_M: Optional[int]
    checked: int
    violations: list[dict]
    pending: list[int]
    equality_hits: dict[int, int]

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {"stage": self.stage, "c_M": self.c_M, "checked": self.checked,
                "passed": self.passed, "violations": self.violations,
                "pending": len(self.pending),
                "equality_hits": {str(n): k for n, k in sorted(self.equality_hits.items())}}


def solovay_audit(U: UniversalMachine, r_max: int, s: Optional[int] = None,
                  lag: int = 2) -> SolovayAudit:
    """Check K_s(r) <= h(r) + c_M for r <= r_max and collect equality hits.

    c_M is the reserved constant of the machine named "solovay".  An r that
    is still undescribed is a violation only when h(r) < r, since then the
    Solovay machine should already have described it; otherwise it is
    pending.  An equality hit is an n whose shortest description sigma, first
    halting at t, is unchanged since stage s - lag; then h(<sigma, n, t>)
    equals K_s(n).  Hits are collected for n <= r_max.
    """
    if s is None:
        s = U.stage
    U.run_universal_stage(s)
    machine = next((m for m in U.registry if m.name == "solovay"), None)
    c_M = machine.reserved_constant if machine is not None else None
    violations, pending = [], []
    for r in range(r_max + 1):
        h = solovay_h(U, r)
        k = U.K(r, s)
        if k == INFINITY:
            if h < r:
                violations.append({"r": r, "h": h, "K": None})
            else:
                pending.append(r)
        elif c_M is None or k > h + c_M:
            violations.append({"r": r, "h": h, "K": int(k)})
    hits = {}
    for n, k in U.described_words(s).items():
        if n > r_max:
            continue
        sigma = U.shortest_description(n, s)
        if sigma != U.shortest_description(n, max(s - lag, 0)):
            continue
        r = solovay_code(sigma, n, U.halt_stage[sigma])
        if solovay_h(U, r) == k:
            hits[n] = int(k)
    return SolovayAudit(s, c_M, r_max + 1, violations, pending, hits)


def count_compressible(U: UniversalMachine, n: int, b: int, s: int, horizon: int = 1 << 16) -> int:
    kn = U.K(n, s)
    if kn == INFINITY:
        return 0
    count = 0
    for w, k in U.described_words(s).items():
        p, m = unpair(w)
        if m == n and p <= horizon and k <= kn + b:
            count += 1
    return count


# ---------------------------------------------------------------- standard machines


def gamma_code(n: int) -> str:
    """Self-delimiting code 1^L 0 b where b is bin(n+1) without its leading 1."""
    b = bin(n + 1)[3:]
    return "1" * len(b) + "0" + b


def gamma_decode(code: str) -> int:
    L = code.index("0")
    return int("1" + code[L + 1: 2 * L + 1], 2) - 1


def number_generator(per_stage: int = 4, transform: Callable[[int], int] = lambda n: n) -> Generator:
    """Describe transform(n) by gamma_code(n), per_stage values of n per stage."""
    def gen(s: int):
        if s < 1:
            return []
        return [(gamma_code(n), transform(n)) for n in range((s - 1) * per_stage, s * per_stage)]
    return gen


def solovay_hook(machine_id_ref: list) -> Hook:
    """Machine of the Solovay bound: on sigma output <sigma, U(sigma), t>.

    The machine re-simulates U up to the halting stage t, so its own halting
    step is taken to be 2t.
    """
    def hook(U: UniversalMachine, snap: StageSnapshot):
        machine = U.registry[machine_id_ref[0]]
        for code, word in snap.new_halts:
            if code not in machine.entries:
                machine.add(code, solovay_code(code, word, snap.stage), 2 * snap.stage)
    return hook


def coding_theorem_hook(machine_id_ref: list) -> Hook:
    """Kraft-Chaitin machine turning pair descriptions of <p,n> into descriptions of n.

    Whenever Q_n = sum_p 2^-K_s(<p,n>) first reaches 2^-k it requests a
    description of n of length k + 1.  The total weight is at most Omega.
    """
    state: dict[int, int] = {}
    sums: dict[int, Fraction] = {}
    best: dict[int, int] = {}

    def hook(U: UniversalMachine, snap: StageSnapshot):
        machine = U.registry[machine_id_ref[0]]
        for word, length, _ in snap.new_minima:
            p, n = unpair(word)
            old = best.get(word)
            sums[n] = sums.get(n, Fraction(0)) + Fraction(1, 1 << length) - (
                Fraction(1, 1 << old) if old is not None else 0)
            best[word] = length
            q = sums[n]
            k = 0
            while Fraction(1, 1 << k) > q:
                k += 1
            if k < state.get(n, 1 << 30):
                state[n] = k
                machine.kc_extend(KCRequest(k + 1, n), snap.stage + 1)
    return hook


def standard_registry(U: UniversalMachine, per_stage: int = 4) -> dict[str, MachineTable]:
    """Five machines: scratch, numbers, powers of two, Solovay bound, coding theorem."""
    machines = {"scratch": U.reserve_machine("scratch")}
    machines["numbers"] = U.reserve_machine("numbers", generator=number_generator(per_stage))
    machines["powers"] = U.reserve_machine("powers", generator=number_generator(1, lambda k: 1 << k))
    ref = [len(U.registry)]
    machines["solovay"] = U.reserve_machine("solovay", hook=solovay_hook(ref))
    ref2 = [len(U.registry)]
    machines["coding"] = U.reserve_machine("coding", hook=coding_theorem_hook(ref2))
    return machines


# ---------------------------------------------------------------- plain complexity


class PlainUniversalMachine:
    """Plain (not prefix-free) analogue with the same dovetail schedule.

    Machines are generators of (input, word) pairs per stage; input strings of
    different machines are combined as 0^e 1 sigma, so C_s(w) counts that
    coding prefix as well.
    """

    def __init__(self):
        self.generators: list[Generator] = []
        self.stage = -1
        self.best: dict[int, list[tuple[int, int]]] = {}
        self._pending: list[tuple[int, int, int, str, int]] = []
        self._order = 0

    def register(self, generator: Generator) -> int:
        self.generators.append(generator)
        return len(self.generators) - 1

    def run(self, s: int) -> None:
        while self.stage < s:
            t = self.stage + 1
            self.stage = t
            for e, gen in enumerate(self.generators):
                for sigma, word in gen(t):
                    self._order += 1
                    visible = max(e + 1, len(sigma) + 1, t)
                    heapq.heappush(self._pending, (visible, self._order, e, sigma, word))
            while self._pending and self._pending[0][0] <= t:
                _, _, e, sigma, word = heapq.heappop(self._pending)
                length = e + 1 + len(sigma)
                h = self.best.setdefault(word, [])
                if not h or length < h[-1][1]:
                    h.append((t, length))

    def C(self, word: int, s: int) -> float:
        self.run(s)
        h = self.best.get(word, [])
        k = bisect_right(h, (s, INFINITY)) - 1
        return h[k][1] if k >= 0 else INFINITY

    def described_words(self, s: int) -> dict[int, int]:
        self.run(s)
        out = {}
        for w, h in self.best.items():
            k = bisect_right(h, (s, INFINITY)) - 1
            if k >= 0:
                out[w] = h[k][1]
        return out

