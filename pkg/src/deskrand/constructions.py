"""Stage-by-stage replays of four constructions with their invariants checked.

Every construction returns a :class:`ConstructionRun` holding an event log of
``(stage, action, data)`` records and a list of invariant checks, each tagged
with the stage at which it was made.  Inputs that would need arbitrary
programs (functionals, partial computable functions) are supplied as scripts
of convergence events; the engine never executes code from a script.
"""

from __future__ import annotations

import heapq
import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from bisect import bisect_left
from itertools import count
from typing import Callable, Optional, Sequence

from .core_numeric import ContractViolation, encode_tuple, pair, unpair
from .machines import INFINITY, UniversalMachine, solovay_h, standard_registry
from .metric import CauchyName, validate_cauchy_name


@dataclass
class ConstructionRun:
    construction: str
    horizon: int
    events: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    state: dict = field(default_factory=dict)

    def log(self, stage: int, action: str, **data) -> None:
        self.events.append({"stage": stage, "action": action, "data": data})

    def check(self, stage: int, name: str, ok: bool, **detail) -> bool:
        record = {"stage": stage, "check": name, "ok": bool(ok)}
        if detail:
            record["detail"] = detail
        self.checks.append(record)
        return ok

    @property
    def ok(self) -> bool:
        return all(c["ok"] for c in self.checks)

    def failures(self) -> list[dict]:
        return [c for c in self.checks if not c["ok"]]

    def check_names(self) -> set[str]:
        return {c["check"] for c in self.checks}


# ---------------------------------------------------------------- markers


class MarkerArray:
    """A co-c.e. set given by its elements below a frontier f plus [f, inf).

    ``gamma(i)`` is the i-th element.  ``cut(i, s)`` removes [gamma(i), s)
    and sets the frontier to s.  Every marker j >= i changes position on such
    a cut, so the move count of marker j is the number of cuts at i <= j.
    """

    def __init__(self):
        self.elements: list[int] = []
        self.frontier = 0
        self.cuts: dict[int, int] = {}
        self.history: list[tuple[int, int, int]] = []
        # int value of the characteristic string up to and including elements[j]
        self._values: list[int] = []

    def gamma(self, i: int) -> int:
        if i < len(self.elements):
            return self.elements[i]
        return self.frontier + i - len(self.elements)

    def positions(self, k: int) -> list[int]:
        return [self.gamma(i) for i in range(k)]

    def materialize(self, s: int) -> None:
        """List every element below s explicitly."""
        while self.frontier < s:
            self._append(self.frontier)
            self.frontier += 1

    def _append(self, x: int) -> None:
        if self.elements:
            prev, val = self.elements[-1], self._values[-1]
            self._values.append((val << (x - prev)) | 1)
        else:
            self._values.append(1)
        self.elements.append(x)

    def cut(self, i: int, s: int) -> int:
        """A := A - [gamma(i), s); returns the number of listed elements removed."""
        old = self.gamma(i)
        if old >= s:
            raise ContractViolation("cut would not move the marker", marker=i, stage=s)
        removed = max(0, len(self.elements) - i)
        del self.elements[i:]
        del self._values[i:]
        self.frontier = s
        self.cuts[i] = self.cuts.get(i, 0) + 1
        self.history.append((s, i, old))
        return removed

    def moves(self, j: int) -> int:
        return sum(k for i, k in self.cuts.items() if i <= j)

    def contains(self, x: int) -> bool:
        if x >= self.frontier:
            return True
        k = bisect_left(self.elements, x)
        return k < len(self.elements) and self.elements[k] == x

    def last_index_below(self, n: int) -> int:
        return bisect_left(self.elements, n) - 1

    def g_word(self, j: int) -> int:
        """Length-lexicographic rank of the characteristic string ending at elements[j]."""
        if j < 0:
            return 0
        length = self.elements[j] + 1
        return (1 << length) - 1 + self._values[j]

    def g_string(self, n: int) -> str:
        """Longest prefix of A restricted to n that ends in 1."""
        return longest_prefix_ending_in_one("".join("1" if self.contains(x) else "0" for x in range(n)))


def longest_prefix_ending_in_one(alpha: str) -> str:
    k = alpha.rfind("1")
    return alpha[: k + 1]


# ---------------------------------------------------------------- weakly K-trivial set


def build_weakly_ktrivial(stages: int, U: Optional[UniversalMachine] = None, check_lag: int = 2,
                          full_checks: bool = True) -> ConstructionRun:
    """Co-c.e. set A with K(g(A restricted to n)) <= K(n) + c through movable markers.

    New minimal descriptions are read from the universal machine's stage
    snapshots.  A description of w appearing at stage t is processed once the
    stage exceeds w (the convention that stage-s computations output numbers
    below s); events that become eligible together are processed one per
    sub-stage in arrival order.  ``khat`` holds the complexities processed so
    far, the construction's view of K_s.
    """
    if U is None:
        U = UniversalMachine()
        standard_registry(U)
    M = U.reserve_machine("weak-ktrivial")
    c_M = M.reserved_constant
    A = MarkerArray()
    run = ConstructionRun("weakly-ktrivial", stages)
    khat: dict[int, int] = {}
    m_best: dict[int, int] = {}
    deferred: list = []
    order = count()
    queue: list = []
    worst = -INFINITY
    substages = 0
    for s in range(1, stages + 1):
        U.run_universal_stage(s)
        A.materialize(s)
        eligible = []
        while deferred and deferred[0][0] < s:
            w, o, i, code = heapq.heappop(deferred)
            eligible.append((o, w, i, code))
        for w, i, code in U.snapshots[s].new_minima:
            o = next(order)
            if w < s:
                eligible.append((o, w, i, code))
            else:
                heapq.heappush(deferred, (w, o, i, code))
        eligible.sort()
        processed = 0
        for o, w, i, code in eligible:
            if i >= khat.get(w, INFINITY):
                continue
            khat[w] = i
            processed += 1
            gi = A.gamma(i)
            if w > gi:
                removed = A.cut(i, s)
                run.log(s, "cut", marker=i, word=w, old=gi, removed=removed, substage=processed)
            j = A.last_index_below(w)
            word = A.g_word(j)
            M.add(code, word, s)
            if len(code) < m_best.get(word, INFINITY):
                m_best[word] = len(code)
            run.log(s, "declare", input=code, word=w, length=i, substage=processed)
        if processed > 1:
            substages += processed - 1
            run.log(s, "serialized", events=processed)
        if full_checks or s == stages:
            ok_gamma, bad = _gamma_large(A, khat, s)
            run.check(s, "gamma_K_large", ok_gamma, **({"marker": bad} if bad is not None else {}))
            pairs, gap = _maintain_pairs(A, khat, m_best, s)
            worst = max(worst, gap)
            run.check(s, "maintain_weak_K_triv[M]", gap <= 0, gap=gap if gap != -INFINITY else None)
            queue.append((s, pairs))
        while queue and queue[0][0] + check_lag <= s:
            t, pairs = queue.pop(0)
            _u_level_check(run, U, t, s, pairs, c_M)
    final = stages + check_lag
    U.run_universal_stage(final)
    for t, pairs in queue:
        _u_level_check(run, U, t, final, pairs, c_M)
    top = max(A.cuts, default=0) + 1
    moves = {j: A.moves(j) for j in range(top + 1)}
    bad = [j for j, k in moves.items() if k > 1 << (j + 1)]
    run.check(stages, "marker_moves", not bad, markers=bad)
    run.state = {
        "markers": [A.gamma(i) for i in range(12)],
        "moves": {str(j): k for j, k in moves.items()},
        "c_M": c_M,
        "measured_gap": None if worst == -INFINITY else worst,
        "processed": len(khat),
        "pending": len(deferred),
        "serialized_substages": substages,
    }
    run.machine = M
    run.markers = A
    run.khat = khat
    return run


def _gamma_large(A: MarkerArray, khat: dict, s: int):
    """For all i, w < s: gamma_i < w implies khat(w) > i."""
    suffix = [INFINITY] * (s + 1)
    for w in range(s - 1, -1, -1):
        suffix[w] = min(suffix[w + 1], khat.get(w, INFINITY))
    i = 0
    while True:
        gi = A.gamma(i)
        if gi + 1 >= s:
            return True, None
        if suffix[gi + 1] <= i:
            return False, i
        i += 1


def _maintain_pairs(A: MarkerArray, khat: dict, m_best: dict, s: int):
    """Pairs (word of g(A|n), least khat(n) among the n < s sharing it) and the worst M-level gap."""
    groups: dict[int, float] = {}
    elems = A.elements
    j = -1
    for n in range(s):
        while j + 1 < len(elems) and elems[j + 1] < n:
            j += 1
        k = khat.get(n)
        if k is not None and k < groups.get(j, INFINITY):
            groups[j] = k
    pairs = []
    worst = -INFINITY
    for j, best in groups.items():
        word = A.g_word(j)
        worst = max(worst, m_best.get(word, INFINITY) - best)
        pairs.append((word, best))
    return pairs, worst


def _u_level_check(run: ConstructionRun, U: UniversalMachine, t: int, at: int, pairs, c_M: int) -> None:
    worst = -INFINITY
    for word, bound in pairs:
        worst = max(worst, U.K(word, at) - bound)
    run.check(t, "maintain_weak_K_triv[U]", worst <= c_M,
              gap=None if worst == -INFINITY else worst, read_at=at, constant=c_M)


# ---------------------------------------------------------------- wtt chain


# Canonical indices are sums of 2^x, so elements beyond this bound cannot be materialized.
MAX_STRONG_ELEMENT = 1 << 24


def strong_index(finite: Sequence[int]) -> int:
    """Canonical index n with D_n = the given finite set: n = sum 2^x."""
    return sum(1 << x for x in set(finite))


def strong_set(n: int) -> list[int]:
    return [x for x in range(n.bit_length()) if n >> x & 1]


@dataclass
class WttChain:
    sets: list
    indices: list
    checkpoints: list

    def recover(self) -> str:
        bits = []
        for k in range(1, len(self.sets)):
            added = (set(self.sets[k]) - set(self.sets[k - 1])).pop()
            bits.append("1" if added % 2 == 0 else "0")
        return "".join(bits)

    def to_json(self) -> dict:
        return {"sets": [sorted(b) for b in self.sets], "indices": [str(n) for n in self.indices],
                "checkpoints": [str(m) for m in self.checkpoints]}


def build_wtt_weakly_ktrivial(A: str, k_max: int) -> WttChain:
    """B_{k+1} = B_k + {2 n_k} if A(k) = 1 else B_k + {2 n_k + 1}, with D_{n_k} = B_k.

    ``sets[0]`` is B_{-1} = {} and ``sets[k+1]`` is B_k.  Checkpoint m_k = 2 n_k
    is where B restricted to m_k equals D_{n_k}.
    """
    if len(A) < k_max + 1:
        raise ContractViolation("oracle not materialized far enough", need=k_max + 1, have=len(A))
    sets = [[]]
    indices, checkpoints = [], []
    for k in range(k_max + 1):
        B = sets[-1]
        if B and max(B) > MAX_STRONG_ELEMENT:
            raise ContractViolation("strong index too large to materialize", k=k,
                                    element_bits=max(B).bit_length())
        n = strong_index(B)
        if B and not n > max(B):
            raise ContractViolation("strong index not above the maximum", k=k)
        indices.append(n)
        checkpoints.append(2 * n)
        sets.append(sorted(B + [2 * n if A[k] == "1" else 2 * n + 1]))
    return WttChain(sets, indices, checkpoints)


# ---------------------------------------------------------------- jump traceable tree


def _power_exceeds(base: int, eps: Fraction, bound: int) -> bool:
    """base^(1+eps) > bound, decided exactly with eps = p/q."""
    p, q = eps.numerator, eps.denominator
    return base ** (p + q) > bound ** q


def _power_at_least(base: int, eps: Fraction, bound: int) -> bool:
    p, q = eps.numerator, eps.denominator
    return base ** (p + q) >= bound ** q


def delta_sequence(eps, length: int) -> list[int]:
    """Pointwise least increasing delta with delta(n)^(1+eps) > 2^(n+1) sum_{i<=n} delta(i)."""
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    out: list[int] = []
    total = 0
    for n in range(length):
        d = out[-1] + 1 if out else 1
        while not _power_exceeds(d, eps, (1 << (n + 1)) * (total + d)):
            d += 1
        out.append(d)
        total += d
    return out


def block_of(m: int, delta: Sequence[int]) -> Optional[int]:
    """n with delta(n) <= m < delta(n+1), or None outside the computed range."""
    for n in range(len(delta) - 1):
        if delta[n] <= m < delta[n + 1]:
            return n
    return None


@dataclass(frozen=True)
class Convergence:
    """Phi^X(m) = output for every oracle X extending prefix, from stage onwards."""

    prefix: str
    m: int
    output: int
    stage: int



def random_functionals(seed: int, count: int = 3, per_functional: int = 40, stages: int = 1000,
                       m_max: int = 120) -> list[list[Convergence]]:
    """Seeded scripted convergences; the seed only shapes the inputs."""
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        script = []
        for _ in range(per_functional):
            length = rng.randint(2, 9)
            prefix = format(rng.getrandbits(length), f"0{length}b")
            script.append(Convergence(prefix, rng.randint(0, m_max), rng.randint(0, 5),
                                      rng.randint(1, stages)))
        out.append(sorted(script, key=lambda c: (c.stage, c.m, c.prefix)))
    return out

class EmbeddingTree:
    """T_s as a composition of collapses: T_s = r_1 o ... o r_s.

    A collapse (alpha, sigma) with alpha a prefix of sigma maps alpha + rho to
    sigma + rho and fixes strings not extending alpha; composing such maps
    keeps T order- and incomparability-preserving.
    """

    def __init__(self):
        self.collapses: list[tuple[str, str]] = []

    def __call__(self, rho: str) -> str:
        for alpha, sigma in reversed(self.collapses):
            if rho.startswith(alpha):
                rho = sigma + rho[len(alpha):]
        return rho

    def collapse(self, alpha: str, sigma: str) -> None:
        if not sigma.startswith(alpha) or sigma == alpha:
            raise ContractViolation("collapse needs a proper extension", alpha=alpha, sigma=sigma)
        self.collapses.append((alpha, sigma))

    def embedding_failures(self, depth: int) -> list[tuple[str, str]]:
        nodes = [format(k, f"0{L}b") if L else "" for L in range(depth + 1) for k in range(1 << L)]
        image = {x: self(x) for x in nodes}
        bad = []
        for a in nodes:
            for b in nodes:
                if a == b:
                    continue
                ta, tb = image[a], image[b]
                if b.startswith(a):
                    if not (tb.startswith(ta) and ta != tb):
                        bad.append((a, b))
                elif not a.startswith(b):
                    if ta.startswith(tb) or tb.startswith(ta):
                        bad.append((a, b))
        return bad


def _find_node(T: EmbeddingTree, prefix: str, min_len: int, depth: int) -> Optional[str]:
    """Least sigma (length, then lex) with |sigma| >= min_len and prefix <= T(sigma)."""
    frontier = [""]
    found = None
    while frontier:
        nxt = []
        for sigma in frontier:
            image = T(sigma)
            if image.startswith(prefix):
                cand = sigma + "0" * max(0, min_len - len(sigma))
                if found is None or (len(cand), cand) < (len(found), found):
                    found = cand
                continue
            if prefix.startswith(image) and len(sigma) < depth:
                nxt.extend((sigma + "0", sigma + "1"))
        frontier = nxt
    return found


def build_jump_traceable_tree(eps, functionals: Sequence[Sequence[Convergence]], stages: int,
                              depth: int = 10, delta_length: int = 12) -> ConstructionRun:
    """Collapse T so that values of Phi_e on block n come from a single node of level n.

    Each stage at most one convergence acts: the first (e, script order) whose
    prefix lies on the image of some sigma with |sigma| > n but not already on
    T_s(sigma restricted to n).  The value enters U^e_m.  Functional e only
    traces blocks n >= e.
    """
    eps = Fraction(eps)
    delta = delta_sequence(eps, delta_length)
    run = ConstructionRun("jump-traceable-tree", stages)
    for n in range(len(delta)):
        lhs_ok = _power_exceeds(delta[n], eps, (1 << (n + 1)) * sum(delta[: n + 1]))
        run.check(0, "delta_inequality", lhs_ok, n=n, delta=delta[n])
    T = EmbeddingTree()
    traces: dict[int, dict[int, set]] = {e: {} for e in range(len(functionals))}
    done: set = set()
    pending = []
    for e, script in enumerate(functionals):
        for k, conv in enumerate(script):
            if conv.stage > stages:
                pending.append((e, k))
    if pending:
        run.log(0, "pending", entries=[list(p) for p in pending])
    for s in range(1, stages + 1):
        acted = False
        for e, script in enumerate(functionals):
            if acted:
                break
            for k, conv in enumerate(script):
                if conv.stage > s or (e, k) in done:
                    continue
                n = block_of(conv.m, delta)
                if n is None or n < e:
                    done.add((e, k))
                    continue
                sigma = _find_node(T, conv.prefix, n + 1, depth)
                if sigma is None:
                    continue
                alpha = sigma[:n]
                if T(alpha).startswith(conv.prefix):
                    done.add((e, k))
                    continue
                T.collapse(alpha, sigma)
                traces[e].setdefault(conv.m, set()).add(conv.output)
                done.add((e, k))
                run.log(s, "collapse", e=e, m=conv.m, block=n, node=alpha, target=sigma,
                        output=conv.output)
                acted = True
                bound = delta[n] * (1 << (n + 1))
                size = len(traces[e][conv.m])
                run.check(s, "trace_bound", size <= bound and _power_at_least(conv.m, eps, bound),
                          e=e, m=conv.m, size=size, bound=bound)
                break
        if acted:
            bad = T.embedding_failures(min(depth, 6))
            run.check(s, "embedding", not bad, failures=len(bad))
    bad = T.embedding_failures(min(depth, 7))
    run.check(stages, "embedding", not bad, failures=len(bad))
    for e, tr in traces.items():
        for m, vals in tr.items():
            n = block_of(m, delta)
            bound = delta[n] * (1 << (n + 1))
            run.check(stages, "trace_bound_final", len(vals) <= bound and _power_at_least(m, eps, bound),
                      e=e, m=m, size=len(vals))
    run.state = {
        "delta": delta,
        "collapses": [list(c) for c in T.collapses],
        "traces": {str(e): {str(m): sorted(v) for m, v in sorted(tr.items())} for e, tr in traces.items()},
    }
    run.tree = T
    run.traces = traces
    return run


# ---------------------------------------------------------------- K-trivial point trees


def solovay_bound(U: UniversalMachine, constant: int) -> Callable[[int], int]:
    """h(r) = solovay_h(r) + constant, memoized."""
    memo: dict[int, int] = {}

    def h(r: int) -> int:
        if r not in memo:
            memo[r] = solovay_h(U, r) + constant
        return memo[r]
    return h


def neighbours(space, p: int, level: int, index_bound: int) -> list[int]:
    """Special points q != p with d(p, q) <= 2^-(level+1), indices below index_bound."""
    limit = Fraction(1, 1 << (level + 1))
    out = []
    for q in range(index_bound):
        if q != p and space.valid_index(q) and space.exact_distance(p, q) <= limit:
            out.append(q)
    return out


def build_ktrivial_point_trees(space, b: int, n_star: int, p_tilde: int, stages: int,
                               U: Optional[UniversalMachine] = None, max_level: int = 12,
                               index_bound: int = 64, check_lag: int = 2,
                               registry: Optional[dict] = None) -> ConstructionRun:
    """Tree T of K-compressible Cauchy-name prefixes, its slow enumeration and a thin subtree G.

    A node is a tuple (p_{n*}, ..., p_v) of special point indices sitting at
    level v.  It lies in T_s when p_{n*} = p_tilde, every item satisfies
    K_s(<p_i, i>) <= h(i) + b and consecutive items are within 2^-(i+1).
    T-tilde adds the least new child (by tuple code) once per stage.  A new
    leaf with a label not yet present at its level of G is copied into G below
    the G-node matching its parent, and the U-description of <p, n> becomes an
    input of the machine L describing the new G-node.
    """
    if U is None:
        U = UniversalMachine()
        registry = standard_registry(U)
    if registry is None:
        registry = {m.name: m for m in U.registry}
    if "solovay" not in registry:
        raise ContractViolation("point trees need the Solovay machine of the registry")
    h = solovay_bound(U, registry["solovay"].reserved_constant)
    L = U.reserve_machine("point-tree-L")
    c_L = L.reserved_constant
    run = ConstructionRun("ktrivial-point-trees", stages)
    slow: set = {()}
    G: set = {()}
    present: dict[int, dict[int, tuple]] = {}
    described: dict[tuple, str] = {}
    used: set = set()
    neigh_memo: dict = {}

    def level_of(node: tuple) -> int:
        return n_star + len(node) - 1

    def qualifies(p: int, n: int, s: int) -> bool:
        return U.K(pair(p, n), s) <= h(n) + b

    def children(node: tuple) -> list[tuple]:
        if not node:
            return [(p_tilde,)]
        n = level_of(node)
        if n >= max_level:
            return []
        key = (node[-1], n)
        if key not in neigh_memo:
            neigh_memo[key] = neighbours(space, node[-1], n, index_bound)
        return [node + (q,) for q in neigh_memo[key]]

    for s in range(1, stages + 1):
        U.run_universal_stage(s)
        new = [c for node in slow for c in children(node)
               if c not in slow and qualifies(c[-1], level_of(c), s)]
        if new:
            tau = min(new, key=encode_tuple)
            slow.add(tau)
            n, p = level_of(tau), tau[-1]
            run.log(s, "leaf", node=list(tau), level=n)
            if p not in present.get(n, {}):
                parent = tau[:-1]
                if parent:
                    eta_bar = present[level_of(parent)][parent[-1]]
                else:
                    eta_bar = ()
                eta = eta_bar + (p,)
                w = U.shortest_description(pair(p, n), s)
                if w is None or len(w) > h(n) + b:
                    raise ContractViolation("no short description for a qualifying label", label=p, level=n)
                if w in used:
                    raise ContractViolation("description already used by L", input=w)
                L.add(w, encode_tuple(eta), s)
                used.add(w)
                described[eta] = w
                G.add(eta)
                present.setdefault(n, {})[p] = eta
                run.log(s, "grow", node=list(eta), input=w)
        _point_tree_checks(run, U, s, slow, G, present, described, used, h, b, n_star)
    final = stages + check_lag
    U.run_universal_stage(final)
    worst = -INFINITY
    for eta in G:
        if eta:
            n = level_of(eta)
            gap = U.K(encode_tuple(eta), final) - (h(n) + b)
            worst = max(worst, gap)
    run.check(stages, "G_compressible", worst <= c_L, worst=None if worst == -INFINITY else worst, c_L=c_L)
    for eta in sorted(G):
        if eta:
            padded = (eta[0],) * n_star + eta
            ok = not validate_cauchy_name(CauchyName(padded, space))
            run.check(stages, "cauchy_prefix", ok, node=list(eta))
    run.state = {
        "T_tilde": sorted(list(t) for t in slow),
        "G": sorted(list(t) for t in G),
        "c_L": c_L,
        "labels_per_level": {str(n): sorted(v) for n, v in sorted(present.items())},
    }
    run.machine = L
    run.G = G
    run.T_tilde = slow
    return run


def _point_tree_checks(run, U, s, slow, G, present, described, used, h, b, n_star) -> None:
    # every T-tilde node has a G-node of the same length with the same last label
    ok = all(not tau or tau[-1] in present.get(n_star + len(tau) - 1, {}) for tau in slow)
    run.check(s, "rhosimeta", ok)
    # every prefix of every G-node has an L-description of length <= h(level) + b
    good = True
    for eta in G:
        for m in range(1, len(eta) + 1):
            w = described.get(eta[:m])
            if w is None or len(w) > h(n_star + m - 1) + b:
                good = False
    run.check(s, "Lcompr", good)
    # an L-input describing <p, n> means p is at level n of G
    good = True
    for w in used:
        p, n = unpair(U.output[w])
        if p not in present.get(n, {}):
            good = False
    run.check(s, "Lprop", good)


def find_point_tree_witness(U: UniversalMachine, space, target: Callable[[int], int], b: int,
                            s: int, n_range: Sequence[int], index_bound: int = 64):
    """Least (n*, p) with d(p, target(n*)) <= 2^-n* and K_s(<p, n*>) <= K_s(n*) + b.

    ``target(n)`` is a special point within 2^-n of the point of interest.
    Uniqueness of the locally K-trivial point near p is not checked.
    """
    for n in n_range:
        if n < 2:
            continue
        centre = target(n)
        kn = U.K(n, s)
        for p in range(index_bound):
            if space.valid_index(p) and space.exact_distance(p, centre) <= Fraction(1, 1 << n):
                if U.K(pair(p, n), s) <= kn + b:
                    return n, p
    return None


# ---------------------------------------------------------------- BLR class


@dataclass
class BLRScript:
    """phi[i]: list of (input or None for any input, output, stage).
    q: list of (e, n, stage at which g_e(n) converges).
    gamma[e]: list of (prefix, n, from_stage, value); Gamma_e^X(n, s) is the
    value of the entry with the latest from_stage <= s whose prefix is a
    prefix of X, and 0 if there is none.
    """

    i_max: int
    phi: dict = field(default_factory=dict)
    q: list = field(default_factory=list)
    gamma: dict = field(default_factory=dict)

    def __post_init__(self):
        stages = [t for _, _, t in self.q]
        if len(stages) != len(set(stages)):
            raise ContractViolation("more than one g_e(n) converges at a stage", stages=stages)
        for e, n, _ in self.q:
            if not 0 <= e < n:
                raise ContractViolation("Q requirements need 0 <= e < n", e=e, n=n)

    def phi_value(self, i: int, x: int, s: int) -> Optional[int]:
        for inp, out, t in self.phi.get(i, ()):
            if (inp is None or inp == x) and t <= s:
                return out
        return None

    def gamma_value(self, e: int, X: str, n: int, s: int) -> int:
        best = None
        for k, (prefix, m, t, v) in enumerate(self.gamma.get(e, ())):
            if m == n and t <= s and X.startswith(prefix):
                if best is None or (t, k) >= best[0]:
                    best = ((t, k), v)
        return best[1] if best else 0


class _RStrategy:
    def __init__(self, i: int):
        self.i = i
        self.key = ("R", i)
        self.inputs = None
        self.outputs: list[str] = []
        self.decided = False

    def initialize(self, alphas: list[str]) -> None:
        self.inputs = list(alphas)
        self.outputs = [a + bit for a in alphas for bit in "01"]
        self.decided = False

    def act(self, script: BLRScript, s: int, P: list[str], run: ConstructionRun) -> bool:
        if self.decided:
            return False
        v = script.phi_value(self.i, len(self.inputs[0]), s)
        if v is None:
            return False
        keep = "1" if v == 0 else "0"
        self.outputs = [a + keep for a in self.inputs]
        self.decided = True
        run.log(s, "R_act", i=self.i, value=v, keep=keep)
        return True


class _QStrategy:
    def __init__(self, e: int, n: int):
        self.e, self.n = e, n
        self.key = ("Q", e, n)
        self.inputs = None
        self.outputs: list[str] = []
        self.level = 0
        self.guess: list[int] = []
        self.trace: set = set()

    def initialize(self, alphas: list[str]) -> None:
        self.inputs = list(alphas)
        self.outputs = list(alphas)
        self.level = 0
        self.guess = [-1] * len(alphas)
        self.trace = set()

    def _candidates(self, script: BLRScript, beta: str, P: list[str]) -> list[str]:
        cands = {beta}
        for prefix, m, _, _ in script.gamma.get(self.e, ()):
            if m == self.n and prefix.startswith(beta):
                cands.add(prefix)
        return sorted((g for g in cands if any(g.startswith(x) or x.startswith(g) for x in P)),
                      key=lambda g: (len(g), g))

    def act(self, script: BLRScript, s: int, P: list[str], run: ConstructionRun) -> bool:
        for j, beta in enumerate(self.outputs):
            for gamma in self._candidates(script, beta, P):
                v = script.gamma_value(self.e, gamma, self.n, s)
                if v != self.guess[j]:
                    old = list(self.outputs)
                    self.guess[j] = v
                    self.outputs = [gamma if k == j else b + "0" * (len(gamma) - len(b))
                                    for k, b in enumerate(self.outputs)]
                    self.level += 1
                    self.trace = {c for c in self.guess if c != -1}
                    extends = all(new.startswith(o) for new, o in zip(self.outputs, old))
                    run.log(s, "Q_redefine", e=self.e, n=self.n, j=j, value=v, level=self.level,
                            trace=sorted(self.trace))
                    run.check(s, "Q_extension_only", extends, e=self.e, n=self.n)
                    return True
        return False


def _priority_order(q_order: list, i_max: int) -> list:
    order, placed = [], 0
    for i in range(i_max):
        last = max((k for k, (e, n) in enumerate(q_order) if n <= i), default=-1)
        while placed <= last:
            order.append(("Q",) + q_order[placed])
            placed += 1
        order.append(("R", i))
    order.extend(("Q",) + q for q in q_order[placed:])
    return order


def build_blr_pi_class(script: BLRScript, stages: int) -> ConstructionRun:
    """Replay R_i (split, later keep one side) and Q_{e,n} (trace guesses) strategies."""
    run = ConstructionRun("blr-class", stages)
    strategies: dict = {("R", i): _RStrategy(i) for i in range(script.i_max)}
    q_order: list = []
    conv = {t: (e, n) for e, n, t in script.q}
    P = [""]
    traces: dict = {}
    index_changes: dict = {}
    order = _priority_order(q_order, script.i_max)
    for s in range(1, stages + 1):
        if s in conv:
            e, n = conv[s]
            strategies[("Q", e, n)] = _QStrategy(e, n)
            if ("R", n) in order:
                cut = order.index(("R", n))
                weaker = order[cut:]
                for key in weaker:
                    strategies[key].inputs = None
                run.log(s, "initialise", strategies=[list(k) for k in weaker])
            q_order.append((e, n))
            order = _priority_order(q_order, script.i_max)
            run.log(s, "priorities", order=[list(k) for k in order])
        alphas = [""]
        for key in order:
            strat = strategies[key]
            if key[0] == "R" and key[1] >= s:
                continue
            if strat.inputs != alphas:
                if strat.inputs is not None:
                    run.log(s, "reinitialise", strategy=list(key))
                strat.initialize(alphas)
            if strat.act(script, s, P, run):
                pass
            alphas = strat.outputs
            if key[0] == "Q":
                tk = (key[1], key[2])
                before = traces.get(tk)
                traces[tk] = set(strat.trace)
                if before is not None and before != traces[tk]:
                    index_changes[tk] = index_changes.get(tk, 0) + 1
                run.check(s, "trace_bound", len(strat.trace) <= 1 << key[2],
                          e=key[1], n=key[2], size=len(strat.trace))
        P = list(alphas)
        run.check(s, "P_nonempty", bool(P), width=len(P))
    run.state = {
        "P": P,
        "order": [list(k) for k in order],
        "traces": {f"{e},{n}": sorted(v) for (e, n), v in sorted(traces.items())},
        "index_changes": {f"{e},{n}": k for (e, n), k in sorted(index_changes.items())},
    }
    return run


# ---------------------------------------------------------------- scripts


def load_script(source) -> dict:
    """JSON script from a path, a JSON string or an already parsed dict."""
    if isinstance(source, dict):
        return source
    text = str(source)
    if text.lstrip().startswith("{"):
        return json.loads(text)
    with open(text) as fh:
        return json.load(fh)


def functionals_from_script(data: dict) -> list[list[Convergence]]:
    return [[Convergence(str(c[0]), int(c[1]), int(c[2]), int(c[3])) for c in script]
            for script in data.get("functionals", [])]


def blr_script_from(data: dict) -> BLRScript:
    phi = {int(i): [(None if x is None else int(x), int(v), int(t)) for x, v, t in entries]
           for i, entries in data.get("phi", {}).items()}
    q = [(int(e), int(n), int(t)) for e, n, t in data.get("q", [])]
    gamma = {int(e): [(str(p), int(n), int(t), int(v)) for p, n, t, v in entries]
             for e, entries in data.get("gamma", {}).items()}
    return BLRScript(int(data.get("i_max", 3)), phi, q, gamma)
