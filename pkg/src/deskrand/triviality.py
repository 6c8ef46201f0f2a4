"""K-triviality and incompressibility diagnostics at a fixed stage.

Every verdict here is relative to the stage ``s`` of the universal machine:
``K_s`` only decreases with ``s``, so a pass can turn into a fail later and
the reports keep the stage values on both sides of each inequality.

Words follow the conventions of :mod:`deskrand.machines`: the pair ``<p, n>``
is coded by Cantor pairing and a bit string by its length-lexicographic rank.
A function prefix is coded by :func:`sequence_word`, the rank of the
concatenated self-delimiting codes of its values; iterated pairing would make
the word doubly exponential in the length.

Distances to a point given by a Cauchy name prefix are only approximable.
``d(x, p) < r`` is *certified* when the approximation read from name entry
``k`` (with ``2^-k <= r/4``) plus its error is below ``r``, *excluded* when
the approximation minus the error is at least ``r``, and *marginal* otherwise.
For ``r = 2^-n`` this is the rule "approximation at precision n+2 below
2^-n - 2^-(n+2)".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence

from .core_numeric import pair, string_to_nat, unpair
from .machines import (
    INFINITY,
    MachineTable,
    PlainUniversalMachine,
    StageSnapshot,
    UniversalMachine,
    gamma_code,
    standard_registry,
)
from .metric import CauchyName, ComputableMap, SpaceDescriptor, apply_name

IN, MARGINAL, OUT = "in", "marginal", "out"


def _pow2(k: int) -> Fraction:
    return Fraction(1, 1 << k) if k >= 0 else Fraction(1 << -k)


def _fmt(k) -> Optional[int]:
    return None if k == INFINITY else int(k)


def _entry_for(radius: Fraction) -> int:
    """Least k with 2^-k <= radius / 4."""
    k = 0
    while _pow2(k) * 4 > radius:
        k += 1
    return k


def distance_status(space: SpaceDescriptor, x: CauchyName, p: int, radius: Fraction,
                    entry: Optional[int] = None) -> str:
    """Three-valued answer to ``d(x, p) < radius`` (see the module docstring)."""
    radius = Fraction(radius)
    if not x.entries:
        return MARGINAL
    k = _entry_for(radius) if entry is None else entry
    k = min(k, len(x.entries) - 1)
    err = _pow2(k)
    q = x.entries[k]
    if space.exact_distance is not None:
        approx = space.exact_distance(q, p)
    else:
        prec = k + 1
        approx = space.distance_approx(q, p, prec).value
        err += _pow2(prec)
    if approx + err < radius:
        return IN
    if approx - err >= radius:
        return OUT
    return MARGINAL


def ball_status(space: SpaceDescriptor, x: CauchyName, p: int, n: int) -> str:
    return distance_status(space, x, p, _pow2(n), entry=n + 2)


def _points(space: SpaceDescriptor, described: dict[int, int]) -> dict[int, int]:
    return {w: k for w, k in described.items() if space.valid_index(w)}


def _pairs_at(space: SpaceDescriptor, described: dict[int, int], n) -> dict[int, int]:
    """Special points p with a description of <p, n>, mapped to K_s(<p, n>)."""
    out = {}
    for w, k in described.items():
        p, m = unpair(w)
        if m == n and space.valid_index(p):
            out[p] = k
    return out


# ---------------------------------------------------------------- functions


def sequence_word(items: Sequence[int]) -> int:
    return string_to_nat("".join(gamma_code(x) for x in items))


@dataclass
class TrivialityReport:
    subject: str
    b: int
    stage: int
    margins: list[Optional[dict]]
    graph_margins: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not any(_failed(m) for m in self.margins)

    @property
    def graph_passed(self) -> bool:
        return not any(_failed(m) for m in self.graph_margins)

    @property
    def worst(self) -> Optional[float]:
        vals = [m["margin"] for m in self.margins if m is not None and m["K_n"] is not None]
        if not vals:
            return None
        return max(INFINITY if v is None else v for v in vals)

    def to_json(self) -> dict:
        return {
            "subject": self.subject,
            "b": self.b,
            "stage": self.stage,
            "passed": self.passed,
            "graph_passed": self.graph_passed,
            "margins": self.margins,
            "graph_margins": self.graph_margins,
        }


def _margin(U: UniversalMachine, word: int, n: int, b: int, s: int) -> dict:
    kw, kn = U.K(word, s), U.K(n, s)
    margin = None if INFINITY in (kw, kn) else int(kw - kn - b)
    return {"n": n, "K_prefix": _fmt(kw), "K_n": _fmt(kn), "margin": margin,
            "undescribed": kn != INFINITY and kw == INFINITY}


def graph_prefix(alpha: Sequence[int]) -> str:
    """Longest characteristic-string prefix of the graph that alpha determines.

    Position m = <k, y> is decided once k < |alpha|.
    """
    bits = []
    m = 0
    while True:
        k, y = unpair(m)
        if k >= len(alpha):
            return "".join(bits)
        bits.append("1" if alpha[k] == y else "0")
        m += 1


def ktrivial_check(alpha: Sequence[int], b: int, s: int, U: UniversalMachine,
                   graph: bool = True) -> TrivialityReport:
    """Margins K_s(alpha|n) - K_s(n) - b for n <= |alpha|.

    A margin is ``None`` when one side is still undescribed.  The verdict
    fails when some n with finite K_s(n) has a positive margin or a prefix
    that is not described yet.  With ``graph`` set the same margins are
    reported for the characteristic string of the graph {<n, alpha(n)>}.
    """
    alpha = list(alpha)
    margins = []
    for n in range(len(alpha) + 1):
        margins.append(_margin(U, sequence_word(alpha[:n]), n, b, s))
    report = TrivialityReport(f"alpha[:{len(alpha)}]", b, s, margins)
    if graph:
        bits = graph_prefix(alpha)
        for m in range(len(bits) + 1):
            report.graph_margins.append(_margin(U, string_to_nat(bits[:m]), m, b, s))
    return report


def _failed(m: dict) -> bool:
    return m["undescribed"] or (m["margin"] is not None and m["margin"] > 0)


def shadow_machine(U: UniversalMachine, transform: Callable[[int], Optional[int]],
                   name: str = "shadow") -> MachineTable:
    """Machine that on a U-description of w outputs transform(w).

    Entries halt one step after the description does, so
    K_{s+lag}(transform(w)) <= K_s(w) + the machine's reserved constant.
    Descriptions produced by the machine itself are not shadowed again.
    """
    ref: list[int] = []

    def hook(V: UniversalMachine, snap: StageSnapshot):
        machine = V.registry[ref[0]]
        for code, word in snap.new_halts:
            e, _ = V.decode(code)
            if e == ref[0] or code in machine.entries:
                continue
            out = transform(word)
            if out is not None:
                machine.add(code, out, snap.stage + 1)

    machine = U.reserve_machine(name, hook=hook)
    ref.append(machine.id)
    return machine


def zero_tuple_machine(U: UniversalMachine) -> MachineTable:
    """On a description of n output the n-tuple of zeros."""
    return shadow_machine(U, lambda n: sequence_word([0] * n) if n < 4096 else None, "zeros")


# ---------------------------------------------------------------- points


@dataclass
class LocalWitnessReport:
    n: object
    b: int
    stage: int
    K_n: Optional[int]
    witness: Optional[int]
    weak_witness: Optional[int]
    candidates: dict[int, dict]
    weak_candidates: dict[int, dict]

    @property
    def candidate_count(self) -> int:
        return len(self.candidates)

    def to_json(self) -> dict:
        return {
            "n": str(self.n),
            "b": self.b,
            "stage": self.stage,
            "K_n": self.K_n,
            "witness": self.witness,
            "weak_witness": self.weak_witness,
            "candidates": {str(p): c for p, c in sorted(self.candidates.items())},
            "weak_candidates": {str(p): c for p, c in sorted(self.weak_candidates.items())},
        }


def scale_word(scale) -> int:
    """Word standing for a scale: n itself, or <num, den> for a rational epsilon."""
    if isinstance(scale, int):
        return scale
    q = Fraction(scale)
    return pair(q.numerator, q.denominator)


def _local_search(space, x, scale, b, described, complexity_of_scale, mode):
    if mode == "dyadic-scale":
        radius, entry = _pow2(scale), scale + 2
    elif mode == "rational-scale":
        radius, entry = Fraction(scale), None
    else:
        raise ValueError(f"unknown mode {mode!r}")
    word = scale_word(scale)
    kn = complexity_of_scale(word)
    strict, weak = {}, {}
    if kn != INFINITY:
        for p, k in _pairs_at(space, described, word).items():
            if k <= kn + b:
                strict[p] = {"K": int(k), "status": distance_status(space, x, p, radius, entry)}
        for p, k in _points(space, described).items():
            if k <= kn + b:
                weak[p] = {"K": int(k), "status": distance_status(space, x, p, radius, entry)}

    def pick(cands):
        ok = [(c["K"], p) for p, c in cands.items() if c["status"] == IN]
        return min(ok)[1] if ok else None

    return kn, strict, weak, pick(strict), pick(weak)


def locally_ktrivial_witness(space: SpaceDescriptor, x: CauchyName, n, b: int, s: int,
                             U: UniversalMachine, mode: str = "dyadic-scale") -> LocalWitnessReport:
    """Special p with d(x, p) < 2^-n and K_s(<p, n>) <= K_s(n) + b.

    In ``rational-scale`` mode ``n`` is a rational epsilon, the radius is
    epsilon and the scale word is <num, den>.  The weak variant asks only
    K_s(p) <= K_s(n) + b.  Witnesses must be certified; marginal candidates
    are listed but never chosen.
    """
    described = U.described_words(s)
    kn, strict, weak, w, ww = _local_search(space, x, n, b, described, lambda w: U.K(w, s), mode)
    return LocalWitnessReport(n, b, s, _fmt(kn), w, ww, strict, weak)


def count_bound_constant(U: UniversalMachine) -> int:
    """c0 with #{p : K(<p,n>) <= K(n) + b} <= 2^(b + c0) once the coding machine caught up.

    The coding machine describes n with k + 1 bits as soon as the pair
    weight for n reaches 2^-k, hence c0 = its reserved constant + 2.
    """
    for machine in U.registry:
        if machine.name == "coding":
            return machine.reserved_constant + 2
    raise LookupError("no coding machine registered")


def point_complexity(space: SpaceDescriptor, z: CauchyName, n: int, s: int,
                     U: UniversalMachine) -> tuple[float, float]:
    """(K_s(z; n), K*_s(z; n)) over special points certified within 2^-n."""
    described = U.described_words(s)
    k_at = min((k for p, k in _pairs_at(space, described, n).items()
                if ball_status(space, z, p, n) == IN), default=INFINITY)
    k_star = min((k for p, k in _points(space, described).items()
                  if ball_status(space, z, p, n) == IN), default=INFINITY)
    return k_at, k_star


def _possible_complexity(space, z, n, described):
    """Like point_complexity but over points not excluded (certified or marginal)."""
    k_at = min((k for p, k in _pairs_at(space, described, n).items()
                if ball_status(space, z, p, n) != OUT), default=INFINITY)
    k_star = min((k for p, k in _points(space, described).items()
                  if ball_status(space, z, p, n) != OUT), default=INFINITY)
    return k_at, k_star


@dataclass
class IAReport:
    b: int
    stage: int
    rows: list[dict]
    strong_offenders: list[dict]
    strong_marginal: list[dict]

    @property
    def ia(self) -> bool:
        return all(r["ia"] for r in self.rows)

    @property
    def strong_ia(self) -> bool:
        return all(r["strong_ia"] for r in self.rows)

    @property
    def strong_form(self) -> bool:
        return not self.strong_offenders

    def to_json(self) -> dict:
        return {
            "b": self.b,
            "stage": self.stage,
            "ia": self.ia,
            "strong_ia": self.strong_ia,
            "strong_form": self.strong_form,
            "rows": self.rows,
            "strong_offenders": self.strong_offenders,
            "strong_marginal": self.strong_marginal,
        }


def ia_report(space: SpaceDescriptor, z: CauchyName, b: int, n_range: Iterable[int], s: int,
              U: UniversalMachine) -> IAReport:
    """Check K_s(z; n) > n - b and K*_s(z; n) > n - b for n in n_range.

    The strong form d(z, p) >= 2^(-K_s(p) - b) is checked separately over
    every described special point, using the deepest entry of z.  An
    offender is a point certified to be closer than that.
    """
    rows = []
    for n in n_range:
        k_at, k_star = point_complexity(space, z, n, s, U)
        rows.append({"n": n, "K_at": _fmt(k_at), "K_star": _fmt(k_star),
                     "ia": k_at > n - b, "strong_ia": k_star > n - b})
    offenders, marginal = [], []
    deepest = len(z.entries) - 1
    for p, k in sorted(_points(space, U.described_words(s)).items()):
        status = distance_status(space, z, p, _pow2(k + b), entry=deepest)
        if status == IN:
            offenders.append({"p": p, "label": space.label(p), "K": int(k)})
        elif status == MARGINAL:
            marginal.append({"p": p, "K": int(k)})
    return IAReport(b, s, rows, offenders, marginal)


@dataclass
class DescriptionTest:
    """Open set U_b: balls B(p, 2^(-K_s(p) - b - 1)) around described points."""

    b: int
    stage: int
    balls: list[tuple[int, int, Fraction]]
    weight: Fraction
    omega: Fraction

    @property
    def bound(self) -> Fraction:
        return _pow2(self.b) * self.omega

    @property
    def within_bound(self) -> bool:
        return self.weight <= self.bound

    def covers(self, space: SpaceDescriptor, z: CauchyName) -> Optional[int]:
        """A ball centre certified to lie within its radius of z, if any."""
        deepest = len(z.entries) - 1
        for p, _, radius in self.balls:
            if distance_status(space, z, p, radius, entry=deepest) == IN:
                return p
        return None

    def to_json(self) -> dict:
        return {
            "b": self.b,
            "stage": self.stage,
            "balls": [[p, k, f"{r.numerator}/{r.denominator}"] for p, k, r in self.balls],
            "weight": f"{self.weight.numerator}/{self.weight.denominator}",
            "bound": f"{self.bound.numerator}/{self.bound.denominator}",
            "within_bound": self.within_bound,
        }


def description_ml_test(space: SpaceDescriptor, b: int, s: int, U: UniversalMachine) -> DescriptionTest:
    if space.name not in ("UnitInterval", "CantorSpace"):
        raise ValueError("description test is defined on the unit interval and Cantor space")
    balls = []
    weight = Fraction(0)
    for p, k in sorted(_points(space, U.described_words(s)).items()):
        balls.append((p, int(k), _pow2(int(k) + b + 1)))
        weight += _pow2(int(k) + b)
    return DescriptionTest(b, s, balls, weight, U.omega_at(s))


# ---------------------------------------------------------------- Lipschitz transfer


def _preimage_search(F: ComputableMap, q: int, radius: Fraction, bound: int,
                     images: dict[int, int]) -> Optional[int]:
    dist = F.target.exact_distance
    order = [q] if F.source.valid_index(q) else []
    order += [p for p in range(bound) if p != q]
    for p in order:
        if not F.source.valid_index(p):
            continue
        if p not in images:
            images[p] = F.point_map(p)
        fp = images[p]
        d = dist(fp, q) if dist is not None else F.target.distance_approx(fp, q, 64).value
        if d < radius:
            return p
    return None


def lipschitz_machine(U: UniversalMachine, F: ComputableMap, search_bound: int = 256,
                      n_max: int = 24) -> MachineTable:
    """Machine L: on a description tau of <q, n>, find p with d(F(p), q) < 2^-n and output <p, n-v-1>.

    Only n in [v+1, n_max] are handled; a search that exhausts
    ``search_bound`` source points is recorded in ``L.inconclusive`` and the
    entry is not made.
    """
    v = F.inverse_lipschitz_exponent
    ref: list[int] = []
    images: dict[int, int] = {}

    def hook(V: UniversalMachine, snap: StageSnapshot):
        machine = V.registry[ref[0]]
        for code, word in snap.new_halts:
            e, _ = V.decode(code)
            if e == ref[0] or code in machine.entries:
                continue
            q, n = unpair(word)
            if not (v + 1 <= n <= n_max) or not F.target.valid_index(q):
                continue
            p = _preimage_search(F, q, _pow2(n), search_bound, images)
            if p is None:
                machine.inconclusive.append({"code": code, "q": q, "n": n, "stage": snap.stage})
                continue
            machine.add(code, pair(p, n - v - 1), snap.stage + 1)

    machine = U.reserve_machine("lipschitz", hook=hook)
    machine.inconclusive = []
    ref.append(machine.id)
    return machine


@dataclass
class TransferReport:
    v: int
    c_L: int
    stage: int
    lag: int
    rows: list[dict]
    inconclusive: list[dict]

    @property
    def holds(self) -> bool:
        return all(r["status"] != "fails" for r in self.rows)

    def to_json(self) -> dict:
        return {"v": self.v, "c_L": self.c_L, "stage": self.stage, "lag": self.lag,
                "holds": self.holds, "rows": self.rows, "inconclusive": self.inconclusive}


def lipschitz_transfer_check(F: ComputableMap, z: CauchyName, n_range: Iterable[int], s: int,
                             U: Optional[UniversalMachine] = None, L: Optional[MachineTable] = None,
                             setup: Optional[Callable[[UniversalMachine], None]] = None,
                             lag: int = 2, search_bound: int = 256) -> TransferReport:
    """Verify K_s(z; n-v-1) <= K_{s-lag}(F(z); n) + c_L per n.

    Without ``U`` a fresh machine with the standard registry and L is built;
    ``setup`` may register scripted machines on it before it runs.  Each row
    is ``holds`` (certified), ``fails`` (certainly violated) or
    ``inconclusive`` (the answer depends on marginal distances).
    """
    v = F.inverse_lipschitz_exponent
    if v is None:
        raise ValueError("map has no inverse-Lipschitz exponent")
    if U is None:
        U = UniversalMachine()
        standard_registry(U)
        if setup is not None:
            setup(U)
    if L is None:
        L = lipschitz_machine(U, F, search_bound)
    U.run_universal_stage(s)
    fz = apply_name(F, z)
    early = U.described_words(max(s - lag, 0))
    late = U.described_words(s)
    rows = []
    for n in n_range:
        if n < v + 1:
            raise ValueError(f"n = {n} is below v + 1 = {v + 1}")
        if n + 1 > len(fz.entries):
            raise ValueError(f"F(z) is materialized to {len(fz.entries)} entries, need {n + 1}")
        m = n - v - 1
        fz_cert = min((k for q, k in _pairs_at(F.target, early, n).items()
                       if ball_status(F.target, fz, q, n) == IN), default=INFINITY)
        fz_poss = min((k for q, k in _pairs_at(F.target, early, n).items()
                       if ball_status(F.target, fz, q, n) != OUT), default=INFINITY)
        z_cert = min((k for p, k in _pairs_at(F.source, late, m).items()
                      if ball_status(F.source, z, p, m) == IN), default=INFINITY)
        z_poss = min((k for p, k in _pairs_at(F.source, late, m).items()
                      if ball_status(F.source, z, p, m) != OUT), default=INFINITY)
        if z_cert <= fz_poss + L.reserved_constant:
            status = "holds"
        elif z_poss > fz_cert + L.reserved_constant:
            status = "fails"
        else:
            status = "inconclusive"
        rows.append({"n": n, "K_Fz": _fmt(fz_cert), "K_z": _fmt(z_cert),
                     "margin": None if INFINITY in (fz_cert, z_cert)
                     else int(fz_cert + L.reserved_constant - z_cert),
                     "status": status})
    return TransferReport(v, L.reserved_constant, s, lag, rows, list(L.inconclusive))


def strong_transfer_machine(U: UniversalMachine, F: ComputableMap, b: int,
                            search_bound: int = 256) -> MachineTable:
    """Machine L: on a description tau of q output p with d(F(p), q) < 2^(-|tau| - v - b - d_L - 1).

    d_L is the reserved constant of L itself, known once it is reserved.
    """
    v = F.inverse_lipschitz_exponent
    ref: list[int] = []
    images: dict[int, int] = {}

    def hook(V: UniversalMachine, snap: StageSnapshot):
        machine = V.registry[ref[0]]
        d_L = machine.reserved_constant
        for code, word in snap.new_halts:
            e, _ = V.decode(code)
            if e == ref[0] or code in machine.entries or not F.target.valid_index(word):
                continue
            radius = _pow2(len(code) + v + b + d_L + 1)
            p = _preimage_search(F, word, radius, search_bound, images)
            if p is None:
                machine.inconclusive.append({"code": code, "q": word, "stage": snap.stage})
                continue
            machine.add(code, p, snap.stage + 1)

    machine = U.reserve_machine("strong-transfer", hook=hook)
    machine.inconclusive = []
    ref.append(machine.id)
    return machine


def strong_transfer_check(F: ComputableMap, z: CauchyName, b: int, s: int,
                          U: UniversalMachine, L: MachineTable, lag: int = 2) -> dict:
    """Given z strongly i.a. via b at stage s, check d(F(z), q) >= 2^(-K(q) - v - d_L - b - 1).

    q ranges over target points described by stage s - lag, with K read at
    that stage.  The premise is itself checked with :func:`ia_report`.
    """
    U.run_universal_stage(s)
    v = F.inverse_lipschitz_exponent
    premise = ia_report(F.source, z, b, [], s, U)
    fz = apply_name(F, z)
    deepest = len(fz.entries) - 1
    violations, marginal = [], []
    for q, k in sorted(_points(F.target, U.described_words(max(s - lag, 0))).items()):
        radius = _pow2(int(k) + v + L.reserved_constant + b + 1)
        status = distance_status(F.target, fz, q, radius, entry=deepest)
        if status == IN:
            violations.append({"q": q, "K": int(k)})
        elif status == MARGINAL:
            marginal.append({"q": q, "K": int(k)})
    return {"premise": premise.strong_form, "d_L": L.reserved_constant, "v": v,
            "violations": violations, "marginal": marginal,
            "holds": (not premise.strong_form) or not violations,
            "inconclusive": list(L.inconclusive)}


# ---------------------------------------------------------------- plain complexity


def locally_c_trivial_check(space: SpaceDescriptor, x: CauchyName, n: int, b: int, s: int,
                            P: PlainUniversalMachine) -> LocalWitnessReport:
    """Same search as :func:`locally_ktrivial_witness` with plain complexity C_s."""
    described = P.described_words(s)
    kn, strict, weak, w, ww = _local_search(space, x, n, b, described, lambda w: P.C(w, s),
                                            "dyadic-scale")
    return LocalWitnessReport(n, b, s, _fmt(kn), w, ww, strict, weak)
