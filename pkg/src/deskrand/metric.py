"""Computable metric spaces, Cauchy names and Markov-style computable maps.

A space is described by an enumeration of special points (identified with
their indices) and a procedure approximating the distance between two special
points to within 2^-n.  Spaces whose metric is rational on special points also
expose the exact distance, which the checks use whenever it is available.
"""

from __future__ import annotations

import random
from math import gcd
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

from .core_numeric import ContractViolation, Dyadic, decode_tuple, encode_tuple, pair, unpair


class DemandError(ContractViolation):
    """A computable map needs a longer input prefix than was supplied."""


@dataclass(frozen=True)
class SpaceDescriptor:
    name: str
    distance_approx_fn: Callable[[int, int, int], Dyadic]
    special_point_label: Callable[[int], str]
    exact_distance: Optional[Callable[[int, int], Fraction]] = None
    valid_index: Callable[[int], bool] = lambda i: i >= 0

    def distance_approx(self, i: int, k: int, n: int) -> Dyadic:
        for idx in (i, k):
            if not self.valid_index(idx):
                raise IndexError(f"{self.name}: no special point with index {idx}")
        return self.distance_approx_fn(i, k, n)

    def label(self, i: int) -> str:
        return self.special_point_label(i)


def distance_approx(space: SpaceDescriptor, i: int, k: int, n: int) -> Dyadic:
    return space.distance_approx(i, k, n)


def _rational_space(name, distance, label, valid=lambda i: i >= 0) -> SpaceDescriptor:
    def approx(i, k, n):
        d = distance(i, k)
        if d.denominator & (d.denominator - 1) == 0:
            return Dyadic.from_fraction(d)
        return Dyadic.round_down(d, n)
    return SpaceDescriptor(name, approx, label, distance, valid)


# ---------------------------------------------------------------- [0,1] ∩ Q


def rational_point(i: int) -> Fraction:
    """The rational a/d where (a, d - 1) = unpair(i); defined on valid indices only."""
    if not rational_valid(i):
        raise IndexError(f"UnitInterval: no special point with index {i}")
    a, c = unpair(i)
    return Fraction(a, c + 1)


def rational_valid(i: int) -> bool:
    """Index of a reduced fraction a/d in [0,1]; every rational has exactly one."""
    if i < 0:
        return False
    a, c = unpair(i)
    return a <= c + 1 and gcd(a, c + 1) == 1


def rational_index(q: Fraction) -> int:
    q = Fraction(q)
    if not 0 <= q <= 1:
        raise ValueError("special points of the unit interval lie in [0,1]")
    return pair(q.numerator, q.denominator - 1)


def unit_interval() -> SpaceDescriptor:
    return _rational_space(
        "UnitInterval",
        lambda i, k: abs(rational_point(i) - rational_point(k)),
        lambda i: str(rational_point(i)),
        rational_valid,
    )


# ---------------------------------------------------------------- Cantor and Baire


def cantor_point(i: int) -> str:
    """Bits of the eventually-zero sequence with index i (bit k of i), trailing zeros dropped."""
    return format(i, "b")[::-1] if i else ""


def cantor_index(bits: str) -> int:
    bits = bits.rstrip("0")
    return int(bits[::-1], 2) if bits else 0


def _cantor_distance(i: int, k: int) -> Fraction:
    x = i ^ k
    if x == 0:
        return Fraction(0)
    return Fraction(1, 1 << ((x & -x).bit_length() - 1))


def cantor_space() -> SpaceDescriptor:
    return _rational_space("CantorSpace", _cantor_distance, lambda i: cantor_point(i) + "000...")


def baire_point(i: int) -> tuple[int, ...]:
    """Finite support of the eventually-zero function with index i (last value nonzero)."""
    items = list(decode_tuple(i))
    if items:
        items[-1] += 1
    return tuple(items)


def baire_index(values: Sequence[int]) -> int:
    items = list(values)
    while items and items[-1] == 0:
        items.pop()
    if items:
        items[-1] -= 1
    return encode_tuple(items)


def _baire_distance(i: int, k: int) -> Fraction:
    f, g = baire_point(i), baire_point(k)
    if f == g:
        return Fraction(0)
    n = 0
    while (f[n] if n < len(f) else 0) == (g[n] if n < len(g) else 0):
        n += 1
    return Fraction(1, 1 << n)


def baire_space() -> SpaceDescriptor:
    return _rational_space("BaireSpace", _baire_distance, lambda i: str(list(baire_point(i))))


# ---------------------------------------------------------------- Omega and tree


def omega_space(U) -> SpaceDescriptor:
    """Special points q_s = Omega_s of the given universal machine."""
    return _rational_space(
        "OmegaSpace",
        lambda i, k: abs(U.omega_at(i) - U.omega_at(k)),
        lambda i: f"Omega_{i}",
    )


def tree_point(i: int) -> tuple[int, int]:
    return i % 2, i // 2


def tree_index(r: int, n: int) -> int:
    return 2 * n + r


def tree_distance(i: int, k: int) -> Fraction:
    """Shortest-path metric over the generator edges of the tree space."""
    (r, n), (q, m) = tree_point(i), tree_point(k)
    if (r, n) == (q, m):
        return Fraction(0)
    if n == m:
        return Fraction(1, 1 << n)
    lo, hi = min(n, m), max(n, m)
    return Fraction(1, 1 << lo) - Fraction(1, 1 << hi)


def tree_space() -> SpaceDescriptor:
    return _rational_space("TreeSpace", tree_distance, lambda i: "<%d,%d>" % tree_point(i))


def scripted_space(name: str, distances: dict, labels: Sequence[str]) -> SpaceDescriptor:
    """Finite space from an explicit rational distance table {(i, k): d}."""
    size = len(labels)

    def dist(i, k):
        if i == k:
            return Fraction(0)
        return Fraction(distances[(min(i, k), max(i, k))])

    return _rational_space(name, dist, lambda i: labels[i], lambda i: 0 <= i < size)


SPACES: dict[str, Callable[[], SpaceDescriptor]] = {
    "UnitInterval": unit_interval,
    "CantorSpace": cantor_space,
    "BaireSpace": baire_space,
    "TreeSpace": tree_space,
}


def get_space(name: str, U=None) -> SpaceDescriptor:
    if name == "OmegaSpace":
        if U is None:
            raise ValueError("OmegaSpace needs a universal machine")
        return omega_space(U)
    return SPACES[name]()


# ---------------------------------------------------------------- Cauchy names


@dataclass(frozen=True)
class CauchyName:
    entries: tuple[int, ...]
    space: SpaceDescriptor = field(compare=False)

    def __len__(self):
        return len(self.entries)

    def prefix(self, k: int) -> "CauchyName":
        return CauchyName(self.entries[:k], self.space)


def _distance(space: SpaceDescriptor, i: int, k: int, n: int) -> Fraction:
    if space.exact_distance is not None:
        return space.exact_distance(i, k)
    return space.distance_approx(i, k, n).value


def validate_cauchy_name(name: CauchyName, n: int = 20) -> list[tuple[int, int]]:
    """Pairs (s, t), s < t, with d(p_s, p_t) > 2^-s + 2^-n (approximate distances)."""
    bad = []
    slack = Fraction(1, 1 << n)
    entries = name.entries
    for s in range(len(entries)):
        bound = Fraction(1, 1 << s) + slack
        for t in range(s + 1, len(entries)):
            if name.space.distance_approx(entries[s], entries[t], n).value > bound:
                bad.append((s, t))
    return bad


def sample_metric_axioms(space: SpaceDescriptor, triples: int = 1000, n: int = 20,
                         index_bound: int = 4096, seed: int = 0) -> dict:
    """Symmetry and triangle checks at precision 2^-n on random special-point triples."""
    rng = random.Random(seed)
    eps = Fraction(1, 1 << n)
    failures = []
    valid = [i for i in range(index_bound) if space.valid_index(i)]
    for _ in range(triples):
        i, j, k = (rng.choice(valid) for _ in range(3))
        dij = space.distance_approx(i, j, n).value
        dji = space.distance_approx(j, i, n).value
        djk = space.distance_approx(j, k, n).value
        dik = space.distance_approx(i, k, n).value
        dii = space.distance_approx(i, i, n).value
        if abs(dij - dji) > 2 * eps:
            failures.append(("symmetry", i, j))
        if dik > dij + djk + 3 * eps:
            failures.append(("triangle", i, j, k))
        if dii > eps:
            failures.append(("self", i))
    return {"space": space.name, "triples": triples, "failures": failures}


# ---------------------------------------------------------------- computable maps


@dataclass(frozen=True)
class ComputableMap:
    source: SpaceDescriptor
    target: SpaceDescriptor
    apply: Callable[[Sequence[int], int], int]
    demand: Callable[[int], int]
    inverse_lipschitz_exponent: Optional[int] = None
    point_map: Optional[Callable[[int], int]] = None
    name: str = "map"


def markov_apply(F: ComputableMap, name: CauchyName, n: int) -> int:
    need = F.demand(n)
    if len(name.entries) < need:
        raise DemandError(f"{F.name}: output entry {n} needs {need} input entries, "
                          f"got {len(name.entries)}", required=need)
    return F.apply(name.entries[:need], n)


def apply_name(F: ComputableMap, name: CauchyName) -> CauchyName:
    """All output entries computable from the materialized prefix."""
    out = []
    n = 0
    while F.demand(n) <= len(name.entries):
        out.append(markov_apply(F, name, n))
        n += 1
    return CauchyName(tuple(out), F.target)


def identity_map(space: SpaceDescriptor) -> ComputableMap:
    return ComputableMap(space, space, lambda prefix, n: prefix[n], lambda n: n + 1, 0,
                         lambda i: i, "identity")


def halving_map() -> ComputableMap:
    """x -> x/2 on the unit interval."""
    def point(i):
        return rational_index(rational_point(i) / 2)
    return ComputableMap(unit_interval(), unit_interval(),
                         lambda prefix, n: point(prefix[n]), lambda n: n + 1, 1, point, "halve")


def cantor_value(bits: str) -> Fraction:
    return sum((Fraction(2, 3 ** (i + 1)) for i, b in enumerate(bits) if b == "1"), Fraction(0))


def cantor_embed(bits: str) -> CauchyName:
    """Cauchy name of the middle-thirds image of a bit prefix.

    Entry n is the partial sum over the first min(n + 2, |bits|) bits.
    """
    entries = tuple(rational_index(cantor_value(bits[: n + 2])) for n in range(len(bits)))
    return CauchyName(entries, unit_interval())


def cantor_inverse(q: Fraction, k: int) -> str:
    """First k bits of X when q = F(X) exactly or q is a partial sum of F(X)."""
    out = []
    x = Fraction(q)
    for _ in range(k):
        x *= 3
        digit = x.numerator // x.denominator
        out.append("1" if digit >= 2 else "0")
        x -= digit
    return "".join(out)


def cantor_embedding_map(depth_certificate: int = 12) -> ComputableMap:
    """The 1-Lipschitz injection of Cantor space into [0,1] as a computable map.

    Its inverse is not Lipschitz globally; the recorded exponent is the
    smallest v with d(X,Y) <= 2^v |F(X) - F(Y)| for special points that first
    differ below depth_certificate (see :func:`inverse_lipschitz_certificate`).
    """
    def point(i):
        return rational_index(cantor_value(cantor_point(i)))

    def apply(prefix, n):
        bits = cantor_point(prefix[n + 2]).ljust(n + 2, "0")[: n + 2]
        return rational_index(cantor_value(bits))

    v = inverse_lipschitz_certificate(depth_certificate)
    return ComputableMap(cantor_space(), unit_interval(), apply, lambda n: n + 3, v, point,
                         "cantor_embed")


def inverse_lipschitz_certificate(depth: int) -> int:
    """Least v with 2^-n <= 2^v * 3^-(n+1) for every first-difference depth n < depth."""
    v = 0
    for n in range(depth):
        while Fraction(1, 1 << n) > Fraction(1 << v, 3 ** (n + 1)):
            v += 1
    return v
