"""Brute-force reference computations used to freeze and cross-check values.

Everything here is deliberately naive: it enumerates strings, grid points or
machine domains directly and shares no code with the package beyond the
plain data it inspects.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from itertools import product


def all_strings(n: int):
    for bits in product("01", repeat=n):
        yield "".join(bits)


def measure_by_enumeration(strings, depth: int) -> Fraction:
    """Fraction of length-depth strings extending some member (members have length <= depth)."""
    strings = list(strings)
    hits = sum(1 for x in all_strings(depth) if any(x.startswith(s) for s in strings))
    return Fraction(hits, 2 ** depth)


def thirds_gap_bruteforce(m: int, window: int) -> Fraction:
    best = None
    for k in range(-window, window + 1):
        for kk in range(-window, window + 1):
            d = abs(Fraction(k, 2 ** m) - (Fraction(1, 3) + Fraction(kk, 2 ** m)))
            best = d if best is None or d < best else best
    return best


def K_bruteforce(U, word: int, s: int) -> float:
    lengths = [len(code) for code, w in U.domain_at(s).items() if w == word]
    return min(lengths) if lengths else float("inf")


# ---------------------------------------------------------------- porosity


def removed_strings(schedule, t: int) -> list[str]:
    return [item for stage, item in schedule if stage <= t]


def meets(tau: str, removed: list[str], depth: int) -> bool:
    """Does the cylinder of tau contain a point outside every removed cylinder?"""
    extra = max(0, depth - len(tau))
    return any(not any((tau + x).startswith(r) for r in removed) for x in all_strings(extra))


def porous_extensions_oracle(schedule, sigma: str, c: int, t: int, max_len: int,
                             depth: int) -> list[str]:
    removed = removed_strings(schedule, t)
    viable = set()
    for L in range(len(sigma), max_len + 1):
        ext = [sigma + x for x in all_strings(L - len(sigma))]
        holes = {int(tau or "0", 2) for tau in ext if not meets(tau, removed, depth)}
        for rho in ext:
            k = int(rho or "0", 2)
            if any(h in holes for h in range(k - 2 ** c, k + 2 ** c + 1)):
                viable.add(rho)
    return sorted(r for r in viable if not any(r[:j] in viable for j in range(len(r))))


def porosity_levels_oracle(schedule, c: int, n: int, t: int, max_len: int,
                           depth: int) -> list[list[str]]:
    levels = [[""]]
    for _ in range(n):
        nxt = set()
        for sigma in levels[-1]:
            nxt.update(porous_extensions_oracle(schedule, sigma, c, t, max_len, depth))
        levels.append(sorted(nxt))
    return levels


def measure_in_class(strings, schedule, t: int, depth: int) -> Fraction:
    """lambda([strings] intersected with the class at stage t), by enumeration at depth."""
    removed = removed_strings(schedule, t)
    hits = 0
    for x in all_strings(depth):
        if any(x.startswith(s) for s in strings) and not any(x.startswith(r) for r in removed):
            hits += 1
    return Fraction(hits, 2 ** depth)


def meeting_weight(strings, schedule, t: int, depth: int) -> Fraction:
    removed = removed_strings(schedule, t)
    return sum((Fraction(1, 2 ** len(r)) for r in strings if meets(r, removed, depth)),
               Fraction(0))


# ---------------------------------------------------------------- bounded variation


def scripted_staircases(count: int = 20, seed: int = 2024) -> list[list[tuple[Fraction, Fraction]]]:
    """Nondecreasing step functions on [0,1] with total rise at most 1."""
    import random

    rng = random.Random(seed)
    out = []
    for k in range(count):
        steps = rng.randint(1, 12)
        xs = [Fraction(rng.randint(1, 4095), 4096) if k % 3 else Fraction(rng.randint(1, 999), 1000)
              for _ in range(steps)]
        weights = [rng.randint(1, 9) for _ in range(steps)]
        total = Fraction(sum(weights)) / Fraction(rng.randint(60, 100), 100)
        out.append([(x, Fraction(w) / total) for x, w in zip(xs, weights)])
    return out


@lru_cache(maxsize=64)
def _rises(jumps: tuple, n: int) -> dict[str, Fraction]:
    """Rise over every length-n dyadic interval (a, b], summed from the jump list."""
    out = {}
    for x in all_strings(n):
        a = Fraction(int(x or "0", 2), 2 ** n)
        b = a + Fraction(1, 2 ** n)
        out[x] = sum((h for xj, h in jumps if a < xj <= b), Fraction(0))
    return out


def steep_strings_oracle(jumps, r: int, n: int) -> set[str]:
    """Length-n strings whose interval has rise above 2^(r-n), from the jump list directly."""
    return {x for x, rise in _rises(tuple(jumps), n).items() if rise * 2 ** n > 2 ** r}
