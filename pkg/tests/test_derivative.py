from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from deskrand.core_numeric import ContractViolation
from deskrand.derivative import (
    ClassBounds,
    EmptyClassError,
    MonotoneExtension,
    PiClass,
    SlopeWindow,
    denjoy_probe,
    enrs_member,
    lower_class_probe,
    monotone_extension,
    oscillating_oracle,
    pi_class_inf,
    pi_class_sup,
    porosity_probe,
    slope_window_bounds,
    two_sided_slope_gap,
    upper_class_probe,
)
from deskrand.martingale import exact_oracle, identity_oracle, square_oracle

HALF = Fraction(1, 2)
WHOLE = PiClass((), "unit", "whole")


def kink():
    return exact_oracle(lambda x: abs(x - HALF), "kink", lambda n: n)


def middle_thirds(levels: int) -> PiClass:
    items = []
    intervals = [(Fraction(0), Fraction(1))]
    for _ in range(levels):
        nxt = []
        for a, b in intervals:
            third = (b - a) / 3
            items.append((a + third, b - third))
            nxt += [(a, a + third), (b - third, b)]
        intervals = nxt
    return PiClass.from_items(items, "unit", "middle-thirds")


def two_points() -> PiClass:
    return PiClass.from_items([(Fraction(0), Fraction(1))], "unit", "ends")


def outer_quarters() -> PiClass:
    return PiClass.from_items([(Fraction(1, 4), Fraction(3, 4))], "unit", "outer")


# ---------------------------------------------------------------- slope windows


def test_identity_window():
    assert slope_window_bounds(identity_oracle(), SlopeWindow(Fraction(1, 3), HALF, 6)) == (1, 1)


def test_square_coarse_window_by_hand():
    w = SlopeWindow(HALF, HALF, 2, points=(Fraction(1, 4), HALF, Fraction(3, 4)))
    assert slope_window_bounds(square_oracle(), w) == (Fraction(3, 4), Fraction(5, 4))


def test_kink_window():
    lo, hi = slope_window_bounds(kink(), SlopeWindow(HALF, Fraction(1, 4), 8))
    assert lo <= -1 + Fraction(1, 8) and hi >= 1 - Fraction(1, 8)


def test_empty_window_is_an_error():
    with pytest.raises(ContractViolation):
        slope_window_bounds(identity_oracle(), SlopeWindow(HALF, HALF, 0, points=(HALF,)))


@pytest.mark.parametrize("z", [Fraction(1, 3), HALF, Fraction(5, 7)])
def test_refinement_widens_bounds(z):
    f = exact_oracle(lambda x: x ** 3, "cube")
    prev = None
    for res in range(4, 9):
        lo, hi = slope_window_bounds(f, SlopeWindow(z, Fraction(1, 4), res))
        assert lo <= hi
        if prev is not None:
            assert lo <= prev[0] and hi >= prev[1]
        prev = (lo, hi)


# ---------------------------------------------------------------- Denjoy probes


SCALES = [Fraction(1, 2 ** k) for k in range(1, 7)]


def test_denjoy_identity_converges():
    report = denjoy_probe(identity_oracle(), Fraction(1, 3), SCALES)
    assert report.classification == "converging"
    assert all(b == (1, 1) for b in report.bounds)


def test_denjoy_square_converges_to_derivative():
    report = denjoy_probe(square_oracle(), Fraction(1, 3), SCALES)
    assert report.classification == "converging"
    lo, hi = report.bounds[-1]
    assert abs(lo - Fraction(2, 3)) <= SCALES[-1] and abs(hi - Fraction(2, 3)) <= SCALES[-1]


def test_denjoy_oscillator_two_sided():
    report = denjoy_probe(oscillating_oracle(HALF), HALF, SCALES)
    assert report.classification == "two-sided diverging"


def test_denjoy_needs_decreasing_scales():
    with pytest.raises(ValueError):
        denjoy_probe(identity_oracle(), HALF, [Fraction(1, 4), HALF])


def test_two_sided_gap_identity():
    assert two_sided_slope_gap(identity_oracle(), HALF, 0, Fraction(1, 8), 6)["gap"] == 0


def test_two_sided_gap_square():
    out = two_sided_slope_gap(square_oracle(), HALF, Fraction(1, 8), Fraction(1, 8), 7)
    assert out["gap"] <= Fraction(1, 8) and out["within_eps"]


@pytest.mark.parametrize("delta", [Fraction(1, 4), Fraction(1, 16), Fraction(1, 64)])
def test_two_sided_gap_kink(delta):
    out = two_sided_slope_gap(kink(), HALF, Fraction(1, 8), delta, 10)
    assert out["gap"] >= Fraction(3, 2)
    assert not out["within_eps"]


# ---------------------------------------------------------------- E_{n,r,s} and C(p)


def test_enrs_membership():
    grid = [Fraction(k, 16) for k in range(17)]
    assert enrs_member(identity_oracle(), 1, 0, 1, Fraction(1, 3), grid)
    falling = exact_oracle(lambda x: -4 * x, "falling")
    assert not enrs_member(falling, 2, 0, 1, Fraction(1, 3), grid)
    assert enrs_member(falling, 6, 0, 1, Fraction(1, 3), grid)


@pytest.mark.parametrize("probe", [lower_class_probe, upper_class_probe])
def test_class_probes_monotone(probe):
    f = square_oracle()
    counts = [probe(f, p, Fraction(1, 3), Fraction(1, 4), 6) for p in
              (Fraction(1, 4), Fraction(1, 2), Fraction(2, 3), 1)]
    for c in counts:
        assert c["strict"] <= c["nonstrict"]
    strict = [c["strict"] for c in counts]
    assert strict == sorted(strict) or strict == sorted(strict, reverse=True)
    small = probe(f, Fraction(2, 3), Fraction(1, 3), Fraction(1, 16), 6)
    large = probe(f, Fraction(2, 3), Fraction(1, 3), Fraction(1, 4), 6)
    assert small["nonstrict"] <= large["nonstrict"]


# ---------------------------------------------------------------- Pi01 classes


def test_pi_class_stages_shrink():
    E = middle_thirds(4)
    staged = PiClass(tuple((k, item) for k, (_, item) in enumerate(E.schedule)), "unit")
    measures = [staged.measure(s) for s in range(len(E.schedule) + 1)]
    assert measures == sorted(measures, reverse=True)
    assert measures[-1] == Fraction(2, 3) ** 4


def test_sup_of_identity_over_whole_interval():
    B = ClassBounds(identity_oracle(), WHOLE)
    for n in range(8):
        assert 1 <= B.sup(n, 0) <= 1 + Fraction(1, 2 ** n)
        assert 0 >= B.inf(n, 0) >= -Fraction(1, 2 ** n)


def test_sup_drops_after_removal():
    E = PiClass(((3, (HALF, Fraction(2))),), "unit", "right-removed")
    B = ClassBounds(identity_oracle(), E)
    assert B.sup(6, 2) >= 1
    assert HALF <= B.sup(6, 3) <= HALF + Fraction(1, 2 ** 6)
    assert pi_class_sup(identity_oracle(), E, 6, 3) == B.sup(6, 3)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 6), st.integers(0, 5))
def test_sup_right_ce_and_above_inf(n, s):
    E = middle_thirds(3)
    E = PiClass(tuple((k, item) for k, (_, item) in enumerate(E.schedule)), "unit")
    B = ClassBounds(square_oracle(), E)
    assert B.sup(n + 1, s + 1) <= B.sup(n, s)
    assert B.inf(n + 1, s + 1) >= B.inf(n, s)
    assert B.inf(n, s) <= B.sup(n, s)


def test_empty_class_reported():
    E = PiClass.from_items([(Fraction(-1), Fraction(2))], "unit")
    with pytest.raises(EmptyClassError):
        pi_class_inf(identity_oracle(), E, 3, 0)


# ---------------------------------------------------------------- monotone extension


@pytest.mark.parametrize("n", range(5))
def test_extension_of_identity_on_whole(n):
    h = identity_oracle()
    for k in range(17):
        x = Fraction(k, 16)
        assert abs(monotone_extension(h, WHOLE, x, n) - x) < Fraction(1, 2 ** n)


@pytest.mark.parametrize("n", range(5))
def test_extension_across_single_gap(n):
    E, h = two_points(), identity_oracle()
    g = [monotone_extension(h, E, Fraction(k, 16), n) for k in range(17)]
    assert g == sorted(g)
    assert abs(g[0]) < Fraction(1, 2 ** n) and abs(g[-1] - 1) < Fraction(1, 2 ** n)
    # the level-0 bridge is frozen, so the interior is not refined towards the line
    assert g[8] == HALF
    assert g[4] == Fraction(1, 32)


@pytest.mark.parametrize("n", range(5))
def test_extension_bridges_plateaus(n):
    E, h = outer_quarters(), identity_oracle()
    eps = Fraction(1, 2 ** n)
    xs = [Fraction(k, 32) for k in range(33)]
    g = [monotone_extension(h, E, x, n) for x in xs]
    assert g == sorted(g)
    assert Fraction(1, 4) - eps <= monotone_extension(h, E, HALF, n) <= Fraction(3, 4) + eps
    for x, v in zip(xs, g):
        if E.contains(x, 10):
            assert abs(v - x) < eps


@pytest.mark.parametrize("E", [WHOLE, two_points(), outer_quarters(), middle_thirds(2)],
                         ids=["whole", "ends", "outer", "thirds"])
def test_extension_levels_consistent(E):
    ext = MonotoneExtension(identity_oracle(), E)
    for n in range(4):
        for k in range(33):
            x = Fraction(k, 32)
            assert abs(ext.value(x, n + 1) - ext.value(x, n)) < Fraction(2, 2 ** n)


def test_extension_rejects_decreasing_function():
    falling = exact_oracle(lambda x: 1 - x, "falling", lambda n: n)
    with pytest.raises(ContractViolation):
        MonotoneExtension(falling, WHOLE).value(HALF, 3)


# ---------------------------------------------------------------- porosity


def test_no_holes_in_whole_interval():
    out = porosity_probe(WHOLE, HALF, Fraction(1, 4), [HALF, Fraction(1, 8)], 0)
    assert out["witnesses"] == [] and out["missing"] == [HALF, Fraction(1, 8)]


def test_hole_next_to_isolated_point():
    E = PiClass.from_items([(Fraction(0), HALF)], "unit")
    out = porosity_probe(E, 0, Fraction(1, 4), [HALF], 0)
    (w,) = out["witnesses"]
    assert w.beta == HALF and w.hole == (Fraction(1, 8), Fraction(1, 4))


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("z", [Fraction(0), Fraction(2, 9), Fraction(3, 4)])
def test_middle_thirds_porous_everywhere(k, z):
    E = middle_thirds(5)
    assert E.contains(z, 0)
    out = porosity_probe(E, z, Fraction(1, 4), [Fraction(1, 3 ** k)], 0)
    assert out["missing"] == []
    (w,) = out["witnesses"]
    a, b = w.hole
    assert b - a == w.beta / 4 and z - w.beta < a and b < z + w.beta
    assert not any(c <= b and a <= d for c, d in E.components(0))
