from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from deskrand.core_numeric import ContractViolation, antichain_measure, string_value
from deskrand.derivative import PiClass
from deskrand.machines import KCRequest, UniversalMachine, kc_extend, reserve_machine, standard_registry
from deskrand.martingale import identity_oracle, staircase_oracle
from deskrand.randtests import (
    DemuthTest,
    DifferenceTest,
    bv_ml_test,
    cost_report,
    demuth_eval,
    demuth_pass_trace,
    difference_component,
    difference_test_omega,
    dyadic_prefix_interval,
    measure_cost,
    measure_inside_class,
    monotonized_version,
    nested_union_failures,
    omega_change_test,
    porosity_difference_test,
    porous_extensions,
    power_cost,
    sample_porous_classes,
    step_oracle,
)
from oracles import (
    measure_by_enumeration,
    measure_in_class,
    meeting_weight,
    porosity_levels_oracle,
    porous_extensions_oracle,
    scripted_staircases,
    steep_strings_oracle,
)


# ---------------------------------------------------------------- Demuth tests


def two_version_test(switch: int = 5) -> DemuthTest:
    comps = {}
    for m in range(1, 8):
        comps[2 * m] = [(0, "0" * m)]
        comps[2 * m + 1] = [(0, "1" * (m + 1)), (switch + 2, "01" + "0" * m)]
    return DemuthTest(lambda m, t: 2 * m + (t >= switch), lambda m: 1, comps)


def test_constant_index_has_no_changes():
    test = DemuthTest(lambda m, t: m, lambda m: 0, {m: [(0, "0" * m)] for m in range(1, 6)})
    for t in range(10):
        assert demuth_eval(test, 3, t).changes == 0


def test_two_version_component():
    test = two_version_test()
    assert demuth_eval(test, 2, 4).changes == 0
    assert demuth_eval(test, 2, 4).strings == ("00",)
    after = demuth_eval(test, 2, 9)
    assert after.changes == 1 and after.strings == ("0100", "111")
    assert after.measure == Fraction(1, 8) + Fraction(1, 16)


@pytest.mark.parametrize("m", range(1, 8))
@pytest.mark.parametrize("t", [0, 4, 5, 12])
def test_version_measures_bounded(m, t):
    assert demuth_eval(two_version_test(), m, t).measure <= Fraction(1, 2 ** m)


def test_demuth_violations_name_m_and_t():
    heavy = DemuthTest(lambda m, t: 0, lambda m: 0, {0: [(0, "0")]})
    with pytest.raises(ContractViolation) as err:
        demuth_eval(heavy, 2, 0)
    assert err.value.context["m"] == 2
    flappy = DemuthTest(lambda m, t: t % 2, lambda m: 1, {})
    with pytest.raises(ContractViolation):
        demuth_eval(flappy, 1, 3)


def test_empty_components_pass():
    test = DemuthTest(lambda m, t: 0, lambda m: 0, {})
    trace = demuth_pass_trace("0101", test, 4, 3)
    assert not any(trace.members.values()) and trace.weak_pass and trace.last_failure is None


def test_zeros_in_every_component():
    test = DemuthTest(lambda m, t: m, lambda m: 0, {m: [(0, "0" * m)] for m in range(1, 9)})
    trace = demuth_pass_trace("0" * 12, test, 8, 0)
    assert all(trace.members.values()) and not trace.weak_pass and trace.last_failure == 8
    ones = demuth_pass_trace("1" * 12, test, 8, 0)
    assert ones.weak_pass and ones.members[1] is False


def test_membership_needs_long_enough_prefix():
    test = DemuthTest(lambda m, t: m, lambda m: 0, {m: [(0, "0" * m)] for m in range(1, 9)})
    with pytest.raises(ContractViolation):
        demuth_pass_trace("00", test, 5, 0)


def test_monotonized_versions_nested():
    test = two_version_test()
    sets = [monotonized_version(test, m, 9, 7) for m in range(1, 7)]
    for m, (a, b) in enumerate(zip(sets, sets[1:]), start=1):
        assert antichain_measure(list(a) + list(b)) == antichain_measure(a)
        assert antichain_measure(a) <= Fraction(1, 2 ** m)


# ---------------------------------------------------------------- difference tests


def test_difference_component_by_hand():
    rep = difference_component(Fraction(3, 5), 3)
    assert (rep.i, rep.right, rep.measure) == (4, Fraction(5, 8), Fraction(1, 40))
    assert rep.alpha_inside
    assert antichain_measure(rep.strings) == Fraction(5, 8)


def test_difference_component_dyadic_boundary():
    rep = difference_component(Fraction(5, 8), 3)
    assert (rep.i, rep.measure) == (4, 0)
    # strict tie-break: U_n = [0, 5/8) stops just below alpha
    assert not rep.alpha_inside


def test_difference_component_at_zero():
    rep = difference_component(Fraction(0), 4)
    assert rep.i is None and rep.right == Fraction(1, 16) and rep.alpha_inside


@given(st.fractions(min_value=0, max_value=1), st.integers(0, 12))
def test_difference_measure_bound(alpha, n):
    rep = difference_component(alpha, n)
    assert rep.measure <= Fraction(1, 2 ** n)
    on_boundary = alpha != 0 and (alpha * 2 ** n).denominator == 1
    assert rep.alpha_inside == (not on_boundary)


@given(st.integers(0, 2 ** 10), st.integers(0, 10))
def test_dyadic_prefix_interval_tiles(k, n):
    right = Fraction(min(k, 2 ** n), 2 ** n)
    strings = dyadic_prefix_interval(right, n)
    assert antichain_measure(strings) == right
    assert measure_by_enumeration(strings, n) == right
    assert all(len(s) <= n for s in strings)


def test_omega_difference_measure_every_stage():
    U = UniversalMachine()
    standard_registry(U)
    for s in range(0, 121, 3):
        for n in range(16):
            assert difference_test_omega(U, n, s).measure <= Fraction(1, 2 ** n)


def test_difference_test_object():
    P = PiClass.from_items(["11"], "cantor")
    D = DifferenceTest(P, lambda n, s: ["1" * n])
    assert D.measure(1, 0) == Fraction(1, 4)
    assert D.check(3, 0) == 0
    with pytest.raises(ContractViolation):
        DifferenceTest(P, lambda n, s: ["0"]).check(2, 0)


# ---------------------------------------------------------------- Solovay ledger


def test_empty_ledger():
    U = UniversalMachine()
    assert omega_change_test(U, 30).entries == []


def test_single_flip_at_position_two():
    U = UniversalMachine()
    kc_extend(reserve_machine(U), KCRequest(2, 0))
    ledger = omega_change_test(U, 10)
    (entry,) = ledger.entries
    assert (entry.position, entry.string, entry.weight) == (2, "001", Fraction(1, 8))
    assert string_value(entry.string) <= U.omega_at(entry.stage) < string_value(entry.string) + Fraction(1, 8)


def test_ledger_accounting_on_standard_run():
    U = UniversalMachine()
    standard_registry(U)
    ledger = omega_change_test(U, 200)
    flips: dict = {}
    for e in ledger.entries:
        assert e.stage in e.later_hits
        flips[e.position] = flips.get(e.position, 0) + 1
    assert ledger.weight_by_position() == {i: k * Fraction(1, 2 ** (i + 1)) for i, k in flips.items()}
    with pytest.raises(ContractViolation):
        omega_change_test(U, 200, budget=ledger.total_weight / 2)


# ---------------------------------------------------------------- cost functions


def test_power_cost_single_change():
    assert cost_report(power_cost(), [(3, 7)]).total == Fraction(1, 8)


@pytest.mark.parametrize("e", range(7))
def test_power_cost_benign(e):
    rep = cost_report(power_cost(), [], bound=lambda e: e + 1, e_max=6, horizon=40)
    assert rep.benignity[e]["ok"] and rep.benignity[e]["count"] <= e + 1


def test_measure_cost_matches_antichain_measure():
    G = {0: [(1, "0"), (3, "10")], 1: [(2, "110"), (4, "1110")], 2: [(5, "00"), (5, "001")]}
    c = measure_cost(G)
    changes = [(0, 2), (1, 3), (0, 4), (2, 6)]
    rep = cost_report(c, changes)
    expected = (antichain_measure(["0"]) + antichain_measure(["110"])
                + antichain_measure(["0", "10"]) + antichain_measure(["00", "001"]))
    assert rep.total == expected
    assert [v for _, _, v in rep.ledger] == [Fraction(1, 2), Fraction(1, 8), Fraction(3, 4), Fraction(1, 4)]


def test_cost_flags_and_order():
    assert power_cost().check_flags(12) == []
    with pytest.raises(ValueError):
        cost_report(power_cost(), [(0, 5), (1, 2)])


# ---------------------------------------------------------------- bounded variation


def test_identity_has_no_steep_intervals():
    rep = bv_ml_test(identity_oracle(), 1, 8)
    assert rep.strings == () and rep.measure == 0


@pytest.mark.parametrize("n", [2, 4, 8])
def test_single_steep_interval(n):
    sigma = "01" + "1" * (n - 2)
    rep = bv_ml_test(step_oracle(sigma), 1, n)
    assert rep.strings == (sigma,) and rep.measure == Fraction(1, 2 ** n)


def test_variation_bound_enforced():
    with pytest.raises(ContractViolation):
        bv_ml_test(staircase_oracle([(Fraction(1, 3), 2)]), 1, 4)


@pytest.mark.parametrize("jumps", scripted_staircases(6, seed=7))
@pytest.mark.parametrize("r", [0, 2, 5])
def test_bv_matches_oracle(jumps, r):
    for n in (3, 6, 9):
        rep = bv_ml_test(staircase_oracle(jumps), r, n)
        assert set(rep.strings) == steep_strings_oracle(jumps, r, n)
        assert rep.measure <= Fraction(1, 2 ** r)


# ---------------------------------------------------------------- porosity


CLASSES = sample_porous_classes()


def test_full_class_has_no_porous_extensions():
    full = CLASSES["full"]
    assert porous_extensions(full, "", 2, 0) == []
    rep = porosity_difference_test(full, 2, 3, 0)
    assert rep.levels[1:] == [[], [], []] and rep.measure_stage == 0


@pytest.mark.parametrize("name", sorted(CLASSES))
@pytest.mark.parametrize("sigma", ["", "0", "10", "0110"])
def test_porous_extensions_match_oracle(name, sigma):
    C = CLASSES[name]
    assert porous_extensions(C, sigma, 2, 7, max_len=9) == porous_extensions_oracle(C.schedule, sigma, 2, 7, 9, 9)


@pytest.mark.parametrize("name", sorted(CLASSES))
@pytest.mark.parametrize("c", [1, 2])
def test_porosity_levels_and_bounds(name, c):
    C = CLASSES[name]
    rep = porosity_difference_test(C, c, 3, 7, max_len=8)
    assert rep.levels == porosity_levels_oracle(C.schedule, c, 3, 7, 8, 8)
    factor = 1 - Fraction(1, 2 ** (c + 2))
    assert rep.measure_stage == measure_in_class(rep.levels[3], C.schedule, 7, 8) <= factor ** 3
    for sigma in rep.levels[2]:
        ext = porous_extensions(C, sigma, c, 7, 8)
        assert meeting_weight(ext, C.schedule, 7, 8) <= factor * Fraction(1, 2 ** len(sigma))


@pytest.mark.parametrize("name", sorted(CLASSES))
def test_nested_union_property(name):
    C = CLASSES[name]
    for t in range(8):
        assert nested_union_failures(C, 2, 2, t, max_len=8) == []


def test_measure_inside_class():
    C = CLASSES["right-half-removed"]
    assert measure_inside_class(["1"], C, 0) == 0
    assert measure_inside_class([""], C, 0) == measure_in_class([""], C.schedule, 0, 10)


@settings(max_examples=25, deadline=None)
@given(st.sets(st.text(alphabet="01", min_size=1, max_size=6), min_size=1, max_size=5),
       st.sets(st.text(alphabet="01", max_size=6), max_size=4))
def test_measure_inside_class_matches_enumeration(removed, strings):
    C = PiClass.from_items(sorted(removed), "cantor")
    assert measure_inside_class(strings, C, 0) == measure_in_class(strings, C.schedule, 0, 6)
