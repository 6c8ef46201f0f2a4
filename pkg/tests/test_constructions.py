from __future__ import annotations

import json

import pytest
from hypothesis import given, settings, strategies as st

from deskrand.core_numeric import ContractViolation
from deskrand.machines import KCRequest, UniversalMachine, kc_extend, reserve_machine, standard_registry
from deskrand.constructions import (
    BLRScript,
    Convergence,
    EmbeddingTree,
    MarkerArray,
    blr_script_from,
    block_of,
    build_blr_pi_class,
    build_jump_traceable_tree,
    build_ktrivial_point_trees,
    build_weakly_ktrivial,
    build_wtt_weakly_ktrivial,
    delta_sequence,
    functionals_from_script,
    load_script,
    longest_prefix_ending_in_one,
    random_functionals,
    strong_index,
    strong_set,
)
from deskrand.metric import tree_index, tree_space

# ---------------------------------------------------------------- markers


def test_marker_cut_moves_all_later_markers():
    A = MarkerArray()
    A.materialize(10)
    assert A.positions(4) == [0, 1, 2, 3]
    A.cut(2, 10)
    assert A.positions(4) == [0, 1, 10, 11]
    assert (A.moves(1), A.moves(2), A.moves(7)) == (0, 1, 1)
    assert not A.contains(5) and A.contains(1) and A.contains(10)


def test_marker_cut_must_move():
    A = MarkerArray()
    A.materialize(3)
    with pytest.raises(ContractViolation):
        A.cut(5, 4)


def test_g_string_and_word():
    A = MarkerArray()
    A.materialize(6)
    A.cut(2, 6)
    assert A.g_string(6) == "11"
    assert longest_prefix_ending_in_one("0110100") == "01101"
    assert longest_prefix_ending_in_one("000") == ""
    # length-lexicographic rank of "11": 2^2 - 1 + 3
    assert A.g_word(1) == 6 and A.g_word(-1) == 0


# ---------------------------------------------------------------- weakly K-trivial


def test_weakly_ktrivial_without_activity():
    run = build_weakly_ktrivial(30, UniversalMachine())
    assert run.ok
    assert run.markers.history == [] and run.markers.positions(12) == list(range(12))
    assert [e for e in run.events if e["action"] == "cut"] == []


def test_weakly_ktrivial_single_scripted_description():
    U = UniversalMachine()
    M = reserve_machine(U)
    kc_extend(M, KCRequest(1, 10))  # total length 2 with the coding prefix "01"
    run = build_weakly_ktrivial(20, U)
    assert run.ok
    cuts = [e for e in run.events if e["action"] == "cut"]
    # processed once the stage exceeds w = 10; gamma_2 = 2 < 10 so [2, 11) is removed
    assert [(c["stage"], c["data"]["marker"], c["data"]["old"]) for c in cuts] == [(11, 2, 2)]
    assert run.markers.gamma(2) == 11
    assert run.markers.positions(3) == [0, 1, 11]


@pytest.fixture(scope="module")
def weak_run():
    return build_weakly_ktrivial(300)


def test_weakly_ktrivial_checks_hold(weak_run):
    assert weak_run.ok
    names = weak_run.check_names()
    assert {"gamma_K_large", "maintain_weak_K_triv[M]", "maintain_weak_K_triv[U]", "marker_moves"} <= names
    per_stage = [c for c in weak_run.checks if c["check"] == "gamma_K_large"]
    assert len(per_stage) == 300


def test_weakly_ktrivial_move_bound(weak_run):
    for j, k in weak_run.state["moves"].items():
        assert k <= 2 ** (int(j) + 1)


def test_weakly_ktrivial_set_from_cut_history(weak_run):
    A = weak_run.markers
    removed = set()
    for s, _, old in A.history:
        assert old < s <= 300
        removed |= set(range(old, s))
    for x in range(400):
        assert A.contains(x) == (x not in removed)
    stages = [s for s, _, _ in A.history]
    assert stages == sorted(stages)


def test_weakly_ktrivial_is_deterministic():
    a, b = build_weakly_ktrivial(120), build_weakly_ktrivial(120)
    assert json.dumps(a.events) == json.dumps(b.events)
    assert a.checks == b.checks


# ---------------------------------------------------------------- wtt chain


def test_strong_index_roundtrip():
    for n in range(200):
        assert strong_index(strong_set(n)) == n


def test_wtt_chain_all_zeros():
    chain = build_wtt_weakly_ktrivial("000", 2)
    # D_0 = {}, D_2 = {1}, D_34 = {1, 5}
    assert chain.indices == [0, 2, 34]
    assert chain.sets == [[], [1], [1, 5], [1, 5, 69]]
    assert chain.checkpoints == [0, 4, 68]


@given(st.text(alphabet="01", min_size=5, max_size=5))
def test_wtt_chain_properties(A):
    chain = build_wtt_weakly_ktrivial(A, 3)
    assert chain.recover() == A[:4]
    for k, n in enumerate(chain.indices):
        B = chain.sets[k]
        assert sorted(strong_set(n)) == B
        assert not B or n > max(B)
        m = chain.checkpoints[k]
        assert [x for x in chain.sets[-1] if x < m] == B


def test_wtt_chain_guards():
    with pytest.raises(ContractViolation):
        build_wtt_weakly_ktrivial("01", 3)
    with pytest.raises(ContractViolation):
        build_wtt_weakly_ktrivial("0" * 8, 7)


# ---------------------------------------------------------------- jump traceable tree


def delta_bruteforce(length: int) -> list[int]:
    """eps = 1: least d above the previous value with d^2 > 2^(n+1) (sum + d)."""
    out: list[int] = []
    for n in range(length):
        d = 1
        while d <= (out[-1] if out else 0) or d * d <= 2 ** (n + 1) * (sum(out) + d):
            d += 1
        out.append(d)
    return out


def test_delta_sequence_matches_bruteforce():
    assert delta_sequence(1, 10) == delta_bruteforce(10)
    assert delta_sequence(1, 3) == [3, 7, 14]


def test_delta_requires_positive_eps():
    with pytest.raises(ValueError):
        delta_sequence(0, 3)


def test_block_of():
    delta = delta_sequence(1, 6)
    assert block_of(7, delta) == 1 and block_of(13, delta) == 1 and block_of(14, delta) == 2
    assert block_of(2, delta) is None


def test_jump_tree_without_convergences():
    run = build_jump_traceable_tree(1, [], 50)
    assert run.ok
    assert run.state["collapses"] == [] and run.state["traces"] == {}
    for rho in ["", "0", "0110", "111"]:
        assert run.tree(rho) == rho


def test_jump_tree_single_convergence():
    m = delta_sequence(1, 3)[1]
    run = build_jump_traceable_tree(1, [[Convergence("00", m, 3, 5)]], 20)
    assert run.ok
    (event,) = run.events
    assert event["stage"] == 5 and event["data"]["node"] == "0" and event["data"]["target"] == "00"
    assert run.traces == {0: {m: {3}}}
    assert run.tree("0") == "00" and run.tree("1") == "1"


def test_jump_tree_pending_beyond_horizon():
    run = build_jump_traceable_tree(1, [[Convergence("0", 20, 1, 99)]], 10)
    assert run.events[0]["action"] == "pending"
    assert run.state["traces"] == {"0": {}}


def test_jump_tree_random_run_bounds():
    run = build_jump_traceable_tree(1, random_functionals(3), 400)
    assert run.ok
    delta = run.state["delta"]
    for tr in run.traces.values():
        for m, vals in tr.items():
            n = block_of(m, delta)
            assert len(vals) <= delta[n] * 2 ** (n + 1) <= m * m
    assert run.tree.embedding_failures(6) == []


def test_random_functionals_deterministic():
    assert random_functionals(5) == random_functionals(5)
    assert random_functionals(5) != random_functionals(6)


@given(st.lists(st.tuples(st.text(alphabet="01", min_size=1, max_size=3),
                          st.text(alphabet="01", max_size=3)), max_size=6))
def test_collapses_keep_embedding(pairs):
    T = EmbeddingTree()
    for alpha, tail in pairs:
        T.collapse(alpha, alpha + "1" + tail)
    assert T.embedding_failures(4) == []


def test_collapse_needs_proper_extension():
    with pytest.raises(ContractViolation):
        EmbeddingTree().collapse("01", "01")


# ---------------------------------------------------------------- point trees


def point_run(b: int, stages: int):
    U = UniversalMachine()
    registry = standard_registry(U)
    run = build_ktrivial_point_trees(tree_space(), b, 2, tree_index(0, 2), stages, U, registry=registry)
    return U, run


@pytest.fixture(scope="module")
def generous_run():
    return point_run(8, 200)


def test_point_tree_is_full_binary_in_tree_space(generous_run):
    _, run = generous_run
    assert run.ok
    levels = {2: [(tree_index(0, 2),)]}
    for n in range(3, 7):
        levels[n] = [t + (tree_index(r, n),) for t in levels[n - 1] for r in (0, 1)]
    for n, nodes in levels.items():
        assert set(nodes) <= run.T_tilde


def test_point_tree_G_is_thin(generous_run):
    _, run = generous_run
    by_level: dict = {}
    for eta in run.G:
        if eta:
            by_level.setdefault(len(eta), []).append(eta[-1])
    for labels in by_level.values():
        assert len(labels) == len(set(labels))
    for n in range(3, 7):
        assert run.state["labels_per_level"][str(n)] == [tree_index(0, n), tree_index(1, n)]


def test_point_tree_G_nodes_compressible(generous_run):
    U, run = generous_run
    c_L = [m for m in U.registry if m.name == "point-tree-L"][0].reserved_constant
    assert run.state["c_L"] == c_L
    final = [c for c in run.checks if c["check"] == "G_compressible"]
    assert final and all(c["ok"] for c in final)


def test_point_tree_without_descriptions():
    _, run = point_run(-50, 30)
    assert run.ok
    assert run.T_tilde == {()} and run.G == {()}


def test_point_tree_one_leaf_per_stage(generous_run):
    _, run = generous_run
    leaves = [e["stage"] for e in run.events if e["action"] == "leaf"]
    assert len(leaves) == len(set(leaves))


def test_point_tree_needs_solovay_machine():
    with pytest.raises(ContractViolation):
        build_ktrivial_point_trees(tree_space(), 4, 2, 4, 5, UniversalMachine(), registry={})


# ---------------------------------------------------------------- BLR class


def test_blr_without_convergences_is_full_tree():
    run = build_blr_pi_class(BLRScript(3), 10)
    assert run.ok
    assert run.state["P"] == [format(k, "03b") for k in range(8)]
    assert run.events == []


def test_blr_single_q_guess_change():
    script = blr_script_from({"i_max": 3, "q": [[1, 2, 2]],
                              "gamma": {"1": [["", 2, 3, 5], ["0", 2, 6, 7]]}})
    run = build_blr_pi_class(script, 10)
    assert run.ok
    assert run.state["traces"] == {"1,2": [5, 7]}


def test_blr_rejects_two_convergences_per_stage():
    with pytest.raises(ContractViolation):
        BLRScript(3, q=[(0, 1, 4), (1, 2, 4)])
    with pytest.raises(ContractViolation):
        BLRScript(3, q=[(2, 2, 4)])


def test_blr_r_strategy_keeps_one_side():
    run = build_blr_pi_class(BLRScript(1, phi={0: [(None, 0, 3)]}), 5)
    assert run.state["P"] == ["1"]
    run = build_blr_pi_class(BLRScript(1, phi={0: [(None, 4, 3)]}), 5)
    assert run.state["P"] == ["0"]


blr_scripts = st.builds(
    lambda qs, gammas, phis: BLRScript(
        3,
        phi={i: [(None, v, t)] for i, (v, t) in enumerate(phis)},
        q=[(e, n, t) for (e, n), t in zip(qs, range(2, 40, 3))],
        gamma={e: list(gammas) for e in range(3)},
    ),
    st.lists(st.tuples(st.integers(0, 1), st.integers(2, 3)), max_size=3, unique=True),
    st.lists(st.tuples(st.text(alphabet="01", max_size=4), st.integers(1, 3), st.integers(1, 40),
                       st.integers(0, 6)), max_size=8),
    st.lists(st.tuples(st.integers(0, 1), st.integers(1, 40)), max_size=3),
)


@settings(max_examples=40, deadline=None)
@given(blr_scripts)
def test_blr_invariants_on_random_scripts(script):
    run = build_blr_pi_class(script, 40)
    assert run.failures() == []
    for key, vals in run.state["traces"].items():
        n = int(key.split(",")[1])
        assert len(vals) <= 2 ** n


def test_blr_deterministic():
    data = {"i_max": 3, "phi": {"0": [[None, 1, 4]]}, "q": [[0, 1, 3], [1, 2, 7]],
            "gamma": {"0": [["0", 1, 2, 1]], "1": [["1", 2, 8, 1]]}}
    a = build_blr_pi_class(blr_script_from(data), 20)
    b = build_blr_pi_class(blr_script_from(json.loads(json.dumps(data))), 20)
    assert a.events == b.events and a.state == b.state


# ---------------------------------------------------------------- scripts


def test_load_script_sources(tmp_path):
    data = {"functionals": [[["01", 9, 2, 3]]]}
    path = tmp_path / "script.json"
    path.write_text(json.dumps(data))
    for source in (data, json.dumps(data), str(path)):
        assert functionals_from_script(load_script(source)) == [[Convergence("01", 9, 2, 3)]]
