import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from comptree import (
    RiskTable,
    TreeStructure,
    brute_force_search,
    build_augmented_graph,
    chu_liu_edmonds,
    tree_score,
)
from comptree.arborescence import greedy_parents
from comptree.errors import InvalidTree, TooLarge
from comptree.risk import edge_signals
from comptree.selection import solve
from oracles import brute_force_min, has_cycle, score


def random_table(rng, p, integer=False):
    if integer:
        # few distinct values: lots of exact ties
        edge = rng.integers(0, 4, size=(p, p)).astype(float)
        root = rng.integers(2, 5, size=p).astype(float)
    else:
        root = rng.uniform(0.5, 1.5, size=p)
        edge = root[:, None] - rng.uniform(0.0, 0.6, size=(p, p))
    return RiskTable.from_risks(edge, root)


def test_graph_p1():
    g = build_augmented_graph(RiskTable.from_risks([[0.0]], [0.7]), 0.2)
    assert g.p == 1 and g.edge(0, 1) == 0.7


def test_graph_alpha_zero_equals_raw_risks(rng):
    tab = random_table(rng, 3)
    g = build_augmented_graph(tab, 0.0)
    for j in range(3):
        assert g.edge(0, j + 1) == tab.root_risk[j]
        for k in range(3):
            if k != j:
                assert g.edge(k + 1, j + 1) == tab.edge_risk[j, k]


def test_graph_p2_example_weights():
    tab = RiskTable.from_risks([[0, 0.9], [0.2, 0]], [1.0, 1.0])
    g = build_augmented_graph(tab, 0.1)
    # the root edges carry the root risk only, so an arborescence weighs exactly S(T; alpha)
    assert g.edge(0, 1) == 1.0 and g.edge(0, 2) == 1.0
    assert g.edge(1, 2) == pytest.approx(0.3) and g.edge(2, 1) == pytest.approx(1.0)
    assert chu_liu_edmonds(g).parent == (None, 0)


def test_negative_alpha_rejected():
    with pytest.raises(ValueError):
        build_augmented_graph(RiskTable.from_risks([[0.0]], [0.7]), -0.1)


def test_huge_alpha_gives_empty_forest(rng):
    tab = random_table(rng, 5)
    alpha = float(np.nanmax(edge_signals(tab))) + 1.0
    assert solve(tab, alpha).parent == (None,) * 5


def test_brute_force_p1_and_guard():
    assert brute_force_search(RiskTable.from_risks([[0.0]], [1.0]), 0.0).parent == (None,)
    with pytest.raises(TooLarge):
        brute_force_search(RiskTable.from_risks(np.zeros((9, 9)), np.ones(9)), 0.0)


def test_symmetric_tie_picks_smallest_parent_vector():
    tab = RiskTable.from_risks([[0, 0.5], [0.5, 0]], [1.0, 1.0])
    # (None, 0) and (1, None) tie; the lexicographically smaller one wins
    assert brute_force_search(tab, 0.0).parent == (None, 0)
    assert solve(tab, 0.0).parent == (None, 0)
    # root ties with parent: the root wins
    tab = RiskTable.from_risks([[0, 1.0], [1.0, 0]], [1.0, 1.0])
    assert solve(tab, 0.0).parent == (None, None)


@pytest.mark.parametrize("p", [2, 3, 4, 5])
@pytest.mark.parametrize("alpha", [0.0, 0.1, 1.0])
@pytest.mark.parametrize("integer", [False, True])
def test_solver_matches_oracles(p, alpha, integer):
    rng = np.random.default_rng(1000 * p + int(10 * alpha) + integer)
    for _ in range(25):
        tab = random_table(rng, p, integer)
        fast = solve(tab, alpha)
        slow = brute_force_search(tab, alpha)
        assert fast == slow
        assert tree_score(tab, fast, alpha) == tree_score(tab, slow, alpha)
        best, argmins = brute_force_min(tab, alpha)
        assert score(tab, fast.parent, alpha) == pytest.approx(best, abs=1e-12)
        if integer and alpha != 0.1:
            # integer weights sum exactly, so float ties are true ties and the
            # tie rule must pick the smallest optimal parent vector
            key = lambda par: tuple(-1 if k is None else k for k in par)
            assert fast.parent == min(argmins, key=key)


@given(st.integers(1, 7), st.integers(0, 2**32 - 1), st.floats(0, 1), st.floats(0, 1))
def test_monotone_sparsity_and_validity(p, seed, a1, a2):
    rng = np.random.default_rng(seed)
    tab = random_table(rng, p)
    lo, hi = sorted((a1, a2))
    t_lo, t_hi = solve(tab, lo), solve(tab, hi)
    assert len(t_lo.edges) >= len(t_hi.edges)
    for t in (t_lo, t_hi):
        assert not has_cycle(t.parent)
        assert len(t.roots) >= 1


@given(st.integers(2, 7), st.integers(0, 2**32 - 1), st.floats(0, 0.5))
def test_fast_path_when_greedy_is_acyclic(p, seed, alpha):
    rng = np.random.default_rng(seed)
    tab = random_table(rng, p)
    g = build_augmented_graph(tab, alpha)
    greedy = greedy_parents(g)
    if not has_cycle(greedy):
        assert chu_liu_edmonds(g).parent == greedy


def test_large_p_beats_perturbations(rng):
    p = 25
    tab = random_table(rng, p)
    alpha = 0.05
    best = solve(tab, alpha)
    s = tree_score(tab, best, alpha)
    # no single-parent change that keeps a forest does better
    for j in range(p):
        for k in [None] + [k for k in range(p) if k != j]:
            par = list(best.parent)
            par[j] = k
            if not has_cycle(par):
                assert tree_score(tab, TreeStructure(tuple(par)), alpha) >= s - 1e-12


def test_tree_structure_api():
    t = TreeStructure((None, 0, 1, None))
    assert t.p == 4 and t.roots == [0, 3] and t.edges == {(0, 1), (1, 2)}
    assert TreeStructure.empty(3).parent == (None, None, None)
    with pytest.raises(InvalidTree):
        TreeStructure((None, 5))
    with pytest.raises(InvalidTree):
        TreeStructure(())
