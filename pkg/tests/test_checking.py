"""Checking mechanism semantics: walks, search order, stop rules, marking
scope, soundness and the dominance chain."""

from collections import deque

import pytest
from hypothesis import given, settings, strategies as st

from ckplab.checking import (
    CheckOutcome, check_stringy, check_bfs, check_exhaustive_bfs,
    check_parentwise_bfs, check_complete, run_check, MECHANISMS,
)
from ckplab.rand import ScriptChooser, SimChooser
from ckplab.state import CT, CF, PF, CkpState


def chain(labels):
    s = CkpState()
    s.add_root(labels[0])
    for i, lab in enumerate(labels[1:], start=1):
        s.add_node([i - 1], lab, birth=i)
    return s


def pt_ball(state, v, k):
    """All nodes within k upward PT steps of v, traversal unrestricted."""
    seen = {v}
    queue = deque([(v, 0)])
    while queue:
        u, d = queue.popleft()
        if d == k:
            continue
        for w in state.parents[u]:
            if w not in seen and state.labels[w] != PF:
                seen.add(w)
                queue.append((w, d + 1))
    return seen


# -- stringy ---------------------------------------------------------------

def test_stringy_finds_cf_on_unique_path():
    s = chain([CF, CT, CT])
    out = check_stringy(s, 2, k=2, p_e=1, chooser=ScriptChooser([]))
    assert out.found == [0]
    assert out.marked == {0, 1, 2}
    assert out.visited == [2, 1, 0]


def test_stringy_depth_limit():
    s = chain([CF, CT, CT, CT])
    out = check_stringy(s, 3, k=2, p_e=1, chooser=ScriptChooser([]))
    assert out.found == [] and out.marked == set()


def test_stringy_diamond_both_branches_reach_the_error():
    s = CkpState()
    s.add_root(CF)
    s.add_node([0], CT, birth=1)
    s.add_node([0], CT, birth=2)
    s.add_node([1, 2], CT, birth=3)
    for branch in (0, 1):
        out = check_stringy(s, 3, k=2, p_e=1,
                            chooser=ScriptChooser([branch]))
        assert out.found == [0]
        assert out.marked == {3, branch + 1, 0}


def test_stringy_pf_edge_marks_walked_path_only():
    s = chain([CF, CT, CT])
    s.mark_pf([0])
    out = check_stringy(s, 2, k=5, p_e=1, chooser=ScriptChooser([]))
    assert out.found == [1]            # the walked top node, a root
    assert out.marked == {1, 2}
    assert 0 not in out.visited


def test_stringy_self_check_and_walkthrough():
    s = chain([CF, CF])
    out = check_stringy(s, 1, k=1, p_e=0.5, chooser=ScriptChooser([True]))
    assert out.found == [1] and out.marked == {1}
    # detection fails on v, then fails on the parent: walk passes through
    out = check_stringy(s, 1, k=1, p_e=0.5,
                        chooser=ScriptChooser([False, False]))
    assert out.found == [] and out.marked == set()
    assert out.visited == [1, 0]


# -- bfs -------------------------------------------------------------------

def test_bfs_finds_nearest_and_marks_descendants():
    s = chain([CF, CT, CT])
    out = check_bfs(s, 2, k=2, p_e=1, chooser=ScriptChooser([]))
    assert out.found == [0]
    assert out.marked == {0, 1, 2}


def test_bfs_recognizes_roots_without_visiting_pf():
    s = chain([CF, CT, CT])
    s.mark_pf([0])
    out = check_bfs(s, 2, k=1, p_e=1, chooser=ScriptChooser([]))
    assert out.found == [1]
    assert out.marked == {1, 2}
    assert 0 not in out.visited


def test_bfs_clean_neighborhood_finds_nothing():
    s = chain([CT, CT, CT])
    out = check_bfs(s, 2, k=2, p_e=1, chooser=ScriptChooser([]))
    assert out.found == [] and out.marked == set()
    assert out.visited == [2, 1, 0]


def test_bfs_marks_all_visited_descendants_not_just_the_path():
    # diamond: both mid nodes were visited before the top CF was popped,
    # both descend from it, both get marked
    s = CkpState()
    s.add_root(CF)
    s.add_node([0], CT, birth=1)
    s.add_node([0], CT, birth=2)
    s.add_node([1, 2], CT, birth=3)
    out = check_bfs(s, 3, k=2, p_e=1, chooser=ScriptChooser([]))
    assert out.found == [0]
    assert out.marked == {0, 1, 2, 3}
    path = check_bfs(s, 3, k=2, p_e=1, chooser=ScriptChooser([]),
                     path_only=True)
    assert path.marked == {0, 1, 3}    # first-edge discovery chain


def test_bfs_depth_cap_blocks_distant_error():
    s = chain([CF, CT, CT, CT])
    out = check_bfs(s, 3, k=2, p_e=1, chooser=ScriptChooser([]))
    assert out.found == []
    assert set(out.visited) == {3, 2, 1}


# -- per-parent mechanisms -------------------------------------------------

def test_exhaustive_self_catch_stops_everything():
    s = CkpState()
    s.add_root(CT)
    s.add_node([0], CT, birth=1)
    s.add_node([0, 1], CF, birth=2)
    out = check_exhaustive_bfs(s, 2, [0, 1], k=3, p=0.5, p_e=0.5,
                               chooser=ScriptChooser([True, True]))
    assert out.found == [2]
    assert out.marked == {2}
    assert out.performed == [True]     # second edge never reached


def test_exhaustive_finds_cf_parent():
    s = chain([CF, CT])
    s.add_node([0], CT, birth=2)
    out = check_exhaustive_bfs(s, 2, [0], k=1, p=1, p_e=1,
                               chooser=ScriptChooser([]))
    assert out.found == [0]
    assert out.marked == {0, 2}


def test_exhaustive_coin_per_edge_in_order():
    # parents: u1 with a clean ancestry, u2 one step below a CF node;
    # first coin fails, second succeeds
    s = CkpState()
    s.add_root(CT)                      # 0: clean
    s.add_root(CF)                      # 1: the error
    s.add_node([0], CT, birth=1)        # 2 = u1
    s.add_node([1], CT, birth=2)        # 3 = u2
    s.add_node([2, 3], CT, birth=3)     # 4 = v
    out = check_exhaustive_bfs(s, 4, [2, 3], k=2, p=0.5, p_e=1,
                               chooser=ScriptChooser([False, True]))
    assert out.performed == [False, True]
    assert out.found == [1]
    assert out.marked == {1, 3, 4}


def test_parentwise_collects_one_find_per_edge():
    # two parents sitting under two distinct CF ancestors
    s = CkpState()
    s.add_root(CF)
    s.add_root(CF)
    s.add_node([0], CT, birth=1)       # 2
    s.add_node([1], CT, birth=2)       # 3
    s.add_node([2, 3], CT, birth=3)    # 4 = v
    out = check_parentwise_bfs(s, 4, [2, 3], k=2, p=1, p_e=1,
                               chooser=ScriptChooser([]))
    assert out.found == [0, 1]
    assert out.marked == {0, 1, 2, 3, 4}


def test_parentwise_single_parent_equals_exhaustive():
    s = chain([CF, CT, CT])
    a = check_exhaustive_bfs(s, 2, [1], k=3, p=1, p_e=1,
                             chooser=ScriptChooser([]))
    b = check_parentwise_bfs(s, 2, [1], k=3, p=1, p_e=1,
                             chooser=ScriptChooser([]))
    assert (a.found, a.marked, a.visited) == (b.found, b.marked, b.visited)


def test_complete_marks_error_with_descendants():
    s = chain([CF, CT, CT])
    out = check_complete(s, 2, [1], k=2, p=1, p_e=1,
                         chooser=ScriptChooser([]))
    assert out.found == [0]
    assert out.marked == {0, 1, 2}


def test_complete_finds_several_side_by_side():
    s = CkpState()
    s.add_root(CF)
    s.add_root(CF)
    s.add_node([0, 1], CT, birth=1)    # 2
    s.add_node([2], CT, birth=2)       # 3 = v
    out = check_complete(s, 3, [2], k=2, p=1, p_e=1,
                         chooser=ScriptChooser([]))
    assert out.found == [0, 1]
    assert out.marked == {0, 1, 2, 3}


def test_complete_does_not_expand_past_a_recognized_node():
    s = chain([CF, CF, CT, CT])        # 0 hides strictly behind 1
    out = check_complete(s, 3, [2], k=3, p=1, p_e=1,
                         chooser=ScriptChooser([]))
    assert out.found == [1]
    assert 0 not in out.visited


def test_complete_self_catch_does_not_cancel_the_sweep():
    s = chain([CF, CT])
    s.add_node([1], CF, birth=2)       # v is itself CF, error 2 hops up
    out = check_complete(s, 2, [1], k=3, p=1, p_e=1,
                         chooser=ScriptChooser([]))
    assert out.found == [2, 0]
    assert out.marked == {0, 1, 2}


def test_run_check_whole_check_coin():
    s = chain([CF, CT])
    out = run_check("bfs", s, 1, [0], k=2, p=0.5, p_e=1,
                    chooser=ScriptChooser([False]))
    assert out.performed == [False]
    assert out.found == [] and out.visited == []
    out = run_check("stringy", s, 1, [0], k=2, p=0.5, p_e=1,
                    chooser=ScriptChooser([True]))
    assert out.found == [0]
    with pytest.raises(ValueError):
        run_check("sideways", s, 1, [0], k=2, p=1, p_e=1,
                  chooser=ScriptChooser([]))


# -- shared invariants on random states ------------------------------------

@st.composite
def state_with_new_node(draw):
    s = CkpState()
    s.add_root(draw(st.sampled_from([CT, CF])))
    n_steps = draw(st.integers(min_value=1, max_value=20))
    for t in range(1, n_steps + 1):
        pt = s.pt_ids()
        if not pt:
            break
        if draw(st.booleans()) and s.minimal_false_set():
            s.mark_pf([draw(st.sampled_from(s.minimal_false_set()))])
            continue
        deg = draw(st.integers(min_value=1, max_value=3))
        s.add_node([draw(st.sampled_from(pt)) for _ in range(deg)],
                   draw(st.sampled_from([CT, CT, CF])), birth=t)
    pt = s.pt_ids()
    if not pt:
        s.add_root(CF)
        pt = s.pt_ids()
    deg = draw(st.integers(min_value=1, max_value=3))
    parents = [draw(st.sampled_from(pt)) for _ in range(deg)]
    v = s.add_node(parents, draw(st.sampled_from([CT, CT, CF])),
                   birth=n_steps + 1)
    return s, v, parents


@given(state_with_new_node(), st.sampled_from(MECHANISMS),
       st.integers(min_value=1, max_value=4), st.integers())
@settings(max_examples=200, deadline=None)
def test_soundness_radius_and_connectivity(svp, mechanism, k, seed):
    s, v, parents = svp
    chooser = SimChooser(seed % (2 ** 32))
    out = run_check(mechanism, s, v, parents, k=k, p=0.7, p_e=0.6,
                    chooser=chooser)
    ball = pt_ball(s, v, k)
    for u in out.marked:
        assert s.is_false[u], "marked a hidden-True node"
    for u in out.visited:
        assert u in ball, "visited outside the radius"
    assert out.marked <= set(out.visited)
    if out.marked and out.marked != {v}:
        assert v in out.marked
    for f in out.found:
        assert s.is_minimal_false(f) or (s.labels[f] == CF)


@given(state_with_new_node(), st.integers(min_value=1, max_value=4))
@settings(max_examples=200, deadline=None)
def test_dominance_chain_under_forced_coins(svp, k):
    s, v, parents = svp
    # p = 1 and p_e = 1 consume no randomness: outcomes are deterministic
    ex = check_exhaustive_bfs(s, v, parents, k, 1, 1, ScriptChooser([]))
    pw = check_parentwise_bfs(s, v, parents, k, 1, 1, ScriptChooser([]))
    co = check_complete(s, v, parents, k, 1, 1, ScriptChooser([]))
    st_out = check_stringy(s, v, k, 1, SimChooser(9))
    assert ex.marked <= pw.marked
    assert pw.marked <= co.marked
    assert st_out.marked <= pt_ball(s, v, k)
