"""The five local checking mechanisms.

All of them are read-only: they look at the state through a chooser (so
the same code serves simulation and exact branch enumeration) and report
what they would mark; the engine applies the marking.  Shared rules:

* A checker sees public labels only.  A CF node reveals its error with
  probability ``p_e`` per encounter; a node with a PF parent edge is
  recognized as bad with certainty (the flag is public).
* Traversal never enters a PF node.
* Marking is sound by construction: everything marked sits on or below a
  recognized bad node, hence is hidden-False whenever the state is.

The two whole-check mechanisms (``stringy``, ``bfs``) expect the caller
to have flipped the overall probability-p coin already.  The three
per-parent mechanisms flip one coin per parent edge themselves, repeats
included: a parent drawn twice is worth two chances.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .state import CF, PF


@dataclass
class CheckOutcome:
    """What one check did: coin results, finds, the would-be PF set, and
    the visit order for audits."""
    performed: list = field(default_factory=list)
    found: list = field(default_factory=list)
    marked: set = field(default_factory=set)
    visited: list = field(default_factory=list)


def _flagged(state, u: int, p_e, chooser) -> bool:
    """Does examining ``u`` expose it as minimal false?

    The CF detection coin is always consumed first when the node is CF,
    so decision streams are identical whether or not the node also has a
    PF parent (which is detected for free afterwards).
    """
    hit = False
    if state.labels[u] == CF:
        hit = chooser.maybe(p_e)
    return hit or state.pf_parent_edges[u] > 0


def _descendants_within(state, visited, found: int) -> set:
    """``found`` plus every visited node lying below it via edges whose
    upper endpoint is also in the closure.  Fixpoint over the visited
    list; these sets are tiny (a radius-k ball)."""
    closure = {found}
    grew = True
    while grew:
        grew = False
        for x in visited:
            if x in closure:
                continue
            for parent in state.parents[x]:
                if parent in closure:
                    closure.add(x)
                    grew = True
                    break
    return closure


def check_stringy(state, v: int, k: int, p_e, chooser) -> CheckOutcome:
    """One random upward walk of at most k steps.

    The new node is examined first, then each step picks a parent edge
    uniformly (multiplicity counts).  The walk ends at the first detected
    CF node, which is marked along with the walked path; or at the first
    edge into a PF node, where only the walked path is marked (its top
    node has a publicly flagged parent, which is what gave it away).  An
    undetected CF is walked straight through.
    """
    walked = [v]
    if state.labels[v] == CF and chooser.maybe(p_e):
        return CheckOutcome([True], [v], {v}, walked)
    current = v
    for _ in range(k):
        edges = state.parents[current]
        if not edges:
            break
        target = edges[chooser.uniform_index(len(edges))]
        if state.labels[target] == PF:
            return CheckOutcome([True], [walked[-1]], set(walked), walked)
        walked.append(target)
        current = target
        if state.labels[target] == CF and chooser.maybe(p_e):
            return CheckOutcome([True], [target], set(walked), walked)
    return CheckOutcome([True], [], set(), walked)


def _bfs_path(prev, found: int) -> set:
    path = {found}
    node = found
    while prev[node] is not None:
        node = prev[node]
        path.add(node)
    return path


def check_bfs(state, v: int, k: int, p_e, chooser,
              path_only: bool = False) -> CheckOutcome:
    """Breadth-first search upward from v to depth k, stopping at the
    first node recognized as minimal false.

    Canonical order: FIFO queue seeded with v, parents pushed in edge
    insertion order, each node enqueued once, recognition happens when a
    node is popped.  The find is marked together with every visited node
    below it (or, with ``path_only``, just the discovery path: the weaker
    reading kept for sensitivity runs).
    """
    seen = {v}
    depth = {v: 0}
    prev = {v: None}
    order: list = []
    queue = deque([v])
    while queue:
        u = queue.popleft()
        order.append(u)
        if _flagged(state, u, p_e, chooser):
            if path_only:
                marked = _bfs_path(prev, u)
            else:
                marked = _descendants_within(state, order, u)
            return CheckOutcome([True], [u], marked, order)
        if depth[u] < k:
            for w in state.parents[u]:
                if w in seen or state.labels[w] == PF:
                    continue
                seen.add(w)
                depth[w] = depth[u] + 1
                prev[w] = u
                queue.append(w)
    return CheckOutcome([True], [], set(), order)


def _ball_first(state, start: int, cap: int, p_e, chooser, path_only: bool):
    """BFS from ``start`` to depth ``cap``, stopping at the first
    recognized node.  Returns (found, marked, order)."""
    if cap < 0 or state.labels[start] == PF:
        return None, set(), []
    seen = {start}
    depth = {start: 0}
    prev = {start: None}
    order: list = []
    queue = deque([start])
    while queue:
        u = queue.popleft()
        order.append(u)
        if _flagged(state, u, p_e, chooser):
            if path_only:
                return u, _bfs_path(prev, u), order
            return u, _descendants_within(state, order, u), order
        if depth[u] < cap:
            for w in state.parents[u]:
                if w in seen or state.labels[w] == PF:
                    continue
                seen.add(w)
                depth[w] = depth[u] + 1
                prev[w] = u
                queue.append(w)
    return None, set(), order


def _ball_all(state, start: int, cap: int, p_e, chooser):
    """Exhaust the radius-``cap`` ball above ``start``, recognizing every
    reachable minimal false node.  Recognized nodes are not expanded
    through, so anything hiding strictly behind one stays hidden from
    this sweep.  Returns (founds, marked, order)."""
    if cap < 0 or state.labels[start] == PF:
        return [], set(), []
    seen = {start}
    depth = {start: 0}
    order: list = []
    founds: list = []
    queue = deque([start])
    while queue:
        u = queue.popleft()
        order.append(u)
        if _flagged(state, u, p_e, chooser):
            founds.append(u)
            continue
        if depth[u] < cap:
            for w in state.parents[u]:
                if w in seen or state.labels[w] == PF:
                    continue
                seen.add(w)
                depth[w] = depth[u] + 1
                queue.append(w)
    marked: set = set()
    for f in founds:
        marked |= _descendants_within(state, order, f)
    return founds, marked, order


def check_exhaustive_bfs(state, v: int, parent_edges, k: int, p, p_e,
                         chooser, path_only: bool = False) -> CheckOutcome:
    """Per parent edge, with probability p: examine the new node itself,
    then search upward from that parent to depth k-1.  The whole
    procedure stops at the first find, which is marked with its visited
    descendants and the new node."""
    out = CheckOutcome()
    for u in parent_edges:
        go = chooser.maybe(p)
        out.performed.append(go)
        if not go:
            continue
        out.visited.append(v)
        if state.labels[v] == CF and chooser.maybe(p_e):
            out.found = [v]
            out.marked = {v}
            return out
        found, marked, order = _ball_first(state, u, k - 1, p_e, chooser,
                                           path_only)
        out.visited.extend(order)
        if found is not None:
            out.found = [found]
            out.marked = marked | {v}
            return out
    return out


def check_parentwise_bfs(state, v: int, parent_edges, k: int, p, p_e,
                         chooser, path_only: bool = False) -> CheckOutcome:
    """Like the exhaustive variant, but a find only closes its own parent
    edge; the next edge restarts fresh, so up to one find per edge."""
    out = CheckOutcome()
    for u in parent_edges:
        go = chooser.maybe(p)
        out.performed.append(go)
        if not go:
            continue
        out.visited.append(v)
        if state.labels[v] == CF and chooser.maybe(p_e):
            if v not in out.found:
                out.found.append(v)
            out.marked.add(v)
            continue
        found, marked, order = _ball_first(state, u, k - 1, p_e, chooser,
                                           path_only)
        out.visited.extend(order)
        if found is not None:
            if found not in out.found:
                out.found.append(found)
            out.marked |= marked | {v}
    return out


def check_complete(state, v: int, parent_edges, k: int, p, p_e,
                   chooser) -> CheckOutcome:
    """Per parent edge, with probability p, sweep the whole radius-(k-1)
    ball above that parent and mark every minimal false node recognized,
    with its visited descendants.  Nothing stops early; catching the new
    node itself does not cancel the sweep."""
    out = CheckOutcome()
    for u in parent_edges:
        go = chooser.maybe(p)
        out.performed.append(go)
        if not go:
            continue
        out.visited.append(v)
        if state.labels[v] == CF and chooser.maybe(p_e):
            if v not in out.found:
                out.found.append(v)
            out.marked.add(v)
        founds, marked, order = _ball_all(state, u, k - 1, p_e, chooser)
        out.visited.extend(order)
        if founds:
            for f in founds:
                if f not in out.found:
                    out.found.append(f)
            out.marked |= marked | {v}
    return out


MECHANISMS = ("stringy", "bfs", "exhaustive-bfs", "parentwise-bfs", "complete")

WHOLE_CHECK = {"stringy", "bfs"}
PER_EDGE = {"exhaustive-bfs", "parentwise-bfs", "complete"}


def run_check(mechanism: str, state, v: int, parent_edges, k: int, p, p_e,
              chooser, path_only: bool = False) -> CheckOutcome:
    """Uniform entry point.  For whole-check mechanisms the p coin is
    flipped here; per-edge mechanisms flip their own."""
    if mechanism == "stringy":
        if not chooser.maybe(p):
            return CheckOutcome([False], [], set(), [])
        return check_stringy(state, v, k, p_e, chooser)
    if mechanism == "bfs":
        if not chooser.maybe(p):
            return CheckOutcome([False], [], set(), [])
        return check_bfs(state, v, k, p_e, chooser, path_only)
    if mechanism == "exhaustive-bfs":
        return check_exhaustive_bfs(state, v, parent_edges, k, p, p_e,
                                    chooser, path_only)
    if mechanism == "parentwise-bfs":
        return check_parentwise_bfs(state, v, parent_edges, k, p, p_e,
                                    chooser, path_only)
    if mechanism == "complete":
        return check_complete(state, v, parent_edges, k, p, p_e, chooser)
    raise ValueError(f"unknown mechanism {mechanism!r}")
