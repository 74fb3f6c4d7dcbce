"""Deep recomputation audits for a running engine.

Everything the engine maintains incrementally (degrees, attachment
weights, membership counts, the zero-run marker) is recomputed here from
the raw node lists and compared.  These checks are deliberately written
against first principles rather than through the engine's own helpers,
so a bookkeeping bug cannot hide by being applied consistently on both
sides.
"""

from __future__ import annotations

from collections import Counter

from .state import CT, PF, bfs_component_partition, pt_false_distances
from .attachment import is_nondecreasing
from .evolution import AuditViolation, verify_pf_frozen
from . import state as state_mod

DISTANCE_BASE = 3.0  # growth factor of the audit's distance-weighted sum


def audit_edges(st) -> None:
    """Parent and child lists must mirror each other with multiplicity,
    and every cached degree must equal a recount."""
    n = len(st.labels)
    down = [Counter() for _ in range(n)]
    for v in range(n):
        for u in st.parents[v]:
            down[u][v] += 1
    for u in range(n):
        if Counter(st.children[u]) != down[u]:
            raise AuditViolation(f"child list of node {u} does not mirror "
                                 "the parent lists")
    for v in range(n):
        pt = ct = 0
        for w in st.children[v]:
            if st.labels[w] != PF:
                pt += 1
            if st.labels[w] == CT:
                ct += 1
        if st.deg_pt[v] != pt:
            raise AuditViolation(
                f"node {v}: cached PT degree {st.deg_pt[v]}, recount {pt}")
        if st.deg_ct[v] != ct:
            raise AuditViolation(
                f"node {v}: cached CT degree {st.deg_ct[v]}, recount {ct}")
        pf_edges = sum(1 for u in st.parents[v] if st.labels[u] == PF)
        if st.pf_parent_edges[v] != pf_edges:
            raise AuditViolation(
                f"node {v}: cached PF parent edges {st.pf_parent_edges[v]}, "
                f"recount {pf_edges}")


def audit_weights(engine) -> None:
    """The weight index must hold a(PT degree) for live nodes, zero for
    the PF ones, with a consistent running total and positive count."""
    st = engine.state
    attach = engine.features.attach
    windex = engine.windex
    if windex.size != len(st.labels):
        raise AuditViolation(
            f"weight index tracks {windex.size} nodes, state has "
            f"{len(st.labels)}")
    total = 0.0
    positive = 0
    for v in range(len(st.labels)):
        want = 0.0 if st.labels[v] == PF else attach.evaluate(st.deg_pt[v])
        got = windex.weights[v]
        if got != want:
            raise AuditViolation(
                f"node {v}: indexed weight {got}, expected {want}")
        total += want
        positive += want > 0
    if abs(windex.total - total) > 1e-9 * max(1.0, total):
        raise AuditViolation(
            f"weight total drifted: maintained {windex.total}, "
            f"recomputed {total}")
    if windex.positive != positive:
        raise AuditViolation(
            f"positive-weight count {windex.positive}, recount {positive}")


def audit_counts(engine) -> None:
    """Every incrementally maintained counter and membership flag must
    match a from-scratch pass over the state."""
    st = engine.state
    simple = engine.features.simple
    n = len(st.labels)
    pt_false = sum(1 for v in range(n)
                   if st.labels[v] != PF and st.is_false[v])
    pf = sum(1 for lab in st.labels if lab == PF)
    if engine.pt_false != pt_false:
        raise AuditViolation(
            f"PT False count {engine.pt_false}, recount {pt_false}")
    if engine.pf_count != pf:
        raise AuditViolation(f"PF count {engine.pf_count}, recount {pf}")
    if st.pf_total != pf:
        raise AuditViolation(f"state PF counter {st.pf_total}, recount {pf}")
    for v in range(n):
        if engine.f_mem[v] != st.is_minimal_false(v):
            raise AuditViolation(f"minimal-false flag stale on node {v}")
        if engine.l_mem[v] != st.is_ct_nonroot_leaf(v, simple):
            raise AuditViolation(f"leaf flag stale on node {v}")
    if engine.f_count != sum(engine.f_mem):
        raise AuditViolation("minimal-false count out of step with flags")
    if engine.l_count != sum(engine.l_mem):
        raise AuditViolation("leaf count out of step with flags")
    zero = engine.pt_false == 0
    if zero != (engine.zero_since is not None):
        raise AuditViolation("zero-run marker disagrees with PT False count")


def audit_partition(st) -> None:
    """The upward-BFS components partition the PT False nodes exactly:
    anchors are minimal false, members reach their anchor through a real
    chain of PT parent edges."""
    anchor_of, components = bfs_component_partition(st)
    expected = {v for v in range(len(st.labels))
                if st.labels[v] != PF and st.is_false[v]}
    if set(anchor_of) != expected:
        raise AuditViolation("component membership does not cover the PT "
                             "False nodes exactly")
    covered = [v for members in components.values() for v in members]
    if sorted(covered) != sorted(anchor_of):
        raise AuditViolation("component lists disagree with the anchor map")
    for anchor, members in components.items():
        if not st.is_minimal_false(anchor):
            raise AuditViolation(f"anchor {anchor} is not minimal false")
        if anchor_of[anchor] != anchor:
            raise AuditViolation(f"anchor {anchor} maps away from itself")
        for v in members:
            _, _, chain = state_mod.anchor_bfs(st, v)
            if chain[0] != v or chain[-1] != anchor_of[v]:
                raise AuditViolation(
                    f"node {v}: anchor chain has wrong endpoints")
            for a, b in zip(chain, chain[1:]):
                if b not in st.parents[a] or st.labels[b] == PF:
                    raise AuditViolation(
                        f"node {v}: anchor chain takes a phantom edge "
                        f"{a} -> {b}")


def audit_distance_sum(engine) -> None:
    """With a nondecreasing attachment of weight at least one at degree
    zero, the distance-weighted sum over PT False nodes dominates their
    plain count (every term is at least one)."""
    attach = engine.features.attach
    if attach.evaluate(0) < 1 or not is_nondecreasing(attach):
        return
    st = engine.state
    total = 0.0
    for v, d in pt_false_distances(st).items():
        total += attach.evaluate(st.deg_pt[v]) * DISTANCE_BASE ** d
    if total < engine.pt_false - 1e-9:
        raise AuditViolation(
            f"distance-weighted sum {total} fell below the PT False "
            f"count {engine.pt_false}")


def full_audit(engine) -> None:
    """Run every deep audit against the engine's current state."""
    st = engine.state
    audit_edges(st)
    state_mod.verify_truth_closure(st)
    audit_weights(engine)
    audit_counts(engine)
    audit_partition(st)
    audit_distance_sum(engine)
    verify_pf_frozen(engine)
