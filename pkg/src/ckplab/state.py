"""Labeled growth-DAG state.

Nodes carry a public label and a hidden truth value.  Labels:

* ``CT``: treated as correct; no error has been observed on it.
* ``CF``: carries an undiscovered error (label looks like CT to the public,
  the distinction only matters to checks that examine the node).
* ``PF``: publicly flagged false.  Terminal: a PF node never changes again
  and never gains children.

``PT`` denotes the possibly-true labels {CT, CF}.  A node's hidden truth is
False exactly when it was born CF or descends from a node born CF.

Edges point child -> parent and may repeat (a child can attach several edges
to one parent); every derived quantity that talks about degree counts edge
multiplicity.
"""

from __future__ import annotations

from collections import deque

CT = 0
CF = 1
PF = 2

LABEL_NAMES = {CT: "CT", CF: "CF", PF: "PF"}
LABEL_CODES = {v: k for k, v in LABEL_NAMES.items()}

_FORMAT_HEADER = "ckp-state v1"


class StateError(ValueError):
    """Raised on an attempt to build or mutate an illegal state."""


class CkpState:
    """Growing DAG with per-node labels, truth values and degree indices.

    Stored column-wise so snapshots can be handed to the accelerated engine
    without translation.  Maintained per node:

    * ``labels[v]``, ``is_false[v]``, ``birth[v]``, ``adversarial[v]``
    * ``parents[v]`` / ``children[v]``: edge lists in insertion order,
      repeats kept
    * ``deg_pt[v]``: child edges whose child is currently labeled CT or CF
    * ``deg_ct[v]``: child edges whose child is currently labeled CT
    * ``pf_parent_edges[v]``: parent edges leading to a PF node
    """

    __slots__ = ("labels", "is_false", "birth", "adversarial",
                 "parents", "children", "deg_pt", "deg_ct", "pf_parent_edges",
                 "pf_total")

    def __init__(self):
        self.labels: list[int] = []
        self.is_false: list[bool] = []
        self.birth: list[int] = []
        self.adversarial: list[bool] = []
        self.parents: list[list[int]] = []
        self.children: list[list[int]] = []
        self.deg_pt: list[int] = []
        self.deg_ct: list[int] = []
        self.pf_parent_edges: list[int] = []
        self.pf_total: int = 0

    def __len__(self) -> int:
        return len(self.labels)

    # -- construction -----------------------------------------------------

    def add_root(self, label: int, birth: int = 0) -> int:
        """Add a parentless origin node (only sensible while seeding)."""
        if label not in (CT, CF):
            raise StateError(f"origin label must be CT or CF, got {label!r}")
        v = len(self.labels)
        self.labels.append(label)
        self.is_false.append(label == CF)
        self.birth.append(birth)
        self.adversarial.append(False)
        self.parents.append([])
        self.children.append([])
        self.deg_pt.append(0)
        self.deg_ct.append(0)
        self.pf_parent_edges.append(0)
        return v

    def add_node(self, parent_ids, label: int, birth: int,
                 adversarial: bool = False) -> int:
        """Attach a new node below ``parent_ids`` (repeats allowed).

        Every parent must already exist and be PT: attaching below a PF node
        is illegal, which is what keeps PF terminal.  Returns the new id.
        """
        parent_ids = list(parent_ids)
        if not parent_ids:
            raise StateError("a new node needs at least one parent edge")
        if label not in (CT, CF):
            raise StateError(f"new node label must be CT or CF, got {label!r}")
        n = len(self.labels)
        for u in parent_ids:
            if not 0 <= u < n:
                raise StateError(f"parent id {u} out of range")
            if self.labels[u] == PF:
                raise StateError(f"parent {u} is PF; PF nodes never gain children")
        v = n
        false = label == CF or any(self.is_false[u] for u in parent_ids)
        self.labels.append(label)
        self.is_false.append(false)
        self.birth.append(birth)
        self.adversarial.append(bool(adversarial))
        self.parents.append(parent_ids)
        self.children.append([])
        self.deg_pt.append(0)
        self.deg_ct.append(0)
        self.pf_parent_edges.append(0)
        for u in parent_ids:
            self.children[u].append(v)
            self.deg_pt[u] += 1
            if label == CT:
                self.deg_ct[u] += 1
        return v

    def pop_last_node(self) -> None:
        """Remove the most recently added node (used to undo a trial move)."""
        v = len(self.labels) - 1
        if v < 0:
            raise StateError("state is empty")
        if self.children[v]:
            raise StateError("can only pop a childless node")
        label = self.labels[v]
        if label == PF:
            self.pf_total -= 1
        for u in self.parents[v]:
            self.children[u].pop()
            if label != PF:
                self.deg_pt[u] -= 1
            if label == CT:
                self.deg_ct[u] -= 1
        for col in (self.labels, self.is_false, self.birth, self.adversarial,
                    self.parents, self.children, self.deg_pt, self.deg_ct,
                    self.pf_parent_edges):
            col.pop()

    def mark_pf(self, marked) -> dict[int, int]:
        """Flag ``marked`` nodes PF and update all degree indices.

        Every marked node must currently be PT and hidden-False (checks are
        sound).  Returns {node: new deg_pt} for surviving PT nodes whose
        degree changed, so a caller can refresh attachment weights.
        """
        marked = sorted(set(marked))
        for w in marked:
            if self.labels[w] == PF:
                raise StateError(f"node {w} is already PF")
            if not self.is_false[w]:
                raise StateError(f"refusing to mark hidden-True node {w} PF")
        degree_touched: set[int] = set()
        for w in marked:
            was_ct = self.labels[w] == CT
            self.labels[w] = PF
            for u in self.parents[w]:
                self.deg_pt[u] -= 1
                if was_ct:
                    self.deg_ct[u] -= 1
                degree_touched.add(u)
            for c in self.children[w]:
                self.pf_parent_edges[c] += 1
        self.pf_total += len(marked)
        # sorted so weight refreshes happen in one canonical order on
        # every backend (float totals are order-sensitive)
        return {u: self.deg_pt[u] for u in sorted(degree_touched)
                if self.labels[u] != PF}

    # -- predicates -------------------------------------------------------

    def is_pt(self, v: int) -> bool:
        return self.labels[v] != PF

    def is_minimal_false(self, v: int) -> bool:
        """CF nodes, plus CT nodes with at least one PF parent edge (roots).

        These are the locally discoverable errors: a check recognizes a CF
        node when it examines it, and recognizes a root from the public PF
        label on its parent.
        """
        lab = self.labels[v]
        if lab == CF:
            return True
        return lab == CT and self.pf_parent_edges[v] > 0

    def is_ct_nonroot_leaf(self, v: int, simple_mode: bool) -> bool:
        """Frontier nodes a fresh edge can hit, removing them from the frontier.

        Simple mode: CT, no PF parent edge, no child edges at all.
        General mode: CT, no PF parent edge, no CT child edges (PF or CF
        children do not disqualify).
        """
        if self.labels[v] != CT or self.pf_parent_edges[v] > 0:
            return False
        if simple_mode:
            return not self.children[v]
        return self.deg_ct[v] == 0

    # -- global views -----------------------------------------------------

    def pt_ids(self) -> list[int]:
        return [v for v in range(len(self.labels)) if self.labels[v] != PF]

    def minimal_false_set(self) -> list[int]:
        return [v for v in range(len(self.labels)) if self.is_minimal_false(v)]

    def ct_nonroot_leaves(self, simple_mode: bool) -> list[int]:
        return [v for v in range(len(self.labels))
                if self.is_ct_nonroot_leaf(v, simple_mode)]

    def counts(self, simple_mode: bool) -> dict[str, int]:
        n = len(self.labels)
        pf = self.pf_total
        pt_false = sum(1 for v in range(n)
                       if self.labels[v] != PF and self.is_false[v])
        return {
            "nodes": n,
            "pt": n - pf,
            "pt_false": pt_false,
            "pf": pf,
            "minimal_false": len(self.minimal_false_set()),
            "leaves": len(self.ct_nonroot_leaves(simple_mode)),
        }

    def copy(self) -> "CkpState":
        dup = CkpState.__new__(CkpState)
        dup.labels = self.labels.copy()
        dup.is_false = self.is_false.copy()
        dup.birth = self.birth.copy()
        dup.adversarial = self.adversarial.copy()
        dup.parents = [p.copy() for p in self.parents]
        dup.children = [c.copy() for c in self.children]
        dup.deg_pt = self.deg_pt.copy()
        dup.deg_ct = self.deg_ct.copy()
        dup.pf_parent_edges = self.pf_parent_edges.copy()
        dup.pf_total = self.pf_total
        return dup


def pt_false_distances(state: CkpState) -> dict[int, int]:
    """Shortest upward distance from each PT hidden-False node to a minimal
    false node, along paths that traverse PT nodes only.

    Minimal false nodes sit at distance 0.  Any other PT False node is CT
    with at least one PT False parent (a False node's parents are either
    False or, when the node itself was born CF, possibly True; a CT False
    node with only PF False parents would be a root, hence minimal), so

        dist(v) = 1 + min(dist(u) for PT False parents u)

    which resolves in one id-order pass because parents precede children.
    """
    dist: dict[int, int] = {}
    for v in range(len(state.labels)):
        if state.labels[v] == PF or not state.is_false[v]:
            continue
        if state.is_minimal_false(v):
            dist[v] = 0
            continue
        best = None
        for u in state.parents[v]:
            d = dist.get(u)
            if d is not None and (best is None or d < best):
                best = d
        if best is None:
            raise StateError(
                f"node {v} is PT False, not minimal, with no PT False parent")
        dist[v] = best + 1
    return dist


def pt_false_distances_by_spread(state: CkpState) -> dict[int, int]:
    """Independent oracle for :func:`pt_false_distances`.

    Multi-source BFS from the minimal false set, walking child edges and
    never leaving the PT hidden-False node set.
    """
    dist: dict[int, int] = {}
    queue: deque[int] = deque()
    for v in state.minimal_false_set():
        dist[v] = 0
        queue.append(v)
    while queue:
        u = queue.popleft()
        for c in set(state.children[u]):
            if c in dist:
                continue
            if state.labels[c] == PF or not state.is_false[c]:
                continue
            dist[c] = dist[u] + 1
            queue.append(c)
    return dist


def anchor_bfs(state: CkpState, v: int):
    """Canonical upward BFS from ``v`` until the first minimal false node.

    FIFO queue, parents expanded in edge-insertion order, each node enqueued
    at most once, traversal restricted to PT nodes (PF parents are skipped,
    they are recognized through ``pf_parent_edges`` without being visited).

    Returns ``(anchor, depth, chain)`` where ``chain`` is the discovery path
    v -> ... -> anchor, or ``(None, None, None)`` when nothing is reachable.
    """
    seen = {v}
    prev = {v: None}
    queue = deque([(v, 0)])
    while queue:
        u, d = queue.popleft()
        if state.is_minimal_false(u):
            chain = [u]
            while prev[chain[-1]] is not None:
                chain.append(prev[chain[-1]])
            chain.reverse()
            return u, d, chain
        for w in state.parents[u]:
            if w in seen or state.labels[w] == PF:
                continue
            seen.add(w)
            prev[w] = u
            queue.append((w, d + 1))
    return None, None, None


def bfs_component_partition(state: CkpState):
    """Partition the PT hidden-False nodes by the anchor their canonical
    upward BFS reaches first.

    Returns ``(anchor_of, components)``: a node -> anchor map and an
    anchor -> sorted member list map.  Anchors map to themselves.
    """
    anchor_of: dict[int, int] = {}
    components: dict[int, list[int]] = {}
    for v in range(len(state.labels)):
        if state.labels[v] == PF or not state.is_false[v]:
            continue
        anchor, _, _ = anchor_bfs(state, v)
        if anchor is None:
            raise StateError(f"PT False node {v} reaches no minimal false node")
        anchor_of[v] = anchor
        components.setdefault(anchor, []).append(v)
    for members in components.values():
        members.sort()
    return anchor_of, components


# -- serialization --------------------------------------------------------

def dump_state(state: CkpState) -> str:
    """Render a state to the ``ckp-state v1`` text format.

    One node per line after the header:

        <id> <label> <is_false 0/1> <birth> <adversarial 0/1> <parents>

    where <parents> is a comma-separated id list in edge-insertion order
    (repeats kept) or ``-`` for the origin.  Round-trips bit-exactly.
    """
    lines = [f"{_FORMAT_HEADER} {len(state.labels)}"]
    for v in range(len(state.labels)):
        plist = ",".join(str(u) for u in state.parents[v]) or "-"
        lines.append(f"{v} {LABEL_NAMES[state.labels[v]]} "
                     f"{int(state.is_false[v])} {state.birth[v]} "
                     f"{int(state.adversarial[v])} {plist}")
    return "\n".join(lines) + "\n"


def load_state(text: str) -> CkpState:
    lines = text.splitlines()
    if not lines:
        raise StateError("empty state document")
    head = lines[0].rsplit(" ", 1)
    if len(head) != 2 or head[0] != _FORMAT_HEADER:
        raise StateError(f"bad header {lines[0]!r}")
    try:
        count = int(head[1])
    except ValueError:
        raise StateError(f"bad node count in header {lines[0]!r}") from None
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != count:
        raise StateError(f"header promises {count} nodes, found {len(body)}")
    state = CkpState()
    for expect, line in enumerate(body):
        fields = line.split(" ")
        if len(fields) != 6:
            raise StateError(f"malformed node line {line!r}")
        vid = int(fields[0])
        if vid != expect:
            raise StateError(f"node ids must be dense, got {vid} want {expect}")
        label = LABEL_CODES.get(fields[1])
        if label is None:
            raise StateError(f"unknown label {fields[1]!r}")
        parents = [] if fields[5] == "-" else [int(x) for x in fields[5].split(",")]
        for u in parents:
            if not 0 <= u < vid:
                raise StateError(f"node {vid} references parent {u}")
        state.labels.append(label)
        state.is_false.append(bool(int(fields[2])))
        state.birth.append(int(fields[3]))
        state.adversarial.append(bool(int(fields[4])))
        state.parents.append(parents)
        state.children.append([])
        state.deg_pt.append(0)
        state.deg_ct.append(0)
        state.pf_parent_edges.append(0)
    for v in range(count):
        lab = state.labels[v]
        for u in state.parents[v]:
            state.children[u].append(v)
            if lab != PF:
                state.deg_pt[u] += 1
            if lab == CT:
                state.deg_ct[u] += 1
        # preserved flags are trusted but re-derivable; keep the truth column
        # as written so censored dumps stay censored
    for v in range(count):
        state.pf_parent_edges[v] = sum(
            1 for u in state.parents[v] if state.labels[u] == PF)
    state.pf_total = sum(1 for lab in state.labels if lab == PF)
    return state


def verify_truth_closure(state: CkpState) -> None:
    """Check the two halves of the hidden truth rule that a finished state
    still exposes: False-ness flows down every edge, and a False node with
    no False parent must itself carry the error (so if it is still PT, it
    is labeled CF)."""
    for v in range(len(state.labels)):
        inherited = any(state.is_false[u] for u in state.parents[v])
        if inherited and not state.is_false[v]:
            raise StateError(f"node {v} descends from a False node but is True")
        if state.labels[v] == CF and not state.is_false[v]:
            raise StateError(f"CF node {v} has is_false unset")
        if (state.is_false[v] and not inherited
                and state.labels[v] == CT):
            raise StateError(
                f"CT node {v} is False yet no parent is False")
