"""Per-step process dynamics and full-trajectory runs, pure Python.

A step is, with probability q, an adversarial insertion (no check), and
otherwise one round of grow-label-check:

1. if no PT node has positive attachment weight the process is stopped,
   permanently, with the state frozen;
2. draw a parent count m, then m parents with replacement proportional
   to a(PT degree);
3. the new node is labeled CF with probability epsilon, else CT;
4. the configured mechanism checks the new node and its surroundings,
   and everything it recognizes is flagged PF atomically.

The decision stream (one uniform per coin or pick, degenerate decisions
free) is part of the engine contract: the accelerated backend replays it
draw for draw, and trajectory equality across backends is tested.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

from . import checking
from .attachment import sample_combination, weight_index_for
from .rand import SimChooser
from .state import CT, CF, PF, LABEL_NAMES, CkpState, StateError


@dataclass(frozen=True)
class Features:
    """The full parameter vector of one process variant."""

    attach: object
    parent_count: object
    check_rate: float            # probability a check happens (per edge for
    check_depth: int             # the per-parent mechanisms), and its depth
    mechanism: str
    error_rate: float = 0.0      # chance a new node is born carrying an error
    adversary_rate: float = 0.0  # chance a step is adversarial
    adversary_budget: int = 0    # max parent edges an adversarial node gets
    detection_rate: float = 1.0  # chance an examined CF node reveals itself
    path_only_marking: bool = False

    def __post_init__(self):
        if self.mechanism not in checking.MECHANISMS:
            raise ValueError(f"unknown mechanism {self.mechanism!r}")
        if not 0 <= self.error_rate < 1:
            raise ValueError("error_rate must lie in [0, 1)")
        if not 0 <= self.adversary_rate < 1:
            raise ValueError("adversary_rate must lie in [0, 1)")
        if not 0 <= self.check_rate <= 1:
            raise ValueError("check_rate must lie in [0, 1]")
        if not 0 < self.detection_rate <= 1:
            raise ValueError("detection_rate must lie in (0, 1]")
        if self.check_depth < 1:
            raise ValueError("check_depth must be at least 1")
        if self.adversary_budget < 0:
            raise ValueError("adversary_budget must be nonnegative")

    @property
    def simple(self) -> bool:
        """No spontaneous errors, no adversary: the tractable regime where
        every node in a CF-rooted run is hidden-False."""
        return self.error_rate == 0 and self.adversary_rate == 0


def init_chain(n: int, edge_multiplicity: int, first_label: int) -> CkpState:
    """A path of n nodes; each node after the first hangs from its
    predecessor by ``edge_multiplicity`` parallel edges."""
    if n < 1 or edge_multiplicity < 1:
        raise ValueError("chain needs n >= 1 and edge multiplicity >= 1")
    state = CkpState()
    state.add_root(first_label)
    for i in range(1, n):
        state.add_node([i - 1] * edge_multiplicity, CT, birth=0)
    return state


# -- adversaries -----------------------------------------------------------

class DeepAttach:
    """Attach all r edges to the PT False node farthest from any minimal
    false node (ties to the lowest id), labeled CT: the move that pushes
    errors out of checking range."""

    def move(self, state, features, chooser):
        r = features.adversary_budget
        if r == 0:
            return None
        from .state import pt_false_distances
        dist = pt_false_distances(state)
        if dist:
            best = max(dist.values())
            target = min(v for v, d in dist.items() if d == best)
        else:
            target = min(state.pt_ids())
        return [target] * r, CT


class LeafAttach:
    """Attach to up to r distinct CT non-root leaves (lowest ids first),
    labeled CT: each edge costs the process one frontier node."""

    def move(self, state, features, chooser):
        r = features.adversary_budget
        if r == 0:
            return None
        leaves = state.ct_nonroot_leaves(simple_mode=False)
        if leaves:
            return leaves[:r], CT
        return [min(state.pt_ids())], CT


class RandomPt:
    """r uniform PT picks with replacement, uniformly random label."""

    def move(self, state, features, chooser):
        r = features.adversary_budget
        if r == 0:
            return None
        # with no PF nodes the PT ids are just 0..n-1; skip the O(n) scan
        pt = state.pt_ids() if state.pf_total else range(len(state.labels))
        parents = [pt[chooser.uniform_index(len(pt))] for _ in range(r)]
        label = CF if chooser.uniform_index(2) == 1 else CT
        return parents, label


class Scripted:
    """Plays an explicit move list; refuses illegal moves loudly."""

    def __init__(self, moves):
        self.moves = list(moves)
        self.cursor = 0

    def move(self, state, features, chooser):
        if self.cursor >= len(self.moves):
            raise StateError("scripted adversary ran out of moves")
        parents, label = self.moves[self.cursor]
        self.cursor += 1
        if len(parents) > features.adversary_budget:
            raise StateError("scripted move exceeds the edge budget")
        if any(state.labels[u] == PF for u in parents):
            raise StateError("scripted move attaches below a PF node")
        return list(parents), label


ADVERSARIES = {
    "deep": DeepAttach,
    "leaf": LeafAttach,
    "random-pt": RandomPt,
}


def make_adversary(kind: str):
    try:
        return ADVERSARIES[kind]()
    except KeyError:
        raise ValueError(f"unknown adversary {kind!r}") from None


# -- step and trajectory records -------------------------------------------

@dataclass
class StepRecord:
    branch: str                  # grow | adversary | adversary-noop | stopped
    node: int | None = None
    label: int | None = None
    parents: list = field(default_factory=list)
    outcome: checking.CheckOutcome | None = None
    stopped: bool = False


@dataclass
class TrialResult:
    seed: int
    horizon: int
    survived_at_horizon: bool
    eliminated_at: int | None
    stopped_at: int | None
    pf_exists: bool
    final_counts: dict
    checkpoints: list
    backend: str

    def as_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


class AuditViolation(AssertionError):
    """A structural invariant failed during an audited run."""


class PyEngine:
    """Reference engine: owns a state, its attachment weight index, and
    incrementally maintained membership counts.

    ``f_mem`` marks minimal false nodes, ``l_mem`` the CT non-root leaves
    in the mode-appropriate sense, so per-step checkpoint counts and the
    survival potential delta are O(1).
    """

    def __init__(self, features: Features, init_state: CkpState, chooser,
                 adversary=None):
        self.features = features
        self.state = init_state.copy()
        self.chooser = chooser
        self.adversary = adversary
        self.windex = weight_index_for(self.state, features.attach)
        self.stopped = False
        self.step_index = 0
        st = self.state
        self.pt_false = sum(1 for v in range(len(st.labels))
                            if st.labels[v] != PF and st.is_false[v])
        self.pf_count = st.pf_total
        simple = features.simple
        self.f_mem = [st.is_minimal_false(v) for v in range(len(st.labels))]
        self.l_mem = [st.is_ct_nonroot_leaf(v, simple)
                      for v in range(len(st.labels))]
        self.f_count = sum(self.f_mem)
        self.l_count = sum(self.l_mem)
        self.zero_since = 0 if self.pt_false == 0 else None
        self.pf_child_len: dict[int, int] = {
            v: len(st.children[v]) for v in range(len(st.labels))
            if st.labels[v] == PF}

    # -- bookkeeping ------------------------------------------------------

    def counts(self) -> dict:
        n = len(self.state.labels)
        return {
            "nodes": n,
            "pt": n - self.pf_count,
            "pt_false": self.pt_false,
            "pf": self.pf_count,
            "minimal_false": self.f_count,
            "leaves": self.l_count,
        }

    def _refresh_membership(self, nodes) -> None:
        st = self.state
        simple = self.features.simple
        for v in nodes:
            f_now = st.is_minimal_false(v)
            l_now = st.is_ct_nonroot_leaf(v, simple)
            if f_now != self.f_mem[v]:
                self.f_mem[v] = f_now
                self.f_count += 1 if f_now else -1
            if l_now != self.l_mem[v]:
                self.l_mem[v] = l_now
                self.l_count += 1 if l_now else -1

    def _add_node(self, parents, label, adversarial: bool) -> int:
        st = self.state
        v = st.add_node(parents, label, birth=self.step_index,
                        adversarial=adversarial)
        attach = self.features.attach
        self.windex.append(attach.evaluate(0))
        for u in sorted(set(parents)):
            self.windex.set_weight(u, attach.evaluate(st.deg_pt[u]))
        self.f_mem.append(st.is_minimal_false(v))
        self.l_mem.append(st.is_ct_nonroot_leaf(v, self.features.simple))
        self.f_count += self.f_mem[v]
        self.l_count += self.l_mem[v]
        if st.is_false[v]:
            self.pt_false += 1
        self._refresh_membership(set(parents))
        return v

    def _apply_marks(self, marked) -> None:
        st = self.state
        marked = sorted(marked)
        for w in marked:
            if not st.is_false[w]:
                raise AuditViolation(f"check tried to mark True node {w}")
        touched = st.mark_pf(marked)
        attach = self.features.attach
        affected = set()
        for w in marked:
            self.windex.set_weight(w, 0.0)
            self.pf_child_len[w] = len(st.children[w])
            affected.update(st.children[w])
            affected.update(st.parents[w])
        for u, d in touched.items():
            self.windex.set_weight(u, attach.evaluate(d))
        self.pt_false -= len(marked)
        self.pf_count += len(marked)
        for w in marked:
            if self.f_mem[w]:
                self.f_mem[w] = False
                self.f_count -= 1
            if self.l_mem[w]:
                self.l_mem[w] = False
                self.l_count -= 1
        self._refresh_membership(affected - set(marked))

    # -- dynamics ---------------------------------------------------------

    def step(self) -> StepRecord:
        if self.stopped:
            return StepRecord("stopped", stopped=True)
        feats = self.features
        chooser = self.chooser
        self.step_index += 1
        if chooser.maybe(feats.adversary_rate):
            return self._adversarial_step()
        if self.windex.positive == 0:
            self.stopped = True
            return StepRecord("stopped", stopped=True)
        m = sample_combination(feats.parent_count, chooser)
        parents = [chooser.weighted_index(self.windex) for _ in range(m)]
        label = CF if chooser.maybe(feats.error_rate) else CT
        v = self._add_node(parents, label, adversarial=False)
        outcome = checking.run_check(
            feats.mechanism, self.state, v, parents, feats.check_depth,
            feats.check_rate, feats.detection_rate, chooser,
            feats.path_only_marking)
        if outcome.marked:
            self._apply_marks(outcome.marked)
        self._track_zero()
        return StepRecord("grow", v, label, parents, outcome)

    def _adversarial_step(self) -> StepRecord:
        adversary = self.adversary
        if adversary is None:
            raise ValueError("adversarial step drawn but no adversary is set")
        if all(lab == PF for lab in self.state.labels):
            self.stopped = True
            return StepRecord("stopped", stopped=True)
        move = adversary.move(self.state, self.features, self.chooser)
        if move is None:
            self._track_zero()
            return StepRecord("adversary-noop")
        parents, label = move
        v = self._add_node(parents, label, adversarial=True)
        self._track_zero()
        return StepRecord("adversary", v, label, list(parents), None)

    def _track_zero(self) -> None:
        if self.pt_false == 0:
            if self.zero_since is None:
                self.zero_since = self.step_index
        else:
            self.zero_since = None


# -- per-step cheap audit ----------------------------------------------------

def survival_potential_floor(features: Features) -> float:
    """Largest per-step decrease of |minimal false| + |leaves| that the
    mechanism allows, as a positive number.

    With exact detection a search stops at the first recognized node, so
    at most one minimal false node per search leaves the set; the walk
    mechanism cannot recognize roots en route and may mark several, which
    its depth caps.  Only meaningful when detection is exact and errors
    are not injected mid-run; callers gate on that.
    """
    m_max = features.parent_count.max
    mech = features.mechanism
    if mech == "stringy":
        base = 2 if m_max == 1 else features.check_depth + 1 + m_max
    elif mech in ("bfs", "exhaustive-bfs"):
        base = 1 + m_max
    elif mech == "parentwise-bfs":
        base = 2 * m_max
    else:                      # complete: no fixed cap, resolved per step
        base = 0
    return max(base, features.adversary_budget)


def _step_delta_floor(features: Features, record: StepRecord) -> float:
    fixed = survival_potential_floor(features)
    if features.mechanism == "complete" and record.outcome is not None:
        # every marked node can leave the minimal false set at once here,
        # so the cap scales with the actual marking
        return max(fixed,
                   len(record.outcome.marked) + features.parent_count.max + 1)
    return fixed


class CheapAudit:
    """Per-step invariants that are O(1) against the engine's counters:
    the bounded decrease of the survival potential, and zero-run sanity.
    Active only in the regime where the bound is a theorem (exact
    detection, no spontaneous errors)."""

    def __init__(self, engine: PyEngine):
        self.engine = engine
        # the decrease caps rely on every examined minimal false node being
        # recognized, which needs exact detection; injected errors are fine
        self.track_delta = engine.features.detection_rate == 1
        self.last_potential = engine.f_count + engine.l_count

    def after_step(self, record: StepRecord) -> None:
        eng = self.engine
        if record.stopped:
            return
        if self.track_delta:
            now = eng.f_count + eng.l_count
            floor = _step_delta_floor(eng.features, record)
            if now - self.last_potential < -floor:
                raise AuditViolation(
                    f"survival potential fell by {self.last_potential - now} "
                    f"in one step, cap {floor} "
                    f"(mechanism {eng.features.mechanism})")
            self.last_potential = now
        if record.outcome is not None:
            for w in record.outcome.marked:
                if eng.state.labels[w] != PF:
                    raise AuditViolation(f"marked node {w} is not PF")


def verify_pf_frozen(engine: PyEngine) -> None:
    st = engine.state
    for v, n_children in engine.pf_child_len.items():
        if len(st.children[v]) != n_children:
            raise AuditViolation(f"PF node {v} gained children")


# -- full trajectory --------------------------------------------------------

def run_python_trial(features: Features, init_state: CkpState, horizon: int,
                     seed: int, adversary=None, checkpoint_steps=(),
                     audit: str = "none", audit_every: int = 0,
                     trace=None) -> TrialResult:
    """Run one trajectory to ``horizon`` steps (early exit once the
    outcome can no longer change) and report the summary.

    ``checkpoint_steps`` lists step indices whose counts are recorded; a
    step past an early exit reports the frozen counts.  ``audit`` is
    "none", "cheap" (O(1) per-step checks) or "full" (cheap, plus deep
    recomputation audits every ``audit_every`` steps).  ``trace`` is an
    optional writable for one JSON line per step.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if adversary is None and features.adversary_rate > 0:
        adversary = RandomPt()
    engine = PyEngine(features, init_state, SimChooser(seed), adversary)
    cheap = CheapAudit(engine) if audit in ("cheap", "full") else None
    deep = audit == "full"
    pending = sorted(set(checkpoint_steps))
    checkpoints = []
    while pending and pending[0] <= 0:
        checkpoints.append((pending.pop(0), engine.counts()))
    for t in range(1, horizon + 1):
        record = engine.step()
        if cheap is not None:
            cheap.after_step(record)
        if deep and audit_every and t % audit_every == 0:
            from .audits import full_audit
            full_audit(engine)
        if trace is not None:
            trace.write(_trace_line(t, record, engine) + "\n")
        while pending and pending[0] <= t:
            checkpoints.append((pending.pop(0), engine.counts()))
        if record.stopped:
            break
        if engine.pt_false == 0 and features.simple:
            break
    for step in pending:
        checkpoints.append((step, engine.counts()))
    if deep:
        from .audits import full_audit
        full_audit(engine)
        verify_pf_frozen(engine)
    eliminated = engine.zero_since if engine.pt_false == 0 else None
    return TrialResult(
        seed=seed,
        horizon=horizon,
        survived_at_horizon=engine.pt_false > 0,
        eliminated_at=eliminated,
        stopped_at=engine.step_index if engine.stopped else None,
        pf_exists=engine.pf_count > 0,
        final_counts=engine.counts(),
        checkpoints=checkpoints,
        backend="python",
    )


def _trace_line(t: int, record: StepRecord, engine: PyEngine) -> str:
    entry = {"step": t, "branch": record.branch}
    if record.node is not None:
        entry["node"] = record.node
        entry["label"] = LABEL_NAMES[record.label]
        entry["parents"] = list(record.parents)
    if record.outcome is not None:
        entry["found"] = list(record.outcome.found)
        entry["marked"] = sorted(record.outcome.marked)
    entry["counts"] = engine.counts()
    return json.dumps(entry, sort_keys=True)
