"""Potential functions over process states, and their one-step drift.

Four potential families measure how much undiscovered error a state
carries:

* :class:`MinDistance`: sum of ``a(deg(v)) * c**dist(v)`` over PT
  hidden-False nodes, where ``dist`` is the shortest hop count to a
  minimal false node.  The workhorse for elimination arguments; it also
  decomposes over BFS components, one bucket per anchoring minimal false
  node.
* :class:`MinimalFalse`: the bare count of minimal false nodes.
* :class:`MinimalFalseLeavesSimple`: minimal false nodes plus
  error-carrying frontier leaves, the quantity survival arguments push
  upward.
* :class:`MinimalFalseLeavesGeneral`: the same idea scoped to the
  descendant closure of one originating error node, with leaves weighted
  ``a(0)/a(deg(v))``.

``exact_drift`` enumerates every outcome of a single growth step and
returns the expected potential change, exactly rational when the inputs
allow it.  ``mc_drift`` estimates the same quantity by sampling.  Every
enumeration leaf recomputes the potential through two independent code
paths and any disagreement aborts the computation, so a reported drift
is its own cross-check.
"""

from __future__ import annotations

import copy
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import checking
from .attachment import AllPF, AllWeightsZero, parent_distribution, \
    sample_combination, weight_index_for
from .evolution import AuditViolation, RandomPt
from .rand import NeedBranch, PathChooser, SimChooser, make_generator
from .state import CT, CF, PF, pt_false_distances, \
    pt_false_distances_by_spread, anchor_bfs

SIGN_BAND = 1e-12

DEFAULT_PT_CAP = 12
DEFAULT_LEAF_CAP = 10_000_000


class BranchBudgetExceeded(RuntimeError):
    """The outcome tree outgrew the configured enumeration caps."""


class AdversaryNotEnumerable(RuntimeError):
    """Exact drift needs every adversarial move to be determined by the
    state; a randomized adversary has no finite outcome list to sum."""


class NonpositiveWeight(ValueError):
    """A leaf weight denominator came out zero or negative."""


# -- potential kinds -------------------------------------------------------

@dataclass(frozen=True)
class MinDistance:
    """Distance-discounted weight sum with base ``c``; steeper bases
    punish buried errors harder."""

    attach: object
    c: object = 3

    def __post_init__(self):
        if not self.c > 1:
            raise ValueError("the distance base must exceed 1")


@dataclass(frozen=True)
class MinimalFalse:
    pass


@dataclass(frozen=True)
class MinimalFalseLeavesSimple:
    pass


@dataclass(frozen=True)
class MinimalFalseLeavesGeneral:
    anchor: int
    attach: object


@dataclass(frozen=True)
class PotentialReport:
    total: object
    per_component: dict | None
    pt_false_count: int


def _pt_false_ids(state) -> list[int]:
    return [v for v in range(len(state.labels))
            if state.labels[v] != PF and state.is_false[v]]


def _descendant_closure(state, anchor: int) -> set[int]:
    closure = {anchor}
    frontier = [anchor]
    while frontier:
        u = frontier.pop()
        for c in state.children[u]:
            if c not in closure:
                closure.add(c)
                frontier.append(c)
    return closure


def _false_leaves(state, simple_mode: bool) -> list[int]:
    # leaves that still carry the hidden error; a True frontier node is
    # no loss when discovered, so it never counts toward the potential
    return [v for v in state.ct_nonroot_leaves(simple_mode)
            if state.is_false[v]]


def potential(state, kind, exact: bool = False) -> PotentialReport:
    """Evaluate ``kind`` on ``state``.

    For :class:`MinDistance` the report carries the per-anchor
    decomposition, computed through an independent distance routine
    (canonical upward BFS per node, against the downward relaxation pass
    used for the total); the two are required to agree.
    """
    false_ids = _pt_false_ids(state)
    if isinstance(kind, MinDistance):
        attach = kind.attach
        c = Fraction(kind.c) if exact else float(kind.c)
        dist = pt_false_distances(state)
        total = Fraction(0) if exact else 0.0
        for v in false_ids:
            w = (attach.evaluate_exact(state.deg_pt[v]) if exact
                 else attach.evaluate(state.deg_pt[v]))
            total += w * c ** dist[v]
        per_component: dict = {}
        for v in false_ids:
            anchor, depth, _ = anchor_bfs(state, v)
            if anchor is None:
                raise AuditViolation(
                    f"PT False node {v} reaches no minimal false node")
            w = (attach.evaluate_exact(state.deg_pt[v]) if exact
                 else attach.evaluate(state.deg_pt[v]))
            term = w * c ** depth
            per_component[anchor] = per_component.get(
                anchor, Fraction(0) if exact else 0.0) + term
        again = sum(per_component.values(), Fraction(0) if exact else 0.0)
        if exact:
            if again != total:
                raise AuditViolation(
                    f"component decomposition sums to {again}, total {total}")
        elif not _close(again, total):
            raise AuditViolation(
                f"component decomposition sums to {again!r}, total {total!r}")
        return PotentialReport(total, per_component, len(false_ids))

    if isinstance(kind, MinimalFalse):
        return PotentialReport(len(state.minimal_false_set()), None,
                               len(false_ids))

    if isinstance(kind, MinimalFalseLeavesSimple):
        total = (len(state.minimal_false_set())
                 + len(_false_leaves(state, simple_mode=True)))
        return PotentialReport(total, None, len(false_ids))

    if isinstance(kind, MinimalFalseLeavesGeneral):
        anchor = kind.anchor
        if not 0 <= anchor < len(state.labels):
            raise ValueError(f"anchor id {anchor} out of range")
        if state.labels[anchor] == CT or not state.is_false[anchor]:
            raise ValueError(
                f"anchor {anchor} does not carry an originating error")
        closure = _descendant_closure(state, anchor)
        attach = kind.attach
        a0 = attach.evaluate_exact(0) if exact else attach.evaluate(0)
        total = Fraction(0) if exact else 0.0
        for v in sorted(closure):
            if state.is_minimal_false(v):
                total += 1
        for v in _false_leaves(state, simple_mode=False):
            if v not in closure:
                continue
            denom = (attach.evaluate_exact(state.deg_pt[v]) if exact
                     else attach.evaluate(state.deg_pt[v]))
            if denom <= 0:
                raise NonpositiveWeight(
                    f"leaf {v} has attachment weight {denom}; the scoped "
                    f"leaf potential needs positive weights")
            total += a0 / denom
        return PotentialReport(total, None, len(false_ids))

    raise TypeError(f"unknown potential kind {kind!r}")


def _close(x, y, rel: float = 1e-9) -> bool:
    return abs(float(x) - float(y)) <= rel * max(1.0, abs(float(x)),
                                                 abs(float(y)))


def _independent_total(state, kind, exact: bool):
    """Second opinion on the potential value, sharing as little code as
    possible with :func:`potential`."""
    if isinstance(kind, MinDistance):
        dist = pt_false_distances_by_spread(state)
        attach = kind.attach
        c = Fraction(kind.c) if exact else float(kind.c)
        total = Fraction(0) if exact else 0.0
        for v, d in sorted(dist.items()):
            w = (attach.evaluate_exact(state.deg_pt[v]) if exact
                 else attach.evaluate(state.deg_pt[v]))
            total += w * c ** d
        return total
    n = len(state.labels)
    minimal = 0
    for v in range(n):
        lab = state.labels[v]
        if lab == CF:
            minimal += 1
        elif lab == CT and any(state.labels[u] == PF
                               for u in state.parents[v]):
            minimal += 1
    if isinstance(kind, MinimalFalse):
        return minimal

    def plain_leaf(v: int, simple_mode: bool) -> bool:
        if state.labels[v] != CT or not state.is_false[v]:
            return False
        if any(state.labels[u] == PF for u in state.parents[v]):
            return False
        if simple_mode:
            return not state.children[v]
        return all(state.labels[c] != CT for c in state.children[v])

    if isinstance(kind, MinimalFalseLeavesSimple):
        return minimal + sum(1 for v in range(n) if plain_leaf(v, True))

    if isinstance(kind, MinimalFalseLeavesGeneral):
        inside = set()
        queue = [kind.anchor]
        while queue:
            u = queue.pop(0)
            if u in inside:
                continue
            inside.add(u)
            queue.extend(state.children[u])
        attach = kind.attach
        a0 = attach.evaluate_exact(0) if exact else attach.evaluate(0)
        total = Fraction(0) if exact else 0.0
        for v in range(n):
            if v not in inside:
                continue
            if state.is_minimal_false(v):
                total += 1
            elif plain_leaf(v, False):
                denom = (attach.evaluate_exact(state.deg_pt[v]) if exact
                         else attach.evaluate(state.deg_pt[v]))
                if denom <= 0:
                    raise NonpositiveWeight(
                        f"leaf {v} has attachment weight {denom}")
                total += a0 / denom
        return total

    raise TypeError(f"unknown potential kind {kind!r}")


def _checked_total(state, kind, exact: bool):
    report = potential(state, kind, exact=exact)
    alt = _independent_total(state, kind, exact)
    if exact:
        if report.total != alt:
            raise AuditViolation(
                f"potential routes disagree: {report.total} vs {alt}")
    elif not _close(report.total, alt):
        raise AuditViolation(
            f"potential routes disagree: {report.total!r} vs {alt!r}")
    return report.total


# -- exact one-step drift --------------------------------------------------

@dataclass(frozen=True)
class DriftResult:
    value: object
    sign: str           # negative | zero | positive | indeterminate
    exact: bool
    leaf_count: int


class _Sum:
    """Fraction accumulator, or Kahan-compensated float accumulator."""

    __slots__ = ("exact", "total", "carry")

    def __init__(self, exact: bool):
        self.exact = exact
        self.total = Fraction(0) if exact else 0.0
        self.carry = 0.0

    def add(self, x) -> None:
        if self.exact:
            self.total += x
            return
        y = float(x) - self.carry
        t = self.total + y
        self.carry = (t - self.total) - y
        self.total = t


def _rational(x) -> bool:
    if isinstance(x, bool):
        return False
    if isinstance(x, (int, Fraction)):
        return True
    # integral floats (the 0.0 / 1.0 defaults) convert without surprise;
    # any other float keeps the computation in float mode unless forced
    return isinstance(x, float) and x == int(x)


def _attachment_rational(attach) -> bool:
    name = type(attach).__name__
    if name == "Affine":
        return _rational(attach.base) and _rational(attach.slope)
    if name == "PowerShifted":
        return _rational(attach.base) and isinstance(attach.exponent, int)
    if name == "TableAttachment":
        return (all(_rational(v) for v in attach.values)
                and _rational(attach.tail_slope))
    return False


def _auto_exact(features) -> bool:
    scalars = (features.check_rate, features.error_rate,
               features.detection_rate, features.adversary_rate)
    if not all(_rational(s) for s in scalars):
        return False
    if not all(_rational(p) for p in features.parent_count.probs):
        return False
    return _attachment_rational(features.attach)


class _RandomMove(Exception):
    pass


class _RefuseRandom:
    """Chooser handed to an adversary while probing whether its move is
    state-determined.  Degenerate decisions resolve as everywhere else;
    anything that would consume randomness aborts the probe."""

    def maybe(self, p) -> bool:
        if p <= 0:
            return False
        if p >= 1:
            return True
        raise _RandomMove

    def uniform_index(self, n: int) -> int:
        if n == 1:
            return 0
        raise _RandomMove

    def pmf_index(self, cum) -> int:
        if len(cum) == 1:
            return 0
        raise _RandomMove

    def weighted_index(self, windex) -> int:
        raise _RandomMove


def exact_drift(state, features, kind, adversary=None, *,
                pt_cap: int = DEFAULT_PT_CAP,
                leaf_cap: int = DEFAULT_LEAF_CAP,
                exact: bool | None = None) -> DriftResult:
    """Expected one-step potential change, by complete enumeration.

    Branches over the adversarial coin, the parent count, every ordered
    parent tuple, the label coin, and every probabilistic decision the
    checking mechanism makes, replayed through a :class:`PathChooser`.
    The leaf probabilities must sum to one and each leaf's potential is
    recomputed two ways; either failing raises instead of returning a
    number.

    ``exact=None`` switches to rational arithmetic automatically when
    every feature parameter is an int or Fraction.
    """
    pt_nodes = state.pt_ids()
    if len(pt_nodes) > pt_cap:
        raise BranchBudgetExceeded(
            f"{len(pt_nodes)} PT nodes exceed the enumeration cap {pt_cap}")
    exact_mode = _auto_exact(features) if exact is None else bool(exact)

    def cast(x):
        return Fraction(x) if exact_mode else float(x)

    one = Fraction(1) if exact_mode else 1.0
    phi_before = _checked_total(state, kind, exact_mode)
    acc = _Sum(exact_mode)
    mass = _Sum(exact_mode)
    leaf_count = 0

    def leaf(prob, after=None) -> None:
        nonlocal leaf_count
        leaf_count += 1
        if leaf_count > leaf_cap:
            raise BranchBudgetExceeded(
                f"outcome tree exceeded {leaf_cap} leaves")
        mass.add(prob)
        if after is not None:
            acc.add(prob * (_checked_total(after, kind, exact_mode)
                            - phi_before))

    q = features.adversary_rate
    qw = cast(q) if q > 0 else (one - one)
    if q > 0:
        if adversary is None:
            raise AdversaryNotEnumerable(
                "adversarial steps default to a randomized adversary; "
                "pass a state-determined one to enumerate them")
        if all(lab == PF for lab in state.labels):
            leaf(qw)
        else:
            probe = copy.deepcopy(adversary)
            try:
                move = probe.move(state.copy(), features, _RefuseRandom())
            except _RandomMove:
                raise AdversaryNotEnumerable(
                    f"{type(adversary).__name__} draws randomness inside "
                    f"its move; exact drift cannot sum its outcomes"
                ) from None
            if move is None:
                leaf(qw)
            else:
                parents, label = move
                after = state.copy()
                after.add_node(list(parents), label,
                               birth=_next_birth(state), adversarial=True)
                leaf(qw, after)

    grow_w = one - qw
    try:
        pmf = parent_distribution(state, features.attach, exact=exact_mode)
    except (AllPF, AllWeightsZero):
        leaf(grow_w)
    else:
        if exact_mode:
            law_items = features.parent_count.items_exact()
            if sum(p for _, p in law_items) != 1:
                raise ValueError(
                    "parent-count masses do not sum to one exactly; "
                    "use Fraction probabilities for exact drift")
        else:
            law_items = [(m, float(p)) for m, p in
                         zip(features.parent_count.support,
                             features.parent_count.probs)]
        eps = features.error_rate
        if eps > 0:
            label_options = [(CT, one - cast(eps)), (CF, cast(eps))]
        else:
            label_options = [(CT, one)]
        parent_ids = sorted(pmf)
        birth = _next_birth(state)
        for m, m_mass in law_items:
            for tup in itertools.product(parent_ids, repeat=m):
                tw = grow_w * m_mass
                for u in tup:
                    tw = tw * pmf[u]
                for label, lw in label_options:
                    child = state.copy()
                    v = child.add_node(list(tup), label, birth=birth)
                    _enumerate_checks(child, v, list(tup), features,
                                      tw * lw, exact_mode, leaf)

    total_mass = mass.total
    if exact_mode:
        if total_mass != 1:
            raise AuditViolation(
                f"outcome probabilities sum to {total_mass}, not 1")
    elif not _close(total_mass, 1.0):
        raise AuditViolation(
            f"outcome probabilities sum to {total_mass!r}, not 1")

    value = acc.total
    if exact_mode:
        if value < 0:
            sign = "negative"
        elif value > 0:
            sign = "positive"
        else:
            sign = "zero"
    else:
        if value > SIGN_BAND:
            sign = "positive"
        elif value < -SIGN_BAND:
            sign = "negative"
        else:
            sign = "indeterminate"
    return DriftResult(value, sign, exact_mode, leaf_count)


def _next_birth(state) -> int:
    return max(state.birth, default=-1) + 1


def _enumerate_checks(child, v, parents, features, branch_w, exact_mode,
                      leaf) -> None:
    """Fork the check over every coin vector and path pick: replay with a
    prescribed prefix, and on the first open decision push one extended
    prefix per option."""
    stack = [()]
    while stack:
        path = stack.pop()
        chooser = PathChooser(path, exact=exact_mode)
        try:
            outcome = checking.run_check(
                features.mechanism, child, v, parents,
                features.check_depth, features.check_rate,
                features.detection_rate, chooser,
                features.path_only_marking)
        except NeedBranch as nb:
            for option, _prob in nb.options:
                stack.append(path + (option,))
            continue
        if outcome.marked:
            after = child.copy()
            after.mark_pf(outcome.marked)
        else:
            after = child
        leaf(branch_w * chooser.weight, after)


# -- Monte Carlo drift -----------------------------------------------------

@dataclass(frozen=True)
class DriftEstimate:
    mean: float
    se: float
    samples: int


def _phi_value(state, kind) -> float:
    if isinstance(kind, MinDistance):
        dist = pt_false_distances(state)
        attach = kind.attach
        c = float(kind.c)
        return sum(attach.evaluate(state.deg_pt[v]) * c ** d
                   for v, d in dist.items())
    return float(potential(state, kind, exact=False).total)


def mc_drift(state, features, kind, samples: int, rng,
             adversary=None) -> DriftEstimate:
    """Estimate the one-step drift by simulating single steps.

    ``rng`` is a seed or a numpy Generator.  The sampler follows the
    engine's decision stream exactly (adversary coin, parent count,
    weighted parent picks, label coin, check), so its law is the
    process's own.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    gen = rng if isinstance(rng, np.random.Generator) else make_generator(rng)
    chooser = SimChooser(gen)
    base = state.copy()
    windex = weight_index_for(base, features.attach)
    phi_before = _phi_value(base, kind)
    q = features.adversary_rate
    if q > 0 and adversary is None:
        adversary = RandomPt()
    feats = features
    birth = _next_birth(base)
    mean = 0.0
    m2 = 0.0
    for i in range(1, samples + 1):
        if chooser.maybe(q):
            delta = _adversary_sample(base, feats, chooser, adversary,
                                      kind, phi_before, birth)
        elif windex.positive == 0:
            delta = 0.0
        else:
            m = sample_combination(feats.parent_count, chooser)
            parents = [chooser.weighted_index(windex) for _ in range(m)]
            label = CF if chooser.maybe(feats.error_rate) else CT
            v = base.add_node(parents, label, birth=birth)
            outcome = checking.run_check(
                feats.mechanism, base, v, parents, feats.check_depth,
                feats.check_rate, feats.detection_rate, chooser,
                feats.path_only_marking)
            if outcome.marked:
                after = base.copy()
                after.mark_pf(outcome.marked)
                delta = _phi_value(after, kind) - phi_before
            else:
                delta = _phi_value(base, kind) - phi_before
            base.pop_last_node()
        d1 = delta - mean
        mean += d1 / i
        m2 += d1 * (delta - mean)
    var = m2 / (samples - 1) if samples > 1 else 0.0
    se = math.sqrt(max(var, 0.0) / samples)
    return DriftEstimate(mean, se, samples)


def _adversary_sample(base, features, chooser, adversary, kind,
                      phi_before, birth) -> float:
    if all(lab == PF for lab in base.labels):
        return 0.0
    # scripted movers advance an internal cursor; every sample replays
    # the same single step, so each gets a fresh copy
    move = copy.deepcopy(adversary).move(base, features, chooser)
    if move is None:
        return 0.0
    parents, label = move
    after = base.copy()
    after.add_node(list(parents), label, birth=birth, adversarial=True)
    return _phi_value(after, kind) - phi_before
