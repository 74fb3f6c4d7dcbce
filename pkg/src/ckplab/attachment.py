"""Attachment weight families, the parent-count law, and weighted parent
selection.

A prospective parent with ``d`` PT child edges is drawn with probability
proportional to ``a(d)``.  Three families cover the regimes of interest:

* ``Affine(base, slope)``: ``a(d) = base + slope*d``.  base=1, slope=0 is
  uniform growth; base=1, slope=1 is preferential attachment.
* ``PowerShifted(base, exponent)``: ``a(d) = base * (d+1)**exponent``,
  superlinear for exponent > 1.
* ``TableAttachment(values, tail_slope)``: explicit head, affine tail
  ``values[-1] + tail_slope*(d - len + 1)``.  Zeros in the head create
  degree holes that freeze nodes out of the parent pool.

Every family reports increment bounds (inf and sup of ``a(d+1) - a(d)``)
and whether any weight is zero; the theorem predicates decide regularity
from those.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction


class AllPF(RuntimeError):
    """No PT node exists; the process is over."""


class AllWeightsZero(RuntimeError):
    """PT nodes exist but every attachment weight is zero; growth is stuck."""


class ExactUnavailable(TypeError):
    """Exact rational evaluation was requested where it cannot be provided."""


def _to_fraction(x) -> Fraction:
    # Fraction(float) is exact for the stored binary value, which is what
    # the rational oracle needs: no doubt left about what was computed.
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ExactUnavailable(f"non-finite parameter {x!r}")
        return Fraction(x)
    raise ExactUnavailable(f"cannot take {type(x).__name__} exactly")


@dataclass(frozen=True)
class Affine:
    base: object
    slope: object

    def __post_init__(self):
        if self.base < 0 or self.slope < 0:
            raise ValueError("affine attachment weights must stay nonnegative")

    def evaluate(self, d: int) -> float:
        return float(self.base) + float(self.slope) * d

    def evaluate_exact(self, d: int) -> Fraction:
        return _to_fraction(self.base) + _to_fraction(self.slope) * d

    def increment_bounds(self):
        s = float(self.slope)
        return s, s

    def has_hole(self) -> bool:
        return self.base == 0

    def describe(self) -> str:
        return f"affine({self.base}, {self.slope})"


@dataclass(frozen=True)
class PowerShifted:
    base: object
    exponent: object

    def __post_init__(self):
        if self.base < 0:
            raise ValueError("power attachment needs a nonnegative base")
        if self.exponent < 0:
            raise ValueError("power attachment needs a nonnegative exponent")

    def evaluate(self, d: int) -> float:
        return float(self.base) * float(d + 1) ** float(self.exponent)

    def evaluate_exact(self, d: int) -> Fraction:
        e = self.exponent
        if isinstance(e, float) and e.is_integer():
            e = int(e)
        if not isinstance(e, int):
            raise ExactUnavailable("exact power weights need an integer exponent")
        return _to_fraction(self.base) * Fraction(d + 1) ** e

    def increment_bounds(self):
        """Increments of base*(d+1)^e are monotone in d: increasing for
        e > 1 (sup is unbounded), decreasing toward 0 for e < 1."""
        e = float(self.exponent)
        first = self.evaluate(1) - self.evaluate(0)
        if e > 1:
            return first, math.inf
        if e == 1:
            return first, first
        return 0.0, first

    def has_hole(self) -> bool:
        return self.base == 0

    def describe(self) -> str:
        return f"power({self.base}, {self.exponent})"


@dataclass(frozen=True)
class TableAttachment:
    values: tuple
    tail_slope: object

    def __post_init__(self):
        values = tuple(self.values)
        object.__setattr__(self, "values", values)
        if not values:
            raise ValueError("table attachment needs at least one entry")
        if any(v < 0 for v in values) or self.tail_slope < 0:
            raise ValueError("table attachment weights must stay nonnegative")

    def evaluate(self, d: int) -> float:
        vs = self.values
        if d < len(vs):
            return float(vs[d])
        return float(vs[-1]) + float(self.tail_slope) * (d - len(vs) + 1)

    def evaluate_exact(self, d: int) -> Fraction:
        vs = self.values
        if d < len(vs):
            return _to_fraction(vs[d])
        return _to_fraction(vs[-1]) + _to_fraction(self.tail_slope) * (d - len(vs) + 1)

    def increment_bounds(self):
        incs = [float(b) - float(a) for a, b in zip(self.values, self.values[1:])]
        incs.append(float(self.tail_slope))
        return min(incs), max(incs)

    def has_hole(self) -> bool:
        return any(v == 0 for v in self.values)

    def describe(self) -> str:
        head = ", ".join(str(v) for v in self.values)
        return f"table({head}; {self.tail_slope})"


def preferential() -> Affine:
    return Affine(1, 1)


def uniform() -> Affine:
    return Affine(1, 0)


def is_nondecreasing(attach) -> bool:
    lo, _ = attach.increment_bounds()
    return lo >= 0


# -- parent-count law ------------------------------------------------------

class ParentCountLaw:
    """Distribution of the number of parent edges a new node draws.

    Finite support on positive integers.  Keeps the pmf as given (ints,
    floats or Fractions), a float cumulative table for sampling, and the
    handful of moments the threshold formulas use.
    """

    __slots__ = ("support", "probs", "cum")

    def __init__(self, pmf: dict):
        if not pmf:
            raise ValueError("empty parent-count pmf")
        support = sorted(pmf)
        probs = [pmf[m] for m in support]
        for m in support:
            if not isinstance(m, int) or m < 1:
                raise ValueError(f"parent counts must be integers >= 1, got {m!r}")
        if any(p < 0 for p in probs):
            raise ValueError("negative probability in parent-count pmf")
        total = sum(float(p) for p in probs)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"parent-count pmf sums to {total}, not 1")
        self.support = support
        self.probs = probs
        cum, acc = [], 0.0
        for p in probs:
            acc += float(p)
            cum.append(acc)
        cum[-1] = 1.0
        self.cum = cum

    @classmethod
    def const(cls, m: int) -> "ParentCountLaw":
        return cls({m: 1})

    @property
    def min(self) -> int:
        return self.support[0]

    @property
    def max(self) -> int:
        return self.support[-1]

    def mean(self) -> float:
        return sum(m * float(p) for m, p in zip(self.support, self.probs))

    def mean_reciprocal(self) -> float:
        return sum(float(p) / m for m, p in zip(self.support, self.probs))

    def mean_exact(self) -> Fraction:
        return sum((Fraction(m) * _to_fraction(p)
                    for m, p in zip(self.support, self.probs)), Fraction(0))

    def mean_reciprocal_exact(self) -> Fraction:
        return sum((_to_fraction(p) / m
                    for m, p in zip(self.support, self.probs)), Fraction(0))

    def items_exact(self):
        return [(m, _to_fraction(p)) for m, p in zip(self.support, self.probs)]

    def is_constant(self) -> bool:
        return len(self.support) == 1

    def describe(self) -> str:
        if self.is_constant():
            return f"const({self.support[0]})"
        body = ", ".join(f"{m}: {p}" for m, p in zip(self.support, self.probs))
        return f"pmf({body})"


# -- weighted index --------------------------------------------------------

class WeightIndex:
    """Fenwick tree over per-node weights for O(log n) weighted selection.

    Kept deliberately plain: 1-based internal tree, capacity doubling, a
    maintained running total, and a deterministic fallback scan when float
    drift lands a draw on a zero-weight slot.  The accelerated engine
    carries a field-for-field copy of this structure, and trajectories are
    compared across the two, so every operation here is the reference.
    """

    __slots__ = ("size", "capacity", "tree", "weights", "total", "positive")

    def __init__(self, capacity: int = 1024):
        self.size = 0
        self.capacity = max(1, capacity)
        self.tree = [0.0] * (self.capacity + 1)
        self.weights = [0.0] * self.capacity
        self.total = 0.0
        self.positive = 0

    def _grow(self, need: int) -> None:
        cap = self.capacity
        while cap < need:
            cap *= 2
        old_n = self.size
        old_weights = self.weights[:old_n]
        self.capacity = cap
        self.tree = [0.0] * (cap + 1)
        self.weights = [0.0] * cap
        self.size = 0
        self.total = 0.0
        self.positive = 0
        for w in old_weights:
            self.append(w)

    def append(self, weight: float) -> int:
        if self.size >= self.capacity:
            self._grow(self.size + 1)
        i = self.size
        self.size += 1
        if weight:
            self._add(i, weight)
            self.weights[i] = weight
            self.total += weight
            if weight > 0:
                self.positive += 1
        return i

    def set_weight(self, i: int, weight: float) -> None:
        old = self.weights[i]
        if weight == old:
            return
        delta = weight - old
        self._add(i, delta)
        self.weights[i] = weight
        self.total += delta
        if (old > 0) != (weight > 0):
            self.positive += 1 if weight > 0 else -1

    def _add(self, i: int, delta: float) -> None:
        j = i + 1
        while j <= self.capacity:
            self.tree[j] += delta
            j += j & (-j)

    def prefix(self, i: int) -> float:
        """Sum of weights[0..i-1]."""
        acc = 0.0
        while i > 0:
            acc += self.tree[i]
            i -= i & (-i)
        return acc

    def select(self, x: float) -> int:
        """Largest prefix not exceeding ``x``: the node whose weight span
        contains ``x``.  Callers pass x = u * total for u in [0, 1)."""
        pos = 0
        mask = 1
        while mask * 2 <= self.capacity:
            mask *= 2
        rem = x
        while mask:
            nxt = pos + mask
            if nxt <= self.capacity and self.tree[nxt] <= rem:
                pos = nxt
                rem -= self.tree[nxt]
            mask >>= 1
        if pos >= self.size:
            pos = self.size - 1
        # float drift or trailing zero weights can strand the draw; walk to
        # the nearest positive slot in a fixed direction so both engine
        # backends resolve the tie the same way
        if self.weights[pos] <= 0:
            j = pos + 1
            while j < self.size and self.weights[j] <= 0:
                j += 1
            if j >= self.size:
                j = pos - 1
                while j >= 0 and self.weights[j] <= 0:
                    j -= 1
            if j < 0:
                raise AllWeightsZero("no positive attachment weight to select")
            pos = j
        return pos

    def recompute_total(self) -> float:
        return sum(self.weights[:self.size])


def weight_index_for(state, attach) -> WeightIndex:
    """Fresh index over all current nodes; PF nodes get weight 0."""
    from .state import PF
    idx = WeightIndex(capacity=max(1024, len(state.labels)))
    for v in range(len(state.labels)):
        if state.labels[v] == PF:
            idx.append(0.0)
        else:
            idx.append(attach.evaluate(state.deg_pt[v]))
    return idx


# -- exact distributions ---------------------------------------------------

def parent_distribution(state, attach, exact: bool = False) -> dict:
    """Exact selection pmf {pt node id: probability}.

    Raises :class:`AllPF` when no PT node exists and :class:`AllWeightsZero`
    when all PT weights vanish, matching what the sampler would hit.
    """
    from .state import PF
    weights = {}
    for v in range(len(state.labels)):
        if state.labels[v] == PF:
            continue
        w = (attach.evaluate_exact(state.deg_pt[v]) if exact
             else attach.evaluate(state.deg_pt[v]))
        weights[v] = w
    if not weights:
        raise AllPF("state has no PT nodes")
    total = sum(weights.values())
    if total == 0:
        raise AllWeightsZero("all PT attachment weights are zero")
    return {v: w / total for v, w in weights.items() if w != 0}


def sample_parents(state, attach, m: int, chooser, windex=None) -> list:
    """Draw m parent ids with replacement, proportional to a(deg_pt).

    Builds a throwaway index when none is supplied; the engine passes its
    maintained one so the draw sequence is identical either way.
    """
    from .state import PF
    if windex is None:
        windex = weight_index_for(state, attach)
    if windex.positive == 0:
        if all(lab == PF for lab in state.labels):
            raise AllPF("state has no PT nodes")
        raise AllWeightsZero("all PT attachment weights are zero")
    return [chooser.weighted_index(windex) for _ in range(m)]


def sample_combination(law: ParentCountLaw, chooser) -> int:
    return law.support[chooser.pmf_index(law.cum)]


# -- config grammar --------------------------------------------------------

def parse_number(token: str):
    token = token.strip()
    if "/" in token:
        num, den = token.split("/")
        return Fraction(int(num), int(den))
    if re.fullmatch(r"-?\d+", token):
        return int(token)
    return float(token)


def parse_attachment(text: str):
    """``affine(a0, slope)`` | ``power(a0, e)`` | ``table(v0, ...; tail)``."""
    text = text.strip()
    m = re.fullmatch(r"(affine|power|table)\((.*)\)", text)
    if not m:
        raise ValueError(f"unrecognized attachment spec {text!r}")
    kind, body = m.group(1), m.group(2)
    if kind == "table":
        if ";" not in body:
            raise ValueError("table(...) needs '; tail_slope' after the values")
        head, tail = body.rsplit(";", 1)
        values = tuple(parse_number(t) for t in head.split(",") if t.strip())
        return TableAttachment(values, parse_number(tail))
    parts = [parse_number(t) for t in body.split(",")]
    if len(parts) != 2:
        raise ValueError(f"{kind}(...) takes exactly two parameters")
    return Affine(*parts) if kind == "affine" else PowerShifted(*parts)


def parse_parent_count_law(text: str) -> ParentCountLaw:
    """``const(m)`` | ``pmf(m1: p1, m2: p2, ...)``."""
    text = text.strip()
    m = re.fullmatch(r"const\((\d+)\)", text)
    if m:
        return ParentCountLaw.const(int(m.group(1)))
    m = re.fullmatch(r"pmf\((.*)\)", text)
    if not m:
        raise ValueError(f"unrecognized parent-count spec {text!r}")
    pmf = {}
    for item in m.group(1).split(","):
        if not item.strip():
            continue
        key, _, val = item.partition(":")
        if not val:
            raise ValueError(f"pmf entry {item!r} needs 'count: probability'")
        pmf[int(key)] = parse_number(val)
    return ParentCountLaw(pmf)
