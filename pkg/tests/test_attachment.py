"""Weight families, parent-count law, the Fenwick index and the config
grammar."""

from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from ckplab.attachment import (
    Affine, PowerShifted, TableAttachment, ParentCountLaw, WeightIndex,
    AllPF, AllWeightsZero, ExactUnavailable,
    preferential, uniform, is_nondecreasing,
    parent_distribution, sample_parents, sample_combination,
    weight_index_for, parse_attachment, parse_parent_count_law, parse_number,
)
from ckplab.rand import SimChooser, derive_seed
from ckplab.state import CT, CF, CkpState


def chain_state(labels):
    s = CkpState()
    s.add_root(labels[0])
    for i, lab in enumerate(labels[1:], start=1):
        s.add_node([i - 1], lab, birth=i)
    return s


def test_family_point_values():
    assert preferential().evaluate(0) == 1
    assert preferential().evaluate(3) == 4
    assert uniform().evaluate(17) == 1
    holes = TableAttachment((1, 0), 0)
    assert holes.evaluate(0) == 1
    assert holes.evaluate(5) == 0
    assert holes.has_hole()
    cubic = PowerShifted(1, 3)
    assert cubic.evaluate(0) == 1
    assert cubic.evaluate(2) == 27
    assert cubic.evaluate_exact(2) == Fraction(27)


def test_table_tail_continues_affinely():
    t = TableAttachment((2, 5), 3)
    assert t.evaluate(1) == 5
    assert t.evaluate(2) == 8
    assert t.evaluate(4) == 14
    assert t.evaluate_exact(4) == Fraction(14)


def test_exact_evaluation_matches_float():
    a = Affine(Fraction(1, 2), Fraction(1, 3))
    assert a.evaluate_exact(4) == Fraction(1, 2) + Fraction(4, 3)
    assert a.evaluate(4) == pytest.approx(float(a.evaluate_exact(4)))
    with pytest.raises(ExactUnavailable):
        PowerShifted(1, 2.5).evaluate_exact(3)


def test_negative_weights_rejected():
    with pytest.raises(ValueError):
        Affine(1, -1)
    with pytest.raises(ValueError):
        TableAttachment((1, -2), 0)
    with pytest.raises(ValueError):
        TableAttachment((1, 2), -1)


@pytest.mark.parametrize("fam", [
    Affine(1, 1), Affine(1, 0), Affine(2, 3),
    PowerShifted(1, 3), PowerShifted(2, 1), PowerShifted(1, 0.5),
    TableAttachment((1, 0), 0), TableAttachment((1, 3, 3, 7), 2),
])
def test_increment_bounds_cover_a_long_sweep(fam):
    lo, hi = fam.increment_bounds()
    for d in range(10_000):
        inc = fam.evaluate(d + 1) - fam.evaluate(d)
        assert lo - 1e-9 <= inc <= hi + 1e-9


def test_nondecreasing_flag():
    assert is_nondecreasing(preferential())
    assert is_nondecreasing(uniform())
    assert not is_nondecreasing(TableAttachment((1, 0), 0))


def test_parent_count_law_moments():
    law = ParentCountLaw({1: 0.5, 3: 0.5})
    assert law.min == 1 and law.max == 3
    assert law.mean() == pytest.approx(2.0)
    assert law.mean_reciprocal() == pytest.approx(0.5 + 0.5 / 3)
    exact = ParentCountLaw({1: Fraction(1, 2), 3: Fraction(1, 2)})
    assert exact.mean_exact() == Fraction(2)
    assert exact.mean_reciprocal_exact() == Fraction(2, 3)
    point = ParentCountLaw.const(2)
    assert point.min == point.max == 2
    assert point.mean_reciprocal() == 0.5
    assert point.is_constant()


def test_parent_count_law_validation():
    with pytest.raises(ValueError):
        ParentCountLaw({0: 1.0})
    with pytest.raises(ValueError):
        ParentCountLaw({1: 0.6, 2: 0.6})
    with pytest.raises(ValueError):
        ParentCountLaw({})


def test_parent_distribution_chain_preferential():
    s = chain_state([CF, CT])          # degrees: node0 has 1 child, node1 none
    dist = parent_distribution(s, preferential())
    assert dist[0] == pytest.approx(2 / 3)
    assert dist[1] == pytest.approx(1 / 3)
    exact = parent_distribution(s, preferential(), exact=True)
    assert exact == {0: Fraction(2, 3), 1: Fraction(1, 3)}


def test_parent_distribution_holes_picks_leaf_only():
    s = chain_state([CF, CT, CT])
    dist = parent_distribution(s, TableAttachment((1, 0), 0))
    assert dist == {2: 1.0}


def test_parent_distribution_error_cases():
    s = chain_state([CF])
    s.mark_pf([0])
    with pytest.raises(AllPF):
        parent_distribution(s, preferential())
    s2 = chain_state([CF, CT])
    with pytest.raises(AllWeightsZero):
        parent_distribution(s2, TableAttachment((0,), 0))


def test_sample_parents_trivial_and_deterministic():
    s = chain_state([CF])
    picks = sample_parents(s, preferential(), 3, SimChooser(7))
    assert picks == [0, 0, 0]
    s2 = chain_state([CF, CT, CT])
    a = sample_parents(s2, preferential(), 5, SimChooser(11))
    b = sample_parents(s2, preferential(), 5, SimChooser(11))
    assert a == b


def test_sample_parents_frequency_matches_distribution():
    s = chain_state([CF, CT])
    chooser = SimChooser(123)
    n = 100_000
    hits = sum(1 for _ in range(n)
               if sample_parents(s, preferential(), 1, chooser)[0] == 0)
    assert abs(hits / n - 2 / 3) < 0.01


def test_sample_combination_moment():
    law = ParentCountLaw({1: 0.5, 3: 0.5})
    chooser = SimChooser(5)
    n = 100_000
    total = sum(sample_combination(law, chooser) for _ in range(n))
    assert abs(total / n - 2.0) < 0.02


def test_weight_index_matches_brute_force_prefix():
    idx = WeightIndex(capacity=4)      # force growth
    weights = [1.0, 0.0, 2.5, 4.0, 0.5, 3.0]
    for w in weights:
        idx.append(w)
    assert idx.total == pytest.approx(sum(weights))
    assert idx.positive == 5
    for i in range(len(weights) + 1):
        assert idx.prefix(i) == pytest.approx(sum(weights[:i]))
    # boundary draws land on the node whose span contains x
    assert idx.select(0.0) == 0
    assert idx.select(0.999) == 0
    assert idx.select(1.0) == 2
    assert idx.select(3.5 - 1e-9) == 2
    assert idx.select(3.5) == 3
    idx.set_weight(3, 0.0)
    assert idx.positive == 4
    assert idx.select(3.5) == 4


@given(st.lists(st.tuples(st.sampled_from(["append", "set", "select"]),
                          st.integers(0, 30),
                          st.one_of(st.just(0.0),
                                    st.floats(1e-6, 100))),
                min_size=1, max_size=60))
@settings(max_examples=150, deadline=None)
def test_weight_index_random_ops_agree_with_list(ops):
    # weights are zero or well above float absorption scale, like every
    # attachment function produces; the subnormal regime is covered by
    # test_select_lands_on_positive_weight_despite_tiny_values
    idx = WeightIndex(capacity=2)
    mirror = []
    for op, i, w in ops:
        if op == "append" or not mirror:
            idx.append(w)
            mirror.append(w)
        elif op == "set":
            j = i % len(mirror)
            idx.set_weight(j, w)
            mirror[j] = w
        else:
            total = sum(mirror)
            if total <= 0:
                continue
            x = (i / 31.0) * total * 0.999
            got = idx.select(x)
            acc = 0.0
            want = None
            for j, wj in enumerate(mirror):
                if acc <= x < acc + wj:
                    want = j
                    break
                acc += wj
            if want is not None and mirror[want] > 0:
                assert got == want
    assert idx.total == pytest.approx(sum(mirror))
    assert idx.positive == sum(1 for w in mirror if w > 0)
    assert idx.recompute_total() == pytest.approx(sum(mirror))


@given(st.lists(st.floats(0, 100), min_size=1, max_size=40),
       st.floats(0, 1, exclude_max=True))
@settings(max_examples=120, deadline=None)
def test_select_lands_on_positive_weight_despite_tiny_values(weights, u):
    """Even when float absorption makes the tree widths lie (subnormal
    weights vanish against large totals), a draw must land on a slot whose
    stored weight is positive."""
    idx = WeightIndex(capacity=2)
    for w in weights:
        idx.append(w)
    if idx.positive == 0:
        with pytest.raises(AllWeightsZero):
            idx.select(0.0)
        return
    got = idx.select(u * idx.total)
    assert idx.weights[got] > 0
    s = chain_state([CF, CT, CT])
    s.mark_pf([0])
    idx = weight_index_for(s, preferential())
    assert idx.weights[0] == 0.0
    assert idx.weights[1] == 2.0      # one PT child edge remains
    assert idx.positive == 2


def test_parse_round_trips():
    for text in ["affine(1, 1)", "power(1, 3)", "table(1, 0; 0)",
                 "table(1, 3, 7; 2)", "affine(1/2, 1/3)"]:
        fam = parse_attachment(text)
        again = parse_attachment(fam.describe())
        assert again == fam
    law = parse_parent_count_law("pmf(1: 1/2, 3: 1/2)")
    assert law.support == [1, 3]
    assert law.mean_exact() == 2
    assert parse_parent_count_law("const(4)").support == [4]


def test_parse_rejects_garbage():
    for bad in ["affine(1)", "ring(1, 2)", "table(1, 2)", "pmf(1; 0.5)"]:
        with pytest.raises(ValueError):
            parse_attachment(bad) if not bad.startswith("pmf") \
                else parse_parent_count_law(bad)


def test_parse_number_forms():
    assert parse_number("3") == 3 and isinstance(parse_number("3"), int)
    assert parse_number("0.25") == 0.25
    assert parse_number("6/7") == Fraction(6, 7)


def test_derive_seed_stable_and_spread():
    a = derive_seed(42, 3, 0)
    assert a == derive_seed(42, 3, 0)
    others = {derive_seed(42, i, j) for i in range(10) for j in range(10)}
    assert len(others) == 100
    assert all(0 <= s < 2 ** 63 for s in others)
