import numpy as np
import pytest
from hypothesis import given, strategies as st

from vibim.encoding import (
    EncodingError,
    NonFiniteValue,
    Predictor,
    PredictorSchema,
    SelfPair,
    UnknownLevel,
    augment_interactions,
    encode,
    interaction_pairs,
)


def schema_ab():
    return PredictorSchema((
        Predictor.categorical("color", ["red", "green", "blue"]),
        Predictor.continuous("size"),
    ))


def test_dummy_coding_uses_last_level_as_reference():
    d = encode(schema_ab(), {"color": ["red", "blue", "green"], "size": [1.0, 2.0, 3.0]})
    np.testing.assert_array_equal(d.matrix, [[1, 0, 1], [0, 0, 2], [0, 1, 3]])
    assert d.column_labels == ("color.red", "color.green", "size")
    assert [list(g) for g in d.groups] == [[0, 1], [2]]
    assert d.terms == ((0,), (1,))


def test_column_count_formula():
    s = PredictorSchema((
        Predictor.categorical("a", "xyz"),
        Predictor.categorical("b", "pq"),
        Predictor.continuous("c"),
    ))
    # sum(J) + p - 2q = 5 + 3 - 4
    assert s.n_columns == 4


def test_interaction_group_holds_all_products():
    d = encode(schema_ab(), {"color": ["red", "blue", "green", "red"], "size": [1.0, 2.0, 3.0, 4.0]})
    aug = augment_interactions(d, [(1, 0)])
    g = aug.group_index((0, 1))
    cols = aug.groups[g]
    assert len(cols) == 2
    np.testing.assert_array_equal(aug.matrix[:, cols], [[1, 0], [0, 0], [0, 3], [4, 0]])
    assert aug.labels[g] == "color*size"
    assert aug.column_labels[cols[0]] == "color.red:size"


def test_augment_dedupes_and_skips_existing():
    d = encode(schema_ab(), {"color": ["red", "blue", "green"], "size": [1.0, 2.0, 3.0]})
    aug = augment_interactions(d, [(0, 1), (1, 0)])
    assert aug.n_groups == 3
    assert augment_interactions(aug, [(0, 1)]) is aug
    assert interaction_pairs(aug) == {(0, 1)}


def test_self_pair_rejected():
    d = encode(schema_ab(), {"color": ["red", "blue", "green"], "size": [1.0, 2.0, 3.0]})
    with pytest.raises(SelfPair):
        augment_interactions(d, [(1, 1)])


def test_unknown_level_and_nonfinite():
    with pytest.raises(UnknownLevel) as exc:
        encode(schema_ab(), {"color": ["red", "pink"], "size": [1.0, 2.0]})
    assert exc.value.row == 1
    with pytest.raises(NonFiniteValue):
        encode(schema_ab(), {"color": ["red", "red"], "size": [1.0, float("nan")]})


def test_schema_validation():
    with pytest.raises(EncodingError):
        Predictor.categorical("a", ["x"])
    with pytest.raises(EncodingError):
        Predictor.categorical("a", ["x", "x"])
    with pytest.raises(EncodingError):
        PredictorSchema((Predictor.continuous("a"), Predictor.continuous("a")))


def test_constant_columns_flagged():
    d = encode(schema_ab(), {"color": ["red", "red", "red"], "size": [1.0, 2.0, 3.0]})
    assert d.constant.tolist() == [True, True, False]


def test_select_groups_keeps_terms():
    d = encode(schema_ab(), {"color": ["red", "blue", "green"], "size": [1.0, 2.0, 3.0]})
    aug = augment_interactions(d, [(0, 1)])
    sub = aug.select_groups([2, 1])
    assert sub.terms == ((1,), (0, 1))
    np.testing.assert_array_equal(sub.matrix, aug.matrix[:, [2, 3, 4]])
    assert aug.main_effects().terms == ((0,), (1,))


@given(
    levels=st.lists(st.integers(2, 5), min_size=1, max_size=3),
    n=st.integers(1, 30),
    seed=st.integers(0, 2**31),
)
def test_dummies_mutually_exclusive(levels, n, seed):
    rng = np.random.default_rng(seed)
    entries, raw = [], {}
    for i, J in enumerate(levels):
        lv = [f"l{k}" for k in range(J)]
        entries.append(Predictor.categorical(f"c{i}", lv))
        raw[f"c{i}"] = [lv[k] for k in rng.integers(0, J, n)]
    d = encode(PredictorSchema(tuple(entries)), raw)
    assert d.n_columns == sum(J - 1 for J in levels)
    for i, cols in enumerate(d.groups):
        block = d.matrix[:, cols]
        assert set(np.unique(block)) <= {0.0, 1.0}
        assert (block.sum(axis=1) <= 1).all()
        ref = np.array([v == f"l{levels[i] - 1}" for v in raw[f"c{i}"]])
        np.testing.assert_array_equal(block.sum(axis=1) == 0, ref)


@given(
    J1=st.integers(2, 4), J2=st.integers(2, 4), seed=st.integers(0, 2**31)
)
def test_interaction_width_is_product_of_widths(J1, J2, seed):
    rng = np.random.default_rng(seed)
    s = PredictorSchema((
        Predictor.categorical("a", [str(k) for k in range(J1)]),
        Predictor.categorical("b", [str(k) for k in range(J2)]),
        Predictor.continuous("c"),
    ))
    n = 12
    raw = {"a": [str(k) for k in rng.integers(0, J1, n)],
           "b": [str(k) for k in rng.integers(0, J2, n)],
           "c": rng.standard_normal(n)}
    aug = augment_interactions(encode(s, raw), [(0, 1), (0, 2), (1, 2)])
    sizes = dict(zip(aug.terms, aug.group_sizes))
    assert sizes[(0, 1)] == (J1 - 1) * (J2 - 1)
    assert sizes[(0, 2)] == J1 - 1
    assert sizes[(1, 2)] == J2 - 1
