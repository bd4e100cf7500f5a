import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

import oracles
from utilcast.tree import Tree, grow_tree, presort, resolve_max_features


def _structure(tree):
    return oracles.from_fitted(tree)


def test_best_split_example():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    tree = grow_tree(X, [0.0, 0.0, 1.0, 1.0], max_depth=1)
    assert _structure(tree) == ("split", 0, 1.5, ("leaf",), ("leaf",))
    assert tree.predict(X).tolist() == [0.0, 0.0, 1.0, 1.0]


def test_constant_target_is_single_leaf():
    X = np.random.default_rng(0).random((20, 3))
    tree = grow_tree(X, np.full(20, 2.5))
    assert tree.node_count == 1 and tree.value[0] == 2.5


def test_duplicate_feature_tie_goes_to_lower_index():
    x = np.array([0.0, 1.0, 2.0, 3.0, 4.0])
    X = np.column_stack([x, x])
    tree = grow_tree(X, [1.0, 1.0, 5.0, 5.0, 5.0], max_depth=1)
    assert tree.feature[0] == 0


def test_equal_gain_thresholds_tie_goes_to_lower_threshold():
    # splitting after the 1st or the 3rd row gives the same SSE
    X = np.arange(4.0).reshape(-1, 1)
    tree = grow_tree(X, [0.0, 1.0, 1.0, 2.0], max_depth=1)
    assert tree.threshold[0] == 0.5


def test_max_depth_zero_is_mean_leaf():
    y = np.array([1.0, 2.0, 4.0])
    tree = grow_tree(np.arange(3.0).reshape(-1, 1), y, max_depth=0)
    assert tree.node_count == 1 and tree.value[0] == pytest.approx(7 / 3)


def test_midpoint_that_rounds_up_uses_lower_value():
    a = 1.0
    b = np.nextafter(a, 2.0)
    tree = grow_tree(np.array([[a], [b]]), [0.0, 1.0])
    assert tree.threshold[0] == a
    assert tree.predict(np.array([[a], [b]])).tolist() == [0.0, 1.0]


def test_min_samples_leaf_and_split_respected():
    rng = np.random.default_rng(3)
    X = rng.random((200, 3))
    y = X[:, 0] + rng.normal(0, 0.1, 200)
    tree = grow_tree(X, y, min_samples_leaf=7, min_samples_split=20)
    leaves = tree.is_leaf
    assert tree.n_samples[leaves].min() >= 7
    assert tree.n_samples[~leaves].min() >= 20


def test_children_partition_parent_rows():
    rng = np.random.default_rng(4)
    X = rng.random((100, 2))
    tree = grow_tree(X, rng.random(100))
    for node in np.flatnonzero(~tree.is_leaf):
        assert tree.n_samples[tree.left[node]] + tree.n_samples[tree.right[node]] == tree.n_samples[node]


def test_matches_greedy_oracle_on_twenty_rows():
    rng = np.random.default_rng(20)
    for _ in range(20):
        X = rng.random((20, 3))
        y = rng.random(20)
        tree = grow_tree(X, y, max_depth=2)
        want = oracles.greedy_tree(X.tolist(), y.tolist(), max_depth=2)
        assert _structure(tree) == want
        assert oracles.structure_sse(_structure(tree), X.tolist(), y.tolist()) == oracles.structure_sse(
            want, X.tolist(), y.tolist()
        )


@pytest.mark.parametrize("min_leaf", [1, 2, 3])
def test_matches_oracle_with_ties_and_leaf_sizes(min_leaf):
    rng = np.random.default_rng(100 + min_leaf)
    for _ in range(60):
        n = int(rng.integers(2, 31))
        X = np.round(rng.random((n, int(rng.integers(1, 5)))) * 4) / 4
        y = rng.integers(0, 3, n).astype(float)
        tree = grow_tree(X, y, max_depth=2, min_samples_leaf=min_leaf)
        assert _structure(tree) == oracles.greedy_tree(X.tolist(), y.tolist(), max_depth=2, min_leaf=min_leaf)


def test_weights_equal_repeated_rows():
    rng = np.random.default_rng(6)
    X = rng.random((30, 2))
    y = rng.random(30)
    w = rng.integers(0, 4, 30).astype(float)
    w[0] = 1.0
    weighted = grow_tree(X, y, w)
    rows = np.repeat(np.arange(30), w.astype(int))
    repeated = grow_tree(X[rows], y[rows])
    probe = rng.random((50, 2))
    assert np.array_equal(weighted.predict(probe), repeated.predict(probe))


def test_leaf_values_stay_within_training_range():
    rng = np.random.default_rng(7)
    X = rng.random((300, 4))
    y = rng.normal(size=300) * 1e3
    tree = grow_tree(X, y, max_depth=6)
    out = tree.predict(rng.random((500, 4)) * 3 - 1)
    assert out.min() >= y.min() and out.max() <= y.max()


def test_max_features_draw_is_seeded():
    rng = np.random.default_rng(8)
    X = rng.random((80, 6))
    y = X @ rng.random(6)
    a = grow_tree(X, y, max_features=2, seed=5)
    b = grow_tree(X, y, max_features=2, seed=5)
    c = grow_tree(X, y, max_features=2, seed=6)
    assert a.to_dict() == b.to_dict()
    assert a.to_dict() != c.to_dict()


def test_resolve_max_features():
    assert resolve_max_features(None, 10) == 10
    assert resolve_max_features("all", 10) == 10
    assert resolve_max_features(0.33, 10) == 3
    assert resolve_max_features(0.01, 10) == 1
    assert resolve_max_features(50, 10) == 10
    for bad in (0, 1.5, -2):
        with pytest.raises(ValueError):
            resolve_max_features(bad, 10)


def test_input_validation():
    with pytest.raises(ValueError):
        grow_tree(np.zeros((0, 2)), [])
    with pytest.raises(ValueError):
        grow_tree(np.zeros((3, 2)), [1.0, 2.0])
    with pytest.raises(ValueError):
        grow_tree(np.array([[np.nan]]), [1.0])
    with pytest.raises(ValueError):
        grow_tree(np.zeros((2, 1)), [1.0, 2.0], weights=[0.0, 0.0])


def test_presort_is_stable():
    X = np.array([[1.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
    assert presort(X).tolist() == [[1, 0, 2], [0, 1, 2]]


def test_depth_and_importances():
    X = np.column_stack([np.zeros(8), np.zeros(8), np.arange(8.0)])
    y = (np.arange(8) >= 4).astype(float)
    tree = grow_tree(X, y)
    assert tree.depth() == 1
    imp = tree.importances(3)
    assert imp[0] == imp[1] == 0.0 and imp[2] == pytest.approx(2.0)


def test_dict_round_trip_and_validation():
    rng = np.random.default_rng(9)
    X = rng.random((40, 3))
    tree = grow_tree(X, rng.random(40))
    back = Tree.from_dict(tree.to_dict())
    assert np.array_equal(back.predict(X), tree.predict(X))
    bad = tree.to_dict()
    bad["left"][0] = 0
    with pytest.raises(ValueError):
        Tree.from_dict(bad)
    bad = tree.to_dict()
    bad["value"] = bad["value"][:-1]
    with pytest.raises(ValueError):
        Tree.from_dict(bad)


def test_to_nested():
    tree = grow_tree(np.array([[0.0], [1.0]]), [1.0, 3.0])
    nested = tree.to_nested()
    assert nested["feature"] == 0 and nested["threshold"] == 0.5
    assert nested["left"] == {"value": 1.0, "n_samples": 1.0}


@settings(max_examples=60, deadline=None)
@given(
    hnp.arrays(np.float64, st.tuples(st.integers(2, 25), st.integers(1, 3)), elements=st.integers(-3, 3).map(float)),
    st.data(),
)
def test_unbounded_tree_fits_distinct_rows_exactly(X, data):
    y = np.array(data.draw(st.lists(st.integers(-5, 5).map(float), min_size=len(X), max_size=len(X))))
    tree = grow_tree(X, y)
    # rows sharing a feature vector collapse into one leaf holding their mean
    _, inverse = np.unique(X, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    means = np.array([y[inverse == g].mean() for g in range(inverse.max() + 1)])
    assert np.allclose(tree.predict(X), means[inverse], rtol=0, atol=1e-12)
