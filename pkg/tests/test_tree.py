import numpy as np
import pytest

from bagchain.chain import LearnerSpec
from bagchain.ml.dataset import Dataset, synthesize_dataset
from bagchain.ml.tree import DecisionTree, TrainedModel, fit_model, model_hash, train


def brute_force_best_split(X, y, n_classes, min_leaf):
    """Independent oracle: direct loop over every feature and cut position,
    same objective and tie rules (first strictly better wins)."""
    n = len(y)
    best = None
    for feat in range(X.shape[1]):
        order = np.argsort(X[:, feat], kind="stable")
        xs = X[order, feat]
        ys = y[order]
        for i in range(n - 1):
            if xs[i] == xs[i + 1]:
                continue
            n_l, n_r = i + 1, n - i - 1
            if n_l < min_leaf or n_r < min_leaf:
                continue
            cl = np.bincount(ys[: i + 1], minlength=n_classes)
            cr = np.bincount(ys[i + 1 :], minlength=n_classes)
            score = float((cl**2).sum()) / n_l + float((cr**2).sum()) / n_r
            if best is None or score > best[0]:
                best = (score, feat, float((xs[i] + xs[i + 1]) / 2.0))
    return best


def test_root_split_matches_brute_force_oracle():
    rng = np.random.default_rng(0)
    from bagchain.ml.tree import _best_split

    for trial in range(30):
        n = int(rng.integers(8, 40))
        d = int(rng.integers(1, 4))
        n_classes = int(rng.integers(2, 4))
        X = np.round(rng.normal(size=(n, d)), 1)  # coarse values force ties
        y = rng.integers(0, n_classes, size=n).astype(np.int64)
        min_leaf = int(rng.integers(1, 4))
        got = _best_split(X, y, n_classes, min_leaf)
        want = brute_force_best_split(X, y, n_classes, min_leaf)
        if want is None:
            assert got is None
        else:
            assert got == pytest.approx(want)
            assert got[1:] == want[1:]  # same feature and threshold under ties


def test_train_fits_separable_data():
    ds = synthesize_dataset(300, 4, 3, 4.0, seed=1)
    tree = train(ds, LearnerSpec("cart", 8, 1))
    acc = float(np.mean(tree.predict(ds.features) == ds.labels))
    assert acc > 0.98


def test_train_deterministic():
    ds = synthesize_dataset(200, 4, 3, 1.0, seed=2)
    spec = LearnerSpec("cart", 5, 3)
    assert train(ds, spec).serialize() == train(ds, spec).serialize()


def test_depth_and_leaf_limits():
    ds = synthesize_dataset(200, 4, 2, 0.5, seed=3)
    tree = train(ds, LearnerSpec("cart", 2, 10))

    def check(node, depth):
        if node.is_leaf:
            assert depth <= 2
            assert int(node.counts.sum()) >= 1
            return
        check(node.left, depth + 1)
        check(node.right, depth + 1)

    check(tree.root, 0)


def test_min_leaf_respected():
    ds = synthesize_dataset(100, 3, 2, 1.0, seed=4)
    min_leaf = 7
    tree = train(ds, LearnerSpec("cart", 8, min_leaf))

    def leaves(node):
        if node.is_leaf:
            yield int(node.counts.sum())
        else:
            yield from leaves(node.left)
            yield from leaves(node.right)

    assert all(size >= min_leaf for size in leaves(tree.root))


def test_pure_node_stops_splitting():
    X = np.arange(20, dtype=np.float64).reshape(-1, 1)
    y = np.zeros(20, dtype=np.int64)
    tree = train(Dataset(X, y, 2), LearnerSpec("cart", 8, 1))
    assert tree.root.is_leaf


def test_serialize_roundtrip_preserves_predictions():
    ds = synthesize_dataset(250, 5, 4, 1.0, seed=5)
    tree = train(ds, LearnerSpec("cart", 6, 2))
    blob = tree.serialize()
    back = DecisionTree.deserialize(blob)
    assert np.array_equal(tree.predict(ds.features), back.predict(ds.features))
    assert back.serialize() == blob


def test_deserialize_rejects_trailing_bytes():
    ds = synthesize_dataset(50, 2, 2, 1.0, seed=6)
    blob = train(ds, LearnerSpec("cart", 3, 2)).serialize()
    with pytest.raises(ValueError):
        DecisionTree.deserialize(blob + b"\x00")


def test_leaf_prediction_breaks_count_ties_to_smaller_class():
    # single leaf with equal counts: argmax picks the smallest class index
    X = np.zeros((4, 1))
    y = np.array([0, 0, 1, 1], dtype=np.int64)
    tree = train(Dataset(X, y, 2), LearnerSpec("cart", 3, 1))
    assert tree.root.is_leaf
    assert list(tree.predict(np.zeros((2, 1)))) == [0, 0]


def test_model_hash_binds_owner():
    ds = synthesize_dataset(80, 3, 2, 1.0, seed=7)
    model = fit_model(ds, LearnerSpec("cart", 3, 2), "M0")
    assert model.model_hash == model_hash(model.params, "M0")
    assert model.model_hash != model_hash(model.params, "M1")
    copied = TrainedModel(model.params, "M1")
    assert copied.model_hash != model.model_hash


def test_empty_training_set_rejected():
    empty = Dataset(np.zeros((0, 2)), np.zeros(0, dtype=np.int64), 2)
    with pytest.raises(ValueError):
        train(empty, LearnerSpec())
