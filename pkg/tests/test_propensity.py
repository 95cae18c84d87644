import numpy as np
import pytest

from conftest import matrix_from_dense
from psmfeat.learners import ForestParams, TrainConfig
from psmfeat.propensity import (
    PropensityError,
    cache_key,
    estimate_all,
    estimate_feature,
    load_table,
    save_table,
)
from test_learners import reference_logreg


def test_independent_feature_scores_near_half():
    rng = np.random.default_rng(0)
    X = (rng.random((400, 6)) < 0.5).astype(int)
    s = estimate_feature(matrix_from_dense(X), 0)
    assert abs(s.mean() - 0.5) < 0.1
    assert np.all(np.abs(s - 0.5) < 0.2)


def test_cooccurring_feature_against_reference_optimizer():
    u = np.array([1, 1, 1, 1, 1, 0, 0, 0, 0, 0])
    other = np.array([1, 0, 1, 0, 0, 1, 0, 1, 0, 1])
    X = np.column_stack([u, u, other])  # feature 0 duplicates feature 1
    cfg = TrainConfig(max_epochs=50000, tolerance=1e-10)
    s = estimate_feature(matrix_from_dense(X), 0, cfg=cfg)
    w_ref, b_ref = reference_logreg(X[:, 1:], u.astype(float), 1.0 / 10)
    ref = 1 / (1 + np.exp(-(X[:, 1:] @ w_ref + b_ref)))
    assert np.allclose(s, ref, atol=1e-6)
    assert np.all(s[u == 1] > 0.5) and np.all(s[u == 0] < 0.5)


def test_unregularized_cooccurrence_approaches_certainty():
    u = np.array([1] * 10 + [0] * 10)
    X = np.column_stack([u, u])
    s = estimate_feature(matrix_from_dense(X), 0, cfg=TrainConfig(l2_lambda=0.0, max_epochs=3000))
    assert np.all(s[u == 1] > 0.95) and np.all(s[u == 0] < 0.05)


@pytest.mark.parametrize("estimator", ["logistic", "forest"])
def test_single_column_gives_base_rate(estimator):
    X = np.array([[1], [0], [0], [1], [1]])
    s = estimate_feature(matrix_from_dense(X), 0, estimator=estimator)
    assert np.all(s == 0.6)


def test_estimate_all_composition(random_matrix):
    m = random_matrix(V=3)
    t = estimate_all(m)
    assert t.scores.shape == (40, 3)
    assert t.skipped == {}
    assert t.estimator == "logistic"
    for j in range(3):
        assert np.max(np.abs(t.scores[:, j] - estimate_feature(m, j))) <= 1e-12


def test_logistic_scores_strictly_inside_unit_interval(random_matrix):
    t = estimate_all(random_matrix(V=10, seed=3))
    assert np.all((t.scores > 0) & (t.scores < 1))


def test_serial_and_parallel_identical(random_matrix):
    m = random_matrix(n=60, V=70, seed=4)
    a = estimate_all(m, workers=1)
    b = estimate_all(m, workers=3)
    assert a.scores.tobytes() == b.scores.tobytes()


def test_forest_estimator_deterministic_and_bounded(random_matrix):
    m = random_matrix(n=30, V=5, seed=5)
    params = ForestParams(n_trees=8, max_depth=4)
    a = estimate_all(m, "forest", forest_params=params)
    b = estimate_all(m, "forest", forest_params=params, workers=2)
    assert a.scores.tobytes() == b.scores.tobytes()
    assert np.all((a.scores >= 0) & (a.scores <= 1))


def test_row_permutation_equivariance(random_matrix):
    m = random_matrix(n=50, V=6, seed=6)
    perm = np.random.default_rng(0).permutation(50)
    a = estimate_all(m)
    b = estimate_all(m.take_rows(perm))
    assert np.allclose(a.scores[perm], b.scores, atol=1e-10, rtol=0)


def test_degenerate_columns_skipped_with_reason():
    X = np.array([[1, 0, 1], [0, 0, 1], [1, 0, 1], [0, 0, 1]])
    t = estimate_all(matrix_from_dense(X))
    assert set(t.skipped) == {1, 2}
    assert "absent" in t.skipped[1] and "every document" in t.skipped[2]
    assert np.all(np.isnan(t.scores[:, 1]))
    with pytest.raises(KeyError):
        t.column(1)


def test_all_features_skipped_is_error():
    X = np.ones((4, 2), dtype=int)
    with pytest.raises(PropensityError):
        estimate_all(matrix_from_dense(X))


def test_estimate_feature_degenerate_is_error():
    with pytest.raises(PropensityError, match="t000"):
        estimate_feature(matrix_from_dense(np.array([[1, 0], [1, 1]])), 0)


def test_unknown_estimator():
    with pytest.raises(ValueError):
        estimate_all(matrix_from_dense(np.eye(3, dtype=int)), "boosting")


def test_table_roundtrip_and_cache(tmp_path, random_matrix):
    m = random_matrix(V=5, seed=7)
    t = estimate_all(m, cache_dir=tmp_path)
    files = list(tmp_path.glob("propensity-*.bin"))
    assert len(files) == 1
    again = estimate_all(m, cache_dir=tmp_path)
    assert again.scores.tobytes() == t.scores.tobytes()
    save_table(again, tmp_path / "copy.bin")
    assert (tmp_path / "copy.bin").read_bytes() == files[0].read_bytes()
    assert load_table(tmp_path / "copy.bin").skipped == t.skipped


def test_cache_key_sensitive_to_config(random_matrix):
    m = random_matrix(V=4)
    k1 = cache_key(m, "logistic", TrainConfig(), ForestParams())
    k2 = cache_key(m, "logistic", TrainConfig(max_epochs=10), ForestParams())
    assert k1 != k2 and len(k1) == 64
