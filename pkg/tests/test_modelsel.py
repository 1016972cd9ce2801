import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from equivsig.citests import ConfigError
from equivsig.data import Dataset, Target
from equivsig.modelsel import CvConfig, auc, cv_ses, fit_and_score, make_stratified_folds, mse, resolve_task


def test_mse_and_auc_values():
    assert mse([1, 2, 3], [1, 2, 5]) == pytest.approx(4 / 3)
    assert auc([0, 0, 1, 1], [0.1, 0.4, 0.35, 0.8]) == pytest.approx(0.75)
    assert auc([0, 1], [0.5, 0.5]) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        auc([1, 1], [0.1, 0.2])
    with pytest.raises(ValueError):
        mse([1, 2], [1])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 30))
def test_auc_matches_pair_count(seed, n):
    r = np.random.default_rng(seed)
    y = np.r_[0, 1, r.integers(0, 2, n)]
    s = r.integers(0, 5, y.size).astype(float)
    pos, neg = s[y == 1], s[y == 0]
    pairs = (pos[:, None] > neg[None, :]).sum() + 0.5 * (pos[:, None] == neg[None, :]).sum()
    assert auc(y, s) == pytest.approx(pairs / (pos.size * neg.size), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(20, 200), st.integers(2, 10))
def test_stratified_folds_partition_and_balance(seed, n, k):
    r = np.random.default_rng(seed)
    y = Target.binary(np.r_[0, 1, r.integers(0, 2, n - 2)])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        folds = make_stratified_folds(y, k, seed)
    allidx = np.sort(np.concatenate(folds))
    np.testing.assert_array_equal(allidx, np.arange(n))
    for cls in (0, 1):
        total = int((y.values == cls).sum())
        for f in folds:
            assert abs(int((y.values[f] == cls).sum()) - total / k) <= 1


def test_folds_deterministic_and_errors():
    y = Target.continuous(np.arange(30.0))
    a = make_stratified_folds(y, 5, 3)
    b = make_stratified_folds(y, 5, 3)
    assert all(np.array_equal(u, v) for u, v in zip(a, b))
    with pytest.raises(ConfigError):
        make_stratified_folds(y, 1, 0)
    with pytest.raises(ConfigError):
        make_stratified_folds(y, 31, 0)


def test_small_class_warns():
    y = Target.binary(np.r_[np.zeros(20), np.ones(3)])
    with pytest.warns(UserWarning):
        make_stratified_folds(y, 5, 0)


def test_resolve_task():
    c = Target.continuous(np.arange(4.0))
    b = Target.binary([0, 1, 0, 1])
    assert resolve_task(None, c) == "regression"
    assert resolve_task(None, b) == "classification"
    assert resolve_task("C", b) == "classification"
    with pytest.raises(ConfigError):
        resolve_task("C", c)
    with pytest.raises(ConfigError):
        resolve_task("R", b)
    with pytest.raises(ConfigError):
        resolve_task("X", c)


def test_fit_and_score_intercept_only(rng):
    ds = Dataset(rng.normal(size=(40, 2)))
    y = Target.continuous(rng.normal(size=40))
    tr, te = np.arange(20), np.arange(20, 40)
    got = fit_and_score("regression", ds.take(tr), y.take(tr), ds.take(te), y.take(te), [])
    assert got == pytest.approx(np.mean((y.values[te] - y.values[tr].mean()) ** 2))


def test_fit_and_score_classification(rng):
    x = rng.normal(size=(400, 1))
    y = Target.binary((x[:, 0] + 0.3 * rng.normal(size=400) > 0).astype(float))
    ds = Dataset(x)
    tr, te = np.arange(200), np.arange(200, 400)
    assert fit_and_score("classification", ds.take(tr), y.take(tr), ds.take(te), y.take(te), [0]) > 0.9


def test_cv_on_synthetic(synthetic):
    ds, t = synthetic
    res = cv_ses(ds, t, CvConfig(kfolds=5, alphas=(0.05, 0.1), max_ks=(2, 3), seed=1))
    assert res.task == "regression"
    assert set(res.fold_scores) == {(0.05, 2), (0.05, 3), (0.1, 2), (0.1, 3)}
    assert all(len(v) == 5 for v in res.fold_scores.values())
    # regression scores are negated MSE, and the uniform(0, 10) noise has variance 100/12
    assert -res.best_performance == pytest.approx(100 / 12, rel=0.15)
    means = {c: res.mean_performance(c) for c in res.grid}
    assert res.best_performance == max(means.values())


def test_cv_tie_break_prefers_small_config(synthetic):
    ds, t = synthetic
    res = cv_ses(ds, t, CvConfig(kfolds=3, alphas=(0.05, 0.01), max_ks=(3, 2), seed=0))
    # every grid point recovers the same model here, so scores tie exactly
    assert len({tuple(v) for v in res.fold_scores.values()}) == 1
    assert res.best_configuration == (0.01, 2)


def test_cv_explicit_folds(synthetic):
    ds, t = synthetic
    folds = [np.arange(0, 500), np.arange(500, 1000)]
    res = cv_ses(ds, t, CvConfig(folds=folds, alphas=(0.05,), max_ks=(3,)))
    assert res.folds == [f.tolist() for f in folds]
    with pytest.raises(ConfigError):
        cv_ses(ds, t, CvConfig(folds=[np.arange(10)], alphas=(0.05,), max_ks=(3,)))


def test_cv_rejects_task_mismatch(synthetic):
    ds, t = synthetic
    with pytest.raises(ConfigError):
        cv_ses(ds, t, CvConfig(task="C"))
    with pytest.raises(ConfigError):
        CvConfig(alphas=())


def test_cv_deterministic(synthetic):
    ds, t = synthetic
    cfg = CvConfig(kfolds=4, alphas=(0.05,), max_ks=(2, 3), seed=9)
    assert cv_ses(ds, t, cfg).to_dict() == cv_ses(ds, t, cfg).to_dict()
