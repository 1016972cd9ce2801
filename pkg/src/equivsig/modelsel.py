"""Cross-validated tuning of the SES threshold and conditioning-set bound."""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .citests import ConfigError, expand_columns
from .data import Dataset, Target, check_paired
from .regress import logistic_fit, ols_fit, predict_linear, predict_logistic
from .ses import SesConfig, TestCache, ses_run

DEFAULT_ALPHAS = (0.01, 0.05, 0.1)
DEFAULT_MAX_KS = (3, 5)

TASKS = {"C": "classification", "R": "regression",
         "classification": "classification", "regression": "regression"}


def mse(y, yhat) -> float:
    """Mean squared error ``sum((y - yhat)^2) / n``."""
    y, yhat = np.asarray(y, dtype=float), np.asarray(yhat, dtype=float)
    if y.shape != yhat.shape or y.size < 1:
        raise ValueError(f"length mismatch: {y.shape} vs {yhat.shape}")
    d = y - yhat
    return float(d @ d) / y.size


def auc(labels, scores) -> float:
    """Area under the ROC curve as the Mann-Whitney statistic.

    Ties between a positive and a negative score count one half.
    """
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=float)
    if labels.shape != scores.shape:
        raise ValueError("labels and scores differ in length")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes")
    ranks = stats.rankdata(scores, method="average")
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def make_stratified_folds(target: Target, kfolds: int, seed=None) -> list[np.ndarray]:
    """Partition ``0..n-1`` into ``kfolds`` folds.

    Discrete targets are shuffled within each class and dealt round-robin,
    continuing the deal across classes, so each fold's class counts differ
    from the ideal share by at most one. Continuous targets get a plain
    shuffled round-robin deal.
    """
    n = len(target)
    if kfolds < 2:
        raise ConfigError(f"kfolds must be >= 2, got {kfolds}")
    if kfolds > n:
        raise ConfigError(f"kfolds={kfolds} exceeds the {n} samples")
    rng = np.random.default_rng(seed)
    if target.is_discrete:
        groups = []
        for cls in np.unique(target.values):
            members = np.flatnonzero(target.values == cls)
            if members.size < kfolds:
                warnings.warn(f"class {cls:g} has {members.size} samples for {kfolds} folds", stacklevel=2)
            groups.append(rng.permutation(members))
        order = np.concatenate(groups)
    else:
        order = rng.permutation(n)
    assignment = np.arange(n) % kfolds
    return [np.sort(order[assignment == f]) for f in range(kfolds)]


def _check_folds(folds, n: int) -> list[np.ndarray]:
    folds = [np.sort(np.asarray(f, dtype=int)) for f in folds]
    allidx = np.concatenate(folds) if folds else np.array([], dtype=int)
    if len(folds) < 2 or allidx.size != n or not np.array_equal(np.sort(allidx), np.arange(n)):
        raise ConfigError("explicit folds must partition the sample indices into at least 2 folds")
    return folds


def resolve_task(task, target: Target) -> str:
    if task is None:
        task = "classification" if target.kind == "binary" else "regression"
    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r}; use C or R")
    task = TASKS[task]
    if task == "classification" and target.kind != "binary":
        raise ConfigError(f"classification needs a binary target, got {target.kind}")
    if task == "regression" and target.kind != "continuous":
        raise ConfigError(f"regression needs a continuous target, got {target.kind}")
    return task


def fit_and_score(task: str, train_ds: Dataset, train_t: Target, test_ds: Dataset, test_t: Target,
                  variables) -> float:
    """Fit the task model on ``variables`` (intercept-only if empty) and score
    it on the test part: MSE for regression, AUC for classification."""
    variables = list(variables)

    def design(ds):
        return np.hstack([np.ones((ds.n_rows, 1)), expand_columns(ds, variables)])

    if task == "regression":
        fit = ols_fit(design(train_ds), train_t.values)
        return mse(test_t.values, predict_linear(fit, design(test_ds)))
    fit = logistic_fit(design(train_ds), train_t.values)
    return auc(test_t.values, predict_logistic(fit, design(test_ds)))


@dataclass
class CvConfig:
    kfolds: int = 10
    folds: list | None = None
    alphas: tuple = DEFAULT_ALPHAS
    max_ks: tuple = DEFAULT_MAX_KS
    task: str | None = None
    seed: int | None = 0
    workers: int = 1

    def __post_init__(self):
        if not self.alphas or not self.max_ks:
            raise ConfigError("alphas and max_ks must be non-empty")
        if self.folds is None and self.kfolds < 2:
            raise ConfigError(f"kfolds must be >= 2, got {self.kfolds}")

    def grid(self) -> list[tuple[float, int]]:
        return [(float(a), int(k)) for a, k in itertools.product(self.alphas, self.max_ks)]


@dataclass
class CvResult:
    """Per-configuration fold scores, oriented so larger is better
    (regression scores are negated MSE)."""

    task: str
    grid: list[tuple[float, int]]
    fold_scores: dict[tuple[float, int], list[float]]
    best_configuration: tuple[float, int]
    best_performance: float
    seed: int | None = None
    folds: list[list[int]] = field(default_factory=list, repr=False)

    def mean_performance(self, config) -> float:
        return float(np.mean(self.fold_scores[config]))

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "seed": self.seed,
            "grid": [{"alpha": a, "max_k": k, "fold_scores": self.fold_scores[(a, k)],
                      "mean": self.mean_performance((a, k))} for a, k in self.grid],
            "best_configuration": {"alpha": self.best_configuration[0], "max_k": self.best_configuration[1]},
            "best_performance": self.best_performance,
            "folds": [list(map(int, f)) for f in self.folds],
        }


def cv_ses(ds: Dataset, target: Target, cfg: CvConfig | None = None, test="auto") -> CvResult:
    """Pick the (threshold, max_k) pair with the best mean held-out score.

    Each fold runs SES on the training part for every grid point, sharing
    one test cache across the grid, fits the task model on the first
    signature and scores the held-out part. Mean-score ties go to the
    smaller threshold, then the smaller max_k.
    """
    cfg = cfg or CvConfig()
    check_paired(ds, target)
    task = resolve_task(cfg.task, target)
    if cfg.folds is not None:
        folds = _check_folds(cfg.folds, ds.n_rows)
    else:
        folds = make_stratified_folds(target, cfg.kfolds, cfg.seed)
    grid = cfg.grid()
    scores: dict[tuple[float, int], list[float]] = {c: [] for c in grid}
    all_idx = np.arange(ds.n_rows)
    for fold in folds:
        train = np.setdiff1d(all_idx, fold)
        tr_ds, tr_t = ds.take(train), target.take(train)
        te_ds, te_t = ds.take(fold), target.take(fold)
        cache = TestCache()
        for a, k in grid:
            out = ses_run(tr_ds, tr_t, SesConfig(a, k, test, cfg.workers), cache)
            perf = fit_and_score(task, tr_ds, tr_t, te_ds, te_t, out.selected_vars)
            scores[(a, k)].append(-perf if task == "regression" else perf)
    best = max(grid, key=lambda c: (float(np.mean(scores[c])), -c[0], -c[1]))
    return CvResult(task, grid, scores, best, float(np.mean(scores[best])), cfg.seed,
                    [f.tolist() for f in folds])
