"""Synthetic data with planted duplicate predictors, and the repeated-split
protocol that checks whether equivalent signatures predict equally well."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import Dataset, Target, check_paired
from .modelsel import CvConfig, cv_ses, fit_and_score, make_stratified_folds, resolve_task
from .ses import SesConfig, signature_at, ses_run

# 0-based column indices; column names are 1-based (X1 .. Xp)
DEFAULT_COEFFICIENTS = {9: 3.0, 199: 2.0, 19: 3.0}
DEFAULT_DUPLICATES = {14: 9, 249: 199, 229: 199}


@dataclass(frozen=True)
class SyntheticSpec:
    n_rows: int = 1000
    n_cols: int = 300
    coefficients: dict = field(default_factory=lambda: dict(DEFAULT_COEFFICIENTS))
    duplicates: dict = field(default_factory=lambda: dict(DEFAULT_DUPLICATES))
    predictor_low: float = 1.0
    predictor_high: float = 100.0
    noise_high: float = 10.0
    seed: int = 0

    def __post_init__(self):
        for j in list(self.coefficients) + list(self.duplicates) + list(self.duplicates.values()):
            if not 0 <= int(j) < self.n_cols:
                raise ValueError(f"column {j} outside 0..{self.n_cols - 1}")
        for copy, source in self.duplicates.items():
            if copy == source:
                raise ValueError(f"column {copy} duplicates itself")
            if copy in self.duplicates.values():
                raise ValueError(f"column {copy} is both a copy and a source")

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        d = dict(d)
        for key in ("coefficients", "duplicates"):
            if key in d:
                d[key] = {int(k): (float(v) if key == "coefficients" else int(v)) for k, v in d[key].items()}
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["coefficients"] = {str(k): v for k, v in self.coefficients.items()}
        d["duplicates"] = {str(k): v for k, v in self.duplicates.items()}
        return d


def generate_synthetic(spec: SyntheticSpec | None = None) -> tuple[Dataset, Target]:
    """Uniform predictors, a linear target with uniform noise, then exact
    column copies overwriting the duplicate slots (after the target is built,
    so copies carry no signal of their own)."""
    spec = spec or SyntheticSpec()
    rng = np.random.default_rng(spec.seed)
    X = rng.uniform(spec.predictor_low, spec.predictor_high, size=(spec.n_rows, spec.n_cols))
    y = np.zeros(spec.n_rows)
    for j, w in spec.coefficients.items():
        y += w * X[:, j]
    y += rng.uniform(0.0, spec.noise_high, size=spec.n_rows)
    for copy, source in spec.duplicates.items():
        X[:, copy] = X[:, source]
    return Dataset(X), Target.continuous(y, "target")


def coefficient_of_variation(xs) -> float:
    """Sample standard deviation over |mean|; NaN when undefined
    (fewer than two values or zero mean)."""
    xs = np.asarray(xs, dtype=float)
    if xs.size < 2:
        return math.nan
    mean = float(xs.mean())
    if mean == 0.0:
        return math.nan
    return float(xs.std(ddof=1)) / abs(mean)


@dataclass
class RepetitionResult:
    rep: int
    signature_count: int
    performances: list[float]
    cv_of_performances: float
    alpha: float
    max_k: int
    n_selected: int
    subsampled: bool = False

    @property
    def cv_defined(self) -> bool:
        return not math.isnan(self.cv_of_performances)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cv_of_performances"] = None if not self.cv_defined else self.cv_of_performances
        return d


@dataclass
class ProtocolResult:
    task: str
    seed: int
    repetitions: list[RepetitionResult]
    cv_quantiles: dict[str, float | None]
    multiplicity: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "seed": self.seed,
            "repetitions": [r.to_dict() for r in self.repetitions],
            "cv_quantiles": self.cv_quantiles,
            "signature_multiplicity": self.multiplicity,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _pick_signatures(queues, total: int, limit: int, rng) -> tuple[list[list[int]], bool]:
    if total <= limit:
        return [list(s) for s in itertools.product(*queues)], False
    picks = np.sort(rng.choice(total, size=limit, replace=False))
    return [signature_at(queues, int(i)) for i in picks], True


def multiplicity_histogram(counts) -> dict[str, int]:
    hist = {str(j): 0 for j in range(1, 10)}
    hist["10+"] = 0
    for c in counts:
        hist["10+" if c >= 10 else str(c)] += 1
    return hist


def run_protocol(ds: Dataset, target: Target, reps: int = 50, seed: int = 0,
                 alphas=(0.01, 0.05, 0.1), max_ks=(3, 5), kfolds: int = 10,
                 signature_limit: int = 1000, test="auto", workers: int = 1) -> ProtocolResult:
    """Repeated 50/50 evaluation of SES signatures.

    Each repetition splits the data (stratified for binary targets), tunes
    (threshold, max_k) by cross-validation on the training half, reruns SES
    on the whole training half, then fits one model per signature and scores
    it on the held-out half (MSE or AUC). Beyond ``signature_limit``
    signatures a uniform random subset is scored.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    check_paired(ds, target)
    task = resolve_task(None, target)
    children = np.random.SeedSequence(seed).spawn(reps)
    results = []
    for rep, child in enumerate(children):
        split_seed, cv_seed, sub_seed = child.generate_state(3)
        holdout, train = make_stratified_folds(target, 2, int(split_seed))
        tr_ds, tr_t = ds.take(train), target.take(train)
        ho_ds, ho_t = ds.take(holdout), target.take(holdout)
        cv = cv_ses(tr_ds, tr_t, CvConfig(kfolds=kfolds, alphas=tuple(alphas), max_ks=tuple(max_ks),
                                          task=task, seed=int(cv_seed), workers=workers), test)
        a, k = cv.best_configuration
        out = ses_run(tr_ds, tr_t, SesConfig(a, k, test, workers))
        sigs, subsampled = _pick_signatures(out.queues, out.signature_count, signature_limit,
                                            np.random.default_rng(int(sub_seed)))
        perfs = [fit_and_score(task, tr_ds, tr_t, ho_ds, ho_t, sig) for sig in sigs]
        results.append(RepetitionResult(rep, out.signature_count, perfs,
                                        coefficient_of_variation(perfs), a, k,
                                        len(out.selected_vars), subsampled))
    cvs = np.array([r.cv_of_performances for r in results if r.cv_defined])
    if cvs.size:
        q = np.quantile(cvs, [0.025, 0.5, 0.975])
        quantiles = {"2.5%": float(q[0]), "50%": float(q[1]), "97.5%": float(q[2])}
    else:
        quantiles = {"2.5%": None, "50%": None, "97.5%": None}
    return ProtocolResult(task, seed, results, quantiles,
                          multiplicity_histogram(r.signature_count for r in results))
