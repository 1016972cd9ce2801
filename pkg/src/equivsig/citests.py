"""Conditional independence tests ind(X, T | W).

Every test has the signature ``test(ds, x, t, cond) -> TestResult`` where ``x``
is a column index of ``ds``, ``t`` is the outcome (a :class:`Target` or a plain
vector) and ``cond`` a collection of column indices. Degenerate situations
(too few samples, zero residual variance, perfect separation, nested models
that coincide) produce ``valid=False`` with ``p_value=1``, which the search
reads as independence.

New tests plug in by wrapping a function with the same signature in a
:class:`TestSpec`.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .data import Dataset, Target
from .regress import independent_columns, logistic_fit, ols_fit

R_CLAMP = 1e-12
DEGENERATE_RTOL = 1e-10
G2_MIN_PER_CELL = 5


class ConfigError(ValueError):
    """Incompatible test, target and dataset combination."""


class DegenerateTestError(ArithmeticError):
    """A test statistic is undefined for the given input."""


@dataclass(frozen=True)
class TestKey:
    """Canonical cache key: tested variable plus sorted conditioning set."""

    x: int
    cond: tuple[int, ...] = ()

    __test__ = False  # keep pytest from collecting this

    def __post_init__(self):
        cond = tuple(sorted({int(c) for c in self.cond}))
        if self.x in cond:
            raise ValueError(f"variable {self.x} cannot condition on itself")
        object.__setattr__(self, "x", int(self.x))
        object.__setattr__(self, "cond", cond)


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    dof: float
    valid: bool = True

    __test__ = False

    def __post_init__(self):
        if not self.valid:
            object.__setattr__(self, "p_value", 1.0)
        elif not 0.0 <= self.p_value <= 1.0 or math.isnan(self.p_value):
            object.__setattr__(self, "p_value", min(1.0, max(0.0, float(np.nan_to_num(self.p_value, nan=1.0)))))


def invalid(dof: float = 0.0) -> TestResult:
    return TestResult(0.0, 1.0, float(dof), valid=False)


TestFunction = Callable[[Dataset, int, "Target | np.ndarray", Sequence[int]], TestResult]


@dataclass(frozen=True)
class TestSpec:
    """A named independence test. ``custom`` specs wrap user functions."""

    name: str
    func: TestFunction

    __test__ = False

    def __call__(self, ds, x, t, cond=()) -> TestResult:
        return self.func(ds, x, t, cond)


def _tvalues(t) -> np.ndarray:
    return t.values if isinstance(t, Target) else np.asarray(t, dtype=float)


# --------------------------------------------------------------------------
# partial correlation machinery


def _cond_basis(ds: Dataset, cond: Sequence[int]) -> np.ndarray:
    """Orthonormal basis for span(1, cond columns), dependent columns dropped."""
    n = ds.n_rows
    design = np.empty((n, len(cond) + 1))
    design[:, 0] = 1.0
    if cond:
        design[:, 1:] = ds.values[:, list(cond)]
    kept = independent_columns(design)
    q, _ = np.linalg.qr(design[:, kept])
    return q


def _residual(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    return v - q @ (q.T @ v)


def _flat(resid_ss: float, v: np.ndarray) -> bool:
    """Residual variance negligible next to the variable's own spread
    (always true for a constant variable)."""
    c = v - v.mean()
    spread = float(c @ c)
    return spread <= 1e-28 * float(v @ v) or resid_ss <= DEGENERATE_RTOL * spread


def _resid_corr(rx: np.ndarray, rt: np.ndarray, x: np.ndarray, t: np.ndarray) -> float:
    sx, st = float(rx @ rx), float(rt @ rt)
    if _flat(sx, x) or _flat(st, t):
        raise DegenerateTestError("zero residual variance")
    return float(rx @ rt) / math.sqrt(sx * st)


def partial_correlation(ds: Dataset, x: int, t, cond: Sequence[int] = ()) -> float:
    """Correlation between the residuals of ``x ~ cond`` and ``t ~ cond``.

    Both regressions include an intercept. Raises :class:`DegenerateTestError`
    when either residual vector has (numerically) zero variance.
    """
    cond = [int(c) for c in cond]
    xv = ds.column(x)
    tv = _tvalues(t)
    design = np.column_stack([np.ones(ds.n_rows)] + [ds.column(c) for c in cond])
    rx = xv - design @ ols_fit(design, xv).coefficients
    rt = tv - design @ ols_fit(design, tv).coefficients
    return _resid_corr(rx, rt, xv, tv)


def _fisher_from_r(r: float, n: int, n_cond: int) -> TestResult:
    df = n - n_cond - 3
    r = min(1.0 - R_CLAMP, max(-1.0 + R_CLAMP, r))
    z = math.sqrt(df) * 0.5 * math.log((1.0 + r) / (1.0 - r))
    # 2 * (1 - Phi(|z|)) written via erfc to keep precision in the tail
    p = math.erfc(abs(z) / math.sqrt(2.0))
    return TestResult(z, p, float(df))


def fisher_test(ds: Dataset, x: int, t, cond: Sequence[int] = ()) -> TestResult:
    """Fisher z test on the partial correlation of ``x`` and ``t`` given ``cond``."""
    n, k = ds.n_rows, len(cond)
    if n - k - 3 < 1:
        return invalid()
    try:
        r = partial_correlation(ds, x, t, cond)
    except DegenerateTestError:
        return invalid(n - k - 3)
    return _fisher_from_r(r, n, k)


class FisherEvaluator:
    """Fisher z test bound to one dataset and target.

    Computes the same residual correlation as :func:`fisher_test`, but keeps
    the conditioning-set basis and the target residual for reuse across the
    many candidates tested against one conditioning set.
    """

    def __init__(self, ds: Dataset, t, max_cached: int = 256):
        self.ds = ds
        self.t = _tvalues(t)
        self._bases: dict[tuple[int, ...], tuple[np.ndarray, np.ndarray, float]] = {}
        self._max_cached = max_cached
        self._lock = threading.Lock()

    def _basis(self, cond: tuple[int, ...]):
        with self._lock:
            hit = self._bases.get(cond)
            if hit is None:
                q = _cond_basis(self.ds, cond)
                rt = _residual(q, self.t)
                hit = (q, rt, float(rt @ rt))
                if len(self._bases) >= self._max_cached:
                    self._bases.pop(next(iter(self._bases)))
                self._bases[cond] = hit
            return hit

    def __call__(self, ds: Dataset, x: int, t, cond: Sequence[int] = ()) -> TestResult:
        cond = tuple(cond)
        n, k = self.ds.n_rows, len(cond)
        if n - k - 3 < 1:
            return invalid()
        q, rt, st = self._basis(cond)
        xv = self.ds.column(x)
        rx = _residual(q, xv)
        sx = float(rx @ rx)
        if _flat(sx, xv) or _flat(st, self.t):
            return invalid(n - k - 3)
        return _fisher_from_r(float(rx @ rt) / math.sqrt(sx * st), n, k)


def rank_transform(v: np.ndarray) -> np.ndarray:
    """Mid-ranks (ties share their average rank)."""
    return stats.rankdata(v, method="average")


def spearman_test(ds: Dataset, x: int, t, cond: Sequence[int] = ()) -> TestResult:
    """Fisher z test applied to mid-rank transformed columns."""
    cols = [int(x)] + [int(c) for c in cond]
    ranked = Dataset(np.column_stack([rank_transform(ds.column(c)) for c in cols]),
                     [ds.names[c] for c in cols])
    return fisher_test(ranked, 0, rank_transform(_tvalues(t)), range(1, len(cols)))


# --------------------------------------------------------------------------
# G^2 test on contingency tables


def _levels(ds: Dataset, j: int) -> int:
    kind = ds.kinds[j]
    if kind.is_categorical:
        return kind.level_count
    return int(ds.column(j).max()) + 1


def g2_statistic(table: np.ndarray) -> tuple[float, int]:
    """G^2 and its degrees of freedom for a table of shape (n_slices, |X|, |T|).

    Cells with zero observed count contribute nothing. Each conditioning slice
    contributes (|X|-1)(|T|-1) degrees of freedom unless it is empty.
    """
    table = np.asarray(table, dtype=float)
    if table.ndim == 2:
        table = table[None]
    _, nx, nt = table.shape
    rows = table.sum(axis=2, keepdims=True)
    cols = table.sum(axis=1, keepdims=True)
    tot = table.sum(axis=(1, 2), keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        expected = rows * cols / tot
        terms = np.where(table > 0, table * np.log(table / expected), 0.0)
    g2 = 2.0 * float(terms.sum())
    nonempty = int(np.count_nonzero(tot.ravel() > 0))
    return max(g2, 0.0), (nx - 1) * (nt - 1) * nonempty


def g2_test(ds: Dataset, x: int, t, cond: Sequence[int] = ()) -> TestResult:
    """Likelihood-ratio G^2 test of X and T within each configuration of ``cond``."""
    tv = _tvalues(t).astype(int)
    nt = t.level_count if isinstance(t, Target) and t.level_count else int(tv.max()) + 1
    nx = _levels(ds, x)
    n_slices = 1
    slice_id = np.zeros(ds.n_rows, dtype=np.int64)
    for c in cond:
        lc = _levels(ds, c)
        slice_id = slice_id * lc + ds.column(c).astype(np.int64)
        n_slices *= lc
    n_cells = nx * nt * n_slices
    if ds.n_rows < G2_MIN_PER_CELL * n_cells:
        return invalid()
    flat = (slice_id * nx + ds.column(x).astype(np.int64)) * nt + tv
    table = np.bincount(flat, minlength=n_cells).reshape(n_slices, nx, nt)
    g2, dof = g2_statistic(table)
    if dof <= 0:
        return invalid(dof)
    return TestResult(g2, float(stats.chi2.sf(g2, dof)), float(dof))


# --------------------------------------------------------------------------
# nested-model likelihood ratio tests


def expand_columns(ds: Dataset, cols: Sequence[int]) -> np.ndarray:
    """Design block for ``cols``: continuous as-is, categorical as level-0-reference indicators."""
    blocks = []
    for c in cols:
        kind = ds.kinds[c]
        v = ds.column(c)
        if kind.is_categorical:
            codes = v.astype(int)
            blocks.append((codes[:, None] == np.arange(1, kind.level_count)[None, :]).astype(float))
        else:
            blocks.append(v[:, None])
    if not blocks:
        return np.empty((ds.n_rows, 0))
    return np.hstack(blocks)


def _nested_designs(ds: Dataset, x: int, cond: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    ones = np.ones((ds.n_rows, 1))
    w = expand_columns(ds, cond)
    return np.hstack([ones, w]), np.hstack([ones, expand_columns(ds, [x]), w])


def linreg_lrt_test(ds: Dataset, x: int, t, cond: Sequence[int] = ()) -> TestResult:
    """Partial F test comparing ``t ~ cond`` against ``t ~ x + cond``."""
    tv = _tvalues(t)
    d0, d1 = _nested_designs(ds, x, cond)
    m0, m1 = ols_fit(d0, tv), ols_fit(d1, tv)
    d = m1.rank - m0.rank
    df1 = m1.df_residual
    if d <= 0 or df1 <= 0:
        return invalid(max(d, 0))
    tss = float(((tv - tv.mean()) ** 2).sum())
    if m1.rss <= DEGENERATE_RTOL * tss:
        if m0.rss <= DEGENERATE_RTOL * tss:
            return invalid(d)
        return TestResult(math.inf, 0.0, float(d))
    f = max(m0.rss - m1.rss, 0.0) / d / (m1.rss / df1)
    return TestResult(f, float(stats.f.sf(f, d, df1)), float(d))


def logistic_lrt_test(ds: Dataset, x: int, t, cond: Sequence[int] = ()) -> TestResult:
    """Deviance difference of nested logistic models, chi-square reference."""
    tv = _tvalues(t)
    if np.unique(tv).size < 2:
        return invalid()
    d0, d1 = _nested_designs(ds, x, cond)
    m0, m1 = logistic_fit(d0, tv), logistic_fit(d1, tv)
    dof = m1.rank - m0.rank
    if m0.separated or m1.separated or dof <= 0:
        return invalid(max(dof, 0))
    stat = max(m0.deviance - m1.deviance, 0.0)
    return TestResult(stat, float(stats.chi2.sf(stat, dof)), float(dof))


# --------------------------------------------------------------------------
# registry and automatic selection

FISHER = TestSpec("fisher", fisher_test)
SPEARMAN = TestSpec("spearman", spearman_test)
GSQUARE = TestSpec("g2", g2_test)
LINREG = TestSpec("linreg", linreg_lrt_test)
LOGISTIC = TestSpec("logistic", logistic_lrt_test)

TESTS = {s.name: s for s in (FISHER, SPEARMAN, GSQUARE, LINREG, LOGISTIC)}


def _check_compatible(spec: TestSpec, target: Target, ds: Dataset) -> None:
    name = spec.name
    if name in ("fisher", "spearman"):
        if target.kind != "continuous":
            raise ConfigError(f"{name} test needs a continuous target, got {target.kind}")
        if not ds.all_continuous:
            cats = [ds.names[j] for j, k in enumerate(ds.kinds) if k.is_categorical]
            raise ConfigError(f"{name} test needs continuous predictors; categorical: {cats[:5]}")
    elif name == "g2":
        if not target.is_discrete:
            raise ConfigError("g2 test needs a categorical target")
        if not ds.all_categorical:
            raise ConfigError("g2 test needs all-categorical predictors")
    elif name == "linreg":
        if target.kind != "continuous":
            raise ConfigError("linreg test needs a continuous target")
    elif name == "logistic":
        if target.kind != "binary":
            raise ConfigError("logistic test needs a binary target")


def dispatch_test(target: Target, ds: Dataset, requested=None) -> TestSpec:
    """Resolve ``requested`` (None/"auto", a test name, a TestSpec or a callable).

    Automatic choice: binary target -> logistic; continuous target -> fisher
    when every predictor is continuous, linreg otherwise; categorical target
    over all-categorical data -> g2.
    """
    if requested is None or requested == "auto":
        if target.kind == "binary":
            return LOGISTIC
        if target.kind == "continuous":
            return FISHER if ds.all_continuous else LINREG
        if ds.all_categorical:
            return GSQUARE
        raise ConfigError("no built-in test for a multi-level categorical target with non-categorical predictors")
    if isinstance(requested, TestSpec):
        spec = requested
    elif isinstance(requested, str):
        if requested not in TESTS:
            raise ConfigError(f"unknown test {requested!r}; choose from {sorted(TESTS)} or 'auto'")
        spec = TESTS[requested]
    elif callable(requested):
        return TestSpec("custom", requested)
    else:
        raise ConfigError(f"cannot interpret test {requested!r}")
    _check_compatible(spec, target, ds)
    return spec


def bind(spec: TestSpec, ds: Dataset, target: Target) -> Callable[[int, tuple[int, ...]], TestResult]:
    """Evaluator ``(x, cond) -> TestResult`` closed over one dataset and target."""
    if spec.func is fisher_test:
        fast = FisherEvaluator(ds, target)
        return lambda x, cond: fast(ds, x, target, cond)
    return lambda x, cond: spec.func(ds, x, target, cond)
