"""Statistically equivalent signature (SES) search and its MMPC restriction.

The search keeps, for every variable, the running maximum p-value of its
association with the target over the conditioning sets tried so far. When a
variable Y enters the selected set only conditioning sets that contain Y are
new, so each update evaluates just those (see :func:`update_maxp`).

Determinism rules:

* elimination passes visit variables in ascending index order;
* conditioning sets are tried by increasing size, then lexicographically;
* the first witnessing Y (ascending) receives an eliminated variable's queue;
* max-min ties go to the larger |statistic|, then the smaller index.
"""

from __future__ import annotations

import itertools
import json
import math
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from . import citests
from .citests import ConfigError, TestKey, TestResult, TestSpec
from .data import DataError, Dataset, Target, check_paired

CACHE_FORMAT_VERSION = 1

Evaluator = Callable[[int, tuple[int, ...]], TestResult]


@dataclass(frozen=True)
class SesConfig:
    threshold: float = 0.05
    max_k: int = 3
    test: object = "auto"
    workers: int = 1
    equivalences: bool = True
    signature_cap: int = 1_000_000

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError(f"threshold must lie in (0, 1), got {self.threshold}")
        if int(self.max_k) != self.max_k or self.max_k < 1:
            raise ConfigError(f"max_k must be a positive integer, got {self.max_k}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.signature_cap < 1:
            raise ConfigError("signature_cap must be positive")


class TestCache:
    """Results of independence tests keyed by :class:`TestKey`.

    A cache belongs to one (dataset, target, test) triple, identified by
    ``digest``; attaching it to different data clears it. Insertion is
    thread-safe, and racing inserts of a key store identical values.
    """

    __test__ = False

    def __init__(self, digest: str | None = None):
        self.digest = digest
        self.entries: dict[TestKey, TestResult] = {}
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key: TestKey) -> bool:
        return key in self.entries

    def attach(self, digest: str) -> None:
        if self.digest != digest:
            self.entries.clear()
            self.digest = digest

    def lookup_or_eval(self, key: TestKey, evaluate: Callable[[int, tuple[int, ...]], TestResult]) -> TestResult:
        res = self.entries.get(key)
        if res is not None:
            with self._lock:
                self.hits += 1
            return res
        res = evaluate(key.x, key.cond)
        with self._lock:
            self.misses += 1
            self.entries.setdefault(key, res)
        return res

    def save(self, path: str) -> None:
        doc = {
            "format": "equivsig-test-cache",
            "version": CACHE_FORMAT_VERSION,
            "digest": self.digest,
            "entries": [[k.x, list(k.cond), r.statistic, r.p_value, r.dof, r.valid]
                        for k, r in sorted(self.entries.items(), key=lambda kv: (kv[0].x, kv[0].cond))],
        }
        tmp = f"{path}.tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str, digest: str | None = None) -> "TestCache":
        """Read a cache file. A file written for other data (``digest`` mismatch)
        or by another format version yields an empty cache."""
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if doc.get("version") != CACHE_FORMAT_VERSION or (digest is not None and doc.get("digest") != digest):
            return cls(digest)
        cache = cls(doc.get("digest"))
        for x, cond, stat, p, dof, valid in doc["entries"]:
            cache.entries[TestKey(x, tuple(cond))] = TestResult(stat, p, dof, valid)
        return cache


def run_digest(ds: Dataset, target: Target, test_name: str) -> str:
    import hashlib
    h = hashlib.sha256()
    for part in (ds.digest(), target.digest(), test_name):
        h.update(part.encode())
    return h.hexdigest()


@dataclass
class SesState:
    """Mutable search state.

    ``remaining`` and ``selected`` hold variable indices (``selected`` in
    insertion order); ``maxp``/``maxstat`` the running maximum p-value and
    the statistic of the test that produced it.
    """

    remaining: list[int]
    selected: list[int] = field(default_factory=list)
    queues: dict[int, list[int]] = field(default_factory=dict)
    maxp: np.ndarray = None
    maxstat: np.ndarray = None
    witness: dict[int, tuple[int, ...]] = field(default_factory=dict)

    @classmethod
    def initial(cls, n_vars: int) -> "SesState":
        return cls(remaining=list(range(n_vars)),
                   queues={i: [i] for i in range(n_vars)},
                   maxp=np.full(n_vars, -np.inf),
                   maxstat=np.zeros(n_vars))

    def fold(self, x: int, res: TestResult) -> None:
        if res.p_value > self.maxp[x]:
            self.maxp[x] = res.p_value
            self.maxstat[x] = res.statistic


@dataclass
class SesOutput:
    selected_vars: list[int]
    selected_vars_by_pvalue: list[int]
    queues: list[list[int]]
    pvalues: np.ndarray
    stats: np.ndarray
    signature_count: int
    threshold: float
    max_k: int
    test: str
    equivalences: bool
    runtime: float
    cache_hits: int
    cache_misses: int
    witness: dict[int, list[int]] = field(default_factory=dict)
    cache: TestCache | None = field(default=None, repr=False, compare=False)

    def signatures(self, limit: int | None = None) -> tuple[list[list[int]], bool]:
        return enumerate_signatures(self, limit)

    def to_dict(self) -> dict:
        return {
            "selected_vars": list(self.selected_vars),
            "selected_vars_by_pvalue": list(self.selected_vars_by_pvalue),
            "queues": [list(q) for q in self.queues],
            "pvalues": [float(p) for p in self.pvalues],
            "stats": [float(s) for s in self.stats],
            "signature_count": int(self.signature_count),
            "threshold": float(self.threshold),
            "max_k": int(self.max_k),
            "test": self.test,
            "equivalences": bool(self.equivalences),
            "runtime": float(self.runtime),
            "cache_hits": int(self.cache_hits),
            "cache_misses": int(self.cache_misses),
            "witness": {str(k): list(v) for k, v in sorted(self.witness.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SesOutput":
        return cls(
            selected_vars=[int(v) for v in d["selected_vars"]],
            selected_vars_by_pvalue=[int(v) for v in d["selected_vars_by_pvalue"]],
            queues=[[int(v) for v in q] for q in d["queues"]],
            pvalues=np.array(d["pvalues"], dtype=float),
            stats=np.array(d["stats"], dtype=float),
            signature_count=int(d["signature_count"]),
            threshold=float(d["threshold"]),
            max_k=int(d["max_k"]),
            test=d["test"],
            equivalences=bool(d["equivalences"]),
            runtime=float(d["runtime"]),
            cache_hits=int(d["cache_hits"]),
            cache_misses=int(d["cache_misses"]),
            witness={int(k): [int(v) for v in w] for k, w in d.get("witness", {}).items()},
        )

    def same_result(self, other: "SesOutput") -> bool:
        """Equality ignoring runtime and cache counters."""
        a, b = self.to_dict(), other.to_dict()
        for key in ("runtime", "cache_hits", "cache_misses"):
            a.pop(key), b.pop(key)
        return a == b


def subsets_with(pool: Sequence[int], y: int, max_size: int) -> Iterator[tuple[int, ...]]:
    """Sorted conditioning sets ``Z | {y}`` with ``Z`` drawn from ``pool``
    and ``|Z| <= max_size - 1``, by increasing size then lexicographically."""
    pool = sorted(pool)
    for size in range(0, min(max_size - 1, len(pool)) + 1):
        for combo in itertools.combinations(pool, size):
            yield tuple(sorted(combo + (y,)))


class _Run:
    """One SES execution: evaluator, cache and optional audit log."""

    def __init__(self, evaluate: Evaluator, cache: TestCache, threshold: float, max_k: int,
                 audit: list | None):
        self.evaluate = evaluate
        self.cache = cache
        self.a = threshold
        self.k = max_k
        self.audit = audit

    def test(self, x: int, cond: Sequence[int], kind: str = "search") -> TestResult:
        key = TestKey(x, tuple(cond))
        res = self.cache.lookup_or_eval(key, self.evaluate)
        if self.audit is not None:
            self.audit.append((kind, key.x, key.cond, res.statistic, res.p_value))
        return res


def update_maxp(state: SesState, x: int, y: int, run: _Run) -> tuple[int, ...] | None:
    """Fold in the tests of ``x`` against conditioning sets that contain the
    newly selected ``y``; return the first set giving ``p > a``, if any."""
    if state.maxp[x] > run.a:
        return None
    pool = [s for s in state.selected if s != x and s != y]
    for cond in subsets_with(pool, y, run.k):
        res = run.test(x, cond)
        state.fold(x, res)
        if res.p_value > run.a:
            return cond
    return None


def maxmin_step(state: SesState, threshold: float) -> int | None:
    """Candidate with the smallest running max p-value among those at or below
    the threshold; ties favour larger |statistic|, then smaller index."""
    best, best_key = None, None
    for x in state.remaining:
        p = state.maxp[x]
        if p > threshold:
            continue
        key = (p, -abs(state.maxstat[x]), x)
        if best_key is None or key < best_key:
            best, best_key = x, key
    return best


def parallel_univariate_screen(evaluate: Evaluator, n_vars: int, workers: int = 1,
                               cache: TestCache | None = None) -> list[TestResult]:
    """Marginal tests ``p_{XT}`` for every variable, split across ``workers``
    threads. Results are returned in variable order, so they do not depend on
    the number of workers."""
    if n_vars < 1:
        raise DataError("empty dataset: nothing to screen")
    cache = cache if cache is not None else TestCache()

    def chunk(lo: int, hi: int) -> list[TestResult]:
        return [cache.lookup_or_eval(TestKey(x), evaluate) for x in range(lo, hi)]

    if workers <= 1:
        return chunk(0, n_vars)
    bounds = np.linspace(0, n_vars, min(workers, n_vars) + 1).astype(int)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda b: chunk(*b), zip(bounds[:-1], bounds[1:])))
    return [r for part in parts for r in part]


def _eliminate(state: SesState, x: int, z: tuple[int, ...], run: _Run, equivalences: bool) -> None:
    if x in state.remaining:
        state.remaining.remove(x)
    if x in state.selected:
        state.selected.remove(x)
    state.witness[x] = z
    if not equivalences:
        return
    for y in z:
        z_prime = tuple(sorted((set(z) | {x}) - {y}))
        if run.test(y, z_prime, kind="equivalence").p_value > run.a:
            state.queues[y].extend(state.queues[x])
            break
    # a merged or dropped queue no longer owns anything
    state.queues.pop(x, None)


def _elimination_pass(state: SesState, y: int | None, run: _Run, equivalences: bool) -> None:
    for x in sorted(state.remaining + state.selected):
        if x == y:
            continue
        if y is None:
            witness = () if state.maxp[x] > run.a else None
        else:
            witness = update_maxp(state, x, y, run)
        if witness is not None:
            _eliminate(state, x, witness, run, equivalences)


def ses_run(ds: Dataset, target: Target, cfg: SesConfig | None = None,
            cache: TestCache | None = None, audit: list | None = None) -> SesOutput:
    """Run SES (or MMPC when ``cfg.equivalences`` is False).

    Parameters
    ----------
    ds, target : Dataset, Target
        Predictors and outcome with matching row counts.
    cfg : SesConfig, optional
        Threshold, maximum conditioning size, test and parallelism.
    cache : TestCache, optional
        Reused when it belongs to the same data and test; filled in place.
    audit : list, optional
        Receives one ``(kind, x, cond, statistic, p)`` tuple per test request.
    """
    cfg = cfg or SesConfig()
    check_paired(ds, target)
    if ds.n_cols < 1:
        raise DataError("empty dataset: no predictors")
    target.check_both_classes()
    spec: TestSpec = citests.dispatch_test(target, ds, cfg.test)
    cache = cache if cache is not None else TestCache()
    cache.attach(run_digest(ds, target, spec.name))
    hits0, misses0 = cache.hits, cache.misses

    start = time.perf_counter()
    run = _Run(citests.bind(spec, ds, target), cache, cfg.threshold, int(cfg.max_k), audit)
    state = SesState.initial(ds.n_cols)

    screen = parallel_univariate_screen(run.evaluate, ds.n_cols, cfg.workers, cache)
    for x, res in enumerate(screen):
        if audit is not None:
            audit.append(("search", x, (), res.statistic, res.p_value))
        state.fold(x, res)

    last: int | None = None
    while state.remaining:
        _elimination_pass(state, last, run, cfg.equivalences)
        m = maxmin_step(state, run.a)
        if m is None:
            last = None
            break
        state.remaining.remove(m)
        state.selected.append(m)
        last = m
    if last is not None:
        # one more pass so the final selection is checked against the rest
        _elimination_pass(state, last, run, cfg.equivalences)
    runtime = time.perf_counter() - start

    selected = sorted(state.selected)
    queues = [list(state.queues[v]) for v in selected]
    by_p = sorted(selected, key=lambda v: (state.maxp[v], -abs(state.maxstat[v]), v))
    return SesOutput(
        selected_vars=selected,
        selected_vars_by_pvalue=by_p,
        queues=queues,
        pvalues=state.maxp.copy(),
        stats=state.maxstat.copy(),
        signature_count=math.prod(len(q) for q in queues),
        threshold=cfg.threshold,
        max_k=int(cfg.max_k),
        test=spec.name,
        equivalences=cfg.equivalences,
        runtime=runtime,
        cache_hits=cache.hits - hits0,
        cache_misses=cache.misses - misses0,
        witness={k: list(v) for k, v in state.witness.items()},
        cache=cache,
    )


def ses(ds: Dataset, target: Target, threshold: float = 0.05, max_k: int = 3, test="auto",
        workers: int = 1, cache: TestCache | None = None) -> SesOutput:
    """Keyword-argument shortcut for :func:`ses_run`."""
    return ses_run(ds, target, SesConfig(threshold, max_k, test, workers), cache)


def mmpc(ds: Dataset, target: Target, threshold: float = 0.05, max_k: int = 3, test="auto",
         workers: int = 1, cache: TestCache | None = None) -> SesOutput:
    """SES with equivalence tracking disabled: a single signature."""
    return ses_run(ds, target, SesConfig(threshold, max_k, test, workers, equivalences=False), cache)


def enumerate_signatures(out: SesOutput, limit: int | None = None) -> tuple[list[list[int]], bool]:
    """Signatures built by taking one member from each queue.

    Queues are walked in ``selected_vars`` order and members in queue order,
    so the first signature is ``selected_vars`` itself. Returns the list
    (at most ``limit`` long) and whether it was truncated.
    """
    limit = out.signature_count if limit is None else int(limit)
    if limit < 1:
        raise ValueError("limit must be positive")
    sigs = [list(s) for s in itertools.islice(itertools.product(*out.queues), limit)]
    return sigs, out.signature_count > limit


def signature_at(queues: Sequence[Sequence[int]], index: int) -> list[int]:
    """The ``index``-th signature in enumeration order (mixed-radix decoding)."""
    sig = []
    for q in reversed(queues):
        index, r = divmod(index, len(q))
        sig.append(q[r])
    return sig[::-1]
