"""Independent reference computations used as test oracles.

Nothing here calls into the code paths being checked, except the test
functions handed to ``brute_force_ses``.
"""

import itertools
import math

import mpmath
import numpy as np


def partial_corr_by_inversion(columns: np.ndarray, i: int = 0, j: int = 1) -> float:
    """Partial correlation of columns i and j given all the others, read
    off the inverse correlation matrix: -w_ij / sqrt(w_ii w_jj)."""
    omega = np.linalg.inv(np.corrcoef(columns, rowvar=False))
    return -omega[i, j] / math.sqrt(omega[i, i] * omega[j, j])


def fisher_p_oracle(r: float, n: int, k: int) -> tuple[float, float]:
    """Fisher z statistic and two-sided normal p-value, in mpmath."""
    mpmath.mp.dps = 40
    r = min(1 - 1e-12, max(-1 + 1e-12, r))
    z = mpmath.sqrt(n - k - 3) * mpmath.atanh(r)
    p = mpmath.erfc(abs(z) / mpmath.sqrt(2))
    return float(z), float(p)


def f_sf_oracle(f: float, d1: float, d2: float) -> float:
    """Upper tail of F(d1, d2) through the regularized incomplete beta."""
    mpmath.mp.dps = 40
    x = mpmath.mpf(d2) / (d2 + d1 * mpmath.mpf(f))
    return float(mpmath.betainc(d2 / 2, d1 / 2, 0, x, regularized=True))


def chi2_sf_oracle(x: float, dof: int) -> float:
    mpmath.mp.dps = 40
    return float(mpmath.gammainc(mpmath.mpf(dof) / 2, mpmath.mpf(x) / 2, mpmath.inf, regularized=True))


def g2_by_hand(table) -> float:
    """G^2 summed cell by cell with explicit expected counts."""
    table = np.asarray(table, dtype=float)
    if table.ndim == 2:
        table = table[None]
    total = 0.0
    for sl in table:
        n = sl.sum()
        for a in range(sl.shape[0]):
            for b in range(sl.shape[1]):
                o = sl[a, b]
                if o > 0:
                    e = sl[a].sum() * sl[:, b].sum() / n
                    total += o * math.log(o / e)
    return 2 * total


def brute_force_ses(test, n_vars, a, k, equivalences=True):
    """SES with every conditioning subset of the current selection re-tested
    at every step (no incremental bookkeeping, no cache).

    ``test(x, cond)`` must return an object with ``p_value`` and ``statistic``.
    Subsets are tried by size then lexicographically and the search for a
    witness stops at the first p > a, as in the engine.
    """
    R = list(range(n_vars))
    S = []
    Q = {i: [i] for i in range(n_vars)}
    maxp = [-math.inf] * n_vars
    maxstat = [0.0] * n_vars

    def subsets(pool):
        pool = sorted(pool)
        for size in range(0, min(k, len(pool)) + 1):
            yield from itertools.combinations(pool, size)

    def witness(x):
        for z in subsets(set(S) - {x}):
            res = test(x, z)
            if res.p_value > maxp[x]:
                maxp[x], maxstat[x] = res.p_value, res.statistic
            if res.p_value > a:
                return z
        return None

    def elimination_pass():
        for x in sorted(R + S):
            z = witness(x)
            if z is None:
                continue
            if x in R:
                R.remove(x)
            if x in S:
                S.remove(x)
            if equivalences:
                for y in z:
                    zp = tuple(sorted((set(z) | {x}) - {y}))
                    if test(y, zp).p_value > a:
                        Q[y].extend(Q[x])
                        break

    while R:
        elimination_pass()
        if not R:
            break
        m = min(R, key=lambda x: (maxp[x], -abs(maxstat[x]), x))
        R.remove(m)
        S.append(m)
    elimination_pass()
    sel = sorted(S)
    return sel, [Q[v] for v in sel], np.array(maxp)


def random_sem_instance(rng, n_vars=None, n_rows=None):
    """Small linear-Gaussian data set with a few parents of the target,
    correlated predictors and occasionally an exact duplicate column."""
    p = int(n_vars or rng.integers(4, 13))
    n = int(n_rows or rng.integers(60, 200))
    X = rng.standard_normal((n, p))
    for j in range(1, p):
        if rng.random() < 0.4:
            X[:, j] += rng.normal(0, 1.0) * X[:, rng.integers(0, j)]
    parents = rng.choice(p, size=min(p, int(rng.integers(1, 4))), replace=False)
    t = X[:, parents] @ rng.uniform(0.3, 1.5, parents.size) + rng.standard_normal(n)
    if p >= 3 and rng.random() < 0.3:
        X[:, p - 1] = X[:, parents[0]]
    return X, t
