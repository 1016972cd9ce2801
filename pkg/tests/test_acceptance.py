"""Acceptance criteria 1-10.

Each test records a one-line PASS/FAIL verdict, printed immediately and
again in the terminal summary under "acceptance criteria".
"""

import json
import time

import numpy as np
import pytest
from conftest import ACCEPTANCE_LINES
from oracles import brute_force_ses, fisher_p_oracle, g2_by_hand, partial_corr_by_inversion, random_sem_instance

from equivsig.bench import SyntheticSpec, generate_synthetic, run_protocol
from equivsig.citests import FISHER, bind, fisher_test, g2_statistic, g2_test, logistic_lrt_test
from equivsig.cli import main
from equivsig.data import Dataset, Target, categorical
from equivsig.modelsel import CvConfig, cv_ses
from equivsig.ses import SesConfig, TestCache, mmpc, ses, ses_run

SEEDS = range(20)
EXPECTED_SELECTED = [9, 19, 199]  # X10, X20, X200
EXPECTED_QUEUES = [[9, 14], [19], [199, 249, 229]]


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[n] = line
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def seeded_runs():
    runs = {}
    for s in SEEDS:
        ds, t = generate_synthetic(SyntheticSpec(seed=s))
        start = time.perf_counter()
        out = ses(ds, t, threshold=0.2, max_k=5, test="fisher")
        runs[s] = (ds, t, out, time.perf_counter() - start)
    return runs


def test_criterion_01_synthetic_recovery(seeded_runs):
    ok_seeds, slowest = [], 0.0
    for s, (_, _, out, secs) in seeded_runs.items():
        slowest = max(slowest, secs)
        if (out.selected_vars == EXPECTED_SELECTED
                and sorted(len(q) for q in out.queues) == [1, 2, 3]
                and [sorted(q) for q in out.queues] == [sorted(q) for q in EXPECTED_QUEUES]
                and out.signature_count == 6):
            ok_seeds.append(s)
    missed = [s for s in SEEDS if s not in ok_seeds]
    record(1, len(ok_seeds) >= 18 and slowest < 5.0,
           f"{len(ok_seeds)}/20 seeds exact (need >= 18; missed seeds {missed}), slowest run {slowest:.2f} s (< 5 s)")


def test_criterion_02_cache_reuse(synthetic):
    ds, t = synthetic
    cfg = SesConfig(0.2, 5, "fisher")
    cold = ses_run(ds, t, cfg, TestCache())
    warm = ses_run(ds, t, cfg, cold.cache)
    record(2, warm.cache_misses == 0 and warm.same_result(cold),
           f"warm run: {warm.cache_misses} fresh evaluations, {warm.cache_hits} hits, "
           f"identical report: {warm.same_result(cold)}")


def test_criterion_03_recurrence_vs_brute_force():
    rng = np.random.default_rng(3)
    mismatches, worst = 0, 0.0
    for i in range(100):
        X, y = random_sem_instance(rng)
        ds, t = Dataset(X), Target.continuous(y)
        a = float(rng.choice([0.01, 0.05, 0.1, 0.2]))
        k = int(rng.integers(1, 4))
        out = ses(ds, t, a, k, test="fisher")
        sel, _, maxp = brute_force_ses(bind(FISHER, ds, t), ds.n_cols, a, k)
        diff = float(np.max(np.abs(out.pvalues - maxp)))
        worst = max(worst, diff)
        if out.selected_vars != sel or diff > 1e-12:
            mismatches += 1
    record(3, mismatches == 0, f"{100 - mismatches}/100 instances agree; max |maxp diff| {worst:.1e} (<= 1e-12)")


def test_criterion_04_fisher_oracle():
    worst = 0.0
    for seed in range(100):
        r = np.random.default_rng(seed)
        k = int(r.integers(0, 4))
        data = r.normal(size=(50, 1 + k)) + r.normal(size=(50, 1)) * r.uniform(0, 1)
        t = 0.4 * data[:, 0] + r.normal(size=50)
        got = fisher_test(Dataset(data), 0, t, list(range(1, k + 1))).p_value
        _, want = fisher_p_oracle(partial_corr_by_inversion(np.column_stack([data[:, 0], t, data[:, 1:]])), 50, k)
        worst = max(worst, abs(got - want))
    record(4, worst <= 1e-10, f"max |p - oracle| over 100 instances {worst:.1e} (<= 1e-10)")


def _table_ds(table):
    table = np.asarray(table)
    x, y = np.nonzero(np.ones_like(table))
    counts = table[x, y]
    xs, ys = np.repeat(x, counts), np.repeat(y, counts)
    return Dataset(xs[:, None].astype(float), kinds=[categorical(table.shape[0])]), Target.binary(ys)


def test_criterion_05_g2():
    ds, t = _table_ds([[25, 25], [25, 25]])
    null = g2_test(ds, 0, t)
    ds, t = _table_ds([[50, 0], [0, 50]])
    strong = g2_test(ds, 0, t)
    ok = null.statistic == 0.0 and null.p_value == 1.0
    ok &= abs(strong.statistic - 200 * np.log(2)) <= 1e-9 and strong.p_value < 1e-12
    rng = np.random.default_rng(5)
    dof_ok = stat_ok = True
    for shape in [(2, 2, 2), (3, 3, 2), (6, 2, 3), (4, 3, 4)]:
        table = rng.integers(1, 20, size=shape)
        stat, dof = g2_statistic(table)
        dof_ok &= dof == (shape[1] - 1) * (shape[2] - 1) * shape[0]
        stat_ok &= abs(stat - g2_by_hand(table)) <= 1e-9 * max(1.0, stat)
    record(5, bool(ok and dof_ok and stat_ok),
           f"G2 null {null.statistic:g} p={null.p_value:g}; perfect G2={strong.statistic:.12f} "
           f"p={strong.p_value:.1e}; 3-way dof ok={dof_ok}, statistic ok={stat_ok}")


def test_criterion_06_calibration():
    rejections = 0
    for seed in range(1000):
        r = np.random.default_rng(seed)
        d = r.normal(size=(200, 3))
        rejections += fisher_test(Dataset(d[:, :2]), 0, d[:, 2], [1]).p_value < 0.05
    ps = []
    for seed in range(200):
        r = np.random.default_rng(10_000 + seed)
        x, w = r.normal(size=(2, 200))
        y = (r.random(200) < 1 / (1 + np.exp(-w))).astype(float)
        ps.append(logistic_lrt_test(Dataset(np.column_stack([x, w])), 0, Target.binary(y), [1]).p_value)
    rate, med = rejections / 1000, float(np.median(ps))
    record(6, 0.03 <= rate <= 0.07 and 0.35 <= med <= 0.65,
           f"Fisher null rejection rate {rate:.3f} (in [0.03, 0.07]); logistic null median p {med:.3f} "
           f"(in [0.35, 0.65])")


def test_criterion_07_signature_equivalence(synthetic):
    ds, t = synthetic
    res = run_protocol(ds, t, reps=50, seed=0)
    med = res.cv_quantiles["50%"]
    ok = med is not None and med < 0.05
    record(7, ok, f"median CV of per-signature holdout MSE {med!r} (< 0.05); "
                  f"multiplicity {res.multiplicity}")


def test_criterion_08_cv_plausibility(synthetic):
    ds, t = synthetic
    res = cv_ses(ds, t, CvConfig(seed=0))
    record(8, -10 <= res.best_performance <= -7,
           f"best mean negated MSE {res.best_performance:.6f} at {res.best_configuration} (in [-10, -7])")


def _strip_runtime(doc):
    doc.pop("runtime", None)
    return doc


def test_criterion_09_determinism(tmp_path, capsys):
    data = tmp_path / "synth.csv"
    assert main(["synth", "--out", str(data), "--seed", "1"]) == 0
    again = tmp_path / "synth2.csv"
    assert main(["synth", "--out", str(again), "--seed", "1"]) == 0
    same = data.read_bytes() == again.read_bytes()
    reports = {}
    for w in (1, 4):
        for rep in ("a", "b"):
            sel, cv, bench = (tmp_path / f"{name}-{w}-{rep}.json" for name in ("sel", "cv", "bench"))
            base = ["--data", str(data), "--target", "target", "--workers", str(w)]
            assert main(["select", *base, "--alpha", "0.2", "--max-k", "5", "--out", str(sel)]) == 0
            assert main(["cv", *base, "--kfolds", "5", "--seed", "3", "--out", str(cv)]) == 0
            assert main(["bench", "--reps", "2", "--seed", "4", "--kfolds", "3", "--alphas", "0.05",
                         "--max-ks", "3", "--workers", str(w), "--out", str(bench)]) == 0
            reports[(w, rep)] = [_strip_runtime(json.loads(p.read_text())) for p in (sel, cv, bench)]
    capsys.readouterr()
    repro = reports[(1, "a")] == reports[(1, "b")] and reports[(4, "a")] == reports[(4, "b")]
    parallel = reports[(1, "a")] == reports[(4, "a")]
    record(9, same and repro and parallel,
           f"synth byte-identical {same}; select/cv/bench reports reproducible {repro}; "
           f"workers 1 vs 4 identical {parallel}")


def test_criterion_10_mmpc_consistency(seeded_runs):
    agree = 0
    for s, (ds, t, out, _) in seeded_runs.items():
        m = mmpc(ds, t, threshold=0.2, max_k=5, test="fisher")
        if m.selected_vars == [q[0] for q in out.queues] and all(len(q) == 1 for q in m.queues):
            agree += 1
    record(10, agree == 20, f"{agree}/20 seeds: MMPC selection equals SES queue owners, singleton queues")
