"""Command-line front end.

Exit codes: 0 success, 1 I/O or data error, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .bench import SyntheticSpec, generate_synthetic, run_protocol
from .citests import ConfigError
from .data import DataError, load_dataset, load_schema, save_dataset
from .modelsel import CvConfig, cv_ses
from .ses import SesConfig, SesOutput, TestCache, enumerate_signatures, run_digest, ses_run

REPORT_SCHEMA_VERSION = 1
WORKERS_ENV = "EQUIVSIG_WORKERS"
TEST_CHOICES = ("auto", "fisher", "spearman", "g2", "linreg", "logistic")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(2)


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return 1
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV}={raw!r} is not an integer") from None


def _write_json(path: str, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _load(args):
    schema = load_schema(args.schema) if args.schema else None
    return load_dataset(args.data, args.target, schema)


def run_report(out: SesOutput, names) -> dict:
    doc = {"schema_version": REPORT_SCHEMA_VERSION, "kind": "ses_run", "column_names": list(names),
           "selected_names": [names[v] for v in out.selected_vars]}
    doc.update(out.to_dict())
    return doc


def read_run_report(path: str) -> tuple[SesOutput, list[str]]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("kind") != "ses_run" or doc.get("schema_version") != REPORT_SCHEMA_VERSION:
        raise DataError(f"{path}: not a version-{REPORT_SCHEMA_VERSION} SES run report")
    return SesOutput.from_dict(doc), doc["column_names"]


def summary_text(out: SesOutput, names) -> str:
    """Plain-text summary in the layout of the R package's ``summary``."""
    sel = [names[v] for v in out.selected_vars]
    lines = [
        "Selected Variables: " + " ".join(sel),
        "",
        "Selected Variables ordered by pvalue: " + " ".join(names[v] for v in out.selected_vars_by_pvalue),
        "",
        "Queues' summary (# of equivalences for each selectedVar):",
    ]
    if sel:
        width = [max(len(s), len(str(len(q)))) for s, q in zip(sel, out.queues)]
        lines.append(" " * 17 + " ".join(s.rjust(w) for s, w in zip(sel, width)))
        lines.append("#of equivalences " + " ".join(str(len(q)).rjust(w) for q, w in zip(out.queues, width)))
    lines += [
        "queues " + " ".join(str(len(q)) for q in out.queues),
        "",
        f"Number of signatures: {out.signature_count}",
        "",
        f"max_k option: {out.max_k}",
        f"threshold option: {out.threshold:g}",
        f"Test: {out.test}",
        f"Cache: {out.cache_hits} hits, {out.cache_misses} misses",
        f"Total Runtime: {out.runtime:.3f} s",
    ]
    return "\n".join(lines)


def cmd_select(args) -> int:
    ds, target = _load(args)
    workers = args.workers if args.workers is not None else _default_workers()
    cfg = SesConfig(args.alpha, args.max_k, args.test, workers, equivalences=not args.mmpc)
    cache = None
    if args.cache and os.path.exists(args.cache):
        from .citests import dispatch_test
        digest = run_digest(ds, target, dispatch_test(target, ds, args.test).name)
        cache = TestCache.load(args.cache, digest)
    audit = [] if args.audit else None
    out = ses_run(ds, target, cfg, cache, audit)
    if args.cache:
        out.cache.save(args.cache)
    if args.audit:
        with open(args.audit, "w", encoding="utf-8") as fh:
            for kind, x, cond, stat, p in audit:
                fh.write(f"{kind}\t{x}\t{','.join(map(str, cond))}\t{stat!r}\t{p!r}\n")
    if args.out:
        _write_json(args.out, run_report(out, ds.names))
    print(summary_text(out, ds.names))
    return 0


def cmd_cv(args) -> int:
    if args.kfolds < 2:
        raise ConfigError(f"--kfolds must be >= 2, got {args.kfolds}")
    ds, target = _load(args)
    workers = args.workers if args.workers is not None else _default_workers()
    cfg = CvConfig(kfolds=args.kfolds, alphas=args.alphas, max_ks=args.max_ks, task=args.task,
                   seed=args.seed, workers=workers)
    res = cv_ses(ds, target, cfg, args.test)
    if args.out:
        doc = {"schema_version": REPORT_SCHEMA_VERSION, "kind": "cv"}
        doc.update(res.to_dict())
        _write_json(args.out, doc)
    a, k = res.best_configuration
    for (ca, ck) in res.grid:
        print(f"alpha={ca:g} max_k={ck}: mean performance {res.mean_performance((ca, ck)):.6f}")
    print(f"best configuration: alpha={a:g} max_k={k}")
    print(f"best performance: {res.best_performance:.6f}")
    return 0


def cmd_signatures(args) -> int:
    if not os.path.exists(args.report):
        raise DataError(f"report not found: {args.report}")
    out, names = read_run_report(args.report)
    sigs, truncated = enumerate_signatures(out, args.limit)
    for sig in sigs:
        print(args.sep.join(names[v] for v in sig))
    if truncated:
        print(f"note: showing {len(sigs)} of {out.signature_count} signatures", file=sys.stderr)
    return 0


def _read_spec(path: str | None) -> SyntheticSpec:
    if not path:
        return SyntheticSpec()
    with open(path, encoding="utf-8") as fh:
        try:
            return SyntheticSpec.from_dict(json.load(fh))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad synthetic spec {path}: {exc}") from None


def cmd_bench(args) -> int:
    if args.reps < 1:
        raise ConfigError("--reps must be >= 1")
    spec = _read_spec(args.spec)
    ds, target = generate_synthetic(spec)
    workers = args.workers if args.workers is not None else _default_workers()
    res = run_protocol(ds, target, reps=args.reps, seed=args.seed, alphas=args.alphas,
                       max_ks=args.max_ks, kfolds=args.kfolds, workers=workers)
    doc = {"schema_version": REPORT_SCHEMA_VERSION, "kind": "protocol", "spec": spec.to_dict()}
    doc.update(res.to_dict())
    if args.out:
        _write_json(args.out, doc)
    q = res.cv_quantiles
    fmt = lambda v: "undefined" if v is None else f"{100 * v:.4f}%"
    print(f"repetitions: {len(res.repetitions)}")
    print("signature multiplicity: " + " ".join(f"{k}:{v}" for k, v in res.multiplicity.items()))
    print(f"CV of signature performances: 2.5% {fmt(q['2.5%'])}  median {fmt(q['50%'])}  "
          f"97.5% {fmt(q['97.5%'])}")
    return 0


def cmd_synth(args) -> int:
    spec = _read_spec(args.spec)
    if args.seed is not None:
        spec = SyntheticSpec.from_dict({**spec.to_dict(), "seed": args.seed})
    ds, target = generate_synthetic(spec)
    save_dataset(ds, target, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="equivsig", description="Statistically equivalent signature feature selection")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def data_args(sp):
        sp.add_argument("--data", required=True, help="comma- or tab-delimited table with header")
        sp.add_argument("--target", required=True, help="target column name")
        sp.add_argument("--schema", help="JSON file mapping column name to continuous|categorical")
        sp.add_argument("--test", default="auto", choices=TEST_CHOICES)
        sp.add_argument("--workers", type=int, default=None,
                        help=f"parallel workers (default ${WORKERS_ENV} or 1)")

    sp = sub.add_parser("select", help="run SES and write a report")
    data_args(sp)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--max-k", type=int, default=3)
    sp.add_argument("--cache", help="test cache file, read if present and rewritten")
    sp.add_argument("--audit", help="write one line per test evaluation")
    sp.add_argument("--mmpc", action="store_true", help="disable equivalence tracking")
    sp.add_argument("--out", help="JSON report path")
    sp.set_defaults(func=cmd_select)

    sp = sub.add_parser("cv", help="cross-validate the (alpha, max_k) grid")
    data_args(sp)
    sp.add_argument("--alphas", type=_float_list, default=(0.01, 0.05, 0.1))
    sp.add_argument("--max-ks", type=_int_list, default=(3, 5))
    sp.add_argument("--kfolds", type=int, default=10)
    sp.add_argument("--task", choices=("R", "C"), default=None)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", help="JSON CV report path")
    sp.set_defaults(func=cmd_cv)

    sp = sub.add_parser("signatures", help="list signatures from a run report")
    sp.add_argument("--report", required=True)
    sp.add_argument("--limit", type=int, default=None)
    sp.add_argument("--sep", default=" ")
    sp.set_defaults(func=cmd_signatures)

    sp = sub.add_parser("bench", help="repeated-split signature equivalence protocol on synthetic data")
    sp.add_argument("--reps", type=int, default=50)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--spec", help="JSON synthetic spec (0-based column indices)")
    sp.add_argument("--alphas", type=_float_list, default=(0.01, 0.05, 0.1))
    sp.add_argument("--max-ks", type=_int_list, default=(3, 5))
    sp.add_argument("--kfolds", type=int, default=10)
    sp.add_argument("--workers", type=int, default=None)
    sp.add_argument("--out", help="JSON protocol report path")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("synth", help="write the synthetic data set as CSV")
    sp.add_argument("--out", required=True)
    sp.add_argument("--spec")
    sp.add_argument("--seed", type=int, default=None)
    sp.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
