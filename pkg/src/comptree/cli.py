"""Command-line interface: ``comptree {simulate,fit,evaluate,bound}``.

Exit codes: 0 success, 2 invalid flags, 3 I/O failure, 4 data validation,
5 node-name mismatch between estimate and truth.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import formats
from .edge_model import EmConfig
from .errors import CompTreeError
from .metrics import CSV_FIELDS, compare_trees
from .risk import build_risk_table
from .selection import LOO, CvConfig, cross_validate, solve
from .synthetic import GeneratorSpec, simulate
from .theory import BoundInputs, recovery_bound, sample_complexity

log = logging.getLogger("comptree")

EXIT_FLAGS, EXIT_IO, EXIT_DATA, EXIT_NAMES = 2, 3, 4, 5


class UsageError(Exception):
    pass


def parse_structure(text: str) -> tuple[str, int]:
    if text in ("chain", "star"):
        return text, 1
    if text in ("random", "random_tree", "random-tree"):
        return "random_tree", 1
    if text.startswith("multi-root=") or text.startswith("multi_root="):
        try:
            return "multi_root", int(text.split("=", 1)[1])
        except ValueError:
            pass
    raise UsageError(f"bad --structure {text!r}; use chain, star, multi-root=R or random")


def parse_dims(text: str, p: int, seed: int = 0) -> tuple:
    """``5`` (all nodes), ``5,6,7`` (one per node) or ``5:30`` (uniform integers, seeded)."""
    try:
        if ":" in text:
            lo, hi = (int(v) for v in text.split(":"))
            if lo > hi:
                raise ValueError
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2,)))
            return tuple(int(d) for d in rng.integers(lo, hi + 1, size=p))
        dims = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"bad --dims {text!r}") from None
    if len(dims) == 1:
        dims = dims * p
    if len(dims) != p:
        raise UsageError(f"--dims lists {len(dims)} values for p={p}")
    return dims


def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise UsageError(f"bad number list {text!r}") from None


def cmd_simulate(args) -> int:
    structure, n_roots = parse_structure(args.structure)
    try:
        spec = GeneratorSpec(
            p=args.p,
            dims=parse_dims(args.dims, args.p, args.seed),
            structure=structure,
            n=args.n,
            concentration=args.concentration,
            zero_inflation=args.zero_inflation,
            omega1_range=_floats(args.omega1_range),
            seed=args.seed,
            n_roots=n_roots,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    truth, samples = simulate(spec)
    names = [f"node_{j + 1}" for j in range(spec.p)]
    out = Path(args.out)
    formats.write_dataset(out, samples, names)
    formats.dump_json(formats.truth_to_json(truth, names, spec), out / "truth.json")
    log.info("wrote %d nodes x %d rows to %s", spec.p, spec.n, out)
    return 0


def _em_config(args) -> EmConfig:
    try:
        return EmConfig(max_iters=args.max_iters, restarts=args.restarts, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_fit(args) -> int:
    if (args.alpha is None) == (args.cv is None):
        raise UsageError("give exactly one of --alpha or --cv")
    if args.alpha is not None and args.alpha < 0:
        raise UsageError("--alpha must be >= 0")
    em = _em_config(args)
    names, samples = formats.read_dataset(args.data)
    out = Path(args.out)

    if args.alpha is not None:
        table = build_risk_table(samples, em, threads=args.threads)
        alpha = args.alpha
        tree = solve(table, alpha)
    else:
        k = LOO if args.cv.lower() == LOO else _int(args.cv, "--cv")
        grid = _floats(args.alpha_grid) if args.alpha_grid else None
        try:
            cv = CvConfig(k_folds=k, alpha_grid=grid, fold_seed=args.seed)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        report = cross_validate(samples, cv, em, threads=args.threads)
        table, alpha, tree = report.final_params, report.selected_alpha, report.final_tree
        report_path = Path(args.cv_report) if args.cv_report else out.with_name("cv_report.json")
        formats.dump_json(formats.cv_report_json(report, names, k, args.seed), report_path)

    formats.dump_json(formats.tree_artifact(tree, table, names, alpha), out)
    if args.risk_table:
        formats.dump_json(formats.risk_table_json(table, names), args.risk_table)
    log.info("selected %d edges at alpha=%r", len(tree.edges), alpha)
    return 0


def _int(text: str, flag: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise UsageError(f"{flag} expects an integer or 'loo', got {text!r}") from None


def cmd_evaluate(args) -> int:
    est = formats.load_json(args.estimated)
    ref = formats.load_json(args.truth)
    if list(est["node_names"]) != list(ref["node_names"]):
        log.error("node names differ: %s vs %s", est["node_names"], ref["node_names"])
        return EXIT_NAMES
    names = ref["node_names"]
    metrics = compare_trees(
        formats.tree_from_names(names, est["parents"]), formats.tree_from_names(names, ref["parents"])
    )
    out = Path(args.out)
    formats.dump_json(metrics.to_dict(), out)
    csv_path = out.with_suffix(".csv")
    csv_path.write_text(",".join(CSV_FIELDS) + "\n" + metrics.csv_row() + "\n", encoding="utf-8", newline="\n")
    print(metrics.csv_row())
    return 0


def cmd_bound(args) -> int:
    try:
        base = BoundInputs.from_dims(args.n, parse_dims(args.dims, args.p), args.gamma, args.epsilon0, args.diameter)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(f"bound={recovery_bound(base)!r}")
    if args.delta is not None:
        if not 0.0 < args.delta <= 1.0:
            raise UsageError("--delta must lie in (0, 1]")
        print(f"sample_complexity={sample_complexity(base, args.delta)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="comptree", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a synthetic dataset and its ground truth")
    s.add_argument("--structure", required=True)
    s.add_argument("--p", type=int, required=True)
    s.add_argument("--dims", default="5")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--concentration", type=float, default=50.0)
    s.add_argument("--zero-inflation", type=float, default=0.0)
    s.add_argument("--omega1-range", default="0.6,0.9")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="learn a forest at a fixed alpha or by cross-validation")
    f.add_argument("--data", required=True)
    f.add_argument("--alpha", type=float)
    f.add_argument("--cv", help="number of folds, or 'loo'")
    f.add_argument("--alpha-grid")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out", required=True)
    f.add_argument("--cv-report", help="default: cv_report.json next to --out")
    f.add_argument("--risk-table", help="also write the pairwise risk table here")
    f.add_argument("--threads", type=int)
    f.add_argument("--restarts", type=int, default=EmConfig.restarts)
    f.add_argument("--max-iters", type=int, default=EmConfig.max_iters)
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("evaluate", help="compare an estimated forest with the truth")
    e.add_argument("--estimated", required=True)
    e.add_argument("--truth", required=True)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_evaluate)

    b = sub.add_parser("bound", help="finite-sample recovery bound")
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--p", type=int, required=True)
    b.add_argument("--gamma", type=float, required=True)
    b.add_argument("--epsilon0", type=float, required=True)
    b.add_argument("--diameter", type=float, required=True)
    b.add_argument("--dims", required=True)
    b.add_argument("--delta", type=float)
    b.set_defaults(func=cmd_bound)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        ap.print_usage(sys.stderr)
        print(f"comptree: error: {exc}", file=sys.stderr)
        return EXIT_FLAGS
    except formats.DataValidationError as exc:
        print(f"comptree: invalid data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"comptree: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (KeyError, ValueError, CompTreeError) as exc:
        print(f"comptree: invalid input: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
