"""Command-line front door.

Subcommands: gen, train, predict, eval, cv, verify, scaling.  Every
report echoes the run configuration and library version so a run can be
reproduced from its header alone.  Exit codes: 0 success, 1 usage error,
2 data error, 3 numeric failure.

Report files are canonical JSON and contain no wall-clock timings (so
identical runs produce byte-identical files); the scaling subcommand is
the one exception, since timing is its entire payload.  Stdout is free
to show timings.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from contextlib import nullcontext

import numpy as np

from . import data, model_io, proj_boost, rank_boost, rng, verify
from .data import Dataset, SplitSpec
from .errors import DataError, NumericError
from .projection import build_bank

try:
    from importlib.metadata import version as _dist_version

    LIBRARY_VERSION = _dist_version("projboost")
except Exception:  # pragma: no cover - not installed
    LIBRARY_VERSION = "unknown"

# Built-in cross-validation grids over the regularization strength.
RANK_TC_NU_GRID = [10.0 ** e for e in range(-7, -1)]
PROJ_NU_GRID = sorted(
    m * 10.0 ** e for e in range(-8, -2) for m in (1.0, 2.5, 5.0, 7.5)
) + [1e-2]


class UsageError(Exception):
    """Flag combination errors detected after argparse."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; the contract reserves 2 for data errors.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not hasattr(args, "func"):
        print("error: a subcommand is required", file=sys.stderr)
        return 1
    try:
        with _thread_limit(args):
            return int(args.func(args) or 0)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


def _thread_limit(args):
    threads = getattr(args, "threads", None)
    if threads:
        from threadpoolctl import threadpool_limits

        return threadpool_limits(limits=threads)
    return nullcontext()


def build_parser() -> _Parser:
    parser = _Parser(prog="projboost", description=__doc__)
    parser.add_argument("--version", action="version", version=f"projboost {LIBRARY_VERSION}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("gen",
                       help="generate the 4-Gaussian toy dataset")
    p.add_argument("--per-class", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the full dataset here")
    p.add_argument("--train-out", help="write the training part of a split here")
    p.add_argument("--test-out", help="write the held-out part of a split here")
    p.add_argument("--train-fraction", type=float, default=0.75)
    p.add_argument("--format", choices=["csv", "libsvm"],
                   help="override the extension-based format choice")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--algo", required=True,
                   choices=["rank-stagewise", "rank-tc", "proj"])
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True, help="output model path")
    p.add_argument("--n", type=int, required=True, help="projected dimension")
    p.add_argument("--T", type=int, required=True, help="maximum boosting iterations")
    p.add_argument("--nu", type=float, help="regularization (rank-tc and proj)")
    p.add_argument("--loss", choices=["exp", "logistic"], help="rank-tc loss")
    p.add_argument("--mode", choices=["discrete", "real"], help="rank-stagewise stump outputs")
    p.add_argument("--weak", choices=["stump", "wlda"], help="rank weak learner family")
    p.add_argument("--eps-rel", type=float, default=proj_boost.DEFAULT_EPS_REL,
                   help="proj relative-objective stop")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int)
    p.add_argument("--quiet", action="store_true", help="suppress per-iteration lines")
    p.add_argument("--report", help="write a machine-readable report here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict",
                       help="print predicted labels, one per line")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", help="write predictions here instead of stdout")
    p.add_argument("--report", help="write a machine-readable report here")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval",
                       help="error rate and confusion counts on a labeled set")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--report", help="write a machine-readable report here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("cv",
                       help="pick nu by stratified cross-validation")
    p.add_argument("--algo", required=True, choices=["rank-tc", "proj"])
    p.add_argument("--data", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--loss", choices=["exp", "logistic"])
    p.add_argument("--eps-rel", type=float, default=proj_boost.DEFAULT_EPS_REL)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int)
    p.add_argument("--report", help="write a machine-readable report here")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("verify",
                       help="Monte-Carlo checks of the projection guarantees")
    vsub = p.add_subparsers(dest="check", parser_class=_Parser)
    for name, helptext in [
        ("norm", "squared-norm preservation"),
        ("cosine", "cosine preservation for acute pairs"),
        ("margin", "multi-class margin preservation on a one-hot instance"),
        ("single", "single shared coefficient vector form"),
    ]:
        q = vsub.add_parser(name, help=helptext)
        q.add_argument("--eps", type=float, default=0.3)
        q.add_argument("--trials", type=int, default=10000)
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--report", help="write a machine-readable report here")
        if name in ("norm", "cosine"):
            q.add_argument("--n", type=int, required=True, help="projected dimension")
            q.add_argument("--d", type=int, default=20, help="original dimension")
        else:
            q.add_argument("--n", type=int,
                           help="projected dimension (default: the theory threshold)")
            q.add_argument("--k", type=int, default=2)
            q.add_argument("--m", type=int, default=4)
            q.add_argument("--gamma", type=float, default=1.0)
            q.add_argument("--delta", type=float, default=0.1,
                           help="failure level used when --n is derived")
        q.set_defaults(func=cmd_verify, check=name)
    p.set_defaults(func=cmd_verify, check=None)

    p = sub.add_parser("scaling",
                       help="per-iteration timing versus n, m, k")
    p.add_argument("variant", choices=["rank", "proj"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--iters", type=int, default=12)
    p.add_argument("--threads", type=int)
    p.add_argument("--report", help="write a machine-readable report here")
    p.set_defaults(func=cmd_scaling)

    return parser


def _config_record(args, fields) -> dict:
    record = {"command": args.command, "version": LIBRARY_VERSION}
    for name in fields:
        record[name] = getattr(args, name)
    return record


def _print_config(config: dict) -> None:
    for name, value in config.items():
        print(f"config {name} = {value}")


def _emit_report(args, record: dict) -> None:
    path = getattr(args, "report", None)
    if path:
        with open(path, "w", newline="\n") as fh:
            fh.write(model_io.canonical_json(record))


def _dataset_format(path, override) -> str:
    if override:
        return override
    return "csv" if str(path).lower().endswith(".csv") else "libsvm"


def _load_dataset(path, fmt=None) -> Dataset:
    if _dataset_format(path, fmt) == "csv":
        return data.load_csv(path)
    return data.load_libsvm(path)


def _write_dataset(ds: Dataset, path, fmt=None) -> None:
    if _dataset_format(path, fmt) == "csv":
        data.write_csv(ds, path)
    else:
        data.write_libsvm(ds, path)


def cmd_gen(args) -> int:
    config = _config_record(
        args, ["per_class", "seed", "out", "train_out", "test_out", "train_fraction"]
    )
    _print_config(config)
    ds = data.gen_diagonal_gaussians(args.per_class, args.seed)
    written = []
    if args.out:
        _write_dataset(ds, args.out, args.format)
        written.append(args.out)
    if args.train_out or args.test_out:
        if not (args.train_out and args.test_out):
            raise UsageError("--train-out and --test-out must be given together")
        spec = SplitSpec(args.train_fraction, seed=int(rng.derive(args.seed, 1)))
        train, test = data.split(ds, spec)
        _write_dataset(train, args.train_out, args.format)
        _write_dataset(test, args.test_out, args.format)
        written.extend([args.train_out, args.test_out])
        print(f"split {train.m} train / {test.m} test")
    if not written:
        raise UsageError("nothing to write: give --out and/or --train-out/--test-out")
    print(f"generated m={ds.m} k={ds.k} d={ds.d} -> {', '.join(written)}")
    return 0


def _train_flags(args) -> None:
    if args.algo == "rank-stagewise":
        if args.nu is not None:
            raise UsageError("--nu applies to rank-tc and proj only")
        if args.loss is not None:
            raise UsageError("--loss applies to rank-tc only")
    elif args.algo == "rank-tc":
        if args.nu is None:
            raise UsageError("--nu is required for rank-tc")
        if args.mode is not None:
            raise UsageError("--mode applies to rank-stagewise only")
    else:  # proj
        if args.nu is None:
            raise UsageError("--nu is required for proj")
        for flag in ("mode", "loss", "weak"):
            if getattr(args, flag) is not None:
                raise UsageError(f"--{flag} does not apply to proj")
    if args.nu is not None and args.nu <= 0:
        raise UsageError("--nu must be positive")


def _progress_printer(start: float, quiet: bool):
    def progress(rec: dict) -> None:
        if quiet:
            return
        objective = rec.get("objective", rec.get("log_objective"))
        wall = time.perf_counter() - start
        print(
            f"iter {rec['t']:4d}  objective {objective:.6f}"
            f"  train_error {rec['train_error']:.4f}  wall {wall:.2f}s"
        )

    return progress


_TIMING_KEYS = ("select_seconds", "solve_seconds")


def _history_for_report(history) -> list:
    return [{k: v for k, v in rec.items() if k not in _TIMING_KEYS} for rec in history]


def cmd_train(args) -> int:
    _train_flags(args)
    config = _config_record(
        args,
        ["algo", "data", "model", "n", "T", "nu", "loss", "mode", "weak",
         "eps_rel", "seed"],
    )
    _print_config(config)
    ds = _load_dataset(args.data)
    start = time.perf_counter()
    printer = _progress_printer(start, args.quiet)
    history: list = []

    def progress(rec: dict) -> None:
        history.append(rec)
        printer(rec)

    if args.algo == "proj":
        bank = build_bank(ds.k, args.n, args.T, args.seed, "proj")
        model = proj_boost.train_proj(
            ds, bank, args.T, args.nu, eps_rel=args.eps_rel, progress=progress
        )
    else:
        bank = build_bank(ds.k, args.n, ds.d, args.seed, "rank")
        weak = args.weak or "stump"
        weak_seed = int(rng.derive(args.seed, 2))
        if args.algo == "rank-stagewise":
            model = rank_boost.train_stagewise(
                ds, bank, args.T, mode=args.mode or "discrete",
                weak=weak, weak_seed=weak_seed, progress=progress,
            )
        else:
            model = rank_boost.train_totally_corrective(
                ds, bank, args.T, args.nu, loss=args.loss or "exp",
                weak=weak, weak_seed=weak_seed, progress=progress,
            )
    wall = time.perf_counter() - start
    model_io.save_model(model, args.model)
    final = history[-1] if history else {}
    iterations = len(model.stumps)
    print(
        f"trained {args.algo}: {iterations} weak learners,"
        f" train_error {final.get('train_error', float('nan')):.4f},"
        f" wall {wall:.2f}s -> {args.model}"
    )
    _emit_report(args, {
        "config": config,
        "iterations": iterations,
        "history": _history_for_report(history),
    })
    return 0


def _predict_labels(model, features: np.ndarray) -> np.ndarray:
    if isinstance(model, rank_boost.RankModel):
        labels, _ = rank_boost.predict_rank_batch(model, features)
    else:
        labels, _ = proj_boost.predict_proj_batch(model, features)
    return labels


def _to_original(labels: np.ndarray, label_map) -> np.ndarray:
    return np.asarray([label_map[c - 1] for c in labels])


def cmd_predict(args) -> int:
    model = model_io.load_model(args.model)
    ds = _load_dataset(args.data)
    predicted = _to_original(_predict_labels(model, ds.features), model.label_map)
    lines = "\n".join(str(p) for p in predicted) + "\n"
    if args.out:
        with open(args.out, "w", newline="\n") as fh:
            fh.write(lines)
    else:
        sys.stdout.write(lines)
    _emit_report(args, {
        "config": _config_record(args, ["model", "data"]),
        "predictions": [int(p) if isinstance(p, (int, np.integer)) else p
                        for p in predicted],
    })
    return 0


def cmd_eval(args) -> int:
    config = _config_record(args, ["model", "data"])
    _print_config(config)
    model = model_io.load_model(args.model)
    ds = _load_dataset(args.data)
    predicted = _predict_labels(model, ds.features)
    class_of = {orig: idx for idx, orig in enumerate(model.label_map)}
    truth = np.empty(ds.m, dtype=np.int64)
    for i in range(ds.m):
        orig = ds.label_map[ds.labels[i] - 1]
        if orig not in class_of:
            raise DataError(f"test label {orig!r} is unknown to the model")
        truth[i] = class_of[orig]
    confusion = np.zeros((model.k, model.k), dtype=np.int64)
    np.add.at(confusion, (truth, predicted - 1), 1)
    error_rate = float(np.mean(truth != predicted - 1))
    print(f"error_rate {error_rate:.6f}  ({int((truth != predicted - 1).sum())}/{ds.m})")
    header = "  ".join(f"{c!s:>6}" for c in model.label_map)
    print(f"confusion (rows true, cols predicted):        {header}")
    for idx, orig in enumerate(model.label_map):
        row = "  ".join(f"{int(v):6d}" for v in confusion[idx])
        print(f"  true {orig!s:>6}: {row}")
    _emit_report(args, {
        "config": config,
        "error_rate": error_rate,
        "labels": list(model.label_map),
        "confusion": confusion.tolist(),
    })
    return 0


def stratified_folds(labels: np.ndarray, folds: int, seed: int) -> np.ndarray:
    """Deterministic stratified fold index per sample, balanced to +-1."""
    assignment = np.empty(labels.shape[0], dtype=np.int64)
    offset = 0
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        perm = rng.permutation(rng.derive(seed, 100 + int(c)), idx.size)
        shuffled = idx[perm]
        assignment[shuffled] = (offset + np.arange(idx.size)) % folds
        offset += idx.size
    return assignment


def cmd_cv(args) -> int:
    config = _config_record(
        args, ["algo", "data", "n", "T", "folds", "loss", "eps_rel", "seed"]
    )
    _print_config(config)
    ds = _load_dataset(args.data)
    if ds.m < args.folds:
        raise DataError(f"{ds.m} samples cannot fill {args.folds} folds")
    assignment = stratified_folds(ds.labels, args.folds, args.seed)
    grid = RANK_TC_NU_GRID if args.algo == "rank-tc" else PROJ_NU_GRID
    if args.algo == "rank-tc":
        bank = build_bank(ds.k, args.n, ds.d, args.seed, "rank")
    else:
        bank = build_bank(ds.k, args.n, args.T, args.seed, "proj")
    rows = []
    best_nu, best_error = None, None
    for nu in grid:
        fold_errors = []
        for f in range(args.folds):
            train_part = ds.take(np.flatnonzero(assignment != f))
            test_part = ds.take(np.flatnonzero(assignment == f))
            if args.algo == "rank-tc":
                model = rank_boost.train_totally_corrective(
                    train_part, bank, args.T, nu, loss=args.loss or "exp"
                )
            else:
                model = proj_boost.train_proj(
                    train_part, bank, args.T, nu, eps_rel=args.eps_rel
                )
            predicted = _predict_labels(model, test_part.features)
            fold_errors.append(float(np.mean(predicted != test_part.labels)))
        mean_error = float(np.mean(fold_errors))
        rows.append({"nu": nu, "fold_errors": fold_errors, "mean_error": mean_error})
        shown = "  ".join(f"{e:.4f}" for e in fold_errors)
        print(f"nu {nu:10.3e}  folds [{shown}]  mean {mean_error:.4f}")
        if best_error is None or mean_error < best_error:
            best_nu, best_error = nu, mean_error
    print(f"best nu {best_nu:.3e}  mean error {best_error:.4f}")
    _emit_report(args, {
        "config": config,
        "grid": rows,
        "best_nu": best_nu,
        "best_error": best_error,
    })
    return 0


def _default_dimension(args) -> int:
    if args.n is not None:
        return args.n
    if args.check == "margin":
        bound = verify.margin_dimension_threshold(args.eps, args.k, args.m, args.delta)
    else:
        bound = verify.single_vector_dimension_threshold(args.eps, args.k, args.m, args.delta)
    return int(np.ceil(bound)) + 1


def cmd_verify(args) -> int:
    if not args.check:
        raise UsageError("verify needs one of: norm, cosine, margin, single")
    if args.check == "norm":
        report = verify.check_norm_preservation(
            args.n, args.d, args.eps, args.trials, args.seed
        )
    elif args.check == "cosine":
        report = verify.check_cosine_preservation(
            args.n, args.d, args.eps, args.trials, args.seed
        )
    else:
        n = _default_dimension(args)
        W, H, labels = verify.make_one_hot_instance(args.k, args.m)
        if args.check == "margin":
            report = verify.check_margin_preservation(
                W, H, labels, args.gamma, args.eps, n, args.trials, args.seed
            )
        else:
            report = verify.check_single_vector(
                W, H, labels, args.gamma, args.eps, n, args.trials, args.seed
            )
    print(f"config command = verify {args.check}")
    print(f"config version = {LIBRARY_VERSION}")
    print(f"config seed = {args.seed}")
    print(report.text_table())
    slack = report.three_sigma_slack()
    verdict = "yes" if report.empirical_rate >= report.theoretical_bound - slack else "no"
    print(f"three_sigma_slack  {slack:.6f}")
    print(f"rate within slack of bound: {verdict}")
    _emit_report(args, report.to_record())
    return 0


def _toy_subset(per_class: int, k: int, seed: int) -> Dataset:
    ds = data.gen_diagonal_gaussians(per_class, seed)
    if k == ds.k:
        return ds
    keep = np.flatnonzero(ds.labels <= k)
    return Dataset(ds.features[keep], ds.labels[keep], k, tuple(range(1, k + 1)))


def _rank_iteration_seconds(ds: Dataset, bank, iters: int,
                            warmup: int = 3) -> float:
    stamps = []

    def progress(rec):
        stamps.append(time.perf_counter())

    rank_boost.train_stagewise(ds, bank, warmup + iters, progress=progress)
    deltas = np.diff(stamps)[warmup:]
    if deltas.size == 0:
        raise NumericError("too few iterations to time")
    # per-iteration work is constant, so the minimum delta is the least
    # scheduler-contended estimate (same rationale as timeit's min)
    return float(np.min(deltas))


def rank_scaling_table(seed: int, iters: int, rounds: int = 3) -> dict:
    """Per-iteration stagewise times for doubled n, doubled m, and k=2 vs 4."""
    # Sizes sit in the cache-friendly regime on one core; much larger
    # buffers go memory-bound and the doubling ratios drift superlinear.
    base = {"n": 250, "per_class": 50, "k": 4}
    variants = {
        "base": base,
        "double_n": {**base, "n": 500},
        "double_m": {**base, "per_class": 100},
        # halving k at fixed m isolates the k factor in the O(nmk) search
        "half_k": {**base, "k": 2, "per_class": 100},
    }
    setups = {}
    for name, cfg in variants.items():
        ds = _toy_subset(cfg["per_class"], cfg["k"], seed)
        bank = build_bank(ds.k, cfg["n"], ds.d, seed, "rank")
        # A cold heap turns each iteration's multi-MB temporaries into
        # fresh mmap/munmap pairs and the page faults dominate; one
        # throwaway run per size leaves the allocator warm.
        rank_boost.train_stagewise(ds, bank, 3 + iters)
        setups[name] = (cfg, ds, bank)
    # CPU contention on a shared box comes in bursts lasting seconds, long
    # enough to swallow a whole config. Interleaving short rounds and
    # keeping each config's best round makes a burst hit all configs or
    # none of the surviving measurements.
    seconds = {name: math.inf for name in variants}
    for _ in range(rounds):
        for name, (cfg, ds, bank) in setups.items():
            t = _rank_iteration_seconds(ds, bank, iters)
            seconds[name] = min(seconds[name], t)
    entries = {}
    for name, (cfg, ds, bank) in setups.items():
        entries[name] = {
            "n": cfg["n"], "m": ds.m, "k": cfg["k"],
            "seconds_per_iteration": seconds[name],
        }
    b = entries["base"]["seconds_per_iteration"]
    ratios = {
        "n_ratio": entries["double_n"]["seconds_per_iteration"] / b,
        "m_ratio": entries["double_m"]["seconds_per_iteration"] / b,
        "k_ratio": b / entries["half_k"]["seconds_per_iteration"],
    }
    return {"entries": entries, "ratios": ratios}


def proj_phase_table(seed: int, dims=(250, 500, 800), per_class: int = 15,
                     iters: int = 10) -> dict:
    """Select versus solve shares of proj iterations at small m."""
    from scipy.optimize import nnls

    ds = data.gen_diagonal_gaussians(per_class, seed)
    entries = []
    for n in dims:
        bank = build_bank(ds.k, n, iters, seed, "proj")
        history = []
        # eps_rel=0 never triggers the early stop, so all iterations run
        proj_boost.train_proj(ds, bank, iters, nu=1e-6, eps_rel=0.0,
                              progress=history.append)
        select = sum(rec["select_seconds"] for rec in history)
        solve = sum(rec["solve_seconds"] for rec in history)
        entries.append({
            "n": n, "m": ds.m, "k": ds.k, "d": ds.d,
            "iterations": len(history),
            "select_seconds": select,
            "solve_seconds": solve,
            "solver_share": solve / (select + solve),
            "seconds_per_iteration": (select + solve) / len(history),
        })
    X = np.array([[e["n"] * e["m"] * (e["k"] + e["d"]), e["n"] ** 3]
                  for e in entries], dtype=np.float64)
    y = np.array([e["seconds_per_iteration"] for e in entries])
    scale = X.max(axis=0)
    coef, _ = nnls(X / scale, y)
    coef = coef / scale
    return {"entries": entries, "fit": [float(coef[0]), float(coef[1])]}


def cmd_scaling(args) -> int:
    config = _config_record(args, ["variant", "seed", "iters"])
    _print_config(config)
    if args.variant == "rank":
        table = rank_scaling_table(args.seed, args.iters)
        for name, entry in table["entries"].items():
            print(
                f"{name:>9}: n={entry['n']:5d} m={entry['m']:4d} k={entry['k']}"
                f"  {entry['seconds_per_iteration'] * 1e3:8.2f} ms/iter"
            )
        for name, value in table["ratios"].items():
            print(f"{name} = {value:.2f}")
    else:
        table = proj_phase_table(args.seed)
        for entry in table["entries"]:
            print(
                f"n={entry['n']:5d}: select {entry['select_seconds']:.3f}s"
                f" solve {entry['solve_seconds']:.3f}s"
                f" solver_share {entry['solver_share']:.2f}"
            )
        c1, c2 = table["fit"]
        print(f"fit seconds_per_iter ~ {c1:.3e} * n*m*(k+d) + {c2:.3e} * n^3")
    _emit_report(args, {"config": config, **table})
    return 0


if __name__ == "__main__":
    sys.exit(main())
