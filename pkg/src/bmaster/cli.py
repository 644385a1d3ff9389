"""Command-line entry point: ``bmaster {fit,simulate,benchmark,evaluate,pca}``.

Exit codes: 0 success, 2 usage, 3 data error, 4 numeric failure. Errors are
reported on a single stderr line ``error[<kind>]: <reason>``.
"""

import argparse
import hashlib
import json
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import pandas as pd

import bmaster
from bmaster.archive import PosteriorArchive
from bmaster.diagnostics import chain_summary
from bmaster.errors import (DomainError, EmptyResultError, InvalidInputError,
                            SingularSystemError)
from bmaster.evaluation import (classification_metrics, cumulative_canonical_correlation,
                                metrics_table, prediction_errors, split_indices)
from bmaster.model import ConstraintMask, Hyperparameters, RegressionData
from bmaster.pipeline import (AbundanceTable, clr_transform, filter_features, pca_scores,
                              standardize_columns)
from bmaster.sampler import SamplerConfig, run_chain
from bmaster.selection import select_edges, subset_top_predictors
from bmaster.synthesize import (SyntheticDesign, generate_design, generate_from_truth,
                                run_scaling_benchmark)

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# --- helpers ----------------------------------------------------------------

def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def read_matrix(path, what):
    """CSV with header row and ids in the first column; returns a float DataFrame."""
    try:
        df = pd.read_csv(path, index_col=0)
    except FileNotFoundError:
        raise InvalidInputError(f"{what}: file not found: {path}") from None
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise InvalidInputError(f"{what}: cannot parse {path}: {exc}") from None
    df.index = df.index.map(str)
    df.columns = df.columns.map(str)
    bad = [c for c in df.columns if not pd.api.types.is_numeric_dtype(df[c])]
    if bad:
        raise InvalidInputError(f"{what}: non-numeric column {bad[0]!r} in {path}")
    values = df.to_numpy(dtype=float)
    if not np.all(np.isfinite(values)):
        i, j = np.argwhere(~np.isfinite(values))[0]
        raise InvalidInputError(
            f"{what}: missing or non-finite value at row {df.index[i]!r}, column {df.columns[j]!r}")
    if df.shape[0] == 0 or df.shape[1] == 0:
        raise InvalidInputError(f"{what}: {path} is empty")
    return df


def write_matrix(path, M, rows, cols):
    pd.DataFrame(M, index=list(rows), columns=list(cols)).to_csv(path, float_format="%.17g")


def write_manifest(out, command, args, t0, inputs=(), extra=None):
    manifest = {
        "command": command,
        "config": {k: v for k, v in vars(args).items() if k != "func"},
        "seed": getattr(args, "seed", None),
        "inputs": {str(p): _sha256(p) for p in inputs if p},
        "version": bmaster.__version__,
        "wall_time_seconds": time.perf_counter() - t0,
    }
    manifest.update(extra or {})
    Path(out, "manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n")


def _hp(args):
    return Hyperparameters(args.a1, args.b1, args.a2, args.b2)


def _config(args, seed=None):
    return SamplerConfig(iterations=args.iterations, burn_in=args.burnin, thin=args.thin,
                         seed=args.seed if seed is None else seed, hp=_hp(args),
                         workers=args.threads)


def _fit_extra(archive, config):
    try:
        diag = chain_summary(archive)
        diag = {"max_abs_geweke_z": diag["max_abs_geweke"],
                "max_mcse_sd_pct": diag["max_mcse_sd_pct"], "n_checked": len(diag["entries"])}
    except InvalidInputError as exc:
        diag = {"skipped": str(exc)}
    return {"config_hash": archive.config_hash.hex(),
            "sampler": config.as_dict(),
            "clamp_counters": archive.counters,
            "diagnostics": diag,
            "sampler_seconds": archive.elapsed}


# --- fit --------------------------------------------------------------------

def _align(X, Y):
    if X.shape[0] != Y.shape[0]:
        raise InvalidInputError(f"X has {X.shape[0]} samples but Y has {Y.shape[0]}")
    if not X.index.equals(Y.index):
        if set(X.index) != set(Y.index):
            raise InvalidInputError("X and Y sample ids differ")
        Y = Y.loc[X.index]
    return X, Y


def preprocess(X, Y, args):
    """Filtering and CLR per the flags; returns DataFrames on the analysis scale."""
    if args.prevalence is not None or args.min_abundance is not None:
        tx = filter_features(AbundanceTable.from_frame(X), args.prevalence or 0.0,
                             args.min_abundance)
        X = tx.to_frame()
        if args.prevalence is not None:
            if (Y.to_numpy() < 0).any():
                warnings.warn("Y has negative entries; prevalence filter applied to X only")
            else:
                Y = filter_features(AbundanceTable.from_frame(Y, "metabolite"),
                                    args.prevalence).to_frame()
    if args.clr:
        X = pd.DataFrame(clr_transform(AbundanceTable.from_frame(X)), index=X.index,
                         columns=X.columns)
    return X, Y


def _standardize(train, test, enabled):
    if not enabled:
        return train, test
    z, means, sds = standardize_columns(train)
    if test is not None:
        test = (test - means) / np.where(sds > 0, sds, 1.0)
    return z, test


def load_mask(path, x_names, y_names):
    M = read_matrix(path, "mask")
    missing = [n for n in x_names if n not in M.index] + [n for n in y_names if n not in M.columns]
    if missing:
        raise InvalidInputError(f"mask: no entry for {missing[0]!r}")
    return ConstraintMask(M.loc[list(x_names), list(y_names)].to_numpy().astype(int))


def cmd_fit(args):
    t0 = time.perf_counter()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    X, Y = _align(read_matrix(args.x, "X"), read_matrix(args.y, "Y"))
    X, Y = preprocess(X, Y, args)
    x_names, y_names = tuple(X.columns), tuple(Y.columns)
    Xv, Yv = X.to_numpy(), Y.to_numpy()
    Xt = Yt = None
    if args.holdout:
        tr, te = split_indices(len(Xv), 1.0 - args.holdout, args.seed)
        Xv, Xt, Yv, Yt = Xv[tr], Xv[te], Yv[tr], Yv[te]
        test_ids = X.index[te]
    Xv, Xt = _standardize(Xv, Xt, not args.no_standardize_x)
    Yv, Yt = _standardize(Yv, Yt, not args.no_standardize_y)
    data = RegressionData(Xv, Yv, x_names, y_names)
    mask = load_mask(args.mask, x_names, y_names) if args.mask else ConstraintMask.full(data.P, data.Q)
    config = _config(args)
    archive = run_chain(data, mask, config)
    report = select_edges(archive, args.alpha, x_names, y_names)

    archive.save(out / "posterior.bmst")
    if args.export_draws:
        archive.export_csv(out / "draws.csv")
    report.save(out)
    write_matrix(out / "x_used.csv", Xv, range(1, len(Xv) + 1), x_names)
    write_matrix(out / "y_used.csv", Yv, range(1, len(Yv) + 1), y_names)
    if Xt is not None:
        write_matrix(out / "x_test.csv", Xt, test_ids, x_names)
        write_matrix(out / "y_test.csv", Yt, test_ids, y_names)
    write_manifest(out, "fit", args, t0, [args.x, args.y, args.mask],
                   _fit_extra(archive, config) | {"N": data.N, "P": data.P, "Q": data.Q,
                                                  "sparsity": report.sparsity})
    print(f"fit: N={data.N} P={data.P} Q={data.Q} draws={archive.T} "
          f"selected={int(report.selected.sum())} sparsity={report.sparsity:.4f} -> {out}")


# --- simulate ---------------------------------------------------------------

def _replicate_seed(seed, r):
    return int(np.random.SeedSequence([seed, r]).generate_state(1)[0])


def cmd_simulate(args):
    t0 = time.perf_counter()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fixed_X = read_matrix(args.x, "X").to_numpy() if args.x else None
    fixed_B = read_matrix(args.btrue, "Btrue").to_numpy() if args.btrue else None
    if (fixed_X is None) != (fixed_B is None):
        raise UsageError("--x and --btrue must be given together")
    rows = []
    for r in range(args.replicates):
        rseed = _replicate_seed(args.seed, r)
        design = SyntheticDesign(P=args.p, Q=args.q, N=args.n, rho=args.rho, p_row=args.p_row,
                                 p_col=args.p_col, lo=args.lo, hi=args.hi,
                                 noise_sd=args.noise_sd, seed=rseed)
        if fixed_X is not None:
            X, Btrue = fixed_X, fixed_B
            Y = generate_from_truth(X, Btrue, args.noise_sd, rseed)
        else:
            X, Btrue, Y = generate_design(design)
        rdir = out / f"rep_{r + 1:02d}"
        rdir.mkdir(exist_ok=True)
        data = RegressionData(X, Y)
        ids = range(1, X.shape[0] + 1)
        write_matrix(rdir / "X.csv", X, ids, data.x_names)
        write_matrix(rdir / "Y.csv", Y, ids, data.y_names)
        write_matrix(rdir / "Btrue.csv", Btrue, data.x_names, data.y_names)
        config = _config(args, seed=rseed)
        archive = run_chain(data, ConstraintMask.full(data.P, data.Q), config)
        report = select_edges(archive, args.alpha, data.x_names, data.y_names)
        report.save(rdir)
        if args.keep_draws:
            archive.save(rdir / "posterior.bmst")
        m = classification_metrics(Btrue != 0, report.selected, np.abs(report.median))
        rows.append(m)
        write_manifest(rdir, "simulate", args, t0, extra=_fit_extra(archive, config) | {
            "replicate": r + 1, "design": design.as_dict(),
            "truth_source": "file" if fixed_X is not None else "synthetic", "metrics": m})
        print(f"replicate {r + 1}: TPR={m['TPR']:.3f} FPR={m['FPR']:.3f} MCC={m['MCC']:.3f} "
              f"AUC={m['AUC']:.3f} sparsity={m['sparsity']:.3f}")
    table = metrics_table(rows)
    table.to_csv(out / "metrics.csv", index=False, float_format="%.17g")
    write_manifest(out, "simulate", args, t0, [args.x, args.btrue],
                   {"replicates": args.replicates})


# --- benchmark --------------------------------------------------------------

def _int_list(s):
    try:
        return [int(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


def cmd_benchmark(args):
    t0 = time.perf_counter()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    template = SyntheticDesign(rho=args.rho, seed=args.seed)
    config = SamplerConfig(iterations=args.iterations, burn_in=min(100, args.iterations - 1),
                           seed=args.seed)
    if args.n_sweep:
        sizes = [(args.p, args.q, m * args.p) for m in args.multipliers]
    else:
        sizes = args.sizes
    table, slope = run_scaling_benchmark(sizes, template, config, min_seconds=args.min_seconds,
                                         n_sweep=args.n_sweep or len(sizes) < 3)
    summary = pd.DataFrame([{"P": "slope", "seconds": slope}])
    pd.concat([table, summary], ignore_index=True).to_csv(out / "benchmark.csv", index=False)
    write_manifest(out, "benchmark", args, t0, extra={"slope": slope})
    print(table.to_string(index=False))
    print(f"log-log slope: {slope:.3f}")


# --- evaluate ---------------------------------------------------------------

def _read_ids(path):
    return [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]


def cmd_evaluate(args):
    t0 = time.perf_counter()
    fit_dir = Path(args.fit_dir) if args.fit_dir else None
    archive_path = args.archive or (fit_dir / "posterior.bmst" if fit_dir else None)
    if archive_path is None:
        raise UsageError("give --archive or --fit-dir")
    archive = PosteriorArchive.load(archive_path)
    x_path = args.x or (fit_dir / "x_used.csv" if fit_dir else None)
    y_path = args.y or (fit_dir / "y_used.csv" if fit_dir else None)
    Xdf = read_matrix(x_path, "X") if x_path and Path(x_path).exists() else None
    Ydf = read_matrix(y_path, "Y") if y_path and Path(y_path).exists() else None
    x_names = tuple(Xdf.columns) if Xdf is not None else None
    y_names = tuple(Ydf.columns) if Ydf is not None else None
    report = select_edges(archive, args.alpha, x_names, y_names)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    row = {}
    if args.truth:
        truth = read_matrix(args.truth, "truth").to_numpy()
        if truth.shape != report.selected.shape:
            raise InvalidInputError(f"truth shape {truth.shape} != posterior {report.selected.shape}")
        row.update(classification_metrics(truth != 0, report.selected, np.abs(report.median)))
    xt = args.x_test or (fit_dir / "x_test.csv" if fit_dir and (fit_dir / "x_test.csv").exists() else None)
    yt = args.y_test or (fit_dir / "y_test.csv" if fit_dir and (fit_dir / "y_test.csv").exists() else None)
    if xt and yt:
        Xt, Yt = read_matrix(xt, "X test").to_numpy(), read_matrix(yt, "Y test").to_numpy()
        if Xt.shape[1] != archive.P or Yt.shape[1] != archive.Q:
            raise InvalidInputError("test matrices do not match the posterior dimensions")
        row.update(prediction_errors(Xt @ report.median, Yt))
    if args.subset:
        if Xdf is None or Ydf is None:
            raise UsageError("--subset needs --x and --y (or a --fit-dir with x_used/y_used)")
        ids = _read_ids(args.subset)
        ranked = subset_top_predictors(report.selected, ids, args.k, names=report.y_names)
        if not ranked:
            raise EmptyResultError("no selected edge points into the response subset")
        cols = [report.y_names.index(i) for i in ids]
        curve = cumulative_canonical_correlation(Ydf.to_numpy()[:, cols], Xdf.to_numpy(), ranked)
        pd.DataFrame({"k": np.arange(1, len(curve) + 1),
                      "predictor": [report.x_names[p] for p, _, _ in ranked],
                      "fis": [f for _, f, _ in ranked],
                      "canonical_correlation": curve}).to_csv(out / "cca.csv", index=False)
        print(f"cca: {len(curve)} predictors -> {out / 'cca.csv'}")
    if row:
        metrics_table([row]).iloc[:1].to_csv(out / "metrics.csv", index=False, float_format="%.17g")
        print(", ".join(f"{k}={v:.4g}" for k, v in row.items()))
    if not row and not args.subset:
        raise UsageError("nothing to evaluate: give --truth, test data or --subset")
    write_manifest(out, "evaluate", args, t0, [archive_path, args.truth, args.subset],
                   {"config_hash": archive.config_hash.hex()})


# --- pca --------------------------------------------------------------------

def cmd_pca(args):
    t0 = time.perf_counter()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    df = read_matrix(args.input, "table")
    if args.transpose:
        df = df.T
    M = df.to_numpy()
    if args.clr:
        M = clr_transform(AbundanceTable.from_frame(df))
    scores, info = pca_scores(M, args.k)
    write_matrix(out / "scores.csv", scores, df.index, [f"PC{i + 1}" for i in range(args.k)])
    s = info["singular_values"]
    pd.DataFrame({"component": np.arange(1, s.size + 1), "singular_value": s,
                  "variance_ratio": s ** 2 / np.sum(s ** 2)}).to_csv(out / "scree.csv", index=False)
    write_manifest(out, "pca", args, t0, [args.input])


# --- parser -----------------------------------------------------------------

def _add_sampler_flags(p, iterations=1000):
    p.add_argument("--iterations", type=int, default=iterations,
                   help="total Gibbs sweeps, burn-in included (default %(default)s)")
    p.add_argument("--burnin", type=int, default=100, help="sweeps discarded (default 100)")
    p.add_argument("--thin", type=int, default=1, help="keep every k-th draw after burn-in")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads for the coefficient block; output does not depend on it")
    p.add_argument("--alpha", type=float, default=0.05,
                   help="select edges whose equal-tailed 1-alpha interval excludes zero")
    for name, which in (("a1", "shape"), ("b1", "rate"), ("a2", "shape"), ("b2", "rate")):
        block = "entrywise" if name.endswith("1") else "rowwise"
        p.add_argument(f"--{name}", type=float, default=1.0,
                       help=f"Gamma {which} of the {block} shrinkage level prior (default 1)")


def build_parser():
    parser = _Parser(prog="bmaster", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=bmaster.__version__)
    parser.add_argument("--config", help="key=value file; command-line flags take precedence")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit the model and select edges")
    p.add_argument("--x", required=True, help="predictor CSV, samples x features, ids in column 1")
    p.add_argument("--y", required=True, help="response CSV, rows matched to --x by sample id")
    p.add_argument("--mask", help="P x Q CSV of 0/1; 0 leaves a coefficient unpenalized")
    _add_sampler_flags(p)
    p.add_argument("--no-standardize-x", action="store_true")
    p.add_argument("--no-standardize-y", action="store_true")
    p.add_argument("--clr", action="store_true", help="centered log-ratio transform of --x")
    p.add_argument("--prevalence", type=float,
                   help="drop features present in fewer than this fraction of samples")
    p.add_argument("--min-abundance", type=float,
                   help="drop features with lower mean relative abundance (a fraction)")
    p.add_argument("--holdout", type=float, default=0.0,
                   help="fraction of samples held out as a test set")
    p.add_argument("--export-draws", action="store_true", help="also write draws.csv")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="replicated synthetic recovery study")
    for flag, typ, default in (("--p", int, 20), ("--q", int, 20), ("--n", int, 50),
                               ("--rho", float, 0.0), ("--p-row", float, 0.2),
                               ("--p-col", float, 0.5), ("--lo", float, 0.5), ("--hi", float, 2.0),
                               ("--noise-sd", float, 1.0), ("--replicates", int, 10)):
        p.add_argument(flag, type=typ, default=default)
    p.add_argument("--x", help="fixed design matrix (with --btrue)")
    p.add_argument("--btrue", help="fixed true coefficient matrix (with --x)")
    p.add_argument("--keep-draws", action="store_true",
                   help="also store posterior.bmst in every replicate directory")
    _add_sampler_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("benchmark", help="runtime scaling study")
    p.add_argument("--sizes", type=_int_list, default=[20, 40, 80, 160],
                   help="comma list; each size sets P = Q = N")
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--iterations", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-seconds", type=float, default=0.2,
                   help="repeat short chains until this much time is measured")
    p.add_argument("--n-sweep", action="store_true", help="fix P, Q and vary N = m * P")
    p.add_argument("--p", type=int, default=30)
    p.add_argument("--q", type=int, default=30)
    p.add_argument("--multipliers", type=_int_list, default=[1, 5, 10])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("evaluate", help="metrics from a stored posterior")
    p.add_argument("--archive", help="posterior.bmst file")
    p.add_argument("--fit-dir", help="output directory of a fit run")
    p.add_argument("--truth", help="true coefficient CSV for edge-recovery metrics")
    p.add_argument("--x", help="design used in the fit (for --subset)")
    p.add_argument("--y", help="responses used in the fit (for --subset)")
    p.add_argument("--x-test", help="held-out predictors for RMSE/MAD")
    p.add_argument("--y-test", help="held-out responses for RMSE/MAD")
    p.add_argument("--subset", help="file with one response id per line")
    p.add_argument("--k", type=int, default=15, help="number of master predictors for --subset")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pca", help="principal component scores and scree values")
    p.add_argument("--input", required=True)
    p.add_argument("--k", type=int, default=2, help="components to keep")
    p.add_argument("--clr", action="store_true")
    p.add_argument("--transpose", action="store_true", help="input has features as rows")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pca)
    return parser


def read_config(path):
    """Parse ``key=value`` lines (``#`` comments allowed) into argv-style flags."""
    argv = []
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        flag = "--" + key.lstrip("-").replace("_", "-")
        if value.lower() in ("true", "yes", "on"):
            argv.append(flag)
        elif value.lower() in ("false", "no", "off"):
            continue
        else:
            argv += [flag, value]
    return argv


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        # config flags go first so explicit command-line flags override them
        i = argv.index(args.command)
        args = parser.parse_args(argv[: i + 1] + read_config(args.config) + argv[i + 1:])
    return args


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = lambda m, *a, **k: print(f"warning: {m}", file=sys.stderr)
            args.func(args)
    except UsageError as exc:
        print(f"error[usage]: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SingularSystemError, DomainError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"error[numeric]: {exc}".replace("\n", " "), file=sys.stderr)
        return EXIT_NUMERIC
    except (InvalidInputError, EmptyResultError, KeyError, OSError) as exc:
        print(f"error[data]: {exc}".replace("\n", " "), file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
