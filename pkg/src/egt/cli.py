"""Command-line front end: egt <subcommand>.

Subcommands: sample-haar, factorize, eval, synthetic, pca, bench, stages.
Exit codes: 0 success, 2 validation problem, 3 numerical non-convergence,
4 I/O failure. Randomized commands require an explicit --seed; batch
parallelism comes from --threads (falling back to the GF_THREADS variable)
and never changes non-timing output.
"""

import argparse
import json
import os
import statistics
import sys
import time
from array import array

from .analysis import (
    error_report,
    frobenius_bound,
    frobenius_bound_half_budget,
    operator_norm_bound,
)
from .errors import ConvergenceError, DomainError, ShapeError, ValidationError
from .factorizer import SIGMA_RULES, FactorizerConfig, factorize
from .fastapply import (
    count_stages,
    dense_operator,
    load_product,
    plan,
    project_batch,
    save_product,
    save_product_json,
)
from .matcore import (
    DenseMatrix,
    DiagonalWeights,
    Rng,
    derive_seed,
    haar_orthogonal,
    matmul,
    read_matrix,
    write_matrix,
)
from .pca import Dataset, blob_dataset, digits8x8_dataset, run_experiment


def _threads(args):
    if args.threads is not None:
        val = args.threads
    else:
        try:
            val = int(os.environ.get("GF_THREADS", "1"))
        except ValueError:
            val = 1
    if val < 1:
        raise ValidationError(f"threads must be >= 1, got {val}")
    return val


def _int_list(text):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _rule_list(text):
    vals = [v.strip() for v in text.split(",") if v.strip()]
    for v in vals:
        if v not in SIGMA_RULES:
            raise argparse.ArgumentTypeError(
                f"unknown sigma rule {v!r}; choose from {', '.join(SIGMA_RULES)}"
            )
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _echo(args, keys):
    """Config echo embedded in every report, for provenance."""
    doc = {"subcommand": args.subcommand}
    for key in keys:
        doc[key] = getattr(args, key)
    return doc


def _read_sigma(path, d, p):
    """One weight per line or comma-separated; defaults handled by callers."""
    vals = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            vals.extend(float(v) for v in line.replace(",", " ").split())
    if len(vals) != p:
        raise ValidationError(f"{path}: expected {p} weights, found {len(vals)}")
    return DiagonalWeights(d, p, vals)


def _factorizer_config(args, g):
    return FactorizerConfig(
        g=g,
        sigma_rule=args.sigma_rule,
        epsilon=args.epsilon,
        max_sweeps=args.max_sweeps,
        rotations_only=args.rotations_only,
        seed=getattr(args, "seed", 0) or 0,
        weighted_score_init=args.weighted_score_init,
    )


def _write_json(doc, path):
    if path is None or path == "-":
        json.dump(doc, sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        with open(path, "w", encoding="ascii") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")


# ---------------------------------------------------------------------------
# Subcommands.


def cmd_sample_haar(args):
    if args.d < 1:
        raise ValidationError(f"d must be >= 1, got {args.d}")
    m = haar_orthogonal(args.d, args.seed)
    write_matrix(m, args.out)
    print(f"wrote {args.d}x{args.d} orthogonal matrix to {args.out}")
    return 0


def cmd_factorize(args):
    u = read_matrix(args.matrix)
    d, p = u.rows, u.cols
    sigma = (
        _read_sigma(args.sigma, d, p)
        if args.sigma
        else DiagonalWeights.ones(d, p)
    )
    config = _factorizer_config(args, args.g)
    log_path = args.log if args.log else args.out + ".log.jsonl"
    with open(log_path, "w", encoding="ascii") as log_stream:
        product = factorize(u, sigma, config, log_stream=log_stream)
    save_product(product, args.out)
    if args.json_out:
        save_product_json(product, args.json_out)
    meta = product.metadata
    print(
        f"factorized {d}x{p} with g={args.g}: objective "
        f"{meta['objective_init']:.6g} -> {meta['objective']:.6g} in "
        f"{meta['sweeps']} sweeps (converged={meta['converged']}), "
        f"log at {log_path}"
    )
    return 0


def cmd_eval(args):
    u = read_matrix(args.matrix)
    product = load_product(args.product)
    d, p = u.rows, u.cols
    sigma = (
        _read_sigma(args.sigma, d, p)
        if args.sigma
        else DiagonalWeights.ones(d, p)
    )
    report = error_report(u, product, sigma)
    op_bound, holds = operator_norm_bound(report.cosines, d)
    g_max = d * (d - 1) // 2
    bounds = {
        "operator_norm_bound": op_bound,
        "assumption_holds": holds,
        "frobenius_bound": (
            frobenius_bound(d, product.g) if 1 <= product.g <= g_max else None
        ),
        "frobenius_bound_half_budget": frobenius_bound_half_budget(d),
    }
    doc = {
        "config": _echo(args, ("matrix", "product", "sigma")),
        "error_report": report.as_dict(),
        "bounds": bounds,
    }
    _write_json(doc, args.out)
    return 0


def _synthetic_cell(d, g, seed, base):
    u = haar_orthogonal(d, seed)
    ones = DiagonalWeights.ones(d, d)
    ext = factorize(u, ones, base.replace(g=g, rotations_only=False))
    rot = factorize(u, ones, base.replace(g=g, rotations_only=True))
    ext_err = error_report(u, ext, ones).normalized_frobenius
    rot_err = error_report(u, rot, ones).normalized_frobenius
    return ext_err, rot_err


def cmd_synthetic(args):
    from concurrent.futures import ThreadPoolExecutor

    threads = _threads(args)
    base = FactorizerConfig(
        g=1,
        epsilon=args.epsilon,
        max_sweeps=args.max_sweeps,
        seed=args.seed,
    )
    cells = []
    for gi, g in enumerate(args.g):
        for t in range(args.trials):
            cells.append((g, derive_seed(args.seed, gi * args.trials + t)))

    def run(cell):
        g, seed = cell
        return _synthetic_cell(args.d, g, seed, base)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(run, cells))
    else:
        outcomes = [run(c) for c in cells]

    rows = []
    for gi, g in enumerate(args.g):
        chunk = outcomes[gi * args.trials : (gi + 1) * args.trials]
        ext = [a for a, _ in chunk]
        rot = [b for _, b in chunk]
        rows.append(
            {
                "d": args.d,
                "g": g,
                "mean_extended": statistics.mean(ext),
                "std_extended": statistics.pstdev(ext),
                "mean_rotations": statistics.mean(rot),
                "std_rotations": statistics.pstdev(rot),
                "bound": frobenius_bound(args.d, g),
            }
        )

    config = _echo(
        args, ("d", "g", "trials", "seed", "epsilon", "max_sweeps", "format")
    )
    if args.format == "json":
        _write_json({"config": config, "rows": rows}, args.out)
    else:
        lines = ["# config " + json.dumps(config)]
        header = (
            "d,g,mean_extended,std_extended,mean_rotations,std_rotations,bound"
        )
        lines.append(header)
        for row in rows:
            lines.append(
                ",".join(
                    repr(row[k]) if isinstance(row[k], float) else str(row[k])
                    for k in header.split(",")
                )
            )
        text = "\n".join(lines) + "\n"
        if args.out is None or args.out == "-":
            sys.stdout.write(text)
        else:
            with open(args.out, "w", encoding="ascii") as fh:
                fh.write(text)
    return 0


def cmd_pca(args):
    if args.dataset == "blob":
        data = blob_dataset(n=args.n, d=args.data_d, seed=args.seed)
    elif args.dataset == "digits8x8":
        data = digits8x8_dataset(n=args.n, seed=args.seed)
    else:
        data = Dataset.from_csv(args.dataset, label_col=args.label_col)
    data = data.split(args.test_fraction, derive_seed(args.seed, 1))
    base = _factorizer_config(args, max(max(args.g), 1))
    rows = run_experiment(
        data,
        args.p,
        args.g,
        base,
        sigma_rules=tuple(args.rules),
        center=args.center,
        k=args.k,
        threads=_threads(args),
    )
    config = _echo(
        args,
        (
            "dataset", "p", "g", "seed", "k", "rules", "test_fraction",
            "center", "epsilon", "max_sweeps",
        ),
    )
    _write_json({"config": config, "rows": rows}, args.out)
    return 0


def cmd_bench(args):
    product = load_product(args.product)
    d, p = product.d, product.p
    apply_plan = plan(product)
    rng = Rng(args.seed)
    x = DenseMatrix(d, args.vectors)
    for c in range(args.vectors):
        x.set_column(c, rng.gaussians(d))
    dense = dense_operator(product).first_columns(p)
    dense = dense.scaled_columns(list(product.weights.values))
    threads = _threads(args)

    dense_times = []
    fast_times = []
    for _ in range(args.repeats):
        t0 = time.perf_counter()
        matmul(dense, x, transpose_a=True)
        dense_times.append(time.perf_counter() - t0)
        t0 = time.perf_counter()
        project_batch(apply_plan, product, x, threads=threads)
        fast_times.append(time.perf_counter() - t0)
    dense_ms = statistics.median(dense_times) * 1e3
    fast_ms = statistics.median(fast_times) * 1e3

    doc = {
        "config": _echo(args, ("product", "vectors", "repeats", "seed")),
        "d": d,
        "p": p,
        "g": product.g,
        "flops_per_vector": apply_plan.flops_per_vector,
        "flops_speedup": (2.0 * p * d) / apply_plan.flops_per_vector,
        "stages": count_stages(product),
        "dense_ms_median": dense_ms,
        "fast_ms_median": fast_ms,
        "time_speedup": dense_ms / max(fast_ms, 1e-9),
    }
    _write_json(doc, args.out)
    return 0


def cmd_stages(args):
    product = load_product(args.product)
    partition = plan(product).stages
    print(f"transforms: {product.g}")
    print(f"stages: {len(partition)}")
    for idx, stage in enumerate(partition, start=1):
        slots = ",".join(str(k + 1) for k in stage)
        print(f"stage {idx}: {slots}")
    return 0


# ---------------------------------------------------------------------------
# Parser wiring.


def _add_factorizer_flags(sub):
    sub.add_argument("--sigma-rule", default="original", choices=SIGMA_RULES)
    sub.add_argument("--epsilon", type=float, default=1e-2)
    sub.add_argument("--max-sweeps", type=int, default=100)
    sub.add_argument("--rotations-only", action="store_true")
    sub.add_argument(
        "--no-weighted-score-init",
        dest="weighted_score_init",
        action="store_false",
    )


def build_parser():
    parser = argparse.ArgumentParser(
        prog="egt",
        description=(
            "Approximate orthonormal matrices by short products of extended "
            "orthogonal Givens transforms, apply them fast, and evaluate the "
            "error measures and bounds."
        ),
    )
    subs = parser.add_subparsers(dest="subcommand", required=True)

    s = subs.add_parser("sample-haar", help="write a random orthogonal matrix")
    s.add_argument("--d", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sample_haar)

    s = subs.add_parser("factorize", help="factor an orthonormal matrix")
    s.add_argument("matrix", help="input matrix (.csv or .dmat)")
    s.add_argument("--g", type=int, required=True)
    s.add_argument("--sigma", help="optional weight file, one value per row")
    s.add_argument("--out", required=True, help="output product (.egt)")
    s.add_argument("--json-out", help="also write the JSON mirror")
    s.add_argument("--log", help="build log path (default: <out>.log.jsonl)")
    _add_factorizer_flags(s)
    s.set_defaults(func=cmd_factorize)

    s = subs.add_parser("eval", help="error report for a factored product")
    s.add_argument("matrix")
    s.add_argument("product")
    s.add_argument("--sigma")
    s.add_argument("--out", help="JSON path (default: stdout)")
    s.set_defaults(func=cmd_eval)

    s = subs.add_parser(
        "synthetic", help="error statistics on random orthogonal matrices"
    )
    s.add_argument("--d", type=int, required=True)
    s.add_argument("--g", type=_int_list, required=True, help="budget grid, comma separated")
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--epsilon", type=float, default=1e-2)
    s.add_argument("--max-sweeps", type=int, default=100)
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.add_argument("--out", help="default: stdout")
    s.add_argument("--threads", type=int)
    s.set_defaults(func=cmd_synthetic)

    s = subs.add_parser("pca", help="full vs factored projection experiment")
    s.add_argument(
        "--dataset",
        required=True,
        help="'blob', 'digits8x8', or a CSV path",
    )
    s.add_argument("--label-col", choices=("last", "none"), default="last")
    s.add_argument("--n", type=int, default=2000, help="fixture sample count")
    s.add_argument("--data-d", type=int, default=64, help="blob fixture dimension")
    s.add_argument("--p", type=int, required=True)
    s.add_argument("--g", type=_int_list, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--k", type=int, default=10)
    s.add_argument(
        "--rules",
        type=_rule_list,
        default=["identity"],
        help="sigma rules, comma separated",
    )
    s.add_argument("--test-fraction", type=float, default=0.25)
    s.add_argument("--no-center", dest="center", action="store_false")
    s.add_argument("--threads", type=int)
    s.add_argument("--out", help="default: stdout")
    _add_factorizer_flags(s)
    s.set_defaults(func=cmd_pca)

    s = subs.add_parser("bench", help="factored vs dense projection timing")
    s.add_argument("product")
    s.add_argument("--vectors", type=int, default=1000)
    s.add_argument("--repeats", type=int, default=5)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--threads", type=int)
    s.add_argument("--out", help="default: stdout")
    s.set_defaults(func=cmd_bench)

    s = subs.add_parser("stages", help="print the stage partition of a product")
    s.add_argument("product")
    s.set_defaults(func=cmd_stages)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ShapeError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
