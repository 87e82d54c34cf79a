"""Benchmark the compiled kernel against the pure-Python fallback.

Both backends expose the same entry points, so every row below times the same
call on the same buffers. The end-to-end factorization row runs in a
subprocess per backend because consumers bind their kernel at import time.

Usage:
    python3 benchmarks/compare_backends.py [--d 96] [--g 384] [--repeats 5]
                                           [--batch 256] [--seed 0] [--json]
"""

import argparse
import json
import math
import os
import subprocess
import sys
import time
from array import array

import egt._pykern as pure

try:
    import egt._ckern as compiled
except ImportError:
    compiled = None

from egt.factorizer import FactorizerConfig, factorize
from egt.fastapply import plan
from egt.matcore import DiagonalWeights, Rng, haar_orthogonal


def best_of(repeats, fn):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(d, g, batch, repeats, seed):
    """Per-kernel timings; returns {name: {backend: seconds}}."""
    u = haar_orthogonal(d, seed=seed)
    ident = array("d", bytes(8 * d * d))
    for t in range(d):
        ident[t * d + t] = 1.0

    prod = factorize(u, DiagonalWeights.ones(d, d), FactorizerConfig(g=g))
    pl = plan(prod)
    ii, jj, cc, ss, kk = prod.packed()
    rng = Rng(seed + 1)
    xmat = array("d", rng.gaussians(d * batch))

    scores = array("d", bytes(8 * (d * (d - 1) // 2)))
    diag = array("d", bytes(8 * d))
    rmv = array("d", bytes(8 * d))
    rmc = array("i", bytes(4 * d))
    gauss_src = array("d", rng.gaussians(d * d))

    rows = {}
    backends = [("python", pure)] + ([("compiled", compiled)] if compiled else [])
    for name, mod in backends:
        mod.score_init(u.data, ident, d, d, scores, diag, 0)
        mod.rowmax_rebuild(scores, d, rmv, rmc)

        timings = {}
        timings["score_init"] = best_of(
            repeats, lambda: mod.score_init(u.data, ident, d, d, scores, diag, 0)
        )

        def refresh_pass():
            for a in range(d - 1):
                mod.refresh_scores(
                    u.data, ident, d, d, a, a + 1, scores, diag, rmv, rmc, 0
                )

        timings[f"refresh_scores x{d - 1}"] = best_of(repeats, refresh_pass)

        ymat = array("d", bytes(8 * prod.p * batch))
        scratch = array("d", bytes(8 * d))
        timings[f"project_batch n={batch}"] = best_of(
            repeats,
            lambda: mod.project_batch(
                ii, jj, cc, ss, kk, pl.actions, prod.g,
                prod.weights.values, prod.p, xmat, d, batch, ymat, scratch,
            ),
        )

        def qr():
            work = array("d", gauss_src)
            q = array("d", bytes(8 * d * d))
            mod.haar_q_inplace(work, d, q)

        timings["haar_q_inplace"] = best_of(repeats, qr)

        for key, val in timings.items():
            rows.setdefault(key, {})[name] = val
    return rows


FACTORIZE_SNIPPET = """
import time
from egt.backend import backend_name
from egt.factorizer import FactorizerConfig, factorize
from egt.matcore import DiagonalWeights, haar_orthogonal
u = haar_orthogonal({d}, seed={seed})
w = DiagonalWeights.ones({d}, {d})
factorize(u, w, FactorizerConfig(g={g}))  # warm caches
t0 = time.perf_counter()
for _ in range({reps}):
    factorize(u, w, FactorizerConfig(g={g}))
print(backend_name(), (time.perf_counter() - t0) / {reps})
"""


def bench_factorize(d, g, repeats, seed):
    out = {}
    for backend in ("python", "compiled") if compiled else ("python",):
        env = dict(os.environ, EGT_BACKEND=backend)
        reps = repeats if backend == "compiled" else 1
        snippet = FACTORIZE_SNIPPET.format(d=d, g=g, seed=seed, reps=reps)
        proc = subprocess.run(
            [sys.executable, "-c", snippet],
            env=env, capture_output=True, text=True, check=True,
        )
        name, seconds = proc.stdout.split()
        if name != backend:
            raise RuntimeError(f"subprocess bound {name}, wanted {backend}")
        out[backend] = float(seconds)
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d", type=int, default=96)
    ap.add_argument("--g", type=int, default=384)
    ap.add_argument("--batch", type=int, default=256)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", action="store_true", help="machine-readable output")
    args = ap.parse_args(argv)

    rows = bench_kernels(args.d, args.g, args.batch, args.repeats, args.seed)
    rows[f"factorize d={args.d} g={args.g}"] = bench_factorize(
        args.d, args.g, args.repeats, args.seed
    )

    if args.json:
        print(json.dumps({"config": vars(args), "seconds": rows}, indent=2))
        return 0

    if compiled is None:
        print("compiled kernel not built; timing the pure backend only\n")
    width = max(len(k) for k in rows)
    print(f"{'kernel':<{width}}  {'python':>12}  {'compiled':>12}  {'speedup':>8}")
    for key, t in rows.items():
        pure_ms = t["python"] * 1e3
        if "compiled" in t:
            comp_ms = t["compiled"] * 1e3
            print(f"{key:<{width}}  {pure_ms:>10.3f}ms  {comp_ms:>10.3f}ms  "
                  f"{t['python'] / t['compiled']:>7.1f}x")
        else:
            print(f"{key:<{width}}  {pure_ms:>10.3f}ms  {'-':>12}  {'-':>8}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
