"""End-to-end acceptance gate: eleven numbered criteria, one verdict line each.

Each test prints exactly one `CRITERION n: PASS/FAIL` line (visible under
`pytest -s`, or in the failure report otherwise) and then asserts. Criteria
with stated runtime budgets enforce them with a wall-clock check. The suite
assumes the compiled kernel; everything still passes on the pure backend but
the factorization-heavy criteria take far longer.

numpy appears here only as an independent oracle for the angle-grid search in
criterion 1; every quantity under test comes from the package itself.
"""

import math
import statistics
import time
from array import array

import numpy as np

from egt.analysis import (
    error_spectrum,
    frobenius_bound,
    off_norm,
    operator_norm_bound,
)
from egt.backend import kern
from egt.cli import main as cli_main
from egt.factorizer import (
    FactorizerConfig,
    GivensProduct,
    factorize,
    initialize_scores,
)
from egt.fastapply import dense_operator, load_product, plan, project, save_product
from egt.givens2x2 import (
    Block2,
    ExtendedGivens,
    apply_left,
    optimal_transform,
    score,
)
from egt.matcore import (
    DenseMatrix,
    DiagonalWeights,
    Rng,
    derive_seed,
    frobenius_distance_sq,
    haar_orthogonal,
    matmul,
    svd_dense,
)
from egt.pca import blob_dataset, run_experiment


def report(n, ok, detail):
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line, flush=True)
    return line


def to_np(m):
    return np.asarray(m.data, dtype=float).reshape(m.cols, m.rows).T


def gaussian_matrix(rows, cols, seed):
    return DenseMatrix(rows, cols, Rng(seed).gaussians(rows * cols))


def transpose(m):
    t = DenseMatrix(m.cols, m.rows)
    for i in range(m.rows):
        for j in range(m.cols):
            t.set(j, i, m.get(i, j))
    return t


def trace(m):
    return math.fsum(m.get(t, t) for t in range(min(m.rows, m.cols)))


def block_of(u, i, j):
    return Block2(u.get(i, i), u.get(i, j), u.get(j, i), u.get(j, j))


def random_pair(rng, d):
    i = rng.randint(d)
    j = rng.randint(d)
    while j == i:
        j = rng.randint(d)
    return (i, j) if i < j else (j, i)


def test_criterion_01_greedy_step_beats_angle_grid():
    """The closed-form step is optimal against a dense grid over its class."""
    t0 = time.monotonic()
    angles = np.linspace(0.0, 2.0 * math.pi, 3600, endpoint=False)
    cosg, sing = np.cos(angles), np.sin(angles)
    worst = -math.inf
    idx = 0
    for d, p in ((4, 2), (4, 4), (8, 2), (8, 8)):
        iu0, iu1 = np.triu_indices(d, 1)
        for _ in range(250):
            lm = gaussian_matrix(d, p, derive_seed(11, idx))
            nm = gaussian_matrix(d, p, derive_seed(12, idx))
            idx += 1

            table = initialize_scores(lm, nm)
            i, j = table.best_pair()
            zb = kern.block_dots(lm.data, nm.data, d, p, i, j)
            t, _ = optimal_transform(Block2(*zb), i, j)
            shifted = nm.copy()
            apply_left(t, shifted)
            err_ours = frobenius_distance_sq(lm, shifted)

            ln, nn = to_np(lm), to_np(nm)
            z = ln @ nn.T
            base = float(np.sum(ln * ln) + np.sum(nn * nn))
            zd = np.diag(z)
            su = zd[iu0] + zd[iu1]
            dpp = z[iu1, iu0] - z[iu0, iu1]
            dm = zd[iu0] - zd[iu1]
            sp = z[iu0, iu1] + z[iu1, iu0]
            rest = float(np.trace(z)) - (zd[iu0] + zd[iu1])
            tr_rot = rest[:, None] + np.outer(su, cosg) + np.outer(dpp, sing)
            tr_ref = rest[:, None] + np.outer(dm, cosg) + np.outer(sp, sing)
            tr_grid = max(float(tr_rot.max()), float(tr_ref.max()))
            err_grid = base - 2.0 * tr_grid
            worst = max(worst, err_ours - err_grid)
    elapsed = time.monotonic() - t0
    ok = worst <= 1e-5 and elapsed < 30.0
    report(1, ok, f"1000 instances, max excess over grid {worst:.3e}, {elapsed:.1f}s")
    assert worst <= 1e-5
    assert elapsed < 30.0


def test_criterion_02_trace_score_identity():
    """tr(U G^T) - tr(U) equals the closed-form score of the touched block."""
    worst = 0.0
    for idx in range(10_000):
        d = 3 + (idx % 10)
        u = haar_orthogonal(d, seed=derive_seed(21, idx))
        i, j = random_pair(Rng(derive_seed(22, idx)), d)
        b = block_of(u, i, j)
        c = score(b)
        t, _ = optimal_transform(b, i, j)
        m = u.copy()
        apply_left(t, m, transpose=True)
        worst = max(worst, abs(trace(m) - (trace(u) + c)))
    ok = worst <= 1e-10
    report(2, ok, f"10^4 Haar instances, max |tr(UG^T) - tr(U) - C_ij| = {worst:.3e}")
    assert ok


def test_criterion_03_objective_monotone_and_termination():
    """Logged objectives never increase; the stopping rule is honored."""
    worst_step = -math.inf
    worst_sweep = -math.inf
    eps = 1e-2
    all_terminated_correctly = True
    for seed in range(20):
        u = haar_orthogonal(50, seed=derive_seed(31, seed))
        md = factorize(
            u, DiagonalWeights.ones(50, 50), FactorizerConfig(g=100)
        ).metadata
        steps = md["objective_per_step"]
        for a, b in zip(steps, steps[1:]):
            worst_step = max(worst_step, b - a)
        chain = [md["objective_init"]] + list(md["objective_per_sweep"])
        for a, b in zip(chain, chain[1:]):
            worst_sweep = max(worst_sweep, b - a)
        if md["converged"]:
            if not (len(chain) >= 3 and abs(chain[-2] - chain[-1]) < eps):
                all_terminated_correctly = False
            # every earlier consecutive gap must have been >= eps
            for a, b in zip(chain[1:-2], chain[2:-1]):
                if abs(a - b) < eps:
                    all_terminated_correctly = False
        elif md["sweeps"] != md["config"]["max_sweeps"]:
            all_terminated_correctly = False
    ok = worst_step <= 0.0 and worst_sweep <= 0.0 and all_terminated_correctly
    report(
        3,
        ok,
        f"20 runs d=50 g=100: max step increase {worst_step:.3e}, "
        f"max sweep increase {worst_sweep:.3e}, stopping rule honored: "
        f"{all_terminated_correctly}",
    )
    assert ok


def test_criterion_04_frobenius_bound_dominates():
    """Mean squared error stays under the closed-form budget bound."""
    t0 = time.monotonic()
    margins = []
    ok = True
    for cell, (d, g) in enumerate(
        ((50, 50), (50, 100), (50, 200), (100, 100), (100, 200), (100, 400))
    ):
        errs = []
        for t in range(100):
            u = haar_orthogonal(d, seed=derive_seed(4000 + cell, t))
            prod = factorize(u, DiagonalWeights.ones(d, d), FactorizerConfig(g=g))
            errs.append(prod.metadata["objective"])
        mean = statistics.fmean(errs)
        bound = frobenius_bound(d, g)
        margins.append(f"d={d},g={g}: {mean:.1f} <= {bound:.1f}")
        if mean > bound:
            ok = False
    elapsed = time.monotonic() - t0
    ok = ok and elapsed < 300.0
    report(4, ok, f"{'; '.join(margins)}; {elapsed:.0f}s")
    assert ok


def test_criterion_05_extended_beats_rotations_only():
    """Paired budgets: extended mode must cut mean error by at least 5%."""
    ext, rot = [], []
    d, g = 50, 100
    for t in range(100):
        u = haar_orthogonal(d, seed=derive_seed(51, t))
        w = DiagonalWeights.ones(d, d)
        pe = factorize(u, w, FactorizerConfig(g=g))
        pr = factorize(u, w, FactorizerConfig(g=g, rotations_only=True))
        ext.append(pe.metadata["objective"] / (2.0 * d))
        rot.append(pr.metadata["objective"] / (2.0 * d))
    me = statistics.fmean(ext)
    mr = statistics.fmean(rot)
    improvement = (mr - me) / mr
    ok = me < mr and improvement >= 0.05
    report(
        5,
        ok,
        f"extended {me:.5f} vs rotations {mr:.5f}, relative improvement "
        f"{improvement * 100:.2f}% (threshold 5%)",
    )
    assert me < mr, "extended mean error not strictly lower"
    assert improvement >= 0.05, (
        f"relative improvement {improvement * 100:.2f}% is below the 5% "
        f"threshold. The rotations-only baseline here selects pairs by the "
        f"rotation-achievable gain, which is the strongest rotation baseline; "
        f"a weaker baseline that selects pairs by the unrestricted score but "
        f"fits only rotations loses 17-30% instead. Expected to stay red."
    )


def test_criterion_06_expected_score_constant():
    """Mean pair score of a big random matrix matches 0.6956/sqrt(d)."""
    d = 1000
    total = 0.0
    count = 0
    for m in range(10):
        u = haar_orthogonal(d, seed=derive_seed(61, m))
        rng = Rng(derive_seed(62, m))
        for _ in range(10_000):
            i, j = random_pair(rng, d)
            total += score(block_of(u, i, j))
            count += 1
    mean = total / count
    target = 0.6956 / math.sqrt(d)
    dev = abs(mean - target) / target
    ok = dev <= 0.10
    report(
        6,
        ok,
        f"mean score {mean:.6f} vs target {target:.6f} over 10^5 pairs "
        f"(deviation {dev * 100:.2f}%, allowed 10%)",
    )
    assert ok


def test_criterion_07_error_matrix_geometry():
    """Eigenvalues of I - U^T Ubar sit on the unit circle around 1."""
    d = 20
    worst_circle = 0.0
    worst_opnorm = 0.0
    dominance_checked = 0
    dominance_ok = True

    def inspect(u, ubar):
        nonlocal worst_circle, worst_opnorm, dominance_checked, dominance_ok
        for z in error_spectrum(u, ubar):
            worst_circle = max(worst_circle, abs(abs(z - 1.0) - 1.0))
        q = matmul(u, ubar, transpose_a=True)
        e = DenseMatrix.identity(d)
        for a in range(d * d):
            e.data[a] -= q.data[a]
        opn = svd_dense(e)[1][0]
        worst_opnorm = max(worst_opnorm, opn)
        cosines = [q.get(t, t) for t in range(d)]
        if min(cosines) >= 0.0:
            bound, holds = operator_norm_bound(cosines, d)
            dominance_checked += 1
            if not holds or bound < opn - 1e-9:
                dominance_ok = False

    for n in range(100):
        inspect(
            haar_orthogonal(d, seed=derive_seed(71, n)),
            haar_orthogonal(d, seed=derive_seed(72, n)),
        )
    for n in range(20):
        u = haar_orthogonal(d, seed=derive_seed(73, n))
        prod = factorize(u, DiagonalWeights.ones(d, d), FactorizerConfig(g=150))
        inspect(u, dense_operator(prod))

    ok = (
        worst_circle <= 1e-8
        and worst_opnorm <= 2.0 + 1e-10
        and dominance_ok
        and dominance_checked >= 1
    )
    report(
        7,
        ok,
        f"120 pairs d=20: max circle deviation {worst_circle:.2e}, max opnorm "
        f"{worst_opnorm:.6f}, bound dominance checked on {dominance_checked} "
        f"all-nonnegative-cosine instances",
    )
    assert ok


def test_criterion_08_pruned_projection_matches_dense():
    """Pruned fast projection equals the dense oracle; FLOPS stay bounded."""
    d = 16
    worst = 0.0
    any_strictly_below = False
    flops_ok = True
    idx = 0
    for p in (1, 4, 16):
        for _ in (range(334) if p == 1 else range(333)):
            rng = Rng(derive_seed(81, idx))
            idx += 1
            g = 1 + rng.randint(40)
            transforms = []
            for _ in range(g):
                i, j = random_pair(rng, d)
                a, b = rng.gaussians(2)
                r = math.hypot(a, b)
                if r < 1e-12:
                    a, b, r = 1.0, 0.0, 1.0
                kind = "reflector" if rng.randint(2) else "rotation"
                transforms.append(ExtendedGivens(i, j, a / r, b / r, kind))
            weights = DiagonalWeights(
                d, p, [abs(v) + 0.1 for v in rng.gaussians(p)]
            )
            prod = GivensProduct(d, p, transforms, weights)
            x = array("d", rng.gaussians(d))

            pl = plan(prod)
            got = project(pl, prod, x)
            ub = dense_operator(prod)
            for t in range(p):
                acc = 0.0
                for a in range(d):
                    acc += ub.get(a, t) * x[a]
                worst = max(worst, abs(got[t] - weights.values[t] * acc))
            if pl.flops_per_vector > 6 * g + p:
                flops_ok = False
            if pl.flops_per_vector < 6 * g + p:
                any_strictly_below = True
    ok = worst <= 1e-12 and flops_ok and any_strictly_below
    report(
        8,
        ok,
        f"1000 instances p in {{1,4,16}}: max |fast - dense| = {worst:.2e}, "
        f"FLOPS <= 6g+p always, strictly below seen: {any_strictly_below}",
    )
    assert ok


def test_criterion_09_off_norm_inequality():
    """One optimal transform never grows the off-diagonal mass budget."""
    d = 10
    accepted = 0
    idx = 0
    worst = -math.inf
    while accepted < 10_000:
        u = haar_orthogonal(d, seed=derive_seed(91, idx))
        i, j = random_pair(Rng(derive_seed(92, idx)), d)
        idx += 1
        b = block_of(u, i, j)
        if b.det() < 0.0:
            continue
        accepted += 1
        before = off_norm(u)
        t, _ = optimal_transform(b, i, j)
        ut = transpose(u)
        apply_left(t, ut)  # G U^T, whose transpose is U G^T
        after = off_norm(ut)
        rhs = before * before + 0.5 * (
            (b.z11 - b.z22) ** 2 - (b.z12 - b.z21) ** 2
        )
        worst = max(worst, after * after - rhs)
    ok = worst <= 1e-10
    report(9, ok, f"10^4 det>=0 instances d=10, max violation {worst:.3e}")
    assert ok


def test_criterion_10_pca_pipeline_accuracy_and_speedup():
    """Factored projection keeps k-NN accuracy and a reported FLOPS gain."""
    data = blob_dataset(n=2000, d=64, seed=0).split(0.25, seed=derive_seed(0, 1))
    rows = run_experiment(
        data, 4, [64, 2016], FactorizerConfig(g=64), sigma_rules=("identity",)
    )
    saturated = rows[-1]
    acc_gap = abs(saturated["accuracy_fast"] - saturated["accuracy_full"])
    speedups = [r["flops_speedup"] for r in rows]
    ok = acc_gap <= 0.01 and any(s > 1.0 for s in speedups)
    report(
        10,
        ok,
        f"accuracy full {saturated['accuracy_full']:.4f} vs fast "
        f"{saturated['accuracy_fast']:.4f} at g=2016 (gap {acc_gap:.4f}); "
        f"FLOPS speedups {[round(s, 2) for s in speedups]}",
    )
    assert acc_gap <= 0.01
    assert any(s > 1.0 for s in speedups)


def test_criterion_11_reproducibility(tmp_path):
    """Same seed, same bytes; container files survive a round trip exactly."""
    def run(argv):
        assert cli_main([str(a) for a in argv]) == 0

    def bytes_of(path):
        return path.read_bytes()

    ok = True
    notes = []

    h1, h2 = tmp_path / "h1.csv", tmp_path / "h2.csv"
    run(["sample-haar", "--d", "12", "--seed", "5", "--out", h1])
    run(["sample-haar", "--d", "12", "--seed", "5", "--out", h2])
    if bytes_of(h1) != bytes_of(h2):
        ok = False
        notes.append("sample-haar differs")

    e1, e2 = tmp_path / "p1.egt", tmp_path / "p2.egt"
    for out in (e1, e2):
        run(["factorize", h1, "--g", "30", "--out", out,
             "--log", tmp_path / (out.name + ".log")])
    if bytes_of(e1) != bytes_of(e2):
        ok = False
        notes.append("factorize egt differs")

    j1, j2 = tmp_path / "r1.json", tmp_path / "r2.json"
    run(["eval", h1, e1, "--out", j1])
    run(["eval", h1, e1, "--out", j2])
    if bytes_of(j1) != bytes_of(j2):
        ok = False
        notes.append("eval report differs")

    s1, s2 = tmp_path / "s1.csv", tmp_path / "s2.csv"
    for out in (s1, s2):
        run(["synthetic", "--d", "12", "--g", "6,12", "--trials", "3",
             "--seed", "9", "--out", out])
    if bytes_of(s1) != bytes_of(s2):
        ok = False
        notes.append("synthetic csv differs")

    roundtrip = tmp_path / "p1.copy.egt"
    save_product(load_product(e1), roundtrip)
    if bytes_of(roundtrip) != bytes_of(e1):
        ok = False
        notes.append("container round trip differs")

    report(11, ok, "all reruns byte-identical; container round trip bit-exact"
           if ok else "; ".join(notes))
    assert ok
