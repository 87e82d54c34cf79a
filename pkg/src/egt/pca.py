"""PCA on column datasets, factored projections, and k-NN evaluation.

A Dataset keeps points as columns of a d x N matrix with optional integer
labels and disjoint train/test index sets. fit_pca runs a dense SVD on the
(optionally centered) training columns; train_fast_projection factorizes the
principal components; run_experiment compares full and factored projections
through a k-NN classifier and reports speedups.
"""

import csv
import math
import time
from array import array

from .backend import kern
from .errors import ShapeError, ValidationError
from .factorizer import GivensProduct, factorize
from .fastapply import plan, project_batch
from .matcore import DenseMatrix, DiagonalWeights, Rng, matmul, svd_dense

KNN_DEFAULT_K = 10


class Dataset:
    """Points as columns, optional labels, and a train/test split."""

    __slots__ = ("x", "labels", "train_idx", "test_idx")

    def __init__(self, x, labels=None, train_idx=None, test_idx=None):
        n = x.cols
        if labels is not None:
            labels = [int(v) for v in labels]
            if len(labels) != n:
                raise ShapeError(f"{len(labels)} labels for {n} points")
        if train_idx is None:
            train_idx = tuple(range(n))
        else:
            train_idx = tuple(int(t) for t in train_idx)
        test_idx = tuple(int(t) for t in test_idx) if test_idx else ()
        for t in (*train_idx, *test_idx):
            if not 0 <= t < n:
                raise ValidationError(f"split index {t} outside 0..{n - 1}")
        if set(train_idx) & set(test_idx):
            raise ValidationError("train and test splits overlap")
        self.x = x
        self.labels = labels
        self.train_idx = train_idx
        self.test_idx = test_idx

    @property
    def d(self):
        return self.x.rows

    @property
    def n(self):
        return self.x.cols

    @classmethod
    def from_csv(cls, path, label_col="last"):
        """One sample per line; optional final integer label column."""
        if label_col not in ("last", "none"):
            raise ValidationError(f"unknown label_col {label_col!r}")
        rows = []
        labels = [] if label_col == "last" else None
        with open(path, "r", newline="", encoding="ascii") as fh:
            for lineno, rec in enumerate(csv.reader(fh), start=1):
                if not rec:
                    continue
                try:
                    vals = [float(v) for v in rec]
                except ValueError as exc:
                    raise ValidationError(f"{path}:{lineno}: {exc}") from exc
                if label_col == "last":
                    if len(vals) < 2:
                        raise ValidationError(
                            f"{path}:{lineno}: need features plus a label"
                        )
                    labels.append(int(vals[-1]))
                    vals = vals[:-1]
                rows.append(vals)
        if not rows:
            raise ValidationError(f"{path}: empty dataset")
        width = len(rows[0])
        for lineno, vals in enumerate(rows, start=1):
            if len(vals) != width:
                raise ValidationError(
                    f"{path}: row {lineno} has {len(vals)} features, expected {width}"
                )
        x = DenseMatrix(width, len(rows))
        for c, vals in enumerate(rows):
            x.set_column(c, vals)
        return cls(x, labels)

    def split(self, test_fraction, seed):
        """New Dataset with a seeded shuffle split; points are shared."""
        if not 0.0 <= test_fraction < 1.0:
            raise ValidationError(f"test_fraction {test_fraction} outside [0, 1)")
        order = Rng(seed).shuffled(self.n)
        n_test = int(round(self.n * test_fraction))
        n_test = min(n_test, self.n - 1)
        return Dataset(
            self.x, self.labels,
            train_idx=sorted(order[n_test:]),
            test_idx=sorted(order[:n_test]),
        )

    def _columns(self, idx):
        m = DenseMatrix(self.d, len(idx))
        for c, t in enumerate(idx):
            m.set_column(c, self.x.column(t))
        return m

    def train_matrix(self):
        return self._columns(self.train_idx)

    def test_matrix(self):
        return self._columns(self.test_idx)

    def train_labels(self):
        if self.labels is None:
            raise ValidationError("dataset has no labels")
        return [self.labels[t] for t in self.train_idx]

    def test_labels(self):
        if self.labels is None:
            raise ValidationError("dataset has no labels")
        return [self.labels[t] for t in self.test_idx]


class PcaModel:
    """Leading principal directions, their weights, and the centering mean."""

    __slots__ = ("u_p", "sigma", "mean")

    def __init__(self, u_p, sigma, mean):
        if sigma.d != u_p.rows or sigma.p != u_p.cols:
            raise ShapeError("weights do not match the component matrix")
        if len(mean) != u_p.rows:
            raise ShapeError("mean length does not match dimension")
        self.u_p = u_p
        self.sigma = sigma
        self.mean = array("d", mean)

    @property
    def d(self):
        return self.u_p.rows

    @property
    def p(self):
        return self.u_p.cols


def center_columns(m, mean):
    """New matrix with mean subtracted from every column."""
    if len(mean) != m.rows:
        raise ShapeError("mean length does not match row count")
    out = m.copy()
    for c in range(m.cols):
        base = c * m.rows
        for r in range(m.rows):
            out.data[base + r] -= mean[r]
    return out


def fit_pca(data, p, center=True):
    """Principal directions of the training columns via dense SVD.

    Sign convention: the largest-magnitude entry of each component is made
    positive, so the decomposition is deterministic.
    """
    xt = data.train_matrix()
    d, n = xt.rows, xt.cols
    if n == 0:
        raise ValidationError("empty training split")
    if not 1 <= p <= min(d, n):
        raise ValidationError(f"p={p} outside 1..min({d}, {n})")
    mean = array("d", bytes(8 * d))
    if center:
        inv = 1.0 / n
        for c in range(n):
            base = c * d
            for r in range(d):
                mean[r] += xt.data[base + r]
        for r in range(d):
            mean[r] *= inv
        xt = center_columns(xt, mean)
    u, s, _ = svd_dense(xt)
    u_p = u.first_columns(p)
    for c in range(p):
        base = c * d
        best = 0
        for r in range(1, d):
            if abs(u_p.data[base + r]) > abs(u_p.data[base + best]):
                best = r
        if u_p.data[base + best] < 0.0:
            for r in range(d):
                u_p.data[base + r] = -u_p.data[base + r]
    return PcaModel(u_p, DiagonalWeights(d, p, s[:p]), mean)


def train_fast_projection(model, config, log_stream=None):
    """Factorize the principal components; returns (product, plan)."""
    product = factorize(model.u_p, model.sigma, config, log_stream=log_stream)
    return product, plan(product)


def empty_product(model, sigma_rule):
    """Zero-transform product: projection onto the weighted identity basis."""
    d, p = model.d, model.p
    if sigma_rule == "identity":
        weights = DiagonalWeights.ones(d, p)
    elif sigma_rule == "original":
        weights = model.sigma.copy()
    elif sigma_rule == "update":
        # The update rule reads the diagonal of U_p Sigma_p when Ubar = I.
        vals = [model.sigma.values[t] * model.u_p.get(t, t) for t in range(p)]
        weights = DiagonalWeights(d, p, vals)
    else:
        raise ValidationError(f"unknown sigma_rule {sigma_rule!r}")
    return GivensProduct(d, p, [], weights, sigma_rule)


def knn_classify(train_proj, train_labels, test_proj, k, test_labels=None):
    """Euclidean k-NN with majority vote; ties go to the smallest label.

    Returns (predictions, accuracy); accuracy is None without test labels.
    """
    p, nt = train_proj.rows, train_proj.cols
    if test_proj.rows != p:
        raise ShapeError(f"train is {p}-dimensional, test {test_proj.rows}")
    if len(train_labels) != nt:
        raise ShapeError(f"{len(train_labels)} labels for {nt} points")
    if not 1 <= k <= nt:
        raise ValidationError(f"k={k} outside 1..{nt}")
    ne = test_proj.cols
    labels = array("i", [int(v) for v in train_labels])
    pred = array("i", bytes(4 * ne))
    kern.knn_predict(
        train_proj.data, nt, test_proj.data, ne, p, labels, k, pred
    )
    predictions = list(pred)
    accuracy = None
    if test_labels is not None:
        if len(test_labels) != ne:
            raise ShapeError(f"{len(test_labels)} labels for {ne} points")
        if ne:
            hits = sum(1 for a, b in zip(predictions, test_labels) if a == int(b))
            accuracy = hits / ne
        else:
            accuracy = 0.0
    return predictions, accuracy


def run_experiment(
    data,
    p,
    g_grid,
    config,
    sigma_rules=None,
    center=True,
    k=KNN_DEFAULT_K,
    threads=1,
    log_stream=None,
):
    """Full-vs-factored k-NN comparison; one report row per (g, sigma_rule).

    Row fields: g, sigma_rule, accuracy_full, accuracy_fast, flops_speedup,
    time_speedup, selection_fraction, frobenius_error.
    """
    from .analysis import error_report

    if data.labels is None:
        raise ValidationError("run_experiment needs a labeled dataset")
    if not data.test_idx:
        raise ValidationError("run_experiment needs a test split")
    if sigma_rules is None:
        sigma_rules = (config.sigma_rule,)

    model = fit_pca(data, p, center=center)
    d = model.d
    xc_train = center_columns(data.train_matrix(), model.mean)
    xc_test = center_columns(data.test_matrix(), model.mean)
    train_labels = data.train_labels()
    test_labels = data.test_labels()

    full_train = matmul(model.u_p, xc_train, transpose_a=True)
    t0 = time.perf_counter()
    full_test = matmul(model.u_p, xc_test, transpose_a=True)
    dense_elapsed = time.perf_counter() - t0
    _, accuracy_full = knn_classify(
        full_train, train_labels, full_test, k, test_labels
    )

    rows = []
    for g in g_grid:
        for rule in sigma_rules:
            if g == 0:
                product = empty_product(model, rule)
                apply_plan = plan(product)
            else:
                cfg = config.replace(g=g, sigma_rule=rule)
                product, apply_plan = train_fast_projection(
                    model, cfg, log_stream=log_stream
                )
            fast_train = project_batch(
                apply_plan, product, xc_train, threads=threads
            )
            t0 = time.perf_counter()
            fast_test = project_batch(
                apply_plan, product, xc_test, threads=threads
            )
            fast_elapsed = time.perf_counter() - t0
            _, accuracy_fast = knn_classify(
                fast_train, train_labels, fast_test, k, test_labels
            )
            rep = error_report(model.u_p, product, model.sigma)
            rows.append(
                {
                    "g": g,
                    "sigma_rule": rule,
                    "accuracy_full": accuracy_full,
                    "accuracy_fast": accuracy_fast,
                    "flops_speedup": (2.0 * p * d) / apply_plan.flops_per_vector,
                    "time_speedup": dense_elapsed / max(fast_elapsed, 1e-9),
                    "selection_fraction": apply_plan.live_count / d,
                    "frobenius_error": rep.normalized_frobenius,
                }
            )
    return rows


# ---------------------------------------------------------------------------
# Bundled fixture generators (seeded, label column included).


def blob_dataset(n=2000, d=64, seed=0, separation=6.0, noise=1.0):
    """Two Gaussian blobs at +-(separation/2)*noise along a random direction."""
    if n < 2 or d < 1:
        raise ValidationError("need n >= 2 and d >= 1")
    rng = Rng(seed)
    direction = rng.gaussians(d)
    norm = math.sqrt(sum(v * v for v in direction))
    direction = [v / norm for v in direction]
    shift = 0.5 * separation * noise
    x = DenseMatrix(d, n)
    labels = []
    for c in range(n):
        lab = rng.randint(2)
        labels.append(lab)
        side = shift if lab == 0 else -shift
        point = rng.gaussians(d)
        x.set_column(c, [side * direction[r] + noise * point[r] for r in range(d)])
    return Dataset(x, labels)


def digits8x8_dataset(n=1500, seed=0, classes=10, noise=0.6):
    """Digit-style 8x8 patches: one template per class plus Gaussian noise."""
    if not 2 <= classes <= n:
        raise ValidationError(f"need 2 <= classes <= n, got {classes}, {n}")
    d = 64
    rng = Rng(seed)
    templates = [rng.gaussians(d) for _ in range(classes)]
    x = DenseMatrix(d, n)
    labels = []
    for c in range(n):
        lab = c % classes
        labels.append(lab)
        base = templates[lab]
        pt = rng.gaussians(d)
        x.set_column(c, [base[r] + noise * pt[r] for r in range(d)])
    return Dataset(x, labels)
