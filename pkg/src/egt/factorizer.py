"""Greedy factorization of orthonormal matrices into sparse 2x2 transforms.

Builds a product of g extended Givens transformations minimizing
``||U_p Sigma_p - (product) Sigma_bar_p||_F^2`` by coordinate descent: each
step picks the coordinate plane with the best closed-form gain, replaces that
slot's transform, and repairs only the scores the step touched. Sweeps repeat
until the per-sweep objective stalls within epsilon or max_sweeps is hit.

Bookkeeping follows the two-sided form of the objective: L accumulates the
transposed new transforms applied to U_p Sigma_p, N starts each sweep as the
full product applied to Sigma_bar and has old transforms peeled off one slot
at a time. The objective never increases: a candidate that would lose to the
slot's previous transform (float-noise territory) is rejected and the old
transform is kept.
"""

import dataclasses
import json
import time
from array import array
from dataclasses import dataclass

from .backend import kern
from .errors import ShapeError, ValidationError
from .givens2x2 import Block2, ExtendedGivens, REFLECTOR, optimal_transform
from .matcore import DenseMatrix, DiagonalWeights, frobenius_distance_sq, orthonormal_residual

SIGMA_RULES = ("identity", "original", "update")

_ORTHO_TOL = 1e-8


@dataclass(frozen=True)
class FactorizerConfig:
    """Knobs for factorize(); defaults follow the reference algorithm."""

    g: int
    sigma_rule: str = "original"
    epsilon: float = 1e-2
    max_sweeps: int = 100
    rotations_only: bool = False
    seed: int = 0
    # True scores the initial table from Z = (U_p Sigma_p) Sigma_bar^T, the
    # form consistent with the per-step optimality result; False uses the
    # unweighted Z = U_p Sigma_bar^T. Identical when Sigma_p = I.
    weighted_score_init: bool = True

    def __post_init__(self):
        if self.g < 1:
            raise ValidationError(f"g must be >= 1, got {self.g}")
        if self.sigma_rule not in SIGMA_RULES:
            raise ValidationError(
                f"sigma_rule must be one of {SIGMA_RULES}, got {self.sigma_rule!r}"
            )
        if not self.epsilon > 0.0:
            raise ValidationError(f"epsilon must be positive, got {self.epsilon}")
        if self.max_sweeps < 1:
            raise ValidationError(f"max_sweeps must be >= 1, got {self.max_sweeps}")

    def as_dict(self):
        return {
            "g": self.g,
            "sigma_rule": self.sigma_rule,
            "epsilon": self.epsilon,
            "max_sweeps": self.max_sweeps,
            "rotations_only": self.rotations_only,
            "seed": self.seed,
            "weighted_score_init": self.weighted_score_init,
        }

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


class GivensProduct:
    """An ordered product of extended Givens transforms plus diagonal weights.

    ``transforms[0]`` is the leftmost factor: applying the product to a vector
    applies the last slot first. ``weights`` holds the Sigma_bar_p diagonal.
    """

    __slots__ = ("d", "p", "transforms", "weights", "sigma_rule", "metadata", "_packed")

    def __init__(self, d, p, transforms, weights, sigma_rule="original", metadata=None):
        if weights.d != d or weights.p != p:
            raise ShapeError(
                f"weights are {weights.d}x{weights.p}, product is {d}x{p}"
            )
        if sigma_rule not in SIGMA_RULES:
            raise ValidationError(f"unknown sigma_rule {sigma_rule!r}")
        for t in transforms:
            if t.j >= d:
                raise ShapeError(f"transform plane ({t.i}, {t.j}) outside d={d}")
        self.d = d
        self.p = p
        self.transforms = list(transforms)
        self.weights = weights
        self.sigma_rule = sigma_rule
        self.metadata = dict(metadata) if metadata else {}
        self._packed = None

    @property
    def g(self):
        return len(self.transforms)

    def packed(self):
        """Flat (ii, jj, cc, ss, kinds) arrays for the kernel appliers."""
        if self._packed is None:
            g = len(self.transforms)
            ii = array("i", bytes(4 * g))
            jj = array("i", bytes(4 * g))
            cc = array("d", bytes(8 * g))
            ss = array("d", bytes(8 * g))
            kk = array("B", bytes(g))
            for k, t in enumerate(self.transforms):
                ii[k] = t.i
                jj[k] = t.j
                cc[k] = t.c
                ss[k] = t.s
                kk[k] = 1 if t.kind == REFLECTOR else 0
            self._packed = (ii, jj, cc, ss, kk)
        return self._packed

    def __repr__(self):
        return f"GivensProduct(d={self.d}, p={self.p}, g={self.g})"


class ScoreTable:
    """All d(d-1)/2 pair scores with per-row maxima and the Z diagonal.

    Scores live in a flat upper-triangular array; the row structure gives
    O(d) selection and O(d) repair per step. The diagonal of Z = L N^T is
    cached because every score refresh and the objective bookkeeping need it.
    """

    __slots__ = ("d", "p", "rotations_only", "scores", "diag", "row_max", "row_arg")

    def __init__(self, d, p, rotations_only=False):
        if d < 2:
            raise ShapeError(f"need d >= 2, got {d}")
        self.d = d
        self.p = p
        self.rotations_only = 1 if rotations_only else 0
        self.scores = array("d", bytes(8 * (d * (d - 1) // 2)))
        self.diag = array("d", bytes(8 * d))
        self.row_max = array("d", bytes(8 * d))
        self.row_arg = array("i", bytes(4 * d))

    @property
    def count(self):
        return self.d * (self.d - 1) // 2

    def build(self, l_mat, n_mat):
        """Score every pair from scratch against Z = L N^T."""
        self._check(l_mat, n_mat)
        kern.score_init(
            l_mat.data, n_mat.data, self.d, self.p,
            self.scores, self.diag, self.rotations_only,
        )
        kern.rowmax_rebuild(self.scores, self.d, self.row_max, self.row_arg)

    def reset_diag(self, l_mat, n_mat):
        """Recompute only the cached Z diagonal from the given pair."""
        kern.diag_dots(l_mat.data, n_mat.data, self.d, self.p, self.diag)

    def refresh(self, l_mat, n_mat, a, b):
        """Recompute the 2d-3 scores touching rows a or b, repair row maxima."""
        kern.refresh_scores(
            l_mat.data, n_mat.data, self.d, self.p, a, b,
            self.scores, self.diag, self.row_max, self.row_arg,
            self.rotations_only,
        )

    def best_pair(self):
        """Maximal-score pair, lexicographically smallest on ties."""
        packed = kern.argmax_pair(self.row_max, self.row_arg, self.d)
        if packed < 0:
            raise ShapeError("empty score table")
        return packed // self.d, packed % self.d

    def score_of(self, i, j):
        if not (0 <= i < j < self.d):
            raise ShapeError(f"bad pair ({i}, {j}) for d={self.d}")
        return self.scores[(i * (2 * self.d - i - 1)) // 2 + (j - i - 1)]

    def sum_diag(self):
        return kern.vec_sum(self.diag, self.d)

    def _check(self, l_mat, n_mat):
        if l_mat.rows != self.d or n_mat.rows != self.d:
            raise ShapeError("row count does not match table dimension")
        if l_mat.cols != self.p or n_mat.cols != self.p:
            raise ShapeError("column count does not match table dimension")


def initialize_scores(l_mat, n_mat, rotations_only=False):
    """Fresh ScoreTable for Z = L N^T; O(d^2 p)."""
    if l_mat.rows != n_mat.rows or l_mat.cols != n_mat.cols:
        raise ShapeError(
            f"L is {l_mat.rows}x{l_mat.cols}, N is {n_mat.rows}x{n_mat.cols}"
        )
    table = ScoreTable(l_mat.rows, l_mat.cols, rotations_only)
    table.build(l_mat, n_mat)
    return table


class FactorizerState:
    """Mutable working set for one sweep: matrices, table, slots, bookkeeping."""

    __slots__ = (
        "config", "d", "p", "l_mat", "n_mat", "table", "transforms",
        "norms_sq", "guard_rejects", "objective_per_step",
    )

    def __init__(self, config, l_mat, n_mat, table, transforms):
        self.config = config
        self.d = l_mat.rows
        self.p = l_mat.cols
        self.l_mat = l_mat
        self.n_mat = n_mat
        self.table = table
        self.transforms = transforms
        self.norms_sq = sum(x * x for x in l_mat.data) + sum(
            x * x for x in n_mat.data
        )
        self.guard_rejects = 0
        self.objective_per_step = []

    def objective(self):
        """||L - N||_F^2 through the trace identity, O(d)."""
        return self.norms_sq - 2.0 * self.table.sum_diag()


def _candidate_diag(t, zaa, zab, zba, zbb):
    """Diagonal entries of the block after applying t transposed on the left."""
    if t.kind == REFLECTOR:
        return t.c * zaa + t.s * zba, t.s * zab - t.c * zbb
    return t.c * zaa + t.s * zba, t.c * zbb - t.s * zab


def greedy_step(state, slot):
    """One coordinate-descent step on one slot. Returns the slot's transform.

    Peels the slot's previous transform off N, picks the best-scoring pair,
    computes the closed-form optimal transform from fresh block dot products,
    and commits it unless it would increase the objective (possible only at
    rounding noise), in which case the previous transform is kept and
    re-applied on the L side.
    """
    cfg = state.config
    table = state.table
    l_mat, n_mat = state.l_mat, state.n_mat
    d, p = state.d, state.p
    old = state.transforms[slot]

    sd_prev = table.sum_diag()
    if not old.is_identity:
        kern.apply_rows(
            n_mat.data, d, p, old.i, old.j, old.c, old.s,
            1 if old.kind == REFLECTOR else 0, 1,
        )
        table.refresh(l_mat, n_mat, old.i, old.j)

    i, j = table.best_pair()
    zaa, zab, zba, zbb = kern.block_dots(l_mat.data, n_mat.data, d, p, i, j)
    cand, _degenerate = optimal_transform(
        Block2(zaa, zab, zba, zbb), i, j, cfg.rotations_only
    )
    ndi, ndj = _candidate_diag(cand, zaa, zab, zba, zbb)
    sd_new = table.sum_diag() - table.diag[i] - table.diag[j] + ndi + ndj

    if sd_new < sd_prev:
        # the slot's previous transform is the better coordinate choice
        state.guard_rejects += 1
        if not old.is_identity:
            kern.apply_rows(
                l_mat.data, d, p, old.i, old.j, old.c, old.s,
                1 if old.kind == REFLECTOR else 0, 1,
            )
            table.refresh(l_mat, n_mat, old.i, old.j)
        chosen = old
    else:
        kern.apply_rows(
            l_mat.data, d, p, cand.i, cand.j, cand.c, cand.s,
            1 if cand.kind == REFLECTOR else 0, 1,
        )
        state.transforms[slot] = cand
        table.refresh(l_mat, n_mat, i, j)
        chosen = cand

    state.objective_per_step.append(state.objective())
    return chosen


def update_sigma(l_final, rule, sigma_in):
    """Per-sweep Sigma_bar: ones, the input values, or diag(L) read back."""
    if rule == "identity":
        return DiagonalWeights.ones(l_final.rows, l_final.cols)
    if rule == "original":
        return sigma_in.copy()
    if rule == "update":
        d = l_final.rows
        vals = [l_final.data[t + t * d] for t in range(l_final.cols)]
        return DiagonalWeights(d, l_final.cols, vals)
    raise ValidationError(f"unknown sigma rule {rule!r}")


def _build_n(sigma_bar, transforms):
    """N = (product of transforms) applied to the Sigma_bar column block."""
    n_mat = sigma_bar.as_matrix()
    d, p = n_mat.rows, n_mat.cols
    for t in reversed(transforms):
        if t.is_identity:
            continue
        kern.apply_rows(
            n_mat.data, d, p, t.i, t.j, t.c, t.s,
            1 if t.kind == REFLECTOR else 0, 0,
        )
    return n_mat


def _log(stream, sweep, objective, t0):
    if stream is None:
        return
    elapsed_ms = (time.perf_counter() - t0) * 1000.0
    stream.write(
        json.dumps(
            {"sweep": sweep, "objective": objective, "elapsed_ms": elapsed_ms}
        )
        + "\n"
    )


def factorize(u_p, sigma, config, log_stream=None):
    """Factor U_p (orthonormal columns) against weights sigma into a product.

    Returns a GivensProduct with exactly config.g transforms; its metadata
    carries the build log (per-sweep objectives, step objectives, guard
    rejects, the config echo). Raises ValidationError for non-orthonormal
    input (with the measured residual attached) or non-positive weights,
    ShapeError for impossible dimensions.
    """
    t0 = time.perf_counter()
    d, p = u_p.rows, u_p.cols
    if d < 2:
        raise ShapeError(f"need d >= 2, got d={d}")
    if p < 1:
        raise ShapeError(f"need p >= 1, got p={p}")
    if p > d:
        raise ShapeError(f"p={p} exceeds d={d}")
    u_p.assert_finite("U_p")
    resid = orthonormal_residual(u_p)
    if resid > _ORTHO_TOL:
        raise ValidationError(
            f"columns are not orthonormal (residual {resid:.3e})", residual=resid
        )
    if not isinstance(sigma, DiagonalWeights):
        sigma = DiagonalWeights(d, p, sigma)
    elif sigma.d != d or sigma.p != p:
        raise ShapeError(f"sigma is {sigma.d}x{sigma.p}, U_p is {d}x{p}")
    for v in sigma.values:
        if not v > 0.0:
            raise ValidationError(f"sigma values must be positive, got {v!r}")

    if config.sigma_rule == "identity":
        sigma_bar = DiagonalWeights.ones(d, p)
    else:
        sigma_bar = sigma.copy()

    transforms = [ExtendedGivens.identity(0, 1) for _ in range(config.g)]

    objective_init = frobenius_distance_sq(
        u_p.scaled_columns(sigma.values), sigma_bar.as_matrix()
    )
    _log(log_stream, 0, objective_init, t0)

    eps_prev = objective_init
    objective_per_sweep = []
    objective_per_step = []
    guard_rejects = 0
    converged = False
    sweeps_done = 0

    for sweep in range(1, config.max_sweeps + 1):
        l_mat = u_p.scaled_columns(sigma.values)
        n_mat = _build_n(sigma_bar, transforms)
        table = ScoreTable(d, p, config.rotations_only)
        if sweep == 1 and not config.weighted_score_init:
            table.build(u_p, n_mat)
            table.reset_diag(l_mat, n_mat)
        else:
            table.build(l_mat, n_mat)
        state = FactorizerState(config, l_mat, n_mat, table, transforms)

        for slot in range(config.g):
            greedy_step(state, slot)

        guard_rejects += state.guard_rejects
        objective_per_step.extend(state.objective_per_step)
        sweeps_done = sweep

        if config.sigma_rule == "update":
            sigma_bar = update_sigma(l_mat, "update", sigma)
        eps = frobenius_distance_sq(l_mat, sigma_bar.as_matrix())
        objective_per_sweep.append(eps)
        _log(log_stream, sweep, eps, t0)
        if abs(eps_prev - eps) < config.epsilon:
            converged = True
            break
        eps_prev = eps

    metadata = {
        "config": config.as_dict(),
        "sweeps": sweeps_done,
        "converged": converged,
        "objective_init": objective_init,
        "objective": objective_per_sweep[-1],
        "objective_per_sweep": objective_per_sweep,
        "objective_per_step": objective_per_step,
        "guard_rejects": guard_rejects,
    }
    return GivensProduct(
        d, p, transforms, sigma_bar, config.sigma_rule, metadata
    )
