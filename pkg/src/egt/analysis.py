"""Error measures and closed-form quality bounds for factored approximations.

Everything here is a pure function of dense matrices and products: weighted
and normalized Frobenius errors, the operator norm of E = I - U^T Ubar,
per-column cosines and the largest principal angle, the off-diagonal norm,
the spectrum of the error matrix, and the three a-priori bounds (half
budget, general budget, cosine-based operator norm).
"""

import json
import math
from array import array
from dataclasses import dataclass

from .errors import DomainError, ShapeError, ValidationError
from .fastapply import dense_operator
from .matcore import (
    DenseMatrix,
    DiagonalWeights,
    matmul,
    orthonormal_residual,
    svd_dense,
)

_ORTHO_TOL = 1e-8
_COS_TOL = 1e-12


@dataclass(frozen=True)
class ErrorReport:
    frobenius_sq: float
    normalized_frobenius: float
    operator_norm: float
    principal_angle_rad: float
    cosines: tuple
    cosine_min: float
    cosine_mean: float
    cosine_max: float
    off_norm: float

    def as_dict(self):
        return {
            "frobenius_sq": self.frobenius_sq,
            "normalized_frobenius": self.normalized_frobenius,
            "operator_norm": self.operator_norm,
            "principal_angle_rad": self.principal_angle_rad,
            "cosines": list(self.cosines),
            "cosine_min": self.cosine_min,
            "cosine_mean": self.cosine_mean,
            "cosine_max": self.cosine_max,
            "off_norm": self.off_norm,
        }

    def to_json(self, indent=None):
        return json.dumps(self.as_dict(), indent=indent)


def error_report(u_p, product, sigma):
    """All error measures between U_p and the product's leading p columns.

    frobenius_sq weights column t of the difference by sigma_t; the operator
    norm, principal angle, cosines and off_norm are taken from the p x p
    alignment matrix Q = U_p^T Ubar_p.
    """
    d, p = u_p.rows, u_p.cols
    if product.d != d or product.p != p:
        raise ShapeError(
            f"product is {product.d}x{product.p}, matrix is {d}x{p}"
        )
    if isinstance(sigma, DiagonalWeights):
        if sigma.d != d or sigma.p != p:
            raise ShapeError(f"weights are {sigma.d}x{sigma.p}, need {d}x{p}")
        vals = sigma.values
    else:
        vals = array("d", sigma)
        if len(vals) != p:
            raise ShapeError(f"need {p} weights, got {len(vals)}")

    u_bar = dense_operator(product).first_columns(p)
    q = matmul(u_p, u_bar, transpose_a=True)

    fro_weighted = 0.0
    fro_plain = 0.0
    for t in range(p):
        base = t * d
        acc = 0.0
        for r in range(d):
            diff = u_p.data[base + r] - u_bar.data[base + r]
            acc += diff * diff
        fro_plain += acc
        fro_weighted += vals[t] * vals[t] * acc

    e = DenseMatrix.identity(p)
    for t in range(p * p):
        e.data[t] -= q.data[t]
    _, e_sv, _ = svd_dense(e)
    _, q_sv, _ = svd_dense(q)
    tau_min = q_sv[p - 1]

    cosines = tuple(q.get(t, t) for t in range(p))
    return ErrorReport(
        frobenius_sq=fro_weighted,
        normalized_frobenius=fro_plain / (2.0 * d),
        operator_norm=e_sv[0],
        principal_angle_rad=math.acos(min(1.0, max(0.0, tau_min))),
        cosines=cosines,
        cosine_min=min(cosines),
        cosine_mean=math.fsum(cosines) / p,
        cosine_max=max(cosines),
        off_norm=off_norm(q),
    )


def off_norm(m):
    """sqrt of the squared Frobenius mass off the main diagonal."""
    if m.rows != m.cols:
        raise ShapeError(f"off_norm needs a square matrix, got {m.rows}x{m.cols}")
    total = 0.0
    diag = 0.0
    for t in range(m.rows * m.rows):
        total += m.data[t] * m.data[t]
    for t in range(m.rows):
        v = m.get(t, t)
        diag += v * v
    return math.sqrt(max(0.0, total - diag))


def frobenius_bound_half_budget(d):
    """A-priori squared-Frobenius error bound for a budget of d/2 transforms."""
    if d < 2:
        raise ValidationError(f"need d >= 2, got {d}")
    return 2.0 * d - math.sqrt(2.0 * math.pi * d)


def frobenius_bound(d, g):
    """A-priori squared-Frobenius error bound for a budget of g transforms.

    Valid for g up to d(d-1)/2; beyond that the closed form leaves its
    domain and the request is rejected.
    """
    if d < 2:
        raise ValidationError(f"need d >= 2, got {d}")
    if g < 1:
        raise ValidationError(f"need g >= 1, got {g}")
    g_max = d * (d - 1) // 2
    if g > g_max:
        raise DomainError(f"g={g} exceeds d(d-1)/2={g_max} for d={d}")
    r = d - (1.0 + math.sqrt((2.0 * d - 1.0) ** 2 - 8.0 * g)) / 2.0
    k = d - math.floor(r)
    return 2.0 * k - (2.0 * math.sqrt(2.0) / math.sqrt(math.pi)) * math.sqrt(k)


def operator_norm_bound(cosines, d):
    """Cosine-based operator-norm bound; (value, assumption_holds) pair.

    With eps = min cosine >= 0 the bound is 1 - eps + sqrt((d-1)(1-eps^2)),
    capped at the universal constant 2. A negative cosine violates the
    alignment assumption; the trivial bound 2 is returned with the flag
    cleared instead of raising.
    """
    vals = list(cosines)
    if not vals:
        raise ValidationError("need at least one cosine")
    for c in vals:
        if c < -1.0 - _COS_TOL or c > 1.0 + _COS_TOL:
            raise ValidationError(f"cosine {c!r} outside [-1, 1]")
    eps = min(1.0, max(-1.0, min(vals)))
    if eps < 0.0:
        return 2.0, False
    raw = 1.0 - eps + math.sqrt((d - 1) * max(0.0, 1.0 - eps * eps))
    return min(2.0, raw), True


def error_spectrum(u, ubar):
    """Eigenvalues of E = I - U^T Ubar for square orthonormal U, Ubar.

    Q = U^T Ubar is orthogonal, so its eigenvalues sit on the unit circle:
    cos(theta_k) are the eigenvalues of the symmetric part (Q + Q^T)/2,
    recovered through its SVD with signs from the left/right column
    alignment; complex pairs are rebuilt as cos +- i sin and the whole
    spectrum is shifted by 1. Every returned z satisfies |z - 1| = 1 up to
    rounding.
    """
    if u.rows != u.cols or ubar.rows != ubar.cols:
        raise ShapeError("error_spectrum needs square matrices")
    if u.rows != ubar.rows:
        raise ShapeError(f"sizes differ: {u.rows} vs {ubar.rows}")
    for m in (u, ubar):
        resid = orthonormal_residual(m)
        if resid > _ORTHO_TOL:
            raise ValidationError(
                f"input is not orthonormal (residual {resid:.3e})",
                residual=resid,
            )
    d = u.rows
    q = matmul(u, ubar, transpose_a=True)
    s_mat = DenseMatrix(d, d)
    for r in range(d):
        for c in range(d):
            s_mat.set(r, c, 0.5 * (q.get(r, c) + q.get(c, r)))
    us, sv, vs = svd_dense(s_mat)

    cos = []
    for k in range(d):
        dot = 0.0
        ub, vb = k * d, k * d
        for r in range(d):
            dot += us.data[ub + r] * vs.data[vb + r]
        c = sv[k] if dot >= 0.0 else -sv[k]
        cos.append(min(1.0, max(-1.0, c)))

    reals = [c for c in cos if abs(c) > 1.0 - 1e-12]
    others = sorted(c for c in cos if abs(c) <= 1.0 - 1e-12)
    if len(others) % 2 == 1:
        # Conjugate pairs give every interior cosine even multiplicity; a
        # stray odd one must really be a +-1 that fell below the cutoff.
        orphan = max(others, key=abs)
        others.remove(orphan)
        reals.append(orphan)

    lams = [complex(1.0 if c > 0.0 else -1.0, 0.0) for c in reals]
    for t in range(0, len(others), 2):
        for c, sign in ((others[t], 1.0), (others[t + 1], -1.0)):
            s = math.sqrt(max(0.0, 1.0 - c * c))
            lams.append(complex(c, sign * s))
    zs = [1.0 - lam for lam in lams]
    zs.sort(key=lambda z: (z.real, z.imag))
    return zs
