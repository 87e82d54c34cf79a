"""The 2x2 kernel: pair scores, 2x2 singular values, optimal sparse transforms.

A transform here is an identity matrix with one 2x2 block planted at rows and
columns (i, j). Two kinds exist: the rotation [[c, -s], [s, c]] and the
reflector [[c, s], [s, -c]], both with c^2 + s^2 = 1. The reflector is its own
transpose. Everything in this module is a pure function of its arguments.
"""

from dataclasses import dataclass
from math import isfinite, sqrt
from typing import NamedTuple

from .backend import kern
from .errors import ShapeError, ValidationError

ROTATION = "rotation"
REFLECTOR = "reflector"

_UNIT_TOL = 1e-12
# below this the 2x2 block has no preferred direction and no improving
# transform exists; the identity is returned instead of dividing by ~0
_DEGENERATE_R = 1e-300


class Block2(NamedTuple):
    """2x2 sub-matrix [[z11, z12], [z21, z22]] of some Z = L N^T."""

    z11: float
    z12: float
    z21: float
    z22: float

    def det(self):
        return self.z11 * self.z22 - self.z12 * self.z21

    def trace(self):
        return self.z11 + self.z22

    def fro_sq(self):
        return (
            self.z11 * self.z11
            + self.z12 * self.z12
            + self.z21 * self.z21
            + self.z22 * self.z22
        )

    def assert_finite(self):
        for v in self:
            if not isfinite(v):
                raise ValidationError("block contains a non-finite entry")


@dataclass(frozen=True)
class ExtendedGivens:
    """Sparse orthogonal transform acting on coordinate plane (i, j), i < j.

    Indices are 0-based here; serialized and reported forms are 1-based.
    """

    i: int
    j: int
    c: float
    s: float
    kind: str

    def __post_init__(self):
        if not (0 <= self.i < self.j):
            raise ShapeError(f"need 0 <= i < j, got ({self.i}, {self.j})")
        if self.kind not in (ROTATION, REFLECTOR):
            raise ValidationError(f"unknown kind {self.kind!r}")
        unit = self.c * self.c + self.s * self.s
        if abs(unit - 1.0) > _UNIT_TOL:
            raise ValidationError(
                f"c^2 + s^2 = {unit!r} is not 1 within {_UNIT_TOL}"
            )

    @classmethod
    def identity(cls, i, j):
        return cls(i, j, 1.0, 0.0, ROTATION)

    @property
    def is_identity(self):
        return self.kind == ROTATION and self.c == 1.0 and self.s == 0.0

    def block(self):
        """The planted 2x2 block as a Block2."""
        if self.kind == ROTATION:
            return Block2(self.c, -self.s, self.s, self.c)
        return Block2(self.c, self.s, self.s, -self.c)


def score(block, rotations_only=False):
    """Alignment gain of the best transform on this block: nuclear minus trace.

    Always in [0, 4] when the block comes from a product of two matrices with
    orthonormal rows; always >= 0 up to rounding for any block. With
    rotations_only the rotation branch is used regardless of determinant sign,
    which lower-bounds the unrestricted score.
    """
    block.assert_finite()
    return kern.score_block(
        block.z11, block.z12, block.z21, block.z22, 1 if rotations_only else 0
    )


def svd2x2(block):
    """Both singular values of the block, closed form, descending."""
    block.assert_finite()
    su = block.z11 + block.z22
    dpp = block.z21 - block.z12
    dm = block.z11 - block.z22
    sp = block.z12 + block.z21
    q = 0.5 * sqrt(su * su + dpp * dpp)
    r = 0.5 * sqrt(dm * dm + sp * sp)
    return q + r, abs(q - r)


def optimal_transform(block, i, j, rotations_only=False):
    """Transform maximizing tr(G^T block): the orthogonal polar factor.

    Returns (transform, degenerate). A determinant >= 0 yields a rotation, a
    negative one a reflector; rotations_only forces the rotation branch. When
    the closed-form radius underflows (score is 0 to machine precision and no
    direction is preferred) the identity rotation is returned with the
    degenerate flag set.
    """
    block.assert_finite()
    det = block.det()
    if rotations_only or det >= 0.0:
        su = block.z11 + block.z22
        dpp = block.z21 - block.z12
        r = sqrt(su * su + dpp * dpp)
        if r < _DEGENERATE_R:
            return ExtendedGivens.identity(i, j), True
        return ExtendedGivens(i, j, su / r, dpp / r, ROTATION), False
    dm = block.z11 - block.z22
    sp = block.z12 + block.z21
    r = sqrt(dm * dm + sp * sp)
    if r < _DEGENERATE_R:
        return ExtendedGivens.identity(i, j), True
    return ExtendedGivens(i, j, dm / r, sp / r, REFLECTOR), False


def apply_left(g, m, transpose=False):
    """In-place update of rows g.i and g.j of m by G (or G^T).

    Touches 2*cols entries, 6*cols scalar operations. The reflector is
    symmetric, so transpose changes nothing for it.
    """
    if g.j >= m.rows:
        raise ShapeError(f"transform plane ({g.i}, {g.j}) outside {m.rows} rows")
    kern.apply_rows(
        m.data,
        m.rows,
        m.cols,
        g.i,
        g.j,
        g.c,
        g.s,
        1 if g.kind == REFLECTOR else 0,
        1 if transpose else 0,
    )
