"""Self-contained dense linear algebra and random-orthogonal sampling.

Matrices are column-major ``array('d')`` buffers wrapped in DenseMatrix; no
external numeric dependency is used anywhere in the package. Randomness comes
from an explicit-seed xoshiro256++ stream (splitmix64 seeded) with Box-Muller
normals, so every draw is reproducible byte for byte across runs and across
the compiled/pure kernel backends.
"""

import struct
import sys
from array import array
from math import isfinite, sqrt

from . import _pykern
from .backend import kern
from .errors import ConvergenceError, ShapeError, ValidationError

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix64(x):
    """splitmix64 finalizer: one full avalanche of a 64-bit word."""
    x = (x + _GOLDEN) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(seed, index):
    """Deterministic child seed for work item ``index`` of a base seed."""
    return _mix64((int(seed) + (int(index) + 1) * _GOLDEN) & _MASK64)


class Rng:
    """Seedable random stream: xoshiro256++ state, Box-Muller normals.

    The four state words come from iterating splitmix64 on the seed. Bulk
    fills go through the active kernel backend; both backends advance the
    state identically, so streams never depend on which one is importable.
    """

    __slots__ = ("seed", "_state")

    def __init__(self, seed):
        self.seed = int(seed) & _MASK64
        x = self.seed
        state = array("Q", [0, 0, 0, 0])
        for i in range(4):
            x = (x + _GOLDEN) & _MASK64
            state[i] = _mix64(x)
        if state[0] == 0 and state[1] == 0 and state[2] == 0 and state[3] == 0:
            state[0] = _GOLDEN
        self._state = state

    def u64(self):
        """Next raw 64-bit draw."""
        return _pykern._next_u64(self._state)

    def randint(self, n):
        """Uniform integer in [0, n)."""
        return self.u64() % n

    def uniforms(self, n):
        out = array("d", bytes(8 * n))
        kern.fill_uniform(self._state, out, n)
        return out

    def gaussians(self, n):
        out = array("d", bytes(8 * n))
        kern.fill_gaussian(self._state, out, n)
        return out

    def spawn(self, index):
        """Independent child stream number ``index``."""
        return Rng(derive_seed(self.seed, index))

    def shuffled(self, n):
        """Fisher-Yates permutation of range(n)."""
        perm = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.randint(i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        return perm


class DenseMatrix:
    """Column-major dense matrix over float64.

    ``data[i + j * rows]`` is the entry in row i, column j. The buffer is
    mutable; operations that modify it in place say so in their docstrings,
    everything else treats matrices as values.
    """

    __slots__ = ("rows", "cols", "data")

    def __init__(self, rows, cols, data=None):
        if rows < 0 or cols < 0:
            raise ShapeError(f"negative dimensions ({rows}, {cols})")
        if data is None:
            data = array("d", bytes(8 * rows * cols))
        else:
            if not isinstance(data, array) or data.typecode != "d":
                data = array("d", data)
            if len(data) != rows * cols:
                raise ShapeError(
                    f"buffer holds {len(data)} entries, shape ({rows}, {cols}) "
                    f"needs {rows * cols}"
                )
        self.rows = rows
        self.cols = cols
        self.data = data

    @classmethod
    def zeros(cls, rows, cols):
        return cls(rows, cols)

    @classmethod
    def identity(cls, n):
        m = cls(n, n)
        for t in range(n):
            m.data[t * n + t] = 1.0
        return m

    @classmethod
    def from_rows(cls, rows_list):
        rows = len(rows_list)
        cols = len(rows_list[0]) if rows else 0
        m = cls(rows, cols)
        for i, row in enumerate(rows_list):
            if len(row) != cols:
                raise ShapeError("ragged row lengths")
            for j, v in enumerate(row):
                m.data[i + j * rows] = float(v)
        return m

    @classmethod
    def from_columns(cls, cols_list):
        cols = len(cols_list)
        rows = len(cols_list[0]) if cols else 0
        m = cls(rows, cols)
        for j, col in enumerate(cols_list):
            if len(col) != rows:
                raise ShapeError("ragged column lengths")
            m.data[j * rows : (j + 1) * rows] = array("d", col)
        return m

    def get(self, i, j):
        if not (0 <= i < self.rows and 0 <= j < self.cols):
            raise ShapeError(f"({i}, {j}) outside {self.rows}x{self.cols}")
        return self.data[i + j * self.rows]

    def set(self, i, j, v):
        if not (0 <= i < self.rows and 0 <= j < self.cols):
            raise ShapeError(f"({i}, {j}) outside {self.rows}x{self.cols}")
        self.data[i + j * self.rows] = v

    def copy(self):
        return DenseMatrix(self.rows, self.cols, array("d", self.data))

    def column(self, j):
        """Copy of column j as array('d')."""
        return self.data[j * self.rows : (j + 1) * self.rows]

    def set_column(self, j, values):
        self.data[j * self.rows : (j + 1) * self.rows] = array("d", values)

    def first_columns(self, p):
        return DenseMatrix(self.rows, p, self.data[: p * self.rows])

    def to_rows(self):
        r, c, d = self.rows, self.cols, self.data
        return [[d[i + j * r] for j in range(c)] for i in range(r)]

    def transposed(self):
        r, c, d = self.rows, self.cols, self.data
        out = DenseMatrix(c, r)
        od = out.data
        for j in range(c):
            base = j * r
            for i in range(r):
                od[j + i * c] = d[base + i]
        return out

    def scaled_columns(self, weights):
        """New matrix with column j scaled by weights[j]."""
        if len(weights) != self.cols:
            raise ShapeError("one weight per column required")
        out = self.copy()
        kern.scale_columns(out.data, out.rows, out.cols, array("d", weights))
        return out

    def max_abs(self):
        return max(map(abs, self.data), default=0.0)

    def assert_finite(self, what="matrix"):
        for v in self.data:
            if not isfinite(v):
                raise ValidationError(f"{what} contains a non-finite entry")

    def __repr__(self):
        return f"DenseMatrix({self.rows}x{self.cols})"


class DiagonalWeights:
    """Rectangular diagonal weight matrix: d x p with values on the diagonal."""

    __slots__ = ("d", "p", "values")

    def __init__(self, d, p, values):
        if p > d:
            raise ShapeError(f"p={p} exceeds d={d}")
        values = array("d", values)
        if len(values) != p:
            raise ShapeError(f"expected {p} weights, got {len(values)}")
        self.d = d
        self.p = p
        self.values = values

    @classmethod
    def ones(cls, d, p):
        return cls(d, p, [1.0] * p)

    def as_matrix(self):
        m = DenseMatrix(self.d, self.p)
        for t in range(self.p):
            m.data[t + t * self.d] = self.values[t]
        return m

    def copy(self):
        return DiagonalWeights(self.d, self.p, array("d", self.values))

    def __repr__(self):
        return f"DiagonalWeights(d={self.d}, p={self.p})"


def matmul(a, b, transpose_a=False):
    """Dense product a @ b (or a^T @ b), exact triple loop, fixed order.

    Accumulation over the inner dimension always runs in ascending index
    order, so results are reproducible to the bit for a given backend.
    """
    if transpose_a:
        if a.rows != b.rows:
            raise ShapeError(f"inner dimensions differ: {a.rows} vs {b.rows}")
        out = DenseMatrix(a.cols, b.cols)
        kern.matmul_ta(a.data, a.rows, a.cols, b.data, b.cols, out.data)
        return out
    if a.cols != b.rows:
        raise ShapeError(f"inner dimensions differ: {a.cols} vs {b.rows}")
    out = DenseMatrix(a.rows, b.cols)
    kern.matmul(a.data, a.rows, a.cols, b.data, b.cols, out.data)
    return out


def frobenius_distance_sq(a, b):
    """Squared Frobenius distance between same-shape matrices."""
    if a.rows != b.rows or a.cols != b.cols:
        raise ShapeError(
            f"shape mismatch: ({a.rows},{a.cols}) vs ({b.rows},{b.cols})"
        )
    return kern.frob_dist_sq(a.data, b.data, len(a.data))


def svd_dense(a, max_sweeps=60, tol=1e-15):
    """Full SVD by one-sided Jacobi: returns (U, s, V) with a = U diag(s) V^T.

    Singular values come back descending; U is a.rows x k and V a.cols x k
    with k = min(rows, cols), both with orthonormal columns. Raises
    ConvergenceError (carrying the last off-diagonal residual) if the cyclic
    sweeps do not settle within max_sweeps.
    """
    m, n = a.rows, a.cols
    if m == 0 or n == 0:
        raise ShapeError("cannot decompose an empty matrix")
    if m < n:
        u, s, v = svd_dense(a.transposed(), max_sweeps=max_sweeps, tol=tol)
        return v, s, u
    work = a.copy()
    v = DenseMatrix(n, n)
    s = array("d", bytes(8 * n))
    resid = array("d", [0.0])
    sweeps = kern.jacobi_svd(work.data, m, n, v.data, s, max_sweeps, tol, resid)
    if sweeps < 0:
        raise ConvergenceError(
            f"one-sided Jacobi did not converge in {max_sweeps} sweeps",
            residual=resid[0],
        )
    order = sorted(range(n), key=lambda t: (-s[t], t))
    u_sorted = DenseMatrix(m, n)
    v_sorted = DenseMatrix(n, n)
    s_sorted = array("d", bytes(8 * n))
    for new, old in enumerate(order):
        u_sorted.data[new * m : (new + 1) * m] = work.data[old * m : (old + 1) * m]
        v_sorted.data[new * n : (new + 1) * n] = v.data[old * n : (old + 1) * n]
        s_sorted[new] = s[old]
    _complete_null_columns(u_sorted, s_sorted)
    return u_sorted, s_sorted, v_sorted


def _complete_null_columns(u, s):
    """Replace exactly-zero U columns with an orthonormal completion."""
    m, n = u.rows, u.cols
    for k in range(n):
        if s[k] != 0.0:
            continue
        for cand in range(m):
            col = array("d", bytes(8 * m))
            col[cand] = 1.0
            for j in range(n):
                if j == k:
                    continue
                base = j * m
                w = 0.0
                for i in range(m):
                    w += u.data[base + i] * col[i]
                for i in range(m):
                    col[i] -= w * u.data[base + i]
            nrm = sqrt(sum(x * x for x in col))
            if nrm > 0.5:
                inv = 1.0 / nrm
                for i in range(m):
                    col[i] *= inv
                u.data[k * m : (k + 1) * m] = col
                break


def haar_orthogonal(d, seed):
    """Haar-distributed d x d orthogonal matrix with nonnegative diagonal.

    QR of a standard Gaussian draw with the R-diagonal sign correction gives
    the Haar matrix; a final per-column sign flip makes every diagonal entry
    nonnegative. An exactly degenerate pivot column (probability zero, but
    checked) is redrawn from the same stream.
    """
    if d < 1:
        raise ShapeError(f"d must be positive, got {d}")
    if d == 1:
        # O(1) with a nonnegative diagonal is the single point {+1}; the
        # Householder path only reproduces it up to an ulp.
        return DenseMatrix(1, 1, [1.0])
    rng = Rng(seed)
    g = rng.gaussians(d * d)
    q = array("d", bytes(8 * d * d))
    while True:
        work = array("d", g)
        r = kern.haar_q_inplace(work, d, q)
        if r == 0:
            break
        col = r - 1
        g[col * d : (col + 1) * d] = rng.gaussians(d)
    return DenseMatrix(d, d, q)


def orthonormal_residual(a):
    """Frobenius norm of a^T a - I, the column-orthonormality defect."""
    gram = matmul(a, a, transpose_a=True)
    n = a.cols
    acc = 0.0
    for j in range(n):
        for i in range(n):
            v = gram.data[i + j * n] - (1.0 if i == j else 0.0)
            acc += v * v
    return sqrt(acc)


# ---------------------------------------------------------------------------
# Matrix file formats: CSV (one row per line) and DMAT (binary, little endian)

_DMAT_MAGIC = b"DMAT"


def write_matrix_csv(m, path):
    r, c, d = m.rows, m.cols, m.data
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for i in range(r):
            fh.write(",".join(repr(d[i + j * r]) for j in range(c)))
            fh.write("\n")


def read_matrix_csv(path):
    rows_list = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = [float(tok) for tok in line.split(",")]
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from exc
            rows_list.append(row)
    if not rows_list:
        raise ValidationError(f"{path}: no data rows")
    width = len(rows_list[0])
    for lineno, row in enumerate(rows_list, 1):
        if len(row) != width:
            raise ValidationError(f"{path}: ragged row at line {lineno}")
    m = DenseMatrix.from_rows(rows_list)
    m.assert_finite(path)
    return m


def write_dmat(m, path):
    """Binary matrix: magic 'DMAT', u32 rows, u32 cols, f64 column-major, LE."""
    payload = array("d", m.data)
    if sys.byteorder == "big":
        payload.byteswap()
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sII", _DMAT_MAGIC, m.rows, m.cols))
        fh.write(payload.tobytes())


def read_dmat(path):
    with open(path, "rb") as fh:
        header = fh.read(12)
        if len(header) != 12:
            raise ValidationError(f"{path}: truncated header")
        magic, rows, cols = struct.unpack("<4sII", header)
        if magic != _DMAT_MAGIC:
            raise ValidationError(f"{path}: bad magic {magic!r}")
        body = fh.read()
    expected = 8 * rows * cols
    if len(body) != expected:
        raise ValidationError(
            f"{path}: expected {expected} payload bytes, found {len(body)}"
        )
    payload = array("d")
    payload.frombytes(body)
    if sys.byteorder == "big":
        payload.byteswap()
    m = DenseMatrix(rows, cols, payload)
    m.assert_finite(path)
    return m


def read_matrix(path):
    """Load a matrix by extension: .dmat binary, anything else CSV."""
    if str(path).endswith(".dmat"):
        return read_dmat(path)
    return read_matrix_csv(path)


def write_matrix(m, path):
    if str(path).endswith(".dmat"):
        write_dmat(m, path)
    else:
        write_matrix_csv(m, path)
