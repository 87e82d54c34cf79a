"""Applying a GivensProduct in O(g): pruning, stages, FLOPS, persistence.

The projection y = Sigma_bar^T (product^T x) only keeps p of d coordinates,
so a backward liveness pass over the transform sequence classifies each
transform as Full (6 scalar ops), Half (3 ops, only one output row kept) or
Skip (0 ops). The same walk yields the set of input coordinates that can
influence the output at all (the live mask). Stages group consecutive
transforms with pairwise-disjoint index pairs; everything in one stage can be
applied in parallel without changing a single bit of the result.
"""

import json
import struct
import sys
from array import array
from concurrent.futures import ThreadPoolExecutor

from .backend import kern
from .errors import ShapeError, ValidationError
from .factorizer import SIGMA_RULES, GivensProduct
from .givens2x2 import ExtendedGivens, REFLECTOR, ROTATION
from .matcore import DenseMatrix, DiagonalWeights

FULL = 0
HALF_ROW_I = 1
HALF_ROW_J = 2
SKIP = 3

ACTION_NAMES = ("full", "half_row_i", "half_row_j", "skip")


class ApplyPlan:
    """Immutable execution plan for projecting with one GivensProduct."""

    __slots__ = ("actions", "stages", "flops_per_vector", "live_mask")

    def __init__(self, actions, stages, flops_per_vector, live_mask):
        self.actions = actions
        self.stages = stages
        self.flops_per_vector = flops_per_vector
        self.live_mask = live_mask

    @property
    def live_count(self):
        return sum(1 for alive in self.live_mask if alive)

    def action_counts(self):
        counts = {name: 0 for name in ACTION_NAMES}
        for a in self.actions:
            counts[ACTION_NAMES[a]] += 1
        return counts

    def __repr__(self):
        return (
            f"ApplyPlan(flops={self.flops_per_vector}, "
            f"stages={len(self.stages)}, live={self.live_count})"
        )


def plan(product):
    """Backward liveness walk plus greedy stage partition for a product.

    The projection applies slot 1 first (transposed), slot g last, then keeps
    the first p coordinates. Walking slots g..1 with the needed-set seeded to
    {1..p}: a transform touching no needed coordinate is skipped; one needed
    output keeps only that row (3 ops) but makes both inputs needed; both
    needed stays a full 6-op update.
    """
    d, p, g = product.d, product.p, product.g
    ii, jj, _cc, _ss, _kk = product.packed()
    needed = bytearray(d)
    for t in range(p):
        needed[t] = 1
    actions = array("B", bytes(g))
    full = half = 0
    for k in range(g - 1, -1, -1):
        i = ii[k]
        j = jj[k]
        ni = needed[i]
        nj = needed[j]
        if ni and nj:
            actions[k] = FULL
            full += 1
        elif ni:
            actions[k] = HALF_ROW_I
            needed[j] = 1
            half += 1
        elif nj:
            actions[k] = HALF_ROW_J
            needed[i] = 1
            half += 1
        else:
            actions[k] = SKIP
    flops = 6 * full + 3 * half + p
    live_mask = tuple(bool(needed[t]) for t in range(d))
    return ApplyPlan(actions, _stage_partition(product), flops, live_mask)


def _stage_partition(product):
    """Order-preserving split of slots 1..g into index-disjoint groups."""
    stages = []
    current = []
    used = set()
    for k, t in enumerate(product.transforms):
        if t.i in used or t.j in used:
            stages.append(tuple(current))
            current = [k]
            used = {t.i, t.j}
        else:
            current.append(k)
            used.add(t.i)
            used.add(t.j)
    if current:
        stages.append(tuple(current))
    return tuple(stages)


def count_stages(product):
    """Number of groups in the greedy order-preserving stage partition."""
    return len(_stage_partition(product))


def project(plan_, product, x):
    """y = Sigma_bar_p^T (product^T x) using only the planned operations.

    Exactly plan.flops_per_vector scalar multiply/adds are performed. Returns
    an array('d') of length p.
    """
    d, p = product.d, product.p
    if len(x) != d:
        raise ShapeError(f"expected a length-{d} vector, got {len(x)}")
    ii, jj, cc, ss, kk = product.packed()
    scratch = array("d", x)
    y = array("d", bytes(8 * p))
    kern.project_vec(
        ii, jj, cc, ss, kk, plan_.actions, product.g,
        product.weights.values, p, scratch, y,
    )
    return y


def project_batch(plan_, product, xmat, threads=1):
    """Project every column of xmat (d x n); returns a p x n DenseMatrix.

    With threads > 1 the columns are split into contiguous chunks processed
    concurrently; outputs are disjoint, so the result is bit-identical to the
    sequential run.
    """
    d, p = product.d, product.p
    if xmat.rows != d:
        raise ShapeError(f"expected {d} rows, got {xmat.rows}")
    n = xmat.cols
    ii, jj, cc, ss, kk = product.packed()
    out = DenseMatrix(p, n)
    if n == 0:
        return out
    threads = max(1, min(int(threads), n))
    if threads == 1:
        scratch = array("d", bytes(8 * d))
        kern.project_batch(
            ii, jj, cc, ss, kk, plan_.actions, product.g,
            product.weights.values, p, xmat.data, d, n, out.data, scratch,
        )
        return out

    xview = memoryview(xmat.data)
    yview = memoryview(out.data)
    bounds = [(t * n) // threads for t in range(threads + 1)]

    def run(chunk):
        lo, hi = bounds[chunk], bounds[chunk + 1]
        if lo == hi:
            return
        scratch = array("d", bytes(8 * d))
        kern.project_batch(
            ii, jj, cc, ss, kk, plan_.actions, product.g,
            product.weights.values, p,
            xview[lo * d : hi * d], d, hi - lo,
            yview[lo * p : hi * p], scratch,
        )

    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(run, range(threads)))
    return out


def reconstruct(product, y):
    """x = product (Sigma_bar_p y): scale, zero-pad, apply slot g first."""
    d, p = product.d, product.p
    if len(y) != p:
        raise ShapeError(f"expected a length-{p} vector, got {len(y)}")
    ii, jj, cc, ss, kk = product.packed()
    x = array("d", bytes(8 * d))
    w = product.weights.values
    for t in range(p):
        x[t] = w[t] * y[t]
    kern.apply_product_vec(ii, jj, cc, ss, kk, product.g, x, 0)
    return x


def dense_operator(product):
    """The full d x d product as a dense matrix (weights not applied)."""
    d = product.d
    m = DenseMatrix.identity(d)
    for t in reversed(product.transforms):
        if t.is_identity:
            continue
        kern.apply_rows(
            m.data, d, d, t.i, t.j, t.c, t.s,
            1 if t.kind == REFLECTOR else 0, 0,
        )
    return m


# ---------------------------------------------------------------------------
# Persistence: EGT1 binary (little endian) and its JSON mirror.
#
# Layout: magic 'EGT1', u32 version=1, u32 d, u32 p, u32 g, u8 sigma_rule,
# g records of (u32 i, u32 j, f64 c, f64 s, u8 kind), p f64 weights.
# Indices are 1-based on disk, kind 0 is rotation, 1 reflector.

_EGT_MAGIC = b"EGT1"
_EGT_VERSION = 1
_HEADER = struct.Struct("<4sIIIIB")
_RECORD = struct.Struct("<IIddB")


def save_product(product, path):
    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(
                _EGT_MAGIC,
                _EGT_VERSION,
                product.d,
                product.p,
                product.g,
                SIGMA_RULES.index(product.sigma_rule),
            )
        )
        for t in product.transforms:
            fh.write(
                _RECORD.pack(
                    t.i + 1, t.j + 1, t.c, t.s, 1 if t.kind == REFLECTOR else 0
                )
            )
        payload = array("d", product.weights.values)
        if sys.byteorder == "big":
            payload.byteswap()
        fh.write(payload.tobytes())


def load_product(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise ValidationError(f"{path}: truncated header")
    magic, version, d, p, g, rule_code = _HEADER.unpack_from(blob, 0)
    if magic != _EGT_MAGIC:
        raise ValidationError(f"{path}: bad magic {magic!r}")
    if version != _EGT_VERSION:
        raise ValidationError(f"{path}: unsupported version {version}")
    if rule_code >= len(SIGMA_RULES):
        raise ValidationError(f"{path}: unknown sigma rule code {rule_code}")
    expected = _HEADER.size + g * _RECORD.size + 8 * p
    if len(blob) != expected:
        raise ValidationError(
            f"{path}: expected {expected} bytes, found {len(blob)}"
        )
    transforms = []
    off = _HEADER.size
    for _ in range(g):
        i, j, c, s, kind_code = _RECORD.unpack_from(blob, off)
        off += _RECORD.size
        if not (1 <= i < j <= d):
            raise ValidationError(f"{path}: bad index pair ({i}, {j}) for d={d}")
        if kind_code > 1:
            raise ValidationError(f"{path}: unknown transform kind {kind_code}")
        try:
            transforms.append(
                ExtendedGivens(
                    i - 1, j - 1, c, s, REFLECTOR if kind_code else ROTATION
                )
            )
        except ValidationError as exc:
            raise ValidationError(f"{path}: {exc}") from exc
    weights = array("d", blob[off : off + 8 * p])
    if sys.byteorder == "big":
        weights.byteswap()
    return GivensProduct(
        d, p, transforms, DiagonalWeights(d, p, weights), SIGMA_RULES[rule_code]
    )


def save_product_json(product, path):
    """Debugging mirror of the binary format with identical field names."""
    doc = {
        "magic": "EGT1",
        "version": _EGT_VERSION,
        "d": product.d,
        "p": product.p,
        "g": product.g,
        "sigma_rule": product.sigma_rule,
        "transforms": [
            {"i": t.i + 1, "j": t.j + 1, "c": t.c, "s": t.s, "kind": t.kind}
            for t in product.transforms
        ],
        "sigma_bar": list(product.weights.values),
    }
    with open(path, "w", encoding="ascii") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_product_json(path):
    with open(path, "r", encoding="ascii") as fh:
        doc = json.load(fh)
    try:
        if doc["magic"] != "EGT1" or doc["version"] != _EGT_VERSION:
            raise ValidationError(f"{path}: not an EGT1 JSON document")
        d, p = doc["d"], doc["p"]
        transforms = [
            ExtendedGivens(rec["i"] - 1, rec["j"] - 1, rec["c"], rec["s"], rec["kind"])
            for rec in doc["transforms"]
        ]
        if len(transforms) != doc["g"]:
            raise ValidationError(f"{path}: g does not match transform count")
        weights = DiagonalWeights(d, p, doc["sigma_bar"])
        return GivensProduct(d, p, transforms, weights, doc["sigma_rule"])
    except KeyError as exc:
        raise ValidationError(f"{path}: missing field {exc}") from exc
