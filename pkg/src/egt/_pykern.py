"""Pure Python numeric kernels.

Fallback twin of the compiled module ``egt._ckern``. Both expose the same
functions over flat column-major ``array('d')`` buffers (plus ``'i'``/``'B'``
index and flag buffers) and must produce bit-identical results: expression
structure is kept in lockstep with the compiled source, so keep the two files
in sync when editing either.

Nothing here validates shapes; callers in ``egt.matcore`` and friends own the
checks.
"""

from array import array
from math import cos, fabs, log, sin, sqrt

_MASK64 = (1 << 64) - 1
_INV53 = 1.0 / 9007199254740992.0  # 2^-53
_TWO_PI = 6.283185307179586


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & _MASK64


def _next_u64(state):
    """Advance a 4-word xoshiro256++ state, return the next 64-bit draw."""
    s0 = state[0]
    s1 = state[1]
    s2 = state[2]
    s3 = state[3]
    result = (_rotl((s0 + s3) & _MASK64, 23) + s0) & _MASK64
    t = (s1 << 17) & _MASK64
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = _rotl(s3, 45)
    state[0] = s0
    state[1] = s1
    state[2] = s2
    state[3] = s3
    return result


def fill_uniform(state, out, n):
    """n doubles in [0, 1) from the top 53 bits of each draw."""
    for i in range(n):
        out[i] = (_next_u64(state) >> 11) * _INV53


def fill_gaussian(state, out, n):
    """n standard normals via Box-Muller; odd n discards the spare sine."""
    i = 0
    while i < n:
        u1 = ((_next_u64(state) >> 11) + 1) * _INV53
        u2 = (_next_u64(state) >> 11) * _INV53
        r = sqrt(-2.0 * log(u1))
        t = _TWO_PI * u2
        out[i] = r * cos(t)
        i += 1
        if i < n:
            out[i] = r * sin(t)
            i += 1


def matmul(a, m, k, b, n, out):
    """out(m x n) = a(m x k) b(k x n), column-major, ascending-k accumulation."""
    for j in range(n):
        ob = j * m
        for i in range(m):
            out[ob + i] = 0.0
        bb = j * k
        for t in range(k):
            f = b[bb + t]
            ab = t * m
            for i in range(m):
                out[ob + i] += a[ab + i] * f


def matmul_ta(a, m, k, b, n, out):
    """out(k x n) = a(m x k)^T b(m x n); contiguous column dot products."""
    for c in range(n):
        bb = c * m
        for r in range(k):
            ab = r * m
            acc = 0.0
            for i in range(m):
                acc += a[ab + i] * b[bb + i]
            out[c * k + r] = acc


def frob_dist_sq(a, b, n):
    acc = 0.0
    for i in range(n):
        dlt = a[i] - b[i]
        acc += dlt * dlt
    return acc


def vec_sum(v, n):
    acc = 0.0
    for i in range(n):
        acc += v[i]
    return acc


def scale_columns(a, m, n, w):
    """Scale column c of a(m x n) by w[c]."""
    for c in range(n):
        f = w[c]
        base = c * m
        for i in range(m):
            a[base + i] *= f


def haar_q_inplace(a, d, q):
    """Householder QR of the Gaussian draw in ``a`` (destroyed), Haar Q in ``q``.

    The R diagonal signs are folded into Q, then columns are flipped so every
    diagonal entry of Q is nonnegative. Returns 0, or 1 + t if column t had an
    exactly zero pivot norm (caller redraws that column and retries).
    """
    rdiag = array("d", bytes(8 * d))
    beta = array("d", bytes(8 * d))
    for t in range(d):
        tb = t * d
        s = 0.0
        for i in range(t, d):
            s += a[tb + i] * a[tb + i]
        nrm = sqrt(s)
        if nrm == 0.0:
            return t + 1
        x0 = a[tb + t]
        sgn = 1.0 if x0 >= 0.0 else -1.0
        a[tb + t] = x0 + sgn * nrm
        rdiag[t] = -sgn * nrm
        vv = 0.0
        for i in range(t, d):
            vv += a[tb + i] * a[tb + i]
        beta[t] = 2.0 / vv
        for c in range(t + 1, d):
            cb = c * d
            w = 0.0
            for i in range(t, d):
                w += a[tb + i] * a[cb + i]
            f = beta[t] * w
            for i in range(t, d):
                a[cb + i] -= f * a[tb + i]
    for i in range(d * d):
        q[i] = 0.0
    for t in range(d):
        q[t * d + t] = 1.0
    for t in range(d - 1, -1, -1):
        tb = t * d
        bt = beta[t]
        for c in range(t, d):
            cb = c * d
            w = 0.0
            for i in range(t, d):
                w += a[tb + i] * q[cb + i]
            f = bt * w
            for i in range(t, d):
                q[cb + i] -= f * a[tb + i]
    for t in range(d):
        if rdiag[t] < 0.0:
            tb = t * d
            for i in range(d):
                q[tb + i] = -q[tb + i]
    for t in range(d):
        if q[t * d + t] < 0.0:
            tb = t * d
            for i in range(d):
                q[tb + i] = -q[tb + i]
    return 0


def jacobi_svd(a, m, n, v, s, max_sweeps, tol, resid):
    """One-sided Jacobi on a(m x n), m >= n: a becomes U, v the right factor.

    Cyclic sweeps rotate column pairs until every normalized off-diagonal Gram
    entry is at most tol. Writes singular values (unordered, nonnegative) to s,
    the worst entry of the last sweep to resid[0]; returns the sweep count or
    -1 when max_sweeps was not enough.
    """
    for i in range(n * n):
        v[i] = 0.0
    for t in range(n):
        v[t * n + t] = 1.0
    sweeps_done = -1
    off_max = 0.0
    for sweep in range(1, max_sweeps + 1):
        off_max = 0.0
        for i in range(n - 1):
            ib = i * m
            for j in range(i + 1, n):
                jb = j * m
                alpha = 0.0
                bta = 0.0
                gamma = 0.0
                for r in range(m):
                    ai = a[ib + r]
                    aj = a[jb + r]
                    alpha += ai * ai
                    bta += aj * aj
                    gamma += ai * aj
                if alpha == 0.0 or bta == 0.0:
                    continue
                rel = fabs(gamma) / sqrt(alpha * bta)
                if rel > off_max:
                    off_max = rel
                if rel <= tol:
                    continue
                zeta = (bta - alpha) / (2.0 * gamma)
                if zeta >= 0.0:
                    t = 1.0 / (zeta + sqrt(1.0 + zeta * zeta))
                else:
                    t = -1.0 / (-zeta + sqrt(1.0 + zeta * zeta))
                c = 1.0 / sqrt(1.0 + t * t)
                sn = c * t
                for r in range(m):
                    ai = a[ib + r]
                    aj = a[jb + r]
                    a[ib + r] = c * ai - sn * aj
                    a[jb + r] = sn * ai + c * aj
                vi = i * n
                vj = j * n
                for r in range(n):
                    xi = v[vi + r]
                    xj = v[vj + r]
                    v[vi + r] = c * xi - sn * xj
                    v[vj + r] = sn * xi + c * xj
        if off_max <= tol:
            sweeps_done = sweep
            break
    resid[0] = off_max
    if sweeps_done < 0:
        return -1
    for j in range(n):
        jb = j * m
        acc = 0.0
        for r in range(m):
            acc += a[jb + r] * a[jb + r]
        nrm = sqrt(acc)
        s[j] = nrm
        if nrm > 0.0:
            inv = 1.0 / nrm
            for r in range(m):
                a[jb + r] *= inv
    return sweeps_done


def score_block(z11, z12, z21, z22, rot_only):
    """Alignment gain of the best transform on a 2x2 block: nuclear - trace."""
    su = z11 + z22
    dpp = z21 - z12
    rot_r = sqrt(su * su + dpp * dpp)
    if rot_only:
        return rot_r - su
    det = z11 * z22 - z12 * z21
    if det >= 0.0:
        return rot_r - su
    dm = z11 - z22
    sp = z12 + z21
    return sqrt(dm * dm + sp * sp) - su


def _row_dot(lbuf, nbuf, d, p, x, y):
    acc = 0.0
    for c in range(p):
        acc += lbuf[x + c * d] * nbuf[y + c * d]
    return acc


def block_dots(lbuf, nbuf, d, p, a, b):
    """The 2x2 block of Z = L N^T at rows/cols (a, b): (zaa, zab, zba, zbb)."""
    zaa = 0.0
    zab = 0.0
    zba = 0.0
    zbb = 0.0
    for c in range(p):
        base = c * d
        la = lbuf[a + base]
        lb = lbuf[b + base]
        na = nbuf[a + base]
        nb = nbuf[b + base]
        zaa += la * na
        zab += la * nb
        zba += lb * na
        zbb += lb * nb
    return zaa, zab, zba, zbb


def diag_dots(lbuf, nbuf, d, p, diag):
    for t in range(d):
        acc = 0.0
        for c in range(p):
            acc += lbuf[t + c * d] * nbuf[t + c * d]
        diag[t] = acc


def score_init(lbuf, nbuf, d, p, scores, diag, rot_only):
    """Fill all d(d-1)/2 pair scores and the Z diagonal from Z = L N^T."""
    diag_dots(lbuf, nbuf, d, p, diag)
    idx = 0
    for i in range(d - 1):
        for j in range(i + 1, d):
            z12 = _row_dot(lbuf, nbuf, d, p, i, j)
            z21 = _row_dot(lbuf, nbuf, d, p, j, i)
            scores[idx] = score_block(diag[i], z12, z21, diag[j], rot_only)
            idx += 1


def _pair_index(d, i, j):
    return (i * (2 * d - i - 1)) // 2 + (j - i - 1)


def _rescan_row(scores, d, rmv, rmc, r):
    if r >= d - 1:
        rmv[r] = float("-inf")
        rmc[r] = -1
        return
    base = _pair_index(d, r, r + 1)
    best = scores[base]
    bcol = r + 1
    for j in range(r + 2, d):
        val = scores[base + (j - r - 1)]
        if val > best:
            best = val
            bcol = j
    rmv[r] = best
    rmc[r] = bcol


def rowmax_rebuild(scores, d, rmv, rmc):
    for r in range(d):
        _rescan_row(scores, d, rmv, rmc, r)


def _bump_rowmax(scores, d, rmv, rmc, r, col, val):
    if val > rmv[r]:
        rmv[r] = val
        rmc[r] = col
    elif col == rmc[r]:
        if val < rmv[r]:
            _rescan_row(scores, d, rmv, rmc, r)
        else:
            rmv[r] = val
    elif val == rmv[r] and col < rmc[r]:
        rmc[r] = col


def refresh_scores(lbuf, nbuf, d, p, a, b, scores, diag, rmv, rmc, rot_only):
    """Recompute every pair score touching index a or b against current L, N.

    Maintains the Z diagonal cache and the per-row maximum structure; rows a
    and b are rescanned outright, other rows are patched incrementally.
    """
    if a > b:
        a, b = b, a
    diag[a] = _row_dot(lbuf, nbuf, d, p, a, a)
    diag[b] = _row_dot(lbuf, nbuf, d, p, b, b)
    for x in range(d):
        if x == a:
            continue
        i, j = (x, a) if x < a else (a, x)
        z12 = _row_dot(lbuf, nbuf, d, p, i, j)
        z21 = _row_dot(lbuf, nbuf, d, p, j, i)
        val = score_block(diag[i], z12, z21, diag[j], rot_only)
        scores[_pair_index(d, i, j)] = val
        if i != a and i != b:
            _bump_rowmax(scores, d, rmv, rmc, i, j, val)
    for x in range(d):
        if x == a or x == b:
            continue
        i, j = (x, b) if x < b else (b, x)
        z12 = _row_dot(lbuf, nbuf, d, p, i, j)
        z21 = _row_dot(lbuf, nbuf, d, p, j, i)
        val = score_block(diag[i], z12, z21, diag[j], rot_only)
        scores[_pair_index(d, i, j)] = val
        if i != a and i != b:
            _bump_rowmax(scores, d, rmv, rmc, i, j, val)
    _rescan_row(scores, d, rmv, rmc, a)
    _rescan_row(scores, d, rmv, rmc, b)


def argmax_pair(rmv, rmc, d):
    """Lexicographically smallest maximizing pair, packed as i * d + j."""
    best = float("-inf")
    bi = -1
    for r in range(d):
        if rmc[r] >= 0 and rmv[r] > best:
            best = rmv[r]
            bi = r
    if bi < 0:
        return -1
    return bi * d + rmc[bi]


def apply_rows(mbuf, nrows, ncols, i, j, c, s, kind, transpose):
    """Left-multiply rows i, j of a column-major matrix by a 2x2 transform.

    kind 0 is the rotation [[c, -s], [s, c]], kind 1 the reflector
    [[c, s], [s, -c]] (symmetric, so transpose is a no-op for it).
    """
    if kind == 1:
        for col in range(ncols):
            base = col * nrows
            xi = mbuf[base + i]
            xj = mbuf[base + j]
            mbuf[base + i] = c * xi + s * xj
            mbuf[base + j] = s * xi - c * xj
    elif transpose:
        for col in range(ncols):
            base = col * nrows
            xi = mbuf[base + i]
            xj = mbuf[base + j]
            mbuf[base + i] = c * xi + s * xj
            mbuf[base + j] = c * xj - s * xi
    else:
        for col in range(ncols):
            base = col * nrows
            xi = mbuf[base + i]
            xj = mbuf[base + j]
            mbuf[base + i] = c * xi - s * xj
            mbuf[base + j] = s * xi + c * xj


def apply_product_vec(ii, jj, cc, ss, kk, g, x, transpose):
    """Apply the full transform product (or its transpose) to a vector.

    transpose=0 applies slot g first (the product acting on a vector);
    transpose=1 applies slot 1 first (the transposed product).
    """
    if transpose:
        for k in range(g):
            i = ii[k]
            j = jj[k]
            c = cc[k]
            s = ss[k]
            xi = x[i]
            xj = x[j]
            if kk[k] == 1:
                x[i] = c * xi + s * xj
                x[j] = s * xi - c * xj
            else:
                x[i] = c * xi + s * xj
                x[j] = c * xj - s * xi
    else:
        for k in range(g - 1, -1, -1):
            i = ii[k]
            j = jj[k]
            c = cc[k]
            s = ss[k]
            xi = x[i]
            xj = x[j]
            if kk[k] == 1:
                x[i] = c * xi + s * xj
                x[j] = s * xi - c * xj
            else:
                x[i] = c * xi - s * xj
                x[j] = s * xi + c * xj


def project_vec(ii, jj, cc, ss, kk, act, g, sigma, p, x, y):
    """Planned transposed pass over x, then the masked diagonal scaling into y.

    Action codes: 0 full update, 1 keep only row i, 2 keep only row j, 3 skip.
    Performs exactly 6*full + 3*half + p scalar multiply/adds.
    """
    for k in range(g):
        a = act[k]
        if a == 3:
            continue
        i = ii[k]
        j = jj[k]
        c = cc[k]
        s = ss[k]
        xi = x[i]
        xj = x[j]
        if kk[k] == 1:
            if a == 0:
                x[i] = c * xi + s * xj
                x[j] = s * xi - c * xj
            elif a == 1:
                x[i] = c * xi + s * xj
            else:
                x[j] = s * xi - c * xj
        else:
            if a == 0:
                x[i] = c * xi + s * xj
                x[j] = c * xj - s * xi
            elif a == 1:
                x[i] = c * xi + s * xj
            else:
                x[j] = c * xj - s * xi
    for t in range(p):
        y[t] = sigma[t] * x[t]


def project_batch(ii, jj, cc, ss, kk, act, g, sigma, p, xmat, d, n, ymat, scratch):
    """project_vec over every column of xmat(d x n) into ymat(p x n)."""
    for col in range(n):
        xb = col * d
        for r in range(d):
            scratch[r] = xmat[xb + r]
        yb = col * p
        for k in range(g):
            a = act[k]
            if a == 3:
                continue
            i = ii[k]
            j = jj[k]
            c = cc[k]
            s = ss[k]
            xi = scratch[i]
            xj = scratch[j]
            if kk[k] == 1:
                if a == 0:
                    scratch[i] = c * xi + s * xj
                    scratch[j] = s * xi - c * xj
                elif a == 1:
                    scratch[i] = c * xi + s * xj
                else:
                    scratch[j] = s * xi - c * xj
            else:
                if a == 0:
                    scratch[i] = c * xi + s * xj
                    scratch[j] = c * xj - s * xi
                elif a == 1:
                    scratch[i] = c * xi + s * xj
                else:
                    scratch[j] = c * xj - s * xi
        for t in range(p):
            ymat[yb + t] = sigma[t] * scratch[t]


def knn_predict(train, nt, test, ne, p, labels, k, pred):
    """Majority-vote k-NN; ties break toward smaller (distance, index, label)."""
    kk_ = k if k < nt else nt
    bd = array("d", bytes(8 * kk_))
    bi = array("i", bytes(4 * kk_))
    for e in range(ne):
        eb = e * p
        m = 0
        for t in range(nt):
            tb = t * p
            dist = 0.0
            for f in range(p):
                dlt = train[tb + f] - test[eb + f]
                dist += dlt * dlt
            if m < kk_:
                pos = m
                while pos > 0 and (bd[pos - 1] > dist):
                    bd[pos] = bd[pos - 1]
                    bi[pos] = bi[pos - 1]
                    pos -= 1
                bd[pos] = dist
                bi[pos] = t
                m += 1
            elif dist < bd[kk_ - 1]:
                pos = kk_ - 1
                while pos > 0 and (bd[pos - 1] > dist):
                    bd[pos] = bd[pos - 1]
                    bi[pos] = bi[pos - 1]
                    pos -= 1
                bd[pos] = dist
                bi[pos] = t
        best_label = -1
        best_count = -1
        for q in range(m):
            lab = labels[bi[q]]
            cnt = 0
            for w in range(m):
                if labels[bi[w]] == lab:
                    cnt += 1
            if cnt > best_count or (cnt == best_count and lab < best_label):
                best_count = cnt
                best_label = lab
        pred[e] = best_label
