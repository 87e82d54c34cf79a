# Compiled numeric kernels. Twin of egt._pykern: same functions, same
# expression structure (bit-identical results), C speed. Keep in sync.

from libc.math cimport cos, fabs, log, sin, sqrt, INFINITY
from libc.stdlib cimport free, malloc

ctypedef unsigned long long u64

cdef double _INV53 = 1.0 / 9007199254740992.0
cdef double _TWO_PI = 6.283185307179586


cdef inline u64 _rotl(u64 x, int k) nogil:
    return (x << k) | (x >> (64 - k))


cdef inline u64 _next_u64(u64[::1] state) nogil:
    cdef u64 s0 = state[0]
    cdef u64 s1 = state[1]
    cdef u64 s2 = state[2]
    cdef u64 s3 = state[3]
    cdef u64 result = _rotl(s0 + s3, 23) + s0
    cdef u64 t = s1 << 17
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


def fill_uniform(u64[::1] state, double[::1] out, int n):
    cdef int i
    with nogil:
        for i in range(n):
            out[i] = <double> (_next_u64(state) >> 11) * _INV53


def fill_gaussian(u64[::1] state, double[::1] out, int n):
    cdef int i = 0
    cdef double u1, u2, r, t
    with nogil:
        while i < n:
            u1 = <double> ((_next_u64(state) >> 11) + 1) * _INV53
            u2 = <double> (_next_u64(state) >> 11) * _INV53
            r = sqrt(-2.0 * log(u1))
            t = _TWO_PI * u2
            out[i] = r * cos(t)
            i += 1
            if i < n:
                out[i] = r * sin(t)
                i += 1


def matmul(double[::1] a, int m, int k, double[::1] b, int n, double[::1] out):
    cdef int i, j, t, ob, bb, ab
    cdef double f
    with nogil:
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


def matmul_ta(double[::1] a, int m, int k, double[::1] b, int n, double[::1] out):
    cdef int c, r, i, ab, bb
    cdef double acc
    with nogil:
        for c in range(n):
            bb = c * m
            for r in range(k):
                ab = r * m
                acc = 0.0
                for i in range(m):
                    acc += a[ab + i] * b[bb + i]
                out[c * k + r] = acc


def frob_dist_sq(double[::1] a, double[::1] b, int n):
    cdef double acc = 0.0
    cdef double dlt
    cdef int i
    with nogil:
        for i in range(n):
            dlt = a[i] - b[i]
            acc += dlt * dlt
    return acc


def vec_sum(double[::1] v, int n):
    cdef double acc = 0.0
    cdef int i
    with nogil:
        for i in range(n):
            acc += v[i]
    return acc


def scale_columns(double[::1] a, int m, int n, double[::1] w):
    cdef int c, i, base
    cdef double f
    with nogil:
        for c in range(n):
            f = w[c]
            base = c * m
            for i in range(m):
                a[base + i] *= f


def haar_q_inplace(double[::1] a, int d, double[::1] q):
    cdef double* rdiag = <double*> malloc(sizeof(double) * d)
    cdef double* beta = <double*> malloc(sizeof(double) * d)
    cdef int t, i, c, tb, cb, fail
    cdef double s, nrm, x0, sgn, vv, w, f, bt
    if rdiag == NULL or beta == NULL:
        free(rdiag)
        free(beta)
        raise MemoryError()
    fail = 0
    with nogil:
        for t in range(d):
            tb = t * d
            s = 0.0
            for i in range(t, d):
                s += a[tb + i] * a[tb + i]
            nrm = sqrt(s)
            if nrm == 0.0:
                fail = t + 1
                break
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
        if fail == 0:
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
    free(rdiag)
    free(beta)
    return fail


def jacobi_svd(double[::1] a, int m, int n, double[::1] v, double[::1] s,
               int max_sweeps, double tol, double[::1] resid):
    cdef int i, j, r, sweep, ib, jb, vi, vj
    cdef int sweeps_done = -1
    cdef double off_max = 0.0
    cdef double alpha, bta, gamma, rel, zeta, t, c, sn, ai, aj, xi, xj, acc, nrm, inv
    with nogil:
        for i in range(n * n):
            v[i] = 0.0
        for i in range(n):
            v[i * n + i] = 1.0
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
        if sweeps_done >= 0:
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
    if sweeps_done < 0:
        return -1
    return sweeps_done


cdef inline double _score_block(double z11, double z12, double z21, double z22,
                                int rot_only) nogil:
    cdef double su = z11 + z22
    cdef double dpp = z21 - z12
    cdef double rot_r = sqrt(su * su + dpp * dpp)
    cdef double det, dm, sp
    if rot_only:
        return rot_r - su
    det = z11 * z22 - z12 * z21
    if det >= 0.0:
        return rot_r - su
    dm = z11 - z22
    sp = z12 + z21
    return sqrt(dm * dm + sp * sp) - su


def score_block(double z11, double z12, double z21, double z22, int rot_only):
    return _score_block(z11, z12, z21, z22, rot_only)


cdef inline double _row_dot(double[::1] lbuf, double[::1] nbuf, int d, int p,
                            int x, int y) nogil:
    cdef double acc = 0.0
    cdef int c
    for c in range(p):
        acc += lbuf[x + c * d] * nbuf[y + c * d]
    return acc


def block_dots(double[::1] lbuf, double[::1] nbuf, int d, int p, int a, int b):
    cdef double zaa = 0.0
    cdef double zab = 0.0
    cdef double zba = 0.0
    cdef double zbb = 0.0
    cdef double la, lb, na, nb
    cdef int c, base
    with nogil:
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


def diag_dots(double[::1] lbuf, double[::1] nbuf, int d, int p, double[::1] diag):
    cdef int t
    with nogil:
        for t in range(d):
            diag[t] = _row_dot(lbuf, nbuf, d, p, t, t)


def score_init(double[::1] lbuf, double[::1] nbuf, int d, int p,
               double[::1] scores, double[::1] diag, int rot_only):
    cdef int i, j, t, idx
    cdef double z12, z21
    with nogil:
        for t in range(d):
            diag[t] = _row_dot(lbuf, nbuf, d, p, t, t)
        idx = 0
        for i in range(d - 1):
            for j in range(i + 1, d):
                z12 = _row_dot(lbuf, nbuf, d, p, i, j)
                z21 = _row_dot(lbuf, nbuf, d, p, j, i)
                scores[idx] = _score_block(diag[i], z12, z21, diag[j], rot_only)
                idx += 1


cdef inline int _pair_index(int d, int i, int j) nogil:
    return (i * (2 * d - i - 1)) // 2 + (j - i - 1)


cdef void _rescan_row(double[::1] scores, int d, double[::1] rmv, int[::1] rmc,
                      int r) nogil:
    cdef int base, j, bcol
    cdef double best, val
    if r >= d - 1:
        rmv[r] = -INFINITY
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


def rowmax_rebuild(double[::1] scores, int d, double[::1] rmv, int[::1] rmc):
    cdef int r
    with nogil:
        for r in range(d):
            _rescan_row(scores, d, rmv, rmc, r)


cdef inline void _bump_rowmax(double[::1] scores, int d, double[::1] rmv,
                              int[::1] rmc, int r, int col, double val) nogil:
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


def refresh_scores(double[::1] lbuf, double[::1] nbuf, int d, int p, int a, int b,
                   double[::1] scores, double[::1] diag, double[::1] rmv,
                   int[::1] rmc, int rot_only):
    cdef int x, i, j, tmp
    cdef double z12, z21, val
    if a > b:
        tmp = a
        a = b
        b = tmp
    with nogil:
        diag[a] = _row_dot(lbuf, nbuf, d, p, a, a)
        diag[b] = _row_dot(lbuf, nbuf, d, p, b, b)
        for x in range(d):
            if x == a:
                continue
            if x < a:
                i = x
                j = a
            else:
                i = a
                j = x
            z12 = _row_dot(lbuf, nbuf, d, p, i, j)
            z21 = _row_dot(lbuf, nbuf, d, p, j, i)
            val = _score_block(diag[i], z12, z21, diag[j], rot_only)
            scores[_pair_index(d, i, j)] = val
            if i != a and i != b:
                _bump_rowmax(scores, d, rmv, rmc, i, j, val)
        for x in range(d):
            if x == a or x == b:
                continue
            if x < b:
                i = x
                j = b
            else:
                i = b
                j = x
            z12 = _row_dot(lbuf, nbuf, d, p, i, j)
            z21 = _row_dot(lbuf, nbuf, d, p, j, i)
            val = _score_block(diag[i], z12, z21, diag[j], rot_only)
            scores[_pair_index(d, i, j)] = val
            if i != a and i != b:
                _bump_rowmax(scores, d, rmv, rmc, i, j, val)
        _rescan_row(scores, d, rmv, rmc, a)
        _rescan_row(scores, d, rmv, rmc, b)


def argmax_pair(double[::1] rmv, int[::1] rmc, int d):
    cdef double best = -INFINITY
    cdef int bi = -1
    cdef int r
    with nogil:
        for r in range(d):
            if rmc[r] >= 0 and rmv[r] > best:
                best = rmv[r]
                bi = r
    if bi < 0:
        return -1
    return bi * d + rmc[bi]


def apply_rows(double[::1] mbuf, int nrows, int ncols, int i, int j,
               double c, double s, int kind, int transpose):
    cdef int col, base
    cdef double xi, xj
    with nogil:
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


def apply_product_vec(int[::1] ii, int[::1] jj, double[::1] cc, double[::1] ss,
                      unsigned char[::1] kk, int g, double[::1] x, int transpose):
    cdef int k, i, j
    cdef double c, s, xi, xj
    with nogil:
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


cdef inline void _project_core(int[::1] ii, int[::1] jj, double[::1] cc,
                               double[::1] ss, unsigned char[::1] kk,
                               unsigned char[::1] act, int g, double[::1] sigma,
                               int p, double[::1] x, double[::1] y, int ybase) nogil:
    cdef int k, i, j, a, t
    cdef double c, s, xi, xj
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
        y[ybase + t] = sigma[t] * x[t]


def project_vec(int[::1] ii, int[::1] jj, double[::1] cc, double[::1] ss,
                unsigned char[::1] kk, unsigned char[::1] act, int g,
                double[::1] sigma, int p, double[::1] x, double[::1] y):
    with nogil:
        _project_core(ii, jj, cc, ss, kk, act, g, sigma, p, x, y, 0)


def project_batch(int[::1] ii, int[::1] jj, double[::1] cc, double[::1] ss,
                  unsigned char[::1] kk, unsigned char[::1] act, int g,
                  double[::1] sigma, int p, double[::1] xmat, int d, int n,
                  double[::1] ymat, double[::1] scratch):
    cdef int col, r, xb
    with nogil:
        for col in range(n):
            xb = col * d
            for r in range(d):
                scratch[r] = xmat[xb + r]
            _project_core(ii, jj, cc, ss, kk, act, g, sigma, p, scratch,
                          ymat, col * p)


def knn_predict(double[::1] train, int nt, double[::1] test, int ne, int p,
                int[::1] labels, int k, int[::1] pred):
    cdef int kk_ = k if k < nt else nt
    cdef double* bd = <double*> malloc(sizeof(double) * kk_)
    cdef int* bi = <int*> malloc(sizeof(int) * kk_)
    cdef int e, t, f, m, pos, q, w, eb, tb, lab, cnt, best_label, best_count
    cdef double dist, dlt
    if bd == NULL or bi == NULL:
        free(bd)
        free(bi)
        raise MemoryError()
    with nogil:
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
                    while pos > 0 and bd[pos - 1] > dist:
                        bd[pos] = bd[pos - 1]
                        bi[pos] = bi[pos - 1]
                        pos -= 1
                    bd[pos] = dist
                    bi[pos] = t
                    m += 1
                elif dist < bd[kk_ - 1]:
                    pos = kk_ - 1
                    while pos > 0 and bd[pos - 1] > dist:
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
    free(bd)
    free(bi)
