# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: per-SNP logistic IRLS scan and greedy LD pruning.

Mirrors gwasdl._kernels._pure exactly (same update order, same clamps) so
the two backends agree to floating-point rounding.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, isnan, log, sqrt
from libc.stdlib cimport free, malloc

cnp.import_array()

cdef double ETA_CAP = 35.0
cdef double BETA_CAP = 15.0
cdef double MU_EPS = 1e-12

cdef enum:
    MAXP = 34  # intercept + dosage + up to 32 covariates


cdef inline double _sigmoid(double eta) nogil:
    if eta >= 0.0:
        return 1.0 / (1.0 + exp(-eta))
    cdef double e = exp(eta)
    return e / (1.0 + e)


cdef inline double _clamp(double x, double cap) nogil:
    if x > cap:
        return cap
    if x < -cap:
        return -cap
    return x


cdef int _cholesky(double* A, int p) nogil:
    """In-place lower Cholesky of a p x p row-major SPD matrix; -1 on failure."""
    cdef int i, j, k
    cdef double s
    for i in range(p):
        for j in range(i + 1):
            s = A[i * p + j]
            for k in range(j):
                s -= A[i * p + k] * A[j * p + k]
            if i == j:
                if s <= 0.0:
                    return -1
                A[i * p + i] = sqrt(s)
            else:
                A[i * p + j] = s / A[j * p + j]
    return 0


cdef void _cho_solve(double* L, double* b, double* x, int p) nogil:
    """Solve L L^T x = b given the lower factor L."""
    cdef int i, k
    cdef double s
    for i in range(p):
        s = b[i]
        for k in range(i):
            s -= L[i * p + k] * x[k]
        x[i] = s / L[i * p + i]
    for i in range(p - 1, -1, -1):
        s = x[i]
        for k in range(i + 1, p):
            s -= L[k * p + i] * x[k]
        x[i] = s / L[i * p + i]


cdef void _inv_diag(double* L, double* out, int p) nogil:
    """Diagonal of (L L^T)^-1: squared norms of forward solves of unit vectors."""
    cdef int i, j, k
    cdef double s, acc
    cdef double z[MAXP]
    for i in range(p):
        acc = 0.0
        for j in range(p):
            if j < i:
                z[j] = 0.0
                continue
            s = 1.0 if j == i else 0.0
            for k in range(i, j):
                s -= L[j * p + k] * z[k]
            z[j] = s / L[j * p + j]
            acc += z[j] * z[j]
        out[i] = acc


def logistic_scan(double[:, ::1] geno, double[::1] y, cov_obj,
                  int max_iter=25, double tol=1e-8, double ridge=1e-8):
    """Per-SNP logistic regression of y on [1, dosage, covariates].

    Same contract as the pure implementation: returns
    (beta (m, p), se (m, p), converged (m,), maf (m,), monomorphic (m,)).
    """
    cdef Py_ssize_t n = geno.shape[0]
    cdef Py_ssize_t m = geno.shape[1]
    cdef double[:, ::1] cov
    cdef int k
    if cov_obj is None:
        cov = np.empty((n, 0))
        k = 0
    else:
        cov = np.ascontiguousarray(cov_obj, dtype=np.float64)
        k = cov.shape[1]
    cdef int p = 2 + k
    if p > MAXP:
        raise ValueError(f"at most {MAXP - 2} covariates supported by the compiled scan")

    beta_arr = np.zeros((m, p))
    se_arr = np.full((m, p), np.inf)
    conv_arr = np.zeros(m, dtype=np.uint8)
    maf_arr = np.zeros(m)
    mono_arr = np.zeros(m, dtype=np.uint8)
    cdef double[:, ::1] beta = beta_arr
    cdef double[:, ::1] se = se_arr
    cdef cnp.uint8_t[::1] convv = conv_arr
    cdef double[::1] mafv = maf_arr
    cdef cnp.uint8_t[::1] monov = mono_arr

    cdef double* g = <double*> malloc(n * sizeof(double))
    cdef double* mu = <double*> malloc(n * sizeof(double))
    cdef double* H = <double*> malloc(p * p * sizeof(double))
    cdef double* grad = <double*> malloc(p * sizeof(double))
    cdef double* delta = <double*> malloc(p * sizeof(double))
    cdef double* bcur = <double*> malloc(p * sizeof(double))
    cdef double* diag = <double*> malloc(p * sizeof(double))
    if not (g and mu and H and grad and delta and bcur and diag):
        for buf in (g, mu, H, grad, delta, bcur, diag):
            if buf:
                free(buf)
        raise MemoryError()

    cdef Py_ssize_t j, i
    cdef int it, a, b, fail
    cdef double total, cnt, mean, gmin, gmax, freq
    cdef double eta, w, dev, dev_new, mx, yi, mi
    cdef bint separated, fitted

    with nogil:
        for j in range(m):
            # gather column, mean-impute, track observed frequency
            total = 0.0
            cnt = 0.0
            for i in range(n):
                g[i] = geno[i, j]
                if not isnan(g[i]):
                    total += g[i]
                    cnt += 1.0
            mean = total / cnt if cnt > 0.0 else 0.0
            gmin = mean
            gmax = mean
            for i in range(n):
                if isnan(g[i]):
                    g[i] = mean
                if g[i] < gmin:
                    gmin = g[i]
                if g[i] > gmax:
                    gmax = g[i]
            freq = mean / 2.0
            mafv[j] = freq if freq <= 1.0 - freq else 1.0 - freq
            if gmax == gmin:
                monov[j] = 1
                continue

            for a in range(p):
                bcur[a] = 0.0
            for i in range(n):
                mu[i] = 0.5
            dev = -2.0 * n * log(0.5)
            fitted = False

            for it in range(max_iter):
                # ridged information and score at current mu
                for a in range(p * p):
                    H[a] = 0.0
                for a in range(p):
                    grad[a] = 0.0
                for i in range(n):
                    w = mu[i] * (1.0 - mu[i])
                    yi = y[i] - mu[i]
                    H[0] += w
                    H[p + 1] += w * g[i] * g[i]
                    H[1] += w * g[i]
                    grad[0] += yi
                    grad[1] += yi * g[i]
                    for a in range(k):
                        H[(a + 2) * p] += w * cov[i, a]
                        H[(a + 2) * p + 1] += w * g[i] * cov[i, a]
                        grad[a + 2] += yi * cov[i, a]
                        for b in range(a + 1):
                            H[(a + 2) * p + b + 2] += w * cov[i, a] * cov[i, b]
                H[p] = H[1]
                for a in range(k):
                    H[a + 2] = H[(a + 2) * p]
                    H[p + a + 2] = H[(a + 2) * p + 1]
                    for b in range(a):
                        H[(b + 2) * p + a + 2] = H[(a + 2) * p + b + 2]
                for a in range(p):
                    H[a * p + a] += ridge

                fail = _cholesky(H, p)
                if fail:
                    break
                _cho_solve(H, grad, delta, p)
                for a in range(p):
                    bcur[a] += delta[a]

                # new state and deviance at the updated coefficients
                dev_new = 0.0
                for i in range(n):
                    eta = bcur[0] + bcur[1] * g[i]
                    for a in range(k):
                        eta += bcur[a + 2] * cov[i, a]
                    mu[i] = _sigmoid(_clamp(eta, ETA_CAP))
                    mi = mu[i]
                    if mi < MU_EPS:
                        mi = MU_EPS
                    elif mi > 1.0 - MU_EPS:
                        mi = 1.0 - MU_EPS
                    dev_new += y[i] * log(mi) + (1.0 - y[i]) * log(1.0 - mi)
                dev_new *= -2.0

                mx = 0.0
                for a in range(p):
                    if fabs(bcur[a]) > mx:
                        mx = fabs(bcur[a])
                separated = mx > BETA_CAP
                if separated:
                    fitted = True
                    break
                if fabs(dev_new - dev) < tol:
                    convv[j] = 1
                    fitted = True
                    dev = dev_new
                    break
                dev = dev_new
                fitted = True

            if not fitted:
                continue

            for a in range(p):
                beta[j, a] = bcur[a]

            # standard errors from the information at the final coefficients
            for a in range(p * p):
                H[a] = 0.0
            for i in range(n):
                w = mu[i] * (1.0 - mu[i])
                H[0] += w
                H[p + 1] += w * g[i] * g[i]
                H[1] += w * g[i]
                for a in range(k):
                    H[(a + 2) * p] += w * cov[i, a]
                    H[(a + 2) * p + 1] += w * g[i] * cov[i, a]
                    for b in range(a + 1):
                        H[(a + 2) * p + b + 2] += w * cov[i, a] * cov[i, b]
            H[p] = H[1]
            for a in range(k):
                H[a + 2] = H[(a + 2) * p]
                H[p + a + 2] = H[(a + 2) * p + 1]
                for b in range(a):
                    H[(b + 2) * p + a + 2] = H[(a + 2) * p + b + 2]
            for a in range(p):
                H[a * p + a] += ridge
            if _cholesky(H, p) == 0:
                _inv_diag(H, diag, p)
                for a in range(p):
                    se[j, a] = sqrt(diag[a]) if diag[a] > 0.0 else 0.0

    free(g); free(mu); free(H); free(grad); free(delta); free(bcur); free(diag)
    return beta_arr, se_arr, conv_arr.astype(bool), maf_arr, mono_arr.astype(bool)


def ld_prune_greedy(double[:, ::1] geno_t, double[::1] sumsq, double[::1] maf,
                    int window, int step, double r2_threshold):
    """Sliding-window greedy LD prune; same pair order and tie rules as the
    pure implementation. geno_t is (m, n): one centered SNP per row."""
    cdef Py_ssize_t m = geno_t.shape[0]
    cdef Py_ssize_t n = geno_t.shape[1]
    keep_arr = np.ones(m, dtype=np.uint8)
    cdef cnp.uint8_t[::1] keep = keep_arr
    cdef Py_ssize_t w = 0
    cdef Py_ssize_t w_end, a, b, i
    cdef double s, den

    with nogil:
        while w < m - 1:
            w_end = w + window
            if w_end > m:
                w_end = m
            for a in range(w, w_end - 1):
                if not keep[a]:
                    continue
                for b in range(a + 1, w_end):
                    if not keep[b]:
                        continue
                    den = sumsq[a] * sumsq[b]
                    if den <= 0.0:
                        continue
                    s = 0.0
                    for i in range(n):
                        s += geno_t[a, i] * geno_t[b, i]
                    if s * s > r2_threshold * den:
                        if maf[a] < maf[b]:
                            keep[a] = 0
                            break
                        keep[b] = 0
            w += step
    return keep_arr.astype(bool)
