"""Pure-numpy implementations of the hot kernels.

These are the fallback used when the compiled extension is unavailable, and
the reference the extension is tested against. Both backends implement the
same per-SNP algorithm in the same order, so results agree to rounding.

The per-SNP IRLS scan is batched across SNPs: every SNP keeps its own
Newton state and freezes independently (convergence, separation, or the
iteration cap), which matches fitting each SNP on its own.
"""

from __future__ import annotations

import numpy as np

# shared numerical conventions (also mirrored in the compiled kernel)
ETA_CAP = 35.0      # logit clamp; keeps exp() finite, weights stay > 0
BETA_CAP = 15.0     # |beta| beyond this is treated as separation
MU_EPS = 1e-12      # clip inside deviance logs


def _sigmoid(eta):
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _deviance(y, mu):
    m = np.clip(mu, MU_EPS, 1.0 - MU_EPS)
    return -2.0 * (y * np.log(m) + (1.0 - y) * np.log(1.0 - m)).sum(axis=0)


def prepare_columns(geno):
    """Mean-impute missing dosages in place-free fashion.

    Returns (imputed (n, m), allele_freq (m,), monomorphic (m,) bool).
    All-missing columns impute to 0 and are monomorphic.
    """
    g = np.array(geno, dtype=np.float64, copy=True)
    missing = np.isnan(g)
    if missing.any():
        with np.errstate(invalid="ignore"):
            col_mean = np.nanmean(g, axis=0)
        col_mean = np.where(np.isnan(col_mean), 0.0, col_mean)
        g[missing] = np.broadcast_to(col_mean, g.shape)[missing]
        freq = col_mean / 2.0
    else:
        freq = g.mean(axis=0) / 2.0
    mono = np.ptp(g, axis=0) == 0.0
    return g, freq, mono


def logistic_scan(geno, y, cov, max_iter=25, tol=1e-8, ridge=1e-8):
    """Per-SNP logistic regression of y on [1, dosage, covariates].

    Parameters
    ----------
    geno : (n, m) float64, NaN = missing (mean-imputed internally)
    y : (n,) float64 in {0, 1}
    cov : (n, k) float64 or None

    Returns
    -------
    beta : (m, p) coefficient matrix, columns [intercept, dosage, cov...]
    se : (m, p) Wald standard errors from the ridged information inverse
    converged : (m,) bool
    maf : (m,) minor allele frequency over non-missing entries
    monomorphic : (m,) bool (constant column: beta 0, se inf, not converged)
    """
    y = np.asarray(y, dtype=np.float64)
    n, m = geno.shape
    k = 0 if cov is None else cov.shape[1]
    p = 2 + k
    C = None if k == 0 else np.ascontiguousarray(cov, dtype=np.float64)

    G, freq, mono = prepare_columns(geno)
    maf = np.minimum(freq, 1.0 - freq)

    beta = np.zeros((m, p))
    se = np.full((m, p), np.inf)
    converged = np.zeros(m, dtype=bool)

    active = np.flatnonzero(~mono)
    if active.size == 0:
        return beta, se, converged, maf, mono

    dev = np.full(m, np.inf)
    # initial state: beta = 0 -> mu = 0.5 everywhere
    dev[active] = -2.0 * n * np.log(0.5)
    mu_act = np.full((n, active.size), 0.5)

    for _ in range(max_iter):
        idx = active
        if idx.size == 0:
            break
        Ga = G[:, idx]
        w = mu_act * (1.0 - mu_act)
        r = y[:, None] - mu_act

        delta = _solve_batched(Ga, C, w, r, ridge)
        beta[idx] += delta

        eta = _eta(Ga, C, beta[idx])
        mu_act = _sigmoid(np.clip(eta, -ETA_CAP, ETA_CAP))
        dev_new = _deviance(y[:, None], mu_act)

        separated = np.abs(beta[idx]).max(axis=1) > BETA_CAP
        done_ok = ~separated & (np.abs(dev_new - dev[idx]) < tol)
        dev[idx] = dev_new
        converged[idx[done_ok]] = True

        frozen = separated | done_ok
        active = idx[~frozen]
        mu_act = mu_act[:, ~frozen]

    # final standard errors at each SNP's final beta
    live = np.flatnonzero(~mono)
    Gl = G[:, live]
    eta = _eta(Gl, C, beta[live])
    mu = _sigmoid(np.clip(eta, -ETA_CAP, ETA_CAP))
    w = mu * (1.0 - mu)
    H = _hessian_batched(Gl, C, w, ridge)
    diag = np.diagonal(np.linalg.inv(H), axis1=1, axis2=2)
    se[live] = np.sqrt(np.maximum(diag, 0.0))
    return beta, se, converged, maf, mono


def _eta(Ga, C, beta):
    eta = beta[:, 0][None, :] + Ga * beta[:, 1][None, :]
    if C is not None:
        eta = eta + C @ beta[:, 2:].T
    return eta


def _hessian_batched(Ga, C, w, ridge):
    """(m, p, p) ridged information matrices for designs [1, g, C]."""
    mloc = Ga.shape[1]
    k = 0 if C is None else C.shape[1]
    p = 2 + k
    H = np.empty((mloc, p, p))
    sw = w.sum(axis=0)
    swg = (w * Ga).sum(axis=0)
    swgg = (w * Ga * Ga).sum(axis=0)
    H[:, 0, 0] = sw
    H[:, 0, 1] = H[:, 1, 0] = swg
    H[:, 1, 1] = swgg
    if k:
        swc = w.T @ C                       # (m, k)
        swgc = (w * Ga).T @ C               # (m, k)
        H[:, 0, 2:] = swc
        H[:, 2:, 0] = swc
        H[:, 1, 2:] = swgc
        H[:, 2:, 1] = swgc
        H[:, 2:, 2:] = np.einsum("ij,ia,ib->jab", w, C, C, optimize=True)
    H[:, np.arange(p), np.arange(p)] += ridge
    return H


def _solve_batched(Ga, C, w, r, ridge):
    """Newton step solve per SNP; closed form when there are no covariates."""
    g0 = r.sum(axis=0)
    g1 = (Ga * r).sum(axis=0)
    if C is None:
        a = w.sum(axis=0) + ridge
        b = (w * Ga).sum(axis=0)
        c = (w * Ga * Ga).sum(axis=0) + ridge
        det = a * c - b * b
        d0 = (c * g0 - b * g1) / det
        d1 = (a * g1 - b * g0) / det
        return np.stack([d0, d1], axis=1)
    H = _hessian_batched(Ga, C, w, ridge)
    grad = np.concatenate([g0[:, None], g1[:, None], r.T @ C], axis=1)
    return np.linalg.solve(H, grad)


def ld_prune_greedy(geno_t, sumsq, maf, window, step, r2_threshold):
    """Sliding-window greedy LD prune on centered SNP-major dosages.

    geno_t : (m, n) float64, each row a mean-imputed, centered SNP
    sumsq : (m,) row sums of squares
    Within each window, pairs are visited in (a, b) lexicographic order;
    when r^2 exceeds the threshold the lower-MAF member is removed (ties
    remove the larger index). Monomorphic rows (sumsq 0) never count as
    correlated. Returns a boolean keep mask.
    """
    m = geno_t.shape[0]
    keep = np.ones(m, dtype=bool)
    w = 0
    while w < m - 1:
        w_end = min(w + window, m)
        block = geno_t[w:w_end]
        S = block @ block.T
        for a in range(w, w_end - 1):
            if not keep[a]:
                continue
            for b in range(a + 1, w_end):
                if not keep[b]:
                    continue
                den = sumsq[a] * sumsq[b]
                if den <= 0.0:
                    continue
                s = S[a - w, b - w]
                if s * s > r2_threshold * den:
                    if maf[a] < maf[b]:
                        keep[a] = False
                        break
                    keep[b] = False
        w += step
    return keep
