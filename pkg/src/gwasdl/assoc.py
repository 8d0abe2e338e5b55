"""Classical GWAS machinery.

Logistic regression fitted by ridge-stabilized IRLS with Wald tests, the
per-SNP genome scan, PLINK-style sliding-window LD pruning, and genotype
PCA by power iteration. The scan and prune inner loops live in
``gwasdl._kernels`` (compiled when available).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from . import _kernels
from ._kernels import BETA_CAP, ETA_CAP, MU_EPS
from .data import Cohort, imputed_dosages, minor_allele_frequency, standardized_covariate_matrix
from .errors import ConvergenceFailure, DegenerateLabels, SingularSystem
from .rng import make_rng

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# internal seed for power-iteration start vectors; fixed so PCA is a pure
# function of its inputs
_PCA_SEED = 0x9E3779B9


@dataclass(frozen=True)
class IrlsConfig:
    """Knobs for the IRLS fitter; defaults suit per-SNP scans."""

    max_iter: int = 25
    tol: float = 1e-8
    ridge: float = 1e-8

    def __post_init__(self):
        if self.max_iter <= 0 or self.tol <= 0.0 or self.ridge <= 0.0:
            raise ValueError("IrlsConfig fields must be positive")


@dataclass(frozen=True)
class VariantStats:
    """Per-SNP association summary from a genome scan."""

    snp_index: int
    beta: float
    se: float
    wald_z: float
    p_value: float
    maf: float
    converged: bool


# ---------------------------------------------------------------------------
# standard normal survival function
# ---------------------------------------------------------------------------

_SF_SWITCH = 3.0
_SERIES_TERMS = 64
_CF_MAX_TERMS = 256
_TINY = 1e-300


def _sf_series(z):
    """Q(z) = 1/2 - phi(z) * sum z^(2k+1) / (1*3*...*(2k+1)), for 0 <= z < 3.

    Power series for the normal CDF about 0 (Abramowitz & Stegun 26.2.11).
    """
    term = np.array(z, dtype=np.float64, copy=True)
    acc = term.copy()
    for k in range(1, _SERIES_TERMS):
        term = term * z * z / (2.0 * k + 1.0)
        acc += term
    phi = _INV_SQRT_2PI * np.exp(-0.5 * z * z)
    return 0.5 - phi * acc


def _sf_contfrac(z):
    """Q(z) = phi(z) / (z + 1/(z + 2/(z + 3/...))), for z >= 3.

    Mills-ratio continued fraction (Abramowitz & Stegun 26.2.14), evaluated
    bottom-up with the modified Lentz recurrence.
    """
    z = np.asarray(z, dtype=np.float64)
    f = np.where(z == 0.0, _TINY, z)
    c = np.full_like(f, 1.0 / _TINY)
    d = np.zeros_like(f)
    done = np.zeros(f.shape, dtype=bool)
    for k in range(1, _CF_MAX_TERMS):
        a = float(k)
        d_new = z + a * d
        d_new = np.where(np.abs(d_new) < _TINY, _TINY, d_new)
        c_new = z + a / c
        c_new = np.where(np.abs(c_new) < _TINY, _TINY, c_new)
        d = 1.0 / d_new
        delta = c_new * d
        f = np.where(done, f, f * delta)
        done |= np.abs(delta - 1.0) < 1e-16
        c = c_new
        if done.all():
            break
    phi = _INV_SQRT_2PI * np.exp(-0.5 * z * z)
    return phi / f


def normal_sf(z):
    """Standard normal survival function P(Z > z), |relative error| < 1e-13.

    Series branch below z = 3, continued-fraction branch above; negative
    arguments use the exact reflection 1 - Q(-z). Accepts scalars or arrays.
    """
    z_arr = np.asarray(z, dtype=np.float64)
    scalar = z_arr.ndim == 0
    z_arr = np.atleast_1d(z_arr)
    a = np.abs(z_arr)
    out = np.empty_like(a)
    small = a < _SF_SWITCH
    if small.any():
        out[small] = _sf_series(a[small])
    if (~small).any():
        out[~small] = _sf_contfrac(a[~small])
    out = np.where(z_arr < 0.0, 1.0 - out, out)
    return float(out[0]) if scalar else out


def wald_p(z):
    """Two-sided Wald p-value: erfc(|z| / sqrt(2)) = 2 * normal_sf(|z|)."""
    return np.minimum(2.0 * normal_sf(np.abs(z)), 1.0)


# ---------------------------------------------------------------------------
# logistic regression by IRLS
# ---------------------------------------------------------------------------

def _sigmoid(eta):
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _deviance(y, mu):
    m = np.clip(mu, MU_EPS, 1.0 - MU_EPS)
    return -2.0 * float((y * np.log(m) + (1.0 - y) * np.log(1.0 - m)).sum())


def fit_logistic_irls(design_matrix, labels, config: IrlsConfig = IrlsConfig()):
    """Fit logistic regression by Newton/IRLS with a small ridge.

    Returns (beta, se, deviance, converged). Convergence is a deviance
    change below ``config.tol``; any |coefficient| above 15 is treated as
    separation and reported as converged=False.
    """
    X = np.asarray(design_matrix, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("design matrix and labels disagree")
    if (y == y[0]).all():
        raise DegenerateLabels("labels are all-case or all-control")

    n, p = X.shape
    beta = np.zeros(p)
    mu = np.full(n, 0.5)
    dev = -2.0 * n * math.log(0.5)
    converged = False

    for _ in range(config.max_iter):
        w = mu * (1.0 - mu)
        H = (X.T * w) @ X + config.ridge * np.eye(p)
        grad = X.T @ (y - mu)
        try:
            cho = scipy.linalg.cho_factor(H, lower=True)
        except scipy.linalg.LinAlgError:
            raise SingularSystem("IRLS normal equations not positive definite") from None
        beta = beta + scipy.linalg.cho_solve(cho, grad)

        mu = _sigmoid(np.clip(X @ beta, -ETA_CAP, ETA_CAP))
        dev_new = _deviance(y, mu)
        if np.abs(beta).max() > BETA_CAP:
            converged = False
            dev = dev_new
            break
        if abs(dev_new - dev) < config.tol:
            converged = True
            dev = dev_new
            break
        dev = dev_new

    w = mu * (1.0 - mu)
    H = (X.T * w) @ X + config.ridge * np.eye(p)
    try:
        cho = scipy.linalg.cho_factor(H, lower=True)
    except scipy.linalg.LinAlgError:
        raise SingularSystem("information matrix not positive definite") from None
    se = np.sqrt(np.diag(scipy.linalg.cho_solve(cho, np.eye(p))))
    return beta, se, dev, converged


# ---------------------------------------------------------------------------
# genome scan
# ---------------------------------------------------------------------------

def gwas_scan(
    cohort: Cohort,
    disease: str,
    use_covariates: bool = False,
    config: IrlsConfig = IrlsConfig(),
    threads: int = 1,
):
    """Per-SNP logistic scan of one disease; returns VariantStats in SNP order.

    Fits label ~ intercept + dosage (+ standardized covariates when
    requested) over the samples with a non-missing label. Missing dosages
    are mean-imputed. Monomorphic SNPs are reported unconverged with p = 1.
    """
    if cohort.phenotypes is None:
        raise DegenerateLabels("cohort has no phenotypes")
    col = cohort.phenotypes.labels[:, cohort.phenotypes.disease_index(disease)]
    rows = np.flatnonzero(np.isfinite(col))
    y = col[rows]
    if y.size == 0 or (y == y[0]).all():
        raise DegenerateLabels(f"{disease}: need at least one case and one control")

    geno = cohort.genotypes.dosages()[rows]
    cov = None
    if use_covariates:
        if cohort.covariates is None:
            raise ValueError("use_covariates=True but the cohort has no covariates")
        cov = standardized_covariate_matrix(cohort)[rows]

    geno = np.ascontiguousarray(geno, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    m = geno.shape[1]

    if threads <= 1 or m < 2 * threads:
        beta, se, conv, maf, mono = _kernels.logistic_scan(
            geno, y, cov, config.max_iter, config.tol, config.ridge
        )
    else:
        from concurrent.futures import ThreadPoolExecutor

        chunks = np.array_split(np.arange(m), threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [
                pool.submit(
                    _kernels.logistic_scan,
                    np.ascontiguousarray(geno[:, c]),
                    y,
                    cov,
                    config.max_iter,
                    config.tol,
                    config.ridge,
                )
                for c in chunks
            ]
            parts = [f.result() for f in futures]
        beta = np.concatenate([p[0] for p in parts])
        se = np.concatenate([p[1] for p in parts])
        conv = np.concatenate([p[2] for p in parts])
        maf = np.concatenate([p[3] for p in parts])
        mono = np.concatenate([p[4] for p in parts])

    b = beta[:, 1]
    s = se[:, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(np.isfinite(s) & (s > 0), b / np.where(s > 0, s, 1.0), 0.0)
    p = wald_p(z)
    p = np.where(mono, 1.0, p)
    return [
        VariantStats(
            snp_index=j,
            beta=float(b[j]),
            se=float(s[j]),
            wald_z=float(z[j]),
            p_value=float(p[j]),
            maf=float(maf[j]),
            converged=bool(conv[j]),
        )
        for j in range(m)
    ]


# ---------------------------------------------------------------------------
# LD pruning
# ---------------------------------------------------------------------------

def ld_prune(cohort: Cohort, window_snps: int = 50, step_snps: int = 5, r2_threshold: float = 0.5):
    """PLINK-style greedy window prune; returns the retained SNP indices.

    Within each window, every still-retained pair with dosage r^2 above the
    threshold loses its lower-MAF member (ties drop the larger index).
    Deterministic; windows advance by ``step_snps``.
    """
    if cohort.n_samples < 2:
        raise ValueError("LD pruning needs at least two samples")
    if window_snps < 1 or step_snps < 1:
        raise ValueError("window and step must be >= 1")
    d = imputed_dosages(cohort.genotypes)
    maf = minor_allele_frequency(cohort.genotypes.dosages())
    maf = np.where(np.isnan(maf), 0.0, maf)
    centered = d - d.mean(axis=0)
    geno_t = np.ascontiguousarray(centered.T)
    sumsq = (geno_t * geno_t).sum(axis=1)
    keep = _kernels.ld_prune_greedy(
        geno_t, sumsq, np.ascontiguousarray(maf, dtype=np.float64),
        int(window_snps), int(step_snps), float(r2_threshold),
    )
    return [int(j) for j in np.flatnonzero(keep)]


def window_starts(n_snps: int, window_snps: int = 50, step_snps: int = 5):
    """Window start offsets used by ld_prune (exposed for post-hoc checks)."""
    out = []
    w = 0
    while w < n_snps - 1:
        out.append(w)
        w += step_snps
    return out


def dosage_r2(x: np.ndarray, y: np.ndarray) -> float:
    """Squared Pearson correlation of two dosage vectors (0 if either is constant)."""
    xc = x - x.mean()
    yc = y - y.mean()
    den = float((xc * xc).sum() * (yc * yc).sum())
    if den <= 0.0:
        return 0.0
    s = float((xc * yc).sum())
    return s * s / den


# ---------------------------------------------------------------------------
# genotype principal components
# ---------------------------------------------------------------------------

def compute_pcs(cohort: Cohort, k: int, max_iter: int = 1000, tol: float = 1e-9):
    """Top-k sample-space PCs of standardized dosages via power iteration.

    Works on S = Z Z^T / m with Z the per-SNP standardized (mean 0, sample
    SD 1) imputed dosage matrix. Components are deflated out one at a time;
    each column is unit norm with its largest-magnitude entry positive,
    ordered by descending eigenvalue.
    """
    n, m = cohort.n_samples, cohort.n_snps
    if not 1 <= k <= min(n, m):
        raise ValueError("k must be in [1, min(n_samples, n_snps)]")
    d = imputed_dosages(cohort.genotypes)
    mean = d.mean(axis=0)
    sd = d.std(axis=0, ddof=1)
    Z = np.where(sd > 0, (d - mean) / np.where(sd > 0, sd, 1.0), 0.0)
    S = (Z @ Z.T) / m

    rng = make_rng(_PCA_SEED)
    vecs = np.zeros((n, k))
    vals = np.zeros(k)
    for c in range(k):
        v = rng.standard_normal(n)
        v /= np.linalg.norm(v)
        lam = np.inf
        for _ in range(max_iter):
            u = S @ v
            for j in range(c):
                u -= vals[j] * (vecs[:, j] @ v) * vecs[:, j]
            norm = np.linalg.norm(u)
            if norm < 1e-30:
                raise ConvergenceFailure(f"component {c}: matrix rank below k")
            v_new = u / norm
            lam_new = float(v_new @ (S @ v_new) - sum(
                vals[j] * (vecs[:, j] @ v_new) ** 2 for j in range(c)
            ))
            v = v_new
            if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
                lam = lam_new
                break
            lam = lam_new
        else:
            raise ConvergenceFailure(f"component {c}: power iteration hit {max_iter} iterations")
        i_star = int(np.argmax(np.abs(v)))
        if v[i_star] < 0:
            v = -v
        vecs[:, c] = v
        vals[c] = lam

    order = np.argsort(-vals, kind="stable")
    return vecs[:, order], vals[order]
