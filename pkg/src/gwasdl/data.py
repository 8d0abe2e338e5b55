"""Cohort data model: genotypes, phenotypes, covariates, and splits.

A Cohort bundles a genotype matrix with variant/sample metadata, an optional
multi-disease phenotype table (missing labels allowed), and an optional
covariate table. Cohorts are treated as immutable after construction: every
transformation returns a new Cohort sharing nothing the caller can mutate
through us.

Conventions fixed here because everything downstream depends on them:

* dosage = expected count of the A1 allele, in [0, 2]; missing is NaN
* prob3  = per-SNP triple (P(0 copies), P(1 copy), P(2 copies)) of A1
* labels are 0.0 / 1.0 / NaN (missing)
* standardization uses the sample SD (ddof=1)
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DuplicateSampleId,
    HeaderMismatch,
    NoLabeledSamples,
    StratumTooSmall,
)
from .rng import make_rng

logger = logging.getLogger(__name__)

DOSAGE = "dosage"
PROB3 = "prob3"


@dataclass(frozen=True)
class Variant:
    """One SNP: identity, genomic placement, and allele labels."""

    id: str
    chromosome: int
    position_bp: int
    allele_a1: str
    allele_a2: str
    cm: float = 0.0


@dataclass(frozen=True)
class GenotypeMatrix:
    """Dense genotype array.

    ``values`` is (n_samples, n_snps) float64 for dosage encoding, or
    (n_samples, n_snps, 3) for prob3. Missing dosages are NaN; missing
    prob3 entries are NaN triples.
    """

    values: np.ndarray
    encoding: str = DOSAGE

    def __post_init__(self):
        v = self.values
        if self.encoding == DOSAGE:
            if v.ndim != 2:
                raise ValueError("dosage matrix must be 2-D")
            finite = v[np.isfinite(v)]
            if finite.size and (finite.min() < 0.0 or finite.max() > 2.0):
                raise ValueError("dosage values must lie in [0, 2]")
        elif self.encoding == PROB3:
            if v.ndim != 3 or v.shape[2] != 3:
                raise ValueError("prob3 matrix must be (n, m, 3)")
            finite_rows = np.isfinite(v).all(axis=2)
            probs = v[finite_rows]
            if probs.size:
                if probs.min() < -1e-9 or probs.max() > 1.0 + 1e-9:
                    raise ValueError("prob3 entries must lie in [0, 1]")
                sums = probs.sum(axis=1)
                if np.abs(sums - 1.0).max() > 1e-6:
                    raise ValueError("prob3 triples must sum to 1 within 1e-6")
        else:
            raise ValueError(f"unknown encoding {self.encoding!r}")

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_snps(self) -> int:
        return self.values.shape[1]

    def dosages(self) -> np.ndarray:
        """Expected A1 dosage (n, m), NaN where missing."""
        if self.encoding == DOSAGE:
            return self.values
        p = self.values
        return p[:, :, 1] + 2.0 * p[:, :, 2]

    def to_prob3(self) -> "GenotypeMatrix":
        """Hard-call dosages become one-hot triples; fractional dosages are
        split between the neighboring hard calls so the expectation is kept."""
        if self.encoding == PROB3:
            return self
        d = self.values
        n, m = d.shape
        out = np.zeros((n, m, 3))
        lo = np.clip(np.floor(d), 0, 2)
        frac = d - lo
        for k in range(3):
            out[:, :, k] = np.where(lo == k, 1.0 - frac, 0.0)
            if k > 0:
                out[:, :, k] += np.where(lo == k - 1, frac, 0.0)
        out[np.isnan(d)] = np.nan
        return GenotypeMatrix(out, PROB3)


@dataclass(frozen=True)
class PhenotypeTable:
    """Per-sample binary labels for up to a handful of diseases.

    ``labels`` is (n_samples, n_diseases) with entries 0.0, 1.0, or NaN.
    Per-disease cohorts differ in size, hence the missing-label mask.
    """

    disease_names: tuple
    labels: np.ndarray

    def __post_init__(self):
        if self.labels.ndim != 2 or self.labels.shape[1] != len(self.disease_names):
            raise ValueError("labels must be (n_samples, n_diseases)")
        finite = self.labels[np.isfinite(self.labels)]
        if finite.size and not np.isin(finite, (0.0, 1.0)).all():
            raise ValueError("labels must be 0, 1, or NaN")

    @property
    def n_samples(self) -> int:
        return self.labels.shape[0]

    def disease_index(self, disease: str) -> int:
        try:
            return self.disease_names.index(disease)
        except ValueError:
            raise KeyError(f"unknown disease {disease!r}") from None

    def observed_mask(self, disease: str) -> np.ndarray:
        return np.isfinite(self.labels[:, self.disease_index(disease)])

    def case_control_counts(self, disease: str):
        col = self.labels[:, self.disease_index(disease)]
        obs = col[np.isfinite(col)]
        return int((obs == 1.0).sum()), int((obs == 0.0).sum())


@dataclass(frozen=True)
class CovariateTable:
    """Age, sex, and K principal components, one row per sample.

    Column order is fixed: age, sex, pc1..pcK. ``constant_columns`` records
    columns that were constant when standardized (they become all zeros).
    """

    values: np.ndarray
    names: tuple
    constant_columns: tuple = ()

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != len(self.names):
            raise ValueError("covariate values must be (n_samples, n_columns)")
        if not np.isfinite(self.values).all():
            raise ValueError("covariates must not contain missing values")

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def age(self) -> np.ndarray:
        return self.values[:, self.names.index("age")]

    @property
    def sex(self) -> np.ndarray:
        return self.values[:, self.names.index("sex")]

    @property
    def n_pcs(self) -> int:
        return sum(1 for n in self.names if n.startswith("pc"))


@dataclass(frozen=True)
class Cohort:
    """The universal input record tying all per-sample tables together."""

    variants: tuple
    samples: tuple
    genotypes: GenotypeMatrix
    phenotypes: Optional[PhenotypeTable] = None
    covariates: Optional[CovariateTable] = None

    def __post_init__(self):
        n = len(self.samples)
        if self.genotypes.n_samples != n:
            raise ValueError("genotype rows != sample count")
        if self.genotypes.n_snps != len(self.variants):
            raise ValueError("genotype columns != variant count")
        if self.phenotypes is not None and self.phenotypes.n_samples != n:
            raise ValueError("phenotype rows != sample count")
        if self.covariates is not None and self.covariates.n_samples != n:
            raise ValueError("covariate rows != sample count")
        ids = [v.id for v in self.variants]
        if len(set(ids)) != len(ids):
            raise ValueError("variant ids must be unique within a cohort")

    @property
    def n_samples(self) -> int:
        return len(self.samples)

    @property
    def n_snps(self) -> int:
        return len(self.variants)

    @property
    def chromosome_boundaries(self) -> tuple:
        """Contiguous (chromosome, start, end) runs partitioning [0, n_snps)."""
        bounds = []
        start = 0
        for j in range(1, self.n_snps + 1):
            if j == self.n_snps or self.variants[j].chromosome != self.variants[start].chromosome:
                bounds.append((self.variants[start].chromosome, start, j))
                start = j
        return tuple(bounds)

    def subset_samples(self, indices: Sequence[int]) -> "Cohort":
        """New cohort restricted to the given sample rows (copies)."""
        idx = np.asarray(indices, dtype=np.intp)
        geno = GenotypeMatrix(self.genotypes.values[idx].copy(), self.genotypes.encoding)
        phen = None
        if self.phenotypes is not None:
            phen = PhenotypeTable(self.phenotypes.disease_names, self.phenotypes.labels[idx].copy())
        cov = None
        if self.covariates is not None:
            cov = CovariateTable(
                self.covariates.values[idx].copy(),
                self.covariates.names,
                self.covariates.constant_columns,
            )
        return Cohort(self.variants, tuple(self.samples[i] for i in idx), geno, phen, cov)

    def subset_snps(self, snp_indices: Sequence[int]) -> "Cohort":
        """New cohort restricted to the given SNP columns (copies)."""
        idx = np.asarray(snp_indices, dtype=np.intp)
        vals = self.genotypes.values[:, idx].copy()
        geno = GenotypeMatrix(vals, self.genotypes.encoding)
        return replace(self, variants=tuple(self.variants[j] for j in idx), genotypes=geno)

    def select_diseases(self, names: Sequence[str]) -> "Cohort":
        if self.phenotypes is None:
            raise NoLabeledSamples("cohort has no phenotypes")
        cols = [self.phenotypes.disease_index(d) for d in names]
        phen = PhenotypeTable(tuple(names), self.phenotypes.labels[:, cols].copy())
        return replace(self, phenotypes=phen)

    def with_phenotypes(self, phenotypes: PhenotypeTable) -> "Cohort":
        return replace(self, phenotypes=phenotypes)

    def with_covariates(self, covariates: CovariateTable) -> "Cohort":
        return replace(self, covariates=covariates)


@dataclass(frozen=True)
class SplitSpec:
    """Deterministic train/test split recipe."""

    train_fraction: float = 0.8
    seed: int = 0
    stratify_by: str = "none"

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be in (0, 1)")


def allele_frequency(dosages: np.ndarray) -> np.ndarray:
    """Per-SNP A1 allele frequency over non-missing entries (NaN if all missing)."""
    with np.errstate(invalid="ignore"):
        return np.nanmean(dosages, axis=0) / 2.0


def minor_allele_frequency(dosages: np.ndarray) -> np.ndarray:
    freq = allele_frequency(dosages)
    return np.minimum(freq, 1.0 - freq)


def imputed_dosages(genotypes: GenotypeMatrix) -> np.ndarray:
    """Dense dosage matrix with missing entries replaced by the per-SNP mean
    (= 2 x allele frequency), the standard dense-GWAS imputation."""
    d = genotypes.dosages().copy()
    missing = np.isnan(d)
    if missing.any():
        with np.errstate(invalid="ignore"):
            col_mean = np.nanmean(d, axis=0)
        col_mean = np.where(np.isnan(col_mean), 0.0, col_mean)
        d[missing] = np.broadcast_to(col_mean, d.shape)[missing]
    return d


def load_phenotypes_covariates(cohort: Cohort, csv_path) -> Cohort:
    """Attach phenotypes and covariates from a CSV to an existing cohort.

    Expected header: ``sample_id,label_<d1>,...,label_<dK>,age,sex,pc1,...,pcJ``
    with labels in {0, 1, NA}. Rows are matched to cohort samples by id;
    unmatched CSV rows are rejected (counted in the log) and cohort samples
    absent from the CSV are dropped (counted in the log).
    """
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise HeaderMismatch("empty CSV") from None
        rows = list(reader)

    header = [h.strip() for h in header]
    if not header or header[0] != "sample_id":
        raise HeaderMismatch("first column must be sample_id")
    label_cols = [h for h in header[1:] if h.startswith("label_")]
    rest = header[1 + len(label_cols):]
    if not label_cols:
        raise HeaderMismatch("no label_<disease> columns found")
    n_pcs = len(rest) - 2
    expected_rest = ["age", "sex"] + [f"pc{i}" for i in range(1, n_pcs + 1)]
    if rest != expected_rest:
        raise HeaderMismatch(f"expected columns age,sex,pc1..pc{max(n_pcs, 0)}, got {rest}")

    diseases = tuple(h[len("label_"):] for h in label_cols)
    by_id = {}
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise HeaderMismatch(f"row {lineno} has {len(row)} fields, expected {len(header)}")
        sid = row[0].strip()
        if sid in by_id:
            raise DuplicateSampleId(f"sample id {sid!r} appears twice in CSV")
        by_id[sid] = row

    keep_rows = []
    labels = []
    covs = []
    matched_ids = set()
    for i, sid in enumerate(cohort.samples):
        row = by_id.get(sid)
        if row is None:
            continue
        matched_ids.add(sid)
        keep_rows.append(i)
        lab = []
        for v in row[1:1 + len(diseases)]:
            v = v.strip()
            if v.upper() in ("NA", "NAN", ""):
                lab.append(np.nan)
            elif v in ("0", "1"):
                lab.append(float(v))
            else:
                raise HeaderMismatch(f"label value {v!r} not in {{0, 1, NA}}")
        labels.append(lab)
        covs.append([float(v) for v in row[1 + len(diseases):]])

    n_unmatched_csv = len(by_id) - len(matched_ids)
    n_dropped_samples = cohort.n_samples - len(keep_rows)
    if n_unmatched_csv:
        logger.warning("rejected %d CSV rows with no matching sample", n_unmatched_csv)
    if n_dropped_samples:
        logger.warning("dropped %d samples absent from the CSV", n_dropped_samples)

    labels = np.asarray(labels, dtype=np.float64).reshape(len(keep_rows), len(diseases))
    if not np.isfinite(labels).any():
        raise NoLabeledSamples("every label in the CSV is missing")
    unusable = [d for k, d in enumerate(diseases) if not np.isfinite(labels[:, k]).any()]
    if unusable:
        logger.warning("diseases with no observed labels (unusable): %s", ", ".join(unusable))

    cov_names = ("age", "sex") + tuple(f"pc{i}" for i in range(1, n_pcs + 1))
    cov_table = CovariateTable(np.asarray(covs, dtype=np.float64).reshape(len(keep_rows), len(cov_names)), cov_names)
    phen = PhenotypeTable(diseases, labels)
    base = cohort.subset_samples(keep_rows)
    return base.with_phenotypes(phen).with_covariates(cov_table)


def _allocate_train_counts(sizes, train_fraction, total_target):
    """Largest-remainder allocation of train slots across strata.

    Gives each stratum floor/ceil of its proportional share and makes the
    grand total exactly ``total_target``.
    """
    raw = [s * train_fraction for s in sizes]
    base = [min(int(math.floor(r)), s) for r, s in zip(raw, sizes)]
    remaining = total_target - sum(base)
    order = sorted(range(len(sizes)), key=lambda i: (-(raw[i] - math.floor(raw[i])), i))
    k = 0
    while remaining > 0 and k < len(order):
        i = order[k]
        if base[i] < sizes[i]:
            base[i] += 1
            remaining -= 1
        k += 1
    return base


def split_cohort(cohort: Cohort, spec: SplitSpec):
    """Deterministic train/test split; returns sorted index arrays.

    Stratified splits preserve the case fraction of the stratifying disease
    within one sample per stratum; |train| is exactly
    floor(train_fraction * n_samples).
    """
    n = cohort.n_samples
    rng = make_rng(spec.seed)
    target = int(math.floor(spec.train_fraction * n))

    if spec.stratify_by == "none":
        perm = rng.permutation(n)
        train = np.sort(perm[:target])
        test = np.sort(perm[target:])
        return train, test

    if cohort.phenotypes is None:
        raise NoLabeledSamples("cannot stratify: cohort has no phenotypes")
    col = cohort.phenotypes.labels[:, cohort.phenotypes.disease_index(spec.stratify_by)]
    cases = np.flatnonzero(col == 1.0)
    controls = np.flatnonzero(col == 0.0)
    unlabeled = np.flatnonzero(~np.isfinite(col))
    if len(cases) < 2 or len(controls) < 2:
        raise StratumTooSmall(
            f"stratifying on {spec.stratify_by!r} needs >=2 cases and >=2 controls"
        )

    strata = [s for s in (cases, controls, unlabeled) if len(s)]
    counts = _allocate_train_counts([len(s) for s in strata], spec.train_fraction, target)
    train_parts, test_parts = [], []
    for stratum, k in zip(strata, counts):
        perm = stratum[rng.permutation(len(stratum))]
        train_parts.append(perm[:k])
        test_parts.append(perm[k:])
    train = np.sort(np.concatenate(train_parts))
    test = np.sort(np.concatenate(test_parts))
    return train, test


def standardize_covariates(cohort: Cohort) -> Cohort:
    """Mean-0, sample-SD-1 covariate columns; constant columns become zeros
    and are flagged on the returned table. Idempotent."""
    if cohort.covariates is None:
        raise ValueError("cohort has no covariates to standardize")
    values = cohort.covariates.values
    mean = values.mean(axis=0)
    sd = values.std(axis=0, ddof=1) if values.shape[0] > 1 else np.zeros(values.shape[1])
    constant = sd == 0.0
    out = np.zeros_like(values, dtype=np.float64)
    nz = ~constant
    out[:, nz] = (values[:, nz] - mean[nz]) / sd[nz]
    flagged = tuple(n for n, c in zip(cohort.covariates.names, constant) if c)
    if flagged:
        logger.warning("constant covariate columns set to zero: %s", ", ".join(flagged))
    table = CovariateTable(out, cohort.covariates.names, flagged)
    return cohort.with_covariates(table)


def standardized_covariate_matrix(cohort: Cohort) -> np.ndarray:
    """Convenience: standardized covariate values (no cohort mutation)."""
    return standardize_covariates(cohort).covariates.values
