"""PLINK .bed/.bim/.fam reading and writing.

Only the SNP-major binary layout is supported (mode byte 0x01). Each SNP
occupies ceil(n_samples / 4) bytes; within a byte, samples are packed from
the low-order bits up. The 2-bit codes count A1 alleles:

    00 -> dosage 2.0 (homozygous A1)
    01 -> missing
    10 -> dosage 1.0 (heterozygous)
    11 -> dosage 0.0 (homozygous A2)

Variants are sorted by (chromosome, position) after load, with genotype
columns reordered to match.
"""

from __future__ import annotations

import os

import numpy as np

from .data import DOSAGE, Cohort, GenotypeMatrix, Variant
from .errors import (
    BadMagic,
    MalformedBim,
    MalformedFam,
    NonIntegralDosage,
    SampleMajorUnsupported,
    TruncatedPayload,
)

_MAGIC = bytes([0x6C, 0x1B])
_SNP_MAJOR = 0x01
_SAMPLE_MAJOR = 0x00

# code -> dosage for the four 2-bit values
_CODE_TO_DOSAGE = np.array([2.0, np.nan, 1.0, 0.0])

# byte -> four dosages (low-order sample first), built once
_BYTE_LUT = np.array(
    [[_CODE_TO_DOSAGE[(b >> (2 * s)) & 0b11] for s in range(4)] for b in range(256)]
)


def _read_bim(bim_path):
    variants = []
    with open(bim_path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            fields = line.split()
            if len(fields) != 6:
                raise MalformedBim(f"{bim_path}:{lineno}: expected 6 columns, got {len(fields)}")
            chrom, vid, cm, pos, a1, a2 = fields
            try:
                variants.append(Variant(vid, int(chrom), int(pos), a1, a2, float(cm)))
            except ValueError as exc:
                raise MalformedBim(f"{bim_path}:{lineno}: {exc}") from None
    return variants


def _read_fam(fam_path):
    samples = []
    seen = set()
    with open(fam_path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            fields = line.split()
            if len(fields) != 6:
                raise MalformedFam(f"{fam_path}:{lineno}: expected 6 columns, got {len(fields)}")
            iid = fields[1]
            if iid in seen:
                raise MalformedFam(f"{fam_path}:{lineno}: duplicate sample id {iid!r}")
            seen.add(iid)
            samples.append(iid)
    return samples


def parse_plink(bed_path, bim_path, fam_path, encoding: str = DOSAGE) -> Cohort:
    """Read a PLINK trio into a Cohort (phenotypes/covariates left empty).

    ``encoding`` selects the in-memory genotype representation: "dosage"
    (default) or "prob3" (hard calls become one-hot probability triples).
    """
    variants = _read_bim(bim_path)
    samples = _read_fam(fam_path)
    n, m = len(samples), len(variants)

    raw = np.fromfile(bed_path, dtype=np.uint8)
    if raw.size < 3 or bytes(raw[:2]) != _MAGIC:
        raise BadMagic(f"{bed_path}: not a PLINK .bed file")
    mode = raw[2]
    if mode == _SAMPLE_MAJOR:
        raise SampleMajorUnsupported(f"{bed_path}: sample-major layout not supported")
    if mode != _SNP_MAJOR:
        raise BadMagic(f"{bed_path}: unknown mode byte 0x{mode:02x}")

    bytes_per_snp = (n + 3) // 4
    expected = 3 + m * bytes_per_snp
    if raw.size != expected:
        raise TruncatedPayload(
            f"{bed_path}: file is {raw.size} bytes, expected {expected} "
            f"(3 + {m} SNPs x {bytes_per_snp} bytes)"
        )

    if m == 0 or n == 0:
        dosages = np.zeros((n, m))
    else:
        payload = raw[3:].reshape(m, bytes_per_snp)
        dosages = _BYTE_LUT[payload].reshape(m, 4 * bytes_per_snp)[:, :n].T.copy()

    # canonical variant order: (chromosome, position), stable on input order
    order = sorted(range(m), key=lambda j: (variants[j].chromosome, variants[j].position_bp))
    if order != list(range(m)):
        variants = [variants[j] for j in order]
        dosages = dosages[:, order]

    geno = GenotypeMatrix(dosages, DOSAGE)
    if encoding == "prob3":
        geno = geno.to_prob3()
    return Cohort(tuple(variants), tuple(samples), geno)


def write_plink(cohort: Cohort, bed_path, bim_path, fam_path) -> None:
    """Write a cohort as a PLINK trio.

    Requires integral dosages (0/1/2/missing); parse_plink on the result
    reproduces dosages, variant ids, and sample ids exactly.
    """
    d = cohort.genotypes.dosages()
    finite = np.isfinite(d)
    vals = d[finite]
    if vals.size and not np.array_equal(vals, np.round(vals)):
        raise NonIntegralDosage("fractional dosages cannot round-trip through .bed")

    n, m = d.shape
    # dosage -> 2-bit code; missing -> 01
    codes = np.full(d.shape, 0b01, dtype=np.uint8)
    codes[finite & (d == 2.0)] = 0b00
    codes[finite & (d == 1.0)] = 0b10
    codes[finite & (d == 0.0)] = 0b11

    bytes_per_snp = (n + 3) // 4
    padded = np.zeros((m, 4 * bytes_per_snp), dtype=np.uint8)
    padded[:, :n] = codes.T
    shifts = np.array([0, 2, 4, 6], dtype=np.uint8)
    packed = (padded.reshape(m, bytes_per_snp, 4) << shifts).sum(axis=2).astype(np.uint8)

    with open(bed_path, "wb") as fh:
        fh.write(_MAGIC + bytes([_SNP_MAJOR]))
        fh.write(packed.tobytes())

    with open(bim_path, "w") as fh:
        for v in cohort.variants:
            fh.write(f"{v.chromosome}\t{v.id}\t{v.cm:g}\t{v.position_bp}\t{v.allele_a1}\t{v.allele_a2}\n")

    with open(fam_path, "w") as fh:
        for sid in cohort.samples:
            fh.write(f"{sid}\t{sid}\t0\t0\t0\t-9\n")


def write_plink_prefix(cohort: Cohort, prefix) -> tuple:
    """Write <prefix>.bed/.bim/.fam; returns the three paths."""
    paths = tuple(f"{prefix}{ext}" for ext in (".bed", ".bim", ".fam"))
    os.makedirs(os.path.dirname(os.path.abspath(str(prefix))), exist_ok=True)
    write_plink(cohort, *paths)
    return paths
