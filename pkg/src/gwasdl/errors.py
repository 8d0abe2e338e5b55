"""Exception hierarchy.

Everything raised on bad data, bad configs, or failed numerics derives from
GwasdlError so the CLI can map it to a single exit code. Programmer errors
(wrong types, impossible arguments) stay plain ValueError/TypeError.
"""


class GwasdlError(Exception):
    """Base class for all domain errors raised by this package."""


# --- PLINK / table ingestion ---

class BadMagic(GwasdlError):
    """The .bed file does not start with the expected magic bytes."""


class SampleMajorUnsupported(GwasdlError):
    """The .bed file is sample-major (mode byte 0x00); only SNP-major is read."""


class TruncatedPayload(GwasdlError):
    """The .bed payload length disagrees with the .bim/.fam dimensions."""


class MalformedBim(GwasdlError):
    """A .bim line does not have the six expected columns."""


class MalformedFam(GwasdlError):
    """A .fam line does not have the six expected columns."""


class NonIntegralDosage(GwasdlError):
    """Dosages must be 0/1/2/missing to round-trip through .bed."""


class HeaderMismatch(GwasdlError):
    """Phenotype/covariate CSV header does not match the expected layout."""


class DuplicateSampleId(GwasdlError):
    """The same sample id appears twice."""


class NoLabeledSamples(GwasdlError):
    """No sample has a usable (non-missing) disease label."""


# --- splitting / simulation ---

class StratumTooSmall(GwasdlError):
    """A stratified split needs at least two cases and two controls."""


class SpecInvalid(GwasdlError):
    """A simulation spec violates its own invariants."""


class BisectionFailed(GwasdlError):
    """Intercept search could not reach the requested prevalence."""


# --- association ---

class SingularSystem(GwasdlError):
    """The ridge-regularized IRLS normal equations could not be solved."""


class DegenerateLabels(GwasdlError):
    """All-case or all-control labels: nothing to fit or score."""


class ConvergenceFailure(GwasdlError):
    """An iterative routine hit its iteration cap without converging."""


# --- selection ---

class EmptySelection(GwasdlError):
    """No SNP passed the selection threshold."""


# --- neural nets ---

class ShapeMismatch(GwasdlError):
    """Input shape does not match what a layer or model expects."""


class NoForwardRecorded(GwasdlError):
    """backward() requested but no forward pass has been recorded."""


class ConfigInvalid(GwasdlError):
    """A ModelConfig violates the constraints of its model kind."""


class AllMissing(GwasdlError):
    """Every (sample, label) cell is missing: the masked loss is undefined."""


class KTooLarge(GwasdlError):
    """Requested top-k exceeds the number of scored SNPs."""


# --- reporting ---

class IoFailure(GwasdlError):
    """Report files could not be written."""
