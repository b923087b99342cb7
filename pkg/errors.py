#!/usr/bin/env python3
"""
Exception hierarchy for LatticeBS.

Every error carries a short ``code`` tag so the command line front end can map
failures to exit codes and log lines without string matching.
"""


class LatticeBSError(Exception):
    """Base class for all errors raised by the simulator."""

    code = "error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)


class InvalidDimension(LatticeBSError, ValueError):
    code = "invalid-dimension"


class HermiticityViolation(LatticeBSError, ValueError):
    code = "hermiticity-violation"


class UnitarityViolation(LatticeBSError, ValueError):
    code = "unitarity-violation"


class InvalidShape(LatticeBSError, ValueError):
    code = "invalid-shape"


class SizeLimit(LatticeBSError, ValueError):
    code = "size-limit"


class InvalidMultiset(LatticeBSError, ValueError):
    code = "invalid-multiset"


class InvalidPower(LatticeBSError, ValueError):
    code = "invalid-power"


class ShapeMismatch(LatticeBSError, ValueError):
    code = "shape-mismatch"


class InvalidSubset(LatticeBSError, ValueError):
    code = "invalid-subset"


class EnumerationTooLarge(LatticeBSError, ValueError):
    code = "enumeration-too-large"


class InvalidFold(LatticeBSError, ValueError):
    code = "invalid-fold"


class InvalidDistribution(LatticeBSError, ValueError):
    code = "invalid-distribution"


class InsufficientData(LatticeBSError, ValueError):
    code = "insufficient-data"


class InconsistentCounts(LatticeBSError, ValueError):
    code = "inconsistent-counts"


class InvalidEntropy(LatticeBSError, ValueError):
    code = "invalid-entropy"


class ConfigError(LatticeBSError):
    code = "config-error"


class DataError(LatticeBSError):
    code = "data-error"


class ValidationFailed(LatticeBSError):
    code = "validation-failed"


class StageError(LatticeBSError):
    """A pipeline stage failed; ``stage`` names it."""

    code = "stage-error"

    def __init__(self, stage: str, message: str = ""):
        self.stage = stage
        super().__init__(f"[{stage}] {message}" if message else f"[{stage}] failed")
