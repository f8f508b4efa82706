"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: validation problems (including file
format and training errors) exit 1, I/O problems exit 2, configuration
problems exit 3.
"""


class SegqcError(Exception):
    """Base class for all package errors."""


class ValidationError(SegqcError):
    """Input data violates a documented invariant."""


class FormatError(ValidationError):
    """A file container is malformed (bad magic, header, dtype or layout)."""


class TrainingError(ValidationError):
    """A classifier cannot be trained on the given data."""


class EvaluationError(ValidationError):
    """A metric is undefined for the given inputs (e.g. single-class AUROC)."""


class ConfigurationError(SegqcError):
    """An option or parameter combination is invalid."""
