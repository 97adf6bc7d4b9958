"""Exception types shared across the package."""


class VUGradeError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(VUGradeError):
    """A file is missing required structure (e.g. a manifest column)."""


class ValidationError(VUGradeError):
    """A value violates a domain invariant (bad grade, duplicate id, ...)."""


class ConfigurationError(VUGradeError):
    """A run parameter is unusable (k out of range, bad threshold, ...)."""


class DecodeError(VUGradeError):
    """Image bytes could not be decoded."""


class ContractError(VUGradeError):
    """An operation was called with inputs outside its contract."""


class TrainingError(VUGradeError):
    """A classifier or cascade stage cannot be trained on the given data."""


class LabelingError(VUGradeError):
    """A record lacks the ground truth needed to derive a training label."""


class ReportError(VUGradeError):
    """A metrics report cannot be built (e.g. nothing to evaluate)."""


class AggregationError(VUGradeError):
    """Cross-fold aggregation was asked for too few folds."""
