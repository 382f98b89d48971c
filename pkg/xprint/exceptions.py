class _Error(Exception):
    """Base class for exceptions in this module."""


class XPrintError(_Error):
    """Raised when the fingerprinting pipeline cannot complete an operation"""


class TraceFormatError(XPrintError, ValueError):
    """Raised when a trace file cannot be parsed or violates a trace invariant"""


class LabelError(XPrintError, ValueError):
    """Raised when ground-truth labels are missing where training needs them"""


class SchemaMismatchError(XPrintError, ValueError):
    """Raised when a model was trained on a different feature schema"""


class ConfigError(XPrintError, ValueError):
    """Raised for invalid pipeline or scenario configuration"""


class BundleError(XPrintError):
    """Raised when a model bundle is malformed or internally inconsistent"""


class XPrintWarning(UserWarning):
    """Recoverable anomalies, e.g. a partition computed from one platform"""
