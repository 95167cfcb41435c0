"""
Error types - one hierarchy for configuration, shape and numerical failures
"""


class TwinGaugeError(Exception):
    """Base class for all twingauge errors"""

    exit_code = 2


class ConfigError(TwinGaugeError, ValueError):
    """Invalid or inconsistent configuration"""

    exit_code = 1


class ShapeError(TwinGaugeError, ValueError):
    """Dimension mismatch between matrix and vectors"""

    exit_code = 1


class NumericalError(TwinGaugeError):
    """A computation hit a degenerate case it cannot recover from"""

    exit_code = 2


class DegenerateDataError(NumericalError):
    """Data vector is unusable, e.g. zero norm when noise is requested"""


class DegenerateDenominator(NumericalError):
    """A score denominator vanished or changed sign"""


class DegenerateRowError(NumericalError):
    """A zero row makes the diagonal of A A^T singular"""


class TooLargeError(NumericalError):
    """Dense construction refused above the size guard"""


class MultipleLeadingEigenvalue(NumericalError):
    """Leading eigenvalue is not simple in modulus"""


class DegenerateComponent(NumericalError):
    """Initial error has no component along the dominant eigenvector"""
