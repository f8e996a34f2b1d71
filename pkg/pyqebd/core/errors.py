"""
Exceptions raised by pyqebd.

Every failure kind has its own class carrying a human-readable ``error``
attribute. Statistical outcomes such as a diverging fit are reported as
flags on the returned result objects, never as exceptions.
"""


class QebdError(Exception):
    """Base class for all pyqebd exceptions."""

    def __init__(self, error):
        super().__init__(error)
        self.error = error

    def __str__(self):
        return self.error


class DimensionError(QebdError, ValueError):
    """Raised when a vector or matrix does not have the expected shape.

    ## Examples

    ```python
    try:
        pyqebd.theta_to_matrix([0.1, 0.2], 3)
    except pyqebd.DimensionError as e:
        print(e.error)
    ```
    """


class DomainError(QebdError, ValueError):
    """Raised when a value lies outside the domain of an operation.

    Non-binary responses, probabilities outside (0, 1) and working
    correlation parameters outside their validity bound all raise this.
    """


class EnumerationLimitError(QebdError):
    """Raised when an exact computation would enumerate too many configurations."""

    def __init__(self, m, cap):
        super().__init__(
            "Exact enumeration over 2^{} configurations exceeds the cap of m={}. "
            "Use the Gibbs sampler or the pseudo-likelihood estimators "
            "instead.".format(m, cap)
        )
        self.m = m
        self.cap = cap


class RankDeficiencyError(QebdError):
    """Raised when an information, Hessian or bread matrix cannot be inverted."""


class CompatibilityError(QebdError):
    """Raised when interaction kernels violate the compatibility condition.

    Full conditionals built from an asymmetric (or negative) kernel do not
    define a unique joint distribution, so the design is refused.
    """


class SingularCovarianceError(QebdError):
    """Raised when a working covariance stays singular after a ridge fallback."""


class QicUnavailableError(QebdError):
    """Raised when QIC is requested for a fit that did not use independence."""

    def __init__(self, kind):
        super().__init__(
            "QIC is only defined for independence working correlation fits, "
            "got {!r}.".format(kind)
        )
        self.kind = kind


class ConfigError(QebdError):
    """Raised for invalid scenario configurations.

    ## Examples

    ```python
    try:
        pyqebd.ScenarioConfig.from_dict({"family": "qebd", "bogus": 1})
    except pyqebd.ConfigError as e:
        print(e.unknown_keys)
    ```
    """

    def __init__(self, error, unknown_keys=None):
        super().__init__(error)
        self.unknown_keys = list(unknown_keys or [])


class PanelFileError(QebdError):
    """Raised when a panel CSV cannot be parsed.

    ``line`` is the 1-based line number in the file (the header is line 1)
    and ``column`` the offending column name, when known.
    """

    def __init__(self, error, line=None, column=None):
        location = []
        if line is not None:
            location.append("line {}".format(line))
        if column is not None:
            location.append("column {!r}".format(column))
        if location:
            error = "{} ({})".format(error, ", ".join(location))
        super().__init__(error)
        self.line = line
        self.column = column
