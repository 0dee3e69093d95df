"""Exception hierarchy shared by every fairfolio module."""


class FairfolioError(Exception):
    """Base class for all library errors."""


class FormatError(FairfolioError, ValueError):
    """Malformed input file.

    ``row`` and ``column`` are 1-based positions in the source document when known.
    """

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class EmptySeriesError(FairfolioError, ValueError):
    pass


class InsufficientDataError(FairfolioError, ValueError):
    pass


class DuplicateAssetError(FairfolioError, ValueError):
    pass


class ModelError(FairfolioError, ValueError):
    """Inconsistent market model, e.g. a covariance that is not PSD."""


class InfeasibleRiskError(FairfolioError):
    def __init__(self, tau, min_risk):
        self.tau = tau
        self.min_risk = min_risk
        super().__init__(
            f"risk threshold {tau!r} is below the minimum attainable risk {min_risk!r}"
        )


class ParameterError(FairfolioError, ValueError):
    pass


class DimensionError(FairfolioError, ValueError):
    pass


class GroupingError(FairfolioError, ValueError):
    pass


class DistributionError(FairfolioError, ValueError):
    pass


class CapabilityError(FairfolioError):
    """Request exceeds a resource guard (enumeration size, group count, ...)."""
