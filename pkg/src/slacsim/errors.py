"""Exception types shared across the simulator."""


class SlacsimError(Exception):
    """Base class for all simulator errors."""


class DimensionMismatch(SlacsimError):
    """Operand dimensions are inconsistent (profile length, combiner shape, ...)."""


class SourceOnArray(SlacsimError):
    """A near-field source point sits on (or too close to) an array element."""


class ZeroTruth(SlacsimError):
    """NMSE requested against an all-zero reference."""


class RankDeficient(SlacsimError):
    """Least-squares system has column rank below the unknown count."""


class BudgetExceeded(SlacsimError):
    """A beam sweep requests more slots than the pilot budget allows."""


class NoPathDetected(SlacsimError):
    """Matching pursuit found no atom with sufficient residual reduction."""


class MissingPrior(SlacsimError):
    """A prior-aided profile policy was requested without a prior position."""


class EmptyDataset(SlacsimError):
    """Training requested on an empty dataset."""


class DegenerateGeometry(SlacsimError):
    """Rays are near-parallel and no fallback range is configured."""


class ConfigError(SlacsimError):
    """A run configuration is invalid; ``key`` names the offending entry."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")
