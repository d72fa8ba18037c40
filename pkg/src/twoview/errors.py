"""Exception hierarchy shared across the package."""


class TwoviewError(Exception):
    """Base class for all package-specific errors."""


class DomainError(TwoviewError):
    """An argument is outside the mathematical domain of the operation."""


class DegenerateInput(TwoviewError):
    """The input configuration does not determine a model."""


class EmptyPointSet(TwoviewError):
    """An operation that needs at least one point received none."""


class InsufficientPoints(TwoviewError):
    """Fewer points than the minimal sample size."""


class NapsacStarved(TwoviewError):
    """No hyper-sphere neighborhood with enough points was found."""


class NonInvertibleModel(TwoviewError):
    """A homography with |det| below the invertibility floor."""


class NoModelFound(TwoviewError):
    """Every drawn sample was degenerate; no model was ever scored."""


class DegenerateGeometry(TwoviewError):
    """Epipolar geometry produced no usable virtual correspondences."""


class ParseError(TwoviewError):
    """Malformed instance file; carries the 1-based line number."""

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason
