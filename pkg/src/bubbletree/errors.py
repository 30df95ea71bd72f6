"""Exception types shared across the package."""


class BubbleTreeError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(BubbleTreeError, ValueError):
    """A model parameter is outside its admissible range."""


class DataError(BubbleTreeError, ValueError):
    """An input file or data structure violates the expected schema.

    Messages carry context (ticker, date, line number) where available.
    """


class RankError(BubbleTreeError, ValueError):
    """A design matrix is rank deficient or a specification is collinear."""


class DegreesOfFreedomError(BubbleTreeError, ValueError):
    """Too few observations for the requested number of parameters."""


class UndefinedKappaError(BubbleTreeError, ValueError):
    """The bubble ratio is undefined (zero return variance)."""


class DomainError(BubbleTreeError, ValueError):
    """A density grid violates a precondition of the requested operation."""
