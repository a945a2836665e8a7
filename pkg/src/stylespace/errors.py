"""Exception hierarchy shared by all stylespace modules."""


class StyleSpaceError(Exception):
    """Base class for every error raised by this package."""


class ParseError(StyleSpaceError):
    pass


class ReferentialIntegrityError(StyleSpaceError):
    pass


class DimensionError(StyleSpaceError, ValueError):
    pass


class EmptyInputError(StyleSpaceError, ValueError):
    pass


class ParameterError(StyleSpaceError, ValueError):
    pass


class NoPositiveCandidatesError(StyleSpaceError):
    pass


class NumericError(StyleSpaceError, ArithmeticError):
    pass


class DivergenceError(NumericError):
    def __init__(self, epoch, message=None):
        self.epoch = epoch
        super().__init__(message or f"training diverged (non-finite loss) in epoch {epoch}")


class RetrievalDomainError(StyleSpaceError):
    pass


class EmptyIndexError(RetrievalDomainError):
    pass


class OutfitSpecError(StyleSpaceError):
    pass


class DegenerateInputError(StyleSpaceError, ValueError):
    pass


class CalibrationError(StyleSpaceError):
    pass


class MissingFeatureError(StyleSpaceError, KeyError):
    def __init__(self, item_id):
        self.item_id = item_id
        super().__init__(f"no feature vector for item {item_id!r}")

    def __str__(self):
        return self.args[0]
