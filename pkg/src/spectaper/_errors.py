"""Exception hierarchy shared by all modules."""


class SpectaperError(ValueError):
    """Base class for every domain error raised by this package."""


class InvalidParameterError(SpectaperError):
    pass


class NotStrictlyOrderedError(SpectaperError):
    pass


class DomainError(SpectaperError):
    pass


class ShapeError(SpectaperError):
    pass


class InvalidModulationError(SpectaperError):
    pass


class IllConditionedError(SpectaperError):
    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair
