"""Exception types shared across the toolkit."""


class InvalidInput(ValueError):
    """Raised when an input violates a documented precondition."""


class SingularSystem(RuntimeError):
    """Raised when a linear system stays unsolvable after regularization.

    Carries the frequency bin that failed so callers can report it.
    """

    def __init__(self, message, bin_index=None):
        super().__init__(message)
        self.bin_index = bin_index


class NumericalFailure(RuntimeError):
    """Raised when a pipeline produces non-finite values.

    ``stage`` tags the processing step that failed.
    """

    def __init__(self, message, stage=None):
        super().__init__(message)
        self.stage = stage
