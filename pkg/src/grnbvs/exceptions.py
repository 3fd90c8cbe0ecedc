"""Exception types raised across the package."""


class InvalidInputError(ValueError):
    """Inputs violate a documented precondition."""


class DegenerateInputError(ValueError):
    """Inputs are well formed but carry no usable variation."""


class InternalConsistencyError(RuntimeError):
    """Cached sampler state disagrees with a full recomputation."""


class NumericalFailure(FloatingPointError):
    """A non-finite value appeared during sampling."""

    def __init__(self, parameter, iteration, message=None):
        self.parameter = parameter
        self.iteration = iteration
        super().__init__(
            message or f"non-finite value in {parameter} at iteration {iteration}"
        )
