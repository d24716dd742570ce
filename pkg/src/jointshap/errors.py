"""Exception hierarchy."""


class JointShapError(Exception):
    """Base class for all package errors."""


class InvalidInputError(JointShapError, ValueError):
    pass


class ConfigError(JointShapError, ValueError):
    """A value function or experiment is missing a required ingredient."""


class CapacityError(JointShapError, ValueError):
    """Request would enumerate an infeasible number of coalitions."""


class TrainingFailure(JointShapError, RuntimeError):
    def __init__(self, message: str, iteration: int):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration


class DegenerateSupportError(JointShapError, ArithmeticError):
    """Every importance weight drawn was zero."""


class DegenerateNormalizationError(JointShapError, ArithmeticError):
    pass


class UndefinedCorrelationError(JointShapError, ArithmeticError):
    pass


class StageError(JointShapError, RuntimeError):
    """A pipeline stage failed; ``stage`` names it and ``__cause__`` holds the original error."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
