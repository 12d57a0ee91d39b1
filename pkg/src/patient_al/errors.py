"""Exception types raised across the package."""


class ActiveLearningError(Exception):
    """Base class for all package errors."""


class BudgetExhaustedError(ActiveLearningError):
    """More samples were requested than the unlabeled pool holds."""


class InvalidSelectionError(ActiveLearningError):
    """A selection referenced an id that is unknown or already labeled."""

    def __init__(self, sample_id, reason):
        super().__init__(f"invalid selection of sample {sample_id}: {reason}")
        self.sample_id = sample_id


class InsufficientPatientsError(ActiveLearningError):
    """Fewer distinct patients are available than the batch size, and refill is off."""


class InvalidInputError(ActiveLearningError, ValueError):
    pass


class CannotTrainError(ActiveLearningError):
    pass


class TrainingDivergedError(ActiveLearningError, FloatingPointError):
    pass


class InvalidSpecError(ActiveLearningError, ValueError):
    pass


class ParseError(ActiveLearningError, ValueError):
    """Malformed CSV input; carries the 1-based line number."""

    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


class ShapeMismatchError(ActiveLearningError, ValueError):
    pass


class ConfigError(ActiveLearningError, ValueError):
    pass
