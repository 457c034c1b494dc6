"""Exception types shared across the package.

Every error raised by the library derives from ActivePoolError so callers
(CLI, service) can map failures to exit codes / HTTP statuses in one place.
"""


class ActivePoolError(Exception):
    """Base class for all library errors."""


class ParseError(ActivePoolError):
    """Malformed input file; message names the offending line."""


class IntegrityError(ActivePoolError):
    """Structurally valid input that violates a dataset-level constraint."""


class ConfigurationError(ActivePoolError):
    """Invalid configuration or arguments."""


class StateError(ActivePoolError):
    """Operation not permitted in the current state."""


class BudgetExhaustedError(StateError):
    """A reveal would push labels_spent past the budget."""


class CapabilityError(ActivePoolError):
    """Requested a ground-truth-dependent operation without ground truth."""


class ShapeError(ActivePoolError):
    """Array dimensions do not match the model or tensor contract."""


class ValidationError(ActivePoolError):
    """A probability row or score input fails numeric validation."""


class PreconditionError(ActivePoolError):
    """A documented precondition of an operation does not hold."""


class TrainingDivergedError(ActivePoolError):
    """Non-finite loss encountered during training."""

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"training diverged (non-finite loss) at epoch {epoch}")
