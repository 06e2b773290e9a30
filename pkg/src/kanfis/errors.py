"""Exception hierarchy shared by every kanfis module."""


class KanfisError(Exception):
    """Base class for all errors raised by kanfis."""


class ShapeError(KanfisError, ValueError):
    pass


class ParameterDomainError(KanfisError, ValueError):
    pass


class InvariantViolation(KanfisError, ValueError):
    pass


class EvaluationError(KanfisError, ArithmeticError):
    """A function produced a non-finite value where a finite one was required."""


class TaskKindError(KanfisError, TypeError):
    pass


class LabelError(KanfisError, ValueError):
    pass


class ConfigurationError(KanfisError, ValueError):
    pass


class DivergenceError(KanfisError, ArithmeticError):
    def __init__(self, epoch, batch, value):
        self.epoch = epoch
        self.batch = batch
        self.value = value
        super().__init__(
            f"training diverged at epoch {epoch}, batch {batch} (loss={value!r})"
        )


class SchemaError(KanfisError, ValueError):
    pass


class ParseError(KanfisError, ValueError):
    def __init__(self, message, row=None):
        self.row = row
        super().__init__(message)


class DegenerateFeatureError(KanfisError, ValueError):
    pass


class UndefinedMetricError(KanfisError, ValueError):
    pass


class CapacityError(KanfisError, OverflowError):
    pass
