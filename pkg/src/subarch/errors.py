"""Exception hierarchy shared by every subsystem."""


class SubarchError(Exception):
    """Base class for all library errors."""


class SchemaError(SubarchError):
    """Unknown variable, unsupported layer kind, malformed document."""


class InvalidSpaceError(SubarchError):
    """A search space with no usable assignments."""


class SpaceSizeError(SubarchError):
    """An enumeration exceeded its configured cap."""


class PreconditionError(SubarchError):
    pass


class NumericError(SubarchError):
    """Non-finite value produced during evaluation or training."""


class ConsistencyError(SubarchError):
    pass


class LossContractError(SubarchError):
    """A loss returned a value outside [0, 1]."""


class DominationError(SubarchError):
    """A candidate is not dominated by the maximum point."""


class EstimateUnavailableError(SubarchError):
    pass


class FormatError(SubarchError):
    """Malformed dataset or configuration file."""


class ExtractionFailedError(SubarchError):
    """Every candidate failed to train.  The trace is kept for inspection."""

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)
