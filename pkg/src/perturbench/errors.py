"""Exception hierarchy. Every error carries a stable machine-readable code."""


class PerturbenchError(Exception):
    """Base class for all toolkit errors."""

    code = "error"


class DimensionError(PerturbenchError):
    """Tensor shapes do not line up for the requested operation."""

    code = "dimension"


class ConfigurationError(PerturbenchError):
    """A configuration value is invalid; the message names the field."""

    code = "config"


class InputError(PerturbenchError):
    """Input data violates an operation's precondition."""

    code = "input"


class StateError(PerturbenchError):
    """Operation invoked in a state that cannot support it."""

    code = "state"


class TrainingError(PerturbenchError):
    """Training failed (e.g. the loss diverged to a non-finite value)."""

    code = "training"


class FormatError(PerturbenchError):
    """A persisted artifact has an unsupported or malformed format."""

    code = "format"


class CorruptionError(PerturbenchError):
    """A persisted artifact is internally inconsistent."""

    code = "corrupt"


class DegenerateInputError(PerturbenchError):
    """Numerically degenerate input (e.g. all rows identical)."""

    code = "degenerate"
