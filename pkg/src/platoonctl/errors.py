"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A physical or tuning parameter is outside its valid range."""


class StructuralError(ValueError):
    """Dimension or shape mismatch between related objects."""


class NotPositiveDefiniteError(ValueError):
    """Quadratic cost matrix failed the positive-definiteness check."""


class ConfigError(ValueError):
    """Config document rejected by schema validation; carries the field path."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class TrajectoryFormatError(ValueError):
    """Trajectory file failed to parse; carries the offending data row."""

    def __init__(self, message, row=None):
        self.row = row
        super().__init__(message if row is None else f"row {row}: {message}")


class CollisionError(RuntimeError):
    """An inter-vehicle gap closed; carries the step where it happened."""

    def __init__(self, step, message="inter-vehicle gap closed"):
        self.step = step
        super().__init__(f"{message} at step {step}")
