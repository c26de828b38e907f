"""Exception types shared across handforge modules."""


class HandforgeError(Exception):
    """Base class for all handforge errors."""


class ConfigError(HandforgeError):
    """Invalid or incomplete configuration (presets, camera, backgrounds...)."""


class InvalidSpecError(HandforgeError):
    """A shape or mesh specification violates its invariants."""


class JointLimitError(HandforgeError):
    """A hand pose angle falls outside its joint limits."""

    def __init__(self, axis: int, value: float, lower: float, upper: float):
        self.axis = axis
        self.value = value
        self.lower = lower
        self.upper = upper
        super().__init__(
            f"joint angle gamma{axis}={value:g} outside limits "
            f"[{lower:g}, {upper:g}] (axis {axis})"
        )


class MeshParseError(HandforgeError):
    """Malformed record in a mesh file."""

    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class MeshIndexError(MeshParseError):
    """Face record references a vertex/normal index that does not exist."""


class CorruptAnnotationError(HandforgeError):
    """Stored annotation data fails its self-consistency checks."""


class MissingPredictionError(HandforgeError):
    """Evaluation was asked to score an image with no prediction."""

    def __init__(self, image_id):
        self.image_id = image_id
        super().__init__(f"no prediction supplied for image id {image_id!r}")


class TrainingAborted(HandforgeError):
    """Model raised during an epoch; partial history is attached."""

    def __init__(self, epoch: int, history, cause: BaseException):
        self.epoch = epoch
        self.history = history
        self.__cause__ = cause
        super().__init__(f"training aborted during epoch {epoch}: {cause}")
