"""Exception and warning types shared across the package."""


class DragfieldError(Exception):
    """Base class for all package-specific errors."""


class ParseError(DragfieldError):
    """A plan document violates the schema.

    ``path`` is a JSON pointer to the offending element.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")


class GeometryError(DragfieldError):
    """Base class for errors raised by the displacement-field geometry."""


class EmptyEditableRegion(GeometryError):
    """The editable mask has no true cells."""


class HandleOutsideCircle(GeometryError):
    """A drag handle lies on or outside the reference circle."""


class PointOutsideCircle(GeometryError):
    """A feature point lies outside the reference circle."""


class NoInstructions(GeometryError):
    """Displacement-field fusion was requested with zero instructions."""


class ShapeMismatch(DragfieldError):
    """Tensor shapes are inconsistent with the grid or each other."""


class CacheMiss(DragfieldError):
    """The token cache has no entry for the requested (step, layer)."""


class CacheMismatch(DragfieldError):
    """The token cache was produced by a different model, step count, or prompt."""


class NotEditRegion(DragfieldError):
    """Key/value augmentation was requested outside the destination/transition set."""


class BadHeadDim(DragfieldError):
    """Per-head dimension is not divisible by 4 (2D axial rotary split)."""


class BadConfig(DragfieldError):
    """Model or sampler configuration violates its invariants."""


class CorruptTensor(DragfieldError):
    """Tensor payload length disagrees with the sidecar shape."""


class IoError(DragfieldError):
    """Filesystem failure while writing an artifact."""


class EmptyDestinationWarning(UserWarning):
    """Every projected destination fell outside the grid; the maps are empty."""
