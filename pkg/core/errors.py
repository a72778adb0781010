"""Exception hierarchy for the splatting engine."""

from typing import List, Optional


class SplatError(Exception):
    """Base class for every error raised by the engine."""


class InvalidParameterError(SplatError):
    """A numeric parameter is non-finite or outside its domain."""


class ShapeError(SplatError):
    """Array shapes are inconsistent with each other."""


class BehindCameraError(SplatError):
    """A point lies behind (or on) the image plane of a camera."""

    def __init__(self, depth: float, eps: float):
        super().__init__(f"Point behind camera: depth {depth:.6g} <= {eps:g}")
        self.depth = depth


class DegenerateGeometryError(SplatError):
    """Two-view geometry is too close to singular to be solved."""


class TrainingStateCorruptError(SplatError):
    """A Gaussian carries a non-finite parameter."""

    def __init__(self, index: int, field: str):
        super().__init__(f"Non-finite {field} on Gaussian {index}")
        self.index = index
        self.field = field


class GradientOverflowError(SplatError):
    """The backward pass produced a non-finite gradient."""

    def __init__(self, index: int, field: str):
        super().__init__(f"Non-finite gradient for {field} on Gaussian {index}")
        self.index = index
        self.field = field


class OptimizerDivergenceError(SplatError):
    """An optimizer update produced non-finite parameters."""


class EmptySceneError(SplatError):
    """A scene has no Gaussians or no visible primitives."""


class ConfigurationError(SplatError):
    """Configuration values are invalid or inconsistent."""


class EmptyPriorError(SplatError):
    """A depth prior could not be produced for a view."""


class DegenerateFitError(SplatError):
    """A least-squares alignment has no unique solution."""


class EmptyEvaluationError(SplatError):
    """An evaluation mask selects no pixels."""


class ParseError(SplatError):
    """A file could not be parsed."""

    def __init__(self, message: str, line_number: Optional[int] = None, path: Optional[str] = None):
        location = ""
        if path is not None:
            location += f"{path}"
        if line_number is not None:
            location += f":{line_number}"
        super().__init__(f"{location}: {message}" if location else message)
        self.line_number = line_number
        self.path = path


class UnsupportedModelError(SplatError):
    """A COLMAP camera model other than PINHOLE / SIMPLE_PINHOLE."""

    def __init__(self, model: str):
        super().__init__(f"Unsupported camera model: {model}")
        self.model = model


class SchemaError(SplatError):
    """A PLY file lacks required properties."""

    def __init__(self, missing: List[str]):
        super().__init__(f"Missing PLY properties: {', '.join(missing)}")
        self.missing = list(missing)


class ChannelCountError(SplatError):
    """A PFM file has the wrong number of channels for its use."""
