"""
Exception hierarchy for the 3D box labeling pipeline.

Every failure a pipeline stage can raise derives from AnimalBoxError so the
CLI can map it to a single data-error exit code.
"""

from typing import Optional


class AnimalBoxError(Exception):
    """Base class for all pipeline errors."""


# frame

class InsufficientLandmarks(AnimalBoxError):
    """No axis can be derived, not even through the PCA fallback."""


class DegenerateAxis(AnimalBoxError):
    """Every reliable candidate pair for an axis has coincident endpoints."""


class DegenerateCloud(AnimalBoxError):
    """Point cloud covariance has rank < 2."""


class ParallelAxes(AnimalBoxError):
    """Raw x and y directions are zero or (anti)parallel."""


# obox

class EmptyMesh(AnimalBoxError):
    """Mesh has no vertices."""


class InvalidFrame(AnimalBoxError):
    """Rotation fails the orthonormality / proper-rotation check."""


# pose

class TooFewCorrespondences(AnimalBoxError):
    """Fewer than the 4 correspondences EPnP needs."""


class NoConsensus(AnimalBoxError):
    """RANSAC best inlier set is smaller than the minimal set."""


class EmptyCorrespondences(AnimalBoxError):
    """Residuals requested without any correspondence."""


class DidNotConverge(AnimalBoxError):
    """Refinement hit its evaluation limit before meeting the tolerances."""


class DegenerateResult(AnimalBoxError):
    """Both refinement branches ended in a degenerate pose."""


# visibility

class CameraInsideBox(AnimalBoxError):
    """Camera centre lies inside (or on) the box."""


class BehindCamera(AnimalBoxError):
    """A face corner has non-positive depth."""


# evaluate

class NotARotation(AnimalBoxError):
    """Matrix is not a proper 3x3 rotation."""


class ZeroVector(AnimalBoxError):
    """A direction vector has zero length."""


class NoVisibleKeypoints(AnimalBoxError):
    """Reprojection error requested without visible keypoints."""


# io

class ParseError(AnimalBoxError):
    """Malformed input file."""

    def __init__(self, path: str, message: str, line: Optional[int] = None):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


class ValidationError(AnimalBoxError):
    """Parsed input violates a field invariant."""

    def __init__(self, field: str, message: str):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}")


class ConfigError(ValidationError):
    """Bad key or value in the pipeline configuration."""


class RenderIOError(AnimalBoxError):
    """Overlay could not be written."""


class StageError(AnimalBoxError):
    """A pipeline stage failed; wraps the original error with the stage name."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")
