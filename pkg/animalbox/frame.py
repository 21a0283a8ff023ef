"""
Anatomical coordinate frames for oriented box labeling.

The x-axis runs anterior -> posterior (tail_base - nose), the y-axis runs
left -> right, and z = x cross y completes a right-handed proper rotation,
which makes z dorsal for an upright animal. Axis pairs are taken from an
ordered AxisPolicy; the first pair whose endpoints are both reliable wins.
When no pair is reliable the axis falls back to the principal axis of the
point cloud with its sign fixed by any single reliable landmark: one named
in the pairs, or one whose name marks its side (`left_ear` is anterior).

A plain PCA frame is provided as the comparison baseline.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from animalbox.errors import (
    DegenerateAxis,
    DegenerateCloud,
    InsufficientLandmarks,
    ParallelAxes,
    ValidationError,
)

logger = logging.getLogger(__name__)

ORTHONORMAL_TOL = 1e-9
DEGENERATE_PAIR_TOL = 1e-9
MIN_AXIS_ANGLE_RAD = 1e-6
PCA_FALLBACK = "pca_fallback"

QUADRUPED_X_PAIRS: Tuple[Tuple[str, str], ...] = (
    ("nose", "tail_base"),
    ("neck", "tail_base"),
    ("nose", "hip_midpoint"),
)
QUADRUPED_Y_PAIRS: Tuple[Tuple[str, str], ...] = (
    ("left_shoulder", "right_shoulder"),
    ("left_hip", "right_hip"),
)
QUADRUPED_MIDPOINTS: Dict[str, Tuple[str, str]] = {
    "hip_midpoint": ("left_hip", "right_hip"),
    "shoulder_midpoint": ("left_shoulder", "right_shoulder"),
}
# name tokens marking a landmark as (anterior, posterior) or (left, right)
QUADRUPED_X_ROLES: Tuple[Tuple[str, ...], Tuple[str, ...]] = (
    ("nose", "ear", "eye", "head", "neck", "withers", "shoulder", "elbow", "front"),
    ("tail", "hip", "knee", "back", "rump"),
)
QUADRUPED_Y_ROLES: Tuple[Tuple[str, ...], Tuple[str, ...]] = (("left",), ("right",))


@dataclass(frozen=True)
class Landmark3D:
    """Named 3D landmark with its image-space visibility and confidence."""

    name: str
    position: np.ndarray
    visible: bool = True
    confidence: float = 1.0

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).ravel()
        if pos.size != 3:
            raise ValidationError(f"landmark[{self.name}].position", "expected 3 components")
        if not np.all(np.isfinite(pos)):
            raise ValidationError(f"landmark[{self.name}].position", "must be finite")
        if not 0.0 <= float(self.confidence) <= 1.0:
            raise ValidationError(f"landmark[{self.name}].confidence", "must lie in [0, 1]")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "confidence", float(self.confidence))
        object.__setattr__(self, "visible", bool(self.visible))

    def is_reliable(self, threshold: float) -> bool:
        return self.visible and self.confidence >= threshold


@dataclass(frozen=True)
class AnatomicalFrame:
    """
    Orthonormal box frame R_box.

    Columns are the x (anterior-posterior), y (left-right) and z
    (dorsal-ventral) axes. x_source / y_source record which landmark pair
    (or "pca", "pca_fallback") defined each axis.
    """

    rotation: np.ndarray
    x_source: str = "unknown"
    y_source: str = "unknown"

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float).reshape(3, 3))

    @property
    def x_axis(self) -> np.ndarray:
        return self.rotation[:, 0]

    @property
    def y_axis(self) -> np.ndarray:
        return self.rotation[:, 1]

    @property
    def z_axis(self) -> np.ndarray:
        return self.rotation[:, 2]

    def orthonormality_error(self) -> float:
        """Largest absolute entry of R^T R - I."""
        r = self.rotation
        return float(np.max(np.abs(r.T @ r - np.eye(3))))

    def is_valid(self, tol: float = ORTHONORMAL_TOL) -> bool:
        if not np.all(np.isfinite(self.rotation)):
            return False
        return self.orthonormality_error() <= tol and abs(np.linalg.det(self.rotation) - 1.0) <= tol

    def rotated(self, q: np.ndarray) -> "AnatomicalFrame":
        """Frame after applying world rotation q (columns become q @ R)."""
        return AnatomicalFrame(np.asarray(q, dtype=float) @ self.rotation, self.x_source, self.y_source)


@dataclass(frozen=True)
class AxisPolicy:
    """
    Ordered candidate landmark pairs per axis.

    Each pair is (from, to); the axis direction is normalize(to - from). For x
    the first name of every pair is treated as anterior and the second as
    posterior, for y the first name is left and the second right. Names listed
    in `midpoints` are synthesized from their two constituents when both are
    reliable.

    `x_roles` and `y_roles` hold the underscore-separated name tokens that
    put a landmark outside the pairs on the first or second side of an axis,
    so `left_ear` counts as anterior and left.
    """

    x_pairs: Tuple[Tuple[str, str], ...] = QUADRUPED_X_PAIRS
    y_pairs: Tuple[Tuple[str, str], ...] = QUADRUPED_Y_PAIRS
    reliability_threshold: float = 0.3
    midpoints: Mapping[str, Tuple[str, str]] = field(default_factory=lambda: dict(QUADRUPED_MIDPOINTS))
    x_roles: Tuple[Tuple[str, ...], Tuple[str, ...]] = QUADRUPED_X_ROLES
    y_roles: Tuple[Tuple[str, ...], Tuple[str, ...]] = QUADRUPED_Y_ROLES

    def __post_init__(self):
        object.__setattr__(self, "x_pairs", tuple((str(a), str(b)) for a, b in self.x_pairs))
        object.__setattr__(self, "y_pairs", tuple((str(a), str(b)) for a, b in self.y_pairs))
        object.__setattr__(self, "midpoints", {str(k): (str(v[0]), str(v[1])) for k, v in self.midpoints.items()})
        for name in ("x_roles", "y_roles"):
            first, second = getattr(self, name)
            object.__setattr__(self, name, (tuple(map(str, first)), tuple(map(str, second))))
        if not self.x_pairs or not self.y_pairs:
            raise ValidationError("axis_policy", "x_pairs and y_pairs must not be empty")
        if not 0.0 <= self.reliability_threshold <= 1.0:
            raise ValidationError("axis_policy.reliability_threshold", "must lie in [0, 1]")


def _resolve(name: str, by_name: Mapping[str, Landmark3D], policy: AxisPolicy) -> Optional[np.ndarray]:
    """Position of a reliable landmark or synthesized midpoint, else None."""
    threshold = policy.reliability_threshold
    lm = by_name.get(name)
    if lm is not None:
        return lm.position if lm.is_reliable(threshold) else None
    parts = policy.midpoints.get(name)
    if parts is None:
        return None
    a, b = (by_name.get(p) for p in parts)
    if a is None or b is None or not (a.is_reliable(threshold) and b.is_reliable(threshold)):
        return None
    return 0.5 * (a.position + b.position)


def _select_pair(
    axis: str,
    pairs: Sequence[Tuple[str, str]],
    by_name: Mapping[str, Landmark3D],
    policy: AxisPolicy,
    reject: Optional[Callable[[np.ndarray], bool]] = None,
) -> Tuple[Optional[np.ndarray], Optional[str]]:
    saw_degenerate = False
    for start, end in pairs:
        p, q = _resolve(start, by_name, policy), _resolve(end, by_name, policy)
        if p is None or q is None:
            continue
        direction = q - p
        if np.linalg.norm(direction) <= DEGENERATE_PAIR_TOL:
            logger.debug("%s-axis pair %s/%s has coincident endpoints, skipped", axis, start, end)
            saw_degenerate = True
            continue
        if reject is not None and reject(direction):
            logger.debug("%s-axis pair %s/%s is parallel to x, skipped", axis, start, end)
            continue
        return direction, f"{start}/{end}"
    if saw_degenerate:
        raise DegenerateAxis(f"every reliable {axis}-axis pair is degenerate")
    return None, None


def _principal_axes(points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and matching eigenvector columns of the covariance."""
    centered = points - points.mean(axis=0)
    cov = centered.T @ centered / len(points)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    return evals[order], evecs[:, order]


def _role_of(name: str, roles: Tuple[Tuple[str, ...], Tuple[str, ...]]) -> Optional[float]:
    tokens = set(name.lower().split("_"))
    first, second = bool(tokens.intersection(roles[0])), bool(tokens.intersection(roles[1]))
    if first == second:
        return None
    return -1.0 if first else 1.0


def _sign_from_roles(
    direction: np.ndarray,
    pairs: Sequence[Tuple[str, str]],
    by_name: Mapping[str, Landmark3D],
    policy: AxisPolicy,
    centroid: np.ndarray,
    roles: Tuple[Tuple[str, ...], Tuple[str, ...]] = ((), ()),
) -> Optional[float]:
    """
    +1/-1 making `direction` point from the pairs' first names to their second names.

    Names in the pairs are tried first. Otherwise the reliable landmark whose
    name carries a role token and lies furthest from the centroid along
    `direction` decides. None when no landmark can.
    """
    ordered = [(name, -1.0) for name, _ in pairs] + [(name, 1.0) for _, name in pairs]
    for name, expected in ordered:
        pos = _resolve(name, by_name, policy)
        if pos is None:
            continue
        d = float(np.dot(direction, pos - centroid))
        if abs(d) <= DEGENERATE_PAIR_TOL:
            continue
        return 1.0 if d * expected > 0 else -1.0

    best, best_offset = None, DEGENERATE_PAIR_TOL
    for name in sorted(by_name):
        lm = by_name[name]
        expected = _role_of(name, roles)
        if expected is None or not lm.is_reliable(policy.reliability_threshold):
            continue
        d = float(np.dot(direction, lm.position - centroid))
        if abs(d) > best_offset:
            best, best_offset = (1.0 if d * expected > 0 else -1.0), abs(d)
    return best


def build_anatomical_frame(
    landmarks: Sequence[Landmark3D],
    policy: Optional[AxisPolicy] = None,
    vertices: Optional[np.ndarray] = None,
) -> AnatomicalFrame:
    """
    Build the landmark-based box frame.

    Args:
        landmarks: Named 3D landmarks with visibility and confidence
        policy: Candidate pairs per axis (quadruped defaults when None)
        vertices: Optional mesh vertices used by the PCA fallback instead of
                  the landmark positions

    Returns:
        AnatomicalFrame with axis provenance

    Raises:
        InsufficientLandmarks: fewer than 2 landmarks, or no reliable
            landmark to orient a fallback axis
        DegenerateAxis: all reliable pairs for an axis are degenerate
    """
    if len(landmarks) < 2:
        raise InsufficientLandmarks(f"need at least 2 landmarks, got {len(landmarks)}")
    policy = policy or AxisPolicy()
    by_name = {lm.name: lm for lm in landmarks}
    cloud = np.asarray(vertices, dtype=float) if vertices is not None else np.array([lm.position for lm in landmarks])

    x_dir, x_source = _select_pair("x", policy.x_pairs, by_name, policy)
    axes = None
    if x_dir is None:
        evals, axes = _principal_axes(cloud)
        if evals[0] <= 0.0:
            raise InsufficientLandmarks("point cloud has no spread for a PCA fallback axis")
        centroid = cloud.mean(axis=0)
        x_dir = axes[:, 0].copy()
        sign = _sign_from_roles(x_dir, policy.x_pairs, by_name, policy, centroid, policy.x_roles)
        if sign is None:
            raise InsufficientLandmarks("no reliable landmark to orient the fallback x-axis")
        x_dir *= sign
        x_source = PCA_FALLBACK
        logger.info("No reliable x-axis pair; using PCA fallback axis")

    x_unit = x_dir / np.linalg.norm(x_dir)
    min_sin = np.sin(MIN_AXIS_ANGLE_RAD)

    def parallel_to_x(direction: np.ndarray) -> bool:
        return np.linalg.norm(np.cross(x_unit, direction / np.linalg.norm(direction))) < min_sin

    y_dir, y_source = _select_pair("y", policy.y_pairs, by_name, policy, reject=parallel_to_x)
    if y_dir is None:
        if axes is None:
            _, axes = _principal_axes(cloud)
        centroid = cloud.mean(axis=0)
        candidates = [axes[:, k] for k in range(3) if abs(np.dot(axes[:, k], x_unit)) < np.sqrt(0.5)]
        y_dir = candidates[0].copy()
        sign = _sign_from_roles(y_dir, policy.y_pairs, by_name, policy, centroid, policy.y_roles)
        if sign is not None:
            y_dir *= sign
        y_source = PCA_FALLBACK
        logger.info("No reliable y-axis pair; using PCA fallback axis")

    return orthonormalize(x_dir, y_dir, x_source=x_source, y_source=y_source)


def pca_frame(vertices: np.ndarray) -> AnatomicalFrame:
    """
    PCA baseline frame: covariance eigenvectors by descending eigenvalue.

    Each column's largest-magnitude component is made positive, then the last
    column is flipped if needed so det = +1.
    """
    points = np.asarray(getattr(vertices, "vertices", vertices), dtype=float)
    if points.ndim != 2 or points.shape[1] != 3 or len(points) < 3:
        raise DegenerateCloud("need an N x 3 array with N >= 3")
    evals, evecs = _principal_axes(points)
    if evals[0] <= 0.0 or evals[1] <= 1e-10 * evals[0]:
        raise DegenerateCloud("covariance rank < 2 (points are collinear)")
    evecs = evecs.copy()
    for k in range(3):
        col = evecs[:, k]
        if col[np.argmax(np.abs(col))] < 0:
            evecs[:, k] = -col
    if np.linalg.det(evecs) < 0:
        evecs[:, 2] = -evecs[:, 2]
    return AnatomicalFrame(evecs, "pca", "pca")


def orthonormalize(
    x_raw: np.ndarray,
    y_raw: np.ndarray,
    x_source: str = "x_raw",
    y_source: str = "y_raw",
) -> AnatomicalFrame:
    """
    Gram-Schmidt step: x = normalize(x_raw), z = normalize(x cross y_raw), y = z cross x.

    Raises:
        ParallelAxes: either input is zero or they are closer than 1e-6 rad
    """
    x_raw = np.asarray(x_raw, dtype=float).reshape(3)
    y_raw = np.asarray(y_raw, dtype=float).reshape(3)
    nx, ny = np.linalg.norm(x_raw), np.linalg.norm(y_raw)
    if nx <= 0.0 or ny <= 0.0 or not (np.isfinite(nx) and np.isfinite(ny)):
        raise ParallelAxes("axis directions must be finite and nonzero")
    x = x_raw / nx
    cross = np.cross(x, y_raw / ny)
    s = np.linalg.norm(cross)
    if s < np.sin(MIN_AXIS_ANGLE_RAD):
        raise ParallelAxes("x and y directions are parallel")
    z = cross / s
    y = np.cross(z, x)
    return AnatomicalFrame(np.column_stack([x, y, z]), x_source, y_source)
