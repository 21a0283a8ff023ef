"""
Oriented 3D bounding box in an anatomical frame.

Vertices are mapped into the box frame with V_local = R_box^T (V_world - c),
the local extents are padded by epsilon, and the 8 corners are mapped back
with corners_world = R_box @ corners_local + c.

Corner i has local coordinates (x[ix], y[iy], z[iz]) with i = 4*ix + 2*iy + iz,
where index 0 selects the minimum and 1 the maximum of that axis.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Dict, Tuple, Union

import numpy as np

from animalbox.errors import EmptyMesh, InvalidFrame, ValidationError
from animalbox.frame import AnatomicalFrame

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-5
# Half-thickness given to a flat axis when epsilon is zero.
_MIN_HALF_THICKNESS = 1e-9

# label -> (axis index, side); the single source for face semantics.
# x runs anterior -> posterior, so the anterior (front) face is at -x.
FACE_TABLE: Dict[str, Tuple[int, int]] = {
    "front": (0, -1),
    "back": (0, +1),
    "left": (1, -1),
    "right": (1, +1),
    "top": (2, +1),
    "bottom": (2, -1),
}
FACE_LABELS: Tuple[str, ...] = tuple(FACE_TABLE)


def corner_index(ix: int, iy: int, iz: int) -> int:
    return 4 * ix + 2 * iy + iz


def _face_corner_indices() -> Dict[str, Tuple[int, int, int, int]]:
    """Corner indices per face, in cyclic order around the quad."""
    table = {}
    for label, (axis, side) in FACE_TABLE.items():
        fixed = 1 if side > 0 else 0
        b, c = [k for k in range(3) if k != axis]
        quad = []
        for ib, ic in ((0, 0), (1, 0), (1, 1), (0, 1)):
            bits = [0, 0, 0]
            bits[axis], bits[b], bits[c] = fixed, ib, ic
            quad.append(corner_index(*bits))
        table[label] = tuple(quad)
    return table


FACE_CORNERS: Dict[str, Tuple[int, int, int, int]] = _face_corner_indices()

# The 12 edges: corner pairs differing in exactly one index bit.
BOX_EDGES: Tuple[Tuple[int, int], ...] = tuple(
    (i, j) for i in range(8) for j in range(i + 1, 8) if bin(i ^ j).count("1") == 1
)


@dataclass(frozen=True)
class MeshVertices:
    """World-space mesh vertices (V_world). Fewer than 4 or coplanar points are flagged, not rejected."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.size == 0:
            raise EmptyMesh("mesh has no vertices")
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValidationError("mesh.vertices", f"expected N x 3 array, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("mesh.vertices", "all coordinates must be finite")
        object.__setattr__(self, "vertices", v)

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def is_coplanar(self) -> bool:
        if len(self.vertices) < 4:
            return True
        centered = self.vertices - self.vertices.mean(axis=0)
        s = np.linalg.svd(centered, compute_uv=False)
        return bool(s[2] <= 1e-12 * max(s[0], 1e-300))


MeshLike = Union[MeshVertices, np.ndarray]


def _as_mesh(mesh: MeshLike) -> MeshVertices:
    return mesh if isinstance(mesh, MeshVertices) else MeshVertices(np.asarray(mesh, dtype=float))


@dataclass(frozen=True)
class OrientedBox:
    """Oriented box: centroid c, frame R_box, padded local extents and world corners."""

    centroid: np.ndarray
    frame: AnatomicalFrame
    local_min: np.ndarray
    local_max: np.ndarray
    corners_world: np.ndarray
    margin: float
    coplanar: bool = False

    @property
    def rotation(self) -> np.ndarray:
        return self.frame.rotation

    @property
    def extents(self) -> np.ndarray:
        return self.local_max - self.local_min

    @property
    def volume(self) -> float:
        return float(np.prod(self.local_max - self.local_min))

    @property
    def center(self) -> np.ndarray:
        """Geometric box centre (mean of the 8 corners); differs from the mesh centroid."""
        return self.corners_world.mean(axis=0)

    @property
    def corners_local(self) -> np.ndarray:
        return local_corners(self.local_min, self.local_max)

    def to_local(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=float) - self.centroid) @ self.rotation

    def face_corners(self, label: str) -> np.ndarray:
        return self.corners_world[list(FACE_CORNERS[label])]


def local_corners(local_min: np.ndarray, local_max: np.ndarray) -> np.ndarray:
    """8 x 3 corners in fixed order, x slowest-varying."""
    axes = [(local_min[k], local_max[k]) for k in range(3)]
    return np.array(list(itertools.product(*axes)), dtype=float)


def compute_centroid(mesh: MeshLike) -> np.ndarray:
    """Arithmetic mean of the vertices, accumulated with exact (fsum) summation."""
    v = _as_mesh(mesh).vertices
    n = len(v)
    return np.array([math.fsum(v[:, k]) / n for k in range(3)])


def generate_obox(mesh: MeshLike, frame: AnatomicalFrame, epsilon: float = DEFAULT_EPSILON) -> OrientedBox:
    """
    Tight box around the mesh in the given frame, padded by epsilon.

    Args:
        mesh: Mesh vertices (MeshVertices or N x 3 array)
        frame: Box orientation; must be a proper orthonormal rotation
        epsilon: Symmetric padding in mesh units

    Returns:
        OrientedBox with world corners in fixed order

    Raises:
        EmptyMesh: no vertices
        InvalidFrame: frame fails the orthonormality check
    """
    mesh = _as_mesh(mesh)
    if not frame.is_valid():
        raise InvalidFrame(f"frame is not a proper rotation (orthonormality error {frame.orthonormality_error():.3e})")
    if not epsilon >= 0.0:
        raise ValidationError("epsilon", "must be >= 0")

    c = compute_centroid(mesh)
    r = frame.rotation
    local = (mesh.vertices - c) @ r
    raw_min, raw_max = local.min(axis=0), local.max(axis=0)
    local_min, local_max = raw_min - epsilon, raw_max + epsilon

    flat = raw_max - raw_min <= 0.0
    coplanar = mesh.is_coplanar or bool(np.any(flat))
    if epsilon == 0.0 and np.any(flat):
        local_min = np.where(flat, local_min - _MIN_HALF_THICKNESS, local_min)
        local_max = np.where(flat, local_max + _MIN_HALF_THICKNESS, local_max)
    if coplanar:
        logger.warning("Mesh is coplanar; flat box axis widened to the margin")

    corners_local = local_corners(local_min, local_max)
    corners_world = corners_local @ r.T + c
    return OrientedBox(
        centroid=c,
        frame=frame,
        local_min=local_min,
        local_max=local_max,
        corners_world=corners_world,
        margin=float(epsilon),
        coplanar=coplanar,
    )


def enclosure_check(box: OrientedBox, mesh: MeshLike) -> float:
    """Fraction of vertices inside the closed box [local_min, local_max]."""
    v = _as_mesh(mesh).vertices
    local = (v - box.centroid) @ box.rotation
    inside = np.all((local >= box.local_min) & (local <= box.local_max), axis=1)
    return float(np.count_nonzero(inside)) / len(v)
