"""
Face visibility and profile percentages for an oriented box.

A face is visible when its outward normal points at the camera
(n . normalize(C - face_center) > 0). Each visible face's projected area is
measured with the shoelace formula and expressed as a percentage of the
total projected area of all visible faces.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Set, Tuple

import numpy as np

from animalbox.errors import BehindCamera, CameraInsideBox
from animalbox.obox import FACE_CORNERS, FACE_LABELS, OrientedBox
from animalbox.pose import CameraPose, Intrinsics, project

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FaceVisibility:
    face: str
    visible: bool
    normal: np.ndarray
    center: np.ndarray
    projected_area: float
    percentage: float
    behind_camera: bool = False


def camera_position(pose: CameraPose) -> np.ndarray:
    """World-space camera centre C = -R^T t."""
    return -pose.rotation.T @ pose.translation


def face_normals(box: OrientedBox) -> Dict[str, Tuple[np.ndarray, np.ndarray]]:
    """
    Outward unit normal and centre per face label.

    The normal comes from the face's first corner triple,
    normalize((v1 - v0) x (v3 - v0)), and is negated when it points towards
    the box centre.
    """
    box_center = box.center
    out = {}
    for label in FACE_LABELS:
        quad = box.corners_world[list(FACE_CORNERS[label])]
        v0, v1, _, v3 = quad
        n = np.cross(v1 - v0, v3 - v0)
        n = n / np.linalg.norm(n)
        center = quad.mean(axis=0)
        if np.dot(n, center - box_center) < 0:
            n = -n
        out[label] = (n, center)
    return out


def _check_outside(box: OrientedBox, cam: np.ndarray) -> None:
    local = box.to_local(cam)
    if np.all(local >= box.local_min) and np.all(local <= box.local_max):
        raise CameraInsideBox("camera centre lies inside the box")


def visible_faces(box: OrientedBox, cam: np.ndarray) -> Set[str]:
    """Labels of faces whose outward normal faces the camera."""
    cam = np.asarray(cam, dtype=float).reshape(3)
    _check_outside(box, cam)
    visible = set()
    for label, (n, center) in face_normals(box).items():
        view = cam - center
        if np.dot(n, view / np.linalg.norm(view)) > 0:
            visible.add(label)
    return visible


def shoelace_area(polygon: np.ndarray) -> float:
    """Area = 1/2 |sum(x_i y_{i+1} - y_i x_{i+1})| over the polygon in order."""
    p = np.asarray(polygon, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def projected_area(face_corners_world: np.ndarray, pose: CameraPose, intrinsics: Intrinsics) -> float:
    """
    Projected pixel area of a face quad.

    Raises:
        BehindCamera: any corner at non-positive depth
    """
    proj = project(pose, intrinsics, face_corners_world)
    if not proj.all_in_front:
        raise BehindCamera("face has a corner behind the camera")
    return shoelace_area(proj.uv)


def visibility_report(box: OrientedBox, pose: CameraPose, intrinsics: Intrinsics) -> List[FaceVisibility]:
    """
    Visibility, projected area and percentage for all six faces in label order.

    Faces with a corner behind the camera contribute area 0 and are flagged.
    """
    cam = camera_position(pose)
    visible = visible_faces(box, cam)
    normals = face_normals(box)

    areas, flags = {}, {}
    for label in FACE_LABELS:
        if label not in visible:
            areas[label], flags[label] = 0.0, False
            continue
        try:
            areas[label], flags[label] = projected_area(box.face_corners(label), pose, intrinsics), False
        except BehindCamera:
            logger.warning("Face %s crosses the camera plane; area set to 0", label)
            areas[label], flags[label] = 0.0, True

    total = sum(areas.values())
    report = []
    for label in FACE_LABELS:
        n, center = normals[label]
        pct = 100.0 * areas[label] / total if total > 0 else 0.0
        report.append(FaceVisibility(label, label in visible, n, center, areas[label], pct, flags[label]))
    return report


def percentages(report: List[FaceVisibility]) -> Dict[str, float]:
    return {f.face: f.percentage for f in report}
