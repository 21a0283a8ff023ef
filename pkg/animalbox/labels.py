"""
Label3D output record and its JSON serialization.

All fields are plain Python scalars and tuples so a label compares equal to
its own parse(serialize(label)); JSON floats are written with repr and come
back bit-exact.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from scipy.spatial.transform import Rotation

from animalbox.errors import ParseError, ValidationError
from animalbox.pose import CameraPose, Intrinsics

SCHEMA_VERSION = 1

Vec2 = Tuple[float, float]
Vec3 = Tuple[float, float, float]


def _vec(values) -> tuple:
    return tuple(float(v) for v in values)


def _rows(values) -> tuple:
    return tuple(_vec(r) for r in values)


@dataclass(frozen=True)
class PoseRecord:
    """Camera pose as a unit quaternion (x, y, z, w with w >= 0) plus translation."""

    quaternion: Tuple[float, float, float, float]
    translation: Vec3

    @classmethod
    def from_pose(cls, pose: CameraPose) -> "PoseRecord":
        q = Rotation.from_matrix(pose.rotation).as_quat()
        if q[3] < 0:
            q = -q
        return cls(_vec(q), _vec(pose.translation))

    def to_pose(self, refined: bool = False) -> CameraPose:
        return CameraPose(Rotation.from_quat(self.quaternion).as_matrix(), np.array(self.translation), refined)


@dataclass(frozen=True)
class FaceRecord:
    face: str
    visible: bool
    percentage: float
    projected_area: float
    behind_camera: bool = False


@dataclass(frozen=True)
class IntrinsicsRecord:
    fx: float
    fy: float
    cx: float
    cy: float
    image_width: int
    image_height: int
    estimated: bool = False

    @classmethod
    def from_intrinsics(cls, intr: Intrinsics, estimated: bool = False) -> "IntrinsicsRecord":
        return cls(float(intr.fx), float(intr.fy), float(intr.cx), float(intr.cy),
                   int(intr.image_width), int(intr.image_height), bool(estimated))

    def to_intrinsics(self) -> Intrinsics:
        return Intrinsics(self.fx, self.fy, self.cx, self.cy, self.image_width, self.image_height)


@dataclass(frozen=True)
class Diagnostics:
    reprojection_error_px: Optional[float] = None
    initial_reprojection_error_px: Optional[float] = None
    inliers: int = 0
    keypoints: int = 0
    refinement_evaluations: int = 0
    restarted: bool = False
    refined: bool = False
    init_used_occluded: bool = False


@dataclass(frozen=True)
class Label3D:
    scene: str
    corners_world: Tuple[Vec3, ...]
    corners_projected: Tuple[Vec2, ...]
    pose: PoseRecord
    initial_pose: PoseRecord
    intrinsics: IntrinsicsRecord
    faces: Tuple[FaceRecord, ...]
    x_source: str
    y_source: str
    frame_axes: Tuple[Vec3, Vec3, Vec3]
    local_min: Vec3
    local_max: Vec3
    volume: float
    margin: float
    coplanar: bool = False
    degenerate: bool = False
    degenerate_reason: Optional[str] = None
    diagnostics: Diagnostics = field(default_factory=Diagnostics)
    schema_version: int = SCHEMA_VERSION

    @property
    def percentages(self) -> Dict[str, float]:
        return {f.face: f.percentage for f in self.faces}

    @property
    def visible_faces(self) -> Tuple[str, ...]:
        return tuple(f.face for f in self.faces if f.visible)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["corners_world"] = [list(c) for c in self.corners_world]
        data["corners_projected"] = [list(c) for c in self.corners_projected]
        data["frame_axes"] = [list(a) for a in self.frame_axes]
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Label3D":
        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValidationError("schema_version", f"unsupported version {version!r}")
        try:
            return cls(
                scene=str(data["scene"]),
                corners_world=_rows(data["corners_world"]),
                corners_projected=_rows(data["corners_projected"]),
                pose=PoseRecord(_vec(data["pose"]["quaternion"]), _vec(data["pose"]["translation"])),
                initial_pose=PoseRecord(
                    _vec(data["initial_pose"]["quaternion"]), _vec(data["initial_pose"]["translation"])
                ),
                intrinsics=IntrinsicsRecord(**data["intrinsics"]),
                faces=tuple(FaceRecord(**f) for f in data["faces"]),
                x_source=str(data["x_source"]),
                y_source=str(data["y_source"]),
                frame_axes=_rows(data["frame_axes"]),
                local_min=_vec(data["local_min"]),
                local_max=_vec(data["local_max"]),
                volume=float(data["volume"]),
                margin=float(data["margin"]),
                coplanar=bool(data["coplanar"]),
                degenerate=bool(data["degenerate"]),
                degenerate_reason=data["degenerate_reason"],
                diagnostics=Diagnostics(**data["diagnostics"]),
                schema_version=version,
            )
        except (KeyError, TypeError) as e:
            raise ValidationError("label", f"missing or malformed field: {e}") from e


def dumps_label(label: Label3D) -> str:
    return json.dumps(label.to_dict(), indent=2) + "\n"


def loads_label(text: str, source: str = "<string>") -> Label3D:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(source, e.msg, e.lineno) from e
    if not isinstance(data, dict):
        raise ParseError(source, "label must be a JSON object")
    return Label3D.from_dict(data)


def write_label(label: Label3D, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_label(label), encoding="utf-8")
    return path


def read_label(path: Union[str, Path]) -> Label3D:
    path = Path(path)
    if not path.is_file():
        raise ParseError(path, "label file not found")
    return loads_label(path.read_text(encoding="utf-8"), str(path))
