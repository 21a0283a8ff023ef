"""
Scene ingestion and writing.

A scene is a directory (or a manifest path) holding scene.json, a Wavefront
OBJ mesh (only `v` records are read), a keypoints JSON array, and either a
binary mask PNG or an inline mask bbox. Paths inside the manifest resolve
relative to the manifest's directory.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import cv2
import numpy as np

from animalbox.errors import EmptyMesh, ParseError, ValidationError
from animalbox.frame import Landmark3D
from animalbox.obox import MeshVertices
from animalbox.pose import Correspondence, Intrinsics, MaskBBox

logger = logging.getLogger(__name__)

MANIFEST_NAME = "scene.json"
UV_SLACK = 0.10

PathLike = Union[str, Path]


@dataclass(frozen=True)
class SceneInput:
    """Validated scene: mesh, co-registered 2D/3D keypoints, mask and camera."""

    name: str
    mesh: MeshVertices
    correspondences: Tuple[Correspondence, ...]
    mask_bbox: MaskBBox
    intrinsics: Intrinsics
    image_width: int
    image_height: int
    mask: Optional[np.ndarray] = None
    intrinsics_estimated: bool = False
    image_path: Optional[Path] = None
    source: Optional[Path] = None
    extras: Dict[str, Any] = field(default_factory=dict)

    @property
    def landmarks(self) -> List[Landmark3D]:
        return [
            Landmark3D(c.name, c.point3d, c.visible, 1.0 if c.confidence is None else c.confidence)
            for c in self.correspondences
        ]

    @property
    def visible_count(self) -> int:
        return sum(1 for c in self.correspondences if c.visible)


def read_obj_vertices(path: PathLike) -> np.ndarray:
    """
    Vertex positions from the `v` records of an OBJ file.

    Other records (faces, normals, groups, comments) are ignored. An optional
    fourth (w) component is accepted and dropped.
    """
    path = Path(path)
    vertices = []
    try:
        with path.open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                tokens = line.split()
                if not tokens or tokens[0] != "v":
                    continue
                if len(tokens) not in (4, 5):
                    raise ParseError(path, f"vertex record needs 3 coordinates, got {len(tokens) - 1}", lineno)
                try:
                    vertices.append([float(t) for t in tokens[1:4]])
                except ValueError:
                    raise ParseError(path, "vertex coordinate is not a number", lineno) from None
    except UnicodeDecodeError as e:
        raise ParseError(path, f"not a text file ({e.reason})") from e
    if not vertices:
        raise ValidationError("mesh", f"{path} has no vertex records")
    return np.array(vertices, dtype=float)


def write_obj_vertices(path: PathLike, vertices: np.ndarray) -> None:
    rows = [f"v {float(x)!r} {float(y)!r} {float(z)!r}" for x, y, z in np.asarray(vertices, dtype=float)]
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


def _load_json(path: Path) -> Any:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except UnicodeDecodeError as e:
        raise ParseError(path, f"not UTF-8 text ({e.reason})") from e
    except json.JSONDecodeError as e:
        raise ParseError(path, e.msg, e.lineno) from e


def _numbers(value: Any, count: int, field_name: str) -> List[float]:
    if (
        not isinstance(value, list)
        or len(value) != count
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
    ):
        raise ValidationError(field_name, f"expected {count} numbers")
    return [float(v) for v in value]


def read_keypoints(path: PathLike) -> List[Correspondence]:
    """Keypoint records {name, xyz, uv, visible, confidence?}; names must be unique."""
    path = Path(path)
    data = _load_json(path)
    if not isinstance(data, list):
        raise ParseError(path, "expected a JSON array of keypoint records")
    corrs: List[Correspondence] = []
    seen = set()
    for i, rec in enumerate(data):
        if not isinstance(rec, dict):
            raise ValidationError(f"keypoints[{i}]", "expected an object")
        name = rec.get("name")
        if not isinstance(name, str) or not name:
            raise ValidationError(f"keypoints[{i}].name", "missing or not a string")
        if name in seen:
            raise ValidationError(f"keypoints[{i}].name", f"duplicate keypoint name '{name}'")
        seen.add(name)
        visible = rec.get("visible", True)
        if not isinstance(visible, bool):
            raise ValidationError(f"keypoints[{name}].visible", "expected true/false")
        confidence = rec.get("confidence")
        if confidence is not None:
            confidence = _numbers([confidence], 1, f"keypoints[{name}].confidence")[0]
        corrs.append(
            Correspondence(
                point3d=np.array(_numbers(rec.get("xyz"), 3, f"keypoints[{name}].xyz")),
                point2d=np.array(_numbers(rec.get("uv"), 2, f"keypoints[{name}].uv")),
                visible=visible,
                confidence=confidence,
                name=name,
            )
        )
    return corrs


def write_keypoints(path: PathLike, corrs: Sequence[Correspondence]) -> None:
    records = []
    for c in corrs:
        rec = {
            "name": c.name,
            "xyz": [float(v) for v in c.point3d],
            "uv": [float(v) for v in c.point2d],
            "visible": bool(c.visible),
        }
        if c.confidence is not None:
            rec["confidence"] = float(c.confidence)
        records.append(rec)
    Path(path).write_text(json.dumps(records, indent=2) + "\n", encoding="utf-8")


def read_mask(path: PathLike) -> np.ndarray:
    """Binary mask (nonzero = animal) from a PNG."""
    path = Path(path)
    if not path.is_file():
        raise ParseError(path, "mask file not found")
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise ParseError(path, "could not decode mask image")
    if img.ndim == 3:
        img = img[:, :, 0]
    return img > 0


def _read_intrinsics(value: Any, base: Path, width: int, height: int) -> Tuple[Intrinsics, bool]:
    if value is None:
        logger.info("No intrinsics given; using f = 1.2 * max(W, H) at the image centre")
        return Intrinsics.from_image_size(width, height), True
    if isinstance(value, str):
        path = base / value
        if not path.is_file():
            raise ParseError(path, "intrinsics file not found")
        value = _load_json(path)
    if not isinstance(value, dict):
        raise ValidationError("intrinsics", "expected an object or a file name")
    fx, fy, cx, cy = (_numbers([value.get(k)], 1, f"intrinsics.{k}")[0] for k in ("fx", "fy", "cx", "cy"))
    return Intrinsics(fx, fy, cx, cy, width, height), False


def _check_uv(corrs: Sequence[Correspondence], width: int, height: int) -> None:
    lo_u, hi_u = -UV_SLACK * width, (1 + UV_SLACK) * width
    lo_v, hi_v = -UV_SLACK * height, (1 + UV_SLACK) * height
    for c in corrs:
        u, v = c.point2d
        if not (lo_u <= u <= hi_u and lo_v <= v <= hi_v):
            raise ValidationError(f"keypoints[{c.name}].uv", "outside the image bounds (10% slack)")


def _manifest_path(path: PathLike) -> Path:
    path = Path(path)
    return path / MANIFEST_NAME if path.is_dir() else path


def parse_scene(path: PathLike) -> SceneInput:
    """
    Load and validate a scene.

    Args:
        path: Scene directory or scene.json manifest

    Returns:
        SceneInput; missing intrinsics are filled with the focal heuristic and
        `intrinsics_estimated` is set

    Raises:
        ParseError: missing or malformed file (with line when known)
        ValidationError: a field violates its invariant
    """
    manifest = _manifest_path(path)
    if not manifest.is_file():
        raise ParseError(manifest, "scene manifest not found")
    base = manifest.parent
    data = _load_json(manifest)
    if not isinstance(data, dict):
        raise ParseError(manifest, "manifest must be a JSON object")

    width, height = data.get("image_width"), data.get("image_height")
    for key, value in (("image_width", width), ("image_height", height)):
        if isinstance(value, bool) or not isinstance(value, int) or value <= 0:
            raise ValidationError(key, "expected a positive integer")

    if not isinstance(data.get("mesh"), str):
        raise ValidationError("mesh", "missing mesh file name")
    if not isinstance(data.get("keypoints"), str):
        raise ValidationError("keypoints", "missing keypoints file name")
    mesh_file, kp_file = base / data["mesh"], base / data["keypoints"]
    for f in (mesh_file, kp_file):
        if not f.is_file():
            raise ParseError(f, "file not found")

    try:
        mesh = MeshVertices(read_obj_vertices(mesh_file))
    except EmptyMesh as e:
        raise ValidationError("mesh", str(e)) from e
    corrs = read_keypoints(kp_file)
    if not corrs:
        raise ValidationError("keypoints", "no keypoints")
    _check_uv(corrs, width, height)

    mask = None
    if data.get("mask"):
        mask = read_mask(base / data["mask"])
        if mask.shape != (height, width):
            raise ValidationError("mask", f"shape {mask.shape} does not match {height} x {width}")
        bbox = MaskBBox.from_mask(mask)
    elif data.get("mask_bbox") is not None:
        bbox = MaskBBox(*_numbers(data["mask_bbox"], 4, "mask_bbox"))
        if not bbox.within(width, height):
            raise ValidationError("mask_bbox", f"exceeds the {width} x {height} image")
    else:
        raise ValidationError("mask", "either mask or mask_bbox is required")

    intrinsics, estimated = _read_intrinsics(data.get("intrinsics"), base, width, height)
    image_path = base / data["image_path"] if data.get("image_path") else None
    name = data.get("name") or base.name
    logger.debug("Parsed scene %s: %d vertices, %d keypoints", name, len(mesh), len(corrs))
    return SceneInput(
        name=str(name),
        mesh=mesh,
        correspondences=tuple(corrs),
        mask_bbox=bbox,
        intrinsics=intrinsics,
        image_width=width,
        image_height=height,
        mask=mask,
        intrinsics_estimated=estimated,
        image_path=image_path,
        source=manifest,
        extras=dict(data.get("extras") or {}),
    )


def write_scene(
    directory: PathLike,
    name: str,
    vertices: np.ndarray,
    corrs: Sequence[Correspondence],
    image_width: int,
    image_height: int,
    mask: Optional[np.ndarray] = None,
    mask_bbox: Optional[MaskBBox] = None,
    intrinsics: Optional[Intrinsics] = None,
    extras: Optional[Dict[str, Any]] = None,
) -> Path:
    """Write a scene directory in the manifest format; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_obj_vertices(directory / "mesh.obj", vertices)
    write_keypoints(directory / "keypoints.json", corrs)
    manifest: Dict[str, Any] = {
        "name": name,
        "mesh": "mesh.obj",
        "keypoints": "keypoints.json",
        "mask": None,
        "mask_bbox": None,
        "intrinsics": None,
        "image_width": int(image_width),
        "image_height": int(image_height),
        "image_path": None,
    }
    if mask is not None:
        if not cv2.imwrite(str(directory / "mask.png"), np.asarray(mask, dtype=np.uint8) * 255):
            raise ParseError(directory / "mask.png", "could not write mask image")
        manifest["mask"] = "mask.png"
    elif mask_bbox is not None:
        manifest["mask_bbox"] = [float(v) for v in mask_bbox.as_array()]
    if intrinsics is not None:
        manifest["intrinsics"] = {k: float(getattr(intrinsics, k)) for k in ("fx", "fy", "cx", "cy")}
    if extras:
        manifest["extras"] = extras
    path = directory / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


def find_scenes(root: PathLike) -> List[Path]:
    """Manifests under `root` (the root itself or its immediate subdirectories), sorted."""
    root = Path(root)
    if (root / MANIFEST_NAME).is_file():
        return [root / MANIFEST_NAME]
    return sorted(p / MANIFEST_NAME for p in root.iterdir() if (p / MANIFEST_NAME).is_file())
