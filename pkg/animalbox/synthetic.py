"""
Seeded synthetic quadruped scenes with a known camera.

The animal is built in a body frame whose axes are the anatomical ones
(x anterior -> posterior, y left -> right, z dorsal), turned by a random yaw
and viewed by a look-at camera whose focal length keeps the animal at a fixed
fraction of the image width. The mask bbox is the exact bound of the
noiseless keypoint projections.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

import cv2
import numpy as np
from scipy.spatial.transform import Rotation

from animalbox.frame import Landmark3D, build_anatomical_frame
from animalbox.obox import MeshVertices, generate_obox
from animalbox.pose import MIN_DEPTH, CameraPose, Correspondence, Intrinsics, MaskBBox, depth_flip, project
from animalbox.scene_io import SceneInput, write_scene

logger = logging.getLogger(__name__)

# body frame, nose towards -x
BODY_LANDMARKS: Dict[str, Tuple[float, float, float]] = {
    "nose": (-0.95, 0.0, 0.30),
    "left_ear": (-0.85, -0.08, 0.45),
    "right_ear": (-0.85, 0.08, 0.45),
    "neck": (-0.65, 0.0, 0.30),
    "withers": (-0.45, 0.0, 0.25),
    "tail_base": (0.55, 0.0, 0.15),
    "tail_tip": (0.85, 0.0, -0.05),
    "left_shoulder": (-0.45, -0.18, 0.05),
    "right_shoulder": (-0.45, 0.18, 0.05),
    "left_hip": (0.40, -0.18, 0.05),
    "right_hip": (0.40, 0.18, 0.05),
    "left_elbow": (-0.45, -0.18, -0.25),
    "right_elbow": (-0.45, 0.18, -0.25),
    "left_knee": (0.42, -0.18, -0.25),
    "right_knee": (0.42, 0.18, -0.25),
    "left_front_paw": (-0.45, -0.18, -0.55),
    "right_front_paw": (-0.45, 0.18, -0.55),
    "left_back_paw": (0.42, -0.18, -0.55),
    "right_back_paw": (0.42, 0.18, -0.55),
}

# (from, to, radius) capsules along the skeleton
_LIMBS: Tuple[Tuple[str, str, float], ...] = (
    ("withers", "neck", 0.09),
    ("neck", "nose", 0.07),
    ("tail_base", "tail_tip", 0.03),
    ("left_shoulder", "left_elbow", 0.05),
    ("left_elbow", "left_front_paw", 0.04),
    ("right_shoulder", "right_elbow", 0.05),
    ("right_elbow", "right_front_paw", 0.04),
    ("left_hip", "left_knee", 0.06),
    ("left_knee", "left_back_paw", 0.04),
    ("right_hip", "right_knee", 0.06),
    ("right_knee", "right_back_paw", 0.04),
)

# keypoints observed on the depth-flipped animal in flipped_detection_scene
FLIPPED_DETECTIONS = ("nose", "tail_base", "left_shoulder", "right_shoulder")
FLIPPED_CONFIDENCE = 0.3


@dataclass(frozen=True)
class SyntheticScene:
    scene: SceneInput
    pose: CameraPose
    body_rotation: np.ndarray
    clean_uv: np.ndarray

    @property
    def name(self) -> str:
        return self.scene.name


def quadruped_landmarks(round_cross_section: bool = True) -> Dict[str, np.ndarray]:
    """
    Body-frame landmark positions.

    With `round_cross_section` the lateral (y) offsets are scaled so the
    cloud's left-right variance equals the smaller principal variance of its
    sagittal (x-z) spread: the two minor principal axes are then tied, which
    leaves a PCA frame free to spin about the body axis.
    """
    names = list(BODY_LANDMARKS)
    pts = np.array([BODY_LANDMARKS[n] for n in names], dtype=float)
    if round_cross_section:
        xz = pts[:, [0, 2]] - pts[:, [0, 2]].mean(axis=0)
        minor = np.linalg.eigvalsh(xz.T @ xz / len(pts))[0]
        lateral = np.mean(pts[:, 1] ** 2)
        pts[:, 1] *= np.sqrt(minor / lateral)
    return {n: pts[i] for i, n in enumerate(names)}


def _ellipsoid(rng: np.random.Generator, center, radii, count: int) -> np.ndarray:
    d = rng.standard_normal((count, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return np.asarray(center) + d * np.asarray(radii)


def _capsule(rng: np.random.Generator, a: np.ndarray, b: np.ndarray, radius: float, count: int) -> np.ndarray:
    axis = b - a
    length = np.linalg.norm(axis)
    u = axis / length
    helper = np.array([0.0, 0.0, 1.0]) if abs(u[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(u, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(u, e1)
    t = rng.uniform(0.0, 1.0, count)
    phi = rng.uniform(0.0, 2.0 * np.pi, count)
    ring = radius * (np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2)
    return a + t[:, None] * axis + ring


def quadruped_mesh(rng: np.random.Generator, landmarks: Dict[str, np.ndarray], density: int = 40) -> np.ndarray:
    """Vertex cloud: torso and head ellipsoids plus skeleton capsules, in the body frame."""
    width = abs(landmarks["right_hip"][1] - landmarks["left_hip"][1])
    front, back = landmarks["withers"][0], landmarks["tail_base"][0]
    parts = [
        _ellipsoid(rng, ((front + back) / 2, 0.0, 0.12), ((back - front) / 2 + 0.08, width / 2 + 0.04, 0.2),
                   density * 10),
        _ellipsoid(rng, landmarks["nose"] * 0.5 + landmarks["neck"] * 0.5 + [0.0, 0.0, 0.05],
                   (0.18, 0.08, 0.1), density * 2),
    ]
    for a, b, r in _LIMBS:
        parts.append(_capsule(rng, landmarks[a], landmarks[b], r, density))
    return np.vstack(parts)


def look_at(camera_center: np.ndarray, target: np.ndarray) -> CameraPose:
    """World -> camera pose looking from `camera_center` at `target` with world z up (image y down)."""
    forward = np.asarray(target, dtype=float) - np.asarray(camera_center, dtype=float)
    forward /= np.linalg.norm(forward)
    up = np.array([0.0, 0.0, 1.0]) if abs(forward[2]) < 0.99 else np.array([1.0, 0.0, 0.0])
    right = np.cross(forward, up)
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    r = np.vstack([right, down, forward])
    return CameraPose(r, -r @ np.asarray(camera_center, dtype=float))


def make_quadruped_scene(
    rng: np.random.Generator,
    name: str = "quadruped",
    distance_lengths: Union[float, Tuple[float, float]] = (3.0, 15.0),
    elevation_deg: Union[float, Tuple[float, float]] = (5.0, 45.0),
    azimuth_deg: Optional[float] = None,
    yaw_deg: Optional[float] = None,
    image_size: Tuple[int, int] = (2400, 2400),
    span_frac: float = 0.6,
    noise_px: float = 0.0,
    occluded: Iterable[str] = (),
    round_cross_section: bool = True,
    flatten: float = 1.0,
    raster_mask: bool = False,
) -> SyntheticScene:
    """
    One seeded quadruped scene.

    Args:
        rng: Generator for shape, viewpoint and noise
        distance_lengths: Camera distance in body lengths (fixed or a range)
        elevation_deg: Camera elevation above the ground plane (fixed or a range)
        azimuth_deg: Camera azimuth; random when None
        yaw_deg: Animal heading; random when None
        image_size: (width, height)
        span_frac: Fraction of the image width the body length spans
        noise_px: Std of Gaussian noise added to the observed 2D keypoints
        occluded: Keypoint names marked not visible
        flatten: Scale applied to the landmarks' dorsal (z) coordinates;
                 values near 0 give a near-planar keypoint configuration
        raster_mask: Also rasterize the mesh silhouette (convex hull) as a mask

    Returns:
        SyntheticScene with the scene and its ground-truth pose
    """

    def pick(value) -> float:
        return float(rng.uniform(*value)) if isinstance(value, tuple) else float(value)

    landmarks = quadruped_landmarks(round_cross_section)
    body_vertices = quadruped_mesh(rng, landmarks)
    if flatten != 1.0:
        landmarks = {n: p * np.array([1.0, 1.0, flatten]) for n, p in landmarks.items()}

    yaw = pick((0.0, 360.0)) if yaw_deg is None else float(yaw_deg)
    body_rot = Rotation.from_euler("z", yaw, degrees=True).as_matrix()
    vertices = body_vertices @ body_rot.T
    names = list(landmarks)
    points = np.array([landmarks[n] for n in names]) @ body_rot.T

    length = float(np.ptp(body_vertices[:, 0]))
    distance = pick(distance_lengths) * length
    elevation = np.radians(pick(elevation_deg))
    azimuth = np.radians(pick((0.0, 360.0)) if azimuth_deg is None else azimuth_deg)
    target = vertices.mean(axis=0)
    center = target + distance * np.array(
        [np.cos(elevation) * np.cos(azimuth), np.cos(elevation) * np.sin(azimuth), np.sin(elevation)]
    )
    pose = look_at(center, target)

    width, height = image_size
    focal = span_frac * width * distance / length
    intrinsics = Intrinsics(focal, focal, width / 2.0, height / 2.0, width, height)

    clean_uv = project(pose, intrinsics, points).uv
    observed = clean_uv + rng.normal(0.0, noise_px, size=clean_uv.shape) if noise_px > 0 else clean_uv.copy()
    hidden = set(occluded)
    corrs = tuple(
        Correspondence(points[i], observed[i], visible=n not in hidden, name=n) for i, n in enumerate(names)
    )
    bbox = MaskBBox(*clean_uv.min(axis=0), *clean_uv.max(axis=0))

    mask = None
    if raster_mask:
        uv = project(pose, intrinsics, vertices).uv
        hull = cv2.convexHull(np.round(uv).astype(np.int32))
        canvas = np.zeros((height, width), dtype=np.uint8)
        cv2.fillConvexPoly(canvas, hull, 1)
        mask = canvas > 0

    scene = SceneInput(
        name=name,
        mesh=MeshVertices(vertices),
        correspondences=corrs,
        mask_bbox=bbox,
        intrinsics=intrinsics,
        image_width=width,
        image_height=height,
        mask=mask,
        extras={"distance": distance, "elevation_deg": float(np.degrees(elevation)), "yaw_deg": yaw},
    )
    logger.debug("Synthetic scene %s: distance %.2f, elevation %.1f deg, yaw %.1f deg",
                 name, distance, np.degrees(elevation), yaw)
    return SyntheticScene(scene, pose, body_rot, clean_uv)


def overhead_scene(rng: np.random.Generator, name: str = "zebra_overhead", **kwargs) -> SyntheticScene:
    """Camera nearly straight above the animal."""
    kwargs.setdefault("distance_lengths", 6.0)
    return make_quadruped_scene(rng, name=name, elevation_deg=85.0, **kwargs)


def near_planar_scene(rng: np.random.Generator, name: str = "near_planar", noise_px: float = 3.0, **kwargs) -> SyntheticScene:
    """Keypoints squashed into a near-horizontal slab, seen from high above with 3 px noise."""
    kwargs.setdefault("elevation_deg", (55.0, 80.0))
    kwargs.setdefault("distance_lengths", (6.0, 15.0))
    return make_quadruped_scene(rng, name=name, noise_px=noise_px, flatten=0.05, **kwargs)


def flipped_detection_scene(
    rng: np.random.Generator,
    name: str = "flipped_detection",
    image_size: Tuple[int, int] = (2400, 2400),
) -> SyntheticScene:
    """
    Close head-on view whose visible keypoints were detected on the animal turned over in depth.

    The camera looks along the box x-axis at the keypoint centroid from a
    distance halfway between the centroid's reach to the near and far box
    faces. The visible keypoints (nose, tail base, shoulders) carry
    confidence 0.3 and sit where the pose turned 180 degrees about the
    camera x-axis through the centroid projects them; that pose puts the
    camera inside the box, so an EPnP fit to them yields a degenerate label.
    Occluded keypoints and the mask bbox follow the true pose.

    Raises:
        ValueError: the keypoint centroid sits midway along the box, or a
            keypoint would land behind the camera
    """
    landmarks = quadruped_landmarks()
    body_vertices = quadruped_mesh(rng, landmarks)
    yaw = float(rng.uniform(0.0, 360.0))
    body_rot = Rotation.from_euler("z", yaw, degrees=True).as_matrix()
    vertices = body_vertices @ body_rot.T
    names = list(landmarks)
    points = np.array([landmarks[n] for n in names]) @ body_rot.T
    flipped_mask = np.array([n in FLIPPED_DETECTIONS for n in names])

    frame = build_anatomical_frame(
        [Landmark3D(n, points[i], bool(flipped_mask[i]), FLIPPED_CONFIDENCE if flipped_mask[i] else 1.0)
         for i, n in enumerate(names)],
        vertices=vertices,
    )
    box = generate_obox(MeshVertices(vertices), frame)
    centroid = points.mean(axis=0)
    forward = frame.x_axis
    reach = (box.corners_world - centroid) @ forward
    near, far = -reach.min(), reach.max()
    if near > far:
        near, far, forward = far, near, -forward
    if far - near < 1e-3 * (far + near):
        raise ValueError("keypoint centroid sits midway along the box")
    distance = 0.5 * (near + far)
    pose = look_at(centroid - distance * forward, centroid)
    flipped = depth_flip(pose, np.array([0.0, 0.0, distance]))

    true_cam = pose.to_camera(points)
    flip_cam = flipped.to_camera(points[flipped_mask])
    if np.any(true_cam[:, 2] <= MIN_DEPTH) or np.any(flip_cam[:, 2] <= MIN_DEPTH):
        raise ValueError("a keypoint lands behind the camera")
    spread = max(np.abs(true_cam[:, :2] / true_cam[:, 2:]).max(), np.abs(flip_cam[:, :2] / flip_cam[:, 2:]).max())

    width, height = image_size
    focal = 0.45 * min(width, height) / spread
    intrinsics = Intrinsics(focal, focal, width / 2.0, height / 2.0, width, height)
    clean_uv = project(pose, intrinsics, points).uv
    observed = clean_uv.copy()
    observed[flipped_mask] = project(flipped, intrinsics, points[flipped_mask]).uv
    corrs = tuple(
        Correspondence(
            points[i], observed[i], visible=bool(flipped_mask[i]),
            confidence=FLIPPED_CONFIDENCE if flipped_mask[i] else None, name=n,
        )
        for i, n in enumerate(names)
    )

    scene = SceneInput(
        name=name,
        mesh=MeshVertices(vertices),
        correspondences=corrs,
        mask_bbox=MaskBBox(*clean_uv.min(axis=0), *clean_uv.max(axis=0)),
        intrinsics=intrinsics,
        image_width=width,
        image_height=height,
        extras={"distance": float(distance), "yaw_deg": yaw, "box_clearance": float(0.5 * (far - near))},
    )
    logger.debug("Flipped-detection scene %s: distance %.3f, clearance %.3f", name, distance, 0.5 * (far - near))
    return SyntheticScene(scene, pose, body_rot, clean_uv)


def corrupt_extreme_keypoint(syn: SyntheticScene, offset_px: float = 30.0) -> Tuple[SyntheticScene, int]:
    """Shift the observed keypoint with the largest u outward by `offset_px`; the mask stays exact."""
    corrs = list(syn.scene.correspondences)
    idx = int(np.argmax([c.point2d[0] for c in corrs]))
    corrs[idx] = replace(corrs[idx], point2d=corrs[idx].point2d + np.array([offset_px, 0.0]))
    return replace(syn, scene=replace(syn.scene, correspondences=tuple(corrs))), idx


def scene_suite(seed: int, count: int, **kwargs) -> List[SyntheticScene]:
    """`count` scenes, scene i drawn from its own (seed, i) stream."""
    return [
        make_quadruped_scene(np.random.default_rng([seed, i]), name=f"synthetic_{i:04d}", **kwargs)
        for i in range(count)
    ]


def write_synthetic(syn: SyntheticScene, directory: Union[str, Path]) -> Path:
    """Write the scene in the manifest format, ground-truth pose under `extras`."""
    scene = syn.scene
    quat = Rotation.from_matrix(syn.pose.rotation).as_quat()
    extras = dict(scene.extras)
    extras["ground_truth"] = {
        "quaternion": [float(v) for v in quat],
        "translation": [float(v) for v in syn.pose.translation],
    }
    return write_scene(
        directory,
        scene.name,
        scene.mesh.vertices,
        scene.correspondences,
        scene.image_width,
        scene.image_height,
        mask=scene.mask,
        mask_bbox=scene.mask_bbox,
        intrinsics=scene.intrinsics,
        extras=extras,
    )
