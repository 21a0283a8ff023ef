"""
End-to-end labeling: frame -> box -> EPnP/RANSAC -> refinement -> visibility -> degeneracy check.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, TypeVar, Union

import numpy as np

from animalbox.config import PipelineConfig
from animalbox.errors import (
    AnimalBoxError,
    CameraInsideBox,
    DegenerateResult,
    InsufficientLandmarks,
    NoVisibleKeypoints,
    StageError,
)
from animalbox.evaluate import SceneOutcome, detect_degenerate, reprojection_error
from animalbox.frame import PCA_FALLBACK, AnatomicalFrame, build_anatomical_frame, pca_frame
from animalbox.labels import Diagnostics, FaceRecord, IntrinsicsRecord, Label3D, PoseRecord
from animalbox.obox import FACE_LABELS, OrientedBox, generate_obox
from animalbox.pose import MIN_SAMPLE, covariances_for, epnp_ransac, project, refine_pose_detailed
from animalbox.scene_io import SceneInput, parse_scene
from animalbox.visibility import visibility_report

logger = logging.getLogger(__name__)

T = TypeVar("T")


def _stage(name: str, fn: Callable[[], T]) -> T:
    try:
        return fn()
    except StageError:
        raise
    except AnimalBoxError as e:
        raise StageError(name, e) from e


def _frame(scene: SceneInput, config: PipelineConfig) -> AnatomicalFrame:
    try:
        return build_anatomical_frame(scene.landmarks, config.axis_policy, vertices=scene.mesh.vertices)
    except InsufficientLandmarks as e:
        logger.info("Anatomical frame unavailable (%s); using PCA frame of the mesh", e)
        baseline = pca_frame(scene.mesh.vertices)
        return AnatomicalFrame(baseline.rotation, PCA_FALLBACK, PCA_FALLBACK)


def _error_or_none(pose, scene: SceneInput) -> Optional[float]:
    try:
        return reprojection_error(pose, scene.correspondences, scene.intrinsics)
    except NoVisibleKeypoints:
        return None


def run_label(scene: SceneInput, config: Optional[PipelineConfig] = None, refine: bool = True) -> Label3D:
    """
    Label one scene.

    Args:
        scene: Parsed scene
        config: Pipeline configuration (defaults when None)
        refine: False runs the basic path (EPnP/RANSAC pose only)

    Returns:
        Label3D; degenerate results are returned with the flag and reason set

    Raises:
        StageError: a stage failed; `.stage` names it and `.cause` holds the error
    """
    config = config or PipelineConfig()
    intr = scene.intrinsics
    corrs = list(scene.correspondences)

    frame = _stage("frame", lambda: _frame(scene, config))
    box: OrientedBox = _stage("obox", lambda: generate_obox(scene.mesh, frame, config.epsilon))
    logger.info("Scene %s: frame %s/%s, box volume %.4g", scene.name, frame.x_source, frame.y_source, box.volume)

    use_occluded = scene.visible_count < MIN_SAMPLE
    if use_occluded:
        logger.info("Only %d visible keypoints; initializing EPnP from all keypoints", scene.visible_count)
    rng = np.random.default_rng(config.sweep.seed)
    init, inliers = _stage("pose_init", lambda: epnp_ransac(corrs, intr, config.ransac, rng, use_occluded))

    pose, evaluations, restarted = init, 0, False
    if refine:
        covs = covariances_for(corrs, intr, config.uncertainty)
        # keypoints RANSAC never scored keep their weight; rejected ones leave the keypoint term
        sampled = np.array([c.visible or use_occluded for c in corrs], dtype=bool)
        keep = inliers | ~sampled
        result = _stage(
            "refine",
            lambda: refine_pose_detailed(
                init, corrs, covs, scene.mask_bbox, intr, config.refine_options(),
                box_corners=box.corners_world, mask_raster=scene.mask, inliers=keep,
            ),
        )
        pose, evaluations, restarted = result.pose, result.evaluations, result.restarted

    degenerate_reason = None
    try:
        faces = _stage("visibility", lambda: visibility_report(box, pose, intr))
        face_records = tuple(
            FaceRecord(f.face, f.visible, f.percentage, f.projected_area, f.behind_camera) for f in faces
        )
    except StageError as e:
        if not isinstance(e.cause, CameraInsideBox):
            raise
        degenerate_reason = "camera_inside_box"
        face_records = tuple(FaceRecord(label, False, 0.0, 0.0) for label in FACE_LABELS)

    proj = project(pose, intr, box.corners_world)
    if degenerate_reason is None:
        mask = scene.mask if scene.mask is not None else scene.mask_bbox
        check = detect_degenerate(proj.uv, proj.in_front, mask, config.degenerate_area_frac)
        degenerate_reason = check.reason if check.degenerate else None
    if degenerate_reason is not None:
        logger.warning("Scene %s produced a degenerate label (%s)", scene.name, degenerate_reason)

    return Label3D(
        scene=scene.name,
        corners_world=tuple(tuple(float(v) for v in c) for c in box.corners_world),
        corners_projected=tuple(tuple(float(v) for v in c) for c in proj.uv),
        pose=PoseRecord.from_pose(pose),
        initial_pose=PoseRecord.from_pose(init),
        intrinsics=IntrinsicsRecord.from_intrinsics(intr, scene.intrinsics_estimated),
        faces=face_records,
        x_source=frame.x_source,
        y_source=frame.y_source,
        frame_axes=tuple(tuple(float(v) for v in frame.rotation[:, k]) for k in range(3)),
        local_min=tuple(float(v) for v in box.local_min),
        local_max=tuple(float(v) for v in box.local_max),
        volume=box.volume,
        margin=box.margin,
        coplanar=box.coplanar,
        degenerate=degenerate_reason is not None,
        degenerate_reason=degenerate_reason,
        diagnostics=Diagnostics(
            reprojection_error_px=_error_or_none(pose, scene),
            initial_reprojection_error_px=_error_or_none(init, scene),
            inliers=int(np.count_nonzero(inliers)),
            keypoints=len(corrs),
            refinement_evaluations=evaluations,
            restarted=restarted,
            refined=refine,
            init_used_occluded=use_occluded,
        ),
    )


def compare_scene(scene: SceneInput, config: Optional[PipelineConfig] = None) -> SceneOutcome:
    """Basic vs refined labeling of one scene; stage failures are recorded, not raised."""
    config = config or PipelineConfig()
    try:
        basic = run_label(scene, config, refine=False)
    except StageError as e:
        return SceneOutcome(scene.name, failure=str(e))

    refined_error, refined_degenerate, refined_reason, restarted = None, False, None, False
    try:
        refined = run_label(scene, config, refine=True)
        refined_error = refined.diagnostics.reprojection_error_px
        refined_degenerate, refined_reason = refined.degenerate, refined.degenerate_reason
        restarted = refined.diagnostics.restarted
    except StageError as e:
        if not isinstance(e.cause, DegenerateResult):
            return SceneOutcome(scene.name, failure=str(e))
        refined_degenerate, refined_reason = True, "no_valid_branch"

    return SceneOutcome(
        name=scene.name,
        basic_error_px=basic.diagnostics.reprojection_error_px,
        refined_error_px=refined_error,
        basic_degenerate=basic.degenerate,
        basic_reason=basic.degenerate_reason,
        refined_degenerate=refined_degenerate,
        refined_reason=refined_reason,
        restarted=restarted,
    )


def evaluate_scenes(
    scenes: Sequence[Union[SceneInput, str]],
    config: Optional[PipelineConfig] = None,
    workers: int = 4,
) -> List[SceneOutcome]:
    """
    Compare basic and refined labeling over many scenes.

    Scenes are processed in a thread pool, one isolated task per scene;
    outcomes come back in input order. Paths are parsed inside the task so a
    malformed scene only fails its own row.
    """
    config = config or PipelineConfig()

    def task(item) -> SceneOutcome:
        if isinstance(item, SceneInput):
            return compare_scene(item, config)
        try:
            scene = parse_scene(item)
        except (AnimalBoxError, OSError) as e:
            return SceneOutcome(str(item), failure=str(e))
        return compare_scene(scene, config)

    if workers <= 1:
        return [task(s) for s in scenes]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, scenes))
