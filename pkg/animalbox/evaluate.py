"""
Evaluation metrics and the keypoint-noise stability sweep.

Metrics:
    rotation variation   theta_R = arccos((trace(R1 R2^-1) - 1) / 2), degrees
    alignment variation  delta_a = 1 - cos(angle between ideal and actual axis)
    reprojection error   mean pixel distance over visible keypoints
    degeneracy           projected box hull area < frac * mask area, or any corner behind camera

The sweep perturbs keypoints with N(0, sigma^2) pixel noise (and the
equivalent sigma * depth / focal in 3D), rebuilds the anatomical and the PCA
frame, and aggregates their variation against the unperturbed frames.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.transform import Rotation

from animalbox.errors import NoVisibleKeypoints, NotARotation, ValidationError, ZeroVector
from animalbox.frame import AnatomicalFrame, AxisPolicy, Landmark3D, build_anatomical_frame, pca_frame
from animalbox.pose import CameraPose, Correspondence, Intrinsics, MaskBBox, epnp_ransac, project

logger = logging.getLogger(__name__)

PAPER_SIGMAS: Tuple[float, ...] = (0.5, 1.0, 2.0, 3.0, 4.0)
ROTATION_TOL = 1e-6
GIMBAL_TOL_DEG = 1e-6
AXIS_NAMES = ("anterior_posterior", "left_right", "dorsal_ventral")


@dataclass(frozen=True)
class NoiseSweepConfig:
    sigmas: Tuple[float, ...] = PAPER_SIGMAS
    trials_per_sigma: int = 100
    seed: int = 42

    def __post_init__(self):
        object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))
        if not self.sigmas or any(s < 0 for s in self.sigmas):
            raise ValidationError("sweep.sigmas", "need at least one sigma, all >= 0")
        if self.trials_per_sigma < 1:
            raise ValidationError("sweep.trials", "must be >= 1")


@dataclass(frozen=True)
class VariationComponents:
    """Relative rotation split into angles about the anatomical axes (XYZ intrinsic), degrees."""

    anterior_posterior: float
    left_right: float
    dorsal_ventral: float
    gimbal_lock: bool = False

    def as_array(self) -> np.ndarray:
        return np.array([self.anterior_posterior, self.left_right, self.dorsal_ventral])


@dataclass(frozen=True)
class SigmaStats:
    sigma: float
    trials: int
    mean_rotation_deg: float
    max_rotation_deg: float
    std_rotation_deg: float
    mean_alignment: float
    max_alignment: float
    mean_alignment_per_axis: Tuple[float, float, float]
    mean_abs_components_deg: Tuple[float, float, float]
    gimbal_lock_trials: int

    @property
    def stderr_rotation_deg(self) -> float:
        return self.std_rotation_deg / math.sqrt(self.trials)


@dataclass(frozen=True)
class StabilityResult:
    method: str
    rows: Tuple[SigmaStats, ...] = field(default_factory=tuple)

    def row(self, sigma: float) -> SigmaStats:
        for r in self.rows:
            if r.sigma == sigma:
                return r
        raise KeyError(sigma)

    def to_dict(self) -> dict:
        return {"method": self.method, "rows": [asdict(r) for r in self.rows]}


@dataclass(frozen=True)
class DegeneracyCheck:
    degenerate: bool
    reason: Optional[str]
    hull_area: float
    mask_area: float


def _check_rotation(r: np.ndarray, name: str) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.shape != (3, 3) or not np.all(np.isfinite(r)):
        raise NotARotation(f"{name} must be a finite 3 x 3 matrix")
    if np.max(np.abs(r.T @ r - np.eye(3))) > ROTATION_TOL or abs(np.linalg.det(r) - 1.0) > ROTATION_TOL:
        raise NotARotation(f"{name} is not a proper rotation")
    return r


def rotation_variation(r1: np.ndarray, r2: np.ndarray) -> float:
    """Geodesic angle of R_d = R1 R2^-1 in degrees (trace argument clamped before arccos)."""
    r1 = _check_rotation(r1, "R1")
    r2 = _check_rotation(r2, "R2")
    r_d = r1 @ r2.T
    cos_theta = np.clip((np.trace(r_d) - 1.0) / 2.0, -1.0, 1.0)
    return float(np.degrees(np.arccos(cos_theta)))


def decompose_variation(r_d: np.ndarray, frame: AnatomicalFrame) -> VariationComponents:
    """
    Express R_d in the anatomical basis and split it into XYZ intrinsic Euler angles.

    The gimbal flag is set when the middle angle is within 1e-6 degrees of +/-90;
    the angles are still returned.
    """
    r_d = _check_rotation(r_d, "R_d")
    f = frame.rotation
    local = f.T @ r_d @ f
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        a, b, c = Rotation.from_matrix(local).as_euler("XYZ", degrees=True)
    gimbal = abs(abs(b) - 90.0) < GIMBAL_TOL_DEG
    return VariationComponents(float(a), float(b), float(c), bool(gimbal))


def alignment_variation(v_ideal: np.ndarray, v_actual: np.ndarray) -> float:
    """delta_a = 1 - cos(theta), clamped to [0, 2]; inputs are renormalized."""
    a = np.asarray(v_ideal, dtype=float).ravel()
    b = np.asarray(v_actual, dtype=float).ravel()
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("alignment vectors must be nonzero")
    return float(np.clip(1.0 - np.dot(a / na, b / nb), 0.0, 2.0))


def perturb_keypoints(
    corrs: Sequence[Correspondence],
    sigma: float,
    rng: np.random.Generator,
    pose: Optional[CameraPose] = None,
    intrinsics: Optional[Intrinsics] = None,
) -> List[Correspondence]:
    """
    Add N(0, sigma^2) pixel noise to every 2D keypoint.

    When the pose and intrinsics are given, each 3D keypoint also receives
    isotropic noise with std sigma * depth / focal per coordinate. Draw order
    is fixed (all 2D noise, then all 3D noise) so the output depends only on
    the generator state. Inputs are not modified.
    """
    if sigma < 0:
        raise ValidationError("sigma", "must be >= 0")
    n = len(corrs)
    noise2 = rng.normal(0.0, sigma, size=(n, 2))
    noise3 = rng.standard_normal(size=(n, 3))
    if pose is not None and intrinsics is not None and n:
        depth = pose.to_camera(np.array([c.point3d for c in corrs]))[:, 2]
        scale3 = sigma * np.abs(depth) / intrinsics.focal
    else:
        scale3 = np.zeros(n)
    return [
        replace(c, point3d=c.point3d + noise3[i] * scale3[i], point2d=c.point2d + noise2[i])
        for i, c in enumerate(corrs)
    ]


def reprojection_error(pose: CameraPose, corrs: Sequence[Correspondence], intrinsics: Intrinsics) -> float:
    """Mean Euclidean pixel distance between projected and observed visible keypoints."""
    visible = [c for c in corrs if c.visible]
    if not visible:
        raise NoVisibleKeypoints("no visible keypoints to measure")
    pts3 = np.array([c.point3d for c in visible])
    obs = np.array([c.point2d for c in visible])
    return float(np.mean(np.linalg.norm(project(pose, intrinsics, pts3).uv - obs, axis=1)))


def hull_area(points: np.ndarray) -> float:
    """Area of the 2D convex hull (0 for fewer than 3 distinct or collinear points)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if not np.all(np.isfinite(pts)) or len(np.unique(pts, axis=0)) < 3:
        return 0.0
    try:
        return float(ConvexHull(pts).volume)
    except QhullError:
        return 0.0


def mask_area(mask: Union[MaskBBox, np.ndarray]) -> float:
    if isinstance(mask, MaskBBox):
        return mask.area
    return float(np.count_nonzero(mask))


def detect_degenerate(
    projected_corners: np.ndarray,
    in_front: np.ndarray,
    mask: Union[MaskBBox, np.ndarray],
    area_frac: float = 0.01,
) -> DegeneracyCheck:
    """
    Flag a projected box as degenerate.

    Args:
        projected_corners: 8 x 2 pixel coordinates
        in_front: per-corner positive-depth flags
        mask: MaskBBox or binary raster mask
        area_frac: minimum hull area as a fraction of the mask area

    Returns:
        DegeneracyCheck with reason "behind_camera" or "tiny_area" when degenerate
    """
    m_area = mask_area(mask)
    if not np.all(np.asarray(in_front, dtype=bool)):
        return DegeneracyCheck(True, "behind_camera", 0.0, m_area)
    area = hull_area(projected_corners)
    if area < area_frac * m_area:
        return DegeneracyCheck(True, "tiny_area", area, m_area)
    return DegeneracyCheck(False, None, area, m_area)


def _landmarks(corrs: Sequence[Correspondence]) -> List[Landmark3D]:
    return [
        Landmark3D(c.name, c.point3d, c.visible, 1.0 if c.confidence is None else c.confidence)
        for c in corrs
    ]


def _frames(corrs: Sequence[Correspondence], policy: AxisPolicy) -> Tuple[AnatomicalFrame, AnatomicalFrame]:
    landmarks = _landmarks(corrs)
    anatomical = build_anatomical_frame(landmarks, policy)
    baseline = pca_frame(np.array([lm.position for lm in landmarks]))
    return anatomical, baseline


def _trial_metrics(frame: AnatomicalFrame, reference: AnatomicalFrame) -> Tuple[float, np.ndarray, np.ndarray, bool]:
    theta = rotation_variation(frame.rotation, reference.rotation)
    comps = decompose_variation(frame.rotation @ reference.rotation.T, reference)
    deltas = np.array([alignment_variation(reference.rotation[:, k], frame.rotation[:, k]) for k in range(3)])
    return theta, np.abs(comps.as_array()), deltas, comps.gimbal_lock


def _aggregate(sigma: float, metrics: List[Tuple[float, np.ndarray, np.ndarray, bool]]) -> SigmaStats:
    thetas = np.array([m[0] for m in metrics])
    comps = np.array([m[1] for m in metrics])
    deltas = np.array([m[2] for m in metrics])
    per_trial_delta = deltas.mean(axis=1)
    return SigmaStats(
        sigma=sigma,
        trials=len(metrics),
        mean_rotation_deg=float(thetas.mean()),
        max_rotation_deg=float(thetas.max()),
        std_rotation_deg=float(thetas.std(ddof=1)) if len(thetas) > 1 else 0.0,
        mean_alignment=float(per_trial_delta.mean()),
        max_alignment=float(per_trial_delta.max()),
        mean_alignment_per_axis=tuple(float(x) for x in deltas.mean(axis=0)),
        mean_abs_components_deg=tuple(float(x) for x in comps.mean(axis=0)),
        gimbal_lock_trials=int(sum(1 for m in metrics if m[3])),
    )


def stability_sweep(
    scene,
    config: Optional[NoiseSweepConfig] = None,
    policy: Optional[AxisPolicy] = None,
    pose: Optional[CameraPose] = None,
    workers: int = 1,
) -> Tuple[StabilityResult, StabilityResult]:
    """
    Anatomical vs PCA frame stability under keypoint noise.

    Args:
        scene: SceneInput (keypoint correspondences, mesh, intrinsics)
        config: Sigma list, trials per sigma and seed
        policy: Axis policy for the anatomical frame
        pose: Camera pose giving keypoint depths; estimated with EPnP when None
        workers: Thread count; every trial draws from its own
                 (seed, sigma index, trial index) stream, so results do not
                 depend on scheduling

    Returns:
        Tuple of (anatomical StabilityResult, pca StabilityResult)
    """
    config = config or NoiseSweepConfig()
    policy = policy or AxisPolicy()
    corrs = list(scene.correspondences)
    intrinsics = scene.intrinsics
    if pose is None:
        pose, _ = epnp_ransac(corrs, intrinsics, rng=np.random.default_rng(config.seed),
                              use_occluded=sum(c.visible for c in corrs) < 4)
    ref_anat, ref_pca = _frames(corrs, policy)

    def trial(job: Tuple[int, int]):
        si, ti = job
        rng = np.random.default_rng([config.seed, si, ti])
        noisy = perturb_keypoints(corrs, config.sigmas[si], rng, pose, intrinsics)
        anat, base = _frames(noisy, policy)
        return si, _trial_metrics(anat, ref_anat), _trial_metrics(base, ref_pca)

    jobs = [(si, ti) for si in range(len(config.sigmas)) for ti in range(config.trials_per_sigma)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(trial, jobs))
    else:
        outcomes = [trial(j) for j in jobs]

    anat_rows, pca_rows = [], []
    for si, sigma in enumerate(config.sigmas):
        anat_rows.append(_aggregate(sigma, [o[1] for o in outcomes if o[0] == si]))
        pca_rows.append(_aggregate(sigma, [o[2] for o in outcomes if o[0] == si]))
        logger.info("sigma=%.2f anatomical=%.4f deg pca=%.4f deg",
                    sigma, anat_rows[-1].mean_rotation_deg, pca_rows[-1].mean_rotation_deg)
    return StabilityResult("anatomical", tuple(anat_rows)), StabilityResult("pca", tuple(pca_rows))


def sweep_report(results: Sequence[StabilityResult], config: NoiseSweepConfig, scene_name: str = "") -> dict:
    return {
        "scene": scene_name,
        "sigmas": list(config.sigmas),
        "trials_per_sigma": config.trials_per_sigma,
        "seed": config.seed,
        "results": [r.to_dict() for r in results],
    }


def dumps_report(report: dict) -> str:
    """Deterministic JSON text for a report."""
    return json.dumps(report, indent=2) + "\n"


def format_stability_table(results: Sequence[StabilityResult]) -> str:
    lines = [
        "=" * 78,
        f"{'method':<12}{'sigma':>7}{'mean θ_R°':>12}{'max θ_R°':>12}{'mean δ_a':>11}"
        f"{'AP°':>8}{'LR°':>8}{'DV°':>8}",
        "-" * 78,
    ]
    for result in results:
        for r in result.rows:
            ap, lr, dv = r.mean_abs_components_deg
            lines.append(
                f"{result.method:<12}{r.sigma:>7.2f}{r.mean_rotation_deg:>12.4f}{r.max_rotation_deg:>12.4f}"
                f"{r.mean_alignment:>11.4f}{ap:>8.3f}{lr:>8.3f}{dv:>8.3f}"
            )
    lines.append("=" * 78)
    return "\n".join(lines)


@dataclass(frozen=True)
class SceneOutcome:
    """Basic (EPnP-only) vs refined labeling result for one scene instance."""

    name: str
    basic_error_px: Optional[float] = None
    refined_error_px: Optional[float] = None
    basic_degenerate: bool = False
    basic_reason: Optional[str] = None
    refined_degenerate: bool = False
    refined_reason: Optional[str] = None
    restarted: bool = False
    failure: Optional[str] = None


def summarize_outcomes(outcomes: Sequence[SceneOutcome]) -> dict:
    """Per-instance degenerate rates and mean reprojection errors."""
    done = [o for o in outcomes if o.failure is None]
    n = len(done)

    def mean(values: List[float]) -> Optional[float]:
        return float(np.mean(values)) if values else None

    basic = mean([o.basic_error_px for o in done if o.basic_error_px is not None])
    refined = mean([o.refined_error_px for o in done if o.refined_error_px is not None])
    reduction = None
    if basic is not None and refined is not None and basic > 0:
        reduction = 100.0 * (basic - refined) / basic
    return {
        "instances": len(outcomes),
        "processed": n,
        "failed": len(outcomes) - n,
        "basic_degenerate_rate": (sum(o.basic_degenerate for o in done) / n) if n else None,
        "refined_degenerate_rate": (sum(o.refined_degenerate for o in done) / n) if n else None,
        "basic_mean_error_px": basic,
        "refined_mean_error_px": refined,
        "error_reduction_pct": reduction,
        "restarts": sum(o.restarted for o in done),
    }


def evaluation_report(outcomes: Sequence[SceneOutcome]) -> dict:
    return {"summary": summarize_outcomes(outcomes), "scenes": [asdict(o) for o in outcomes]}


def format_evaluation_table(outcomes: Sequence[SceneOutcome]) -> str:
    def fmt(x: Optional[float]) -> str:
        return "-" if x is None else f"{x:.3f}"

    lines = ["=" * 78, f"{'scene':<24}{'basic px':>10}{'refined px':>12}{'basic':>14}{'refined':>14}", "-" * 78]
    for o in outcomes:
        if o.failure is not None:
            lines.append(f"{o.name:<24}  ❌ {o.failure}")
            continue
        lines.append(
            f"{o.name:<24}{fmt(o.basic_error_px):>10}{fmt(o.refined_error_px):>12}"
            f"{(o.basic_reason or 'ok'):>14}{(o.refined_reason or 'ok'):>14}"
        )
    s = summarize_outcomes(outcomes)
    lines.append("-" * 78)
    lines.append(
        f"degenerate rate: basic {fmt(s['basic_degenerate_rate'])}  refined {fmt(s['refined_degenerate_rate'])}"
        f"  | mean error reduction: {fmt(s['error_reduction_pct'])}%"
    )
    lines.append("=" * 78)
    return "\n".join(lines)
