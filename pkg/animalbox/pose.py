"""
Camera pose estimation and refinement from 2D-3D keypoint correspondences.

Initialization runs EPnP inside a seeded RANSAC loop over the visible
keypoints. Refinement minimizes, with scipy's least_squares, the squared
analogue of

    E_total = lambda * sum_i d_Mahalanobis(x_i, x_hat_i, Sigma_i) + (1 - lambda) * d_bbox

where Sigma_i = sigma_i^2 I comes from the keypoint uncertainty model and
d_bbox compares the projected keypoint bounds with the segmentation mask
bounds. Keypoint residuals are whitened per coordinate and scaled by
sqrt(lambda); the four bbox residuals are raw pixels scaled by
sqrt(1 - lambda). The summed squares go through a robust loss (soft_l1 by
default), and keypoints RANSAC rejected are left out of the keypoint term.

Pose convention: x_cam = R @ X + t (world -> camera).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import cv2
import numpy as np
from scipy.optimize import least_squares
from scipy.spatial.transform import Rotation

from animalbox.errors import (
    DegenerateResult,
    DidNotConverge,
    EmptyCorrespondences,
    NoConsensus,
    TooFewCorrespondences,
    ValidationError,
)

logger = logging.getLogger(__name__)

MIN_DEPTH = 1e-9
MIN_SAMPLE = 4
_BIG_RESIDUAL = 1e6
LOSSES = ("linear", "soft_l1", "huber", "cauchy", "arctan")


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    image_width: int
    image_height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValidationError("intrinsics.fx/fy", "focal lengths must be positive")
        if not 0 <= self.cx <= self.image_width:
            raise ValidationError("intrinsics.cx", "principal point outside the image")
        if not 0 <= self.cy <= self.image_height:
            raise ValidationError("intrinsics.cy", "principal point outside the image")

    @classmethod
    def from_image_size(cls, width: int, height: int, focal_scale: float = 1.2) -> "Intrinsics":
        """Default focal heuristic f = focal_scale * max(width, height), centred principal point."""
        f = focal_scale * max(width, height)
        return cls(f, f, width / 2.0, height / 2.0, int(width), int(height))

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def focal(self) -> float:
        return 0.5 * (self.fx + self.fy)

    @property
    def diagonal(self) -> float:
        return math.hypot(self.image_width, self.image_height)


@dataclass(frozen=True)
class Correspondence:
    """3D keypoint X_i with its observed 2D keypoint x_i."""

    point3d: np.ndarray
    point2d: np.ndarray
    visible: bool = True
    confidence: Optional[float] = None
    name: str = ""

    def __post_init__(self):
        p3 = np.asarray(self.point3d, dtype=float).ravel()
        p2 = np.asarray(self.point2d, dtype=float).ravel()
        if p3.size != 3 or not np.all(np.isfinite(p3)):
            raise ValidationError(f"keypoint[{self.name}].xyz", "expected 3 finite components")
        if p2.size != 2 or not np.all(np.isfinite(p2)):
            raise ValidationError(f"keypoint[{self.name}].uv", "expected 2 finite components")
        if self.confidence is not None and not 0.0 <= float(self.confidence) <= 1.0:
            raise ValidationError(f"keypoint[{self.name}].confidence", "must lie in [0, 1]")
        object.__setattr__(self, "point3d", p3)
        object.__setattr__(self, "point2d", p2)
        object.__setattr__(self, "visible", bool(self.visible))


@dataclass(frozen=True)
class CameraPose:
    """World -> camera rigid transform."""

    rotation: np.ndarray
    translation: np.ndarray
    refined: bool = False

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float).reshape(3, 3))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float).reshape(3))

    @classmethod
    def from_params(cls, params: np.ndarray, refined: bool = False) -> "CameraPose":
        """Build from a 6-vector (axis-angle || translation)."""
        params = np.asarray(params, dtype=float)
        return cls(Rotation.from_rotvec(params[:3]).as_matrix(), params[3:6], refined)

    @property
    def params(self) -> np.ndarray:
        return np.concatenate([Rotation.from_matrix(self.rotation).as_rotvec(), self.translation])

    def is_valid(self, tol: float = 1e-9) -> bool:
        r = self.rotation
        return (
            float(np.max(np.abs(r.T @ r - np.eye(3)))) <= tol
            and abs(np.linalg.det(r) - 1.0) <= tol
            and bool(np.all(np.isfinite(self.translation)))
        )

    def to_camera(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float).reshape(-1, 3) @ self.rotation.T + self.translation


@dataclass(frozen=True)
class Projection:
    """Pixel coordinates, camera depth, and in-front flags per point."""

    uv: np.ndarray
    depth: np.ndarray
    in_front: np.ndarray

    @property
    def all_in_front(self) -> bool:
        return bool(np.all(self.in_front))


@dataclass(frozen=True)
class KeypointCovariance:
    """Isotropic keypoint covariance Sigma_i = sigma_sq * I with its factors."""

    sigma_sq: float
    sigma_base_sq: float
    edge_factor: float
    conf_factor: float

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma_sq)

    @property
    def matrix(self) -> np.ndarray:
        return self.sigma_sq * np.eye(2)


@dataclass(frozen=True)
class UncertaintyParams:
    sigma_vis: float = 2.0
    sigma_occ: float = 8.0
    conf_floor: float = 0.1
    edge_margin_frac: float = 0.05


@dataclass(frozen=True)
class RansacParams:
    threshold_px: float = 8.0
    confidence: float = 0.999
    max_iters: int = 1000


@dataclass(frozen=True)
class RefineOptions:
    """
    least_squares settings and the degenerate-pose guard.

    `loss` and `f_scale` go straight to least_squares; f_scale is measured in
    whitened residual units, so a keypoint further than about f_scale * sigma
    from its projection loses quadratic influence.
    """

    lam: float = 0.8
    xtol: float = 1e-8
    ftol: float = 1e-8
    gtol: float = 1e-8
    max_iters: int = 200
    method: str = "trf"
    restart_residual_px: float = 10.0
    degenerate_area_frac: float = 0.01
    loss: str = "soft_l1"
    f_scale: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValidationError("lambda", "must lie in [0, 1]")
        if self.loss not in LOSSES:
            raise ValidationError("loss", f"must be one of {', '.join(LOSSES)}")
        if self.method == "lm" and self.loss != "linear":
            raise ValidationError("loss", "method lm supports only the linear loss")
        if not self.f_scale > 0:
            raise ValidationError("f_scale", "must be positive")


@dataclass(frozen=True)
class MaskBBox:
    """Tight pixel bounds of the segmentation mask."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValidationError("mask_bbox", "requires x_min < x_max and y_min < y_max")

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "MaskBBox":
        """Bounds of nonzero pixels; pixel centres sit at integer coordinates."""
        rows, cols = np.nonzero(np.asarray(mask))
        if rows.size == 0:
            raise ValidationError("mask", "mask has no nonzero pixels")
        return cls(cols.min() - 0.5, rows.min() - 0.5, cols.max() + 0.5, rows.max() + 0.5)

    def as_array(self) -> np.ndarray:
        return np.array([self.x_min, self.y_min, self.x_max, self.y_max], dtype=float)

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def within(self, width: int, height: int, slack: float = 0.0) -> bool:
        return (
            self.x_min >= -slack * width
            and self.y_min >= -slack * height
            and self.x_max <= width * (1 + slack)
            and self.y_max <= height * (1 + slack)
        )


@dataclass(frozen=True)
class RefinementResult:
    pose: CameraPose
    cost: float
    evaluations: int
    restarted: bool
    status: int
    mean_error_px: float


def project(pose: CameraPose, intrinsics: Intrinsics, points: np.ndarray) -> Projection:
    """
    Pinhole projection u = fx * Xc / Zc + cx, v = fy * Yc / Zc + cy.

    Points with Zc <= 1e-9 are still projected but flagged as not in front.
    """
    cam = pose.to_camera(points)
    depth = cam[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = intrinsics.fx * cam[:, 0] / depth + intrinsics.cx
        v = intrinsics.fy * cam[:, 1] / depth + intrinsics.cy
    return Projection(np.column_stack([u, v]), depth, depth > MIN_DEPTH)


def depth_flip(pose: CameraPose, pivot: Optional[np.ndarray] = None) -> CameraPose:
    """
    Rotate the scene 180 degrees about the camera x-axis through `pivot` (camera coordinates).

    With the camera centre as pivot the scene lands behind the camera; with the
    object centroid as pivot the object turns over in place.
    """
    flip = np.diag([1.0, -1.0, -1.0])
    p = np.zeros(3) if pivot is None else np.asarray(pivot, dtype=float).reshape(3)
    return CameraPose(flip @ pose.rotation, flip @ (pose.translation - p) + p, pose.refined)


def _stack(corrs: Sequence[Correspondence]) -> Tuple[np.ndarray, np.ndarray]:
    return np.array([c.point3d for c in corrs]), np.array([c.point2d for c in corrs])


def _solve_epnp(obj: np.ndarray, img: np.ndarray, k: np.ndarray) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    try:
        ok, rvec, tvec = cv2.solvePnP(
            np.ascontiguousarray(obj, dtype=np.float64),
            np.ascontiguousarray(img, dtype=np.float64),
            k, None, flags=cv2.SOLVEPNP_EPNP,
        )
    except cv2.error as e:
        logger.debug("EPnP rejected sample: %s", e)
        return None
    if not ok or not (np.all(np.isfinite(rvec)) and np.all(np.isfinite(tvec))):
        return None
    return rvec.reshape(3), tvec.reshape(3)


def _polish(obj: np.ndarray, img: np.ndarray, k: np.ndarray, rvec: np.ndarray, tvec: np.ndarray):
    """Iterative (LM) PnP started from the consensus EPnP solution."""
    try:
        ok, r2, t2 = cv2.solvePnP(
            np.ascontiguousarray(obj, dtype=np.float64),
            np.ascontiguousarray(img, dtype=np.float64),
            k, None,
            rvec=rvec.reshape(3, 1).copy(), tvec=tvec.reshape(3, 1).copy(),
            useExtrinsicGuess=True, flags=cv2.SOLVEPNP_ITERATIVE,
        )
    except cv2.error as e:
        logger.debug("Iterative PnP polish failed: %s", e)
        return rvec, tvec
    if not ok or not (np.all(np.isfinite(r2)) and np.all(np.isfinite(t2))):
        return rvec, tvec
    return r2.reshape(3), t2.reshape(3)


def _pose_from_rvec(rvec: np.ndarray, tvec: np.ndarray) -> CameraPose:
    rot, _ = cv2.Rodrigues(np.asarray(rvec, dtype=np.float64).reshape(3, 1))
    return CameraPose(rot, tvec)


def _score(pose: CameraPose, obj: np.ndarray, img: np.ndarray, intrinsics: Intrinsics, threshold: float):
    proj = project(pose, intrinsics, obj)
    err = np.linalg.norm(proj.uv - img, axis=1)
    err = np.where(proj.in_front & np.isfinite(err), err, np.inf)
    inliers = err < threshold
    return inliers, float(np.sum(err[inliers]))


def _required_iterations(inlier_ratio: float, confidence: float, max_iters: int) -> int:
    good = inlier_ratio ** MIN_SAMPLE
    if good >= 1.0 - 1e-12:
        return 1
    if good <= 0.0:
        return max_iters
    return min(max_iters, int(math.ceil(math.log(1.0 - confidence) / math.log(1.0 - good))))


def epnp_ransac(
    corrs: Sequence[Correspondence],
    intrinsics: Intrinsics,
    params: Optional[RansacParams] = None,
    rng: Optional[np.random.Generator] = None,
    use_occluded: bool = False,
) -> Tuple[CameraPose, np.ndarray]:
    """
    EPnP inside RANSAC over the visible correspondences.

    Minimal samples of 4 are drawn from `rng`; the model with most inliers
    (reprojection error below the threshold and positive depth) wins, ties
    broken by lower summed inlier error. The winner is re-fitted on its
    inliers with EPnP and polished with iterative PnP.

    Args:
        corrs: 2D-3D correspondences
        intrinsics: Camera intrinsics
        params: RANSAC settings (defaults when None)
        rng: Random generator; a fixed-seed generator is used when None
        use_occluded: Also sample occluded keypoints

    Returns:
        Tuple of (initial CameraPose, boolean inlier mask over `corrs`)

    Raises:
        TooFewCorrespondences: fewer than 4 usable correspondences
        NoConsensus: best inlier set smaller than 4
    """
    params = params or RansacParams()
    rng = rng if rng is not None else np.random.default_rng(0)
    usable = np.array([i for i, c in enumerate(corrs) if c.visible or use_occluded], dtype=int)
    if len(usable) < MIN_SAMPLE:
        raise TooFewCorrespondences(f"EPnP needs {MIN_SAMPLE} correspondences, got {len(usable)}")

    obj, img = _stack([corrs[i] for i in usable])
    k = intrinsics.matrix
    n = len(usable)

    best_pose, best_mask = None, None
    best_count, best_err = -1, math.inf
    required, it = params.max_iters, 0
    while it < required:
        it += 1
        sample = rng.choice(n, size=MIN_SAMPLE, replace=False)
        fit = _solve_epnp(obj[sample], img[sample], k)
        if fit is None:
            continue
        pose = _pose_from_rvec(*fit)
        mask, err = _score(pose, obj, img, intrinsics, params.threshold_px)
        count = int(mask.sum())
        if count > best_count or (count == best_count and err < best_err):
            best_pose, best_mask, best_count, best_err = pose, mask, count, err
            required = _required_iterations(count / n, params.confidence, params.max_iters)

    if best_pose is None or best_count < MIN_SAMPLE:
        raise NoConsensus(f"best consensus has {max(best_count, 0)} inliers")

    fit = _solve_epnp(obj[best_mask], img[best_mask], k)
    if fit is not None:
        rvec, tvec = _polish(obj[best_mask], img[best_mask], k, *fit)
        candidate = _pose_from_rvec(rvec, tvec)
        mask, err = _score(candidate, obj, img, intrinsics, params.threshold_px)
        if int(mask.sum()) >= best_count:
            best_pose, best_mask = candidate, mask
    logger.debug("RANSAC: %d iterations, %d/%d inliers", it, int(best_mask.sum()), n)

    full_mask = np.zeros(len(corrs), dtype=bool)
    full_mask[usable[best_mask]] = True
    return CameraPose(best_pose.rotation, best_pose.translation, refined=False), full_mask


def keypoint_covariance(
    corr: Correspondence,
    intrinsics: Intrinsics,
    params: Optional[UncertaintyParams] = None,
) -> KeypointCovariance:
    """
    sigma_i^2 = sigma_base^2 * edge_factor * conf_factor.

    sigma_base is sigma_vis for visible and sigma_occ for occluded keypoints;
    edge_factor = 1 + max(0, 1 - d / d_margin) with d the pixel distance to
    the nearest image border and d_margin = edge_margin_frac * min(W, H);
    conf_factor = 1 / max(confidence, conf_floor).
    """
    params = params or UncertaintyParams()
    base = (params.sigma_vis if corr.visible else params.sigma_occ) ** 2
    u, v = float(corr.point2d[0]), float(corr.point2d[1])
    w, h = intrinsics.image_width, intrinsics.image_height
    d = max(0.0, min(u, v, w - u, h - v))
    d_margin = params.edge_margin_frac * min(w, h)
    edge = 1.0 + max(0.0, 1.0 - d / d_margin) if d_margin > 0 else 1.0
    conf = 1.0 if corr.confidence is None else float(corr.confidence)
    conf_factor = 1.0 / max(conf, params.conf_floor)
    return KeypointCovariance(base * edge * conf_factor, base, edge, conf_factor)


def _residual_fn(
    corrs: Sequence[Correspondence],
    covs: Sequence[KeypointCovariance],
    mask_bbox: MaskBBox,
    intrinsics: Intrinsics,
    lam: float,
    inliers: Optional[np.ndarray] = None,
) -> Callable[[np.ndarray], np.ndarray]:
    if len(corrs) == 0:
        raise EmptyCorrespondences("residuals need at least one correspondence")
    if len(covs) != len(corrs):
        raise ValidationError("covariances", "one covariance per correspondence is required")
    if not 0.0 <= lam <= 1.0:
        raise ValidationError("lambda", "must lie in [0, 1]")
    pts3, obs = _stack(corrs)
    inv_sigma = 1.0 / np.sqrt(np.array([c.sigma_sq for c in covs]))[:, None]
    if inliers is not None:
        keep = np.asarray(inliers, dtype=bool).ravel()
        if keep.size != len(corrs):
            raise ValidationError("inliers", "one flag per correspondence is required")
        # rejected keypoints still shape the projected bounds through their 3D position
        inv_sigma = inv_sigma * keep[:, None]
    target = mask_bbox.as_array()
    w_kp, w_box = math.sqrt(lam), math.sqrt(1.0 - lam)

    def fn(params: np.ndarray) -> np.ndarray:
        uv = project(CameraPose.from_params(params), intrinsics, pts3).uv
        kp = w_kp * (obs - uv) * inv_sigma
        bounds = np.concatenate([uv.min(axis=0), uv.max(axis=0)])
        res = np.concatenate([kp.ravel(), w_box * (bounds - target)])
        return np.nan_to_num(res, nan=_BIG_RESIDUAL, posinf=_BIG_RESIDUAL, neginf=-_BIG_RESIDUAL)

    return fn


def residuals(
    pose_params: np.ndarray,
    corrs: Sequence[Correspondence],
    covs: Sequence[KeypointCovariance],
    mask_bbox: MaskBBox,
    intrinsics: Intrinsics,
    lam: float = 0.8,
    inliers: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Joint residual vector of length 2K + 4.

    Entries 0..2K-1 are sqrt(lam) * (x_i - x_hat_i) / sigma_i per coordinate,
    zero for keypoints whose `inliers` flag is False; the last 4 are
    sqrt(1 - lam) * ([min u, min v, max u, max v] of all projected keypoints
    - mask bounds).
    """
    fn = _residual_fn(corrs, covs, mask_bbox, intrinsics, lam, inliers)
    return fn(np.asarray(pose_params, dtype=float))


def _mean_visible_error(pose: CameraPose, corrs: Sequence[Correspondence], intrinsics: Intrinsics) -> float:
    chosen = [c for c in corrs if c.visible] or list(corrs)
    pts3, obs = _stack(chosen)
    err = np.linalg.norm(project(pose, intrinsics, pts3).uv - obs, axis=1)
    return float(np.mean(err)) if np.all(np.isfinite(err)) else math.inf


def _is_degenerate(
    pose: CameraPose,
    corrs: Sequence[Correspondence],
    mask_bbox: MaskBBox,
    intrinsics: Intrinsics,
    opts: RefineOptions,
    box_corners: Optional[np.ndarray],
    mask_raster: Optional[np.ndarray],
) -> Tuple[bool, Optional[str]]:
    from animalbox.evaluate import detect_degenerate

    visible = [c for c in corrs if c.visible] or list(corrs)
    if not project(pose, intrinsics, _stack(visible)[0]).all_in_front:
        return True, "behind_camera"
    points = box_corners if box_corners is not None else _stack(corrs)[0]
    proj = project(pose, intrinsics, points)
    mask = mask_raster if mask_raster is not None else mask_bbox
    check = detect_degenerate(proj.uv, proj.in_front, mask, opts.degenerate_area_frac)
    return check.degenerate, check.reason


def refine_pose_detailed(
    init: CameraPose,
    corrs: Sequence[Correspondence],
    covs: Sequence[KeypointCovariance],
    mask_bbox: MaskBBox,
    intrinsics: Intrinsics,
    opts: Optional[RefineOptions] = None,
    box_corners: Optional[np.ndarray] = None,
    mask_raster: Optional[np.ndarray] = None,
    inliers: Optional[np.ndarray] = None,
) -> RefinementResult:
    """
    Joint keypoint + mask-bbox least-squares refinement with one depth-flip restart.

    The first branch starts at `init`. If it ends degenerate, fails to
    converge, or leaves a mean visible reprojection error above
    `opts.restart_residual_px`, a second branch starts from `init` turned
    over about the camera x-axis through the keypoint centroid (through the
    camera centre when that centroid is behind the camera). The lower-cost
    non-degenerate branch is returned.

    Keypoints flagged False in `inliers` (typically RANSAC rejects) drop out
    of the keypoint term and of the restart error; they still bound the
    projected keypoint box compared with the mask.

    Raises:
        TooFewCorrespondences: fewer than 4 correspondences, or fewer than 4 inliers
        DidNotConverge: no branch met the tolerances
        DegenerateResult: every converged branch is degenerate
    """
    opts = opts or RefineOptions()
    if len(corrs) < MIN_SAMPLE:
        raise TooFewCorrespondences(f"refinement needs {MIN_SAMPLE} correspondences, got {len(corrs)}")
    fn = _residual_fn(corrs, covs, mask_bbox, intrinsics, opts.lam, inliers)
    kept = list(corrs)
    if inliers is not None:
        kept = [c for c, keep in zip(corrs, np.asarray(inliers, dtype=bool).ravel()) if keep]
        if len(kept) < MIN_SAMPLE:
            raise TooFewCorrespondences(f"refinement needs {MIN_SAMPLE} inliers, got {len(kept)}")

    def run(start: CameraPose) -> dict:
        fit = least_squares(
            fn, start.params, method=opts.method, x_scale="jac", loss=opts.loss, f_scale=opts.f_scale,
            xtol=opts.xtol, ftol=opts.ftol, gtol=opts.gtol, max_nfev=opts.max_iters,
        )
        pose = CameraPose.from_params(fit.x, refined=True)
        degenerate, reason = _is_degenerate(pose, corrs, mask_bbox, intrinsics, opts, box_corners, mask_raster)
        return {
            "pose": pose, "cost": float(fit.cost), "nfev": int(fit.nfev), "status": int(fit.status),
            "converged": fit.status > 0, "degenerate": degenerate, "reason": reason,
            "error": _mean_visible_error(pose, kept, intrinsics),
        }

    branches = [run(init)]
    first = branches[0]
    restarted = False
    if first["degenerate"] or not first["converged"] or first["error"] > opts.restart_residual_px:
        centroid = init.to_camera(_stack(corrs)[0]).mean(axis=0)
        # an init behind the camera is mirrored through the camera centre instead
        pivot = centroid if centroid[2] > MIN_DEPTH else None
        logger.info(
            "Refinement branch unsatisfactory (degenerate=%s, error=%.2f px); restarting from depth-flipped init",
            first["reason"], first["error"],
        )
        branches.append(run(depth_flip(init, pivot)))
        restarted = True

    good = [b for b in branches if b["converged"] and not b["degenerate"]]
    if not good:
        if not any(b["converged"] for b in branches):
            raise DidNotConverge(f"no branch converged within {opts.max_iters} evaluations")
        raise DegenerateResult("every refinement branch ended degenerate: "
                               + ", ".join(str(b["reason"]) for b in branches))
    best = min(good, key=lambda b: b["cost"])
    return RefinementResult(
        pose=best["pose"],
        cost=best["cost"],
        evaluations=sum(b["nfev"] for b in branches),
        restarted=restarted,
        status=best["status"],
        mean_error_px=best["error"],
    )


def refine_pose(
    init: CameraPose,
    corrs: Sequence[Correspondence],
    covs: Sequence[KeypointCovariance],
    mask_bbox: MaskBBox,
    intrinsics: Intrinsics,
    opts: Optional[RefineOptions] = None,
    box_corners: Optional[np.ndarray] = None,
    mask_raster: Optional[np.ndarray] = None,
    inliers: Optional[np.ndarray] = None,
) -> CameraPose:
    """Refined pose only; see refine_pose_detailed."""
    return refine_pose_detailed(
        init, corrs, covs, mask_bbox, intrinsics, opts, box_corners, mask_raster, inliers
    ).pose


def covariances_for(
    corrs: Sequence[Correspondence],
    intrinsics: Intrinsics,
    params: Optional[UncertaintyParams] = None,
) -> List[KeypointCovariance]:
    return [keypoint_covariance(c, intrinsics, params) for c in corrs]
