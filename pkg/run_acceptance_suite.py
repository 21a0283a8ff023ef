"""
Seeded acceptance suite over synthetic quadruped scenes.

Runs every acceptance check at full size and prints one line per check with
its measured values, whether or not they meet the target.

Usage:
    python run_acceptance_suite.py [--scenes 200] [--seed 42] [--only 1,5,9]
"""

import argparse
import sys
import time
from typing import Callable, Dict, List, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from animalbox.config import PipelineConfig
from animalbox.evaluate import (
    NoiseSweepConfig,
    alignment_variation,
    dumps_report,
    reprojection_error,
    rotation_variation,
    stability_sweep,
    sweep_report,
)
from animalbox.frame import AnatomicalFrame
from animalbox.obox import enclosure_check, generate_obox
from animalbox.pipeline import run_label
from animalbox.pose import Intrinsics, project
from animalbox.synthetic import (
    SyntheticScene,
    corrupt_extreme_keypoint,
    flipped_detection_scene,
    look_at,
    scene_suite,
)
from animalbox.visibility import (
    face_normals,
    percentages,
    projected_area,
    visibility_report,
    visible_faces,
)

INTR = Intrinsics(1000.0, 1000.0, 500.0, 500.0, 1000, 1000)
# below the RANSAC threshold, so the corrupted keypoint stays in the consensus
CONSENSUS_CORRUPTION_PX = 6.0
FLIPPED_SCENES = 50

Result = Tuple[bool, str]


def _frame_for(label) -> AnatomicalFrame:
    return AnatomicalFrame(np.array(label.frame_axes).T)


def _ray_enters_at_end(box, start: np.ndarray, end: np.ndarray) -> bool:
    d = end - start
    t_enter = 0.0
    for k in range(3):
        if abs(d[k]) < 1e-15:
            continue
        t1 = (box.local_min[k] - start[k]) / d[k]
        t2 = (box.local_max[k] - start[k]) / d[k]
        t_enter = max(t_enter, min(t1, t2))
    return t_enter > 1.0 - 1e-9


def _raster_area(polygon: np.ndarray, scale: int = 4) -> float:
    lo = np.floor(polygon.min(axis=0)) - 1
    hi = np.ceil(polygon.max(axis=0)) + 1
    xs = np.arange(lo[0], hi[0], 1.0 / scale) + 0.5 / scale
    ys = np.arange(lo[1], hi[1], 1.0 / scale) + 0.5 / scale
    gx, gy = np.meshgrid(xs, ys)
    signs = []
    for i in range(len(polygon)):
        a, b = polygon[i], polygon[(i + 1) % len(polygon)]
        signs.append((b[0] - a[0]) * (gy - a[1]) - (b[1] - a[1]) * (gx - a[0]))
    signs = np.array(signs)
    inside = np.all(signs >= 0, axis=0) | np.all(signs <= 0, axis=0)
    return np.count_nonzero(inside) / scale ** 2


class AcceptanceSuite:
    """Holds the seeded scene sets shared by the checks."""

    def __init__(self, scenes: int, seed: int, sweep_trials: int):
        self.seed = seed
        self.count = scenes
        self.sweep_trials = sweep_trials
        self._healthy: List[SyntheticScene] = []
        self._noiseless: List[SyntheticScene] = []
        self._sweep: Tuple[np.ndarray, np.ndarray, float, float] = ()

    @property
    def healthy(self) -> List[SyntheticScene]:
        if not self._healthy:
            self._healthy = scene_suite(self.seed, self.count, noise_px=1.0)
        return self._healthy

    @property
    def noiseless(self) -> List[SyntheticScene]:
        if not self._noiseless:
            self._noiseless = scene_suite(self.seed + 1, self.count)
        return self._noiseless

    def _sweep_means(self) -> Tuple[np.ndarray, np.ndarray, float, float]:
        if self._sweep:
            return self._sweep
        config = NoiseSweepConfig(trials_per_sigma=self.sweep_trials, seed=self.seed)
        anat_theta, pca_theta, anat_align, pca_align = [], [], [], []
        for syn in self.noiseless:
            anat, pca = stability_sweep(syn.scene, config, pose=syn.pose)
            anat_theta.append([r.mean_rotation_deg for r in anat.rows])
            pca_theta.append([r.mean_rotation_deg for r in pca.rows])
            anat_align.append(anat.row(4.0).mean_alignment)
            pca_align.append(pca.row(4.0).mean_alignment)
        self._sweep = (np.mean(anat_theta, axis=0), np.mean(pca_theta, axis=0),
                       float(np.mean(anat_align)), float(np.mean(pca_align)))
        return self._sweep

    def frame_stability(self) -> Result:
        anat, pca, _, _ = self._sweep_means()
        ok = bool(np.all(anat <= 1.0) and np.all(pca >= 10.0 * anat))
        detail = "  ".join(f"s={s:g}: {a:.4f} vs {p:.2f} deg" for s, a, p in zip((0.5, 1, 2, 3, 4), anat, pca))
        return ok, detail

    def alignment_stability(self) -> Result:
        _, _, anat, pca = self._sweep_means()
        return anat <= 0.01 and pca >= 0.1, f"anatomical {anat:.5f}  pca {pca:.4f} at s=4"

    def degeneracy(self) -> Result:
        refined_bad = sum(run_label(s.scene).degenerate for s in self.healthy)
        flips = [flipped_detection_scene(np.random.default_rng([self.seed + 2, i]), name=f"flipped_{i:03d}")
                 for i in range(FLIPPED_SCENES)]
        basic_bad = sum(run_label(s.scene, refine=False).degenerate for s in flips)
        refined_flip_bad = sum(run_label(s.scene).degenerate for s in flips)
        detail = (f"refined healthy {refined_bad}/{len(self.healthy)}  basic flipped {basic_bad}/{FLIPPED_SCENES}  "
                  f"refined flipped {refined_flip_bad}/{FLIPPED_SCENES}")
        return refined_bad == 0 and refined_flip_bad == 0 and basic_bad >= 1, detail

    def refinement_benefit(self) -> Result:
        wins, gains = 0, []
        for syn in self.noiseless:
            corrupted, _ = corrupt_extreme_keypoint(syn, offset_px=CONSENSUS_CORRUPTION_PX)
            intr = syn.scene.intrinsics
            pts = np.array([c.point3d for c in syn.scene.correspondences])
            errors = []
            for refine in (False, True):
                pose = run_label(corrupted.scene, refine=refine).pose.to_pose()
                errors.append(float(np.mean(np.linalg.norm(project(pose, intr, pts).uv - syn.clean_uv, axis=1))))
            basic, refined = errors
            wins += refined < basic
            gains.append(1.0 - refined / basic if basic > 0 else 0.0)
        frac = wins / len(self.noiseless)
        median = float(np.median(gains))
        return frac >= 0.95 and median >= 0.5, f"refined better in {100 * frac:.1f}%  median gain {100 * median:.1f}%"

    def pose_recovery(self) -> Result:
        worst_px, worst_deg = 0.0, 0.0
        for syn in self.noiseless:
            label = run_label(syn.scene)
            pose = label.pose.to_pose()
            worst_px = max(worst_px, reprojection_error(pose, syn.scene.correspondences, syn.scene.intrinsics))
            worst_deg = max(worst_deg, rotation_variation(pose.rotation, syn.pose.rotation))
        return worst_px < 1e-3 and worst_deg < 0.01, f"worst {worst_px:.2e} px  {worst_deg:.2e} deg"

    def enclosure(self) -> Result:
        tested, worst = 0, 1.0
        for syn in self.healthy:
            label = run_label(syn.scene, refine=False)
            box = generate_obox(syn.scene.mesh, _frame_for(label), PipelineConfig().epsilon)
            worst = min(worst, enclosure_check(box, syn.scene.mesh))
            tested += len(syn.scene.mesh)
        return worst == 1.0, f"min fraction {worst:.6f} over {tested} vertex tests"

    def visibility(self) -> Result:
        rng = np.random.default_rng(self.seed + 3)
        agree, checked, worst_sum = 0, 0, 0.0
        while checked < 500:
            cloud = rng.standard_normal((20, 3)) * rng.uniform(0.2, 3.0, 3)
            box = generate_obox(cloud, AnatomicalFrame(Rotation.random(random_state=rng).as_matrix()))
            cam = box.center + rng.normal(size=3) * 10.0
            local = box.to_local(cam)
            if np.all(local >= box.local_min) and np.all(local <= box.local_max):
                continue
            expected = {label for label, (_, center) in face_normals(box).items()
                        if _ray_enters_at_end(box, local, box.to_local(center))}
            agree += visible_faces(box, cam) == expected
            pose = look_at(cam, box.center)
            total = sum(percentages(visibility_report(box, pose, INTR)).values())
            if total > 0:
                worst_sum = max(worst_sum, abs(total - 100.0))
            checked += 1
        cube = generate_obox(np.array([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], dtype=float),
                             AnatomicalFrame(np.eye(3)), epsilon=0.0)
        corner = percentages(visibility_report(cube, look_at(np.full(3, 10.5), np.full(3, 0.5)), INTR))
        thirds = max(abs(v - 100.0 / 3.0) for v in corner.values() if v > 0)
        ok = agree == checked and worst_sum <= 1e-6 and thirds <= 0.1
        return ok, f"ray oracle {agree}/{checked}  |sum-100| {worst_sum:.1e}  corner view off by {thirds:.4f}%"

    def shoelace(self) -> Result:
        rng = np.random.default_rng(self.seed + 4)
        checked, worst = 0, 0.0
        while checked < 500:
            cloud = rng.standard_normal((60, 3)) * [0.5, 0.25, 0.15]
            box = generate_obox(cloud, AnatomicalFrame(Rotation.random(random_state=rng).as_matrix()))
            direction = rng.normal(size=3)
            pose = look_at(box.center + 12.0 * direction / np.linalg.norm(direction), box.center)
            for label in visible_faces(box, box.center + 12.0 * direction / np.linalg.norm(direction)):
                area = projected_area(box.face_corners(label), pose, INTR)
                if area < 200.0 or checked >= 500:
                    continue
                cam = pose.to_camera(box.face_corners(label))
                polygon = INTR.fx * cam[:, :2] / cam[:, 2:] + [INTR.cx, INTR.cy]
                worst = max(worst, abs(area - _raster_area(polygon)) / area)
                checked += 1
        return worst <= 0.02, f"worst relative difference {100 * worst:.3f}% over {checked} faces"

    def metric_identities(self) -> Result:
        rng = np.random.default_rng(self.seed + 5)
        worst = 0.0
        for _ in range(10_000):
            a, b = Rotation.random(2, random_state=rng)
            expected = np.degrees((a * b.inv()).magnitude())
            worst = max(worst, abs(rotation_variation(a.as_matrix(), b.as_matrix()) - expected))
        endpoints = (
            alignment_variation([1, 0, 0], [2, 0, 0]),
            alignment_variation([1, 0, 0], [0, 1, 0]),
            alignment_variation([1, 0, 0], [-1, 0, 0]),
        )
        ok = worst <= 1e-9 and endpoints == (0.0, 1.0, 2.0)
        return ok, f"max |theta - oracle| {worst:.1e} deg  endpoints {endpoints}"

    def determinism(self) -> Result:
        syn = self.noiseless[0]
        config = NoiseSweepConfig(trials_per_sigma=self.sweep_trials, seed=self.seed)
        a = dumps_report(sweep_report(stability_sweep(syn.scene, config), config, syn.name))
        b = dumps_report(sweep_report(stability_sweep(syn.scene, config, workers=4), config, syn.name))
        return a == b, f"{len(a)} bytes, identical={a == b}"


CHECKS: Dict[int, Tuple[str, Callable[[AcceptanceSuite], Result]]] = {
    1: ("frame stability", AcceptanceSuite.frame_stability),
    2: ("alignment stability", AcceptanceSuite.alignment_stability),
    3: ("degeneracy elimination", AcceptanceSuite.degeneracy),
    4: ("refinement benefit", AcceptanceSuite.refinement_benefit),
    5: ("pose recovery", AcceptanceSuite.pose_recovery),
    6: ("enclosure", AcceptanceSuite.enclosure),
    7: ("visibility", AcceptanceSuite.visibility),
    8: ("shoelace vs raster", AcceptanceSuite.shoelace),
    9: ("metric identities", AcceptanceSuite.metric_identities),
    10: ("determinism", AcceptanceSuite.determinism),
}


def main():
    """Run the selected checks and print the results table."""
    parser = argparse.ArgumentParser(description="Run the synthetic acceptance suite")
    parser.add_argument("--scenes", type=int, default=200)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--sweep-trials", type=int, default=20, help="trials per sigma in checks 1, 2 and 10")
    parser.add_argument("--only", help="comma-separated check numbers")
    args = parser.parse_args()

    selected = sorted(CHECKS) if not args.only else [int(v) for v in args.only.split(",")]
    suite = AcceptanceSuite(args.scenes, args.seed, args.sweep_trials)

    print("\n" + "=" * 70)
    print(f"ACCEPTANCE SUITE  (scenes={args.scenes}, seed={args.seed})")
    print("=" * 70)
    failed = []
    for number in selected:
        name, check = CHECKS[number]
        start = time.perf_counter()
        ok, detail = check(suite)
        elapsed = time.perf_counter() - start
        print(f"{'✅' if ok else '❌'} {number:>2}. {name:<24} {elapsed:6.1f}s")
        print(f"      {detail}")
        if not ok:
            failed.append(number)

    print("=" * 70)
    if failed:
        print(f"⚠️  {len(failed)} check(s) not met: {', '.join(map(str, failed))}")
    else:
        print("✅ All checks met")
    print("=" * 70 + "\n")
    return 1 if failed else 0


if __name__ == "__main__":
    try:
        sys.exit(main())
    except Exception as e:
        print(f"\n✗ Error: {e}\n")
        print("Troubleshooting steps:")
        print("1. Run: pip install -r requirements.txt")
        print("2. Re-run the failing check alone with --only N")
        raise
