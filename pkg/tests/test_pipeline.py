"""
Integration tests for the end-to-end labeling pipeline.
"""

import json
import os
import sys
import tempfile
import unittest
from dataclasses import replace
from pathlib import Path
from unittest.mock import patch

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from animalbox.config import PipelineConfig
from animalbox.errors import StageError, TooFewCorrespondences
from animalbox.frame import PCA_FALLBACK, AnatomicalFrame
from animalbox.labels import dumps_label
from animalbox.obox import enclosure_check, generate_obox
from animalbox.pipeline import compare_scene, evaluate_scenes, run_label
from animalbox.pose import project
from animalbox.synthetic import (
    BODY_LANDMARKS,
    FLIPPED_DETECTIONS,
    corrupt_extreme_keypoint,
    flipped_detection_scene,
    make_quadruped_scene,
    scene_suite,
    write_synthetic,
)


def ground_truth_error(label, syn):
    pts = np.array([c.point3d for c in syn.scene.correspondences])
    uv = project(label.pose.to_pose(), syn.scene.intrinsics, pts).uv
    return float(np.mean(np.linalg.norm(uv - syn.clean_uv, axis=1)))


class TestRunLabel(unittest.TestCase):
    """Test cases for run_label on synthetic scenes."""

    @classmethod
    def setUpClass(cls):
        cls.syn = make_quadruped_scene(
            np.random.default_rng(31), distance_lengths=6.0, elevation_deg=10.0, azimuth_deg=180.0, yaw_deg=0.0
        )
        cls.label = run_label(cls.syn.scene)

    def test_healthy_label(self):
        """Test a non-degenerate, refined label from the anatomical frame."""
        self.assertFalse(self.label.degenerate)
        self.assertIsNone(self.label.degenerate_reason)
        self.assertEqual((self.label.x_source, self.label.y_source), ("nose/tail_base", "left_shoulder/right_shoulder"))
        self.assertTrue(self.label.diagnostics.refined)
        self.assertEqual(self.label.diagnostics.inliers, len(BODY_LANDMARKS))

    def test_reprojection_error_small(self):
        """Test sub-millipixel error on noiseless keypoints."""
        self.assertLess(self.label.diagnostics.reprojection_error_px, 1e-3)

    def test_box_encloses_mesh(self):
        """Test that the labeled box contains every mesh vertex."""
        frame = AnatomicalFrame(np.array(self.label.frame_axes).T)
        box = generate_obox(self.syn.scene.mesh, frame)
        np.testing.assert_allclose(box.corners_world, self.label.corners_world, atol=1e-12)
        self.assertEqual(enclosure_check(box, self.syn.scene.mesh), 1.0)

    def test_projected_corners_match_ground_truth(self):
        """Test projected corners against the generating pose."""
        truth = project(self.syn.pose, self.syn.scene.intrinsics, np.array(self.label.corners_world)).uv
        np.testing.assert_allclose(np.array(self.label.corners_projected), truth, atol=1e-2)

    def test_head_on_view(self):
        """Test that a camera ahead of the animal sees the anterior face most."""
        pct = self.label.percentages
        self.assertIn("front", self.label.visible_faces)
        self.assertNotIn("back", self.label.visible_faces)
        self.assertEqual(max(pct, key=pct.get), "front")
        self.assertAlmostEqual(sum(pct.values()), 100.0, places=9)

    def test_basic_path(self):
        """Test that refine=False keeps the EPnP pose."""
        basic = run_label(self.syn.scene, refine=False)
        self.assertFalse(basic.diagnostics.refined)
        self.assertEqual(basic.diagnostics.refinement_evaluations, 0)
        self.assertEqual(basic.pose, basic.initial_pose)

    def test_deterministic(self):
        """Test identical labels for identical input and seed."""
        self.assertEqual(run_label(self.syn.scene), self.label)

    def test_serialized_bytes_stable(self):
        """Test byte-identical label JSON across two runs."""
        self.assertEqual(dumps_label(run_label(self.syn.scene)), dumps_label(self.label))

    def test_pca_fallback(self):
        """Test a PCA fallback x-axis oriented by the remaining landmarks when no anterior/posterior pair is reliable."""
        hidden = {"nose", "neck", "tail_base", "left_hip", "right_hip"}
        scene = replace(
            self.syn.scene,
            correspondences=tuple(replace(c, visible=c.name not in hidden) for c in self.syn.scene.correspondences),
        )
        label = run_label(scene)
        self.assertEqual(label.x_source, PCA_FALLBACK)
        self.assertEqual(label.y_source, "left_shoulder/right_shoulder")
        self.assertGreater(label.frame_axes[0][0], 0.8)

    def test_all_keypoints_occluded(self):
        """Test the PCA frame and an all-keypoint initialization when nothing is visible."""
        scene = replace(
            self.syn.scene,
            correspondences=tuple(replace(c, visible=False) for c in self.syn.scene.correspondences),
        )
        label = run_label(scene, refine=False)
        self.assertEqual(label.x_source, PCA_FALLBACK)
        self.assertTrue(label.diagnostics.init_used_occluded)

    def test_occluded_initialization(self):
        """Test that fewer than four visible keypoints initialize from all keypoints."""
        keep = {"nose", "tail_base", "left_shoulder"}
        scene = replace(
            self.syn.scene,
            correspondences=tuple(replace(c, visible=c.name in keep) for c in self.syn.scene.correspondences),
        )
        label = run_label(scene)
        self.assertTrue(label.diagnostics.init_used_occluded)
        self.assertFalse(label.degenerate)

    def test_too_few_keypoints(self):
        """Test StageError naming pose_init for three keypoints."""
        scene = replace(self.syn.scene, correspondences=self.syn.scene.correspondences[:3])
        with self.assertRaises(StageError) as ctx:
            run_label(scene)
        self.assertEqual(ctx.exception.stage, "pose_init")
        self.assertIsInstance(ctx.exception.cause, TooFewCorrespondences)

    def test_restart_recorded(self):
        """Test that a forced restart is noted in the diagnostics and still yields a healthy label."""
        syn = make_quadruped_scene(np.random.default_rng(8), distance_lengths=6.0, elevation_deg=20.0, noise_px=1.0)
        label = run_label(syn.scene, PipelineConfig(restart_residual_px=0.0))
        self.assertTrue(label.diagnostics.restarted)
        self.assertFalse(label.degenerate)
        self.assertFalse(run_label(syn.scene).diagnostics.restarted)


class TestRefinementBenefit(unittest.TestCase):
    """Test cases for refinement against a single corrupted keypoint."""

    def test_rejected_keypoint_leaves_refinement(self):
        """Test that a keypoint RANSAC rejects does not move the refined pose off the truth."""
        for seed in range(3):
            syn = make_quadruped_scene(np.random.default_rng(seed), distance_lengths=6.0, elevation_deg=20.0)
            corrupted, _ = corrupt_extreme_keypoint(syn, offset_px=30.0)
            label = run_label(corrupted.scene)
            self.assertEqual(label.diagnostics.inliers, len(BODY_LANDMARKS) - 1)
            self.assertLess(ground_truth_error(label, syn), 1e-4)

    def test_refined_beats_basic_inside_consensus(self):
        """Test that refinement lands closer to the truth than EPnP for a corruption RANSAC keeps."""
        gains = []
        for seed in range(5):
            syn = make_quadruped_scene(np.random.default_rng(seed), distance_lengths=6.0, elevation_deg=20.0)
            corrupted, _ = corrupt_extreme_keypoint(syn, offset_px=6.0)
            basic = run_label(corrupted.scene, refine=False)
            refined = run_label(corrupted.scene)
            self.assertEqual(basic.diagnostics.inliers, len(BODY_LANDMARKS))
            basic_error, refined_error = ground_truth_error(basic, syn), ground_truth_error(refined, syn)
            self.assertLess(refined_error, basic_error)
            gains.append(1.0 - refined_error / basic_error)
        self.assertGreater(float(np.median(gains)), 0.25)


class TestFlippedDetection(unittest.TestCase):
    """Test cases for scenes whose visible keypoints fit the depth-flipped animal."""

    @classmethod
    def setUpClass(cls):
        cls.scenes = [flipped_detection_scene(np.random.default_rng(seed)) for seed in range(3)]

    def test_decoys_displaced(self):
        """Test that the visible detections sit away from the true projections."""
        for syn in self.scenes:
            for i, c in enumerate(syn.scene.correspondences):
                shift = np.linalg.norm(c.point2d - syn.clean_uv[i])
                if c.name in FLIPPED_DETECTIONS:
                    self.assertTrue(c.visible)
                    self.assertGreater(shift, 3.0)
                else:
                    self.assertFalse(c.visible)
                    self.assertEqual(shift, 0.0)

    def test_basic_label_degenerate(self):
        """Test that the EPnP pose alone produces a degenerate label."""
        for syn in self.scenes:
            self.assertTrue(run_label(syn.scene, refine=False).degenerate)

    def test_refined_label_recovers(self):
        """Test that refinement yields a non-degenerate label with the whole box in front of the camera."""
        for syn in self.scenes:
            label = run_label(syn.scene)
            self.assertFalse(label.degenerate)
            self.assertTrue(label.diagnostics.refined)
            self.assertTrue(np.all(label.pose.to_pose().to_camera(np.array(label.corners_world))[:, 2] > 0))

    def test_compare_scene(self):
        """Test that the comparison row reports the basic degenerate and the refined healthy."""
        outcome = compare_scene(self.scenes[0].scene)
        self.assertIsNone(outcome.failure)
        self.assertTrue(outcome.basic_degenerate)
        self.assertFalse(outcome.refined_degenerate)


class TestEvaluateScenes(unittest.TestCase):
    """Test cases for compare_scene and evaluate_scenes."""

    def test_compare_healthy_scene(self):
        """Test that both paths succeed on a healthy noisy scene."""
        syn = make_quadruped_scene(np.random.default_rng(5), noise_px=1.0)
        outcome = compare_scene(syn.scene)
        self.assertIsNone(outcome.failure)
        self.assertFalse(outcome.refined_degenerate)
        self.assertIsNotNone(outcome.basic_error_px)
        self.assertIsNotNone(outcome.refined_error_px)

    def test_paths_in_order_with_failure(self):
        """Test input-order outcomes and an isolated failure for a broken scene."""
        with tempfile.TemporaryDirectory() as tmp:
            root = Path(tmp)
            paths = [write_synthetic(s, root / s.name) for s in scene_suite(seed=3, count=2, noise_px=0.5)]
            broken = root / "broken"
            broken.mkdir()
            (broken / "scene.json").write_text(json.dumps({"image_width": 10}), encoding="utf-8")
            items = [paths[0], broken, paths[1]]
            outcomes = evaluate_scenes(items, PipelineConfig(), workers=2)
        self.assertEqual([o.name for o in outcomes], ["synthetic_0000", str(broken), "synthetic_0001"])
        self.assertIsNone(outcomes[0].failure)
        self.assertIsNotNone(outcomes[1].failure)
        self.assertIsNone(outcomes[2].failure)

    def test_missing_intrinsics_file_isolated(self):
        """Test that a scene naming a missing intrinsics file only fails its own row."""
        with tempfile.TemporaryDirectory() as tmp:
            root = Path(tmp)
            good = write_synthetic(scene_suite(seed=3, count=1)[0], root / "good")
            bad = write_synthetic(scene_suite(seed=4, count=1)[0], root / "bad")
            manifest = json.loads(bad.read_text(encoding="utf-8"))
            manifest["intrinsics"] = "camera.json"
            bad.write_text(json.dumps(manifest), encoding="utf-8")
            outcomes = evaluate_scenes([good, bad], PipelineConfig(), workers=2)
        self.assertIsNone(outcomes[0].failure)
        self.assertIn("intrinsics file not found", outcomes[1].failure)

    def test_os_error_isolated(self):
        """Test that an OSError while reading a scene becomes a failure row."""
        with patch("animalbox.pipeline.parse_scene", side_effect=OSError("disk gone")):
            outcomes = evaluate_scenes(["a", "b"], workers=1)
        self.assertEqual([o.name for o in outcomes], ["a", "b"])
        self.assertTrue(all("disk gone" in o.failure for o in outcomes))

    def test_refined_never_degenerate_on_healthy_suite(self):
        """Test a zero refined degenerate rate over a small healthy suite."""
        outcomes = evaluate_scenes([s.scene for s in scene_suite(seed=11, count=4, noise_px=1.0)], workers=1)
        self.assertTrue(all(o.failure is None for o in outcomes))
        self.assertFalse(any(o.refined_degenerate for o in outcomes))


if __name__ == "__main__":
    unittest.main(verbosity=2)
