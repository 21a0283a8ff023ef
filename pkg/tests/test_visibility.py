"""
Unit tests for face visibility, projected areas and profile percentages.
"""

import os
import sys
import unittest

import numpy as np
from scipy.spatial import ConvexHull
from scipy.spatial.transform import Rotation

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from animalbox.errors import BehindCamera, CameraInsideBox
from animalbox.frame import AnatomicalFrame
from animalbox.obox import FACE_LABELS, FACE_TABLE, generate_obox
from animalbox.pose import CameraPose, Intrinsics
from animalbox.synthetic import look_at, overhead_scene
from animalbox.visibility import (
    camera_position,
    face_normals,
    percentages,
    projected_area,
    shoelace_area,
    visibility_report,
    visible_faces,
)

INTR = Intrinsics(1000.0, 1000.0, 500.0, 500.0, 1000, 1000)
UNIT_CUBE = np.array([[x, y, z] for x in (0.0, 1.0) for y in (0.0, 1.0) for z in (0.0, 1.0)])
CUBE_CENTER = np.array([0.5, 0.5, 0.5])


def unit_box():
    return generate_obox(UNIT_CUBE, AnatomicalFrame(np.eye(3), "test", "test"), epsilon=0.0)


def ray_enters_at_end(box, start, end):
    """True when the segment start -> end (box-local) first touches the box at its end point."""
    d = end - start
    t_enter = 0.0
    for k in range(3):
        if abs(d[k]) < 1e-15:
            continue
        t1 = (box.local_min[k] - start[k]) / d[k]
        t2 = (box.local_max[k] - start[k]) / d[k]
        t_enter = max(t_enter, min(t1, t2))
    return t_enter > 1.0 - 1e-9


def raster_area(polygon, scale=4):
    """Covered pixel count of a convex polygon on a supersampled grid, in pixel units."""
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


class TestCameraPosition(unittest.TestCase):
    """Test cases for camera_position."""

    def test_inverse_of_pose(self):
        """Test C = -R^T t maps to the camera-frame origin."""
        rng = np.random.default_rng(1)
        pose = CameraPose(Rotation.random(random_state=rng).as_matrix(), rng.normal(size=3))
        np.testing.assert_allclose(pose.to_camera(camera_position(pose))[0], 0.0, atol=1e-12)

    def test_examples(self):
        """Test C = (0, 0, 5) for identity with t = (0, 0, -5) and for a half turn about y with t = (0, 0, 5)."""
        np.testing.assert_allclose(camera_position(CameraPose(np.eye(3), [0.0, 0.0, -5.0])), [0, 0, 5])
        half_turn = Rotation.from_euler("y", 180, degrees=True).as_matrix()
        np.testing.assert_allclose(camera_position(CameraPose(half_turn, [0.0, 0.0, 5.0])), [0, 0, 5], atol=1e-12)

    def test_matches_matrix_inverse(self):
        """Test against the translation column of the inverted 4 x 4 transform."""
        rng = np.random.default_rng(9)
        pose = CameraPose(Rotation.random(random_state=rng).as_matrix(), rng.normal(size=3))
        m = np.eye(4)
        m[:3, :3], m[:3, 3] = pose.rotation, pose.translation
        np.testing.assert_allclose(camera_position(pose), np.linalg.inv(m)[:3, 3], atol=1e-12)

    def test_look_at_round_trip(self):
        """Test that look_at places the camera where asked."""
        pose = look_at(np.array([3.0, -2.0, 1.0]), CUBE_CENTER)
        np.testing.assert_allclose(camera_position(pose), [3.0, -2.0, 1.0], atol=1e-12)


class TestFaceNormals(unittest.TestCase):
    """Test cases for face_normals."""

    def test_axis_aligned_outward(self):
        """Test each normal equals side * e_axis for an identity frame."""
        normals = face_normals(unit_box())
        for label, (axis, side) in FACE_TABLE.items():
            expected = np.zeros(3)
            expected[axis] = side
            np.testing.assert_allclose(normals[label][0], expected, atol=1e-12, err_msg=label)

    def test_rotated_frame_outward(self):
        """Test that normals point away from the centre for any frame."""
        rng = np.random.default_rng(2)
        cloud = rng.standard_normal((100, 3)) * [2.0, 1.0, 0.5]
        box = generate_obox(cloud, AnatomicalFrame(Rotation.random(random_state=rng).as_matrix()))
        for label, (n, center) in face_normals(box).items():
            self.assertAlmostEqual(np.linalg.norm(n), 1.0, places=12)
            self.assertGreater(np.dot(n, center - box.center), 0.0, label)


class TestVisibleFaces(unittest.TestCase):
    """Test cases for visible_faces."""

    def test_camera_on_positive_x(self):
        """Test that a camera on +x sees only the posterior face."""
        self.assertEqual(visible_faces(unit_box(), np.array([10.0, 0.5, 0.5])), {"back"})

    def test_camera_on_negative_x(self):
        """Test that a camera on -x sees only the anterior face."""
        self.assertEqual(visible_faces(unit_box(), np.array([-10.0, 0.5, 0.5])), {"front"})

    def test_corner_view(self):
        """Test that a camera along (1, 1, 1) sees back, right and top."""
        self.assertEqual(visible_faces(unit_box(), np.array([10.0, 10.0, 10.0])), {"back", "right", "top"})

    def test_camera_inside(self):
        """Test CameraInsideBox at the box centre."""
        with self.assertRaises(CameraInsideBox):
            visible_faces(unit_box(), CUBE_CENTER)

    def test_matches_ray_oracle(self):
        """Test against casting a ray from the camera to each face centre on 500 random poses."""
        rng = np.random.default_rng(3)
        checked = 0
        while checked < 500:
            cloud = rng.standard_normal((20, 3)) * rng.uniform(0.2, 3.0, 3)
            box = generate_obox(cloud, AnatomicalFrame(Rotation.random(random_state=rng).as_matrix()))
            cam = box.center + rng.normal(size=3) * 10.0
            local = box.to_local(cam)
            if np.all(local >= box.local_min) and np.all(local <= box.local_max):
                continue
            expected = set()
            for label, (_, center) in face_normals(box).items():
                if ray_enters_at_end(box, local, box.to_local(center)):
                    expected.add(label)
            self.assertEqual(visible_faces(box, cam), expected)
            self.assertTrue(1 <= len(expected) <= 3)
            checked += 1


class TestShoelaceArea(unittest.TestCase):
    """Test cases for shoelace_area."""

    def test_unit_square(self):
        """Test area 1 for the unit square in either orientation."""
        square = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
        self.assertEqual(shoelace_area(square), 1.0)
        self.assertEqual(shoelace_area(square[::-1]), 1.0)

    def test_triangle(self):
        """Test half base times height."""
        self.assertEqual(shoelace_area(np.array([[0, 0], [4, 0], [0, 3]])), 6.0)

    def test_cyclic_rotation_invariant(self):
        """Test that the starting corner does not matter."""
        quad = np.array([[3.0, 1.0], [9.0, 2.0], [8.0, 7.0], [2.0, 5.0]])
        area = shoelace_area(quad)
        for k in range(1, 4):
            self.assertAlmostEqual(shoelace_area(np.roll(quad, k, axis=0)), area, places=12)

    def test_matches_convex_hull(self):
        """Test agreement with the hull area for random convex quads."""
        rng = np.random.default_rng(4)
        for _ in range(20):
            angles = np.sort(rng.uniform(0, 2 * np.pi, 4))
            quad = np.column_stack([np.cos(angles), np.sin(angles)]) * rng.uniform(10, 200) + rng.uniform(0, 500, 2)
            self.assertAlmostEqual(shoelace_area(quad), ConvexHull(quad).volume, places=6)


class TestProjectedArea(unittest.TestCase):
    """Test cases for projected_area."""

    def test_fronto_parallel_face(self):
        """Test (f * s / Z)^2 for a face squarely facing the camera."""
        pose = CameraPose(np.eye(3), np.array([-0.5, -0.5, 10.0]))
        area = projected_area(unit_box().face_corners("bottom"), pose, INTR)
        self.assertAlmostEqual(area, 10000.0, places=6)

    def test_edge_on_face(self):
        """Test near-zero area for a face seen edge-on."""
        pose = CameraPose(np.eye(3), np.array([0.0, -0.5, 10.0]))
        area = projected_area(unit_box().face_corners("front"), pose, INTR)
        self.assertLess(area, 1e-6 * 10000.0)

    def test_matches_rasterization(self):
        """Test agreement within 2% with a 4x supersampled pixel count on random visible faces."""
        rng = np.random.default_rng(6)
        cloud = rng.standard_normal((60, 3)) * [0.5, 0.25, 0.15]
        box = generate_obox(cloud, AnatomicalFrame(Rotation.random(random_state=rng).as_matrix()))
        checked = 0
        for _ in range(40):
            direction = rng.normal(size=3)
            pose = look_at(box.center + 12.0 * direction / np.linalg.norm(direction), box.center)
            for label in visible_faces(box, camera_position(pose)):
                area = projected_area(box.face_corners(label), pose, INTR)
                if area < 200.0:
                    continue
                uv = pose.to_camera(box.face_corners(label))
                polygon = INTR.fx * uv[:, :2] / uv[:, 2:] + [INTR.cx, INTR.cy]
                self.assertAlmostEqual(area, raster_area(polygon), delta=0.02 * area)
                checked += 1
        self.assertGreater(checked, 20)

    def test_behind_camera(self):
        """Test BehindCamera when the face is behind the image plane."""
        pose = CameraPose(np.eye(3), np.array([-0.5, -0.5, -10.0]))
        with self.assertRaises(BehindCamera):
            projected_area(unit_box().face_corners("bottom"), pose, INTR)


class TestVisibilityReport(unittest.TestCase):
    """Test cases for visibility_report."""

    def test_single_face_is_full_profile(self):
        """Test 100% for the only visible face."""
        report = visibility_report(unit_box(), look_at(np.array([10.0, 0.5, 0.5]), CUBE_CENTER), INTR)
        pct = percentages(report)
        self.assertEqual([f.face for f in report], list(FACE_LABELS))
        self.assertAlmostEqual(pct["back"], 100.0)
        self.assertEqual(sum(v for k, v in pct.items() if k != "back"), 0.0)

    def test_corner_view_thirds(self):
        """Test three equal shares along the cube diagonal."""
        pose = look_at(CUBE_CENTER + 10.0 * np.ones(3) / np.sqrt(3.0), CUBE_CENTER)
        pct = percentages(visibility_report(unit_box(), pose, INTR))
        for label in ("back", "right", "top"):
            self.assertAlmostEqual(pct[label], 100.0 / 3.0, places=6)
        self.assertAlmostEqual(sum(pct.values()), 100.0, places=9)

    def test_percentages_sum_to_100(self):
        """Test sum = 100 and hidden faces at 0 for random views of a random box."""
        rng = np.random.default_rng(5)
        cloud = rng.standard_normal((100, 3)) * [2.0, 1.0, 0.6]
        box = generate_obox(cloud, AnatomicalFrame(Rotation.random(random_state=rng).as_matrix()))
        for _ in range(20):
            direction = rng.normal(size=3)
            pose = look_at(box.center + 25.0 * direction / np.linalg.norm(direction), box.center)
            report = visibility_report(box, pose, INTR)
            self.assertAlmostEqual(sum(f.percentage for f in report), 100.0, places=9)
            for f in report:
                if not f.visible:
                    self.assertEqual(f.percentage, 0.0)

    def test_face_crossing_camera_plane(self):
        """Test that a visible face straddling the camera plane gets area 0 and a flag."""
        pose = look_at(np.array([0.5, 0.5, 1.2]), np.array([5.0, 0.5, 1.2]))
        report = {f.face: f for f in visibility_report(unit_box(), pose, INTR)}
        self.assertTrue(report["top"].visible)
        self.assertTrue(report["top"].behind_camera)
        self.assertEqual(report["top"].projected_area, 0.0)
        self.assertEqual(report["top"].percentage, 0.0)

    def test_overhead_view_top_dominates(self):
        """Test that a near-vertical view of a quadruped gives the dorsal face the largest share."""
        syn = overhead_scene(np.random.default_rng(11))
        box = generate_obox(syn.scene.mesh, AnatomicalFrame(syn.body_rotation))
        pct = percentages(visibility_report(box, syn.pose, syn.scene.intrinsics))
        self.assertEqual(max(pct, key=pct.get), "top")
        self.assertEqual(pct["bottom"], 0.0)


if __name__ == "__main__":
    unittest.main(verbosity=2)
