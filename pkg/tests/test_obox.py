"""
Unit tests for oriented box generation and enclosure.
"""

import os
import sys
import unittest
from dataclasses import replace
from fractions import Fraction

import numpy as np
from scipy.spatial.transform import Rotation

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from animalbox.errors import EmptyMesh, InvalidFrame, ValidationError
from animalbox.frame import AnatomicalFrame
from animalbox.obox import (
    BOX_EDGES,
    FACE_CORNERS,
    FACE_TABLE,
    MeshVertices,
    compute_centroid,
    corner_index,
    enclosure_check,
    generate_obox,
)
from animalbox.synthetic import quadruped_landmarks, quadruped_mesh

UNIT_CUBE = np.array([[x, y, z] for x in (0.0, 1.0) for y in (0.0, 1.0) for z in (0.0, 1.0)])
IDENTITY = AnatomicalFrame(np.eye(3), "test", "test")


def sorted_rows(a):
    a = np.round(np.asarray(a), 9)
    return a[np.lexsort(a.T[::-1])]


class TestComputeCentroid(unittest.TestCase):
    """Test cases for compute_centroid."""

    def test_two_points(self):
        """Test the midpoint of two points."""
        np.testing.assert_array_equal(compute_centroid(np.array([[0, 0, 0], [2, 0, 0]])), [1, 0, 0])

    def test_single_point(self):
        """Test that a single point is its own centroid."""
        np.testing.assert_array_equal(compute_centroid(np.array([[1.0, 1.0, 1.0]])), [1, 1, 1])

    def test_matches_exact_rational_mean(self):
        """Test agreement with an exact rational accumulation on 10,000 points."""
        rng = np.random.default_rng(5)
        points = rng.normal(1e3, 50.0, size=(10_000, 3))
        centroid = compute_centroid(points)
        for k in range(3):
            exact = float(sum(Fraction(float(v)) for v in points[:, k]) / len(points))
            self.assertLessEqual(abs(centroid[k] - exact), 1e-10 * abs(exact))

    def test_empty_mesh(self):
        """Test EmptyMesh for zero vertices."""
        with self.assertRaises(EmptyMesh):
            compute_centroid(MeshVertices(np.zeros((0, 3))))


class TestMeshVertices(unittest.TestCase):
    """Test cases for mesh validation."""

    def test_bad_shape(self):
        """Test that N x 2 input is rejected."""
        with self.assertRaises(ValidationError):
            MeshVertices(np.zeros((5, 2)))

    def test_non_finite(self):
        """Test that infinite coordinates are rejected."""
        with self.assertRaises(ValidationError):
            MeshVertices(np.array([[0, 0, np.inf]] * 4))

    def test_coplanar_flag(self):
        """Test that planar input is accepted and flagged."""
        self.assertTrue(MeshVertices(UNIT_CUBE[UNIT_CUBE[:, 2] == 0]).is_coplanar)
        self.assertFalse(MeshVertices(UNIT_CUBE).is_coplanar)


class TestCornerTables(unittest.TestCase):
    """Test cases for the fixed corner / face / edge tables."""

    def test_corner_order_x_slowest(self):
        """Test corner index = 4*ix + 2*iy + iz."""
        self.assertEqual(corner_index(0, 0, 1), 1)
        self.assertEqual(corner_index(0, 1, 0), 2)
        self.assertEqual(corner_index(1, 0, 0), 4)
        self.assertEqual(corner_index(1, 1, 1), 7)

    def test_twelve_edges(self):
        """Test that there are 12 edges, each on exactly two faces."""
        self.assertEqual(len(BOX_EDGES), 12)
        for i, j in BOX_EDGES:
            faces = [f for f, quad in FACE_CORNERS.items() if i in quad and j in quad]
            self.assertEqual(len(faces), 2)

    def test_face_corners_lie_on_face_plane(self):
        """Test that each face's corners share the face's fixed axis bit."""
        for label, (axis, side) in FACE_TABLE.items():
            bit = 1 if side > 0 else 0
            for idx in FACE_CORNERS[label]:
                self.assertEqual((idx >> (2 - axis)) & 1, bit, label)


class TestGenerateObox(unittest.TestCase):
    """Test cases for generate_obox."""

    def test_unit_cube_identity_frame(self):
        """Test centroid-relative extents and corners equal to the cube vertices."""
        box = generate_obox(UNIT_CUBE, IDENTITY, epsilon=0.0)
        np.testing.assert_allclose(box.local_min, [-0.5] * 3, atol=1e-15)
        np.testing.assert_allclose(box.local_max, [0.5] * 3, atol=1e-15)
        np.testing.assert_allclose(box.corners_world, UNIT_CUBE, atol=1e-12)
        self.assertFalse(box.coplanar)

    def test_cube_rotated_frame(self):
        """Test that a 90 degree frame about z gives the same corner set."""
        frame = AnatomicalFrame(Rotation.from_euler("z", 90, degrees=True).as_matrix())
        box = generate_obox(UNIT_CUBE, frame, epsilon=0.0)
        np.testing.assert_allclose(sorted_rows(box.corners_world), sorted_rows(UNIT_CUBE), atol=1e-9)

    def test_local_extents_permuted(self):
        """Test that a non-cubic box's local extents swap under a 90 degree frame."""
        slab = UNIT_CUBE * [4.0, 2.0, 1.0]
        frame = AnatomicalFrame(Rotation.from_euler("z", 90, degrees=True).as_matrix())
        box = generate_obox(slab, frame, epsilon=0.0)
        np.testing.assert_allclose(box.extents, [2.0, 4.0, 1.0], atol=1e-12)

    def test_corners_from_local(self):
        """Test corners_world = R @ corners_local + c and the inverse mapping."""
        rng = np.random.default_rng(8)
        cloud = rng.standard_normal((300, 3)) * [3, 1, 0.5]
        frame = AnatomicalFrame(Rotation.random(random_state=rng).as_matrix())
        box = generate_obox(cloud, frame)
        np.testing.assert_allclose(box.corners_world, box.corners_local @ frame.rotation.T + box.centroid, atol=1e-9)
        np.testing.assert_allclose(box.to_local(box.corners_world), box.corners_local, atol=1e-9)

    def test_volume_is_product_of_extents(self):
        """Test volume = prod(local_max - local_min) exactly."""
        box = generate_obox(UNIT_CUBE * [3.0, 2.0, 0.5], IDENTITY)
        self.assertEqual(box.volume, float(np.prod(box.local_max - box.local_min)))

    def test_quadruped_enclosure_is_tight(self):
        """Test full enclosure and that pulling any face in by 2*epsilon drops a vertex."""
        rng = np.random.default_rng(21)
        vertices = quadruped_mesh(rng, quadruped_landmarks())
        frame = AnatomicalFrame(Rotation.random(random_state=rng).as_matrix())
        box = generate_obox(vertices, frame, epsilon=1e-5)
        self.assertEqual(enclosure_check(box, vertices), 1.0)
        for k in range(3):
            low = box.local_min.copy()
            low[k] += 2e-5
            high = box.local_max.copy()
            high[k] -= 2e-5
            self.assertLess(enclosure_check(replace(box, local_min=low), vertices), 1.0)
            self.assertLess(enclosure_check(replace(box, local_max=high), vertices), 1.0)

    def test_rigid_invariance(self):
        """Test that moving mesh and frame rigidly moves the corners the same way."""
        rng = np.random.default_rng(12)
        cloud = rng.standard_normal((200, 3)) * [2, 1, 0.3]
        frame = AnatomicalFrame(Rotation.random(random_state=rng).as_matrix())
        q = Rotation.random(random_state=rng).as_matrix()
        d = rng.uniform(-10, 10, 3)
        box = generate_obox(cloud, frame)
        moved = generate_obox(cloud @ q.T + d, frame.rotated(q))
        np.testing.assert_allclose(moved.corners_world, box.corners_world @ q.T + d, atol=1e-9)

    def test_invalid_frame(self):
        """Test InvalidFrame for a non-orthonormal matrix."""
        with self.assertRaises(InvalidFrame):
            generate_obox(UNIT_CUBE, AnatomicalFrame(np.diag([1.0, 1.0, 2.0])))

    def test_negative_epsilon(self):
        """Test that a negative margin is rejected."""
        with self.assertRaises(ValidationError):
            generate_obox(UNIT_CUBE, IDENTITY, epsilon=-1.0)

    def test_coplanar_mesh_widened(self):
        """Test that a flat mesh gets a positive-thickness, flagged box."""
        flat = UNIT_CUBE[UNIT_CUBE[:, 2] == 0]
        for eps in (0.0, 1e-5):
            box = generate_obox(flat, IDENTITY, epsilon=eps)
            self.assertTrue(box.coplanar)
            self.assertTrue(np.all(box.local_min < box.local_max))


class TestEnclosureCheck(unittest.TestCase):
    """Test cases for enclosure_check."""

    def test_boundary_vertices_enclosed(self):
        """Test closed-interval classification with a zero margin."""
        box = generate_obox(UNIT_CUBE, IDENTITY, epsilon=0.0)
        self.assertEqual(enclosure_check(box, UNIT_CUBE), 1.0)

    def test_translated_mesh_outside(self):
        """Test that shifting the mesh by one box width leaves nothing inside."""
        rng = np.random.default_rng(4)
        cloud = rng.standard_normal((500, 3))
        box = generate_obox(cloud, IDENTITY)
        shifted = cloud + [box.extents[0], 0.0, 0.0]
        self.assertEqual(enclosure_check(box, shifted), 0.0)


if __name__ == "__main__":
    unittest.main(verbosity=2)
