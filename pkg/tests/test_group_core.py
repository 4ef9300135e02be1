"""Unit tests for group algebra and Carnot-Caratheodory distances."""
import unittest
import sys
import os

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from carnot_lab.types import GroupModel
from carnot_lab.group_core import (
    as_points, dilate, horizontal_frame, identity, inverse, multiply, rotate_xy,
    translation_jacobian
)
from carnot_lab.cc_metric import (
    CCMetric, MetricOracle, Method, cc_distance, cc_geodesic, geodesic_point
)
from carnot_lab.errors import InvalidInputError, UnsupportedOperationError


class TestHeisenbergAlgebra(unittest.TestCase):
    """Tests for the H^1 group law."""

    def setUp(self):
        self.model = GroupModel.heisenberg()

    def test_product_commutator(self):
        """(1,0,0).(0,1,0) = (1,1,1/2)."""
        p = multiply(self.model, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
        np.testing.assert_allclose(p, [1.0, 1.0, 0.5])

    def test_noncommutative(self):
        """Reversed factors flip the vertical correction."""
        p = multiply(self.model, [0.0, 1.0, 0.0], [1.0, 0.0, 0.0])
        np.testing.assert_allclose(p, [1.0, 1.0, -0.5])

    def test_inverse_is_negation(self):
        """a . a^-1 is the identity."""
        a = np.array([0.3, -1.2, 0.7])
        np.testing.assert_allclose(multiply(self.model, a, inverse(self.model, a)),
                                   identity(self.model), atol=1e-15)

    def test_associative(self):
        """(a.b).c = a.(b.c)."""
        rng = np.random.default_rng(3)
        a, b, c = rng.normal(size=(3, 3))
        left = multiply(self.model, multiply(self.model, a, b), c)
        right = multiply(self.model, a, multiply(self.model, b, c))
        np.testing.assert_allclose(left, right, atol=1e-12)

    def test_dilation_is_automorphism(self):
        """delta_l(a.b) = delta_l(a).delta_l(b)."""
        a, b = np.array([0.4, 0.1, -0.3]), np.array([-0.2, 0.5, 0.9])
        lhs = dilate(self.model, 1.7, multiply(self.model, a, b))
        rhs = multiply(self.model, dilate(self.model, 1.7, a), dilate(self.model, 1.7, b))
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_dilation_degrees(self):
        """z scales with lambda^2."""
        np.testing.assert_allclose(dilate(self.model, 2.0, [1.0, 1.0, 1.0]), [2.0, 2.0, 4.0])

    def test_negative_dilation(self):
        """Negative dilation factors are rejected."""
        with self.assertRaises(InvalidInputError):
            dilate(self.model, -1.0, [1.0, 0.0, 0.0])

    def test_left_frame(self):
        """X1 = (1, 0, -y/2), X2 = (0, 1, x/2)."""
        x1, x2 = horizontal_frame(self.model, [2.0, 4.0, 0.0])
        np.testing.assert_allclose(x1, [1.0, 0.0, -2.0])
        np.testing.assert_allclose(x2, [0.0, 1.0, 1.0])

    def test_right_frame(self):
        """The right-invariant frame flips the vertical component."""
        x1, x2 = horizontal_frame(self.model, [2.0, 4.0, 0.0], right_invariant=True)
        np.testing.assert_allclose(x1, [1.0, 0.0, 2.0])
        np.testing.assert_allclose(x2, [0.0, 1.0, -1.0])

    def test_translation_jacobian_unimodular(self):
        """Translations preserve the Haar measure."""
        for side in ("left", "right"):
            jac = translation_jacobian(self.model, [0.5, -1.5, 2.0], side)
            self.assertAlmostEqual(np.linalg.det(jac), 1.0)

    def test_bad_coordinates(self):
        """Points with the wrong length are rejected."""
        with self.assertRaises(InvalidInputError):
            as_points(self.model, [1.0, 2.0])

    def test_rotation_is_automorphism(self):
        """Rotations about the z axis commute with the product."""
        a, b = np.array([0.4, 0.1, -0.3]), np.array([-0.2, 0.5, 0.9])
        lhs = rotate_xy(multiply(self.model, a, b), 0.7)
        rhs = multiply(self.model, rotate_xy(a, 0.7), rotate_xy(b, 0.7))
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)


class TestAbelianAlgebra(unittest.TestCase):
    """Tests for the box and torus models."""

    def test_torus_wraps(self):
        """Products are reduced modulo the periods."""
        model = GroupModel.torus([1.0, 2.0])
        np.testing.assert_allclose(multiply(model, [0.75, 1.5], [0.5, 1.0]), [0.25, 0.5])

    def test_torus_dilation_unsupported(self):
        """The torus has no dilations."""
        model = GroupModel.torus([1.0])
        with self.assertRaises(UnsupportedOperationError):
            dilate(model, 2.0, [0.1])

    def test_box_frame_is_standard_basis(self):
        """Abelian frames are the coordinate vectors."""
        frame = horizontal_frame(GroupModel.box(2), [0.3, 0.4])
        np.testing.assert_allclose(np.stack(frame), np.eye(2))


class TestCCMetric(unittest.TestCase):
    """Tests for the distance oracles."""

    def setUp(self):
        self.model = GroupModel.heisenberg()
        self.metric = CCMetric(self.model)

    def test_horizontal_distance(self):
        """Horizontal points are at Euclidean distance."""
        self.assertAlmostEqual(self.metric.distance([0, 0, 0], [1.0, 0, 0]), 1.0, places=8)
        self.assertAlmostEqual(self.metric.distance([0, 0, 0], [0.6, 0.8, 0]), 1.0, places=8)

    def test_vertical_distance(self):
        """d(o, (0,0,z)) = sqrt(4 pi |z|)."""
        for z in (0.25, 1.0, -2.0):
            self.assertAlmostEqual(self.metric.distance([0, 0, 0], [0, 0, z]),
                                   np.sqrt(4.0 * np.pi * abs(z)), places=6)

    def test_left_invariance(self):
        """d(g.a, g.b) = d(a, b)."""
        a, b, g = np.array([0.3, 0.2, 0.1]), np.array([-0.5, 0.4, 0.6]), np.array([1.0, -2.0, 0.5])
        d0 = self.metric.distance(a, b)
        d1 = self.metric.distance(multiply(self.model, g, a), multiply(self.model, g, b))
        self.assertAlmostEqual(d0, d1, places=8)

    def test_symmetry(self):
        """d(a, b) = d(b, a)."""
        a, b = np.array([0.3, 0.2, 0.1]), np.array([-0.5, 0.4, 0.6])
        self.assertAlmostEqual(self.metric.distance(a, b), self.metric.distance(b, a), places=8)

    def test_homogeneity(self):
        """d(delta_l a, delta_l b) = l d(a, b)."""
        a, b = np.array([0.3, 0.2, 0.1]), np.array([-0.5, 0.4, 0.6])
        d0 = self.metric.distance(a, b)
        d1 = self.metric.distance(dilate(self.model, 2.0, a), dilate(self.model, 2.0, b))
        self.assertAlmostEqual(d1, 2.0 * d0, places=7)

    def test_graph_oracle_bounds_from_above(self):
        """Lattice paths are admissible, so the graph value is an upper bound."""
        graph = CCMetric(self.model, MetricOracle(Method.HORIZONTAL_GRAPH))
        p = [0.4, 0.2, 0.3]
        exact = self.metric.distance([0, 0, 0], p)
        approx = graph.distance([0, 0, 0], p)
        self.assertGreaterEqual(approx, exact - 1e-9)
        self.assertLess(approx, 1.5 * exact)

    def test_pairwise_shape(self):
        """pairwise returns an (n, m) matrix."""
        xs = np.zeros((2, 3))
        ys = np.array([[1.0, 0, 0], [0, 1.0, 0], [0, 0, 0.0]])
        d = self.metric.pairwise(xs, ys)
        self.assertEqual(d.shape, (2, 3))
        np.testing.assert_allclose(d[0], [1.0, 1.0, 0.0], atol=1e-8)

    def test_geodesic_endpoints(self):
        """Geodesic polylines start at a, end at b and have length close to d(a, b)."""
        a, b = np.zeros(3), np.array([0.5, 0.0, 0.2])
        path = cc_geodesic(self.model, a, b, 65)
        np.testing.assert_allclose(path.points[0], a)
        np.testing.assert_allclose(path.points[-1], b)
        self.assertAlmostEqual(path.length, self.metric.distance(a, b), delta=1e-2)

    def test_geodesic_midpoint(self):
        """The midpoint splits the distance in half."""
        a, b = np.zeros(3), np.array([0.5, 0.0, 0.2])
        m = geodesic_point(self.model, a, b, 0.5)
        d = self.metric.distance(a, b)
        self.assertAlmostEqual(self.metric.distance(a, m), 0.5 * d, places=5)
        self.assertAlmostEqual(self.metric.distance(m, b), 0.5 * d, places=5)

    def test_torus_minimum_image(self):
        """Torus distances use the shortest representative."""
        metric = CCMetric(GroupModel.torus([1.0]))
        self.assertAlmostEqual(metric.distance([0.1], [0.9]), 0.2)

    def test_cc_distance_broadcasts(self):
        """cc_distance returns a float for points and an array for batches."""
        oracle = MetricOracle()
        d = cc_distance(self.model, oracle, [0.0, 0.0, 0.0], [0.0, 0.0, 1.0])
        self.assertIsInstance(d, float)
        targets = [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]
        batch = cc_distance(self.model, oracle, np.zeros((2, 3)), targets)
        np.testing.assert_allclose(batch, [1.0, np.sqrt(4.0 * np.pi)], rtol=1e-8)

    def test_oracle_arguments(self):
        """Coarse graphs, loose roots and odd stencils are rejected."""
        for kwargs in ({"graph_resolution": 4}, {"root_tolerance": 0.1}, {"stencil": 12}):
            with self.assertRaises(InvalidInputError):
                MetricOracle(**kwargs)


if __name__ == "__main__":
    unittest.main()
