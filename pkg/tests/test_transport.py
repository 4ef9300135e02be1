"""Unit tests for optimal transport, push-forwards and ball convolution."""
import unittest
import sys
import os

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from carnot_lab.types import DensityField, GridChart, GroupModel, PointCloudMeasure
from carnot_lab.cc_metric import CCMetric
from carnot_lab.transport import (
    Potential, axis_marginal, ball_points, block_factor, cloud_to_density, common_block_factor,
    convolve_cloud, convolve_measure, density_to_cloud, displacement_interpolate, hopf_lax,
    kantorovich_ascent, kantorovich_dual_value, product_defect, push_forward, regularize_curve,
    right_translation_curve, w1_dual, w2_density_1d, w2_exact, w2_marginals, w2_sinkhorn
)
from carnot_lab.errors import CapacityError, InvalidInputError


def gaussian_line(chart: GridChart, centre: float, width: float) -> DensityField:
    x = chart.nodes()[..., 0]
    return DensityField(chart, np.exp(-0.5 * ((x - centre) / width) ** 2)).normalized()


class TestExactTransport(unittest.TestCase):
    """Tests for the network simplex wrappers."""

    def test_heisenberg_diracs(self):
        """W_2 between Diracs is the CC distance."""
        model = GroupModel.heisenberg()
        metric = CCMetric(model)
        mu = PointCloudMeasure.dirac(model, [0.0, 0.0, 0.0])
        nu = PointCloudMeasure.dirac(model, [0.0, 0.0, 0.25])
        plan = w2_exact(metric, mu, nu)
        self.assertAlmostEqual(plan.distance, np.sqrt(np.pi), places=6)

    def test_translated_cloud(self):
        """Translating a cloud in the plane moves it by |v| in W_2."""
        model = GroupModel.box(2)
        metric = CCMetric(model)
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])
        v = np.array([0.1, -0.2])
        plan = w2_exact(metric, PointCloudMeasure.uniform(model, pts),
                        PointCloudMeasure.uniform(model, pts + v))
        self.assertAlmostEqual(plan.distance, np.linalg.norm(v), places=8)
        self.assertLess(plan.marginal_error(), 1e-12)
        self.assertEqual(plan.metadata["method"], "network_simplex")

    def test_line_uses_sorted_coupling(self):
        """One-dimensional boxes use the monotone coupling."""
        model = GroupModel.box(1)
        metric = CCMetric(model)
        mu = PointCloudMeasure.uniform(model, np.array([[0.0], [1.0]]))
        nu = PointCloudMeasure.uniform(model, np.array([[3.0], [2.0]]))
        plan = w2_exact(metric, mu, nu)
        self.assertEqual(plan.metadata["method"], "emd_1d")
        self.assertAlmostEqual(plan.cost, 4.0)

    def test_capacity(self):
        """Instances above the cap raise CapacityError."""
        model = GroupModel.box(2)
        metric = CCMetric(model)
        pts = np.random.default_rng(0).normal(size=(5, 2))
        mu = PointCloudMeasure.uniform(model, pts)
        with self.assertRaises(CapacityError):
            w2_exact(metric, mu, mu, cap=4)

    def test_w1_below_w2(self):
        """W_1 <= W_2 for probability measures."""
        model = GroupModel.box(2)
        metric = CCMetric(model)
        rng = np.random.default_rng(1)
        mu = PointCloudMeasure.uniform(model, rng.normal(size=(6, 2)))
        nu = PointCloudMeasure.uniform(model, rng.normal(size=(6, 2)) + 1.0)
        self.assertLessEqual(w1_dual(metric, mu, nu), w2_exact(metric, mu, nu).distance + 1e-9)

    def test_model_mismatch(self):
        """Measures must live on the metric's model."""
        metric = CCMetric(GroupModel.box(2))
        mu = PointCloudMeasure.dirac(GroupModel.box(1), [0.0])
        with self.assertRaises(InvalidInputError):
            w2_exact(metric, mu, mu)


class TestQuantileTransport(unittest.TestCase):
    """Tests for the 1-D density solver."""

    def test_shift_by_cells(self):
        """A density moved by k cells is at distance k h."""
        chart = GridChart.box(GroupModel.box(1), [-4.0], [4.0], [128])
        f = gaussian_line(chart, -0.5, 0.4)
        g = DensityField(chart, np.roll(f.values, 8))
        self.assertAlmostEqual(w2_density_1d(f, g), 8 * chart.spacing[0], places=6)

    def test_self_distance(self):
        """W_2(f, f) = 0."""
        chart = GridChart.box(GroupModel.box(1), [-4.0], [4.0], [64])
        f = gaussian_line(chart, 0.0, 0.5)
        self.assertAlmostEqual(w2_density_1d(f, f), 0.0, places=10)

    def test_needs_line(self):
        """Two-dimensional charts are rejected."""
        chart = GridChart.box(GroupModel.box(2), [-1.0, -1.0], [1.0, 1.0], [4, 4])
        f = DensityField(chart, np.ones((4, 4))).normalized()
        with self.assertRaises(InvalidInputError):
            w2_density_1d(f, f)

    def test_marginals_on_a_line(self):
        """On a line the marginal distance is the quantile distance itself."""
        chart = GridChart.box(GroupModel.box(1), [-4.0], [4.0], [128])
        f = gaussian_line(chart, -0.5, 0.4)
        g = gaussian_line(chart, 0.7, 0.6)
        self.assertAlmostEqual(w2_marginals(f, g), w2_density_1d(f, g), places=12)

    def test_marginals_of_a_product(self):
        """For product densities the axis distances add in squares."""
        chart = GridChart.box(GroupModel.box(2), [-4.0, -4.0], [4.0, 4.0], [64, 64])
        x, y = chart.nodes()[..., 0], chart.nodes()[..., 1]
        f = DensityField(chart, np.exp(-0.5 * (x * x + y * y) / 0.25)).normalized()
        g = DensityField(chart, np.exp(-0.5 * ((x - 1.0) ** 2 + y * y) / 0.25)).normalized()
        line = axis_marginal(f, 0)
        self.assertEqual(line.chart.shape, (64,))
        self.assertAlmostEqual(line.mass, 1.0)
        self.assertAlmostEqual(w2_marginals(f, g), 1.0, places=6)

    def test_marginals_need_walls(self):
        """Torus charts have no axis marginal transport."""
        chart = GridChart.torus(GroupModel.torus([1.0]), [16])
        f = DensityField(chart, np.ones(16)).normalized()
        with self.assertRaises(InvalidInputError):
            w2_marginals(f, f)


class TestEntropicAndDual(unittest.TestCase):
    """Tests for Sinkhorn and the Kantorovich dual."""

    def setUp(self):
        self.model = GroupModel.box(2)
        self.metric = CCMetric(self.model)
        rng = np.random.default_rng(7)
        self.mu = PointCloudMeasure.uniform(self.model, rng.normal(size=(8, 2)))
        self.nu = PointCloudMeasure.uniform(self.model, rng.normal(size=(8, 2)) + [1.0, 0.0])
        self.exact = w2_exact(self.metric, self.mu, self.nu)

    def test_sinkhorn_upper_bound(self):
        """The rounded entropic plan is feasible, so its cost bounds W_2^2 from above."""
        plan = w2_sinkhorn(self.metric, self.mu, self.nu)
        self.assertLess(plan.marginal_error(), 1e-9)
        self.assertGreaterEqual(plan.cost, self.exact.cost - 1e-9)

    def test_sinkhorn_records_gap(self):
        """The regularization gap to the simplex optimum lies under the dual gap bound."""
        plan = w2_sinkhorn(self.metric, self.mu, self.nu)
        meta = plan.metadata
        self.assertAlmostEqual(meta["exact_cost"], self.exact.cost, places=9)
        self.assertAlmostEqual(plan.cost, meta["exact_cost"] + meta["gap"], places=12)
        self.assertGreaterEqual(meta["gap"], -1e-9)
        self.assertLessEqual(meta["gap"], meta["gap_bound"] + 1e-9)
        self.assertLessEqual(meta["dual_value"], self.exact.cost + 1e-9)

    def test_sinkhorn_gap_bound_without_exact(self):
        """Above exact_cap only the dual gap bound is recorded."""
        plan = w2_sinkhorn(self.metric, self.mu, self.nu, exact_cap=4)
        self.assertNotIn("gap", plan.metadata)
        self.assertGreaterEqual(plan.metadata["gap_bound"], 0.0)

    def test_bad_schedule(self):
        """Increasing epsilon schedules are rejected."""
        with self.assertRaises(InvalidInputError):
            w2_sinkhorn(self.metric, self.mu, self.nu, schedule=(0.1, 0.3))

    def test_dual_below_primal(self):
        """Dual values never exceed W_2^2 / 2 and the ascent gets close."""
        _, value = kantorovich_ascent(self.metric, self.mu, self.nu)
        half = 0.5 * self.exact.cost
        self.assertLessEqual(value, half + 1e-9)
        self.assertGreater(value, half - 0.05 * half)

    def test_hopf_lax_needs_positive_time(self):
        """Q_s is only defined for s > 0."""
        phi = Potential.constant(self.nu.points)
        with self.assertRaises(InvalidInputError):
            hopf_lax(self.metric, phi, 0.0)

    def test_hopf_lax_of_constant(self):
        """Q_s of a constant is that constant on its own support."""
        phi = Potential.constant(self.nu.points, 2.5)
        np.testing.assert_allclose(hopf_lax(self.metric, phi, 0.5).values, 2.5)

    def test_weak_duality(self):
        """Any potential on the support of nu gives at most W_2^2 / 2."""
        rng = np.random.default_rng(3)
        half = 0.5 * self.exact.cost
        for _ in range(5):
            phi = Potential(self.nu.points, rng.normal(size=self.nu.size))
            self.assertLessEqual(kantorovich_dual_value(self.metric, phi, self.mu, self.nu),
                                 half + 1e-9)

    def test_dual_value_needs_support_of_nu(self):
        """Potentials living elsewhere are rejected."""
        phi = Potential.constant(self.mu.points)
        with self.assertRaises(InvalidInputError):
            kantorovich_dual_value(self.metric, phi, self.mu, self.nu)


class TestCurves(unittest.TestCase):
    """Tests for interpolation and translation curves."""

    def test_interpolation_endpoints(self):
        """s = 0 and s = 1 return the marginals."""
        model = GroupModel.box(2)
        metric = CCMetric(model)
        mu = PointCloudMeasure.dirac(model, [0.0, 0.0])
        nu = PointCloudMeasure.dirac(model, [2.0, 0.0])
        plan = w2_exact(metric, mu, nu)
        self.assertIs(displacement_interpolate(metric, plan, 0.0), mu)
        self.assertIs(displacement_interpolate(metric, plan, 1.0), nu)
        mid = displacement_interpolate(metric, plan, 0.5)
        np.testing.assert_allclose(mid.points, [[1.0, 0.0]])

    def test_interpolation_range(self):
        """s outside [0, 1] is rejected."""
        model = GroupModel.box(1)
        metric = CCMetric(model)
        mu = PointCloudMeasure.dirac(model, [0.0])
        plan = w2_exact(metric, mu, mu)
        with self.assertRaises(InvalidInputError):
            displacement_interpolate(metric, plan, 1.5)

    def test_push_forward_left(self):
        """Left push-forward multiplies every atom on the left."""
        model = GroupModel.heisenberg()
        mu = PointCloudMeasure.dirac(model, [0.0, 1.0, 0.0])
        out = push_forward(model, mu, [1.0, 0.0, 0.0])
        np.testing.assert_allclose(out.points, [[1.0, 1.0, 0.5]])

    def test_right_translation_is_constant_speed(self):
        """W_2(mu_0, mu_s) = s |u| along right translations."""
        model = GroupModel.heisenberg()
        metric = CCMetric(model)
        mu0 = PointCloudMeasure.uniform(model, np.array([[0.0, 0.0, 0.0], [0.5, 0.5, 0.1]]))
        curve = right_translation_curve(model, mu0, [0.6, 0.8, 0.0], [0.0, 0.5, 1.0])
        self.assertAlmostEqual(w2_exact(metric, curve[0], curve[1]).distance, 0.5, places=6)
        self.assertAlmostEqual(w2_exact(metric, curve[0], curve[2]).distance, 1.0, places=6)

    def test_right_translation_needs_horizontal(self):
        """Vertical directions are rejected."""
        model = GroupModel.heisenberg()
        mu0 = PointCloudMeasure.dirac(model, [0.0, 0.0, 0.0])
        with self.assertRaises(InvalidInputError):
            right_translation_curve(model, mu0, [0.0, 0.0, 1.0], [0.5])


class TestGridConversions(unittest.TestCase):
    """Tests for density and cloud conversions."""

    def setUp(self):
        self.chart = GridChart.box(GroupModel.box(2), [-2.0, -2.0], [2.0, 2.0], [16, 16])
        nodes = self.chart.nodes()
        vals = np.exp(-np.sum((nodes - [0.3, -0.2]) ** 2, axis=-1))
        self.density = DensityField(self.chart, vals).normalized()

    def test_coarsened_cloud_keeps_mean(self):
        """Block merging preserves mass and the centre of mass."""
        cloud = density_to_cloud(self.density, max_atoms=80)
        self.assertLessEqual(cloud.size, 80)
        self.assertAlmostEqual(cloud.weights.sum(), 1.0)
        full = density_to_cloud(self.density)
        np.testing.assert_allclose(cloud.weights @ cloud.points, full.weights @ full.points,
                                   atol=1e-9)

    def test_cloud_round_trip_mass(self):
        """Depositing a cloud gives a unit-mass density."""
        cloud = density_to_cloud(self.density)
        back = cloud_to_density(self.chart, cloud)
        self.assertAlmostEqual(back.mass, 1.0)
        np.testing.assert_allclose(back.values, self.density.values, atol=1e-9)

    def test_common_block_factor(self):
        """One factor fits every field under the cap and is shared by both clouds."""
        nodes = self.chart.nodes()
        wide = DensityField(self.chart, np.exp(-0.1 * np.sum(nodes ** 2, axis=-1))).normalized()
        factor = common_block_factor([self.density, wide], 80)
        self.assertGreaterEqual(factor, block_factor(self.density, 80))
        self.assertEqual(factor, block_factor(wide, 80))
        for field in (self.density, wide):
            self.assertLessEqual(density_to_cloud(field, factor=factor).size, 80)
        self.assertEqual(density_to_cloud(self.density, factor=1).size,
                         density_to_cloud(self.density).size)
        with self.assertRaises(InvalidInputError):
            density_to_cloud(self.density, factor=0)

    def test_product_defect(self):
        """A separable Gaussian is a product of its marginals; a ridge is not."""
        self.assertLess(product_defect(self.density), 1e-12)
        nodes = self.chart.nodes()
        ridge = np.exp(-4.0 * (nodes[..., 0] - nodes[..., 1]) ** 2)
        self.assertGreater(product_defect(DensityField(self.chart, ridge).normalized()), 0.1)


class TestBallConvolution(unittest.TestCase):
    """Tests for convolution by the normalized ball."""

    def test_ball_points_inside_radius(self):
        """Every ball point lies within the radius and the identity is included."""
        model = GroupModel.heisenberg()
        metric = CCMetric(model)
        pts = ball_points(model, 0.5)
        d = np.asarray(metric.distance(np.zeros(3), pts))
        self.assertTrue(np.all(d <= 0.5 + 1e-9))
        self.assertTrue(np.any(np.all(pts == 0.0, axis=1)))

    def test_convolve_cloud_mass(self):
        """Convolving a Dirac spreads it uniformly over the ball."""
        model = GroupModel.box(2)
        mu = PointCloudMeasure.dirac(model, [1.0, 1.0])
        out = convolve_cloud(model, 0.5, mu, spacing=0.25)
        self.assertAlmostEqual(out.weights.sum(), 1.0)
        np.testing.assert_allclose(out.weights, out.weights[0])
        np.testing.assert_allclose(out.weights @ out.points, [1.0, 1.0], atol=1e-12)

    def test_convolve_with_sampled_ball(self):
        """A subset of ball points is a probability kernel that never increases W_2."""
        model = GroupModel.heisenberg()
        metric = CCMetric(model)
        ball = ball_points(model, 0.5)[::5]
        rng = np.random.default_rng(3)
        mu = PointCloudMeasure.uniform(model, 0.3 * rng.normal(size=(6, 3)))
        nu = push_forward(model, mu, [0.5, 0.0, 0.0], side="right")
        out = convolve_cloud(model, 0.5, mu, ball=ball)
        self.assertEqual(out.size, ball.shape[0] * mu.size)
        self.assertAlmostEqual(out.weights.sum(), 1.0)
        smoothed = w2_exact(metric, out, convolve_cloud(model, 0.5, nu, ball=ball)).distance
        self.assertLessEqual(smoothed, w2_exact(metric, mu, nu).distance + 1e-6)
        with self.assertRaises(InvalidInputError):
            convolve_cloud(model, 0.5, mu, ball=np.zeros((0, 3)))

    def test_convolve_measure_mass(self):
        """rho_r * mu keeps unit mass on an interior density."""
        chart = GridChart.box(GroupModel.box(2), [-2.0, -2.0], [2.0, 2.0], [32, 32])
        nodes = chart.nodes()
        mu = DensityField(chart, np.exp(-16.0 * np.sum(nodes ** 2, axis=-1))).normalized()
        out = convolve_measure(chart, 0.5, mu)
        self.assertAlmostEqual(out.mass, 1.0, places=6)

    def test_radius_below_resolution(self):
        """Balls thinner than two spacings are rejected."""
        chart = GridChart.box(GroupModel.box(2), [-2.0, -2.0], [2.0, 2.0], [16, 16])
        mu = DensityField(chart, np.ones((16, 16))).normalized()
        with self.assertRaises(InvalidInputError):
            convolve_measure(chart, 0.3, mu)

    def test_regularized_curve(self):
        """Width 0 is plain convolution; wider mollifiers keep unit mass."""
        chart = GridChart.box(GroupModel.box(2), [-2.0, -2.0], [2.0, 2.0], [32, 32])
        nodes = chart.nodes()
        curve = [DensityField(chart, np.exp(-16.0 * np.sum((nodes - [0.125 * k, 0.0]) ** 2,
                                                           axis=-1))).normalized()
                 for k in range(3)]
        plain = regularize_curve(chart, curve, 0.5, 0)
        for mu, out in zip(curve, plain):
            np.testing.assert_allclose(out.values, convolve_measure(chart, 0.5, mu).values)
        for out in regularize_curve(chart, curve, 0.5, 1):
            self.assertAlmostEqual(out.mass, 1.0, places=6)

    def test_regularize_curve_arguments(self):
        """Negative widths and empty curves are rejected."""
        chart = GridChart.box(GroupModel.box(2), [-2.0, -2.0], [2.0, 2.0], [16, 16])
        mu = DensityField(chart, np.ones((16, 16))).normalized()
        with self.assertRaises(InvalidInputError):
            regularize_curve(chart, [mu], 0.5, -1)
        with self.assertRaises(InvalidInputError):
            regularize_curve(chart, [], 0.5, 0)


if __name__ == "__main__":
    unittest.main()
