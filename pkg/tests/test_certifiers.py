"""Tests for the transport, Poincare, Harnack, entropy, velocity and EVI certifiers."""
import unittest
import sys
import os
from dataclasses import replace

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from carnot_lab.certify import Verdict
from carnot_lab.certify.calculus import NAME as CALCULUS, calculus_self_checks, smooth_field
from carnot_lab.certify.contraction import certify_w_contraction, contraction_times
from carnot_lab.certify.entropy import certify_entropy_regularization
from carnot_lab.certify.evi import (certify_evi, certify_heated_convexity, convexity_source,
                                    evi_time_pairs, translation_offset, trimmed_measure)
from carnot_lab.certify.gradient import certify_gradient_contraction, estimate_c_hat
from carnot_lab.certify.harnack import certify_kernel_lower_bound, certify_log_harnack
from carnot_lab.certify.poincare import certify_variance_poincare
from carnot_lab.certify.velocity import certify_heat_speed, certify_velocity
from carnot_lab.errors import InvalidInputError
from carnot_lab.functionals import sigma_bound
from carnot_lab.memory import reset_result_store
from carnot_lab.scenarios import build_scenario, load_config, parse_config

CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs")

BOX_TOML = """
name = "certifier-box"

[model]
family = "abelian_box"
dimension = 2

[chart]
lo = [-4.0, -4.0]
hi = [4.0, 4.0]
shape = [32, 32]

[curvature]
kind = "constant"
C = 1.0

[times]
grid = [0.05, 0.1]

[functions]
names = ["linear_x", "gauss"]

[suite.params]
pair_count = 3
"""

HEISENBERG_TOML = """
name = "certifier-h1"

[model]
family = "heisenberg1"

[chart]
spacing = 0.5
half_nodes_xy = 3
half_nodes_z = 6

[times]
grid = [0.05]
"""

TORUS_TOML = """
name = "certifier-torus"

[model]
family = "abelian_torus"
dimension = 1

[chart]
shape = [64]

[times]
grid = [0.05, 0.1]
"""


def scenario_from(text: str):
    return build_scenario(parse_config(text))


def by_name(reports, name):
    return [r for r in reports if r.name == name]


class TestContractionAndEvi(unittest.TestCase):
    """W_2 contraction and the weak EVI share their transport values."""

    def setUp(self):
        reset_result_store()
        self.scenario = scenario_from(BOX_TOML)

    def test_contraction_cases(self):
        """One W_2 and one W_1 report per pair and time, t = 0 included."""
        reports = certify_w_contraction(self.scenario)
        self.assertEqual(contraction_times(self.scenario), [0.0, 0.05, 0.1])
        self.assertEqual(len(by_name(reports, "w2_contraction")), 3)
        self.assertEqual(len(by_name(reports, "w1_contraction")), 3)
        for r in reports:
            if r.t == 0.0:
                self.assertEqual(r.verdict, Verdict.PASS)
                self.assertAlmostEqual(r.lhs, r.rhs)

    def test_evi_time_pairs(self):
        """Default pairs are one diagonal pair plus consecutive grid times."""
        self.assertEqual(evi_time_pairs(self.scenario),
                         [(0.05, 0.05), (0.0, 0.05), (0.05, 0.1)])

    def test_diagonal_evi_is_contraction(self):
        """For t0 = t1 the EVI report and the W_2 contraction report coincide."""
        w2 = {r.case: r for r in by_name(certify_w_contraction(self.scenario), "w2_contraction")}
        evi = {r.case: r for r in certify_evi(self.scenario)}
        diagonal = evi["bump_a~bump_b/t0=0.05/t1=0.05"]
        contraction = w2["bump_a~bump_b/t=0.05"]
        self.assertAlmostEqual(diagonal.lhs, contraction.lhs, places=9)
        self.assertAlmostEqual(diagonal.rhs, contraction.rhs, places=9)

    def test_heated_convexity_grid(self):
        """Abelian heated convexity covers every (t, h, s) case."""
        reports = certify_heated_convexity(self.scenario)
        self.assertEqual({r.name for r in reports}, {"heated_convexity"})
        # heated times default to t = 0 and the first grid time
        cases = 2 * len(self.scenario.h_grid) * len(self.scenario.s_grid)
        self.assertEqual(len(reports), cases)


class TestPoincareAndHarnack(unittest.TestCase):
    """Report layout of the semigroup inequalities."""

    def setUp(self):
        reset_result_store()
        self.scenario = scenario_from(BOX_TOML)

    def test_poincare_reports(self):
        """Four inequalities per witness and positive time."""
        reports = certify_variance_poincare(self.scenario)
        self.assertEqual({r.name for r in reports},
                         {"poincare_lower", "poincare_upper", "lip_propagation", "strong_feller"})
        self.assertEqual(len(reports), 2 * 2 * 4)

    def test_log_harnack_pairs(self):
        """Cases cover measures, times, eps and the sampled pairs; the first pair is diagonal."""
        reports = certify_log_harnack(self.scenario)
        self.assertEqual(len(reports), 2 * 2 * 2 * 3)
        first = [r for r in reports if r.case.endswith("pair=0")]
        self.assertTrue(first)
        for r in first:
            self.assertEqual(r.metadata["d"], 0.0)

    def test_log_harnack_pairs_are_seeded(self):
        """The sampled pairs depend only on the seed."""
        a = [(r.metadata["x"], r.metadata["y"]) for r in certify_log_harnack(self.scenario)]
        b = [(r.metadata["x"], r.metadata["y"]) for r in certify_log_harnack(self.scenario)]
        self.assertEqual(a, b)

    def test_kernel_bound_needs_torus(self):
        """On a box the kernel bound is degenerate; symmetry is still checked."""
        reports = certify_kernel_lower_bound(self.scenario)
        bound = by_name(reports, "kernel_lower_bound")
        self.assertEqual(len(bound), 1)
        self.assertEqual(bound[0].verdict, Verdict.DEGENERATE)
        self.assertIn("unit torus", bound[0].metadata["reason"])
        symmetry = by_name(reports, "kernel_symmetry")
        self.assertEqual(len(symmetry), 2)
        self.assertFalse([r for r in symmetry if r.verdict == Verdict.FAIL])

    def test_kernel_bound_on_unit_torus(self):
        """The unit torus gets a bound and an oracle comparison per time."""
        reports = certify_kernel_lower_bound(scenario_from(TORUS_TOML))
        self.assertEqual(len(by_name(reports, "kernel_lower_bound")), 2)
        self.assertEqual(len(by_name(reports, "kernel_oracle")), 2)
        for r in by_name(reports, "kernel_lower_bound"):
            self.assertNotEqual(r.verdict, Verdict.DEGENERATE)


class TestEntropyAndVelocity(unittest.TestCase):
    """Entropy along the flow and metric speeds."""

    def setUp(self):
        reset_result_store()
        self.scenario = scenario_from(BOX_TOML)

    def test_entropy_reports(self):
        """Entropy never increases along the heat flow."""
        reports = certify_entropy_regularization(self.scenario)
        self.assertEqual({r.name for r in reports},
                         {"llogl_regularization", "entropy_monotone", "second_moment",
                          "fisher_moment"})
        self.assertEqual(len(by_name(reports, "fisher_moment")), 2)
        monotone = by_name(reports, "entropy_monotone")
        self.assertEqual(len(monotone), 2 * 2)
        self.assertFalse([r.case for r in monotone if r.verdict == Verdict.FAIL])

    def test_velocity_reports(self):
        """Heat speed, convolution speed and the witness bound are all reported."""
        reports = certify_velocity(self.scenario)
        self.assertEqual(len(by_name(reports, "heat_speed")), 2)
        self.assertEqual(len(by_name(reports, "convolution_speed")), 4)
        self.assertEqual(len(by_name(reports, "lisini")), 2 * 4)

    def test_heat_speed_on_product_density(self):
        """A Gaussian on a box stays a product, so the marginal distance is exact."""
        reports = certify_heat_speed(self.scenario)
        self.assertEqual([r.case for r in reports],
                         ["bump_a/t=0.05/h=0.02", "bump_a/t=0.05/h=0.01"])
        for r in reports:
            self.assertEqual(r.verdict, Verdict.PASS)
            self.assertTrue(r.metadata["exact"])
            self.assertGreater(r.lhs, 0.0)

    def test_convolution_uses_sampled_offsets(self):
        """The kernel is a seeded sample of ball points, so the base cloud keeps cap / k atoms."""
        reports = by_name(certify_velocity(self.scenario), "convolution_speed")
        for r in reports:
            self.assertEqual(r.metadata["offsets"], 4)
            self.assertLessEqual(r.metadata["atoms"], 100)
            self.assertGreater(r.metadata["atoms"], 13)
            self.assertEqual(r.verdict, Verdict.PASS)

    def test_heat_speed_on_heisenberg(self):
        """On H^1 the horizontal marginals give a lower bound, never flagged exact."""
        reports = certify_heat_speed(scenario_from(HEISENBERG_TOML))
        self.assertEqual(len(reports), 2)
        for r in reports:
            self.assertNotEqual(r.verdict, Verdict.DEGENERATE)
            self.assertFalse(r.metadata["exact"])

    def test_heat_speed_degenerate_on_torus(self):
        """Axis marginals need walls, so the torus gets a degenerate report."""
        reports = certify_heat_speed(scenario_from(TORUS_TOML))
        self.assertEqual(len(reports), 1)
        self.assertEqual(reports[0].verdict, Verdict.DEGENERATE)


class TestBaselineVerdicts(unittest.TestCase):
    """On flat R^2 with c = 1 every certified inequality holds."""

    @classmethod
    def setUpClass(cls):
        reset_result_store()
        cls.scenario = build_scenario(load_config(os.path.join(CONFIG_DIR,
                                                               "abelian-baseline.toml")))

    def assertNoFailures(self, reports):
        self.assertTrue(reports)
        self.assertEqual([(r.name, r.case) for r in reports if r.verdict == Verdict.FAIL], [])

    def test_poincare(self):
        """Both Poincare bounds, Lipschitz propagation and strong Feller hold."""
        self.assertNoFailures(certify_variance_poincare(self.scenario))

    def test_log_harnack(self):
        """The log-Harnack inequality holds at every sampled pair."""
        self.assertNoFailures(certify_log_harnack(self.scenario))

    def test_kernel_symmetry(self):
        """The kernel is symmetric; the lower bound itself needs the unit torus."""
        self.assertNoFailures(by_name(certify_kernel_lower_bound(self.scenario),
                                      "kernel_symmetry"))

    def test_entropy(self):
        """LlogL regularization, monotonicity and both moment bounds hold."""
        self.assertNoFailures(certify_entropy_regularization(self.scenario))

    def test_velocity(self):
        """Heat speed, convolution speed and the witness bound hold."""
        self.assertNoFailures(certify_velocity(self.scenario))

    def test_evi(self):
        """With one block factor on both sides the weak EVI holds at c = 1."""
        reports = certify_evi(self.scenario)
        self.assertNoFailures(reports)
        off_diagonal = [r for r in reports if "RI" in r.metadata and "t1" in r.metadata]
        self.assertTrue(off_diagonal)
        for r in off_diagonal:
            self.assertLess(r.lhs, r.rhs)

    def test_heated_convexity(self):
        """Heated displacement convexity holds along the displacement geodesic."""
        self.assertNoFailures(certify_heated_convexity(self.scenario))


TRANSLATION_TOML = """
name = "certifier-h1-translation"

[model]
family = "heisenberg1"

[chart]
spacing = 0.25
half_nodes_xy = 8
half_nodes_z = 48

[curvature]
kind = "constant"
C = 1.5

[times]
grid = [0.05]
s = [0.5]
h = [0.05]

[measures.bump_far]
center = [-1.0, 0.0, 0.0]
width = 0.5

[suite.params]
convexity_measure = "bump_far"
convexity_u = [1.0, 0.0, 0.0]
heated_times = [0.0]
translation_loss = {loss}
"""


class TestHeisenbergTranslation(unittest.TestCase):
    """Right-translation geodesics on H^1."""

    @classmethod
    def setUpClass(cls):
        reset_result_store()
        cls.scenario = scenario_from(TRANSLATION_TOML.format(loss=1e-3))
        cls.reports = certify_heated_convexity(cls.scenario)

    def report(self, suffix):
        found = [r for r in self.reports if r.case == f"bump_far/translation/{suffix}"]
        self.assertEqual(len(found), 1, suffix)
        return found[0]

    def test_w2_is_the_translation_length(self):
        """W_2(mu_0, (T_1)# mu_0) matches d(u, o) = 1 within the transport tolerance."""
        r = self.report("w2")
        self.assertEqual(r.verdict, Verdict.PASS)
        self.assertAlmostEqual(r.metadata["d_u"], 1.0, places=4)
        self.assertLessEqual(abs(r.metadata["w2"] - 1.0), 0.02)
        self.assertLessEqual(r.metadata["trimmed"], 1e-3)

    def test_entropy_is_constant(self):
        """Translation permutes cells of the trimmed measure, so entropy does not move."""
        r = self.report("entropy")
        self.assertEqual(r.verdict, Verdict.PASS)
        self.assertLessEqual(r.lhs, 1e-8)

    def test_sigma_below_its_bound(self):
        """sigma(s) is reported against the right-Fisher bound."""
        r = self.report("sigma/s=0.5")
        self.assertEqual(r.verdict, Verdict.PASS)
        self.assertGreater(r.lhs, 0.0)
        self.assertGreater(r.h, 0.0)
        name, source = convexity_source(self.scenario)
        mu0, _ = trimmed_measure(self.scenario, source, [(0, 0, 0), (2, 0, 0), (4, 0, 0)])
        bound = sigma_bound(self.scenario.operator, 0.5, np.array([1.0, 0.0, 0.0]), mu0, 1.5,
                            self.scenario.metric)
        self.assertEqual(name, "bump_far")
        self.assertAlmostEqual(r.rhs, bound, places=9)

    def test_every_case_holds(self):
        """Weak convexity, sigma and heated convexity all pass."""
        self.assertEqual([r.case for r in self.reports if r.verdict == Verdict.FAIL], [])

    def test_loss_limit(self):
        """Mass pushed off the chart beyond translation_loss is an error."""
        strict = scenario_from(TRANSLATION_TOML.format(loss=0.0))
        name, source = convexity_source(strict)
        with self.assertRaises(InvalidInputError):
            trimmed_measure(strict, source, [(0, 0, 0), (4, 0, 0)])

    def test_bump_table(self):
        """convexity_measure may describe a bump instead of naming a measure."""
        text = TRANSLATION_TOML.format(loss=1e-3).replace(
            'convexity_measure = "bump_far"',
            'convexity_measure = { name = "wide", center = [-1.0, 0.0, 0.0], width = 0.7 }')
        name, mu = convexity_source(scenario_from(text))
        self.assertEqual(name, "wide")
        self.assertAlmostEqual(mu.mass, 1.0)


class TestCHatReports(unittest.TestCase):
    """Lower bound and noncommutativity reports of the c-hat estimate."""

    def setUp(self):
        reset_result_store()

    def test_lower_bound_degenerate_on_torus(self):
        """Without a linear witness the lower bound is not certified on the torus."""
        reports = by_name(certify_gradient_contraction(scenario_from(TORUS_TOML)),
                          "c_hat_lower_bound")
        self.assertEqual(len(reports), 2)
        for r in reports:
            self.assertEqual(r.verdict, Verdict.DEGENERATE)

    def test_lower_bound_tolerance_on_box(self):
        """On a box c-hat reaches 1 up to solver noise and the tolerance is that noise."""
        reports = by_name(certify_gradient_contraction(scenario_from(BOX_TOML)),
                          "c_hat_lower_bound")
        self.assertEqual(len(reports), 2)
        for r in reports:
            self.assertEqual(r.verdict, Verdict.PASS)
            self.assertEqual(r.tolerance, 1e-6)
            self.assertGreaterEqual(r.rhs, 1.0 - 1e-6)

    def test_noncommutative_witness_on_heisenberg(self):
        """H^1 gets one witness report comparing 1.02 with the largest c-hat."""
        text = HEISENBERG_TOML.replace("[times]", '[curvature]\nkind = "estimated"\n\n[times]')
        scenario = scenario_from(text)
        reports = certify_gradient_contraction(scenario)
        witness = by_name(reports, "c_hat_noncommutative")
        self.assertEqual(len(witness), 1)
        self.assertEqual(witness[0].lhs, 1.02)
        self.assertEqual(witness[0].rhs, max(estimate_c_hat(scenario).values()))
        self.assertFalse(by_name(certify_gradient_contraction(scenario_from(BOX_TOML)),
                                 "c_hat_noncommutative"))


class TestCalculusSelfChecks(unittest.TestCase):
    """Layout of the prerequisite checks."""

    def test_report_layout(self):
        """Two action slopes, two refinement ratios and the mollifier identity."""
        reports = calculus_self_checks(scenario_from(BOX_TOML))
        self.assertEqual({r.name for r in reports}, {CALCULUS})
        prefixes = sorted(r.case.split("/")[0] for r in reports)
        self.assertEqual(prefixes, ["action", "action", "gamma_chain", "laplacian_chain",
                                    "mollifier"])
        for r in reports:
            if r.case.startswith(("gamma_chain", "laplacian_chain")):
                self.assertGreater(r.metadata["ratio"], 0.0)

    def test_smooth_field_is_periodic_on_torus(self):
        """Shifting every node by one period leaves the torus test field unchanged."""
        chart = scenario_from(TORUS_TOML).chart
        period = chart.model.periods[0]
        shifted = replace(chart, lo=(chart.lo[0] + period,), hi=(chart.hi[0] + period,))
        np.testing.assert_allclose(smooth_field(shifted).values, smooth_field(chart).values,
                                   atol=1e-12)


class TestTranslationOffset(unittest.TestCase):
    """Right-translation geodesics must stay on the lattice."""

    def setUp(self):
        self.scenario = scenario_from(HEISENBERG_TOML)

    def test_lattice_offset(self):
        """s u is converted to lattice steps."""
        self.assertEqual(translation_offset(self.scenario, np.array([1.0, 0.0, 0.0]), 0.5),
                         (1, 0, 0))

    def test_off_lattice(self):
        """Fractional steps are rejected."""
        with self.assertRaises(InvalidInputError):
            translation_offset(self.scenario, np.array([1.0, 0.0, 0.0]), 0.25)

    def test_vertical_direction(self):
        """Only horizontal directions give translation geodesics."""
        with self.assertRaises(InvalidInputError):
            translation_offset(self.scenario, np.array([0.0, 0.0, 1.0]), 0.5)


if __name__ == "__main__":
    unittest.main()
