"""Unit tests for scenario files and the scenario factory."""
import unittest
import sys
import os
import tempfile

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from carnot_lab.errors import ConfigError
from carnot_lab.functionals import CurvatureKind
from carnot_lab.scenarios import (
    LabConfig, build_scenario, gaussian_density, load_config, parse_config, witness_functions
)
from carnot_lab.scenarios.config import locate_key

CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs")


class TestParseConfig(unittest.TestCase):
    """Tests for TOML parsing and validation."""

    def test_empty_file_uses_defaults(self):
        """Every table is optional."""
        config = parse_config("")
        self.assertEqual(config.model.family, "abelian_box")
        self.assertEqual(config.times.grid, [0.05, 0.1, 0.2])

    def test_syntax_error_has_line(self):
        """TOML syntax errors report their line."""
        with self.assertRaises(ConfigError) as ctx:
            parse_config('name = "x"\n[chart\n', "bad.toml")
        self.assertEqual(ctx.exception.line, 2)
        self.assertTrue(str(ctx.exception).startswith("bad.toml:2:"))

    def test_validation_error_has_line(self):
        """Out-of-range values point at their key."""
        text = 'name = "x"\n\n[chart]\nwindow = 0.7\n'
        with self.assertRaises(ConfigError) as ctx:
            parse_config(text)
        self.assertEqual(ctx.exception.line, 4)
        self.assertIn("chart.window", str(ctx.exception))

    def test_unknown_key(self):
        """Unknown keys are rejected."""
        text = '[model]\nfamily = "abelian_box"\nbogus = 1\n'
        with self.assertRaises(ConfigError) as ctx:
            parse_config(text)
        self.assertEqual(ctx.exception.line, 3)

    def test_unknown_family(self):
        """Only the three supported families are accepted."""
        with self.assertRaises(ConfigError):
            parse_config('[model]\nfamily = "su2"\n')

    def test_decreasing_times(self):
        """The time grid must increase."""
        with self.assertRaises(ConfigError):
            parse_config("[times]\ngrid = [0.2, 0.1]\n")

    def test_cross_check_lengths(self):
        """Chart extents must match the dimension."""
        text = '[model]\ndimension = 2\n\n[chart]\nlo = [-1.0]\n'
        with self.assertRaises(ConfigError) as ctx:
            parse_config(text)
        self.assertEqual(ctx.exception.line, 5)
        self.assertIn("expected 2 entries", str(ctx.exception))

    def test_cross_check_pairs(self):
        """Measure pairs must name configured measures."""
        text = ('[measures.a]\ncenter = [0.0, 0.0]\n\n'
                '[suite]\npairs = [["a", "b"]]\n')
        with self.assertRaises(ConfigError) as ctx:
            parse_config(text)
        self.assertEqual(ctx.exception.line, 5)

    def test_periods_only_on_torus(self):
        """Periods on a box are rejected."""
        with self.assertRaises(ConfigError):
            parse_config('[model]\nfamily = "abelian_box"\ndimension = 1\nperiods = [1.0]\n')

    def test_locate_key_falls_back_to_table(self):
        """Missing keys resolve to their table header."""
        text = '[suite]\nseed = 3\n'
        self.assertEqual(locate_key(text, ("suite", "pairs")), 1)

    def test_fingerprint_ignores_output(self):
        """Output settings and job count do not change the fingerprint."""
        a = parse_config('[output]\ndir = "a"\n[suite]\njobs = 1\n')
        b = parse_config('[output]\ndir = "b"\n[suite]\njobs = 4\n')
        c = parse_config('[suite]\nseed = 5\n')
        self.assertEqual(a.fingerprint, b.fingerprint)
        self.assertNotEqual(a.fingerprint, c.fingerprint)

    def test_missing_file(self):
        """Unreadable files raise ConfigError."""
        with self.assertRaises(ConfigError):
            load_config("/nonexistent/scenario.toml")

    def test_shipped_configs_validate(self):
        """The example scenario files are valid."""
        for name in sorted(os.listdir(CONFIG_DIR)):
            if name.endswith(".toml"):
                self.assertIsInstance(load_config(os.path.join(CONFIG_DIR, name)), LabConfig)

    def test_load_from_disk(self):
        """load_config reads and parses a file."""
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "s.toml")
            with open(path, "w") as fh:
                fh.write('name = "disk"\n')
            self.assertEqual(load_config(path).name, "disk")


class TestBuildScenario(unittest.TestCase):
    """Tests for the scenario factory."""

    def test_box_defaults(self):
        """Default boxes get two measures and one default pair."""
        scenario = build_scenario(parse_config('[chart]\nshape = [16, 16]\n'))
        self.assertEqual(scenario.chart.shape, (16, 16))
        self.assertEqual(sorted(scenario.measures), ["bump_a", "bump_b"])
        self.assertEqual(scenario.measure_pairs, (("bump_a", "bump_b"),))
        self.assertEqual(scenario.curvature.kind, CurvatureKind.CONSTANT)

    def test_heisenberg_chart(self):
        """H^1 charts are lattice-aligned with hz = h^2 / 2."""
        text = '[model]\nfamily = "heisenberg1"\n\n[chart]\nspacing = 0.5\n' \
               'half_nodes_xy = 3\nhalf_nodes_z = 6\n'
        scenario = build_scenario(parse_config(text))
        np.testing.assert_allclose(scenario.chart.spacing, [0.5, 0.5, 0.125])
        self.assertEqual(scenario.chart.shape, (7, 7, 13))

    def test_torus_periods_default(self):
        """Torus periods default to one."""
        scenario = build_scenario(parse_config(
            '[model]\nfamily = "abelian_torus"\ndimension = 2\n[chart]\nshape = [8, 8]\n'))
        self.assertEqual(scenario.model.periods, (1.0, 1.0))

    def test_su2_curvature(self):
        """kind = su2 gives sqrt(2) exp(-2t)."""
        scenario = build_scenario(parse_config('[curvature]\nkind = "su2"\n'
                                               '[chart]\nshape = [8, 8]\n'))
        self.assertAlmostEqual(scenario.curvature(0.0), np.sqrt(2.0))
        self.assertAlmostEqual(scenario.curvature.K, 2.0)

    def test_unknown_function_name(self):
        """Unknown witness names raise ConfigError."""
        with self.assertRaises(ConfigError):
            build_scenario(parse_config('[functions]\nnames = ["nope"]\n'
                                        '[chart]\nshape = [8, 8]\n'))

    def test_function_filter(self):
        """functions.names selects witnesses."""
        scenario = build_scenario(parse_config('[functions]\nnames = ["gauss"]\n'
                                               '[chart]\nshape = [8, 8]\n'))
        self.assertEqual([w.name for w in scenario.test_functions], ["gauss"])

    def test_witness_sets(self):
        """Each model gets its own witness family."""
        box = build_scenario(parse_config('[chart]\nshape = [8, 8]\n')).chart
        self.assertIn("gauss", [w.name for w in witness_functions(box)])
        torus = build_scenario(parse_config(
            '[model]\nfamily = "abelian_torus"\ndimension = 1\n[chart]\nshape = [8]\n')).chart
        self.assertIn("cos_x", [w.name for w in witness_functions(torus)])

    def test_gaussian_density_normalized(self):
        """Measures are probability densities."""
        chart = build_scenario(parse_config('[chart]\nshape = [16, 16]\n')).chart
        mu = gaussian_density(chart, [0.75, 0.25], 0.5)
        self.assertAlmostEqual(mu.mass, 1.0)
        self.assertEqual(np.unravel_index(np.argmax(mu.values), chart.shape),
                         chart.locate([0.75, 0.25]))

    def test_seeded_rng(self):
        """Scenario generators depend only on seed and salt."""
        a = build_scenario(parse_config('[chart]\nshape = [8, 8]\n[suite]\nseed = 4\n'))
        b = build_scenario(parse_config('[chart]\nshape = [8, 8]\n[suite]\nseed = 4\n'))
        np.testing.assert_array_equal(a.rng("x").random(3), b.rng("x").random(3))
        self.assertFalse(np.array_equal(a.rng("x").random(3), a.rng("y").random(3)))


if __name__ == "__main__":
    unittest.main()
