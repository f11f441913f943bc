import math
import unittest

import mpmath
import numpy as np
from hypothesis import given, settings, strategies as st

import hardy
from errors import ConfigError
from hardy import (LN2, TestFunction, d_sweep, default_grid, hardy_quotient, improved_quotient,
                   improvement_weight, sharpness_probe)
from quadrature import QuadratureGrid


class TestTestFunctions(unittest.TestCase):
    def test_validation(self):
        self.assertRaises(ValueError, TestFunction, "gaussian")
        self.assertRaises(ValueError, TestFunction.power_boundary, 0.0)
        self.assertRaises(ValueError, TestFunction.bump_product, 0.5)

    def test_from_dict(self):
        self.assertEqual(hardy.test_function_from_dict("sine_pad"), TestFunction.sine_pad())
        self.assertEqual(hardy.test_function_from_dict({"kind": "power_boundary"}), TestFunction.power_boundary(0.05))
        with self.assertRaises(ConfigError) as caught:
            hardy.test_function_from_dict({"kind": "gaussian"})
        self.assertEqual(caught.exception.pointer, "/params/phi")


class TestHardyQuotient(unittest.TestCase):
    def test_sine_against_sine_integral(self):
        mpmath.mp.dps = 30
        exact = mpmath.pi / (mpmath.si(mpmath.pi) - 2 / mpmath.pi)
        self.assertAlmostEqual(hardy_quotient(TestFunction.sine_pad()), float(exact), delta=1e-7)

    def test_bump_product(self):
        self.assertAlmostEqual(hardy_quotient(TestFunction.bump_product(1.0)), 16.0 / 7.0, delta=1e-8)

    @settings(max_examples=20, deadline=None)
    @given(epsilon=st.floats(0.02, 1.0))
    def test_power_boundary_closed_form(self, epsilon):
        quotient = hardy_quotient(TestFunction.power_boundary(epsilon))
        self.assertAlmostEqual(quotient, (1.0 + 2.0 * epsilon) ** 2, delta=1e-9)

    def test_mass_term_raises_quotient(self):
        phi = TestFunction.sine_pad()
        self.assertGreater(hardy_quotient(phi, A=1.0), hardy_quotient(phi))

    def test_grid_must_start_at_midpoint(self):
        grid = QuadratureGrid.uniform(1.0, 60.0, 4001)
        self.assertRaises(ValueError, hardy_quotient, TestFunction.sine_pad(), 0.0, grid)

    def test_default_grid(self):
        grid = default_grid()
        self.assertEqual(grid.s_values[0], LN2)
        self.assertEqual(len(grid), 4001)


class TestImprovedQuotient(unittest.TestCase):
    def test_weight_value(self):
        weight = improvement_weight(np.array([1.0 - LN2]), 2.0, 1)
        self.assertAlmostEqual(float(weight[0]), 1.25, places=14)
        np.testing.assert_array_equal(improvement_weight(np.array([1.0, 5.0]), 2.0, 0), [1.0, 1.0])
        self.assertRaises(ValueError, improvement_weight, np.array([1.0]), 2.0, 5)

    def test_depth_zero_is_plain_quotient(self):
        phi = TestFunction.bump_product(1.0)
        self.assertEqual(improved_quotient(phi, depth=0), hardy_quotient(phi))

    def test_monotone_in_depth_and_above_one(self):
        for phi in (TestFunction.sine_pad(), TestFunction.bump_product(1.0), TestFunction.power_boundary(0.05)):
            quotients = [improved_quotient(phi, 2.0, depth) for depth in range(0, 4)]
            for shallow, deep in zip(quotients, quotients[1:]):
                self.assertLessEqual(deep, shallow)
            self.assertGreaterEqual(min(quotients), 1.0)

    def test_diameter_bound(self):
        self.assertRaises(ValueError, improved_quotient, TestFunction.sine_pad(), 0.9)

    def test_d_sweep(self):
        rows = d_sweep(TestFunction.sine_pad(), [1.0, 2.0, 8.0], depth=2)
        self.assertEqual([row.D for row in rows], [1.0, 2.0, 8.0])
        self.assertEqual(rows[0].to_dict()["family"], "sine_pad")
        self.assertRaises(ValueError, d_sweep, TestFunction.sine_pad(), [0.25])


class TestSharpness(unittest.TestCase):
    def test_quotients_approach_one(self):
        quotients = sharpness_probe([0.2, 0.1, 0.05, 0.01], workers=2)
        self.assertAlmostEqual(quotients[0], 1.96, delta=1e-8)
        self.assertLessEqual(quotients[-1], 1.05)
        self.assertEqual(quotients, sorted(quotients, reverse=True))

    def test_sequence_must_decrease(self):
        self.assertRaises(ValueError, sharpness_probe, [0.1, 0.2])
