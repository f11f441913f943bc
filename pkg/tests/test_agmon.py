import math
import unittest
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from agmon import (BumpProfile, EigenPair, agmon_ratio, decay_fit, deepest_level, form_identity_check,
                   ground_state)
from config import Config
from errors import DegenerateRatioError, InsufficientDataError, SupportError
from potentials import Counterexample, PowerCritical, TwoSided, counterexample_sample, g_hierarchy_build, g_log_power
from quadrature import QuadratureGrid, SolutionSample


def inverse_root_sample(grid: QuadratureGrid) -> SolutionSample:
    root = grid.t_values ** -0.5
    return SolutionSample.from_values(grid, root, -0.5 * root ** 3)


def vanishing_pair(a: float = 0.0, b: float = 1.0) -> EigenPair:
    def solution(x):
        return 0.0, 0.0
    x = np.linspace(a, b, 5)
    return EigenPair(1.0, x, np.zeros_like(x), np.zeros_like(x), 0, 0, a, b, solution)


def sine_pair() -> EigenPair:
    def solution(x):
        return math.pi * np.asarray(x), 0.5 * math.log(2.0)
    x = np.linspace(0.0, 1.0, 5)
    return EigenPair(math.pi ** 2, x, math.sqrt(2.0) * np.sin(math.pi * x), np.zeros_like(x), 0, 0, 0.0, 1.0,
                     solution)


class TestBumpProfile(unittest.TestCase):
    def setUp(self):
        self.bump = BumpProfile.on(0.1, 0.9)

    def test_plateau_and_support(self):
        lo, hi = self.bump.support
        self.assertAlmostEqual(lo, 0.1, places=15)
        self.assertAlmostEqual(hi, 0.9, places=15)
        np.testing.assert_allclose(self.bump.value([0.3, 0.5, 0.7]), 1.0)
        np.testing.assert_array_equal(self.bump.value([0.05, 0.95]), [0.0, 0.0])

    def test_derivative_matches_finite_differences(self):
        h = 1e-6
        for t in (0.13, 0.2, 0.8, 0.87):
            numeric = (self.bump.value(t + h) - self.bump.value(t - h)) / (2 * h)
            self.assertAlmostEqual(float(self.bump.derivative(t)), float(numeric), delta=1e-6)

    def test_validation(self):
        self.assertRaises(ValueError, BumpProfile.on, 0.5, 0.5)
        self.assertRaises(ValueError, BumpProfile, 0.5, 0.0)


class TestGroundState(unittest.TestCase):
    def test_free_dirichlet_eigenpairs(self):
        pair = ground_state(PowerCritical(0.0))
        self.assertAlmostEqual(pair.energy, math.pi ** 2, delta=1e-6)
        self.assertEqual(pair.node_count, 0)
        np.testing.assert_allclose(pair.u, math.sqrt(2.0) * np.sin(math.pi * pair.x), atol=1e-6)
        excited = ground_state(PowerCritical(0.0), index=1)
        self.assertAlmostEqual(excited.energy, 4.0 * math.pi ** 2, delta=1e-5)
        self.assertEqual(excited.node_count, 1)

    def test_dense_output_matches_samples(self):
        pair = ground_state(PowerCritical(0.0))
        self.assertAlmostEqual(float(pair.evaluate(0.5)), math.sqrt(2.0), delta=1e-6)

    def test_free_decay_exponent(self):
        self.assertAlmostEqual(decay_fit(ground_state(PowerCritical(0.0))), 1.0, delta=0.05)

    def test_validation(self):
        self.assertRaises(ValueError, ground_state, PowerCritical(0.0), 0.6, 0.5)
        self.assertRaises(ValueError, ground_state, PowerCritical(0.0), 0.0, 0.0, -1)
        self.assertRaises(ValueError, ground_state, PowerCritical(1.0))

    def test_solves_on_worker_threads(self):
        with ThreadPoolExecutor(max_workers=2) as executor:
            futures = [executor.submit(ground_state, PowerCritical(0.0), 0.0, 0.0, index) for index in (0, 1)]
            energies = [future.result().energy for future in futures]
        self.assertAlmostEqual(energies[0], math.pi ** 2, delta=1e-6)
        self.assertAlmostEqual(energies[1], 4.0 * math.pi ** 2, delta=1e-5)

    def test_to_dict(self):
        data = ground_state(PowerCritical(0.0), 0.01, 0.02).to_dict()
        self.assertEqual(data["rho"], 0.01)
        self.assertAlmostEqual(data["rho_prime"], 0.02, places=14)


@pytest.mark.slow
class TestSingularEigenfunctions(unittest.TestCase):
    def test_decay_exponents(self):
        for c, exponent in ((0.75, 1.5), (2.0, 2.0)):
            pair = ground_state(PowerCritical(c), rho=1e-3)
            self.assertAlmostEqual(decay_fit(pair), exponent, delta=0.05)

    def test_two_sided_decay(self):
        pair = ground_state(TwoSided(PowerCritical(0.75), PowerCritical(0.75)), 1e-3, 1e-3)
        self.assertAlmostEqual(decay_fit(pair, "left"), 1.5, delta=0.05)
        self.assertAlmostEqual(decay_fit(pair, "right"), 1.5, delta=0.05)
        self.assertRaises(ValueError, decay_fit, pair, "middle")

    def test_energy_is_stable_when_truncation_halves(self):
        potential = TwoSided(PowerCritical(0.75), PowerCritical(0.75))
        coarse = ground_state(potential, 1e-3, 1e-3)
        fine = ground_state(potential, 5e-4, 5e-4)
        self.assertEqual(fine.node_count, 0)
        self.assertLessEqual(abs(fine.energy - coarse.energy) / fine.energy, 1e-4)

    def test_agmon_ratio_is_finite(self):
        pair = ground_state(TwoSided(PowerCritical(0.75), PowerCritical(0.75)), 1e-3, 1e-3)
        G = g_hierarchy_build(1, d_omega=0.5)
        report = agmon_ratio(pair, G, 0.5 * G.d0, n_max=6, workers=2)
        self.assertEqual(len(report.ratios), 7)
        self.assertTrue(math.isfinite(report.sup_ratio))
        self.assertGreater(report.sup_ratio, 0.0)
        self.assertEqual(report.rows()[3]["n"], 3)


class TestDecayWindow(unittest.TestCase):
    def test_truncation_too_deep_for_window(self):
        x = np.linspace(0.01, 0.99, 20)
        pair = EigenPair(1.0, x, np.sin(math.pi * x), np.cos(math.pi * x), 0, 0, 0.01, 0.99)
        self.assertRaises(InsufficientDataError, decay_fit, pair)


class TestFormIdentity(unittest.TestCase):
    def test_inverse_square_root(self):
        grid = QuadratureGrid.uniform(-math.log(0.95), -math.log(0.05), 4001)
        error = form_identity_check(PowerCritical(0.75), 0.0, inverse_root_sample(grid), BumpProfile.on(0.1, 0.9))
        self.assertLessEqual(error, 1e-6)

    def test_counterexample_solution(self):
        grid = QuadratureGrid.uniform(-math.log(0.06), -math.log(0.005), 4001)
        error = form_identity_check(Counterexample(2, -0.6), 0.0, counterexample_sample(2, -0.6, grid),
                                    BumpProfile.on(0.01, 0.05))
        self.assertLessEqual(error, 1e-5)

    def test_error_shrinks_at_quadrature_order(self):
        grid = QuadratureGrid.uniform(-math.log(0.95), -math.log(0.05), 129)
        errors = []
        for _ in range(3):
            errors.append(form_identity_check(PowerCritical(0.75), 0.0, inverse_root_sample(grid),
                                              BumpProfile.on(0.1, 0.9)))
            grid = grid.refine()
        self.assertGreater(errors[0], 0.0)
        self.assertLessEqual(errors[1], errors[0] / 4.0)
        self.assertLessEqual(errors[2], errors[1] / 4.0)

    def test_wrong_energy_is_detected(self):
        grid = QuadratureGrid.uniform(-math.log(0.95), -math.log(0.05), 4001)
        error = form_identity_check(PowerCritical(0.75), 5.0, inverse_root_sample(grid), BumpProfile.on(0.1, 0.9))
        self.assertGreater(error, 1e-2)

    def test_zero_amplitude(self):
        grid = QuadratureGrid.uniform(-math.log(0.95), -math.log(0.05), 257)
        self.assertEqual(form_identity_check(PowerCritical(0.75), 0.0, inverse_root_sample(grid),
                                             BumpProfile(0.5, 0.1, amplitude=0.0)), 0.0)

    def test_support_outside_grid(self):
        grid = QuadratureGrid.uniform(-math.log(0.95), -math.log(0.05), 257)
        self.assertRaises(SupportError, form_identity_check, PowerCritical(0.75), 0.0,
                          inverse_root_sample(grid), BumpProfile.on(0.01, 0.9))


class TestAgmonRatioValidation(unittest.TestCase):
    def setUp(self):
        self.G = g_log_power(1.0, 0.0, d0=0.25)

    def test_rho0_above_half_d0(self):
        self.assertRaises(ValueError, agmon_ratio, vanishing_pair(), self.G, 0.2)

    def test_truncation_above_deepest_rho(self):
        self.assertRaises(InsufficientDataError, agmon_ratio, vanishing_pair(0.01, 0.99), self.G, 0.1, 6)

    def test_vanishing_annulus(self):
        self.assertRaises(DegenerateRatioError, agmon_ratio, vanishing_pair(), self.G, 0.1, 3)

    def test_refinement_options_are_validated(self):
        self.assertRaises(ValueError, agmon_ratio, sine_pair(), self.G, 0.1, 3, 1, 0)
        self.assertRaises(ValueError, agmon_ratio, sine_pair(), self.G, 0.1, 3, 1, 2, 0.0)


class TestAgmonLevels(unittest.TestCase):
    def test_deepest_level_keeps_clear_of_truncation(self):
        pair = vanishing_pair(0.001, 0.999)
        self.assertEqual(deepest_level(pair, 0.1), 4)
        self.assertGreaterEqual(0.1 * 2.0 ** -4, Config.AGMON_CLEARANCE * 0.001)
        self.assertLess(0.1 * 2.0 ** -5, Config.AGMON_CLEARANCE * 0.001)
        self.assertEqual(deepest_level(vanishing_pair(), 0.1), Config.AGMON_MAX_LEVEL)

    def test_default_sequence_stops_at_deepest_level(self):
        report = agmon_ratio(sine_pair(), g_log_power(1.0, 0.0, d0=0.25), 0.1)
        self.assertEqual(len(report.rho_sequence), Config.AGMON_MAX_LEVEL + 1)

    def test_too_few_annuli(self):
        self.assertRaises(InsufficientDataError, agmon_ratio, vanishing_pair(0.01, 0.99),
                          g_log_power(1.0, 0.0, d0=0.25), 0.05)

    def test_sine_ratio_is_stable_under_quadrature_refinement(self):
        G = g_log_power(1.0, 0.0, d0=0.25)
        coarse = agmon_ratio(sine_pair(), G, 0.1, n_max=4)
        fine = agmon_ratio(sine_pair(), G, 0.1, n_max=4, subdivisions=8, epsrel=1e-12)
        np.testing.assert_allclose(fine.ratios, coarse.ratios, rtol=1e-6)


def relative_change(a: float, b: float) -> float:
    return abs(a - b) / abs(b)


@pytest.mark.slow
class TestAgmonRatioStability(unittest.TestCase):
    """The sup ratio of the critical two-sided ground state under refinement."""

    @classmethod
    def setUpClass(cls):
        potential = TwoSided(PowerCritical(0.75), PowerCritical(0.75))
        cls.pair = ground_state(potential, 1e-3, 1e-3)
        cls.deep_pair = ground_state(potential, 1e-4, 1e-4)

    def check_stable(self, G):
        rho0 = 0.5 * G.d0
        coarse = agmon_ratio(self.pair, G, rho0, workers=2)
        n_max = len(coarse.ratios) - 1
        self.assertGreaterEqual(n_max + 1, Config.AGMON_MIN_LEVELS)
        refined = agmon_ratio(self.pair, G, rho0, n_max, workers=2, subdivisions=8, epsrel=1e-11)
        deeper = agmon_ratio(self.deep_pair, G, rho0, n_max, workers=2)
        self.assertLessEqual(relative_change(refined.sup_ratio, coarse.sup_ratio), 0.2)
        self.assertLessEqual(relative_change(deeper.sup_ratio, coarse.sup_ratio), 0.2)
        return coarse

    def test_first_order_weight(self):
        report = self.check_stable(g_hierarchy_build(1, d_omega=0.5))
        self.assertTrue(math.isfinite(report.sup_ratio))

    def test_second_order_weight(self):
        G = g_hierarchy_build(2, d_omega=0.5)
        report = self.check_stable(G)
        self.assertGreaterEqual(report.rho_sequence[-1], Config.AGMON_CLEARANCE * 1e-3)
        self.assertRaises(InsufficientDataError, agmon_ratio, self.pair, G, 0.5 * G.d0, 6)
