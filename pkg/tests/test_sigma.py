import math
import unittest

import numpy as np
import pytest

from errors import InsufficientDataError
from potentials import g_hierarchy_build, g_log_linear, g_log_power
from sigma import (SeriesOutcome, brusentsev_sup, check_sigma1, divergence_verdict,
                   dyadic_start_index, sigma_report, sigma_series_terms)


class TestSigma1(unittest.TestCase):
    def test_log_weight_passes(self):
        report = check_sigma1(g_log_power(1.0, 0.0, d0=0.25))
        self.assertTrue(report.passed)
        self.assertEqual(report.checked, 2 * 1000)

    def test_steep_weight_fails(self):
        report = check_sigma1(g_log_power(2.0, 0.0, d0=0.25))
        self.assertFalse(report.passed)
        self.assertEqual(report.violations[0].clause, "G' > 1/t")

    def test_sample_count(self):
        self.assertRaises(ValueError, check_sigma1, g_log_power(), 8)


class TestSeriesTerms(unittest.TestCase):
    def test_log_weight_terms_are_constant(self):
        G = g_log_power(1.0, 0.0, d0=0.25)
        terms = sigma_series_terms(G, rho0=0.125, N=64)
        np.testing.assert_allclose(terms.log_terms, 2.0 * math.log(8.0), rtol=1e-12)
        self.assertAlmostEqual(terms.rho0, 0.125, places=15)

    def test_rho0_beyond_half_d0(self):
        self.assertRaises(ValueError, sigma_series_terms, g_log_power(d0=0.25), 0.2, 64)
        self.assertRaises(ValueError, sigma_series_terms, g_log_power(d0=0.25), -1.0, 64)

    def test_too_few_terms(self):
        self.assertRaises(ValueError, sigma_series_terms, g_log_power(d0=0.25), 0.1, 4)

    def test_log_form_rho0(self):
        terms = sigma_series_terms(g_log_power(d0=0.25), N=16, log_inv_rho0=2000.0)
        self.assertEqual(terms.rho0, 0.0)
        np.testing.assert_allclose(terms.log_terms, 4000.0, rtol=1e-12)

    def test_partial_sums(self):
        terms = sigma_series_terms(g_log_power(d0=0.25), rho0=0.125, N=64)
        partial = terms.log_partial_sums()
        self.assertEqual([row[0] for row in partial], [8, 16, 32, 64])
        self.assertAlmostEqual(partial[-1][1], math.log(64.0) + 2.0 * math.log(8.0), places=10)

    def test_start_index(self):
        self.assertAlmostEqual(dyadic_start_index(0.25), math.log(4.0) / (1.0 - math.log(2.0)), places=14)
        self.assertAlmostEqual(dyadic_start_index(log_inv_rho0=math.log(4.0)), dyadic_start_index(0.25), places=12)
        self.assertRaises(ValueError, dyadic_start_index, 0.0)


class TestDivergenceVerdict(unittest.TestCase):
    def verdict(self, G, factor=0.5):
        return divergence_verdict(sigma_series_terms(G, rho0=factor * G.d0))

    def test_log_weight_diverges(self):
        result = self.verdict(g_log_power(1.0, 0.0, d0=0.25))
        self.assertEqual(result.verdict, SeriesOutcome.DIVERGENT)
        self.assertAlmostEqual(result.beta[1], 0.0, delta=1e-6)
        self.assertLess(result.residual, 1e-8)

    def test_linear_correction_diverges(self):
        self.assertEqual(self.verdict(g_log_linear(1.0, 0.5)).verdict, SeriesOutcome.DIVERGENT)

    def test_log_corrections_converge(self):
        for b in (1.0, 2.0):
            result = self.verdict(g_log_power(1.0, b, d0=0.25))
            self.assertEqual(result.verdict, SeriesOutcome.CONVERGENT)
            self.assertAlmostEqual(result.beta[1], 2.0 * b, delta=1e-6)

    def test_note_marks_heuristic(self):
        result = self.verdict(g_log_power(1.0, 0.0, d0=0.25))
        self.assertIn("heuristic", result.to_dict()["note"])
        self.assertEqual(result.effective_depth, 2)

    def test_fit_starts_at_dyadic_index(self):
        terms = sigma_series_terms(g_log_power(1.0, 0.0, d0=0.25), log_inv_rho0=20.0)
        result = divergence_verdict(terms)
        self.assertEqual(result.fit_start, math.ceil(dyadic_start_index(log_inv_rho0=20.0)))
        self.assertEqual(result.fit_start, 66)
        self.assertEqual(result.verdict, SeriesOutcome.DIVERGENT)

    def test_late_start_index_falls_back_to_ladder_window(self):
        terms = sigma_series_terms(g_log_power(1.0, 0.0, d0=0.25), N=64, log_inv_rho0=30.0)
        result = divergence_verdict(terms)
        self.assertEqual(result.fit_start, 1)
        self.assertEqual(result.verdict, SeriesOutcome.DIVERGENT)

    def test_too_few_terms(self):
        terms = sigma_series_terms(g_log_power(d0=0.25), rho0=0.125, N=16)
        self.assertRaises(InsufficientDataError, divergence_verdict, terms)


class TestBrusentsev(unittest.TestCase):
    def test_log_weight_is_bounded(self):
        report = brusentsev_sup(g_log_power(1.0, 0.0, d0=0.25))
        self.assertTrue(report.satisfied)
        self.assertAlmostEqual(report.sup_estimate, 1.0, delta=1e-12)
        self.assertAlmostEqual(report.growth_exponent, 0.0, delta=1e-9)

    def test_linear_correction_is_bounded(self):
        self.assertTrue(brusentsev_sup(g_log_linear(1.0, 0.5)).satisfied)

    def test_sample_point_validation(self):
        G = g_log_power(1.0, 0.0, d0=0.25)
        self.assertRaises(ValueError, brusentsev_sup, G, np.array([1.0, 2.0, 3.0]))


@pytest.mark.slow
class TestHierarchyWeights(unittest.TestCase):
    def test_second_order_weight(self):
        report = sigma_report(g_hierarchy_build(2, d_omega=0.5), workers=2)
        self.assertEqual(report.verdict, SeriesOutcome.DIVERGENT)
        self.assertTrue(report.sigma1.passed)
        self.assertFalse(report.brusentsev.satisfied)
        self.assertAlmostEqual(report.brusentsev.growth_exponent, 0.5, delta=0.05)
        self.assertEqual(report.brusentsev.to_dict()["sup_estimate"], "growing")

    def test_third_order_weight(self):
        report = sigma_report(g_hierarchy_build(3, d_omega=0.5), workers=2)
        self.assertEqual(report.verdict, SeriesOutcome.DIVERGENT)
        self.assertAlmostEqual(report.series[0].beta[1], 1.0, delta=0.05)


class TestSigmaReport(unittest.TestCase):
    def test_report_combines_rho0_values(self):
        report = sigma_report(g_log_power(1.0, 1.0, d0=0.25))
        self.assertEqual(report.verdict, SeriesOutcome.CONVERGENT)
        self.assertEqual(len(report.series), 2)
        self.assertGreater(report.series[0].rho0, report.series[1].rho0)
        self.assertEqual(report.to_dict()["g"], report.name)

    def test_needs_two_rho0_values(self):
        self.assertRaises(ValueError, sigma_report, g_log_power(), [0.5])
        self.assertRaises(ValueError, sigma_report, g_log_power(), [0.5, 0.75])
