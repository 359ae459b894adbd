import logging
import math
from unittest import TestCase

import mpmath
import numpy as np

from cherednik_kit.ck_common import InvalidInputError, NumericalFailure
from cherednik_kit.ck_eigenbasis import build_basis
from cherednik_kit.ck_kernel import local_decompose
from cherednik_kit.ck_trigpoly import TrigPoly
from cherednik_kit.ck_weighted import (WeightSpec, weight_eval, cutoff, shell_rule, mirror_rule, classify_shells,
                                       criterion_integral, dual_norm, lambda_apply, apply_T_decomposed,
                                       envelope_check_example_a, threshold_scan, POWER, POWER_LOG, EXAMPLE_A,
                                       FINITE, DIVERGENT, INCONCLUSIVE, LEBESGUE, WEIGHTED)

log = logging.getLogger(__name__)

# Oscillatory shells are capped lower here than in the default config to keep the suite quick
FAST = {'panel_cap': 2048}


class WeightedTest(TestCase):
    """
    Mirror-degenerate weights, the shell criterion, dual norms and the
    pointwise rank-one identity for T.
    """

    @classmethod
    def setUpClass(cls):
        super(WeightedTest, cls).setUpClass()
        logging.basicConfig(level=logging.INFO)

    def test_parse_literals(self):
        spec = WeightSpec.parse('power:alpha=1.0')
        self.assertEqual((spec.family, spec.alpha), (POWER, 1.0))
        spec = WeightSpec.parse('powerlog:alpha=0.5,beta=-1')
        self.assertEqual((spec.family, spec.alpha, spec.beta), (POWER_LOG, 0.5, -1.0))
        spec = WeightSpec.parse('examplea:alpha=0.5,beta=1,gamma=0.5')
        self.assertEqual(spec.family, EXAMPLE_A)
        self.assertEqual(WeightSpec.parse(spec.literal()).to_json(), spec.to_json())
        for text in ('cosine:alpha=1', 'power:beta=1', 'power:alpha=x', 'examplea:alpha=1,beta=0',
                     'examplea:alpha=1,beta=0,gamma=0'):
            with self.assertRaises(InvalidInputError):
                WeightSpec.parse(text)

    def test_weight_eval_examples(self):
        self.assertAlmostEqual(weight_eval(WeightSpec(POWER, 1.0), 0.5), 0.5, places=15)
        self.assertAlmostEqual(weight_eval(WeightSpec(POWER_LOG, 0.0, 1.0), 0.5), 1 / (1 + math.log(2)), places=15)
        self.assertAlmostEqual(weight_eval(WeightSpec(POWER_LOG, 0.0, 1.0), 1.0), 1.0, places=15)
        values = weight_eval(WeightSpec(EXAMPLE_A, 0.0, 0.0, 1.0), np.logspace(-6, -0.5, 500))
        self.assertTrue(np.all(values >= 1.0) and np.all(values <= 2.0))
        with self.assertRaises(InvalidInputError):
            weight_eval(WeightSpec(POWER, 1.0), 0.0)
        with self.assertRaises(InvalidInputError):
            weight_eval(WeightSpec(POWER, 1.0), 0.6, delta=0.5)

    def test_cutoff(self):
        delta = 0.4
        self.assertEqual(cutoff(0.0, delta), 1.0)
        self.assertEqual(cutoff(0.2, delta), 1.0)
        self.assertEqual(cutoff(-0.4, delta), 0.0)
        self.assertEqual(cutoff(1.0, delta), 0.0)
        x = np.linspace(0.2, 0.4, 50)
        self.assertTrue(np.all(np.diff(cutoff(x, delta)) <= 0))
        self.assertAlmostEqual(cutoff(0.3, delta), 0.5, places=15)

    def test_shell_rule_integrates_polynomials(self):
        y, w = shell_rule(WeightSpec(POWER, 0.0), 0.4, 3)
        self.assertAlmostEqual(np.sum(w), 0.4 * 2 ** -4, places=16)
        self.assertAlmostEqual(np.dot(w, y ** 3), ((0.4 / 8) ** 4 - (0.4 / 16) ** 4) / 4, places=16)

    def test_oscillatory_panels_follow_kinks(self):
        spec = WeightSpec(EXAMPLE_A, 0.5, 0.0, 1.0)
        y, w = shell_rule(spec, 0.4, 2, order=16)
        # u = 1/y runs over [10, 20]: kinks at 4 pi, 5 pi, 6 pi
        self.assertEqual(y.size, 4 * 16)
        y, w = shell_rule(spec, 0.4, 20, order=16, panel_cap=100)
        self.assertEqual(y.size, 100 * 16)
        self.assertAlmostEqual(np.sum(w), 0.4 * 2 ** -21, delta=1e-20)

    def test_mirror_rule(self):
        y, w = mirror_rule(WeightSpec(POWER, 0.0), 0.3, shell_max=20)
        np.testing.assert_allclose(y, -y[::-1])
        self.assertAlmostEqual(np.sum(w), 0.6, places=14)

    def test_criterion_power_threshold(self):
        for p in (1.5, 2.0, 3.0):
            finite = criterion_integral(WeightSpec(POWER, p - 1 - 0.2), p, math.pi / 8)
            divergent = criterion_integral(WeightSpec(POWER, p - 1 + 0.2), p, math.pi / 8)
            self.assertEqual(finite.classification, FINITE)
            self.assertEqual(divergent.classification, DIVERGENT)
            self.assertIsNone(divergent.integral_estimate)
            exponent = 1 - (p - 1 - 0.2) / (p - 1)
            self._assertClose(finite.integral_estimate, 2 * (math.pi / 8) ** exponent / exponent, 1e-8)

    def test_criterion_critical_power(self):
        report = criterion_integral(WeightSpec(POWER, 1.0), 2.0, math.pi / 8)
        self.assertEqual(report.classification, DIVERGENT)
        self.assertTrue(report.divergent)
        self.assertEqual(len(report.shell_values), 49)

    def test_criterion_blowing_up_weight(self):
        report = criterion_integral(WeightSpec(POWER, -2.0), 2.0, 0.5)
        self.assertEqual(report.classification, FINITE)
        self._assertClose(report.integral_estimate, 2 * 0.5 ** 3 / 3, 1e-10)

    def test_criterion_log_weights(self):
        # at alpha = p - 1 the integrand is |y|^{-1} (log e/|y|)^{beta/(p-1)}
        finite = criterion_integral(WeightSpec(POWER_LOG, 1.0, -3.0), 2.0, math.pi / 8)
        divergent = criterion_integral(WeightSpec(POWER_LOG, 1.0, 1.0), 2.0, math.pi / 8)
        self.assertEqual(finite.classification, FINITE)
        self.assertEqual(divergent.classification, DIVERGENT)

    def test_criterion_example_a(self):
        p = 2.0
        for beta in (-2.0, 0.0, 2.0):
            for gamma in (0.5, 1.0):
                report = criterion_integral(WeightSpec(EXAMPLE_A, p - 1 - 0.5, beta, gamma), p, math.pi / 8, **FAST)
                self.assertEqual(report.classification, FINITE, 'beta={} gamma={}'.format(beta, gamma))
        report = criterion_integral(WeightSpec(EXAMPLE_A, p, 0.0, 1.0), p, math.pi / 8, **FAST)
        self.assertEqual(report.classification, DIVERGENT)

    def test_classify_shells(self):
        delta = 0.4
        j = np.arange(49)
        self.assertEqual(classify_shells(0.5 ** j, delta)[2], FINITE)
        self.assertEqual(classify_shells(1.01 ** j, delta)[2], DIVERGENT)
        ratio, exponent, verdict = classify_shells(np.ones(49), delta)
        self.assertAlmostEqual(ratio, 1.0, places=12)
        self.assertEqual(verdict, DIVERGENT)
        self.assertAlmostEqual(exponent, 0.0, places=10)
        # a wide ratio band hands log-scale decay to the second stage
        log_scale = np.log(math.e / (0.75 * 2.0 ** -j * delta))
        ratio, exponent, verdict = classify_shells(log_scale ** -3.0, delta, margin=0.2)
        self.assertEqual(verdict, FINITE)
        self.assertAlmostEqual(exponent, 3.0, places=8)
        self.assertEqual(classify_shells(1 / log_scale, delta, margin=0.2)[2], INCONCLUSIVE)

    def test_dual_norm_lebesgue(self):
        report = dual_norm(WeightSpec(POWER, 0.0), 2.0, 0.5, LEBESGUE)
        self._assertClose(report.closed_form_value, 1.0, 1e-12)
        bounds = np.asarray(report.extremizer_lower_bounds)
        self.assertTrue(np.all(bounds <= report.closed_form_value * (1 + 1e-6)))
        self.assertTrue(np.all(np.diff(bounds) >= -1e-12 * bounds[1:]))
        self.assertEqual(len(report.cutoffs), len(bounds))

    def test_dual_norm_divergent(self):
        report = dual_norm(WeightSpec(POWER, 1.0), 2.0, math.pi / 8, LEBESGUE)
        self.assertTrue(report.divergent)
        self.assertIsNone(report.closed_form_value)
        bounds = report.extremizer_lower_bounds
        self.assertGreater(bounds[-1], 5 * bounds[0])
        self.assertAlmostEqual(bounds[-1], math.sqrt(2 * math.log(2) * len(bounds)), places=8)

    def test_dual_norm_weighted_pairing(self):
        report = dual_norm(WeightSpec(POWER, 1.0), 2.0, 0.5, WEIGHTED)
        self._assertClose(report.closed_form_value, 0.5, 1e-12)
        report = dual_norm(WeightSpec(EXAMPLE_A, 3.0, 1.0, 1.0), 2.0, 0.5, WEIGHTED, **FAST)
        self.assertFalse(report.divergent)
        with self.assertRaises(InvalidInputError):
            dual_norm(WeightSpec(POWER, 1.0), 2.0, 0.5, 'other')

    def test_lambda_apply(self):
        one = lambda y: np.ones_like(y)
        self._assertClose(lambda_apply(one, WeightSpec(POWER, 0.0), 0.5), 1.0, 1e-12)
        delta = 0.3
        self._assertClose(lambda_apply(one, WeightSpec(POWER, 2.0), delta), 2 * delta ** 3 / 3, 1e-12)
        self.assertLessEqual(abs(lambda_apply(np.sin, WeightSpec(POWER, 0.5), delta)), 1e-14)
        value = lambda_apply(lambda y: np.exp(2j * y), WeightSpec(POWER, 0.0), delta)
        self._assertClose(value, math.sin(2 * delta), 1e-12)

    def test_pointwise_identity_constant(self):
        basis = build_basis(0, 0.0)
        delta = math.pi / 8
        localdec = local_decompose(0, 0.0, delta, basis)
        application = apply_T_decomposed(lambda y: np.ones_like(y), 0, 0.0, WeightSpec(POWER, 0.0), delta, basis,
                                         localdec)
        self.assertLessEqual(application.identity_residual, 1e-7)
        self._assertClose(application.lambda_value, 2 * delta, 1e-12)

    def test_pointwise_identity_random_polys(self):
        N, k, delta = 2, 1.0, math.pi / 8
        basis = build_basis(N, k)
        localdec = local_decompose(N, k, delta, basis)
        spec = WeightSpec(POWER, 0.5)
        rng = np.random.default_rng(7)
        for trial in range(20):
            f = TrigPoly({j: complex(*rng.normal(size=2)) for j in range(-3, 4)})
            application = apply_T_decomposed(f.evaluate, N, k, spec, localdec.delta, basis, localdec)
            bound = 1e-7 * (1 + abs(application.lambda_value))
            self.assertLessEqual(application.identity_residual, bound, 'trial {}'.format(trial))
            self.assertLessEqual(application.x_independence_residual, bound)
            self.assertLessEqual(application.split_residual, 1e-10 * (1 + np.max(np.abs(application.T_full))))
            self.assertGreater(application.remainder_denominator_inf, 0)
            document = application.to_json()
            self.assertEqual(len(document['rhs']), 9)

    def test_pointwise_identity_requires_matching_decomposition(self):
        basis = build_basis(2, 1.0)
        localdec = local_decompose(2, 1.0, 0.3, basis)
        with self.assertRaises(InvalidInputError):
            apply_T_decomposed(np.cos, 1, 1.0, WeightSpec(POWER, 0.0), 0.3, basis, localdec)
        with self.assertRaises(InvalidInputError):
            apply_T_decomposed(np.cos, 2, 1.0, WeightSpec(POWER, 0.0), 0.7, basis, localdec)

    def test_envelope(self):
        self.assertLessEqual(envelope_check_example_a(0.5, 1.0, 1.0, 2.0), 0.0)
        self.assertLessEqual(envelope_check_example_a(0.5, -2.0, 0.5, 3.0), 0.0)
        # at the zeros of the sine the lower constant is not attained
        zeros = 1.0 / (math.pi * np.arange(2, 200))
        self.assertLess(envelope_check_example_a(0.5, 0.0, 1.0, 2.0, sample_grid=zeros), 0.0)

    def test_threshold_scan(self):
        for p in (1.5, 2.0, 3.0):
            result = threshold_scan(p, math.pi / 8, (p - 1 - 0.5, p - 1 + 0.5), steps=12)
            self.assertLessEqual(abs(result.alpha_star - (p - 1)), 0.05, 'p={}'.format(p))
            self.assertEqual(len(result.rows), 14)
            self.assertEqual(result.rows[0][1], FINITE)
            self.assertEqual(result.rows[1][1], DIVERGENT)

    def test_threshold_scan_rejects_one_sided_range(self):
        with self.assertRaises(InvalidInputError):
            threshold_scan(2.0, math.pi / 8, (0.1, 0.2))
        with self.assertRaises(InvalidInputError):
            threshold_scan(2.0, math.pi / 8, (1.5, 1.2))

    def test_lambda_apply_rejects_delta(self):
        one = lambda y: np.ones_like(y)
        for delta in (0.0, -0.1, math.pi / 4, 1.0):
            with self.assertRaises(InvalidInputError):
                lambda_apply(one, WeightSpec(POWER, 0.0), delta)

    def test_lambda_apply_oscillatory_panel_cap(self):
        # With 64 panels the kinks of |sin(1/y)| cannot be resolved past the first shells
        spec = WeightSpec(EXAMPLE_A, 0.0, 0.0, 1.0)
        one = lambda y: np.ones_like(y)
        with self.assertRaises(NumericalFailure) as cm:
            lambda_apply(one, spec, 0.5, panel_cap=64)
        self.assertGreaterEqual(cm.exception.details['shell'], 1)
        self.assertEqual(cm.exception.details['order'], 64)

    def test_lambda_apply_order_refinement_at_cap(self):
        # A one-panel cap leaves only Gauss order doubling
        spec = WeightSpec(POWER, 0.5)
        capped = lambda_apply(np.cos, spec, 0.5, panel_cap=1)
        self._assertClose(capped, lambda_apply(np.cos, spec, 0.5), 1e-12)
        with mpmath.workdps(30):
            exact = 2 * mpmath.quad(lambda y: mpmath.sqrt(y) * mpmath.cos(y), [0, 0.5])
        self._assertClose(capped, float(exact), 1e-10)

    def test_lambda_apply_error_tracks_tol(self):
        spec = WeightSpec(POWER_LOG, 0.5, 1.0)
        with mpmath.workdps(30):
            exact = 2 * mpmath.quad(lambda y: mpmath.exp(y) * mpmath.sqrt(y) / (1 - mpmath.log(y)), [0, 0.25, 0.5])
        exact = float(exact)
        f = lambda y: np.exp(np.abs(y))
        for tol in (1e-4, 1e-6, 1e-8, 1e-10):
            self.assertLessEqual(abs(lambda_apply(f, spec, 0.5, tol=tol) - exact), tol, 'tol {}'.format(tol))

    def test_pointwise_identity_across_tolerances(self):
        N, k, delta = 2, 1.0, math.pi / 8
        basis = build_basis(N, k)
        localdec = local_decompose(N, k, delta, basis)
        f = TrigPoly({-1: 0.5j, 0: 1.0, 2: -0.25})
        for tol in (1e-6, 1e-8, 1e-10):
            application = apply_T_decomposed(f.evaluate, N, k, WeightSpec(POWER, 0.5), localdec.delta, basis,
                                             localdec, tol=tol)
            bound = tol + 1e-7 * (1 + abs(application.lambda_value))
            self.assertLessEqual(application.identity_residual, bound, 'tol {}'.format(tol))

    def test_extremizers_reach_closed_form(self):
        cases = [(WeightSpec(POWER, 0.0), LEBESGUE), (WeightSpec(POWER, 0.5), LEBESGUE),
                 (WeightSpec(POWER_LOG, 0.5, 1.0), LEBESGUE), (WeightSpec(POWER, 1.0), WEIGHTED),
                 (WeightSpec(EXAMPLE_A, 3.0, 1.0, 1.0), WEIGHTED)]
        for spec, pairing in cases:
            report = dual_norm(spec, 2.0, 0.5, pairing, **FAST)
            self.assertFalse(report.divergent, spec.literal())
            last = report.extremizer_lower_bounds[-1]
            self.assertLessEqual(abs(last / report.closed_form_value - 1.0), 1e-3, spec.literal())
            self.assertLessEqual(last, report.closed_form_value * (1 + 1e-9), spec.literal())

    def test_criterion_and_dual_norm_agree(self):
        p = 2.0
        specs = [WeightSpec(POWER, 0.5), WeightSpec(POWER, 1.0), WeightSpec(POWER_LOG, 1.0, -3.0),
                 WeightSpec(POWER_LOG, 1.0, 1.0), WeightSpec(EXAMPLE_A, 0.5, 0.0, 1.0),
                 WeightSpec(EXAMPLE_A, 2.0, 0.0, 1.0)]
        for spec in specs:
            criterion = criterion_integral(spec, p, math.pi / 8, **FAST)
            report = dual_norm(spec, p, math.pi / 8, LEBESGUE, **FAST)
            self.assertEqual(report.criterion.classification, criterion.classification, spec.literal())
            self.assertEqual(report.divergent, criterion.classification != FINITE, spec.literal())
            if not report.divergent:
                # p' = 2 at p = 2
                self._assertClose(report.closed_form_value ** 2, criterion.integral_estimate, 1e-12)

    def _assertClose(self, value, expected, tol):
        self.assertLessEqual(abs(value - expected), tol * max(1.0, abs(expected)),
                             '{} differs from {}'.format(value, expected))
