import logging
import math
from unittest import TestCase

import mpmath
import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from cherednik_kit.ck_common import InvalidInputError, NumericalFailure
from cherednik_kit.ck_quadrature import (adaptive_quad, weighted_quad, moment, moment_closed_form,
                                         build_moment_table, inner_product, moment_extended, MomentTable)
from cherednik_kit.ck_trigpoly import TrigPoly

log = logging.getLogger(__name__)

coefficients = st.builds(complex, st.floats(min_value=-3, max_value=3), st.floats(min_value=-3, max_value=3))
trig_polys = st.dictionaries(st.integers(min_value=-4, max_value=4), coefficients, max_size=6).map(TrigPoly)


class QuadratureTest(TestCase):
    """
    Moments of |sin x|^{2k} dx and the adaptive rule behind them.
    """

    @classmethod
    def setUpClass(cls):
        super(QuadratureTest, cls).setUpClass()
        logging.basicConfig(level=logging.INFO)
        cls.tables = {k: build_moment_table(k, 8) for k in (0.0, 0.5, 1.0, 2.5)}

    def test_moment_examples(self):
        self.assertEqual(moment(0, 0), 2 * math.pi)
        self.assertEqual(moment(1, 1), 0.0)
        self.assertAlmostEqual(moment(2, 1), -math.pi / 2, delta=1e-12)
        self.assertAlmostEqual(moment(0, 0.5), 4.0, delta=1e-12)

    def test_moments_even_in_m(self):
        self.assertEqual(moment(-4, 1.5), moment(4, 1.5))

    def test_closed_form_agrees(self):
        for k in (0.25, 0.5, 1.0, 2.5):
            for m in range(0, 13):
                self._assertClose(moment(m, k), moment_closed_form(m, k), 1e-10)

    def test_mpmath_oracle(self):
        # independent 30-digit quadrature of the folded integral
        with mpmath.workdps(30):
            exact = 2 * mpmath.quad(lambda x: mpmath.cos(6 * x) * mpmath.sin(x) ** mpmath.mpf('1.5'),
                                    [0, mpmath.pi / 2, mpmath.pi])
        self._assertClose(moment(6, 0.75), float(exact), 1e-11)

    def test_weighted_quad_examples(self):
        self._assertClose(weighted_quad(lambda x: np.ones_like(x), 0).value, 2 * math.pi, 1e-12)
        self._assertClose(weighted_quad(lambda x: np.ones_like(x), 1).value, math.pi, 1e-12)
        tol = 1e-12
        result = weighted_quad(lambda x: np.exp(3j * x), 0.25, tol=tol)
        self.assertLessEqual(abs(result.value - moment(3, 0.25)), 2 * tol)
        self.assertLessEqual(result.abs_error_estimate, tol)

    def test_depth_cap_reports_partial_value(self):
        with self.assertRaises(NumericalFailure) as cm:
            adaptive_quad(lambda x: np.sign(x - 0.3), -1.0, 2.0, tol=1e-15, order=4, max_depth=2)
        self.assertIn('partial_value', cm.exception.details)
        self.assertAlmostEqual(cm.exception.details['partial_value'], 0.4, delta=0.5)

    def test_breakpoints_resolve_kinks(self):
        result = adaptive_quad(lambda x: np.abs(x - 0.3), -1.0, 2.0, tol=1e-13, breakpoints=(0.3,))
        self._assertClose(result.value, (1.3 ** 2 + 1.7 ** 2) / 2, 1e-13)
        self.assertEqual(result.subdivisions, 0)

    def test_inner_product_examples(self):
        table0 = build_moment_table(0, 4)
        table1 = build_moment_table(1, 4)
        e1 = TrigPoly.monomial(1)
        self.assertAlmostEqual(inner_product(e1, e1, table0), 2 * math.pi)
        self.assertEqual(inner_product(e1, TrigPoly.monomial(2), table0), 0)
        self.assertAlmostEqual(inner_product(e1, TrigPoly.monomial(-1), table1).real, -math.pi / 2, delta=1e-12)

    def test_table_range_is_enforced(self):
        table = build_moment_table(1, 4)
        self.assertTrue(table.covers(4))
        self.assertFalse(table.covers(5))
        with self.assertRaises(InvalidInputError):
            table[5]
        with self.assertRaises(InvalidInputError):
            inner_product(TrigPoly.monomial(3), TrigPoly.monomial(-3), table)

    def test_table_json(self):
        table = build_moment_table(0.5, 6, threads=2)
        copy = MomentTable.from_json(table.to_json())
        self.assertEqual(copy.values, table.values)
        document = table.to_json()
        document['version'] = 99
        with self.assertRaises(InvalidInputError):
            MomentTable.from_json(document)

    def test_gram_is_positive_semidefinite(self):
        for k in (0.0, 0.5, 1.0, 2.5):
            for N in (2, 8):
                table = build_moment_table(k, 2 * N + 2)
                gram = table.gram(list(range(-N - 1, N + 2)))
                np.testing.assert_array_equal(gram, gram.T)
                lowest = np.linalg.eigvalsh(gram).min()
                self.assertGreaterEqual(lowest, -1e-10 * np.trace(gram), 'k={} N={}'.format(k, N))

    @given(trig_polys, trig_polys, st.sampled_from([0.0, 0.5, 1.0, 2.5]))
    @settings(deadline=None)
    def test_inner_product_hermitian(self, f, g, k):
        table = self.tables[k]
        scale = max(1.0, sum(abs(c) for c in f.coeffs.values())) * max(1.0, sum(abs(c) for c in g.coeffs.values()))
        scale *= 2 * math.pi
        ff = inner_product(f, f, table)
        self.assertGreaterEqual(ff.real, -1e-12 * scale)
        self.assertLessEqual(abs(ff.imag), 1e-12 * scale)
        self.assertLessEqual(abs(inner_product(f, g, table) - inner_product(g, f, table).conjugate()), 1e-12 * scale)

    def test_weighted_quad_matches_moment_table(self):
        rng = np.random.default_rng(11)
        for k in (0.0, 0.5, 1.0, 2.5):
            table = self.tables[k]
            for trial in range(5):
                f = TrigPoly({j: complex(*rng.normal(size=2)) for j in range(-4, 5)})
                expected = inner_product(f, TrigPoly.monomial(0), table)
                value = weighted_quad(f.evaluate, k, tol=1e-13).value
                scale = max(1.0, abs(expected))
                self.assertLessEqual(abs(value - expected), 1e-10 * scale, 'k={} trial {}'.format(k, trial))

    def test_moment_symmetry_over_table_range(self):
        N = 12
        for k in (0.25, 0.5, 1.5, 2.5):
            table = build_moment_table(k, 2 * N + 2)
            for m in range(0, 2 * N + 3):
                self.assertEqual(table[m], table[-m])
                self.assertEqual(moment(-m, k), moment(m, k))
                self._assertClose(table[m], moment_closed_form(m, k), 1e-10)

    def test_extended_moments_agree_with_closed_form(self):
        for k in (0.0, 0.5, 1.0, 2.5):
            for m in range(0, 30):
                extended = moment_extended(m, k)
                self.assertEqual(float(moment_extended(-m, k)), float(extended))
                self._assertClose(float(extended), moment_closed_form(m, k), 1e-13)

    def _assertClose(self, value, expected, tol):
        self.assertLessEqual(abs(value - expected), tol * max(1.0, abs(expected)),
                             '{} differs from {}'.format(value, expected))
