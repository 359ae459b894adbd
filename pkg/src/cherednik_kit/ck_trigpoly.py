"""
ck_trigpoly.py: Finite trigonometric polynomials t -> sum_j c_j e^{ijt}.

Eigenfunctions are handled on the imaginary axis z = it, so the coefficient at
frequency j multiplies e^{ijt} = e^{jz}.  Everything the library does to an
eigenfunction (Cherednik operator, reflections, products, derivatives) maps
frequencies to frequencies, which is why this small exact type is enough.

"""

import logging
import numbers

import numpy as np

from cherednik_kit.ck_common import parse_index_map, require

logger = logging.getLogger(__name__)

class TrigPoly(object):
    """
    A finitely supported map from integer frequency to complex coefficient.

    Exact zeros are dropped on construction, so support() is the set of
    frequencies with a nonzero coefficient.  Instances are treated as
    immutable: every operation returns a new TrigPoly.
    """

    def __init__(self, coeffs=None):
        self.coeffs = {}
        if coeffs:
            for j, c in dict(coeffs).items():
                require(isinstance(j, numbers.Integral), 'TrigPoly frequency {} is not an integer'.format(j))
                c = complex(c)
                if c != 0:
                    self.coeffs[int(j)] = c

    @classmethod
    def monomial(cls, j, c=1.0):
        return cls({j: c})

    @classmethod
    def constant(cls, c=1.0):
        return cls({0: c})

    @classmethod
    def parse(cls, text):
        """ Parse "0:1,1:0.5,-2:1+2j" into a TrigPoly """
        return cls(parse_index_map(text, value_type=complex, what='TrigPoly'))

    @classmethod
    def from_list(cls, rows):
        """ Inverse of to_list() """
        return cls({int(j): complex(re, im) for j, re, im in rows})

    def support(self):
        return sorted(self.coeffs.keys())

    def items(self):
        return [(j, self.coeffs[j]) for j in self.support()]

    def coefficient(self, j):
        return self.coeffs.get(j, 0j)

    def window(self):
        """ (lowest, highest) frequency, (0, 0) for the zero polynomial """
        if not self.coeffs:
            return (0, 0)
        return (min(self.coeffs), max(self.coeffs))

    def max_abs(self):
        """ Infinity norm of the coefficient vector """
        if not self.coeffs:
            return 0.0
        return max(abs(c) for c in self.coeffs.values())

    def max_imag(self):
        if not self.coeffs:
            return 0.0
        return max(abs(c.imag) for c in self.coeffs.values())

    def distance(self, other):
        """ Infinity norm of the coefficient difference """
        return (self - other).max_abs()

    def is_zero(self):
        return not self.coeffs

    def _combine(self, other, sign):
        result = dict(self.coeffs)
        for j, c in other.coeffs.items():
            result[j] = result.get(j, 0j) + sign * c
        return TrigPoly(result)

    def __add__(self, other):
        if isinstance(other, numbers.Number):
            other = TrigPoly.constant(other)
        return self._combine(other, 1)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, numbers.Number):
            other = TrigPoly.constant(other)
        return self._combine(other, -1)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return TrigPoly({j: -c for j, c in self.coeffs.items()})

    def __mul__(self, other):
        if isinstance(other, numbers.Number):
            return TrigPoly({j: c * other for j, c in self.coeffs.items()})
        # Product of trig polynomials adds frequencies
        result = {}
        for j, c in self.coeffs.items():
            for l, d in other.coeffs.items():
                result[j + l] = result.get(j + l, 0j) + c * d
        return TrigPoly(result)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, scalar):
        require(isinstance(scalar, numbers.Number) and scalar != 0, 'TrigPoly can only be divided by a nonzero scalar')
        return self * (1.0 / scalar)

    def shift(self, s):
        """ Multiply by e^{ist} """
        return TrigPoly({j + s: c for j, c in self.coeffs.items()})

    def negate_frequencies(self):
        """ t -> -t, i.e. f(-t) """
        return TrigPoly({-j: c for j, c in self.coeffs.items()})

    def derivative(self):
        """ d/dt, exact """
        return TrigPoly({j: 1j * j * c for j, c in self.coeffs.items()})

    def conjugate(self):
        """ The TrigPoly of conj(f(t)) for real t """
        return TrigPoly({-j: c.conjugate() for j, c in self.coeffs.items()})

    def evaluate(self, t):
        """
        Evaluate at real t (scalar or array).  Arrays keep their shape; a
        scalar argument returns a python complex.
        """
        t = np.asarray(t, dtype=float)
        if not self.coeffs:
            values = np.zeros(t.shape, dtype=complex)
        else:
            freqs = np.array(self.support(), dtype=float)
            coefs = np.array([self.coeffs[j] for j in self.support()], dtype=complex)
            values = np.exp(1j * np.multiply.outer(t, freqs)) @ coefs
        if values.ndim == 0:
            return complex(values)
        return values

    def __call__(self, t):
        return self.evaluate(t)

    def to_list(self):
        """ [[j, re, im], ...] in ascending frequency """
        return [[j, c.real, c.imag] for j, c in self.items()]

    def __repr__(self):
        return 'TrigPoly({})'.format(', '.join('{}: {}'.format(j, c) for j, c in self.items()))
