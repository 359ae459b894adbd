"""
ck_quadrature.py: The measure d mu_k = |sin x|^{2k} dx on [-pi, pi], its
trigonometric moments, a global adaptive Gauss-Legendre integrator, and the
exact inner product of trigonometric polynomials through a moment table.

"""

import functools
import heapq
import logging
import math
import threading
import timeit
from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor

import mpmath
import numpy as np
from scipy import special

from cherednik_kit.ck_common import require, InvalidInputError, NumericalFailure

logger = logging.getLogger(__name__)

MOMENT_TABLE_VERSION = 1

QuadResult = namedtuple('QuadResult', ['value', 'abs_error_estimate', 'subdivisions'])

@functools.lru_cache(maxsize=None)
def gauss_legendre(order):
    """
    Nodes and weights of the order-point Gauss-Legendre rule on [-1, 1].
    """
    nodes, weights = special.roots_legendre(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights

def fixed_quad(func, lo, hi, order):
    """
    Fixed Gauss-Legendre rule on [lo, hi]; func takes and returns arrays.
    """
    nodes, weights = gauss_legendre(order)
    half = 0.5 * (hi - lo)
    x = 0.5 * (hi + lo) + half * nodes
    values = np.broadcast_to(func(x), x.shape)
    return half * np.dot(weights, values)

def adaptive_quad(func, a, b, tol=1e-12, order=20, max_depth=50, breakpoints=()):
    """
    Global adaptive quadrature of func over [a, b].

    Each panel is integrated with the order-point and the 2*order-point
    Gauss-Legendre rules; their difference is the panel's error estimate and
    the finer value is kept.  The panel with the largest estimate is bisected
    until the summed estimate is below tol.  Initial panels are split at the
    given breakpoints, which is where non-smooth points of the integrand
    should go.

    func must accept a numpy array and may return real or complex values.
    Raises NumericalFailure (details carry the partial value) if a panel needs
    bisecting beyond max_depth.
    """
    require(tol > 0, 'Quadrature tolerance must be positive, got {}'.format(tol))
    require(b > a, 'Quadrature interval [{}, {}] is empty'.format(a, b))

    cuts = [a] + sorted(p for p in breakpoints if a < p < b) + [b]

    def estimate(lo, hi):
        coarse = fixed_quad(func, lo, hi, order)
        fine = fixed_quad(func, lo, hi, 2 * order)
        return fine, abs(fine - coarse)

    # Max-heap on error estimate; the counter keeps ordering deterministic
    heap = []
    counter = 0
    total_value = 0
    total_error = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        value, error = estimate(lo, hi)
        heapq.heappush(heap, (-error, counter, lo, hi, 0, value))
        counter += 1
        total_value += value
        total_error += error

    subdivisions = 0
    while heap:
        # Rounding floor: nothing below a few ulps of the integral is resolvable
        floor = 64.0 * np.finfo(float).eps * sum(abs(item[5]) for item in heap)
        if total_error <= max(tol, floor):
            break
        neg_error, _, lo, hi, depth, value = heapq.heappop(heap)
        if depth >= max_depth:
            raise NumericalFailure('Adaptive quadrature on [{}, {}] did not converge within depth {} '
                                   '(error estimate {:.3e} > tol {:.3e})'.format(a, b, max_depth, total_error, tol),
                                   details={'partial_value': total_value, 'abs_error_estimate': total_error,
                                            'panel': (lo, hi)})
        mid = 0.5 * (lo + hi)
        left_value, left_error = estimate(lo, mid)
        right_value, right_error = estimate(mid, hi)
        total_value += left_value + right_value - value
        total_error += left_error + right_error + neg_error
        heapq.heappush(heap, (-left_error, counter, lo, mid, depth + 1, left_value))
        heapq.heappush(heap, (-right_error, counter + 1, mid, hi, depth + 1, right_value))
        counter += 2
        subdivisions += 1

    # Re-sum so the reported value does not carry the running-update rounding
    value = sum(item[5] for item in sorted(heap, key=lambda item: (item[2], item[3])))
    error = sum(-item[0] for item in heap)
    value = complex(value) if np.iscomplexobj(value) else float(value)
    return QuadResult(value, float(max(error, 0.0)), subdivisions)

def _weight(x, k):
    """ |sin x|^{2k}; k == 0 gives exactly 1 """
    if k == 0:
        return np.ones_like(x)
    return np.abs(np.sin(x)) ** (2.0 * k)

def weighted_quad(f, k, tol=1e-12, order=20, max_depth=50):
    """
    Estimate the integral of f against d mu_k over [-pi, pi].

    f takes a numpy array of points.  The weight is not smooth at the mirror
    points -pi, 0, pi, so the initial panels are split there.
    """
    require(k >= 0, 'Multiplicity k must be nonnegative, got {}'.format(k))

    def integrand(x):
        return np.broadcast_to(f(x), x.shape) * _weight(x, k)

    return adaptive_quad(integrand, -math.pi, math.pi, tol=tol, order=order,
                         max_depth=max_depth, breakpoints=(0.0,))

# Moments are keyed by (k, |m|) and shared by every table built in this process
_moment_cache = {}
_moment_cache_lock = threading.Lock()

def moment(m, k, tol=1e-12, order=20, max_depth=50):
    """
    M_m = integral of e^{imx} |sin x|^{2k} dx over [-pi, pi], which is real and even in m.
    """
    require(tol > 0, 'Moment tolerance must be positive, got {}'.format(tol))
    require(k >= 0, 'Multiplicity k must be nonnegative, got {}'.format(k))
    m = abs(int(m))
    k = float(k)

    if k == 0:
        # Lebesgue measure
        return 2.0 * math.pi if m == 0 else 0.0
    if m % 2 == 1:
        # The weight has period pi, so odd frequencies integrate to zero
        return 0.0

    key = (k, m)
    with _moment_cache_lock:
        cached = _moment_cache.get(key)
    if cached is not None and cached[1] <= tol:
        return cached[0]

    # Fold onto [0, pi], where sin x >= 0 and the endpoints are the mirror points
    result = adaptive_quad(lambda x: 2.0 * np.cos(m * x) * np.sin(x) ** (2.0 * k),
                           0.0, math.pi, tol=tol, order=order, max_depth=max_depth)
    logger.debug('moment m={} k={}: {} (error estimate {:.2e}, {} subdivisions)'.format(
        m, k, result.value, result.abs_error_estimate, result.subdivisions))
    with _moment_cache_lock:
        _moment_cache[key] = (float(result.value), tol)
    return float(result.value)

def moment_closed_form(m, k):
    """
    Gamma-function form of the moments, for cross-checking only:
    M_{2r} = 2 pi (-1)^r Gamma(2k+1) / (2^{2k} Gamma(k+r+1) Gamma(k-r+1)), odd moments vanish.
    The reciprocal gamma turns poles of Gamma(k-r+1) into exact zeros.
    """
    m = abs(int(m))
    if m % 2 == 1:
        return 0.0
    r = m // 2
    log_part = special.gammaln(2 * k + 1) - 2 * k * math.log(2.0) - special.gammaln(k + r + 1)
    return 2.0 * math.pi * (-1) ** r * math.exp(log_part) * float(special.rgamma(k - r + 1))

def extended_context(dps=40):
    """ A private mpmath context, so concurrent solves never share a precision setting """
    ctx = mpmath.MPContext()
    ctx.dps = dps
    return ctx

def moment_extended(m, k, dps=40, ctx=None):
    """
    The gamma-function moment evaluated by mpmath at dps decimal digits.  Gram
    systems near the condition threshold need entries well beyond double
    precision, which no double-precision quadrature can supply.
    """
    ctx = ctx if ctx is not None else extended_context(dps)
    m = abs(int(m))
    if m % 2 == 1:
        return ctx.mpf(0)
    r = m // 2
    k = ctx.mpf(k)
    return (2 * ctx.pi * (-1) ** r * ctx.gamma(2 * k + 1) * ctx.power(2, -2 * k)
            * ctx.rgamma(k + r + 1) * ctx.rgamma(k - r + 1))

class MomentTable(object):
    """
    Moments M_m for |m| <= max_freq at a fixed k.  Immutable after construction,
    so it can be shared between threads.
    """

    def __init__(self, k, max_freq, values):
        require(max_freq >= 0, 'Moment table max_freq must be nonnegative')
        self.k = float(k)
        self.max_freq = int(max_freq)
        self.values = {}
        for m in range(-self.max_freq, self.max_freq + 1):
            require(abs(m) in values or m in values, 'Moment table is missing M_{}'.format(m))
            self.values[m] = float(values[abs(m)] if abs(m) in values else values[m])
        self._dense = np.array([self.values[m] for m in range(-self.max_freq, self.max_freq + 1)])
        self._dense.setflags(write=False)

    def __getitem__(self, m):
        if abs(m) > self.max_freq:
            raise InvalidInputError('Frequency difference {} is outside the moment table (max_freq {})'.format(
                m, self.max_freq))
        return self.values[m]

    def covers(self, max_difference):
        return max_difference <= self.max_freq

    def lookup(self, differences):
        """ Vectorized M_{d} for an integer array of differences """
        differences = np.asarray(differences, dtype=int)
        if differences.size and np.max(np.abs(differences)) > self.max_freq:
            raise InvalidInputError('Frequency difference {} is outside the moment table (max_freq {})'.format(
                int(np.max(np.abs(differences))), self.max_freq))
        return self._dense[differences + self.max_freq]

    def gram(self, indices):
        """ G[a, b] = M_{i_a - i_b} """
        indices = np.asarray(indices, dtype=int)
        return self.lookup(np.subtract.outer(indices, indices))

    def to_json(self):
        return {'version': MOMENT_TABLE_VERSION, 'k': self.k, 'max_freq': self.max_freq,
                'values': [[m, self.values[m]] for m in range(-self.max_freq, self.max_freq + 1)]}

    @classmethod
    def from_json(cls, document):
        require(document.get('version') == MOMENT_TABLE_VERSION,
                'Unsupported moment table version {}'.format(document.get('version')))
        return cls(document['k'], document['max_freq'], {int(m): float(v) for m, v in document['values']})

def build_moment_table(k, max_freq, tol=1e-12, threads=1, order=20, max_depth=50):
    """
    Compute (or fetch from the cache) every moment with |m| <= max_freq.
    """
    require(k >= 0, 'Multiplicity k must be nonnegative, got {}'.format(k))
    require(max_freq >= 0, 'max_freq must be nonnegative, got {}'.format(max_freq))
    start_time = timeit.default_timer()

    frequencies = list(range(0, int(max_freq) + 1))
    compute = functools.partial(moment, k=k, tol=tol, order=order, max_depth=max_depth)
    if threads > 1 and len(frequencies) > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            values = list(executor.map(compute, frequencies))
    else:
        values = [compute(m) for m in frequencies]

    logger.info('Built moment table for k={} up to |m|={} in {:.3f} seconds'.format(
        k, max_freq, timeit.default_timer() - start_time))
    return MomentTable(k, max_freq, dict(zip(frequencies, values)))

def inner_product(f, g, table):
    """
    (f, g)_k = sum_{j,l} f_j conj(g_l) M_{j-l}, exact for trigonometric polynomials.
    """
    if f.is_zero() or g.is_zero():
        return 0j
    f_freqs = np.array(f.support(), dtype=int)
    g_freqs = np.array(g.support(), dtype=int)
    f_coefs = np.array([f.coeffs[j] for j in f.support()], dtype=complex)
    g_coefs = np.array([g.coeffs[j] for j in g.support()], dtype=complex)
    moments = table.lookup(np.subtract.outer(f_freqs, g_freqs))
    return complex(f_coefs @ moments @ np.conj(g_coefs))
