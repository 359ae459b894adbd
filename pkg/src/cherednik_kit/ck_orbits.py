"""
ck_orbits.py: Reflection-orbit combinatorics.

The involution n -> 1-n pairs spectral indices into orbits {n, 1-n}.  This
module holds the orbit bookkeeping, the real-exponential superpositions used
to study dominant growth, the projection onto dominant exponentials, the
truncation cases of an orbit against a window |n| <= N, and the checks of the
reflection and negative-index identities on a constructed basis.

"""

import logging
import numbers
from collections import namedtuple

import numpy as np

from cherednik_kit.ck_common import require, InvalidInputError, parse_index_map
from cherednik_kit.ck_eigenbasis import cherednik_apply
from cherednik_kit.ck_trigpoly import TrigPoly

logger = logging.getLogger(__name__)

INTERIOR = 'interior'
LOW_ONLY = 'low_only'
# Part of the case vocabulary but never produced: |m| > |ell| for every orbit, so
# the high member inside the window forces the low one inside as well
HIGH_ONLY = 'high_only'
OUTSIDE = 'outside'

TruncationCase = namedtuple('TruncationCase', ['tag', 'inside'])

class Orbit(namedtuple('Orbit', ['n', 'partner', 'm', 'ell'])):
    """
    The orbit {n, 1-n}.  m is the dominant (larger) index and is the canonical key.
    """

    @property
    def key(self):
        return self.m

    def members(self):
        return (self.ell, self.m)

def orbit_of(n):
    partner = 1 - n
    return Orbit(n, partner, max(n, partner), min(n, partner))

class ExpSum(object):
    """
    A finite superposition sum_n a_n e^{nx} with real coefficients.
    Zero coefficients are dropped.
    """

    def __init__(self, terms=None):
        self.terms = {}
        if terms:
            for n, a in dict(terms).items():
                require(isinstance(n, numbers.Integral), 'ExpSum index {} is not an integer'.format(n))
                a = float(a)
                if a != 0:
                    self.terms[int(n)] = a

    @classmethod
    def parse(cls, text):
        """ Parse the literal syntax "2:5,-1:7" """
        return cls(parse_index_map(text, value_type=float, what='ExpSum'))

    def to_literal(self):
        return ','.join('{}:{}'.format(n, repr(a)) for n, a in self.items())

    def support(self):
        return sorted(self.terms.keys())

    def items(self):
        return [(n, self.terms[n]) for n in self.support()]

    def coefficient(self, n):
        return self.terms.get(n, 0.0)

    def __eq__(self, other):
        return isinstance(other, ExpSum) and self.terms == other.terms

    def __ne__(self, other):
        return not self.__eq__(other)

    def __add__(self, other):
        result = dict(self.terms)
        for n, a in other.terms.items():
            result[n] = result.get(n, 0.0) + a
        return ExpSum(result)

    def evaluate(self, x):
        """ Direct evaluation of sum_n a_n e^{nx} """
        x = np.asarray(x, dtype=float)
        total = np.zeros(x.shape)
        for n, a in self.items():
            total = total + a * np.exp(n * x)
        return total

    def __repr__(self):
        return 'ExpSum({})'.format(self.to_literal())

def reflect_tilt(f):
    """
    The tilted reflection e^{x} f(-x): every index j goes to 1-j.
    Works on TrigPoly (frequencies) and ExpSum (exponents); it is an involution.
    """
    if isinstance(f, TrigPoly):
        return TrigPoly({1 - j: c for j, c in f.coeffs.items()})
    if isinstance(f, ExpSum):
        return ExpSum({1 - n: a for n, a in f.terms.items()})
    raise InvalidInputError('reflect_tilt expects a TrigPoly or an ExpSum, got {}'.format(type(f).__name__))

def project_pi(s, keep_coefficients=False):
    """
    Replace every orbit met by the support of s with its dominant exponential
    e^{mx}.  With keep_coefficients the coefficient a_m is kept instead of 1
    (orbits whose a_m is zero then drop out).
    """
    result = {}
    for n in s.support():
        orbit = orbit_of(n)
        result[orbit.m] = s.coefficient(orbit.m) if keep_coefficients else 1.0
    return ExpSum(result)

def orbit_decompose(s):
    """
    Split s into per-orbit blocks B = a_m e^{mx} + a_ell e^{ell x}, keyed by m.
    The blocks add back up to s.
    """
    blocks = {}
    for n in s.support():
        orbit = orbit_of(n)
        if orbit.m not in blocks:
            blocks[orbit.m] = ExpSum({orbit.m: s.coefficient(orbit.m), orbit.ell: s.coefficient(orbit.ell)})
    return blocks

def orbit_remainder(block, x):
    """
    The correction e^{-(m-ell)x} a_ell of a single-orbit block relative to its
    dominant exponential, so that B(x) = e^{mx} (a_m + remainder).
    """
    orbit = _single_orbit(block)
    x = np.asarray(x, dtype=float)
    return block.coefficient(orbit.ell) * np.exp(-(orbit.m - orbit.ell) * x)

def evaluate_factored(s, x):
    """
    Evaluate s orbit by orbit as sum_m e^{mx} (a_m + a_ell e^{-(m-ell)x}).
    For equal coefficients a_ell = a_m a block is a_m e^{mx} (1 + e^{-(2m-1)x}).
    """
    x = np.asarray(x, dtype=float)
    total = np.zeros(x.shape)
    for m, block in sorted(orbit_decompose(s).items()):
        total = total + np.exp(m * x) * (block.coefficient(m) + orbit_remainder(block, x))
    return total

def _single_orbit(b):
    require(b.support(), 'Expected a nonempty ExpSum supported on one orbit')
    orbit = orbit_of(b.support()[0])
    for n in b.support():
        require(n in orbit.members(), 'ExpSum {} is not supported on the single orbit {{{}, {}}}'.format(
            b.to_literal(), orbit.ell, orbit.m))
    return orbit

def asymptotic_leading(b, x_samples):
    """
    Dominant index m of a single-orbit superposition and the value of
    e^{-mx} A(x) at the largest sample, evaluated in the factored form
    a_m + a_ell e^{-(m-ell)x} so large x cannot overflow.
    """
    orbit = _single_orbit(b)
    x_samples = np.asarray(x_samples, dtype=float)
    require(x_samples.size > 0, 'asymptotic_leading needs at least one sample')
    require(np.all(np.diff(x_samples) > 0), 'x_samples must be strictly increasing')
    gap = orbit.m - orbit.ell
    require(x_samples[-1] >= 20.0 / gap, 'Largest sample {} is below 20/(m-ell) = {}'.format(
        x_samples[-1], 20.0 / gap))
    estimate = b.coefficient(orbit.m) + float(orbit_remainder(b, x_samples[-1]))
    return orbit.m, estimate

def classify_truncation(orbit, N):
    """
    Which members of the orbit lie in the window |n| <= N.  The member with the
    smaller modulus is the low one, so a window holding the high member always
    holds the low one as well and no orbit is high-only.
    """
    require(N >= 0, 'Truncation level N must be nonnegative, got {}'.format(N))
    low, high = sorted((orbit.n, orbit.partner), key=lambda j: (abs(j), j))
    inside = tuple(j for j in (low, high) if abs(j) <= N)
    if len(inside) == 2:
        return TruncationCase(INTERIOR, inside)
    if inside:
        return TruncationCase(LOW_ONLY, inside)
    return TruncationCase(OUTSIDE, inside)

def orbit_report(n, N):
    """ The orbit of n with its truncation case against |n| <= N """
    orbit = orbit_of(n)
    case = classify_truncation(orbit, N)
    return {'n': orbit.n, 'partner': orbit.partner, 'm': orbit.m, 'case': case.tag, 'inside': list(case.inside)}

def window_orbits(N):
    """
    Every orbit meeting [-N, N+1], one per key m = 1 .. N+1, with its case.
    """
    return [(orbit_of(m), classify_truncation(orbit_of(m), N)) for m in range(1, N + 2)]

def boundary_orbit(N):
    """
    The orbit with exactly one member inside |n| <= N.  Scans one key beyond
    the window so a second candidate would be noticed.
    """
    found = [orbit for orbit in (orbit_of(m) for m in range(1, N + 3))
             if classify_truncation(orbit, N).tag == LOW_ONLY]
    if len(found) != 1:
        raise InvalidInputError('Expected exactly one boundary orbit for N={}, found {}'.format(
            N, [orbit.members() for orbit in found]))
    return found[0]

def leading_kernel_sum(N, gamma_sq, u):
    """
    sum_{|n| <= N} gamma_n^2 e^{inu} with gamma_sq a map n -> gamma_n^2.
    """
    u = np.asarray(u, dtype=float)
    total = np.zeros(u.shape, dtype=complex)
    for n in range(-N, N + 1):
        total = total + gamma_sq[n] * np.exp(1j * n * u)
    return total

def orbit_regrouped_sum(N, gamma_sq, u):
    """
    The same sum as leading_kernel_sum, regrouped orbit by orbit through the
    truncation cases.
    """
    u = np.asarray(u, dtype=float)
    total = np.zeros(u.shape, dtype=complex)
    for orbit, case in window_orbits(N):
        for j in case.inside:
            total = total + gamma_sq[j] * np.exp(1j * j * u)
    return total

def _require_entries(basis, *indices):
    for n in indices:
        if n not in basis and not basis.table.covers(2 * abs(n)):
            raise InvalidInputError('Basis (N={}) does not contain E_{}'.format(basis.N, n))

def reflection_check(n, basis):
    """
    Coefficient distance between E_n(i.) and the tilted reflection of E_{1-n}(i.).
    """
    _require_entries(basis, n, 1 - n)
    return basis.poly(n).distance(reflect_tilt(basis.poly(1 - n)))

def negindex_check(n, k, basis):
    """
    Fit E_{-n}(ix) - E_n(-ix) = B E_n(ix) by least squares over the
    coefficients.  Returns (B, residual); B should equal k/(n+k).
    """
    require(n >= 1, 'negindex_check needs n >= 1, got {}'.format(n))
    require(k == basis.k, 'Basis was built for k={}, not k={}'.format(basis.k, k))
    _require_entries(basis, n, -n)
    positive = basis.poly(n)
    difference = basis.poly(-n) - positive.negate_frequencies()
    frequencies = sorted(set(difference.support()) | set(positive.support()))
    target = np.array([difference.coefficient(j) for j in frequencies])
    column = np.array([positive.coefficient(j) for j in frequencies])
    fitted = np.vdot(column, target) / np.vdot(column, column)
    B = float(fitted.real)
    residual = (difference - positive * B).max_abs()
    return B, residual

def reflected_action_check(n, k, basis):
    """
    For n >= 1 the reflected eigenfunction satisfies
    T^k(E_n(-.)) = -(n+k) E_n(-.) - 2k E_n; returns the relative coefficient residual.
    """
    require(n >= 1, 'reflected_action_check needs n >= 1, got {}'.format(n))
    _require_entries(basis, n)
    poly = basis.poly(n)
    reflected = poly.negate_frequencies()
    expected = reflected * (-(n + k)) - poly * (2 * k)
    return cherednik_apply(reflected, k).distance(expected) / max(1.0, poly.max_abs())

def norm_symmetry_check(N, basis):
    """
    Largest relative gap between gamma_n^{-2} and gamma_{1-n}^{-2} over the
    orbits in the basis; the boundary pair (-N, N+1) is one of them.
    """
    worst = 0.0
    for n in range(-N, 1):
        _require_entries(basis, n, 1 - n)
        low = basis.entry(n).norm_sq
        high = basis.entry(1 - n).norm_sq
        worst = max(worst, abs(low - high) / high)
    return worst

def _block_json(block):
    orbit = _single_orbit(block)
    return {'m': orbit.m, 'ell': orbit.ell, 'a_m': block.coefficient(orbit.m), 'a_ell': block.coefficient(orbit.ell)}

def orbits_subparser(parser):
    """
    Create a subparser for orbits.  Should pass in results of subparsers.add_parser()
    """
    parser.add_argument('action', choices=['report', 'project', 'asymptotic'],
                        help='orbits of the window |n| <= N, projection of an ExpSum, or its dominant growth')
    parser.add_argument('--N', type=int, default=None,
                        help='truncation level, 0 <= N <= 64 (report)')
    parser.add_argument('--n', dest='orbit_n', type=int, default=None,
                        help='report only the orbit of this index')
    parser.add_argument('--expsum', type=str, default=None,
                        help='real exponential sum literal "n:a,...", e.g. "2:5,-1:7"')
    parser.add_argument('--x', dest='orbit_x', type=float, action='append', default=None,
                        help='point at which to evaluate the ExpSum in factored form (repeatable)')
    parser.add_argument('--x-max', dest='orbit_x_max', type=float, default=40.0,
                        help='largest sample of the asymptotic estimate')
    parser.add_argument('--samples', dest='orbit_samples', type=int, default=8,
                        help='number of samples up to --x-max')

def validate_orbits_options(options):
    """
    Throw an error if an invalid combination of options has been selected.
    """
    if options.action == 'report':
        require(options.N is not None and 0 <= options.N <= options.max_N,
                '--N must be in [0, {}], got {}'.format(options.max_N, options.N))
    else:
        require(options.expsum is not None, 'orbits {} needs --expsum'.format(options.action))
    require(options.orbit_samples >= 1, '--samples must be positive, got {}'.format(options.orbit_samples))

def orbits_main(context, options):
    """
    cherednik-kit orbits report|project|asymptotic.
    """
    validate_orbits_options(options)

    if options.action == 'report':
        N = options.N
        if options.orbit_n is not None:
            document = orbit_report(options.orbit_n, N)
        else:
            document = {'N': N, 'orbits': [orbit_report(orbit.n, N) for orbit, _ in window_orbits(N)],
                        'boundary': orbit_report(boundary_orbit(N).n, N)}
        context.write_json(document)
        return 0

    s = ExpSum.parse(options.expsum)
    require(s.support(), 'ExpSum "{}" has no nonzero terms'.format(options.expsum))
    blocks = orbit_decompose(s)
    if options.action == 'project':
        document = {'expsum': s.to_literal(),
                    'projection': project_pi(s).to_literal(),
                    'projection_coefficients': project_pi(s, keep_coefficients=True).to_literal(),
                    'reflected': reflect_tilt(s).to_literal(),
                    'blocks': [_block_json(blocks[m]) for m in sorted(blocks)]}
        context.write_json(document)
        return 0

    samples = np.linspace(options.orbit_x_max / options.orbit_samples, options.orbit_x_max, options.orbit_samples)
    leading = []
    for m in sorted(blocks):
        dominant, estimate = asymptotic_leading(blocks[m], samples)
        entry = _block_json(blocks[m])
        entry.update({'dominant': dominant, 'leading_estimate': estimate})
        leading.append(entry)
    document = {'expsum': s.to_literal(), 'x_max': float(samples[-1]), 'blocks': leading}
    if options.orbit_x:
        xs = np.asarray(options.orbit_x, dtype=float)
        factored = evaluate_factored(s, xs)
        direct = s.evaluate(xs)
        document['evaluations'] = [{'x': float(x), 'factored': float(f), 'direct': float(d)}
                                   for x, f, d in zip(xs, factored, direct)]
    logger.info('Asymptotics of {} over {} orbits'.format(s.to_literal(), len(blocks)))
    context.write_json(document)
    return 0
