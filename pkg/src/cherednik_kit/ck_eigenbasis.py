"""
ck_eigenbasis.py: Construct the non-symmetric eigenfunctions E_n^k(ix) of the
Cherednik operator as trigonometric polynomials, apply the operator exactly,
and assemble a truncated basis.

E_n(ix) = e^{inx} + sum_{j <| n} c_j e^{ijx}, with the c_j fixed by
(E_n, e^{ijx})_k = 0 for every j <| n.

"""

import logging
import math
import timeit
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy.linalg

from cherednik_kit.ck_common import require, InvalidInputError, NumericalFailure
from cherednik_kit.ck_quadrature import build_moment_table, extended_context, inner_product, moment_extended
from cherednik_kit.ck_trigpoly import TrigPoly

logger = logging.getLogger(__name__)

def add_basis_args(parser):
    """ Problem parameters shared by every subcommand that needs a basis """
    parser.add_argument('--k', type=float, default=None,
                        help='multiplicity parameter k >= 0')
    parser.add_argument('--N', type=int, default=None,
                        help='truncation level, 0 <= N <= 64')
    parser.add_argument('--tol', type=float, default=None,
                        help='absolute tolerance for the moment quadrature')
    parser.add_argument('--threads', dest='basis_threads', type=int, default=None,
                        help='worker threads for basis construction')

def validate_basis_options(options):
    """
    Throw an error if an invalid combination of options has been selected.
    """
    require(options.k is not None and options.k >= 0, '--k must be nonnegative, got {}'.format(options.k))
    require(options.N is not None and 0 <= options.N <= options.max_N,
            '--N must be in [0, {}], got {}'.format(options.max_N, options.N))
    require(options.tol is not None and options.tol > 0, '--tol must be positive, got {}'.format(options.tol))

def lower_set(n):
    """
    All j with j <| n, ascending: |j| < |n| with |n| - |j| even, or |j| = |n| and n < j.
    """
    size = abs(n)
    return [j for j in range(-size, size + 1)
            if (abs(j) < size and (size - abs(j)) % 2 == 0) or (abs(j) == size and n < j)]

def eigenvalue(n, k):
    """ n + k for n > 0, n - k for n <= 0 """
    return n + k if n > 0 else n - k

def cherednik_apply(f, k):
    """
    Apply T^k f(z) = f'(z) + 2k (f(z) - f(-z)) / (1 - e^{-2z}) - k f(z) to a
    TrigPoly in t, z = it, so frequency j stands for e^{jz}.

    The divided difference of e^{jz} is the finite geometric sum
    e^{jz} + e^{(j-2)z} + ... + e^{(2-j)z} for j > 0, minus the same sum over
    |j| for j < 0, and zero for j = 0.  The result stays inside the frequency
    window of f.
    """
    result = {}
    for j, c in f.coeffs.items():
        result[j] = result.get(j, 0j) + (j - k) * c
        if j == 0 or k == 0:
            continue
        sign = 1 if j > 0 else -1
        size = abs(j)
        for r in range(size):
            freq = size - 2 * r
            result[freq] = result.get(freq, 0j) + 2 * k * sign * c
    return TrigPoly(result)

class EigenEntry(object):
    """
    One constructed eigenfunction: index n, parameter k, its TrigPoly on the
    imaginary axis, eigenvalue n_k and squared norm gamma_n^{-2}.
    """

    def __init__(self, n, k, poly, norm_sq, condition=1.0):
        self.n = n
        self.k = k
        self.poly = poly
        self.eigenvalue = eigenvalue(n, k)
        self.norm_sq = norm_sq
        self.condition = condition

    @property
    def gamma_sq(self):
        return 1.0 / self.norm_sq

    def to_json(self):
        return {'n': self.n, 'eigenvalue': self.eigenvalue, 'norm_sq': self.norm_sq,
                'coeffs': self.poly.to_list()}

def _extended_solve(lower, n, k, dps):
    """
    Solve the Gram system with entries recomputed at dps digits, then round back
    to double.  With the condition capped at the threshold, the solution keeps
    full double precision.
    """
    ctx = extended_context(dps)
    moments = {d: moment_extended(d, k, ctx=ctx) for d in range(0, 2 * abs(n) + 1, 2)}

    def entry(d):
        return moments.get(abs(d), ctx.mpf(0))

    gram = ctx.matrix([[entry(j - l) for l in lower] for j in lower])
    rhs = ctx.matrix([-entry(j - n) for j in lower])
    solution = ctx.lu_solve(gram, rhs)
    return np.array([float(solution[i]) for i in range(len(lower))])

def construct(n, k, table, condition_threshold=1e12, extended_condition=1e6, extended_dps=40):
    """
    Solve sum_{l <| n} c_l M_{j-l} = -M_{j-n} (j <| n) for the lower coefficients of E_n.

    Systems whose condition number exceeds extended_condition are solved in
    mpmath at extended_dps digits from the gamma-function moments; the rest use
    a double-precision symmetric solve on the table.
    """
    require(k >= 0, 'Multiplicity k must be nonnegative, got {}'.format(k))
    require(table.covers(2 * abs(n)), 'Moment table (max_freq {}) does not cover E_{} (needs {})'.format(
        table.max_freq, n, 2 * abs(n)))

    lower = lower_set(n)
    leading = TrigPoly.monomial(n)
    condition = 1.0
    if not lower:
        poly = leading
    else:
        gram = table.gram(lower)
        rhs = -table.lookup(np.array(lower) - n)
        condition = float(np.linalg.cond(gram))
        if not np.isfinite(condition) or condition > condition_threshold:
            raise NumericalFailure('Gram system for E_{} at k={} is ill-conditioned (condition {:.3e} > {:.3e})'.format(
                n, k, condition, condition_threshold), details={'n': n, 'condition': condition})
        if condition > extended_condition:
            logger.debug('E_{} at k={}: condition {:.3e}, solving at {} digits'.format(n, k, condition, extended_dps))
            coefficients = _extended_solve(lower, n, k, extended_dps)
        else:
            # Symmetric indefinite solver with Bunch-Kaufman pivoting
            coefficients = scipy.linalg.solve(gram, rhs, assume_a='sym')
        poly = leading + TrigPoly(dict(zip(lower, coefficients)))

    norm_sq = inner_product(poly, poly, table).real
    if not norm_sq > 0:
        raise NumericalFailure('E_{} at k={} has nonpositive squared norm {}'.format(n, k, norm_sq),
                               details={'n': n, 'norm_sq': norm_sq})
    return EigenEntry(n, k, poly, norm_sq, condition)

def eigen_residual(entry):
    """ max coefficient of T^k E_n - n_k E_n, relative to max(1, ||E_n||) """
    difference = cherednik_apply(entry.poly, entry.k) - entry.poly * entry.eigenvalue
    return difference.max_abs() / max(1.0, entry.poly.max_abs())

class Basis(object):
    """
    Eigenfunctions E_n for n in [-N, N+1] at one k, sharing a moment table that
    covers frequencies up to 2N+2.  Indices outside the stored range (E_{-(N+1)})
    are constructed on demand from the same table.
    """

    def __init__(self, k, N, table, entries, condition_threshold=1e12):
        self.k = k
        self.N = N
        self.table = table
        self.entries = dict(entries)
        self.condition_threshold = condition_threshold

    def indices(self):
        return sorted(self.entries.keys())

    def __contains__(self, n):
        return n in self.entries

    def entry(self, n):
        if n in self.entries:
            return self.entries[n]
        if not self.table.covers(2 * abs(n)):
            raise InvalidInputError('Basis for N={} has no entry E_{} and its moment table cannot build it'.format(
                self.N, n))
        logger.debug('Constructing E_{} on demand for N={}'.format(n, self.N))
        return construct(n, self.k, self.table, self.condition_threshold)

    def poly(self, n):
        return self.entry(n).poly

    def gamma_sq(self, n):
        return self.entry(n).gamma_sq

    def to_json(self):
        return {'k': self.k, 'N': self.N,
                'entries': [self.entries[n].to_json() for n in self.indices()]}

    @classmethod
    def from_json(cls, document, table=None):
        """ Rebuild a basis; a moment table is recomputed unless given """
        k = float(document['k'])
        N = int(document['N'])
        if table is None:
            table = build_moment_table(k, 2 * N + 2)
        entries = {}
        for row in document['entries']:
            entries[int(row['n'])] = EigenEntry(int(row['n']), k, TrigPoly.from_list(row['coeffs']),
                                                float(row['norm_sq']))
        return cls(k, N, table, entries)

def orthogonality_residual(basis):
    """
    max over n != m of |(E_n, E_m)_k| / sqrt(norm_sq(n) norm_sq(m)).
    """
    worst = 0.0
    indices = basis.indices()
    for a, n in enumerate(indices):
        for m in indices[a + 1:]:
            value = abs(inner_product(basis.poly(n), basis.poly(m), basis.table))
            worst = max(worst, value / math.sqrt(basis.entry(n).norm_sq * basis.entry(m).norm_sq))
    return worst

def build_basis(N, k, tol=1e-12, threads=1, condition_threshold=1e12, check_tol=1e-9, table=None):
    """
    Construct E_n for every n in [-N, N+1] and check the eigen residual and
    pairwise orthogonality of the result against check_tol.
    """
    require(N >= 0, 'Truncation level N must be nonnegative, got {}'.format(N))
    require(k >= 0, 'Multiplicity k must be nonnegative, got {}'.format(k))
    start_time = timeit.default_timer()

    if table is None or not table.covers(2 * N + 2):
        table = build_moment_table(k, 2 * N + 2, tol=tol, threads=threads)

    def construct_index(n):
        try:
            return construct(n, k, table, condition_threshold)
        except NumericalFailure as e:
            details = dict(e.details)
            details['n'] = n
            raise NumericalFailure('Constructing E_{} failed: {}'.format(n, e), details=details)

    indices = list(range(-N, N + 2))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            constructed = list(executor.map(construct_index, indices))
    else:
        constructed = [construct_index(n) for n in indices]
    basis = Basis(k, N, table, zip(indices, constructed), condition_threshold)

    if check_tol is not None:
        for entry in constructed:
            residual = eigen_residual(entry)
            if residual > check_tol:
                raise NumericalFailure('E_{} at k={} fails the eigen residual check ({:.3e} > {:.1e})'.format(
                    entry.n, k, residual, check_tol), details={'n': entry.n, 'residual': residual})
        residual = orthogonality_residual(basis)
        if residual > check_tol:
            raise NumericalFailure('Basis N={} k={} fails the orthogonality check ({:.3e} > {:.1e})'.format(
                N, k, residual, check_tol), details={'residual': residual})

    logger.info('Built basis N={} k={} ({} entries) in {:.3f} seconds'.format(
        N, k, len(indices), timeit.default_timer() - start_time))
    return basis

def basis_subparser(parser):
    """
    Create a subparser for basis.  Should pass in results of subparsers.add_parser()
    """
    add_basis_args(parser)

def basis_main(context, options):
    """
    cherednik-kit basis: construct the basis and write it as JSON.
    """
    validate_basis_options(options)
    basis = build_basis(options.N, options.k, tol=options.tol, threads=options.basis_threads,
                        condition_threshold=options.condition_threshold, check_tol=options.eigen_tol)
    context.write_json(basis.to_json())
    return 0
