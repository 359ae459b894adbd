"""
ck_kernel.py: The truncated reconstruction kernel

    K_N(x, y) = sum_{|n| <= N} gamma_n^2 E_n(ix) E_n(-iy)

in its spectral-sum form (authoritative) and in the closed boundary form built
from E_{N+1} alone, plus the diagonal factorization of the boundary numerator
used by the mirror-local decomposition.

"""

import logging
import math
import timeit
from collections import namedtuple

import mpmath
import numpy as np

from cherednik_kit.ck_common import require, InvalidInputError, NumericalFailure, parse_grid, float_list
from cherednik_kit.ck_eigenbasis import add_basis_args, validate_basis_options, build_basis
from cherednik_kit.ck_orbits import reflect_tilt
from cherednik_kit.ck_quadrature import build_moment_table, gauss_legendre, inner_product
from cherednik_kit.ck_trigpoly import TrigPoly

logger = logging.getLogger(__name__)

KERNEL_CSV_HEADER = ['x', 'y', 're_spectral', 'im_spectral', 're_boundary', 'im_boundary', 'abs_diff']

SPECTRAL_SUM = 'spectral_sum'
BOUNDARY_CLOSED = 'boundary_closed'

KernelEvalConfig = namedtuple('KernelEvalConfig', ['N', 'k', 'form', 'diagonal_guard'])

def _check_basis(N, k, basis):
    require(N >= 0, 'Truncation level N must be nonnegative, got {}'.format(N))
    require(basis.k == k, 'Basis was built for k={}, not k={}'.format(basis.k, k))
    require(basis.N >= N, 'Basis was built for N={}, which does not cover N={}'.format(basis.N, N))

def _as_result(values):
    if np.ndim(values) == 0:
        return complex(values)
    return values

def diagonal_distance(x, y):
    """ Distance of x - y to the nearest multiple of 2 pi """
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return np.abs(np.remainder(d + math.pi, 2 * math.pi) - math.pi)

def kernel_spectral(N, k, x, y, basis):
    """
    Spectral sum sum_{|n| <= N} gamma_n^2 E_n(ix) E_n(-iy); x, y broadcast.
    """
    _check_basis(N, k, basis)
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    total = np.zeros(x.shape, dtype=complex)
    for n in range(-N, N + 1):
        poly = basis.poly(n)
        total = total + basis.gamma_sq(n) * poly.evaluate(x) * poly.evaluate(-y)
    return _as_result(total)

def numerator_N(N, k, x, y, basis):
    """
    e^{-i(x-y)} E_{N+1}(ix) E_{N+1}(-iy) - E_{N+1}(-ix) E_{N+1}(iy); vanishes on x = y.
    """
    _check_basis(N, k, basis)
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    poly = basis.poly(N + 1)
    values = (np.exp(-1j * (x - y)) * poly.evaluate(x) * poly.evaluate(-y)
              - poly.evaluate(-x) * poly.evaluate(y))
    return _as_result(values)

def kernel_boundary(N, k, x, y, basis, diagonal_guard=1e-3):
    """
    Closed boundary form gamma_{N+1}^2 numerator_N(x, y) / (1 - e^{-i(x-y)}).
    Points closer than diagonal_guard to x - y in 2 pi Z are rejected.
    """
    _check_basis(N, k, basis)
    require(diagonal_guard > 0, 'Diagonal guard must be positive, got {}'.format(diagonal_guard))
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    distance = diagonal_distance(x, y)
    if np.any(distance < diagonal_guard):
        raise InvalidInputError('Boundary form evaluated within {} of the diagonal (|x-y| mod 2pi = {:.3e}); '
                                'use the spectral form or c_factor there'.format(diagonal_guard, float(np.min(distance))))
    values = basis.gamma_sq(N + 1) * numerator_N(N, k, x, y, basis) / (1.0 - np.exp(-1j * (x - y)))
    return _as_result(values)

def kernel_eval(config, x, y, basis):
    """ Evaluate K_N in the form named by a KernelEvalConfig """
    if config.form == SPECTRAL_SUM:
        return kernel_spectral(config.N, config.k, x, y, basis)
    if config.form == BOUNDARY_CLOSED:
        return kernel_boundary(config.N, config.k, x, y, basis, config.diagonal_guard)
    raise InvalidInputError('Unknown kernel form {}'.format(config.form))

def _numerator_dy(poly, x, y):
    """
    Exact d/dy of the numerator.  Writing e^{iy} E(-iy) as the tilted
    reflection R(y), the numerator is e^{-ix} E(x) R(y) - E(-x) E(y).
    """
    reflected = reflect_tilt(poly)
    return (np.exp(-1j * x) * poly.evaluate(x) * reflected.derivative().evaluate(y)
            - poly.evaluate(-x) * poly.derivative().evaluate(y))

def c_factor(N, k, x, y, basis, diagonal_guard=1e-3, order=33, branch=None):
    """
    The smooth factor C_N with numerator_N(x, y) = (x - y) C_N(x, y).

    Off the diagonal (|x - y| > diagonal_guard) it is the quotient; near it,
    C_N = -int_0^1 d_y N(x, x + s(y - x)) ds by a fixed Gauss-Legendre rule.
    branch forces 'quotient' or 'integral'.
    """
    _check_basis(N, k, basis)
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    shape = x.shape
    x, y = x.ravel(), y.ravel()
    poly = basis.poly(N + 1)
    if branch is None:
        off_diagonal = np.abs(x - y) > diagonal_guard
    elif branch == 'quotient':
        require(np.all(x != y), 'The quotient branch of c_factor is undefined on the diagonal')
        off_diagonal = np.ones(x.shape, dtype=bool)
    elif branch == 'integral':
        off_diagonal = np.zeros(x.shape, dtype=bool)
    else:
        raise InvalidInputError('Unknown c_factor branch {}'.format(branch))

    result = np.zeros(x.shape, dtype=complex)
    if np.any(off_diagonal):
        xo, yo = x[off_diagonal], y[off_diagonal]
        result[off_diagonal] = numerator_N(N, k, xo, yo, basis) / (xo - yo)
    near = ~off_diagonal
    if np.any(near):
        xn, yn = x[near], y[near]
        nodes, weights = gauss_legendre(order)
        s = 0.5 * (nodes + 1.0)
        path = xn[..., None] + s * (yn - xn)[..., None]
        derivative = _numerator_dy(poly, np.broadcast_to(xn[..., None], path.shape), path)
        result[near] = -0.5 * (derivative @ weights)
    return _as_result(result.reshape(shape))

def a_factor(N, k, x, basis):
    """ A_N(x) = C_N(x, x) = -d_y N(x, y) at y = x """
    _check_basis(N, k, basis)
    x = np.asarray(x, dtype=float)
    return _as_result(-_numerator_dy(basis.poly(N + 1), x, x))

def remainder_kernel(N, k, x, y, basis):
    """ R_N(x, y) = K_N(x, y) - (gamma_{N+1}^2 / i) A_N(x), exactly """
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    rank_one = basis.gamma_sq(N + 1) / 1j * np.asarray(a_factor(N, k, x, basis))
    return _as_result(np.asarray(kernel_spectral(N, k, x, y, basis)) - rank_one)

class LocalDecomposition(object):
    """
    K_N = (gamma^2 / i) A_N(x) + R_N(x, y) on the patch [-delta, delta]^2,
    with the samples of A_N used to certify inf |A_N| > 0.
    """

    def __init__(self, N, k, delta, delta_request, halvings, gamma_sq, xs, a_values, a_inf, r_bound):
        self.N = N
        self.k = k
        self.delta = delta
        self.delta_request = delta_request
        self.halvings = halvings
        self.gamma_sq = gamma_sq
        self.xs = xs
        self.a_values = a_values
        self.A_inf = a_inf
        self.R_bound = r_bound

    @property
    def A_samples(self):
        return list(zip(self.xs, self.a_values))

    def to_json(self):
        return {'N': self.N, 'k': self.k, 'delta': self.delta, 'delta_request': self.delta_request,
                'halvings': self.halvings, 'gamma_sq': self.gamma_sq,
                'A_inf': self.A_inf, 'R_bound': self.R_bound,
                'A_samples': [[float(x), float(a.real), float(a.imag)] for x, a in self.A_samples]}

def local_decompose(N, k, delta_request, basis, grid_points=1025, max_halvings=20, a_floor=1e-12, patch_points=65):
    """
    Sample A_N on [-delta, delta], halving delta until min |A_N| exceeds
    a_floor, then tabulate R_N on the patch and record its sup.
    """
    _check_basis(N, k, basis)
    require(0 < delta_request < math.pi / 4, 'delta must be in (0, pi/4), got {}'.format(delta_request))
    require(grid_points >= 2 and patch_points >= 2, 'Local decomposition grids need at least two points')

    delta = delta_request
    for halvings in range(max_halvings + 1):
        xs = np.linspace(-delta, delta, grid_points)
        a_values = np.asarray(a_factor(N, k, xs, basis))
        a_inf = float(np.min(np.abs(a_values)))
        if a_inf > a_floor:
            break
        logger.info('min |A_N| = {:.3e} on [-{}, {}]; halving delta'.format(a_inf, delta, delta))
        if halvings == max_halvings:
            raise NumericalFailure('A_N vanishes on every window down to delta={} after {} halvings'.format(
                delta, max_halvings), details={'delta': delta, 'A_profile': [
                    [float(x), float(a.real), float(a.imag)] for x, a in zip(xs, a_values)]})
        delta = delta / 2.0

    patch = np.linspace(-delta, delta, patch_points)
    X, Y = np.meshgrid(patch, patch, indexing='ij')
    r_bound = float(np.max(np.abs(remainder_kernel(N, k, X, Y, basis))))
    logger.info('Local decomposition N={} k={}: delta={} inf|A_N|={:.6e} sup|R_N|={:.6e}'.format(
        N, k, delta, a_inf, r_bound))
    return LocalDecomposition(N, k, delta, delta_request, halvings, basis.gamma_sq(N + 1),
                              float_list(xs), list(a_values), a_inf, r_bound)

def guarded_grid(nx, ny, diagonal_guard=1e-3):
    """
    Flattened points of the nx-by-ny grid on [-pi, pi)^2 that keep x - y at
    least diagonal_guard away from 2 pi Z.
    """
    xs = np.linspace(-math.pi, math.pi, nx, endpoint=False)
    ys = np.linspace(-math.pi, math.pi, ny, endpoint=False)
    X, Y = np.meshgrid(xs, ys, indexing='ij')
    keep = diagonal_distance(X, Y) >= diagonal_guard
    return X[keep], Y[keep]

class DiscrepancyReport(object):
    """
    max |K_spectral - K_boundary| over a grid, where it happens, and optionally
    every point's residual.
    """

    def __init__(self, N, k, grid, max_abs_difference, argmax, residuals=None, extended=None):
        self.N = N
        self.k = k
        self.grid = grid
        self.max_abs_difference = max_abs_difference
        self.argmax = argmax
        self.residuals = residuals
        self.extended = extended

    def to_json(self):
        document = {'N': self.N, 'k': self.k, 'grid': self.grid,
                    'max_abs_difference': self.max_abs_difference,
                    'argmax': {'x': self.argmax[0], 'y': self.argmax[1]}}
        if self.extended is not None:
            document['extended_precision'] = self.extended
        if self.residuals is not None:
            document['residuals'] = float_list(self.residuals)
        return document

def _grid_points(N, k, xs, ys, diagonal_guard):
    xs = np.asarray(xs, dtype=float).ravel()
    ys = np.asarray(ys, dtype=float).ravel()
    require(xs.shape == ys.shape, 'Grid x and y arrays have different lengths')
    require(xs.size > 0, 'Kernel comparison grid is empty')
    keep = diagonal_distance(xs, ys) >= diagonal_guard
    if not np.any(keep):
        raise InvalidInputError('Every grid point lies within the diagonal guard {}'.format(diagonal_guard))
    if not np.all(keep):
        logger.info('Dropping {} grid points inside the diagonal guard'.format(int(np.sum(~keep))))
    return xs[keep], ys[keep]

def compare_forms(N, k, xs, ys, basis, diagonal_guard=1e-3, keep_residuals=False, grid=None):
    """
    Compare the spectral and boundary forms at the points (xs, ys).
    """
    xs, ys = _grid_points(N, k, xs, ys, diagonal_guard)
    spectral = kernel_spectral(N, k, xs, ys, basis)
    boundary = kernel_boundary(N, k, xs, ys, basis, diagonal_guard)
    residuals = np.abs(spectral - boundary)
    worst = int(np.argmax(residuals))
    description = dict(grid) if grid else {}
    description['points'] = int(xs.size)
    description['diagonal_guard'] = diagonal_guard
    return DiscrepancyReport(N, k, description, float(residuals[worst]), (float(xs[worst]), float(ys[worst])),
                             residuals if keep_residuals else None)

def discrepancy_extended(N, k, xs, ys, basis, dps=50, diagonal_guard=1e-3):
    """
    Recompute |K_spectral - K_boundary| at every point in mpmath with dps digits
    from the stored coefficients and norms.  Returns the per-point residuals.
    """
    _check_basis(N, k, basis)
    xs, ys = _grid_points(N, k, xs, ys, diagonal_guard)
    residuals = np.zeros(xs.size)
    with mpmath.workdps(dps):
        terms = [(mpmath.mpf(basis.gamma_sq(n)), [(j, mpmath.mpc(c.real, c.imag)) for j, c in basis.poly(n).items()])
                 for n in range(-N, N + 1)]
        boundary_gamma = mpmath.mpf(basis.gamma_sq(N + 1))
        boundary_poly = [(j, mpmath.mpc(c.real, c.imag)) for j, c in basis.poly(N + 1).items()]

        def evaluate(coeffs, t):
            return mpmath.fsum(c * mpmath.expj(j * t) for j, c in coeffs)

        for index, (x, y) in enumerate(zip(xs, ys)):
            x = mpmath.mpf(float(x))
            y = mpmath.mpf(float(y))
            spectral = mpmath.fsum(g * evaluate(coeffs, x) * evaluate(coeffs, -y) for g, coeffs in terms)
            numerator = (mpmath.expj(-(x - y)) * evaluate(boundary_poly, x) * evaluate(boundary_poly, -y)
                         - evaluate(boundary_poly, -x) * evaluate(boundary_poly, y))
            boundary = boundary_gamma * numerator / (1 - mpmath.expj(-(x - y)))
            residuals[index] = float(abs(spectral - boundary))
    return residuals

def boundary_term_check(N, basis, xs, ys):
    """
    The n = -N term of the spectral sum through the reflection identity:
    gamma_{-N}^2 E_{-N}(ix) E_{-N}(-iy) = gamma_{-N}^2 e^{i(x-y)} E_{N+1}(-ix) E_{N+1}(iy).
    Returns the largest absolute gap.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    gamma_sq = basis.gamma_sq(-N)
    low = basis.poly(-N)
    high = basis.poly(N + 1)
    lhs = gamma_sq * low.evaluate(xs) * low.evaluate(-ys)
    rhs = gamma_sq * np.exp(1j * (xs - ys)) * high.evaluate(-xs) * high.evaluate(ys)
    return float(np.max(np.abs(lhs - rhs)))

def reconstruct(f, N, k, basis):
    """
    Orthogonal projection of f onto span{E_n : |n| <= N}:
    sum_n gamma_n^2 (f, E_n)_k E_n.
    """
    _check_basis(N, k, basis)
    low, high = f.window()
    needed = max(abs(low), abs(high)) + N + 1
    table = basis.table if basis.table.covers(needed) else build_moment_table(k, needed)
    result = TrigPoly()
    for n in range(-N, N + 1):
        entry = basis.entry(n)
        result = result + entry.poly * (entry.gamma_sq * inner_product(f, entry.poly, table))
    return result

def add_kernel_args(parser):
    parser.add_argument('--guard', dest='diagonal_guard', type=float, default=None,
                        help='minimum distance of x-y to 2*pi*Z for the boundary form')
    parser.add_argument('--grid', type=str, default=None,
                        help='grid size NxM on [-pi, pi)^2 (default 101x101)')

def kernel_subparser(parser):
    """
    Create a subparser for kernel.  Should pass in results of subparsers.add_parser()
    """
    parser.add_argument('action', choices=['eval', 'compare', 'export-grid'],
                        help='evaluate at a point, compare forms on a grid, or export the grid as CSV')
    add_basis_args(parser)
    add_kernel_args(parser)
    parser.add_argument('--x', type=float, default=None, help='x for kernel eval')
    parser.add_argument('--y', type=float, default=None, help='y for kernel eval')
    parser.add_argument('--extended', action='store_true',
                        help='also recompute the comparison in extended precision')

def validate_kernel_options(options):
    validate_basis_options(options)
    require(options.diagonal_guard > 0, '--guard must be positive, got {}'.format(options.diagonal_guard))
    if options.action == 'eval':
        require(options.x is not None and options.y is not None, 'kernel eval needs --x and --y')
    else:
        parse_grid(options.grid)

def kernel_main(context, options):
    """
    cherednik-kit kernel eval|compare|export-grid.  Comparisons report the
    discrepancy and never fail on its size.
    """
    validate_kernel_options(options)
    start_time = timeit.default_timer()
    basis = build_basis(options.N, options.k, tol=options.tol, threads=options.basis_threads,
                        condition_threshold=options.condition_threshold, check_tol=options.eigen_tol)
    N, k = options.N, options.k

    if options.action == 'eval':
        x, y = options.x, options.y
        document = {'N': N, 'k': k, 'x': x, 'y': y,
                    'spectral': kernel_eval(KernelEvalConfig(N, k, SPECTRAL_SUM, options.diagonal_guard),
                                            x, y, basis),
                    'numerator': numerator_N(N, k, x, y, basis),
                    'c_factor': c_factor(N, k, x, y, basis, options.diagonal_guard, options.c_factor_order)}
        if diagonal_distance(x, y) >= options.diagonal_guard:
            document['boundary'] = kernel_eval(KernelEvalConfig(N, k, BOUNDARY_CLOSED, options.diagonal_guard),
                                               x, y, basis)
        else:
            document['boundary'] = None
        context.write_json(document)
        return 0

    nx, ny = parse_grid(options.grid)
    xs, ys = guarded_grid(nx, ny, options.diagonal_guard)
    if options.action == 'export-grid':
        spectral = kernel_spectral(N, k, xs, ys, basis)
        boundary = kernel_boundary(N, k, xs, ys, basis, options.diagonal_guard)
        rows = [[x, y, s.real, s.imag, b.real, b.imag, abs(s - b)]
                for x, y, s, b in zip(xs, ys, spectral, boundary)]
        context.write_csv(KERNEL_CSV_HEADER, rows)
    else:
        report = compare_forms(N, k, xs, ys, basis, options.diagonal_guard, grid={'nx': nx, 'ny': ny})
        if options.extended:
            extended = discrepancy_extended(N, k, xs, ys, basis, options.extended_dps, options.diagonal_guard)
            report.extended = {'dps': options.extended_dps, 'max_abs_difference': float(np.max(extended)),
                               'agreement': abs(float(np.max(extended)) - report.max_abs_difference)}
        context.write_json(report.to_json())
    logger.info('kernel {} took {:.3f} seconds'.format(options.action, timeit.default_timer() - start_time))
    return 0
