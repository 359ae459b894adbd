"""
ck_verify.py: The identity suite.  Every identity the library can certify is
measured on a constructed basis and compared with its tolerance; the result is
a VerifySummary whose overall pass flag is the conjunction of its records.

"""

import logging
import math
import timeit
from collections import namedtuple

import numpy as np
import yaml

from cherednik_kit.ck_common import require, parse_grid
from cherednik_kit.ck_config import default_config
from cherednik_kit.ck_eigenbasis import (add_basis_args, validate_basis_options, build_basis, eigen_residual,
                                         orthogonality_residual)
from cherednik_kit.ck_kernel import (kernel_spectral, numerator_N, c_factor, boundary_term_check, reconstruct,
                                     guarded_grid)
from cherednik_kit.ck_orbits import (ExpSum, project_pi, boundary_orbit, leading_kernel_sum, orbit_regrouped_sum,
                                     reflection_check, negindex_check, reflected_action_check, norm_symmetry_check)
from cherednik_kit.ck_quadrature import moment_closed_form

logger = logging.getLogger(__name__)

VerifyRecord = namedtuple('VerifyRecord', ['name', 'max_residual', 'tolerance', 'passed'])

# Tolerance config key for each identity
TOLERANCE_KEYS = [
    ('moment-closed-form', 'moment_tol_check'),
    ('eigen', 'eigen_tol'),
    ('orthogonality', 'orthogonality_tol'),
    ('coefficient-realness', 'realness_tol'),
    ('reflection', 'reflection_tol'),
    ('negindex', 'negindex_tol'),
    ('reflected-action', 'eigen_tol'),
    ('gamma-symmetry', 'gamma_tol'),
    ('reproducing', 'reproduce_tol'),
    ('pi-idempotence', None),
    ('boundary-orbit', None),
    ('numerator-diagonal', 'diagonal_tol'),
    ('numerator-conjugate', 'factor_tol'),
    ('diagonal-factorization', 'factor_tol'),
    ('c-factor-branches', 'branch_tol'),
    ('kernel-hermitian', 'hermitian_tol'),
    ('boundary-term', 'factor_tol'),
    ('leading-sum-regrouping', 'hermitian_tol'),
]

# Random ExpSums examined by the projection check
PI_SAMPLES = 100

class VerifySummary(object):
    """
    Per-identity records {name, max_residual, tolerance, pass}; passes only
    if every record does.
    """

    def __init__(self, N, k, records):
        self.N = N
        self.k = k
        self.records = list(records)

    @property
    def passed(self):
        return all(record.passed for record in self.records)

    def failures(self):
        return [record for record in self.records if not record.passed]

    def to_json(self):
        return {'N': self.N, 'k': self.k, 'pass': self.passed,
                'records': [{'name': r.name, 'max_residual': r.max_residual, 'tolerance': r.tolerance,
                             'pass': r.passed} for r in self.records]}

    def to_markdown(self):
        lines = ['| identity | max residual | tolerance | pass |', '|---|---|---|---|']
        for r in self.records:
            lines.append('| {} | {:.3e} | {:.1e} | {} |'.format(r.name, r.max_residual, r.tolerance,
                                                                  'yes' if r.passed else 'NO'))
        return '\n'.join(lines)

def default_tolerances():
    """ The tolerances of the default config, keyed by identity name """
    config = {key.replace('-', '_'): value for key, value in yaml.safe_load(default_config).items()}
    return tolerances_from_options(config)

def tolerances_from_options(options):
    """ Map identity names to tolerances; options is a Namespace or a dict """
    lookup = options if isinstance(options, dict) else vars(options)
    return {name: (float(lookup[key]) if key else 0.0) for name, key in TOLERANCE_KEYS}

def random_expsums(count, seed=0, max_index=10, max_terms=6):
    """ Deterministic pseudo-random ExpSums with integer coefficients """
    rng = np.random.default_rng(seed)
    sums = []
    for _ in range(count):
        terms = int(rng.integers(1, max_terms + 1))
        indices = rng.integers(-max_index, max_index + 1, size=terms)
        values = rng.integers(-9, 10, size=terms)
        sums.append(ExpSum({int(n): float(a) for n, a in zip(indices, values) if a != 0}))
    return sums

def _relative(value, scale):
    return float(value) / max(1.0, float(scale))

def measure_identities(N, k, basis, grid=(25, 25), diagonal_guard=1e-3, c_factor_order=33):
    """
    Measure every identity on the basis; returns (name, residual) pairs in
    suite order.
    """
    indices = list(range(-N, N + 2))
    residuals = []

    worst = 0.0
    for m in range(0, 2 * N + 3):
        closed = moment_closed_form(m, k)
        worst = max(worst, abs(basis.table[m] - closed) / max(1.0, abs(closed)))
    residuals.append(('moment-closed-form', worst))

    residuals.append(('eigen', max(eigen_residual(basis.entry(n)) for n in indices)))
    residuals.append(('orthogonality', orthogonality_residual(basis)))
    residuals.append(('coefficient-realness', max(basis.poly(n).max_imag() for n in indices)))
    residuals.append(('reflection', max(reflection_check(n, basis) for n in indices)))

    worst = 0.0
    for n in range(1, N + 1):
        B, residual = negindex_check(n, k, basis)
        worst = max(worst, abs(B - k / (n + k)), residual)
    residuals.append(('negindex', worst))

    residuals.append(('reflected-action', max(reflected_action_check(n, k, basis) for n in range(1, N + 2))))
    residuals.append(('gamma-symmetry', norm_symmetry_check(N, basis)))

    worst = 0.0
    for m in range(-N, N + 1):
        poly = basis.poly(m)
        worst = max(worst, _relative(reconstruct(poly, N, k, basis).distance(poly), poly.max_abs()))
    for m in (-(N + 1), N + 1):
        poly = basis.poly(m)
        worst = max(worst, _relative(reconstruct(poly, N, k, basis).max_abs(), poly.max_abs()))
    residuals.append(('reproducing', worst))

    failures = sum(1 for s in random_expsums(PI_SAMPLES) if project_pi(project_pi(s)) != project_pi(s))
    residuals.append(('pi-idempotence', float(failures)))
    residuals.append(('boundary-orbit', 0.0 if boundary_orbit(N).members() == (-N, N + 1) else 1.0))

    nx, ny = grid
    line = np.linspace(-math.pi, math.pi, nx, endpoint=False)
    residuals.append(('numerator-diagonal', float(np.max(np.abs(numerator_N(N, k, line, line, basis))))))

    X, Y = np.meshgrid(line, np.linspace(-math.pi, math.pi, ny, endpoint=False), indexing='ij')
    numerator = numerator_N(N, k, X, Y, basis)
    residuals.append(('numerator-conjugate', float(np.max(np.abs(
        numerator_N(N, k, Y, X, basis) - np.conj(numerator))))))
    # include points straddling the diagonal so both c_factor branches are exercised
    near = X + np.linspace(-2 * diagonal_guard, 2 * diagonal_guard, ny)[None, :]
    factor = (X - near) * c_factor(N, k, X, near, basis, diagonal_guard, c_factor_order)
    residuals.append(('diagonal-factorization', max(
        float(np.max(np.abs(numerator - (X - Y) * c_factor(N, k, X, Y, basis, diagonal_guard, c_factor_order)))),
        float(np.max(np.abs(numerator_N(N, k, X, near, basis) - factor))))))

    offsets = np.linspace(0.01, 0.5, ny)
    xs = np.repeat(line, ny)
    ys = xs + np.tile(offsets, nx)
    quotient = c_factor(N, k, xs, ys, basis, diagonal_guard, c_factor_order, branch='quotient')
    integral = c_factor(N, k, xs, ys, basis, diagonal_guard, c_factor_order, branch='integral')
    residuals.append(('c-factor-branches', float(np.max(np.abs(quotient - integral)))))

    gx, gy = guarded_grid(nx, ny, diagonal_guard)
    residuals.append(('kernel-hermitian', float(np.max(np.abs(
        kernel_spectral(N, k, gy, gx, basis) - np.conj(kernel_spectral(N, k, gx, gy, basis)))))))
    residuals.append(('boundary-term', boundary_term_check(N, basis, X, Y)))

    gamma_sq = {n: basis.gamma_sq(n) for n in range(-N, N + 1)}
    scale = sum(gamma_sq.values())
    residuals.append(('leading-sum-regrouping', _relative(np.max(np.abs(
        leading_kernel_sum(N, gamma_sq, line) - orbit_regrouped_sum(N, gamma_sq, line))), scale)))
    return residuals

def run_identity_suite(N, k, basis, tolerances=None, **params):
    """
    Measure every identity and compare against its tolerance.
    """
    require(basis.k == k and basis.N >= N, 'Basis (N={}, k={}) does not match N={} k={}'.format(
        basis.N, basis.k, N, k))
    tolerances = tolerances or default_tolerances()
    start_time = timeit.default_timer()
    records = []
    for name, residual in measure_identities(N, k, basis, **params):
        tolerance = tolerances[name]
        records.append(VerifyRecord(name, float(residual), tolerance, bool(residual <= tolerance)))
        if residual > tolerance:
            logger.warning('Identity {} fails at N={} k={}: {:.3e} > {:.1e}'.format(name, N, k, residual, tolerance))
    summary = VerifySummary(N, k, records)
    logger.info('Identity suite N={} k={}: {} in {:.3f} seconds'.format(
        N, k, 'pass' if summary.passed else 'FAIL', timeit.default_timer() - start_time))
    return summary

def verify_subparser(parser):
    """
    Create a subparser for verify.  Should pass in results of subparsers.add_parser()
    """
    add_basis_args(parser)
    parser.add_argument('--grid', dest='verify_grid', type=str, default=None,
                        help='grid NxM on which kernel identities are sampled (default 25x25)')
    parser.add_argument('--guard', dest='diagonal_guard', type=float, default=None,
                        help='diagonal guard used by c_factor and the kernel checks')

def verify_summary(options):
    """ Build the basis at the configured parameters and run the suite """
    validate_basis_options(options)
    basis = build_basis(options.N, options.k, tol=options.tol, threads=options.basis_threads,
                        condition_threshold=options.condition_threshold, check_tol=None)
    return run_identity_suite(options.N, options.k, basis, tolerances_from_options(options),
                              grid=parse_grid(options.verify_grid), diagonal_guard=options.diagonal_guard,
                              c_factor_order=options.c_factor_order)

def verify_main(context, options):
    """
    cherednik-kit verify: write the VerifySummary; exit 1 when any identity fails.
    """
    summary = verify_summary(options)
    context.write_json(summary.to_json())
    return 0 if summary.passed else 1
