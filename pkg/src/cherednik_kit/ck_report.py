"""
ck_report.py: One markdown document aggregating the identity suite, the kernel
form comparison, the mirror-local decomposition and the weighted threshold
scans at the configured parameters.

"""

import logging
import math
import timeit

from cherednik_kit.ck_common import parse_grid, require, InvalidInputError
from cherednik_kit.ck_eigenbasis import add_basis_args, validate_basis_options, build_basis
from cherednik_kit.ck_kernel import add_kernel_args, compare_forms, guarded_grid, local_decompose
from cherednik_kit.ck_verify import run_identity_suite, tolerances_from_options
from cherednik_kit.ck_weighted import (WeightSpec, add_weight_args, criterion_integral, threshold_scan,
                                       shell_params)

logger = logging.getLogger(__name__)

# Exponents at which the threshold alpha* = p - 1 is located
SCAN_EXPONENTS = (1.5, 2.0, 3.0)

def report_subparser(parser):
    """
    Create a subparser for report.  Should pass in results of subparsers.add_parser()
    """
    add_basis_args(parser)
    add_kernel_args(parser)
    add_weight_args(parser)
    parser.add_argument('--p', type=float, default=None, help='Lebesgue exponent for the weight criterion')

def _scan_section(options):
    lines = ['| p | alpha* | bracket | expected | pass |', '|---|---|---|---|---|']
    passed = True
    for p in SCAN_EXPONENTS:
        try:
            result = threshold_scan(p, options.delta, ((p - 1.0) - 0.5, (p - 1.0) + 0.5), options.steps,
                                    margin=options.ratio_margin, log_margin=options.log_margin,
                                    **shell_params(options))
        except InvalidInputError as e:
            lines.append('| {} | - | - | {} | NO ({}) |'.format(p, p - 1.0, e))
            passed = False
            continue
        width = result.bracket[1] - result.bracket[0]
        found = abs(result.alpha_star - (p - 1.0)) <= max(width, options.scan_tol)
        passed = passed and found
        lines.append('| {} | {:.6f} | [{:.6f}, {:.6f}] | {} | {} |'.format(
            p, result.alpha_star, result.bracket[0], result.bracket[1], p - 1.0, 'yes' if found else 'NO'))
    return '\n'.join(lines), passed

def build_report(options):
    """
    Run every stage and return (markdown text, overall pass flag).
    """
    validate_basis_options(options)
    require(options.p is not None and options.p > 1, '--p must be greater than 1, got {}'.format(options.p))
    require(0 < options.delta < math.pi / 4, '--delta must be in (0, pi/4), got {}'.format(options.delta))
    N, k = options.N, options.k
    start_time = timeit.default_timer()

    basis = build_basis(N, k, tol=options.tol, threads=options.basis_threads,
                        condition_threshold=options.condition_threshold, check_tol=None)
    summary = run_identity_suite(N, k, basis, tolerances_from_options(options),
                                 grid=parse_grid(options.verify_grid), diagonal_guard=options.diagonal_guard,
                                 c_factor_order=options.c_factor_order)

    nx, ny = parse_grid(options.grid)
    xs, ys = guarded_grid(nx, ny, options.diagonal_guard)
    discrepancy = compare_forms(N, k, xs, ys, basis, options.diagonal_guard, grid={'nx': nx, 'ny': ny})

    localdec = local_decompose(N, k, options.delta, basis, grid_points=options.local_grid,
                               max_halvings=options.delta_halvings, a_floor=options.a_floor,
                               patch_points=options.patch_grid)

    spec = WeightSpec.from_options(options)
    criterion = criterion_integral(spec, options.p, options.delta, margin=options.ratio_margin,
                                   log_margin=options.log_margin, **shell_params(options))
    scan_table, scans_passed = _scan_section(options)

    sections = [
        '# cherednik-kit report (N={}, k={})'.format(N, k),
        '',
        '## Identity suite',
        '',
        summary.to_markdown(),
        '',
        'Overall: {}'.format('pass' if summary.passed else 'FAIL'),
        '',
        '## Kernel forms',
        '',
        'Spectral sum against the closed boundary form on a {}x{} grid ({} points outside the diagonal '
        'guard {}).'.format(nx, ny, discrepancy.grid['points'], options.diagonal_guard),
        '',
        '| max abs difference | at x | at y |',
        '|---|---|---|',
        '| {:.6e} | {:.6f} | {:.6f} |'.format(discrepancy.max_abs_difference, *discrepancy.argmax),
        '',
        '## Mirror-local decomposition',
        '',
        '| delta requested | delta used | halvings | inf abs A_N | sup abs R_N | gamma_(N+1)^2 |',
        '|---|---|---|---|---|---|',
        '| {:.6f} | {:.6f} | {} | {:.6e} | {:.6e} | {:.6e} |'.format(
            localdec.delta_request, localdec.delta, localdec.halvings, localdec.A_inf, localdec.R_bound,
            localdec.gamma_sq),
        '',
        '## Weighted criterion',
        '',
        'Weight `{}` at p={} on [-{}, {}]: **{}** (shell ratio {:.6f}, {}).'.format(
            spec.literal(), options.p, options.delta, options.delta, criterion.classification,
            criterion.shell_ratio,
            'estimate {:.6e}'.format(criterion.integral_estimate) if criterion.integral_estimate is not None
            else 'partial sum {:.6e}'.format(criterion.partial_sum)),
        '',
        '## Threshold scans (power weights, lebesgue pairing)',
        '',
        scan_table,
        '',
    ]
    logger.info('Report built in {:.3f} seconds'.format(timeit.default_timer() - start_time))
    return '\n'.join(sections), summary.passed and scans_passed

def report_main(context, options):
    """
    cherednik-kit report: write the markdown report; exit 1 when the identity
    suite fails or a scan misses p - 1.
    """
    text, passed = build_report(options)
    context.write_text(text)
    return 0 if passed else 1
