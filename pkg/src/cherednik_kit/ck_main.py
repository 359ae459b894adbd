#!/usr/bin/env python
"""
ck_main.py: Command-line front end.  Builds a RunPlan from the arguments,
runs the subcommand through a Context and maps the outcome to an exit code.

"""
import argparse
import logging
import math
import sys
from collections import namedtuple

from cherednik_kit.ck_common import (add_common_ck_parse_args, InvalidInputError, NumericalFailure, EXIT_OK,
                                     EXIT_INVALID_INPUT, EXIT_NUMERICAL_FAILURE)
from cherednik_kit.ck_config import apply_config_file_args, config_subparser, config_main
from cherednik_kit.ck_eigenbasis import basis_subparser, basis_main
from cherednik_kit.ck_kernel import kernel_subparser, kernel_main
from cherednik_kit.ck_orbits import orbits_subparser, orbits_main
from cherednik_kit.ck_report import report_subparser, report_main
from cherednik_kit.ck_verify import verify_subparser, verify_main
from cherednik_kit.ck_weighted import weight_subparser, weight_main, localize_subparser, localize_main
from cherednik_kit.context import Context

logger = logging.getLogger(__name__)

RunPlan = namedtuple('RunPlan', ['command', 'parameters', 'output', 'format'])

HANDLERS = {
    'basis': basis_main,
    'verify': verify_main,
    'kernel': kernel_main,
    'localize': localize_main,
    'orbits': orbits_main,
    'weight': weight_main,
    'report': report_main,
}

def make_parser():
    parser = argparse.ArgumentParser(prog='cherednik-kit', description=main.__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter)

    subparsers = parser.add_subparsers(dest='command')
    subparsers.required = True

    # Config subparser
    parser_config = subparsers.add_parser('generate-config',
                                          help='Prints default config file')
    config_subparser(parser_config)

    parser_basis = subparsers.add_parser('basis', help='Construct the eigenfunctions E_n, n in [-N, N+1]')
    basis_subparser(parser_basis)

    parser_verify = subparsers.add_parser('verify', help='Run the identity suite')
    verify_subparser(parser_verify)

    parser_kernel = subparsers.add_parser('kernel', help='Evaluate or compare the truncated kernel forms')
    kernel_subparser(parser_kernel)

    parser_localize = subparsers.add_parser('localize', help='Mirror-local rank-one decomposition of K_N')
    localize_subparser(parser_localize)

    parser_orbits = subparsers.add_parser('orbits', help='Reflection orbits, ExpSum projection and asymptotics')
    orbits_subparser(parser_orbits)

    parser_weight = subparsers.add_parser('weight', help='Weighted L^p criterion, dual norms and scans')
    weight_subparser(parser_weight)

    parser_report = subparsers.add_parser('report', help='Aggregate markdown report')
    report_subparser(parser_report)

    for subparser in (parser_basis, parser_verify, parser_kernel, parser_localize, parser_orbits, parser_weight,
                      parser_report):
        add_common_ck_parse_args(subparser)
    return parser

def _check_ranges(parser, options):
    """ Reject out-of-range flags with a usage error naming the flag """
    try:
        merged = apply_config_file_args(options)
    except InvalidInputError as e:
        parser.error(str(e))
    if getattr(options, 'k', None) is not None and options.k < 0:
        parser.error('argument --k: must be nonnegative, got {}'.format(options.k))
    if getattr(options, 'N', None) is not None and not 0 <= options.N <= merged.max_N:
        parser.error('argument --N: must be in [0, {}], got {}'.format(merged.max_N, options.N))
    if getattr(options, 'p', None) is not None and not options.p > 1:
        parser.error('argument --p: must be greater than 1, got {}'.format(options.p))
    if getattr(options, 'delta', None) is not None and not 0 < options.delta < math.pi / 4:
        parser.error('argument --delta: must be in (0, pi/4), got {}'.format(options.delta))
    if getattr(options, 'tol', None) is not None and not options.tol > 0:
        parser.error('argument --tol: must be positive, got {}'.format(options.tol))

def parse_args(args=None):
    """
    Takes in the command-line arguments list (args), and returns a RunPlan
    with fields for all the options.  Unknown flags and out-of-range values
    exit with status 2.
    """
    parser = make_parser()
    options = parser.parse_args(args)
    if options.command != 'generate-config':
        _check_ranges(parser, options)
    return RunPlan(options.command, options, getattr(options, 'out', None), getattr(options, 'format', None))

def execute(plan, argv=None):
    """
    Run the plan and return its exit code: 0 success, 1 verification failure,
    2 invalid input, 3 numerical failure.
    """
    # Write out our config file
    if plan.command == 'generate-config':
        config_main(plan.parameters)
        return EXIT_OK

    try:
        context = Context(plan.parameters)
        handler = HANDLERS.get(plan.command)
        if handler is None:
            raise RuntimeError('Unimplemented subcommand {}'.format(plan.command))
        code = handler(context, context.config)
        context.write_info(argv)
    except InvalidInputError as e:
        logger.error('Invalid input: {}'.format(e))
        return EXIT_INVALID_INPUT
    except NumericalFailure as e:
        logger.error('Numerical failure: {}'.format(e))
        for key, value in sorted(e.details.items()):
            logger.error('  {}: {}'.format(key, value))
        return EXIT_NUMERICAL_FAILURE
    return code

def main():
    """
    cherednik-kit: rank-one non-symmetric Cherednik eigenfunctions E_n^k, the
    truncated reconstruction kernel K_N and its mirror-local structure, and
    weighted L^p diagnostics near the mirror point.

    General usage:
    1. Type "cherednik-kit generate-config": Produce an editable config file.
    2. Type "cherednik-kit basis --k 1 --N 4": Emit the basis as JSON.
    3. Type "cherednik-kit verify --k 1 --N 4": Run the identity suite.
    4. Type "cherednik-kit kernel compare --k 0 --N 0": Compare the kernel forms.
    5. Type "cherednik-kit localize --k 1 --N 2": Rank-one decomposition near x = 0.
    6. Type "cherednik-kit orbits report --N 3": Orbits of the window and their cases.
    7. Type "cherednik-kit weight scan --p 2": Locate the integrability threshold.
    8. Type "cherednik-kit report": Everything above as one markdown document.
    """
    plan = parse_args(sys.argv[1:])
    logging.basicConfig(level=getattr(plan.parameters, 'log_level', 'WARNING'),
                        format='%(asctime)s %(name)s %(levelname)s: %(message)s')
    sys.exit(execute(plan, sys.argv))

if __name__ == '__main__':
    main()
