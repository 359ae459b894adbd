"""
ck_config.py: Default configuration values all here (and only here), as well as logic
for reading and generating config files.

"""

import argparse
import logging
import os
import sys
import textwrap

import yaml

from cherednik_kit.ck_common import require, InvalidInputError

logger = logging.getLogger(__name__)

default_config = textwrap.dedent("""
# cherednik-kit configuration file (created by cherednik-kit generate-config)
# This configuration file is formatted in YAML (JSON files are accepted too).
# Simply write the value (at least one space) after the colon.
#
# Comments (beginning with #) do not need to be removed.
# Command-line options take priority over parameters in this file.
######################################################################################################################

###########################################
### Default problem parameters          ###

# Multiplicity parameter k >= 0
k: 1.0

# Truncation level, 0 <= N <= max-N
N: 4

# Largest truncation level accepted
max-N: 64

# Lebesgue exponent p > 1
p: 2.0

# Mirror-local window half-width, 0 < delta < pi/4 (default pi/8)
delta: 0.39269908169872414

# Weight parameters used when no --weight literal is given
family: 'power'
alpha: 0.5
beta: 0.0
gamma: 1.0

###########################################
### Quadrature                          ###

# Absolute tolerance for moments and weighted quadrature
tol: 1.0e-12

# Gauss-Legendre order of the coarse rule on each panel (the fine rule doubles it)
quad-order: 20

# Bisection depth after which adaptive quadrature gives up
quad-max-depth: 50

###########################################
### Eigenbasis                          ###

# Largest accepted condition number of a Gram system
condition-threshold: 1.0e+12

# Worker threads used to construct basis entries
basis-threads: 4

###########################################
### Kernel and local decomposition      ###

# Minimum distance of x-y to 2*pi*Z for the closed boundary form
diagonal-guard: 1.0e-3

# Gauss-Legendre order for the s-integral of the diagonal factor
c-factor-order: 33

# Default evaluation grid for kernel compare / export-grid
grid: '101x101'

# Grid used by the identity suite in verify
verify-grid: '25x25'

# Sample count for A_N on [-delta, delta]
local-grid: 1025

# Maximum number of delta halvings while looking for inf |A_N| > 0
delta-halvings: 20

# |A_N| at or below this value counts as vanishing
a-floor: 1.0e-12

# Side of the square grid on which R_N is tabulated
patch-grid: 65

# Number of x points at which the pointwise identity is checked
identity-x-points: 9

# Digits used by the extended-precision kernel recomputation
extended-dps: 50

###########################################
### Weighted diagnostics                ###

# Deepest dyadic shell examined
shell-max: 48

# Gauss-Legendre order per shell panel
shell-order: 16

# Panel cap per shell for oscillatory weights
shell-panel-cap: 65536

# Margin around ratio 1 (and exponent 1) for the shell classification
ratio-margin: 1.0e-3
log-margin: 5.0e-2

# Pairing for dual norms: lebesgue or weighted
pairing: 'lebesgue'

# Threshold scan defaults
alpha-min: null
alpha-max: null
steps: 12

# Distance from p-1 within which a scan result counts as locating the threshold
scan-tol: 0.05

# Sample count for the Example A envelope check
envelope-points: 10000

###########################################
### Verification tolerances             ###
eigen-tol: 1.0e-9
orthogonality-tol: 1.0e-9
realness-tol: 1.0e-12
reflection-tol: 1.0e-10
negindex-tol: 1.0e-9
gamma-tol: 1.0e-10
reproduce-tol: 1.0e-9
diagonal-tol: 1.0e-12
factor-tol: 1.0e-10
branch-tol: 1.0e-8
hermitian-tol: 1.0e-12
moment-tol-check: 1.0e-10
identity-tol: 1.0e-7
""")

def generate_config():
    return default_config

def apply_config_file_args(args):
    """
    Merge args from the config file and the parser, giving priority to the parser.
    """

    # If no config file given, we use the default one
    if 'config' not in list(args.__dict__.keys()) or args.config is None:
        config = generate_config()
    else:
        require(os.path.exists(args.config), 'Config, {}, not found. Please run '
            '"cherednik-kit generate-config > {}" to create.'.format(args.config, args.config))
        with open(args.config) as conf:
            config = conf.read()

    # Parse config, starting from the defaults so partial files are fine
    try:
        parsed = yaml.safe_load(config) or {}
    except yaml.YAMLError as e:
        raise InvalidInputError('Config {} is not valid YAML/JSON: {}'.format(args.config, e))
    require(isinstance(parsed, dict), 'Config {} must be a mapping of option names to values'.format(args.config))
    merged = yaml.safe_load(default_config)
    merged.update(parsed)
    parsed_config = {x.replace('-', '_'): y for x, y in list(merged.items())}
    options = argparse.Namespace(**parsed_config)

    # Add in options from the program arguments to the arguments in the config file
    #   program arguments that are also present in the config file will overwrite the
    #   arguments in the config file
    for args_key in args.__dict__:
        if (args.__dict__[args_key] is not None) or (args_key not in list(options.__dict__.keys())):
            options.__dict__[args_key] = args.__dict__[args_key]

    return options

def config_subparser(parser):
    """
    Create a subparser for config.  Should pass in results of subparsers.add_parser()
    """

    parser.add_argument("--config", type=argparse.FileType('w'), default=sys.stdout,
        help="config file to write to")

def config_main(options):
    """ config just prints out a file """

    options.config.write(generate_config())
    if options.config is not sys.stdout:
        options.config.close()
