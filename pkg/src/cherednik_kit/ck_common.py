"""
ck_common.py: Shared helpers for cherednik-kit: the error types every module
raises, the require() precondition check, common command-line options, and
the deterministic JSON/CSV writers used for all outputs.

"""

import contextlib
import csv
import json
import logging
import math
import re
import sys

import numpy as np

logger = logging.getLogger(__name__)

# Exit codes shared by every subcommand
EXIT_OK = 0
EXIT_VERIFICATION_FAILED = 1
EXIT_INVALID_INPUT = 2
EXIT_NUMERICAL_FAILURE = 3

class InvalidInputError(ValueError):
    """
    Raised when a parameter, literal or precondition is out of range.
    """
    pass

class NumericalFailure(RuntimeError):
    """
    Raised when a computation could not reach its accuracy contract (quadrature
    depth cap, ill-conditioned Gram solve, delta-shrinking exhausted, ...).

    details is a dict with whatever partial information the failing routine
    could report (partial value, condition estimate, offending index).
    """
    def __init__(self, message, details=None):
        super(NumericalFailure, self).__init__(message)
        self.details = dict(details) if details else {}

def require(expression, message):
    if not expression:
        raise InvalidInputError(message)

def add_common_ck_parse_args(parser):
    """ centralize some shared io options and their defaults """
    parser.add_argument('--config', default=None, type=str,
                        help='Config file (YAML or JSON).  Use cherednik-kit generate-config to see defaults/create new file')
    parser.add_argument('--out', default=None, type=str,
                        help='Output file (default: stdout)')
    parser.add_argument('--format', default=None, choices=['json', 'csv', 'markdown'],
                        help='Output format (default depends on the subcommand)')
    parser.add_argument('--log-level', dest='log_level', default='WARNING',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
                        help='Logging level for messages on stderr')

def format_float(value):
    """
    Fixed 17-significant-digit rendering so identical runs produce identical bytes.
    Non-finite values have no JSON spelling and become null.
    """
    value = float(value)
    if not math.isfinite(value):
        return 'null'
    text = format(value, '.17g')
    if re.match(r'^-?\d+$', text):
        # keep floats distinguishable from ints
        text += '.0'
    return text

def to_json_text(document, indent=2, _level=0):
    """
    Render a document made of dicts, lists, strings, numbers, numpy scalars and
    complex numbers (as [re, im]) into JSON text. Key order is preserved.
    """
    pad = ' ' * (indent * (_level + 1))
    end_pad = ' ' * (indent * _level)
    if isinstance(document, np.ndarray):
        document = document.tolist()
    if isinstance(document, dict):
        if not document:
            return '{}'
        items = ['{}{}: {}'.format(pad, json.dumps(str(key)), to_json_text(val, indent, _level + 1))
                 for key, val in document.items()]
        return '{\n' + ',\n'.join(items) + '\n' + end_pad + '}'
    if isinstance(document, (list, tuple)):
        if not document:
            return '[]'
        if all(not isinstance(val, (dict, list, tuple, np.ndarray)) for val in document):
            # short rows of scalars stay on one line
            return '[' + ', '.join(to_json_text(val, indent, _level + 1) for val in document) + ']'
        items = [pad + to_json_text(val, indent, _level + 1) for val in document]
        return '[\n' + ',\n'.join(items) + '\n' + end_pad + ']'
    if document is None or isinstance(document, (bool, np.bool_)):
        return json.dumps(None if document is None else bool(document))
    if isinstance(document, (int, np.integer)):
        return str(int(document))
    if isinstance(document, (float, np.floating)):
        return format_float(document)
    if isinstance(document, (complex, np.complexfloating)):
        return '[{}, {}]'.format(format_float(document.real), format_float(document.imag))
    return json.dumps(str(document))

def csv_cell(value):
    if isinstance(value, (float, np.floating)):
        return format(float(value), '.17g')
    if value is None:
        return ''
    return str(value)

def write_csv(stream, header, rows):
    """ Write a header and rows with the fixed float formatting """
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([csv_cell(val) for val in row])

@contextlib.contextmanager
def open_output(path):
    """ Yield a text stream for path, or stdout when path is None or '-' """
    if path is None or path == '-':
        yield sys.stdout
        sys.stdout.flush()
    else:
        with open(path, 'w') as stream:
            yield stream

def parse_grid(text):
    """
    Parse a grid size literal NxM (e.g. 101x101) into a pair of ints.
    """
    match = re.match(r'^\s*(\d+)\s*[xX]\s*(\d+)\s*$', str(text))
    require(match is not None, 'Invalid --grid value "{}": expected NxM, e.g. 101x101'.format(text))
    nx, ny = int(match.group(1)), int(match.group(2))
    require(nx >= 1 and ny >= 1, 'Invalid --grid value "{}": both sizes must be positive'.format(text))
    return nx, ny

def parse_index_map(text, value_type=float, what='literal'):
    """
    Parse a comma-separated list of n:value pairs (e.g. "2:5,-1:7") into a dict.
    Repeated indices are summed.
    """
    result = {}
    if text is None or not str(text).strip():
        return result
    for token in str(text).split(','):
        token = token.strip()
        if not token:
            continue
        parts = token.split(':')
        require(len(parts) == 2, 'Invalid {} term "{}": expected n:value'.format(what, token))
        try:
            index = int(parts[0])
            value = value_type(parts[1].strip().replace(' ', ''))
        except ValueError:
            raise InvalidInputError('Invalid {} term "{}": expected integer:number'.format(what, token))
        result[index] = result.get(index, 0) + value
    return result

def float_list(values):
    """ Plain python floats for serialization """
    return [float(val) for val in np.asarray(values, dtype=float).ravel()]
