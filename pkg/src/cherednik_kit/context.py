"""
context.py: Defines a cherednik-kit context, which contains (and hides) all the
config file values and the output sink, so subcommands get one object to pass
around instead of a loose namespace plus a file handle.

"""

import datetime
import logging
import threading
from argparse import Namespace
from importlib import metadata

from cherednik_kit.ck_common import open_output, to_json_text, write_csv
from cherednik_kit.ck_config import apply_config_file_args

logger = logging.getLogger(__name__)

def package_version():
    try:
        return metadata.version('cherednik-kit')
    except metadata.PackageNotFoundError:
        # running from a source tree that was never installed
        return 'unknown'

def write_info_file(context, argv, path):
    """
    Write the command line, time, version and merged configuration next to the
    output.  Documents themselves never carry this, so identical runs produce
    identical bytes.
    """
    with open(path, 'w') as f:
        if argv:
            f.write('{}\n\n'.format(' '.join(argv)))
        f.write('{}\ncherednik-kit version {}\nConfiguration:\n'.format(datetime.datetime.now(), package_version()))
        for key, val in sorted(context.config.__dict__.items()):
            f.write('{}: {}\n'.format(key, val))

class Context(object):
    """
    Represents a cherednik-kit context, necessary to run a subcommand.
    """

    def __init__(self, overrides=Namespace()):
        """
        Make a new context from a Namespace of overrides for the default
        configuration (normally the parsed command line).

        Overrides can also have a "config" key, in which case that config file
        will be loaded.
        """
        self.config = apply_config_file_args(overrides)
        # output writing is serialized
        self.lock = threading.Lock()
        self.written = []

    @property
    def out(self):
        return getattr(self.config, 'out', None)

    def write_text(self, text):
        with self.lock:
            with open_output(self.out) as stream:
                stream.write(text)
                if not text.endswith('\n'):
                    stream.write('\n')
            self.written.append(self.out or '-')

    def write_json(self, document):
        """ Deterministic JSON (17 significant digits) to the output """
        self.write_text(to_json_text(document))

    def write_csv(self, header, rows):
        with self.lock:
            with open_output(self.out) as stream:
                write_csv(stream, header, rows)
            self.written.append(self.out or '-')

    def write_info(self, argv):
        """ Sidecar metadata file for file outputs; nothing for stdout """
        if self.out is None or self.out == '-':
            return None
        path = '{}.info.txt'.format(self.out)
        write_info_file(self, argv, path)
        logger.info('Wrote run information to {}'.format(path))
        return path
