import io
import json
import logging
import os
import shutil
import tempfile
import textwrap
import filecmp
from contextlib import redirect_stdout
from unittest import TestCase

import yaml

from cherednik_kit.ck_config import default_config
from cherednik_kit.ck_main import parse_args, execute
from cherednik_kit.ck_verify import TOLERANCE_KEYS
from cherednik_kit.ck_weighted import SCAN_CSV_HEADER

log = logging.getLogger(__name__)


class CommandLineTest(TestCase):
    """
    Run cherednik-kit subcommands end to end and check their exit codes and outputs.
    """

    @classmethod
    def setUpClass(cls):
        super(CommandLineTest, cls).setUpClass()
        logging.basicConfig(level=logging.INFO)

    def setUp(self):
        self.workdir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.workdir)

    def _path(self, name):
        return os.path.join(self.workdir, name)

    def _run(self, args):
        """ Parse and execute a command line, returning the exit code """
        plan = parse_args(args)
        return execute(plan, ['cherednik-kit'] + args)

    def _write_config(self, name, text):
        path = self._path(name)
        with open(path, 'w') as f:
            f.write(textwrap.dedent(text))
        return path

    def _load(self, name):
        with open(self._path(name)) as f:
            return json.load(f)

    def test_parse_args(self):
        plan = parse_args(['basis', '--k', '1', '--N', '4', '--out', 'x.json'])
        self.assertEqual(plan.command, 'basis')
        self.assertEqual(plan.parameters.k, 1.0)
        self.assertEqual(plan.parameters.N, 4)
        self.assertEqual(plan.output, 'x.json')
        plan = parse_args(['weight', 'scan', '--p', '3', '--format', 'json'])
        self.assertEqual((plan.command, plan.parameters.action, plan.format), ('weight', 'scan', 'json'))

    def test_out_of_range_flags(self):
        for args in (['basis', '--N', '100'], ['basis', '--k', '-1'], ['weight', 'criterion', '--p', '1'],
                     ['weight', 'criterion', '--delta', '1.0'], ['basis', '--tol', '0'], ['basis', '--bogus'],
                     ['frobnicate']):
            with self.assertRaises(SystemExit) as cm:
                parse_args(args)
            self.assertEqual(cm.exception.code, 2, ' '.join(args))

    def test_basis_output(self):
        self.assertEqual(self._run(['basis', '--k', '1', '--N', '0', '--out', self._path('basis.json')]), 0)
        document = self._load('basis.json')
        self.assertEqual((document['N'], document['k']), (0, 1.0))
        self.assertEqual([entry['n'] for entry in document['entries']], [0, 1])
        self.assertEqual([entry['eigenvalue'] for entry in document['entries']], [-1.0, 2.0])
        self.assertEqual(document['entries'][0]['coeffs'], [[0, 1.0, 0.0]])
        self.assertTrue(os.path.exists(self._path('basis.json.info.txt')))

    def test_output_is_deterministic(self):
        for name in ('first.json', 'second.json'):
            self.assertEqual(self._run(['basis', '--k', '0.5', '--N', '3', '--out', self._path(name)]), 0)
        self.assertTrue(filecmp.cmp(self._path('first.json'), self._path('second.json'), shallow=False))

    def test_info_file(self):
        self._run(['basis', '--k', '1', '--N', '1', '--out', self._path('basis.json')])
        with open(self._path('basis.json.info.txt')) as f:
            info = f.read()
        self.assertIn('cherednik-kit basis', info)
        self.assertIn('condition_threshold: ', info)
        with open(self._path('basis.json')) as f:
            self.assertNotIn('version', f.read())

    def test_stdout_output(self):
        stream = io.StringIO()
        with redirect_stdout(stream):
            self.assertEqual(self._run(['basis', '--k', '0', '--N', '0']), 0)
        self.assertEqual(json.loads(stream.getvalue())['N'], 0)

    def test_kernel_compare(self):
        out = self._path('compare.json')
        self.assertEqual(self._run(['kernel', 'compare', '--k', '0', '--N', '0', '--grid', '21x21',
                                    '--out', out]), 0)
        document = self._load('compare.json')
        self.assertLessEqual(document['max_abs_difference'], 1e-12)
        grid = document['grid']
        self.assertEqual((grid['nx'], grid['ny'], grid['points']), (21, 21, 420))

    def test_kernel_eval_on_diagonal(self):
        self.assertEqual(self._run(['kernel', 'eval', '--k', '1', '--N', '2', '--x', '0.3', '--y', '0.3',
                                    '--out', self._path('eval.json')]), 0)
        document = self._load('eval.json')
        self.assertIsNone(document['boundary'])
        self.assertEqual(len(document['spectral']), 2)
        self.assertEqual(self._run(['kernel', 'eval', '--k', '1', '--N', '2', '--x', '0.3',
                                    '--out', self._path('eval.json')]), 2)

    def test_kernel_export_grid(self):
        self.assertEqual(self._run(['kernel', 'export-grid', '--k', '0.5', '--N', '1', '--grid', '5x5',
                                    '--out', self._path('grid.csv')]), 0)
        with open(self._path('grid.csv')) as f:
            lines = f.read().splitlines()
        self.assertEqual(len(lines), 1 + 20)

    def test_verify(self):
        self.assertEqual(self._run(['verify', '--k', '1', '--N', '4', '--out', self._path('verify.json')]), 0)
        document = self._load('verify.json')
        self.assertTrue(document['pass'])
        self.assertEqual([record['name'] for record in document['records']], [name for name, _ in TOLERANCE_KEYS])
        for record in document['records']:
            self.assertLessEqual(record['max_residual'], record['tolerance'], record['name'])

    def test_verify_failure_exit_code(self):
        config = self._write_config('strict.yaml', """
            eigen-tol: 0.0
            orthogonality-tol: 0.0
        """)
        self.assertEqual(self._run(['verify', '--k', '1', '--N', '2', '--config', config,
                                    '--out', self._path('verify.json')]), 1)
        self.assertFalse(self._load('verify.json')['pass'])

    def test_weight_criterion_divergent(self):
        config = self._write_config('fast.yaml', """
            shell-panel-cap: 256
        """)
        self.assertEqual(self._run(['weight', 'criterion', '--weight', 'examplea:alpha=2,beta=0,gamma=1',
                                    '--p', '2', '--config', config, '--out', self._path('criterion.json')]), 0)
        document = self._load('criterion.json')
        self.assertEqual(document['classification'], 'divergent')
        self.assertTrue(document['divergent'])
        self.assertIsNone(document['integral_estimate'])

    def test_weight_criterion_from_family_flags(self):
        self.assertEqual(self._run(['weight', 'criterion', '--family', 'power', '--alpha', '0.5', '--p', '2',
                                    '--delta', '0.5', '--out', self._path('criterion.json')]), 0)
        document = self._load('criterion.json')
        self.assertEqual(document['classification'], 'finite')
        self.assertAlmostEqual(document['integral_estimate'], 4 * 0.5 ** 0.5, delta=1e-8)

    def test_weight_bad_literal(self):
        self.assertEqual(self._run(['weight', 'criterion', '--weight', 'cosine:alpha=1', '--p', '2',
                                    '--out', self._path('criterion.json')]), 2)

    def test_weight_scan_csv(self):
        self.assertEqual(self._run(['weight', 'scan', '--p', '2', '--steps', '8', '--out', self._path('scan.csv')]), 0)
        with open(self._path('scan.csv')) as f:
            lines = f.read().splitlines()
        self.assertEqual(lines[0], ','.join(SCAN_CSV_HEADER))
        self.assertEqual(len(lines), 1 + 2 + 8)
        self.assertTrue(lines[1].startswith('0.5'))

    def test_weight_scan_json(self):
        self.assertEqual(self._run(['weight', 'scan', '--p', '3', '--steps', '10', '--format', 'json',
                                    '--out', self._path('scan.json')]), 0)
        document = self._load('scan.json')
        self.assertTrue(document['pass'])
        self.assertLessEqual(abs(document['alpha_star'] - 2.0), 0.05)

    def test_weight_scan_one_sided_range(self):
        self.assertEqual(self._run(['weight', 'scan', '--p', '2', '--alpha-min', '0.1', '--alpha-max', '0.2',
                                    '--out', self._path('scan.csv')]), 2)

    def test_weight_envelope(self):
        self.assertEqual(self._run(['weight', 'envelope', '--weight', 'examplea:alpha=0.5,beta=1,gamma=1',
                                    '--p', '2', '--points', '2000', '--out', self._path('envelope.json')]), 0)
        self.assertTrue(self._load('envelope.json')['pass'])

    def test_weight_dualnorm(self):
        self.assertEqual(self._run(['weight', 'dualnorm', '--weight', 'power:alpha=0', '--p', '2', '--delta', '0.5',
                                    '--out', self._path('dual.json')]), 0)
        document = self._load('dual.json')
        self.assertAlmostEqual(document['closed_form_value'], 1.0, delta=1e-10)
        self.assertFalse(document['divergent'])

    def test_generate_config(self):
        path = self._path('config.yaml')
        self.assertEqual(self._run(['generate-config', '--config', path]), 0)
        with open(path) as f:
            text = f.read()
        self.assertEqual(text, default_config)
        parsed = yaml.safe_load(text)
        self.assertEqual(parsed['max-N'], 64)
        # a generated config is accepted back
        self.assertEqual(self._run(['basis', '--N', '0', '--config', path, '--out', self._path('basis.json')]), 0)

    def test_config_values_and_flag_priority(self):
        config = self._write_config('small.yaml', """
            k: 0.0
            N: 1
        """)
        self.assertEqual(self._run(['basis', '--config', config, '--out', self._path('basis.json')]), 0)
        document = self._load('basis.json')
        self.assertEqual((document['N'], document['k']), (1, 0.0))
        self.assertEqual(self._run(['basis', '--config', config, '--N', '0', '--out', self._path('basis.json')]), 0)
        self.assertEqual(self._load('basis.json')['N'], 0)

    def test_bad_config(self):
        config = self._write_config('bad.yaml', """
            k: [1.0
        """)
        with self.assertRaises(SystemExit) as cm:
            parse_args(['basis', '--config', config])
        self.assertEqual(cm.exception.code, 2)
        with self.assertRaises(SystemExit) as cm:
            parse_args(['basis', '--config', self._path('missing.yaml')])
        self.assertEqual(cm.exception.code, 2)

    def test_localize(self):
        self.assertEqual(self._run(['localize', '--k', '1', '--N', '2', '--f', '0:1,1:0.5',
                                    '--out', self._path('local.json')]), 0)
        document = self._load('local.json')
        self.assertGreater(document['A_inf'], 0)
        self.assertLessEqual(document['identity_check']['identity_residual'], 1e-6)

    def test_localize_numerical_failure(self):
        config = self._write_config('floor.yaml', """
            a-floor: 1.0e+6
            delta-halvings: 1
        """)
        out = self._path('local.json')
        self.assertEqual(self._run(['localize', '--k', '1', '--N', '2', '--config', config, '--out', out]), 3)
        self.assertFalse(os.path.exists(out + '.info.txt'))

    def test_report(self):
        config = self._write_config('fast.yaml', """
            shell-panel-cap: 256
            grid: '21x21'
            verify-grid: '11x11'
        """)
        self.assertEqual(self._run(['report', '--k', '1', '--N', '2', '--config', config,
                                    '--out', self._path('report.md')]), 0)
        with open(self._path('report.md')) as f:
            text = f.read()
        self.assertTrue(text.startswith('#'))
        self.assertIn('reproducing', text)

    def test_orbits_report(self):
        self.assertEqual(self._run(['orbits', 'report', '--N', '3', '--out', self._path('orbits.json')]), 0)
        document = self._load('orbits.json')
        self.assertEqual([orbit['m'] for orbit in document['orbits']], [1, 2, 3, 4])
        self.assertEqual([orbit['case'] for orbit in document['orbits']], ['interior'] * 3 + ['low_only'])
        self.assertEqual(document['boundary'], {'n': 4, 'partner': -3, 'm': 4, 'case': 'low_only', 'inside': [-3]})
        self.assertEqual(self._run(['orbits', 'report', '--N', '3', '--n', '-7', '--out', self._path('one.json')]), 0)
        self.assertEqual(self._load('one.json')['case'], 'outside')

    def test_orbits_project(self):
        self.assertEqual(self._run(['orbits', 'project', '--expsum', '2:5,-1:7,0:1',
                                    '--out', self._path('project.json')]), 0)
        document = self._load('project.json')
        self.assertEqual(document['projection'], '1:1.0,2:1.0')
        self.assertEqual(document['projection_coefficients'], '2:5.0')
        self.assertEqual(document['reflected'], '-1:5.0,1:1.0,2:7.0')
        self.assertEqual(document['blocks'], [{'m': 1, 'ell': 0, 'a_m': 0.0, 'a_ell': 1.0},
                                              {'m': 2, 'ell': -1, 'a_m': 5.0, 'a_ell': 7.0}])

    def test_orbits_asymptotic(self):
        self.assertEqual(self._run(['orbits', 'asymptotic', '--expsum', '2:5,-1:7', '--x', '0.5', '--x', '3',
                                    '--out', self._path('asymptotic.json')]), 0)
        document = self._load('asymptotic.json')
        block = document['blocks'][0]
        self.assertEqual(block['dominant'], 2)
        self.assertAlmostEqual(block['leading_estimate'], 5.0, places=12)
        for row in document['evaluations']:
            self.assertAlmostEqual(row['factored'], row['direct'], delta=1e-12 * abs(row['direct']))

    def test_orbits_bad_input(self):
        self.assertEqual(self._run(['orbits', 'project', '--out', self._path('x.json')]), 2)
        self.assertEqual(self._run(['orbits', 'project', '--expsum', '2:x', '--out', self._path('x.json')]), 2)
        self.assertEqual(self._run(['orbits', 'asymptotic', '--expsum', '2:5', '--x-max', '1',
                                    '--out', self._path('x.json')]), 2)
        with self.assertRaises(SystemExit) as cm:
            parse_args(['orbits', 'report', '--N', '100'])
        self.assertEqual(cm.exception.code, 2)
