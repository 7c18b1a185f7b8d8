""" Module for unittesting the offtab command line """
import io
import os
import sys
import json
import shutil
import tempfile
import unittest
import logging
from contextlib import redirect_stdout, redirect_stderr
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))
from offtab.cli import main
from offtab.io import load_mdp, load_dataset


class TestCLI(unittest.TestCase):
    """ Class for testing the subcommands end to end """

    def setUp(self):
        """ Setup the tests """
        logger = logging.getLogger()
        logger.setLevel(logging.CRITICAL)
        self.dir = tempfile.mkdtemp()
        self.mdp = os.path.join(self.dir, 'mdp.json')
        self.data = os.path.join(self.dir, 'data.jsonl')
        self.assertEqual(self._call('--seed', '2', '--out', self.mdp, 'generate',
                                    '--S', '2', '--A', '2', '--H', '2')[0], 0)
        self.assertEqual(self._call('--seed', '5', '--out', self.data, 'roll',
                                    '--mdp', self.mdp, '--n', '40')[0], 0)

    def tearDown(self):
        shutil.rmtree(self.dir)

    def _call(self, *argv):
        out, err = io.StringIO(), io.StringIO()
        with redirect_stdout(out), redirect_stderr(err):
            code = main(list(argv))
        return code, out.getvalue(), err.getvalue()

    # 0. data generation
    def test_generate_and_roll(self):
        mdp = load_mdp(self.mdp)
        data = load_dataset(self.data)
        self.assertEqual((mdp.S, mdp.A, mdp.H), (2, 2, 2))
        self.assertEqual(data.n, 40)
        self.assertEqual(data.base_seed, 5)

    def test_fit(self):
        code, out, _ = self._call('fit', '--mdp', self.mdp, '--dataset', self.data)
        self.assertEqual(code, 0)
        report = json.loads(out)
        self.assertEqual(report['n'], 40)
        self.assertGreaterEqual(report['max_l1_row_error'], 0.0)

    def test_plan(self):
        code, out, _ = self._call('plan', '--mdp', self.mdp, '--dataset', self.data)
        self.assertEqual(code, 0)
        report = json.loads(out)
        self.assertEqual(len(report['actions']), 2)
        self.assertTrue(all(gap >= -1e-12 for gap in report['suboptimality']))

    # 1. uniform OPE
    def test_ope_global_and_demo(self):
        code, out, _ = self._call('ope', 'global', '--mdp', self.mdp, '--dataset', self.data)
        self.assertEqual(code, 0)
        self.assertEqual(json.loads(out)['class_size_examined'], 16)
        code, out, _ = self._call('ope', 'lower-bound-demo', '--mdp', self.mdp,
                                  '--dataset', self.data)
        self.assertEqual(code, 0)
        self.assertTrue(json.loads(out)['matches_binary'])

    def test_ope_local_yaml(self):
        code, out, _ = self._call('--format', 'yaml', 'ope', 'local', '--mdp', self.mdp,
                                  '--dataset', self.data, '--eps-opt', '0.2', '--samples', '5')
        self.assertEqual(code, 0)
        self.assertIn('sup_error:', out)

    def test_ope_local_reference_bound(self):
        code, out, _ = self._call('ope', 'local', '--mdp', self.mdp, '--dataset', self.data,
                                  '--eps-opt', '1.5', '--samples', '5')
        self.assertEqual(code, 0)
        report = json.loads(out)
        self.assertGreater(report['reference_bound'], 0.0)
        self.assertIn('eps_opt_above_regime', report['mode_flags'])

    def test_cap_error_exit_code(self):
        code, _, err = self._call('ope', 'global', '--mdp', self.mdp, '--dataset', self.data,
                                  '--cap', '4')
        self.assertEqual(code, 1)
        self.assertEqual(json.loads(err)['error'], 'EnumerationCapError')

    def test_missing_file(self):
        code, _, err = self._call('fit', '--mdp', os.path.join(self.dir, 'none.json'),
                                  '--dataset', self.data)
        self.assertEqual(code, 1)
        self.assertEqual(json.loads(err)['error'], 'ValidationError')

    # 2. identities and multitask
    def test_absorbing_verify(self):
        code, out, _ = self._call('absorbing', 'verify', '--mdp', self.mdp, '--all-states')
        self.assertEqual(code, 0)
        self.assertTrue(json.loads(out)['passed'])
        code, out, _ = self._call('absorbing', 'verify', '--mdp', self.mdp, '--state', '1',
                                  '--dataset', self.data)
        self.assertEqual(code, 0)
        self.assertIn('diagnostic', json.loads(out)['reports'][0])

    def test_multitask_csv(self):
        code, out, _ = self._call('multitask', '--mdp', self.mdp, '--dataset', self.data,
                                  '--rewards', 'random:3:1')
        self.assertEqual(code, 0)
        lines = out.strip().splitlines()
        self.assertEqual(lines[0], 'label,max_suboptimality,mean_suboptimality')
        self.assertEqual(len(lines), 4)

    # 3. sweeps and rates
    def test_sweep_and_rate(self):
        config = os.path.join(self.dir, 'sweep.json')
        rows = os.path.join(self.dir, 'rows.csv')
        with open(config, 'w', encoding='utf-8') as f:
            json.dump({'mdp': {'file': self.mdp}, 'n_grid': [16, 64, 256], 'replicates': 10,
                       'metrics': ['l1_row']}, f)
        code, _, _ = self._call('--config', config, '--out', rows, 'sweep')
        self.assertEqual(code, 0)
        code, out, _ = self._call('rate', '--rows', rows, '--metric', 'l1_row')
        self.assertEqual(code, 0)
        self.assertLess(json.loads(out)['slope'], 0.0)
        code, _, _ = self._call('rate', '--rows', rows, '--metric', 'l1_row',
                                '--expect-slope', '1.0', '2.0')
        self.assertEqual(code, 2)

    def test_accept_exact_criterion(self):
        code, out, _ = self._call('accept', '--criteria', '1')
        self.assertEqual(code, 0)
        self.assertTrue(json.loads(out)[0]['passed'])

    # 4. flag placement and usage errors
    def test_global_flags_after_subcommand(self):
        path = os.path.join(self.dir, 'ope.yaml')
        code, out, _ = self._call('ope', 'global', '--mdp', self.mdp, '--dataset', self.data,
                                  '--out', path, '--format', 'yaml', '--seed', '3')
        self.assertEqual(code, 0)
        self.assertEqual(out, '')
        with open(path, encoding='utf-8') as f:
            self.assertIn('class_size_examined: 16', f.read())

    def test_usage_error_exit_code(self):
        with self.assertRaises(SystemExit) as ctx:
            self._call('fit', '--mdp', self.mdp, '--dataset', self.data, '--bogus')
        self.assertEqual(ctx.exception.code, 1)
        with self.assertRaises(SystemExit) as ctx:
            self._call('generate', '--S', '2')
        self.assertEqual(ctx.exception.code, 1)

if __name__ == '__main__':
    unittest.main()
