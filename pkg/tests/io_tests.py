""" Module for unittesting the offtab file formats """
import os
import sys
import json
import shutil
import tempfile
import unittest
import logging
import numpy as np
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))
import offtab.io as offtab_io
from offtab.errors import ValidationError, DimensionMismatchError
from offtab.instances import generate_instance, generate_anchor_instance
from offtab.plugin import fit_plugin
from offtab.run import load_config
from offtab.trajectory import RngStream, roll_episodes


class TestIO(unittest.TestCase):
    """ Class for testing readers and writers """

    def setUp(self):
        """ Setup the tests """
        logger = logging.getLogger()
        logger.setLevel(logging.CRITICAL)
        self.dir = tempfile.mkdtemp()
        self.mdp, self.mu = generate_instance({'family': 'dirichlet_random', 'S': 3, 'A': 2,
                                               'H': 3, 'seed': 0})

    def tearDown(self):
        shutil.rmtree(self.dir)

    def _path(self, name, text=None):
        path = os.path.join(self.dir, name)
        if text is not None:
            with open(path, 'w', encoding='utf-8') as f:
                f.write(text)
        return path

    # 0. MDPs and policies
    def test_mdp_round_trip(self):
        path = self._path('mdp.json')
        offtab_io.dump_mdp(self.mdp, path)
        loaded = offtab_io.load_mdp(path)
        self.assertTrue(np.array_equal(loaded.P, self.mdp.P))
        self.assertTrue(np.array_equal(loaded.d1, self.mdp.d1))
        self.assertEqual(loaded.H, 3)

    def test_mdp_bad_row(self):
        doc = offtab_io.mdp_to_dict(self.mdp)
        doc['P'][2][1] = [0.5, 0.5, 0.5]
        with self.assertRaises(ValidationError) as ctx:
            offtab_io.load_mdp(self._path('bad.json', json.dumps(doc)))
        self.assertEqual(ctx.exception.path, 'P[2][1]')

    def test_mdp_ragged(self):
        doc = offtab_io.mdp_to_dict(self.mdp)
        doc['P'][1][0] = [1.0, 0.0]
        with self.assertRaises(DimensionMismatchError) as ctx:
            offtab_io.load_mdp(self._path('ragged.json', json.dumps(doc)))
        self.assertEqual(ctx.exception.path, 'P[1][0]')

    def test_yaml_mdp(self):
        doc = offtab_io.mdp_to_dict(self.mdp)
        path = self._path('mdp.yaml', offtab_io.render(doc, 'yaml'))
        self.assertTrue(np.allclose(offtab_io.load_mdp(path).P, self.mdp.P))

    def test_missing_file(self):
        with self.assertRaises(ValidationError):
            offtab_io.load_mdp(self._path('nothing.json'))

    def test_policy_shape(self):
        path = self._path('pi.json')
        offtab_io.dump_policy(self.mu, path)
        self.assertTrue(offtab_io.load_policy(path, self.mdp).same_as(self.mu))
        other, _ = generate_instance({'family': 'dirichlet_random', 'S': 3, 'A': 2, 'H': 4,
                                      'seed': 0})
        with self.assertRaises(DimensionMismatchError):
            offtab_io.load_policy(path, other)

    # 1. datasets and models
    def test_dataset_round_trip(self):
        data = roll_episodes(self.mdp, self.mu, 25, RngStream(3, 1))
        path = self._path('data.jsonl')
        offtab_io.dump_dataset(data, path)
        self.assertTrue(offtab_io.load_dataset(path).same_as(data))

    def test_dataset_bad_line(self):
        header = json.dumps({'S': 2, 'A': 2, 'H': 2, 'n': 2})
        text = header + '\n[[0,0,1],[1,1,0]]\n[[0,0,1]]\n'
        with self.assertRaises(ValidationError) as ctx:
            offtab_io.load_dataset(self._path('bad.jsonl', text))
        self.assertTrue(ctx.exception.path.endswith('line 3'))

    def test_dataset_invalid_json(self):
        header = json.dumps({'S': 2, 'A': 2, 'H': 1})
        with self.assertRaises(ValidationError) as ctx:
            offtab_io.load_dataset(self._path('bad.jsonl', header + '\n[[0,0,1]]\n[[0,0\n'))
        self.assertTrue(ctx.exception.path.endswith('line 3'))

    def test_dataset_count_mismatch(self):
        header = json.dumps({'S': 2, 'A': 2, 'H': 1, 'n': 3})
        with self.assertRaises(ValidationError) as ctx:
            offtab_io.load_dataset(self._path('short.jsonl', header + '\n[[0,0,1]]\n'))
        self.assertTrue(ctx.exception.path.endswith('line 1'))

    def test_model_round_trip(self):
        model = fit_plugin(roll_episodes(self.mdp, self.mu, 30, RngStream(0)), self.mdp)
        path = self._path('model.json')
        offtab_io.dump_model(model, path)
        loaded = offtab_io.load_model(path)
        self.assertTrue(np.array_equal(loaded.n_s_sa, model.n_s_sa))
        self.assertTrue(np.array_equal(loaded.P_hat, model.P_hat))

    # 2. anchor instances and rewards
    def test_anchor_round_trip(self):
        mdp = generate_anchor_instance(S=5, A=2, H=3, K=3, seed=1)
        path = self._path('anchor.json')
        offtab_io.dump_anchor_instance(mdp, path)
        loaded = offtab_io.load_anchor_instance(path)
        self.assertEqual(loaded.anchors, mdp.anchors)
        self.assertTrue(np.array_equal(loaded.phi, mdp.phi))

    def test_load_rewards(self):
        plain = self._path('plain.json', json.dumps([np.zeros((3, 2)).tolist()] * 2))
        self.assertEqual(offtab_io.load_rewards(plain).labels, ['task-0', 'task-1'])
        labelled = self._path('labelled.json', json.dumps(
            {'rewards': [np.ones((3, 2)).tolist()], 'labels': ['goal']}))
        self.assertEqual(offtab_io.load_rewards(labelled).labels, ['goal'])

    # 3. configs and reports
    def test_yaml_config(self):
        path = self._path('sweep.yaml', "n_grid: [16, 32]\nreplicates: 3\nbase_seed: 4\n")
        cfg = load_config(path)
        self.assertEqual(cfg.n_grid, [16, 32])
        self.assertEqual(cfg.replicates, 3)
        with self.assertRaises(ValidationError) as ctx:
            load_config(self._path('bad.yaml', "n_grid: [16, 32]\nreplicate: 3\n"))
        self.assertEqual(ctx.exception.path, 'replicate')

    def test_output_format(self):
        previous = os.environ.pop('OFFTAB_OUTPUT_FORMAT', None)
        try:
            self.assertEqual(offtab_io.output_format(None), 'json')
            os.environ['OFFTAB_OUTPUT_FORMAT'] = 'yaml'
            self.assertEqual(offtab_io.output_format(None), 'yaml')
            self.assertEqual(offtab_io.output_format('csv'), 'csv')
            with self.assertRaises(ValidationError):
                offtab_io.output_format('xml')
        finally:
            os.environ.pop('OFFTAB_OUTPUT_FORMAT', None)
            if previous is not None:
                os.environ['OFFTAB_OUTPUT_FORMAT'] = previous

    def test_rows_to_csv(self):
        rows = [{'metric': 'l1_row', 'n': 16, 'replicate': 0, 'value': 0.25, 'flag': ''},
                {'metric': 'anchor', 'n': 16, 'replicate': 1, 'value': float('nan'),
                 'flag': 'error:ValidationError'}]
        lines = offtab_io.rows_to_csv(rows).splitlines()
        self.assertEqual(lines[0], 'metric,n,replicate,value,flag')
        self.assertEqual(lines[1], 'l1_row,16,0,0.25,')
        self.assertEqual(lines[2], 'anchor,16,1,nan,error:ValidationError')
        path = self._path('rows.csv', offtab_io.rows_to_csv(rows))
        frame = offtab_io.read_rows(path)
        self.assertEqual(frame['flag'].iloc[0], '')
        self.assertTrue(np.isnan(frame['value'].iloc[1]))

if __name__ == '__main__':
    unittest.main()
