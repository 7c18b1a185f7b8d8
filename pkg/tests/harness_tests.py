""" Module for unittesting instances, sweep metrics, sweeps, rate fits and acceptance checks """
import os
import sys
import math
import shutil
import tempfile
import unittest
import logging
import numpy as np
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))
import offtab.run as run
import offtab.acceptance as acceptance
import offtab.instances as instances
from offtab.errors import ValidationError
from offtab.io import rows_to_csv
from offtab.mdp_core import (evaluate_policy, plan_optimal, plan_tables, widen_reward,
                             minimal_occupancy)
from offtab.metric_types import get_metric, metric_names, cached_rollout
from offtab.trajectory import RngStream, roll_episodes


class TestHarness(unittest.TestCase):
    """ Class for testing the Monte Carlo harness """

    def setUp(self):
        """ Setup the tests """
        logger = logging.getLogger()
        logger.setLevel(logging.CRITICAL)

    def _config(self, **changes):
        base = {'mdp': {'family': 'dirichlet_random', 'S': 2, 'A': 2, 'H': 2, 'seed': 1},
                'n_grid': [16, 32], 'replicates': 2,
                'metrics': ['l1_row', 'suboptimality', 'global_ope'], 'local_samples': 10}
        base.update(changes)
        return run.SweepConfig.from_dict(base)

    # 0. instances
    def test_generate_instance_reproducible(self):
        spec = {'family': 'dirichlet_random', 'S': 3, 'A': 2, 'H': 4, 'seed': 9}
        first, mu_first = instances.generate_instance(spec)
        second, mu_second = instances.generate_instance(spec)
        self.assertTrue(np.array_equal(first.P, second.P))
        self.assertTrue(mu_first.same_as(mu_second))

    def test_instance_families(self):
        mdp, _ = instances.generate_instance({'family': 'near_uniform', 'S': 4, 'A': 2, 'H': 3})
        self.assertLessEqual(float(np.abs(mdp.P - 0.25).max()), instances.NEAR_UNIFORM_EPS / 2)
        chain, _ = instances.generate_instance({'family': 'chain', 'S': 3, 'A': 2, 'H': 3})
        self.assertEqual(chain.P[1, 1].tolist(), [0.0, 0.0, 1.0])
        with self.assertRaises(ValidationError):
            instances.generate_instance({'family': 'chain', 'S': 3, 'A': 1, 'H': 3})
        with self.assertRaises(ValidationError):
            instances.generate_instance({'family': 'grid', 'S': 3, 'A': 2, 'H': 3})

    def test_near_tie_family(self):
        mdp, mu = instances.generate_instance({'family': 'near_tie', 'S': 4, 'A': 2, 'H': 5,
                                               'seed': 0})
        self.assertTrue(np.allclose(mdp.P[:, 0], mdp.P[:, 1]))
        self.assertTrue(np.all((mdp.r >= 0.0) & (mdp.r <= 1.0)))
        reward_gaps = mdp.r.max(axis=1) - mdp.r.min(axis=1)
        self.assertTrue(np.allclose(np.sort(reward_gaps),
                                    np.geomspace(*instances.NEAR_TIE_GAPS, 4), rtol=1e-9))
        values, _ = plan_tables(mdp.P, widen_reward(mdp.r, mdp.H))
        for h in range(mdp.H):
            q_gaps = values.Q[h].max(axis=1) - values.Q[h].min(axis=1)
            self.assertTrue(np.allclose(q_gaps, reward_gaps, rtol=0.0, atol=1e-12))
        self.assertEqual(mu.probs.shape, (5, 4, 2))

    def test_near_uniform_coverage(self):
        S, A = 4, 3
        mdp, mu = instances.generate_instance({'family': 'near_uniform', 'S': S, 'A': A, 'H': 5,
                                               'seed': 2})
        d_m = minimal_occupancy(mdp, mu)['d_m']
        self.assertGreaterEqual(d_m, 0.5 / (S * A))
        self.assertLessEqual(d_m, 1.5 / (S * A))

    def test_chain_closed_form(self):
        chain, _ = instances.generate_instance({'family': 'chain', 'S': 5, 'A': 2, 'H': 4,
                                                'seed': 6})
        start = int(np.argmax(chain.d1))
        self.assertEqual(chain.d1[start], 1.0)
        values, _ = plan_optimal(chain)
        self.assertAlmostEqual(values.V[0][start], 4 * chain.r.max(), places=12)

    # 1. registered metrics
    def test_metric_registry(self):
        for name in ('global_ope', 'local_ope', 'pointwise_ope', 'suboptimality', 'l1_row',
                     'task_agnostic', 'reward_free', 'lower_bound_demo', 'anchor', 'sandwich'):
            self.assertIn(name, metric_names())
        with self.assertRaises(ValidationError):
            get_metric('unknown')

    def test_metric_requires_parameters(self):
        truth, _ = instances.generate_instance({'S': 2, 'A': 2, 'H': 2})
        with self.assertRaises(ValidationError) as ctx:
            get_metric('l1_row')['callable'](truth=truth, n=16)
        self.assertEqual(ctx.exception.path, 'rng')

    # 2. sweeps
    def test_sweep_rows(self):
        rows = run.run_sweep(self._config())
        self.assertEqual(len(rows), 12)
        self.assertEqual([(row['n'], row['replicate']) for row in rows[:3]], [(16, 0)] * 3)
        self.assertEqual([row['metric'] for row in rows[:3]],
                         ['l1_row', 'suboptimality', 'global_ope'])
        for row in rows:
            self.assertTrue(math.isfinite(row['value']))
            self.assertGreaterEqual(row['value'], -1e-12)

    def test_sweep_is_deterministic(self):
        first = rows_to_csv(run.run_sweep(self._config()))
        second = rows_to_csv(run.run_sweep(self._config()))
        self.assertEqual(first, second)

    def test_sweep_threads_agree(self):
        single = rows_to_csv(run.run_sweep(self._config()))
        pooled = rows_to_csv(run.run_sweep(self._config(threads=2)))
        self.assertEqual(single, pooled)

    def test_metric_error_becomes_row(self):
        rows = run.run_sweep(self._config(
            mdp={'family': 'dirichlet_random', 'S': 2, 'A': 2, 'H': 3, 'seed': 1},
            metrics=['lower_bound_demo'], replicates=1))
        self.assertEqual(len(rows), 2)
        for row in rows:
            self.assertTrue(math.isnan(row['value']))
            self.assertTrue(row['flag'].startswith('error:ValidationError'))

    def test_unvisited_flag(self):
        rows = run.run_sweep(self._config(
            mdp={'family': 'dirichlet_random', 'S': 4, 'A': 2, 'H': 2, 'seed': 1},
            n_grid=[1], replicates=1, metrics=['l1_row']))
        self.assertIn('unvisited=', rows[0]['flag'])

    def test_local_and_multitask_metrics(self):
        rows = run.run_sweep(self._config(metrics=['local_ope', 'pointwise_ope', 'task_agnostic',
                                                   'reward_free', 'sandwich'],
                                          task_count=3, reward_count=4, replicates=1))
        names = [row['metric'] for row in rows[:6]]
        self.assertEqual(names, ['local_ope', 'pointwise_ope', 'task_agnostic', 'reward_free',
                                 'reward_free_mean', 'sandwich'])
        for row in rows:
            self.assertNotIn('violation', row['flag'])
            self.assertNotIn('error', row['flag'])

    def test_anchor_sweep(self):
        rows = run.run_sweep(self._config(metrics=['anchor'], n_grid=[32, 64], replicates=2,
                                          anchor={'S': 6, 'A': 2, 'H': 3, 'K': 3, 'seed': 1}))
        self.assertEqual(len(rows), 4)
        for row in rows:
            self.assertEqual(row['metric'], 'anchor')
            self.assertGreaterEqual(row['value'], 0.0)

    def test_cached_rollout(self):
        cache_dir = tempfile.mkdtemp()
        try:
            mdp, mu = instances.generate_instance({'S': 2, 'A': 2, 'H': 2, 'seed': 1})
            first = cached_rollout(roll_episodes, mdp, mu, 12, RngStream(3, 1), cache_dir)
            self.assertEqual(len(os.listdir(cache_dir)), 1)
            second = cached_rollout(lambda *args: None, mdp, mu, 12, RngStream(3, 1), cache_dir)
            self.assertTrue(second.same_as(first))
        finally:
            shutil.rmtree(cache_dir)

    def test_h_sweep(self):
        rows = run.run_h_sweep(self._config(metrics=['l1_row'], replicates=1), [1, 2])
        self.assertEqual({row['metric'] for row in rows}, {'l1_row@H=1', 'l1_row@H=2'})

    def test_config_validation(self):
        with self.assertRaises(ValidationError):
            self._config(n_grid=[32, 16])
        with self.assertRaises(ValidationError):
            self._config(metrics=['nothing'])
        with self.assertRaises(ValidationError):
            self._config(replicates=0)

    # 3. rate fits
    def test_fit_rate(self):
        rows = [{'metric': 'm', 'n': n, 'replicate': i, 'value': 2.0 / math.sqrt(n), 'flag': ''}
                for n in (100, 400, 1600, 6400) for i in range(10)]
        fit = run.fit_rate(rows, 'm')
        self.assertAlmostEqual(fit.slope, -0.5, places=9)
        self.assertAlmostEqual(fit.r_squared, 1.0, places=9)
        self.assertEqual(len(fit.points), 4)

    def test_fit_rate_refusals(self):
        rows = [{'metric': 'm', 'n': n, 'replicate': i, 'value': 1.0 / n, 'flag': ''}
                for n in (100, 400) for i in range(10)]
        with self.assertRaises(ValidationError):
            run.fit_rate(rows, 'm')
        rows = [{'metric': 'm', 'n': n, 'replicate': i, 'value': 0.0, 'flag': ''}
                for n in (100, 400, 1600) for i in range(10)]
        with self.assertRaises(ValidationError):
            run.fit_rate(rows, 'm')
        rows = [{'metric': 'm', 'n': n, 'replicate': i, 'value': 1.0, 'flag': ''}
                for n in (100, 400, 1600) for i in range(3)]
        with self.assertRaises(ValidationError):
            run.fit_rate(rows, 'm')

    # 4. acceptance checks
    def test_trajectory_oracle(self):
        mdp, mu = instances.generate_instance({'S': 2, 'A': 2, 'H': 3, 'seed': 4})
        self.assertTrue(np.allclose(acceptance.trajectory_value_oracle(mdp, mu),
                                    evaluate_policy(mdp, mu).V[0], atol=1e-12))

    def test_exact_criteria(self):
        self.assertTrue(acceptance.dp_oracle_equivalence(RngStream(0), count=5)['passed'])
        for result in acceptance.absorbing_identities(RngStream(0), count=4, pairs=10):
            self.assertTrue(result['passed'])
        self.assertTrue(acceptance.l1_reduction(RngStream(0), pairs=10, replicates=3)['passed'])

    def test_anchor_exact_checks(self):
        worst_row, violations = acceptance.anchor_exact_checks(RngStream(0), draws=50)
        self.assertLessEqual(worst_row, 1e-9)
        self.assertEqual(violations, 0)

    def test_determinism_criterion(self):
        self.assertTrue(acceptance.determinism(0)['passed'])

    def test_rate_check_refused_fit(self):
        rows = [{'metric': 'm', 'n': n, 'replicate': i, 'value': 0.0, 'flag': ''}
                for n in (100, 400, 1600) for i in range(10)]
        passed, details = acceptance._rate_check(rows, 'm', -0.6, -0.4)
        self.assertFalse(passed)
        self.assertIn('error', details)
        self.assertEqual(details['range'], [-0.6, -0.4])

    def test_rate_instances(self):
        cfg = run.SweepConfig()
        self.assertEqual(cfg.mdp['family'], 'near_tie')
        self.assertTrue(cfg.anchor['near_tie'])
        self.assertEqual(acceptance.RATE_MDP['family'], 'near_tie')
        self.assertTrue(acceptance.RATE_ANCHOR['near_tie'])
        self.assertEqual(run.build_anchor(run.SweepConfig(anchor=dict(acceptance.RATE_ANCHOR))).K,
                         6)

if __name__ == '__main__':
    unittest.main()
