""" Module for unittesting the anchor linear MDP """
import os
import sys
import unittest
import logging
import numpy as np
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))
import offtab.anchor as anchor
from offtab.errors import ValidationError, NotRepresentableError
from offtab.instances import generate_anchor_instance, ANCHOR_TIE_GAPS
from offtab.mdp_core import plan_tables, widen_reward
from offtab.trajectory import RngStream


class TestAnchor(unittest.TestCase):
    """ Class for testing anchor representations and planning """

    def setUp(self):
        """ Setup the tests """
        logger = logging.getLogger()
        logger.setLevel(logging.CRITICAL)
        self.mdp = generate_anchor_instance(S=8, A=2, H=4, K=4, seed=3)

    # 0. instances and coefficients
    def test_instance(self):
        self.assertEqual((self.mdp.S, self.mdp.A, self.mdp.K), (8, 2, 4))
        self.assertTrue(np.allclose(self.mdp.mdp.P.sum(axis=2), 1.0, atol=1e-12))

    def test_anchor_coefficients_are_unit(self):
        for k, sa in enumerate(self.mdp.anchors):
            self.assertTrue(np.allclose(self.mdp.coefficients(sa), np.eye(4)[k], atol=1e-9))

    def test_coefficients_reproduce_features(self):
        weights = self.mdp.all_coefficients()
        self.assertEqual(weights.shape, (8, 2, 4))
        self.assertTrue(np.allclose(weights @ self.mdp.anchor_phi(), self.mdp.phi, atol=1e-9))
        self.assertTrue(np.all(weights >= 0))

    def test_solve_lambda(self):
        weights = anchor.solve_lambda(np.eye(2), [0.3, 0.7])
        self.assertTrue(np.allclose(weights, [0.3, 0.7], atol=1e-12))
        with self.assertRaises(NotRepresentableError):
            anchor.solve_lambda(np.eye(2), [2.0, 0.0], sa=(0, 0))

    def test_negative_model_refused(self):
        phi = np.array([[[1.0, 0.0]], [[0.0, 1.0]]])
        psi = np.array([[1.5, -0.5], [0.0, 1.0]])
        with self.assertRaises(ValidationError):
            anchor.AnchorLinearMDP(phi, psi, [(0, 0), (1, 0)], 2, np.zeros((2, 1)))

    # 1. sampling and planning
    def test_exact_model_recovers_truth(self):
        model = anchor.resolve_lambdas(anchor.AnchorModel.exact(self.mdp), self.mdp)
        empirical = anchor.plugin_mdp(model, self.mdp)
        self.assertTrue(np.allclose(empirical.P, self.mdp.mdp.P, atol=1e-9))
        _, report = anchor.anchor_plan(model, self.mdp)
        self.assertLess(report['suboptimality'], 1e-9)

    def test_sample_anchors(self):
        first = anchor.sample_anchors(self.mdp, 200, RngStream(4))
        second = anchor.sample_anchors(self.mdp, 200, RngStream(4))
        self.assertTrue(np.array_equal(first.anchor_rows, second.anchor_rows))
        self.assertTrue(np.allclose(first.anchor_rows.sum(axis=1), 1.0))
        self.assertEqual(first.N, 200)
        with self.assertRaises(ValidationError):
            anchor.sample_anchors(self.mdp, 0, RngStream(4))

    def test_plugin_transition_is_distribution(self):
        model = anchor.resolve_lambdas(anchor.sample_anchors(self.mdp, 50, RngStream(1)),
                                       self.mdp)
        for s in range(self.mdp.S):
            for a in range(self.mdp.A):
                row = anchor.plugin_transition(model, (s, a))
                self.assertAlmostEqual(float(row.sum()), 1.0, places=9)
        with self.assertRaises(ValidationError):
            anchor.plugin_transition(anchor.sample_anchors(self.mdp, 5, RngStream(1)), (0, 0))

    def test_more_samples_plan_better(self):
        errors = {}
        for N in (16, 16384):
            gaps = []
            for replicate in range(10):
                model = anchor.sample_anchors(self.mdp, N, RngStream(replicate))
                gaps.append(anchor.anchor_plan(model, self.mdp)[1]['suboptimality'])
            errors[N] = np.mean(gaps)
        self.assertLessEqual(errors[16384], errors[16])

    # 2. variance inequality
    def test_variance(self):
        self.assertAlmostEqual(anchor.variance(np.array([0.5, 0.5]), np.array([0.0, 2.0])), 1.0)

    def test_recover_check(self):
        gen = RngStream(7).generator()
        for _ in range(30):
            sa = (int(gen.integers(8)), int(gen.integers(2)))
            self.assertTrue(anchor.recover_check(self.mdp, sa, gen.normal(size=8))['passed'])

    def test_recover_lemma_check_name(self):
        self.assertIs(anchor.recover_lemma_check, anchor.recover_check)
        report = anchor.recover_lemma_check(self.mdp, (0, 1), np.arange(8.0))
        self.assertLessEqual(report['lhs'], report['rhs'] + anchor.MODEL_TOL)

    # 3. near-tied rewards
    def test_near_tie_gaps_hold_at_every_step(self):
        mdp = generate_anchor_instance(S=8, A=2, H=4, K=4, seed=3, near_tie=True)
        r = mdp.mdp.r
        self.assertTrue(np.all((r >= 0.0) & (r <= 1.0)))
        reward_gaps = r.max(axis=1)[:, None] - r
        values, _ = plan_tables(mdp.mdp.P, widen_reward(r, mdp.H))
        for h in range(mdp.H):
            q_gaps = values.Q[h].max(axis=1)[:, None] - values.Q[h]
            self.assertTrue(np.allclose(q_gaps, reward_gaps, atol=1e-10))
        ladder = np.geomspace(*ANCHOR_TIE_GAPS, 16)
        for gap in reward_gaps[reward_gaps > 0]:
            self.assertTrue(np.any(np.isclose(ladder, gap, rtol=1e-9, atol=0.0)))
        self.assertEqual(int(np.sum(reward_gaps > 0)), 8)

    def test_near_tie_keeps_the_representation(self):
        tied = generate_anchor_instance(S=8, A=2, H=4, K=4, seed=3, near_tie=True)
        self.assertEqual(tied.anchors, self.mdp.anchors)
        self.assertTrue(np.array_equal(tied.phi, self.mdp.phi))
        self.assertTrue(np.array_equal(tied.psi, self.mdp.psi))

if __name__ == '__main__':
    unittest.main()
