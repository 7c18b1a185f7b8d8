""" Module for the offline reward-free metric """
import numpy as np
from ..metric_types import sweep_metric
from ..mdp_core import DP_TOL
from ..plugin import fit_plugin
from ..multitask import reward_free_plan, random_rewards
from ..uniform_ope import learning_suboptimality


@sweep_metric(
    name='reward_free',
    dependencies=[fit_plugin, random_rewards, reward_free_plan]
)
def reward_free(truth, model, rng, reward_count=200, **kwargs):
    """Suboptimality over a batch of rewards supplied after the data was collected.

    Args:
        truth (TabularMDP): The data-generating MDP. Required.
        model (EmpiricalModel): The plug-in model fitted on this replicate. Required.
        rng (RngStream): The stream the reward batch is drawn from. Required.
        reward_count (int): The batch size.

    Returns:
        A list of two dicts, 'reward_free' (max over the batch) and
        'reward_free_mean' (mean over the batch). The flag is 'negative' if some
        planned policy had a suboptimality below zero.
    """
    rewards = random_rewards(reward_count, truth.S, truth.A, rng)
    gaps = np.array([learning_suboptimality(truth.with_reward(r), reward_free_plan(model, r))
                     for r in rewards.rewards])
    flag = 'negative' if gaps.min() < -DP_TOL else ''
    worst = gaps.max(axis=1)
    return [{'metric': 'reward_free', 'value': float(worst.max()), 'flag': flag},
            {'metric': 'reward_free_mean', 'value': float(worst.mean()), 'flag': flag}]
