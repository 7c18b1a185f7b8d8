""" Module for the offline task-agnostic metric """
from ..metric_types import sweep_metric
from ..multitask import task_agnostic_learn, random_rewards


@sweep_metric(
    name='task_agnostic',
    dependencies=[random_rewards, task_agnostic_learn]
)
def task_agnostic(truth, data, rng, task_count=50, **kwargs):
    """Worst task suboptimality when K known rewards share one dataset.

    Args:
        truth (TabularMDP): The data-generating MDP. Required.
        data (EpisodeDataset): The replicate's exploration dataset. Required.
        rng (RngStream): The stream the K task rewards are drawn from. Required.
        task_count (int): K.

    Returns:
        A dict consisting of:
            value (float): max over tasks of ||V*_1 - V^pi_hat_k_1||_inf.
    """
    rewards = random_rewards(task_count, truth.S, truth.A, rng)
    results = task_agnostic_learn(data, rewards, truth)
    return {'value': max(float(res['suboptimality'].max()) for res in results)}
