""" Module for offline task-agnostic and reward-free learning from one exploration dataset """
from dataclasses import dataclass, field
import numpy as np
from .errors import ValidationError, DimensionMismatchError
from .mdp_core import Policy, plan_tables, widen_reward, _frozen
from .plugin import fit_plugin
from .trajectory import RngStream
from .uniform_ope import learning_suboptimality


@dataclass(frozen=True, eq=False)
class RewardSet:
    """ K reward tables of shape (S, A) with entries in [0, 1].

        Attributes:
            rewards (np.ndarray): shape (K, S, A).
            labels (list): one label per task; defaults to "task-<k>".
    """
    rewards: np.ndarray
    labels: list = field(default=None)

    def __post_init__(self):
        rewards = _frozen(self.rewards, 'rewards')
        if rewards.ndim != 3 or rewards.shape[0] < 1:
            raise DimensionMismatchError('rewards', f"expected a non-empty (K, S, A) array, "
                                         f"got shape {rewards.shape}")
        bad = np.argwhere((rewards < 0) | (rewards > 1))
        if len(bad) > 0:
            k, s, a = bad[0]
            raise ValidationError(f"rewards[{k}][{s}][{a}]",
                                  f"reward {rewards[k, s, a]!r} is outside [0, 1]")
        labels = self.labels
        if labels is None:
            labels = [f"task-{k}" for k in range(rewards.shape[0])]
        if len(labels) != rewards.shape[0]:
            raise DimensionMismatchError('labels', f"{len(labels)} labels for "
                                         f"{rewards.shape[0]} rewards")
        object.__setattr__(self, 'rewards', rewards)
        object.__setattr__(self, 'labels', list(labels))

    @property
    def K(self):
        return self.rewards.shape[0]


def _check_reward(r, model):
    r = np.asarray(r, dtype=float)
    if r.shape != (model.S, model.A):
        raise DimensionMismatchError('r', f"expected shape {(model.S, model.A)}, got {r.shape}")
    if np.any(r < 0) or np.any(r > 1):
        bad = tuple(np.argwhere((r < 0) | (r > 1))[0])
        raise ValidationError(f"r[{bad[0]}][{bad[1]}]", f"reward {r[bad]!r} is outside [0, 1]")
    return r


def reward_free_plan(model, r):
    """ Plan optimally on (P_hat, r) for a reward supplied at query time. """
    r = _check_reward(r, model)
    _, actions = plan_tables(model.P_hat, widen_reward(r, model.H))
    return Policy.deterministic(actions, model.A)


def task_agnostic_learn(data, rewards, shape):
    """ Learn one policy per task from a single reward-free dataset.

    Args:
        data (EpisodeDataset): the exploration data; only (s, a, s') triples are used.
        rewards (RewardSet): the K task rewards.
        shape (TabularMDP): the true MDP, used for (S, A, H) and for evaluation only.

    Returns:
        A list of dicts with label, policy and suboptimality (V*_1 - V^pi_1 per state
        on the truth with reward r_k).
    """
    if rewards.rewards.shape[1:] != (shape.S, shape.A):
        raise DimensionMismatchError('rewards', f"rewards have shape {rewards.rewards.shape[1:]}"
                                     f" but the MDP needs {(shape.S, shape.A)}")
    model = fit_plugin(data, shape)
    results = []
    for label, r in zip(rewards.labels, rewards.rewards):
        pi_hat = reward_free_plan(model, r)
        results.append({'label': label, 'policy': pi_hat,
                        'suboptimality': learning_suboptimality(shape.with_reward(r), pi_hat)})
    return results


def random_rewards(K, S, A, rng):
    """ K i.i.d. uniform [0, 1] reward tables. """
    if K < 1:
        raise ValidationError('K', f"need at least one reward, got {K}")
    return RewardSet(rng.generator().random((K, S, A)))


def parse_reward_source(source, S, A, loader=None):
    """ Read rewards from "random:K:seed" or from a JSON file of (S, A) arrays. """
    if source.startswith('random:'):
        parts = source.split(':')
        if len(parts) != 3:
            raise ValidationError('rewards', f"expected `random:K:seed`, got `{source}`")
        try:
            K, seed = int(parts[1]), int(parts[2])
        except ValueError as err:
            raise ValidationError('rewards', f"expected integers in `{source}`") from err
        return random_rewards(K, S, A, RngStream(seed))
    if loader is None:
        from .io import load_rewards
        loader = load_rewards
    return loader(source)
