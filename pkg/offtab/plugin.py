""" Module for the model-based plug-in estimator: counts, P_hat, d1_hat and the empirical MDP """
from dataclasses import dataclass
import numpy as np
from .errors import ValidationError, DimensionMismatchError
from .mdp_core import TabularMDP, check_distribution_rows
from .metric_types import log


@dataclass(frozen=True, eq=False)
class EmpiricalModel:
    """ Transition counts and the plug-in estimates built from them.

        Attributes:
            n_sa (np.ndarray): visits of (s, a) over all steps and episodes, shape (S, A).
            n_s_sa (np.ndarray): transition counts (s, a) -> s', shape (S, A, S).
            P_hat (np.ndarray): plug-in transition, 1/S on unvisited rows.
            d1_hat (np.ndarray): empirical initial distribution n_s / n.
            r (np.ndarray): the known mean reward, shape (S, A).
            n_init (np.ndarray): initial-state counts, shape (S,).
            n (int): number of episodes.
            H (int): horizon.
    """
    n_sa: np.ndarray
    n_s_sa: np.ndarray
    P_hat: np.ndarray
    d1_hat: np.ndarray
    r: np.ndarray
    n_init: np.ndarray
    n: int
    H: int

    def __post_init__(self):
        for name in ('n_sa', 'n_s_sa', 'n_init'):
            arr = np.array(getattr(self, name), dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        for name in ('P_hat', 'd1_hat', 'r'):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not np.array_equal(self.n_s_sa.sum(axis=2), self.n_sa):
            bad = tuple(np.argwhere(self.n_s_sa.sum(axis=2) != self.n_sa)[0])
            raise ValidationError(f"n_s_sa[{bad[0]}][{bad[1]}]", "next-state counts do not "
                                  "sum to n_sa")
        check_distribution_rows(self.P_hat, 'P_hat')

    @classmethod
    def from_counts(cls, n_s_sa, n_init, r, H):
        """ Build the estimates from raw count tensors. """
        n_s_sa = np.asarray(n_s_sa, dtype=np.int64)
        n_init = np.asarray(n_init, dtype=np.int64)
        S = n_s_sa.shape[0]
        n_sa = n_s_sa.sum(axis=2)
        visited = n_sa > 0
        P_hat = np.full(n_s_sa.shape, 1.0 / S)
        P_hat[visited] = n_s_sa[visited] / n_sa[visited][:, None]
        n = int(n_init.sum())
        d1_hat = n_init / n if n > 0 else np.zeros(S)
        return cls(n_sa, n_s_sa, P_hat, d1_hat, r, n_init, n, H)

    @property
    def S(self):
        return self.P_hat.shape[0]

    @property
    def A(self):
        return self.P_hat.shape[1]

    def to_dict(self):
        return {'S': self.S, 'A': self.A, 'H': self.H, 'n': self.n,
                'n_sa': self.n_sa.tolist(), 'n_s_sa': self.n_s_sa.tolist(),
                'n_init': self.n_init.tolist(), 'P_hat': self.P_hat.tolist(),
                'd1_hat': self.d1_hat.tolist(), 'r': self.r.tolist()}


def fit_plugin(data, mdp_shape):
    """ Fit the plug-in estimator on an episode dataset.

    Args:
        data (EpisodeDataset): the offline episodes.
        mdp_shape (TabularMDP): supplies (S, A, H) and the known mean reward.

    Returns:
        An EmpiricalModel.
    """
    expected = (mdp_shape.S, mdp_shape.A, mdp_shape.H)
    if (data.S, data.A, data.H) != expected:
        raise DimensionMismatchError('meta', f"dataset has (S, A, H) = {(data.S, data.A, data.H)} "
                                     f"but the MDP has {expected}")
    steps = data.transitions.reshape(-1, 3)
    n_s_sa = np.zeros((data.S, data.A, data.S), dtype=np.int64)
    np.add.at(n_s_sa, (steps[:, 0], steps[:, 1], steps[:, 2]), 1)
    n_init = np.bincount(data.initial_states(), minlength=data.S)
    model = EmpiricalModel.from_counts(n_s_sa, n_init, mdp_shape.r, mdp_shape.H)
    missing = unvisited_pairs(model)
    if missing > 0:
        log.warning("%d state-action pairs were never visited; their rows fall back to 1/S.",
                    missing)
    return model


def to_mdp(model, reward=None):
    """ The empirical MDP (P_hat, r, H, d1_hat), optionally with another reward. """
    if model.n == 0:
        raise ValidationError('d1_hat', "the empirical initial distribution is degenerate (n = 0)")
    return TabularMDP(model.P_hat, model.r if reward is None else reward, model.d1_hat, model.H)


def l1_row_error(model, truth):
    """ Per-row l1 distances ||P_hat(.|s,a) - P(.|s,a)||_1, shape (S, A). """
    if model.P_hat.shape != truth.P.shape:
        raise DimensionMismatchError('P_hat', f"model shape {model.P_hat.shape} does not match "
                                     f"truth {truth.P.shape}")
    return np.abs(model.P_hat - truth.P).sum(axis=2)


def unvisited_pairs(model):
    """ Number of (s, a) with n_sa = 0. """
    return int(np.sum(model.n_sa == 0))


def merge_models(first, second):
    """ Merge two models fitted on disjoint episode shards of the same MDP. """
    if first.n_s_sa.shape != second.n_s_sa.shape or first.H != second.H:
        raise DimensionMismatchError('n_s_sa', "cannot merge models of different shapes")
    if not np.array_equal(first.r, second.r):
        raise ValidationError('r', "cannot merge models fitted with different rewards")
    return EmpiricalModel.from_counts(first.n_s_sa + second.n_s_sa,
                                      first.n_init + second.n_init, first.r, first.H)


def replace_transition(model, P):
    """ The same counts with P_hat replaced, for exact-model substitution. """
    P = np.asarray(P, dtype=float)
    if P.shape != model.P_hat.shape:
        raise DimensionMismatchError('P', f"expected shape {model.P_hat.shape}, got {P.shape}")
    return EmpiricalModel(model.n_sa, model.n_s_sa, P, model.d1_hat, model.r,
                          model.n_init, model.n, model.H)
