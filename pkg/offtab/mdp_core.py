""" Module for exact finite-horizon stationary tabular MDPs.

    Holds the core types (TabularMDP, Policy, ValueTable, OccupancyTable) and the
    exact dynamic-programming routines for evaluation, planning and occupancy.

    Steps are 0-indexed in arrays: step h of the text is index h - 1, and the
    extra index H of a ValueTable is the all-zero terminal row.
"""
from dataclasses import dataclass
import numpy as np
from .errors import ValidationError, DimensionMismatchError
from .metric_types import log

# Tolerances
DP_TOL = 1e-12
OCC_TOL = 1e-10
ROW_TOL = 1e-12


def _path(name, index):
    """ Format an array index as "name[i][j]". """
    return name + ''.join(f"[{int(i)}]" for i in index)


def _frozen(value, name, dtype=float):
    """ Copy 'value' into a read-only array. """
    try:
        arr = np.array(value, dtype=dtype)
    except (TypeError, ValueError) as err:
        raise ValidationError(name, f"cannot be read as a numeric array ({err})") from err
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise ValidationError(_path(name, bad), "entry is not finite")
    arr.setflags(write=False)
    return arr


def check_distribution_rows(arr, name, tol=ROW_TOL):
    """ Verify that every slice along the last axis of 'arr' is a probability vector.

        Args:
            arr (np.ndarray): the array to check.
            name (str): the name used in error paths.
            tol (float): absolute tolerance on the row sums.
        Raises:
            ValidationError: pointing at the first offending row or entry.
    """
    negative = np.argwhere(arr < 0)
    if len(negative) > 0:
        idx = tuple(negative[0])
        raise ValidationError(_path(name, idx), f"negative probability {arr[idx]!r}")
    sums = np.asarray(arr.sum(axis=-1))
    off = np.argwhere(np.abs(sums - 1.0) > tol)
    if len(off) > 0:
        idx = tuple(off[0])
        raise ValidationError(_path(name, idx), f"row sums to {float(sums[idx])!r}, expected 1")


@dataclass(frozen=True, eq=False)
class TabularMDP:
    """ A finite-horizon MDP with a stationary transition kernel.

        Attributes:
            P (np.ndarray): transition tensor of shape (S, A, S).
            r (np.ndarray): mean reward table of shape (S, A), entries in [0, 1].
            d1 (np.ndarray): initial state distribution of shape (S,).
            H (int): the horizon.
    """
    P: np.ndarray
    r: np.ndarray
    d1: np.ndarray
    H: int

    def __post_init__(self):
        P = _frozen(self.P, 'P')
        r = _frozen(self.r, 'r')
        d1 = _frozen(self.d1, 'd1')
        if P.ndim != 3 or P.shape[0] != P.shape[2] or 0 in P.shape:
            raise DimensionMismatchError('P', f"expected a non-empty (S, A, S) array, "
                                         f"got shape {P.shape}")
        num_states, num_actions = P.shape[:2]
        if r.shape != (num_states, num_actions):
            raise DimensionMismatchError('r', f"expected shape {(num_states, num_actions)}, "
                                         f"got {r.shape}")
        if d1.shape != (num_states,):
            raise DimensionMismatchError('d1', f"expected shape {(num_states,)}, got {d1.shape}")
        if isinstance(self.H, bool) or int(self.H) != self.H or self.H < 1:
            raise ValidationError('H', f"horizon must be a positive integer, got {self.H!r}")
        check_distribution_rows(P, 'P')
        check_distribution_rows(d1, 'd1')
        out_of_range = np.argwhere((r < 0) | (r > 1))
        if len(out_of_range) > 0:
            idx = tuple(out_of_range[0])
            raise ValidationError(_path('r', idx), f"reward {r[idx]!r} is outside [0, 1]")
        object.__setattr__(self, 'P', P)
        object.__setattr__(self, 'r', r)
        object.__setattr__(self, 'd1', d1)
        object.__setattr__(self, 'H', int(self.H))

    @property
    def S(self):
        return self.P.shape[0]

    @property
    def A(self):
        return self.P.shape[1]

    def with_reward(self, r):
        """ Same dynamics, different mean reward. """
        return TabularMDP(self.P, r, self.d1, self.H)


@dataclass(frozen=True, eq=False)
class Policy:
    """ A non-stationary policy stored as a full table of action distributions.

        Deterministic policies are stored as one-hot rows so both kinds share
        one evaluation path.

        Attributes:
            probs (np.ndarray): shape (H, S, A).
    """
    probs: np.ndarray

    def __post_init__(self):
        probs = _frozen(self.probs, 'probs')
        if probs.ndim != 3 or 0 in probs.shape:
            raise DimensionMismatchError('probs', f"expected a non-empty (H, S, A) array, "
                                         f"got shape {probs.shape}")
        check_distribution_rows(probs, 'probs')
        object.__setattr__(self, 'probs', probs)

    @classmethod
    def deterministic(cls, actions, num_actions):
        """ Build a policy from an (H, S) array of action indices. """
        actions = np.asarray(actions, dtype=np.int64)
        if actions.ndim != 2:
            raise DimensionMismatchError('actions', f"expected an (H, S) array, "
                                         f"got shape {actions.shape}")
        if actions.size and (actions.min() < 0 or actions.max() >= num_actions):
            raise ValidationError('actions', f"action indices must lie in [0, {num_actions})")
        probs = np.zeros(actions.shape + (num_actions,))
        np.put_along_axis(probs, actions[..., None], 1.0, axis=2)
        return cls(probs)

    @classmethod
    def uniform(cls, H, S, A):
        return cls(np.full((H, S, A), 1.0 / A))

    @property
    def H(self):
        return self.probs.shape[0]

    @property
    def S(self):
        return self.probs.shape[1]

    @property
    def A(self):
        return self.probs.shape[2]

    def is_deterministic(self):
        return bool(np.all(self.probs.max(axis=2) == 1.0))

    def actions(self):
        """ The (H, S) greedy action table; exact for deterministic policies. """
        return self.probs.argmax(axis=2)

    def same_as(self, other):
        return self.probs.shape == other.probs.shape and np.array_equal(self.probs, other.probs)


@dataclass(frozen=True, eq=False)
class ValueTable:
    """ Per-step values of a fixed policy or of the optimum.

        Attributes:
            V (np.ndarray): shape (H + 1, S); V[H] is all zeros.
            Q (np.ndarray): shape (H + 1, S, A); Q[H] is all zeros.
    """
    V: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        for name in ('V', 'Q'):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def H(self):
        return self.V.shape[0] - 1


@dataclass(frozen=True, eq=False)
class OccupancyTable:
    """ Per-step marginal state-action occupancy, shape (H, S, A). """
    d: np.ndarray

    def __post_init__(self):
        arr = np.array(self.d, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, 'd', arr)

    def state_marginals(self):
        """ d_t(s), shape (H, S). """
        return self.d.sum(axis=2)


def widen_reward(r, H):
    """ View a stationary (S, A) reward as a time-indexed (H, S, A) table. """
    return np.broadcast_to(np.asarray(r, dtype=float), (H,) + np.shape(r))


def _check_policy(mdp, pi):
    if pi.probs.shape != (mdp.H, mdp.S, mdp.A):
        raise DimensionMismatchError('probs', f"policy has shape {pi.probs.shape} but the MDP "
                                     f"needs {(mdp.H, mdp.S, mdp.A)}")


def evaluate_tables(P, R_t, probs):
    """ Backward induction for a fixed policy under a time-indexed reward.

        Args:
            P (np.ndarray): (S, A, S) transition tensor.
            R_t (np.ndarray): (H, S, A) reward table.
            probs (np.ndarray): (H, S, A) policy table.
        Returns:
            A ValueTable.
    """
    H, S, A = probs.shape
    V = np.zeros((H + 1, S))
    Q = np.zeros((H + 1, S, A))
    for h in range(H - 1, -1, -1):
        Q[h] = R_t[h] + P @ V[h + 1]
        V[h] = np.sum(probs[h] * Q[h], axis=1)
    return ValueTable(V, Q)


def plan_tables(P, R_t):
    """ Bellman optimality recursion under a time-indexed reward.

        Ties are broken toward the smallest action index (np.argmax).

        Returns:
            (ValueTable, actions) where actions has shape (H, S).
    """
    H, S, A = R_t.shape
    V = np.zeros((H + 1, S))
    Q = np.zeros((H + 1, S, A))
    actions = np.zeros((H, S), dtype=np.int64)
    for h in range(H - 1, -1, -1):
        Q[h] = R_t[h] + P @ V[h + 1]
        actions[h] = Q[h].argmax(axis=1)
        V[h] = Q[h][np.arange(S), actions[h]]
    return ValueTable(V, Q), actions


def evaluate_policy(mdp, pi):
    """ Exact Bellman evaluation of policy 'pi' on 'mdp'.

        Q[h][s][a] = r[s][a] + sum_s' P[s][a][s'] V[h+1][s'] and
        V[h][s] = sum_a pi[h][s][a] Q[h][s][a], for h = H-1 down to 0.

        Raises:
            DimensionMismatchError: if the policy shape is not (H, S, A).
    """
    _check_policy(mdp, pi)
    return evaluate_tables(mdp.P, widen_reward(mdp.r, mdp.H), pi.probs)


def plan_optimal(mdp):
    """ Optimal values and a deterministic greedy policy.

        Returns:
            (ValueTable, Policy): V*/Q* and the greedy policy with smallest-index tie-break.
    """
    values, actions = plan_tables(mdp.P, widen_reward(mdp.r, mdp.H))
    return values, Policy.deterministic(actions, mdp.A)


def backup(mdp, V_next):
    """ One Bellman backup r + P V_next, shape (S, A). """
    return mdp.r + mdp.P @ np.asarray(V_next, dtype=float)


def evaluate_deterministic_batch(P, R_t, actions, step=0):
    """ Evaluate a batch of deterministic non-stationary policies at once.

        Args:
            P (np.ndarray): (S, A, S) transition tensor.
            R_t (np.ndarray): (H, S, A) reward table.
            actions (np.ndarray): (B, H, S) action indices.
            step (int): which step's Q to return.
        Returns:
            np.ndarray of shape (B, S, A), the Q-values at 'step'.
    """
    num_policies, H, S = actions.shape
    V = np.zeros((num_policies, S))
    Q_step = None
    for h in range(H - 1, step - 1, -1):
        Q = R_t[h][None] + np.einsum('sat,bt->bsa', P, V)
        if h == step:
            Q_step = Q
            break
        V = np.take_along_axis(Q, actions[:, h, :, None], axis=2)[..., 0]
    return Q_step


def occupancy(mdp, pi):
    """ Per-step marginal state-action occupancy d_t(s, a) of 'pi' from d1. """
    _check_policy(mdp, pi)
    d = np.zeros((mdp.H, mdp.S, mdp.A))
    d[0] = mdp.d1[:, None] * pi.probs[0]
    for t in range(mdp.H - 1):
        next_states = np.einsum('sa,sat->t', d[t], mdp.P)
        d[t + 1] = next_states[:, None] * pi.probs[t + 1]
    return OccupancyTable(d)


def minimal_occupancy(mdp, mu):
    """ The minimal positive marginal state-action occupancy d_m of behavior 'mu'.

        Pairs whose occupancy is exactly zero are left out of the minimum. States
        never reached at any step are reported but do not stop the computation.

        Returns:
            A dict with fields:
                d_m (float): the minimum over positive d_t(s, a).
                has_inaccessible_state (bool): whether some state has d_t(s) = 0 for all t.
                inaccessible_states (list): those states.
    """
    d = occupancy(mdp, mu).d
    positive = d[d > 0]
    if positive.size == 0:
        raise ValidationError('d', "every state-action occupancy is zero")
    never_reached = np.flatnonzero(d.sum(axis=2).max(axis=0) == 0)
    if len(never_reached) > 0:
        log.warning("States %s are never reached by the behavior policy.", never_reached.tolist())
    return {'d_m': float(positive.min()),
            'has_inaccessible_state': bool(len(never_reached) > 0),
            'inaccessible_states': never_reached.tolist()}


def monotonicity_gap(mdp):
    """ min over (t, s) of V*_t(s) - V*_{t+1}(s); non-negative on every valid MDP. """
    values, _ = plan_optimal(mdp)
    return float(np.min(values.V[:-1] - values.V[1:]))


def sup_norm(a, b):
    """ Max absolute difference between two arrays of the same shape. """
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
