""" Module for s-absorbing MDPs and the singleton-absorbing identities.

    An s-absorbing MDP keeps every state of the base MDP except s, which loops
    onto itself under every action and pays the time-indexed reward u_t. Its
    rewards therefore vary with the step, so this module works with a
    time-indexed reward table (H, S, A) and widens stationary MDPs on entry.
"""
from dataclasses import dataclass
import numpy as np
from .errors import ValidationError, DimensionMismatchError, InvariantViolation
from .mdp_core import (TabularMDP, DP_TOL, check_distribution_rows, plan_tables,
                       widen_reward, _frozen)
from .plugin import to_mdp

IDENTITY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class TimeVaryingMDP:
    """ A stationary-transition MDP with a time-indexed reward R_t of shape (H, S, A).

        Rewards only need to lie in [0, H] here, since absorbing rewards u_t may exceed 1.
    """
    P: np.ndarray
    R_t: np.ndarray
    d1: np.ndarray
    H: int

    def __post_init__(self):
        P = _frozen(self.P, 'P')
        R_t = _frozen(self.R_t, 'R_t')
        d1 = _frozen(self.d1, 'd1')
        if R_t.shape != (self.H,) + P.shape[:2]:
            raise DimensionMismatchError('R_t', f"expected shape {(self.H,) + P.shape[:2]}, "
                                         f"got {R_t.shape}")
        check_distribution_rows(P, 'P')
        check_distribution_rows(d1, 'd1')
        if np.any(R_t < 0) or np.any(R_t > self.H):
            raise ValidationError('R_t', f"rewards must lie in [0, {self.H}]")
        object.__setattr__(self, 'P', P)
        object.__setattr__(self, 'R_t', R_t)
        object.__setattr__(self, 'd1', d1)

    @property
    def S(self):
        return self.P.shape[0]

    @property
    def A(self):
        return self.P.shape[1]

    def plan(self):
        """ Optimal values; see mdp_core.plan_tables. """
        values, _ = plan_tables(self.P, self.R_t)
        return values


def widen(mdp):
    """ View a TabularMDP as a TimeVaryingMDP. """
    if isinstance(mdp, TimeVaryingMDP):
        return mdp
    return TimeVaryingMDP(mdp.P, widen_reward(mdp.r, mdp.H), mdp.d1, mdp.H)


@dataclass(frozen=True, eq=False)
class AbsorbingSpec:
    """ The base MDP, the absorbing state s and the per-step rewards u (shape (H,)). """
    base: TabularMDP
    state: int
    u: np.ndarray

    def __post_init__(self):
        if not 0 <= self.state < self.base.S:
            raise ValidationError('state', f"absorbing state {self.state} is outside "
                                  f"[0, {self.base.S})")
        u = _frozen(self.u, 'u')
        if u.shape != (self.base.H,):
            raise DimensionMismatchError('u', f"expected shape ({self.base.H},), got {u.shape}")
        if np.any(u < 0):
            raise ValidationError(f"u[{int(np.argmin(u))}]", "absorbing rewards must be >= 0")
        if np.any(u > self.base.H):
            raise ValidationError(f"u[{int(np.argmax(u))}]",
                                  f"absorbing rewards must be <= H = {self.base.H}")
        object.__setattr__(self, 'state', int(self.state))
        object.__setattr__(self, 'u', u)


def build_absorbing(spec):
    """ M_{s,{u_t}}: P'(s|s,a) = 1 and r'_t(s,a) = u_t, identical to the base elsewhere. """
    base = widen(spec.base)
    s = spec.state
    P = np.array(base.P)
    P[s] = 0.0
    P[s, :, s] = 1.0
    R_t = np.array(base.R_t)
    R_t[:, s, :] = spec.u[:, None]
    return TimeVaryingMDP(P, R_t, base.d1, base.H)


def singleton_u(mdp, s):
    """ u*_t = V*_t(s) - V*_{t+1}(s) for every step t, with V*_{H+1} = 0.

        Raises:
            InvariantViolation: if an entry is below -1e-12 (broken monotonicity).
    """
    values = widen(mdp).plan()
    u = values.V[:-1, s] - values.V[1:, s]
    if np.min(u) < -DP_TOL:
        t = int(np.argmin(u))
        raise InvariantViolation(f"V*_{t}({s}) - V*_{t + 1}({s}) = {u[t]:.3g} is negative; "
                                 "optimal values are not monotone in the step")
    return np.clip(u, 0.0, None)


def verify_singleton_identity(mdp, s, u=None, tol=IDENTITY_TOL):
    """ Check that the singleton-absorbing MDP reproduces V*_h of 'mdp' everywhere.

    Args:
        mdp (TabularMDP): the MDP, true or empirical.
        s (int): the absorbing state.
        u (np.ndarray): the absorbing rewards; defaults to singleton_u(mdp, s).
        tol (float): the allowed max deviation.

    Returns:
        A dict with state, max_deviation, passed and u.
    """
    if u is None:
        u = singleton_u(mdp, s)
    absorbed = build_absorbing(AbsorbingSpec(mdp, s, u)).plan()
    original = widen(mdp).plan()
    deviation = float(np.max(np.abs(absorbed.V[:-1] - original.V[:-1])))
    return {'state': int(s), 'max_deviation': deviation, 'passed': deviation <= tol,
            'u': np.asarray(u).tolist()}


def verify_all_states(mdp, tol=IDENTITY_TOL):
    return [verify_singleton_identity(mdp, s, tol=tol) for s in range(mdp.S)]


def absorbing_value_identity(spec):
    """ V*_{h,{s,u}}(s) = sum over t >= h of u_t on the absorbing MDP. """
    values = build_absorbing(spec).plan()
    expected = np.cumsum(spec.u[::-1])[::-1]
    deviation = float(np.max(np.abs(values.V[:-1, spec.state] - expected)))
    return {'state': spec.state, 'max_deviation': deviation, 'passed': deviation <= DP_TOL}


def q_diff_bound_check(mdp, s, u, u2):
    """ max_h ||Q*_{h,{s,u}} - Q*_{h,{s,u2}}||_inf <= H * max_t |u_t - u2_t|.

        Returns:
            A dict with lhs, rhs, slack, ratio (lhs / rhs, None when rhs = 0) and passed.
    """
    first = build_absorbing(AbsorbingSpec(mdp, s, u)).plan()
    second = build_absorbing(AbsorbingSpec(mdp, s, u2)).plan()
    lhs = float(np.max(np.abs(first.Q[:-1] - second.Q[:-1])))
    rhs = float(mdp.H * np.max(np.abs(np.asarray(u, dtype=float) - np.asarray(u2, dtype=float))))
    return {'lhs': lhs, 'rhs': rhs, 'slack': rhs - lhs,
            'ratio': lhs / rhs if rhs > 0 else None,
            'passed': lhs <= rhs + IDENTITY_TOL}


def singleton_gap(truth, model, s):
    """ Delta_s = max_t |u_hat*_t - u*_t| and the empirical error of using u* in place of u_hat*.

        Reports ||V_hat*_h - V_hat*_{h,{s,u*}}||_inf (max over h) and whether it is
        at most H * Delta_s. Delta_s itself carries no threshold.
    """
    empirical = to_mdp(model)
    u_star = singleton_u(truth, s)
    u_hat = singleton_u(empirical, s)
    delta = float(np.max(np.abs(u_hat - u_star)))
    deviation = verify_singleton_identity(empirical, s, u=u_star, tol=np.inf)['max_deviation']
    return {'state': int(s), 'delta': delta, 'value_deviation': deviation,
            'bound_holds': deviation <= truth.H * delta + IDENTITY_TOL}
