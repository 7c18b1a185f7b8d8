""" Module for linear MDPs with anchor representations under a generative oracle.

    Every feature vector phi(s, a) is a convex combination of the features of a
    finite set of anchor pairs. Sampling N next states from each anchor and mixing
    the empirical anchor rows with those coefficients gives a plug-in transition
    for every pair.
"""
from dataclasses import dataclass
import numpy as np
from scipy.optimize import nnls
from .errors import ValidationError, DimensionMismatchError, NotRepresentableError
from .mdp_core import TabularMDP, check_distribution_rows, plan_tables, evaluate_tables, \
    widen_reward, Policy, _frozen
from .trajectory import draw_categorical
from .metric_types import log

MODEL_TOL = 1e-10
RESIDUAL_TOL = 1e-9
LAMBDA_TOL = 1e-9
ROW_TOL = 1e-12


def _normalized(P):
    P = np.clip(P, 0.0, None)
    return P / P.sum(axis=-1, keepdims=True)


@dataclass(frozen=True, eq=False)
class AnchorLinearMDP:
    """ P(s'|s,a) = sum_k phi_k(s,a) psi_k(s').

        Attributes:
            phi (np.ndarray): features, shape (S, A, d).
            psi (np.ndarray): factors, shape (d, S); held for simulation only.
            anchors (list): the anchor (s, a) pairs.
            H (int): horizon.
            r (np.ndarray): mean reward, shape (S, A).
            d1 (np.ndarray): initial distribution; uniform when omitted.
    """
    phi: np.ndarray
    psi: np.ndarray
    anchors: list
    H: int
    r: np.ndarray
    d1: np.ndarray = None

    def __post_init__(self):
        phi = _frozen(self.phi, 'phi')
        psi = _frozen(self.psi, 'psi')
        if phi.ndim != 3 or psi.ndim != 2 or phi.shape[2] != psi.shape[0]:
            raise DimensionMismatchError('phi', f"phi {phi.shape} and psi {psi.shape} do not "
                                         "share a feature dimension")
        if psi.shape[1] != phi.shape[0]:
            raise DimensionMismatchError('psi', f"psi covers {psi.shape[1]} states but phi has "
                                         f"{phi.shape[0]}")
        anchors = [tuple(int(x) for x in sa) for sa in self.anchors]
        if len(anchors) < 1:
            raise ValidationError('anchors', "at least one anchor is required")
        for i, (s, a) in enumerate(anchors):
            if not (0 <= s < phi.shape[0] and 0 <= a < phi.shape[1]):
                raise ValidationError(f"anchors[{i}]", f"pair {(s, a)} is out of range")
        P = np.einsum('sad,dt->sat', phi, psi)
        if np.any(P < -MODEL_TOL):
            s, a, t = np.argwhere(P < -MODEL_TOL)[0]
            raise ValidationError(f"P[{s}][{a}][{t}]", f"negative probability {P[s, a, t]!r}")
        check_distribution_rows(np.clip(P, 0.0, None), 'P', tol=MODEL_TOL)
        d1 = self.d1
        if d1 is None:
            d1 = np.full(phi.shape[0], 1.0 / phi.shape[0])
        object.__setattr__(self, 'phi', phi)
        object.__setattr__(self, 'psi', psi)
        object.__setattr__(self, 'anchors', anchors)
        object.__setattr__(self, 'd1', _frozen(d1, 'd1'))
        object.__setattr__(self, 'r', _frozen(self.r, 'r'))
        object.__setattr__(self, 'H', int(self.H))
        object.__setattr__(self, '_mdp', TabularMDP(_normalized(P), self.r, self.d1, self.H))
        object.__setattr__(self, '_lambda_cache', {})

    @property
    def S(self):
        return self.phi.shape[0]

    @property
    def A(self):
        return self.phi.shape[1]

    @property
    def K(self):
        return len(self.anchors)

    @property
    def mdp(self):
        """ The true tabular MDP. """
        return self._mdp

    def anchor_phi(self):
        """ Anchor features, shape (K, d). """
        return np.stack([self.phi[s, a] for s, a in self.anchors])

    def coefficients(self, sa):
        """ Simplex weights of 'sa' over the anchors, solved once per pair. """
        sa = tuple(int(x) for x in sa)
        if sa not in self._lambda_cache:
            self._lambda_cache[sa] = solve_lambda(self.anchor_phi(), self.phi[sa], sa=sa)
        return self._lambda_cache[sa]

    def all_coefficients(self):
        """ Weights for every pair, shape (S, A, K). """
        return np.stack([np.stack([self.coefficients((s, a)) for a in range(self.A)])
                         for s in range(self.S)])

    def to_dict(self):
        return {'phi': self.phi.tolist(), 'psi': self.psi.tolist(),
                'anchors': [list(sa) for sa in self.anchors], 'H': self.H,
                'r': self.r.tolist(), 'd1': self.d1.tolist()}


@dataclass(frozen=True, eq=False)
class AnchorModel:
    """ Empirical anchor rows (K, S) from N samples each, plus resolved weights.

        Attributes:
            anchor_rows (np.ndarray): shape (K, S).
            lambdas (np.ndarray): shape (S, A, K) once resolved, else None.
            N (int): samples per anchor; None for exact rows.
    """
    anchor_rows: np.ndarray
    lambdas: np.ndarray = None
    N: int = None

    def __post_init__(self):
        rows = _frozen(self.anchor_rows, 'anchor_rows')
        check_distribution_rows(rows, 'anchor_rows', tol=ROW_TOL)
        object.__setattr__(self, 'anchor_rows', rows)
        if self.lambdas is not None:
            lambdas = _frozen(self.lambdas, 'lambdas')
            if lambdas.shape[-1] != rows.shape[0]:
                raise DimensionMismatchError('lambdas', f"{lambdas.shape[-1]} weights for "
                                             f"{rows.shape[0]} anchors")
            check_distribution_rows(lambdas, 'lambdas', tol=LAMBDA_TOL)
            object.__setattr__(self, 'lambdas', lambdas)

    @classmethod
    def exact(cls, mdp):
        """ The model with the true anchor rows, as if N were infinite. """
        return cls(np.stack([mdp.mdp.P[s, a] for s, a in mdp.anchors]))

    def with_lambdas(self, lambdas):
        return AnchorModel(self.anchor_rows, lambdas, self.N)


def solve_lambda(anchors_phi, target_phi, sa=None):
    """ Simplex-constrained least squares for the anchor weights of one feature vector.

    Non-negative least squares on the anchor features with an appended row of ones,
    so the weights are pushed onto the simplex, then normalized.

    Args:
        anchors_phi (np.ndarray): shape (K, d).
        target_phi (np.ndarray): shape (d,).
        sa (tuple): the pair being solved, for error messages.

    Returns:
        The weights, shape (K,).

    Raises:
        NotRepresentableError: if the residual exceeds 1e-9.
    """
    anchors_phi = np.asarray(anchors_phi, dtype=float)
    target_phi = np.asarray(target_phi, dtype=float)
    if anchors_phi.ndim != 2 or anchors_phi.shape[0] < 1:
        raise ValidationError('anchors_phi', "need at least one anchor feature vector")
    if anchors_phi.shape[1] != target_phi.shape[0]:
        raise DimensionMismatchError('target_phi', f"dimension {target_phi.shape[0]} does not "
                                     f"match the anchors' {anchors_phi.shape[1]}")
    system = np.r_[anchors_phi.T, np.ones((1, anchors_phi.shape[0]))]
    weights, _ = nnls(system, np.r_[target_phi, 1.0])
    total = weights.sum()
    if total <= 0:
        raise NotRepresentableError(sa, float(np.linalg.norm(target_phi)))
    weights = weights / total
    residual = float(np.linalg.norm(anchors_phi.T @ weights - target_phi))
    if residual > RESIDUAL_TOL:
        raise NotRepresentableError(sa, residual)
    return weights


def resolve_lambdas(model, mdp):
    """ Attach the weights of every pair of 'mdp' to 'model'. """
    return model.with_lambdas(mdp.all_coefficients())


def sample_anchors(mdp, N, rng):
    """ Draw N next states from each anchor through the generative oracle.

        Anchor k uses the stream rng.generator(k).

        Returns:
            An AnchorModel with rows count(s_k, a_k, s') / N and no weights yet.
    """
    if isinstance(N, bool) or int(N) != N or N < 1:
        raise ValidationError('N', f"samples per anchor must be a positive integer, got {N!r}")
    rows = np.empty((mdp.K, mdp.S))
    for k, (s, a) in enumerate(mdp.anchors):
        draws = draw_categorical(mdp.mdp.P[s, a], rng.generator(k), int(N))
        rows[k] = np.bincount(draws, minlength=mdp.S) / N
    return AnchorModel(rows, N=int(N))


def plugin_transition(model, sa):
    """ P_hat(.|s,a) = sum_k lambda_k^{s,a} P_hat_K(.|s_k,a_k). """
    if model.lambdas is None:
        raise ValidationError('lambdas', f"weights for {tuple(sa)} are not resolved")
    s, a = sa
    return model.lambdas[s, a] @ model.anchor_rows


def plugin_mdp(model, mdp):
    """ The empirical tabular MDP built from plug-in rows of every pair. """
    if model.lambdas is None:
        model = resolve_lambdas(model, mdp)
    P_hat = np.einsum('sak,kt->sat', model.lambdas, model.anchor_rows)
    check_distribution_rows(P_hat, 'P_hat', tol=LAMBDA_TOL)
    return TabularMDP(_normalized(P_hat), mdp.r, mdp.d1, mdp.H)


def anchor_plan(model, mdp):
    """ Plan on the plug-in MDP and measure ||Q*_1 - Q^pi_hat_1||_inf on the truth.

        Returns:
            (Policy, report) with report fields suboptimality and N.
    """
    empirical = plugin_mdp(model, mdp)
    _, actions = plan_tables(empirical.P, widen_reward(empirical.r, empirical.H))
    pi_hat = Policy.deterministic(actions, mdp.A)
    truth = mdp.mdp
    R_t = widen_reward(truth.r, truth.H)
    star, _ = plan_tables(truth.P, R_t)
    achieved = evaluate_tables(truth.P, R_t, pi_hat.probs)
    gap = float(np.max(np.abs(star.Q[0] - achieved.Q[0])))
    log.info("Anchor plan with N=%s has suboptimality %.4g.", model.N, gap)
    return pi_hat, {'suboptimality': gap, 'N': model.N}


def variance(p, V):
    """ Var_p(V) = p . V^2 - (p . V)^2, clipped at 0. """
    mean = p @ V
    return max(float(p @ (V * V) - mean * mean), 0.0)


def recover_check(mdp, sa, V):
    """ sum_k lambda_k sqrt(Var_{P(.|s_k,a_k)}(V)) <= sqrt(Var_{P(.|s,a)}(V)). """
    V = np.asarray(V, dtype=float)
    if V.shape != (mdp.S,):
        raise DimensionMismatchError('V', f"expected shape ({mdp.S},), got {V.shape}")
    weights = mdp.coefficients(sa)
    P = mdp.mdp.P
    lhs = float(sum(w * np.sqrt(variance(P[s, a], V))
                    for w, (s, a) in zip(weights, mdp.anchors)))
    rhs = float(np.sqrt(variance(P[tuple(sa)], V)))
    return {'sa': list(sa), 'lhs': lhs, 'rhs': rhs, 'passed': lhs <= rhs + MODEL_TOL}


recover_lemma_check = recover_check
