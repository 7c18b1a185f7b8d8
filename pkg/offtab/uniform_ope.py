""" Module for uniform offline policy evaluation over the global and local policy classes,
    and the H = 2 reduction of uniform OPE to l1 density estimation """
import math
from dataclasses import dataclass, field
import numpy as np
from .errors import ValidationError, EnumerationCapError, MembershipError
from .mdp_core import (Policy, DP_TOL, evaluate_tables, plan_tables, plan_optimal,
                       evaluate_deterministic_batch, widen_reward)
from .plugin import to_mdp
from .metric_types import log

KINDS = ('global_exhaustive', 'global_sampled', 'local')
GLOBAL_MODES = ('auto', 'exhaustive', 'sampled')
DEFAULT_CAP = 10 ** 7
CHUNK = 4096
LOCAL_BUDGET = 50


@dataclass(frozen=True)
class PolicyClassSpec:
    """ Which policy class a uniform error is taken over.

        Attributes:
            kind (str): one of 'global_exhaustive', 'global_sampled', 'local'.
            samples (int): M, the number of sampled policies.
            eps_opt (float): the local-class radius.
            enumeration_cap (int): the largest class enumerated exhaustively.
    """
    kind: str
    samples: int = 200
    eps_opt: float = 0.0
    enumeration_cap: int = DEFAULT_CAP

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError('kind', f"unknown policy class `{self.kind}`; choose from {KINDS}")
        if self.kind != 'global_exhaustive' and (int(self.samples) != self.samples
                                                 or self.samples < 1):
            raise ValidationError('samples', f"sample count must be >= 1, got {self.samples!r}")
        if not math.isfinite(self.eps_opt) or self.eps_opt < 0:
            raise ValidationError('eps_opt', f"must be finite and >= 0, got {self.eps_opt!r}")
        if self.enumeration_cap < 1:
            raise ValidationError('enumeration_cap', "must be positive")

    def regime_flags(self, H, S):
        """ Flags for a local radius outside the eps_opt <= sqrt(H/S) regime. """
        if self.kind == 'local' and self.eps_opt > math.sqrt(H / S):
            return ['eps_opt_above_regime']
        return []


@dataclass(frozen=True, eq=False)
class UniformErrorReport:
    """ The sup of ||Q_hat_1 - Q_1||_inf over an examined policy set. """
    sup_error: float
    argmax_policy: Policy
    per_policy_errors: np.ndarray = None
    class_size_examined: int = 0
    mode_flags: list = field(default_factory=list)

    def to_dict(self):
        return {'sup_error': self.sup_error,
                'argmax_policy': self.argmax_policy.probs.tolist(),
                'per_policy_errors': (None if self.per_policy_errors is None
                                      else np.asarray(self.per_policy_errors).tolist()),
                'class_size_examined': self.class_size_examined,
                'mode_flags': list(self.mode_flags)}


@dataclass(frozen=True, eq=False)
class LocalClassSample:
    """ Output of local-class rejection sampling. """
    policies: list
    exhausted: bool
    drawn: int
    passed: int

    @property
    def acceptance_rate(self):
        return self.passed / self.drawn if self.drawn else 1.0


def global_class_spec(mode, S, A, H, samples=200, cap=DEFAULT_CAP):
    """ Resolve a sweep's global_mode into a PolicyClassSpec.

        'auto' enumerates when A^(S*H) fits under the cap and samples otherwise.
    """
    if mode not in GLOBAL_MODES:
        raise ValidationError('global_mode', f"unknown mode `{mode}`; choose from {GLOBAL_MODES}")
    if mode == 'exhaustive' or (mode == 'auto' and A ** (S * H) <= cap):
        return PolicyClassSpec('global_exhaustive', samples=samples, enumeration_cap=cap)
    return PolicyClassSpec('global_sampled', samples=samples, enumeration_cap=cap)


def decode_policies(indices, A, H, S):
    """ Map enumeration indices to (B, H, S) action tables; digit h * S + s is the action at (h, s). """
    powers = np.asarray(A, dtype=np.int64) ** np.arange(H * S, dtype=np.int64)
    digits = (np.asarray(indices, dtype=np.int64)[:, None] // powers) % A
    return digits.reshape(-1, H, S)


def _batch_errors(truth, empirical, actions):
    Q = evaluate_deterministic_batch(truth.P, widen_reward(truth.r, truth.H), actions)
    Q_hat = evaluate_deterministic_batch(empirical.P, widen_reward(empirical.r, empirical.H),
                                         actions)
    return np.abs(Q_hat - Q).reshape(len(actions), -1).max(axis=1)


def _sweep_batches(truth, empirical, batches, keep_errors):
    best, best_actions, kept, examined = -1.0, None, [], 0
    for actions in batches:
        errors = _batch_errors(truth, empirical, actions)
        i = int(np.argmax(errors))
        if errors[i] > best:
            best, best_actions = float(errors[i]), actions[i]
        if keep_errors:
            kept.append(errors)
        examined += len(actions)
    return best, best_actions, (np.concatenate(kept) if keep_errors else None), examined


def global_uniform_error(truth, model, spec, rng=None, keep_errors=False):
    """ sup over deterministic non-stationary policies of ||Q_hat^pi_1 - Q^pi_1||_inf.

    Q_hat is evaluated on the empirical MDP and Q on the truth. The exhaustive mode
    is exact over the whole global class; the sampled mode examines M uniformly drawn
    deterministic policies and is flagged as a lower bound.

    Args:
        truth (TabularMDP): the data-generating MDP.
        model (EmpiricalModel): the fitted plug-in model.
        spec (PolicyClassSpec): 'global_exhaustive' or 'global_sampled'.
        rng (RngStream): required for the sampled mode.
        keep_errors (bool): whether to keep every per-policy error.

    Returns:
        A UniformErrorReport.

    Raises:
        EnumerationCapError: if A^(S*H) exceeds the cap in exhaustive mode.
    """
    S, A, H = truth.S, truth.A, truth.H
    empirical = to_mdp(model)
    if spec.kind == 'global_exhaustive':
        class_size = A ** (S * H)
        if class_size > spec.enumeration_cap:
            raise EnumerationCapError(class_size, spec.enumeration_cap)
        batches = (decode_policies(np.arange(start, min(start + CHUNK, class_size)), A, H, S)
                   for start in range(0, class_size, CHUNK))
        flags = ['exhaustive']
    elif spec.kind == 'global_sampled':
        if rng is None:
            raise ValidationError('rng', "parameter `rng` is required but missing")
        log.warning("Sampling %d global policies; the sup is a lower bound.", spec.samples)
        drawn = rng.generator().integers(0, A, size=(spec.samples, H, S))
        batches = (drawn[start:start + CHUNK] for start in range(0, spec.samples, CHUNK))
        flags = ['sampled', 'lower_bound']
    else:
        raise ValidationError('kind', "the local class is handled by local_uniform_error")

    best, best_actions, errors, examined = _sweep_batches(truth, empirical, batches, keep_errors)
    return UniformErrorReport(best, Policy.deterministic(best_actions, A), errors, examined, flags)


def policy_error(truth, empirical, pi):
    """ ||Q_hat^pi_1 - Q^pi_1||_inf with both MDPs given explicitly. """
    Q = evaluate_tables(truth.P, widen_reward(truth.r, truth.H), pi.probs).Q[0]
    Q_hat = evaluate_tables(empirical.P, widen_reward(empirical.r, empirical.H), pi.probs).Q[0]
    return float(np.max(np.abs(Q_hat - Q)))


def pointwise_error(truth, model, pi):
    """ Point-wise OPE error of one fixed policy. """
    return policy_error(truth, to_mdp(model), pi)


def empirical_optimal(model):
    """ The empirical optimal policy and its values on the empirical MDP. """
    values, pi_hat = plan_optimal(to_mdp(model))
    return pi_hat, values


def _gap(empirical, probs, star_V):
    V = evaluate_tables(empirical.P, widen_reward(empirical.r, empirical.H), probs).V
    return float(np.max(np.abs(V[:-1] - star_V[:-1])))


def optimization_gap(model, pi):
    """ max over steps h of ||V_hat^pi_h - V_hat^*_h||_inf on the empirical MDP. """
    empirical = to_mdp(model)
    star, _ = plan_tables(empirical.P, widen_reward(empirical.r, empirical.H))
    return _gap(empirical, pi.probs, star.V)


def _perturb(star, gen):
    """ A k-site action perturbation (k geometric) or a mixture toward uniform. """
    H, S, A = star.probs.shape
    if gen.random() < 0.5:
        k = min(int(gen.geometric(0.5)), H * S)
        sites = gen.choice(H * S, size=k, replace=False)
        actions = star.actions().copy()
        for site in sites:
            h, s = divmod(int(site), S)
            actions[h, s] = (actions[h, s] + gen.integers(1, A)) % A if A > 1 else 0
        return Policy.deterministic(actions, A)
    alpha = gen.random()
    return Policy((1.0 - alpha) * star.probs + alpha / A)


def sample_local_class(model, eps_opt, M, rng):
    """ Rejection-sample up to M distinct members of the local policy class.

    Candidates are perturbations of the empirical optimal policy; a candidate is
    kept when max_h ||V_hat^pi_h - V_hat^*_h||_inf <= eps_opt. The empirical optimal
    policy is always the first member. At most 50 * M candidates are drawn.

    Returns:
        A LocalClassSample; 'exhausted' is set when the budget ran out first.
    """
    if not math.isfinite(eps_opt) or eps_opt < 0:
        raise ValidationError('eps_opt', f"must be finite and >= 0, got {eps_opt!r}")
    empirical = to_mdp(model)
    star_values, star_actions = plan_tables(empirical.P, widen_reward(empirical.r, empirical.H))
    star = Policy.deterministic(star_actions, empirical.A)
    gen = rng.generator()
    accepted = [star]
    seen = {star.probs.tobytes()}
    drawn, passed = 0, 0
    while len(accepted) < M and drawn < LOCAL_BUDGET * M:
        drawn += 1
        candidate = _perturb(star, gen)
        if _gap(empirical, candidate.probs, star_values.V) > eps_opt + DP_TOL:
            continue
        passed += 1
        key = candidate.probs.tobytes()
        if key not in seen:
            seen.add(key)
            accepted.append(candidate)
    exhausted = len(accepted) < M
    if exhausted:
        log.warning("Local class sampling stopped at %d of %d policies after %d draws.",
                    len(accepted), M, drawn)
    return LocalClassSample(accepted, exhausted, drawn, passed)


def local_uniform_error(truth, model, policies, eps_opt):
    """ sup over a verified local-class sample of ||Q_hat^pi_1 - Q^pi_1||_inf.

    Raises:
        MembershipError: for the first policy whose value gap exceeds eps_opt.
    """
    if len(policies) == 0:
        raise ValidationError('policies', "the local class sample is empty")
    empirical = to_mdp(model)
    star_values, _ = plan_tables(empirical.P, widen_reward(empirical.r, empirical.H))
    errors = np.empty(len(policies))
    for i, pi in enumerate(policies):
        gap = _gap(empirical, pi.probs, star_values.V)
        if gap > eps_opt + DP_TOL:
            raise MembershipError(i, gap, eps_opt)
        errors[i] = policy_error(truth, empirical, pi)
    best = int(np.argmax(errors))
    regime = PolicyClassSpec('local', samples=len(policies), eps_opt=eps_opt)
    flags = ['local', 'lower_bound'] + regime.regime_flags(truth.H, truth.S)
    if 'eps_opt_above_regime' in flags:
        log.warning("eps_opt=%.4g is above sqrt(H/S)=%.4g.", eps_opt, math.sqrt(truth.H / truth.S))
    return UniformErrorReport(float(errors[best]), policies[best], errors, len(policies), flags)


def learning_suboptimality(truth, pi_hat):
    """ Element-wise V*_1 - V^pi_hat_1 on the truth, shape (S,). """
    star, _ = plan_tables(truth.P, widen_reward(truth.r, truth.H))
    V = evaluate_tables(truth.P, widen_reward(truth.r, truth.H), pi_hat.probs).V
    return star.V[0] - V[0]


def binary_reward_sup(p, q):
    """ sup over r in {0,1}^S of |(p - q) . r|, in closed form. """
    diff = np.asarray(p, dtype=float) - np.asarray(q, dtype=float)
    return float(max(diff[diff > 0].sum(), -diff[diff < 0].sum()))


def lower_bound_demo(truth, model, cap=DEFAULT_CAP):
    """ The H = 2 reduction of uniform OPE to l1 estimation of transition rows.

    The last-step reward is (1, 0, ..., 0) in every state, so the second-step values
    of the global class sweep every binary vector over states. The exhaustive sup of
    ||Q_hat_1 - Q_1||_inf then equals max over (s, a) of binary_reward_sup and is at
    least max over (s, a) of half the l1 row error.

    Returns:
        A dict with sup_q_error, binary_sup, half_l1, chain_holds, matches_binary,
        class_size.
    """
    if truth.H != 2:
        raise ValidationError('H', f"the lower-bound construction needs H = 2, got {truth.H}")
    if truth.A < 2:
        raise ValidationError('A', f"the lower-bound construction needs A >= 2, got {truth.A}")
    S, A = truth.S, truth.A
    last = np.zeros((S, A))
    last[:, 0] = 1.0
    R_t = np.stack([truth.r, last])
    class_size = A ** (2 * S)
    if class_size > cap:
        raise EnumerationCapError(class_size, cap)

    best = 0.0
    for start in range(0, class_size, CHUNK):
        actions = decode_policies(np.arange(start, min(start + CHUNK, class_size)), A, 2, S)
        Q = evaluate_deterministic_batch(truth.P, R_t, actions)
        Q_hat = evaluate_deterministic_batch(model.P_hat, R_t, actions)
        best = max(best, float(np.max(np.abs(Q_hat - Q))))

    binary = max(binary_reward_sup(model.P_hat[s, a], truth.P[s, a])
                 for s in range(S) for a in range(A))
    half_l1 = float(0.5 * np.abs(model.P_hat - truth.P).sum(axis=2).max())
    return {'sup_q_error': best,
            'binary_sup': binary,
            'half_l1': half_l1,
            'chain_holds': bool(best >= half_l1 - DP_TOL),
            'matches_binary': bool(abs(best - binary) <= DP_TOL),
            'class_size': class_size}


def local_bound_reference(n, d_m, H, S, A, delta=0.05):
    """ sqrt(H^2 iota / (n d_m)) + H^2.5 S^0.5 iota / (n d_m) with iota = log(HSA / delta).

        Unit constants; for inspection next to measured errors only.
    """
    iota = math.log(H * S * A / delta)
    return math.sqrt(H ** 2 * iota / (n * d_m)) + H ** 2.5 * math.sqrt(S) * iota / (n * d_m)
