""" Module for seeded MDP instance families used by the harness and the tests """
import numpy as np
from scipy.linalg import null_space
from .errors import ValidationError
from .mdp_core import TabularMDP, Policy
from .anchor import AnchorLinearMDP
from .trajectory import RngStream

FAMILIES = ('dirichlet_random', 'chain', 'near_uniform', 'near_tie')
NEAR_UNIFORM_EPS = 0.1
NEAR_TIE_GAPS = (5e-4, 3.2e-2)
ANCHOR_TIE_GAPS = (1e-5, 3e-2)
ANCHOR_REWARD_SPREAD = 0.1


def _dirichlet_rows(gen, shape, size):
    return gen.dirichlet(np.ones(size), size=shape)


def _perturbed(gen, shape, size):
    """ Uniform rows over 'size' outcomes, each entry perturbed by at most NEAR_UNIFORM_EPS. """
    noise = gen.uniform(-NEAR_UNIFORM_EPS, NEAR_UNIFORM_EPS, size=shape + (size,))
    noise -= noise.mean(axis=-1, keepdims=True)
    return (1.0 + noise) / size


def _dirichlet_random(gen, S, A, H):
    P = _dirichlet_rows(gen, (S, A), S)
    r = gen.random((S, A))
    d1 = gen.dirichlet(np.ones(S))
    mu = 0.5 * np.full((H, S, A), 1.0 / A) + 0.5 * _dirichlet_rows(gen, (H, S), A)
    return TabularMDP(P, r, d1, H), Policy(mu)


def _chain(gen, S, A, H):
    """ Action 0 stays, every other action advances one state around the cycle.

        Episodes start at the highest-reward state, so V*_1 there is H max_s rho(s).
    """
    P = np.zeros((S, A, S))
    for s in range(S):
        P[s, 0, s] = 1.0
        P[s, 1:, (s + 1) % S] = 1.0
    rho = gen.random(S)
    r = np.repeat(rho[:, None], A, axis=1)
    d1 = np.zeros(S)
    d1[int(np.argmax(rho))] = 1.0
    return TabularMDP(P, r, d1, H), Policy.uniform(H, S, A)


def _near_uniform(gen, S, A, H):
    """ Uniform dynamics, start and behavior, each perturbed by at most NEAR_UNIFORM_EPS. """
    P = _perturbed(gen, (S, A), S)
    d1 = _perturbed(gen, (), S)
    mu = _perturbed(gen, (H, S), A)
    return TabularMDP(P, gen.random((S, A)), d1, H), Policy(mu)


def _near_tie(gen, S, A, H):
    """ Near-uniform dynamics that ignore the action, with near-tied rewards.

        Each state has one best action worth b_s; every other action there earns
        b_s - gap_s. The gaps run geometrically over NEAR_TIE_GAPS across states, and
        since transitions do not depend on the action every Q gap equals its reward
        gap at every step.
    """
    P = np.repeat(_perturbed(gen, (S,), S)[:, None, :], A, axis=1)
    d1 = _perturbed(gen, (), S)
    mu = _perturbed(gen, (H, S), A)
    base = gen.permutation(np.linspace(0.2, 0.8, S))
    gaps = gen.permutation(np.geomspace(*NEAR_TIE_GAPS, S))
    best = gen.integers(A, size=S)
    r = np.repeat((base - gaps)[:, None], A, axis=1)
    r[np.arange(S), best] = base
    return TabularMDP(P, r, d1, H), Policy(mu)


def generate_instance(spec):
    """ A seeded MDP and behavior policy.

    Args:
        spec (dict): family (one of 'dirichlet_random', 'chain', 'near_uniform',
            'near_tie'; default 'dirichlet_random'), S, A, H and seed.

    Returns:
        (TabularMDP, Policy)
    """
    family = spec.get('family', 'dirichlet_random')
    if family not in FAMILIES:
        raise ValidationError('family', f"unknown family `{family}`; choose from {FAMILIES}")
    for key in ('S', 'A', 'H'):
        value = spec.get(key)
        if value is None or int(value) != value or value < 1:
            raise ValidationError(key, f"must be a positive integer, got {value!r}")
    S, A, H = int(spec['S']), int(spec['A']), int(spec['H'])
    if family == 'chain' and A < 2:
        raise ValidationError('A', "the chain family needs at least two actions")
    gen = RngStream(int(spec.get('seed', 0))).generator()
    return {'dirichlet_random': _dirichlet_random,
            'chain': _chain,
            'near_uniform': _near_uniform,
            'near_tie': _near_tie}[family](gen, S, A, H)


def _tied_anchor_rewards(gen, psi, S, A):
    """ Rewards whose optimal action gaps are the same at every step.

        u = 0.5 + w with psi w = 0, so P(s, a) u is the same for every pair and the
        step values are u shifted by a constant. The best action of each state earns
        u(s); the others earn u(s) minus a gap from ANCHOR_TIE_GAPS, spaced
        geometrically.
    """
    basis = null_space(psi)
    w = basis @ gen.normal(size=basis.shape[1])
    if np.abs(w).max(initial=0.0) > 0:
        w *= ANCHOR_REWARD_SPREAD / np.abs(w).max()
    u = 0.5 + w
    gaps = gen.permutation(np.geomspace(*ANCHOR_TIE_GAPS, S * A)).reshape(S, A)
    best = gen.integers(A, size=S)
    gaps[np.arange(S), best] = 0.0
    return u[:, None] - gaps


def generate_anchor_instance(S=20, A=3, H=5, K=6, seed=0, near_tie=False):
    """ A seeded anchor linear MDP.

        The K anchors carry the standard basis of R^K as features; every other pair
        mixes them with Dirichlet weights, so each feature lies in the anchors' hull.
        Rows of psi are Dirichlet distributions over the S states. Rewards are uniform
        draws, or near-tied ones with fixed action gaps when 'near_tie' is set.
    """
    if K > S * A:
        raise ValidationError('K', f"cannot place {K} anchors on {S * A} pairs")
    gen = RngStream(int(seed)).generator()
    flat = gen.choice(S * A, size=K, replace=False)
    anchors = [divmod(int(i), A) for i in flat]
    phi = gen.dirichlet(np.ones(K), size=(S, A))
    for k, (s, a) in enumerate(anchors):
        phi[s, a] = np.eye(K)[k]
    psi = gen.dirichlet(np.ones(S), size=K)
    r = _tied_anchor_rewards(gen, psi, S, A) if near_tie else gen.random((S, A))
    return AnchorLinearMDP(phi, psi, anchors, H, r)
