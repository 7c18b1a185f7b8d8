""" Module for seeded generation of offline episode datasets under a behavior policy """
from dataclasses import dataclass
import numpy as np
from numpy.random import PCG64, SeedSequence, Generator
from .errors import ValidationError, DimensionMismatchError
from .metric_types import log

SEED_LIMIT = 2 ** 64


@dataclass(frozen=True)
class RngStream:
    """ A counter-based random stream identified by (base_seed, stream_index).

        Identical pairs reproduce identical draws; distinct pairs seed
        independent PCG64 generators through numpy's SeedSequence.
    """
    base_seed: int
    stream_index: int = 0

    def __post_init__(self):
        for name in ('base_seed', 'stream_index'):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or not 0 <= value < SEED_LIMIT:
                raise ValidationError(name, f"must be an integer in [0, 2**64), got {value!r}")
            object.__setattr__(self, name, int(value))

    def generator(self, *keys):
        """ A numpy Generator for this stream, optionally specialised by extra keys. """
        return Generator(PCG64(SeedSequence((self.base_seed, self.stream_index, *keys))))

    def derive(self, *keys):
        """ A new stream whose base seed is derived from this stream and 'keys'. """
        state = SeedSequence((self.base_seed, self.stream_index, *keys)).generate_state(
            1, dtype=np.uint64)
        return RngStream(int(state[0]), 0)


def categorical_cdf(probs):
    """ Cumulative sums along the last axis with the final positive bucket pinned to 1.

        Pinning lets the last bucket with positive mass absorb the rounding slack
        of the cumulative sum, so zero-probability buckets are never drawn.
    """
    probs = np.asarray(probs, dtype=float)
    cdf = np.cumsum(probs, axis=-1)
    num_buckets = probs.shape[-1]
    last_positive = num_buckets - 1 - np.argmax(probs[..., ::-1] > 0, axis=-1)
    cdf[np.arange(num_buckets) >= last_positive[..., None]] = 1.0
    return cdf


def inverse_cdf(cdf_rows, u):
    """ Inverse-CDF draw for each row of 'cdf_rows' (m, K) given uniforms 'u' (m,). """
    idx = np.sum(cdf_rows <= u[:, None], axis=1)
    return np.minimum(idx, cdf_rows.shape[1] - 1)


@dataclass(frozen=True, eq=False)
class EpisodeDataset:
    """ n length-H episodes of (state, action, next_state) triples.

        Attributes:
            transitions (np.ndarray): integer array of shape (n, H, 3).
            S, A, H (int): the shape of the generating MDP.
            base_seed, stream_index (int): the stream the episodes were drawn from.
    """
    transitions: np.ndarray
    S: int
    A: int
    H: int
    base_seed: int = 0
    stream_index: int = 0

    def __post_init__(self):
        transitions = np.array(self.transitions, dtype=np.int64)
        if transitions.ndim != 3 or transitions.shape[1:] != (self.H, 3):
            raise DimensionMismatchError('episodes', f"expected shape (n, {self.H}, 3), "
                                         f"got {transitions.shape}")
        if transitions.shape[0] < 1:
            raise ValidationError('episodes', "a dataset needs at least one episode")
        bounds = np.array([self.S, self.A, self.S])
        bad = np.argwhere((transitions < 0) | (transitions >= bounds))
        if len(bad) > 0:
            i, t, k = bad[0]
            raise ValidationError(f"episodes[{i}][{t}][{k}]",
                                  f"index {transitions[i, t, k]} out of range")
        broken = np.argwhere(transitions[:, 1:, 0] != transitions[:, :-1, 2])
        if len(broken) > 0:
            i, t = broken[0]
            raise ValidationError(f"episodes[{i}][{t + 1}]",
                                  "state does not continue the previous next_state")
        transitions.setflags(write=False)
        object.__setattr__(self, 'transitions', transitions)

    @property
    def n(self):
        return self.transitions.shape[0]

    @property
    def meta(self):
        return {'S': self.S, 'A': self.A, 'H': self.H, 'n': self.n,
                'base_seed': self.base_seed, 'stream_index': self.stream_index}

    def initial_states(self):
        return self.transitions[:, 0, 0]

    def episodes(self):
        """ The episodes as lists of (s, a, s') tuples. """
        return [[tuple(int(x) for x in step) for step in episode] for episode in self.transitions]

    def head(self, count):
        """ The first 'count' episodes as a dataset. """
        return EpisodeDataset(self.transitions[:count], self.S, self.A, self.H,
                              self.base_seed, self.stream_index)

    def same_as(self, other):
        return self.meta == other.meta and np.array_equal(self.transitions, other.transitions)


def roll_episodes(mdp, mu, n, rng):
    """ Roll n episodes of 'mu' on 'mdp'.

    Episode i draws its 2H + 1 uniforms from the stream (base_seed, stream_index, i),
    so the dataset is a deterministic function of (mdp, mu, n, rng), episodes can be
    drawn in any order, and growing n keeps the existing prefix.

    Args:
        mdp (TabularMDP): the data-generating MDP.
        mu (Policy): the behavior policy.
        n (int): the number of episodes (>= 1).
        rng (RngStream): the dataset stream.

    Returns:
        An EpisodeDataset.
    """
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValidationError('n', f"number of episodes must be a positive integer, got {n!r}")
    n = int(n)
    if mu.probs.shape != (mdp.H, mdp.S, mdp.A):
        raise DimensionMismatchError('probs', f"behavior policy has shape {mu.probs.shape} but "
                                     f"the MDP needs {(mdp.H, mdp.S, mdp.A)}")
    log.info("Rolling %d episodes on stream (%d, %d)...", n, rng.base_seed, rng.stream_index)
    width = 2 * mdp.H + 1
    uniforms = np.empty((n, width))
    for i in range(n):
        uniforms[i] = rng.generator(i).random(width)

    d1_cdf = np.broadcast_to(categorical_cdf(mdp.d1), (n, mdp.S))
    mu_cdf = categorical_cdf(mu.probs)
    P_cdf = categorical_cdf(mdp.P)

    transitions = np.empty((n, mdp.H, 3), dtype=np.int64)
    states = inverse_cdf(d1_cdf, uniforms[:, 0])
    for t in range(mdp.H):
        actions = inverse_cdf(mu_cdf[t, states], uniforms[:, 1 + 2 * t])
        next_states = inverse_cdf(P_cdf[states, actions], uniforms[:, 2 + 2 * t])
        transitions[:, t, 0] = states
        transitions[:, t, 1] = actions
        transitions[:, t, 2] = next_states
        states = next_states
    return EpisodeDataset(transitions, mdp.S, mdp.A, mdp.H, rng.base_seed, rng.stream_index)


def draw_categorical(probs, gen, size):
    """ 'size' inverse-CDF draws from one probability vector. """
    cdf = categorical_cdf(probs)
    idx = np.searchsorted(cdf, gen.random(size), side='right')
    return np.minimum(idx, len(cdf) - 1)
