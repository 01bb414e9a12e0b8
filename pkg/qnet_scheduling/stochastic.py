"""
Seeded random processes: Poisson ebit generation and demand arrivals,
binomial memory loss.
"""
import math

import numpy as np


SEED_MASK = (1 << 63) - 1


class RandomSource:
    """
    Single-owner random stream. Equal seeds and equal call sequences give
    equal draws on every platform (PCG64 bit generator).
    """

    def __init__(self, seed=0):
        self.seed = int(seed)
        self._generator = np.random.Generator(np.random.PCG64(self.seed))

    def __repr__(self):
        return '{}(seed={})'.format(self.__class__.__name__, self.seed)

    def poisson(self, means):
        means = np.asarray(means, dtype=float)
        if np.any(means < 0):
            raise ValueError('Poisson means must be nonnegative.')
        return np.asarray(self._generator.poisson(means), dtype=np.int64)

    def binomial(self, counts, probability):
        counts = np.asarray(counts, dtype=np.int64)
        if not 0.0 <= probability <= 1.0:
            raise ValueError('Probability must lie in [0, 1], got {}.'.format(probability))
        if np.any(counts < 0):
            raise ValueError('Binomial trial counts must be nonnegative.')
        return np.asarray(self._generator.binomial(counts, probability), dtype=np.int64)

    def integers(self, high):
        """Uniform integer in [0, high)."""
        return int(self._generator.integers(high))


def derive_seed(base_seed, *key):
    """Independent, reproducible 63-bit seed for one job of a sweep."""
    entropy = [int(base_seed)] + [int(part) for part in key]
    state = np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)
    return int(state[0]) & SEED_MASK


def _check_eta(eta):
    if not 0.0 < eta <= 1.0:
        raise ValueError('eta must lie in (0, 1], got {}.'.format(eta))


def sample_poisson(rng, mean):
    if mean < 0:
        raise ValueError('Poisson mean must be nonnegative, got {}.'.format(mean))
    return int(rng.poisson(mean))


def sample_losses(rng, stored, eta):
    """Ebits lost out of ``stored`` during one step: Binomial(stored, 1 - eta)."""
    _check_eta(eta)
    if stored < 0:
        raise ValueError('Stored ebit count must be nonnegative, got {}.'.format(stored))
    return int(rng.binomial(stored, 1.0 - eta))


def sample_loss_vector(rng, stored, eta):
    _check_eta(eta)
    return rng.binomial(stored, 1.0 - eta)


def eta_from_lifetime(tau, dt):
    """Per-step survival probability exp(-dt / tau) of a stored ebit."""
    if tau <= 0:
        raise ValueError('Memory lifetime tau must be positive, got {}.'.format(tau))
    if dt < 0:
        raise ValueError('Time step dt must be nonnegative, got {}.'.format(dt))
    return math.exp(-dt / tau)
