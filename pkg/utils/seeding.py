"""
Seed management for reproducible runs.

Every random draw in weavelane comes from a numpy Generator built from a
SeedSequence, so a run is fully determined by its seed. Streams that must
not disturb each other (inflow arrivals, policy sampling, minibatch shuffling)
are spawned as independent children of one sequence.
"""

import logging

import numpy as np

logger = logging.getLogger("weavelane")

# spawn_key tags so an iteration's streams never collide with an episode's
_EPISODE_TAG = 0
_ITERATION_TAG = 1
_INIT_TAG = 2


def episode_streams(seed):
    """(spawn_rng, policy_rng) for one episode"""
    spawn_seq, policy_seq = np.random.SeedSequence(seed, spawn_key=(_EPISODE_TAG,)).spawn(2)
    return np.random.default_rng(spawn_seq), np.random.default_rng(policy_seq)


def init_rng(seed):
    """Generator for network initialization"""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_INIT_TAG,)))


def iteration_seed_sequence(seed, iteration):
    return np.random.SeedSequence(seed, spawn_key=(_ITERATION_TAG, iteration))


def iteration_episode_seeds(seed, iteration, count):
    """Episode seeds for one training iteration; depends only on (seed, iteration)"""
    seq = iteration_seed_sequence(seed, iteration)
    return [int(s) for s in seq.generate_state(count, dtype=np.uint32)]


def iteration_shuffle_rng(seed, iteration):
    seq = np.random.SeedSequence(seed, spawn_key=(_ITERATION_TAG, iteration, 1))
    return np.random.default_rng(seq)


def evaluation_seeds(seed, episodes):
    """Episode k of an evaluation runs with seed + k"""
    seeds = [seed + k for k in range(episodes)]
    logger.debug("evaluation seeds %d..%d", seeds[0] if seeds else seed, seeds[-1] if seeds else seed)
    return seeds
