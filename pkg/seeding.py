#!/usr/bin/env python3
"""
Seed handling: every random draw in the simulator flows from one master seed.

Named sub-streams (device, powers, sampler, detector, ...) and per-trial
generators are derived with numpy's SeedSequence spawn keys, so a trial's
randomness depends only on (master seed, stream, trial index) and never on
how trials are distributed over worker threads.
"""

from typing import Optional, Union

import numpy as np

import config

SeedLike = Union[int, np.random.SeedSequence, None]


def seed_sequence(seed: SeedLike, *key: int) -> np.random.SeedSequence:
    """
    Build the SeedSequence for ``seed`` extended by an integer spawn key.

    Args:
        seed: Master seed (non-negative int) or an existing SeedSequence
        *key: Integer path below the master seed

    Returns:
        np.random.SeedSequence: Deterministic sequence for that path
    """
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(
            entropy=seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(int(k) for k in key)
        )
    return np.random.SeedSequence(entropy=0 if seed is None else int(seed), spawn_key=tuple(int(k) for k in key))


def generator(seed: SeedLike, *key: int) -> np.random.Generator:
    """Return a PCG64 generator for ``seed`` and spawn key."""
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *key)))


def stream(seed: SeedLike, name: str, *key: int) -> np.random.SeedSequence:
    """
    Derive a named sub-stream of the master seed.

    Args:
        seed: Master seed
        name: One of config.SEED_STREAMS
        *key: Optional further indices (e.g. power-setting index)

    Returns:
        np.random.SeedSequence: Seed of the sub-stream
    """
    if name not in config.SEED_STREAMS:
        raise KeyError(f"Unknown seed stream '{name}'")
    return seed_sequence(seed, config.SEED_STREAMS[name], *key)


def trial_generator(seed: SeedLike, trial: int) -> np.random.Generator:
    """Generator owned by a single trial."""
    return generator(seed, trial)


def as_generator(seed: Optional[Union[SeedLike, np.random.Generator]]) -> np.random.Generator:
    """Accept either a seed or a ready generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return generator(seed)
