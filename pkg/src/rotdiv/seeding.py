"""Deterministic random-stream derivation shared by every randomized component.

All randomness in this package flows through Philox, a named 64-bit
counter-based generator.  A stream is addressed by a master seed plus a
tuple of integer stream indices (trial number, SNR point, chunk index, ...),
mapped through ``numpy.random.SeedSequence(entropy=seed, spawn_key=indices)``.
Because the stream address fully determines the stream, results never depend
on execution order or on how work is split across workers.
"""

from __future__ import annotations

import numpy as np


def derive_rng(master_seed: int, *stream: int) -> np.random.Generator:
    """Return the Philox generator for stream ``(master_seed, *stream)``.

    Identical arguments always produce a bit-identical stream; distinct
    stream indices produce statistically independent streams.
    """
    seed = int(master_seed)
    if seed < 0:
        raise ValueError("master seed must be a nonnegative integer")
    key = tuple(int(s) for s in stream)
    ss = np.random.SeedSequence(entropy=seed, spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


def complex_normal(rng: np.random.Generator, shape, variance: float = 1.0) -> np.ndarray:
    """Circularly symmetric complex Gaussian samples with the given variance."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
