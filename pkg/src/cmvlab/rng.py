"""Counter-based random streams for reproducible (and shardable) Monte Carlo.

Every sampler in the package takes an :class:`RngStream`, a value object
naming one independent stream of a counter-based generator (Philox).  Equal
``(seed, stream_index)`` always reproduces the same draws, and distinct
stream indices give statistically independent streams, so trials can be
sharded across workers in any order without changing results.

Streams nest: ``substream(purpose, trial)`` derives the stream for one
(purpose, trial) cell, and derived streams can themselves be subdivided.
Each level packs purpose and trial into one 64-bit key component.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

# Per-level key layout: key = purpose * PURPOSE_STRIDE + trial.
PURPOSE_STRIDE = 2 ** 32


@dataclass(frozen=True)
class RngStream:
    """Names one reproducible random stream."""

    seed: int
    stream_index: Union[int, Tuple[int, ...]] = 0

    def __post_init__(self):
        if not (0 <= self.seed < 2 ** 64):
            raise ValueError("seed must fit in 64 bits")
        key = self.stream_index
        if isinstance(key, int):
            key = (key,)
        key = tuple(int(k) for k in key)
        if not all(0 <= k < 2 ** 64 for k in key):
            raise ValueError("stream_index parts must fit in 64 bits")
        object.__setattr__(self, "stream_index", key if len(key) > 1
                           else key[0])

    def _key(self) -> Tuple[int, ...]:
        k = self.stream_index
        return k if isinstance(k, tuple) else (k,)

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        ss = np.random.SeedSequence(entropy=self.seed,
                                    spawn_key=self._key())
        return np.random.Generator(np.random.Philox(ss))

    def substream(self, purpose: int, trial: int = 0) -> "RngStream":
        """Derived stream for one (purpose, trial) cell of this stream."""
        if not 0 <= trial < PURPOSE_STRIDE:
            raise ValueError("trial index exceeds the stream partition")
        if purpose < 0 or purpose * PURPOSE_STRIDE >= 2 ** 64:
            raise ValueError("purpose index exceeds the stream partition")
        return RngStream(self.seed,
                         self._key() + (purpose * PURPOSE_STRIDE + trial,))


def trial_stream(seed: int, purpose: int, trial: int) -> RngStream:
    """Stream for trial ``trial`` of purpose ``purpose`` under ``seed``."""
    return RngStream(seed).substream(purpose, trial)
