from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Union

import numpy as np

Key = Union[int, str]


def _key_to_int(key: Key) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode('utf-8'))
    return int(key)


@dataclass
class Rng:
    """Counter-based generator: a stream is fully determined by (seed, keys).

    `stream()` never mutates, so draws keyed by tensor name do not depend on the
    order in which tensors are initialized. `next_stream()` is the explicit way to
    advance: it hands out the stream for the current counter and bumps it.
    """
    seed: int
    counter: int = 0

    def stream(self, *keys: Key) -> np.random.Generator:
        entropy = [self.seed & 0xFFFFFFFFFFFFFFFF] + [_key_to_int(k) for k in keys]
        return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))

    def next_stream(self) -> np.random.Generator:
        generator = self.stream('draw', self.counter)
        self.counter += 1
        return generator
