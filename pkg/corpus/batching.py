from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, List

import numpy as np

from models.errors import ContractViolation

from .vocab import TokenCorpus


@dataclass
class SequenceBatch:
    """One truncated-BPTT window for every stream: (batch, window) arrays."""
    inputs: np.ndarray
    targets: np.ndarray
    index: int

    @property
    def n_targets(self) -> int:
        return self.targets.size


def split_streams(corpus: TokenCorpus, batch_size: int) -> np.ndarray:
    """Cut the corpus into `batch_size` contiguous streams, dropping the remainder."""
    stream_len = len(corpus) // batch_size
    return corpus.ids[:batch_size * stream_len].reshape(batch_size, stream_len)


def count_windows(corpus: TokenCorpus, batch_size: int, window_length: int) -> int:
    return (len(corpus) // batch_size - 1) // window_length


def batchify(corpus: TokenCorpus, batch_size: int, window_length: int) -> Iterator[SequenceBatch]:
    """Contiguous windows per stream; consecutive windows of a stream are adjacent
    in the corpus and targets are inputs shifted by one position."""
    if batch_size < 1 or window_length < 1:
        raise ContractViolation('data', 'batch size and window length must be positive')
    if len(corpus) < batch_size * (window_length + 1):
        raise ContractViolation(
            'data', f'{corpus.split} corpus of {len(corpus)} tokens is too small for '
                    f'batch {batch_size} × window {window_length}')

    streams = split_streams(corpus, batch_size)
    for index in range(count_windows(corpus, batch_size, window_length)):
        start = index * window_length
        yield SequenceBatch(
            inputs=streams[:, start:start + window_length],
            targets=streams[:, start + 1:start + window_length + 1],
            index=index,
        )


def stream_offsets(corpus: TokenCorpus, batch_size: int) -> List[int]:
    stream_len = len(corpus) // batch_size
    return [stream_len * b for b in range(batch_size)]
