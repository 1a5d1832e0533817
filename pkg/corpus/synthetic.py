"""Long-range copy task.

Each sequence is::

    <mark> payload filler × lag <query> payload

Filler and payload are uniform over the alphabet, so the only predictable
symbol that needs memory is the payload right after the query token.
"""
from __future__ import annotations

import pathlib
from dataclasses import dataclass
from typing import List, Tuple, Union

import numpy as np

from models.errors import ContractViolation
from models.tensor import Rng

from .vocab import TokenCorpus


@dataclass
class CopyTask:
    alphabet: int
    lag: int

    @property
    def marker(self) -> int:
        return self.alphabet

    @property
    def query(self) -> int:
        return self.alphabet + 1

    @property
    def vocab_size(self) -> int:
        return self.alphabet + 2

    @property
    def sequence_length(self) -> int:
        return self.lag + 4

    def token_names(self) -> List[str]:
        return [f's{i}' for i in range(self.alphabet)] + ['<mark>', '<query>']

    def generate(self, n_sequences: int, rng: np.random.Generator,
                 split: str = 'train') -> TokenCorpus:
        payload = rng.integers(0, self.alphabet, size=n_sequences)
        filler = rng.integers(0, self.alphabet, size=(n_sequences, self.lag))
        rows = np.empty((n_sequences, self.sequence_length), dtype=np.int64)
        rows[:, 0] = self.marker
        rows[:, 1] = payload
        rows[:, 2:2 + self.lag] = filler
        rows[:, 2 + self.lag] = self.query
        rows[:, 3 + self.lag] = payload
        return TokenCorpus(ids=rows.ravel(), vocab_size=self.vocab_size, split=split)

    def query_positions(self, corpus: TokenCorpus) -> np.ndarray:
        """Positions i whose next token (i + 1) is a recalled payload."""
        positions = np.flatnonzero(corpus.ids == self.query)
        return positions[positions < len(corpus) - 1]

    def to_text(self, corpus: TokenCorpus) -> str:
        names = self.token_names()
        rows = corpus.ids.reshape(-1, self.sequence_length)
        return ''.join(' '.join(names[i] for i in row) + '\n' for row in rows)


def gen_copy_task(n_sequences: int, lag: int, alphabet: int,
                  seed: int) -> Tuple[TokenCorpus, TokenCorpus, CopyTask]:
    """Train and valid corpora of `n_sequences` each (valid from its own stream)."""
    if lag < 1:
        raise ContractViolation('data', f'copy task lag must be at least 1, got {lag}')
    if alphabet < 1 or n_sequences < 1:
        raise ContractViolation('data', 'copy task needs a non-empty alphabet and sequences')
    task = CopyTask(alphabet=alphabet, lag=lag)
    rng = Rng(seed)
    train = task.generate(n_sequences, rng.stream('copy-task', 'train'), 'train')
    valid = task.generate(n_sequences, rng.stream('copy-task', 'valid'), 'valid')
    return train, valid, task


def write_copy_task(out_dir: Union[str, pathlib.Path], n_sequences: int, lag: int,
                    alphabet: int, seed: int) -> List[pathlib.Path]:
    """Write train/valid/test splits as plain text, one sequence per line."""
    out_dir = pathlib.Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train, valid, task = gen_copy_task(n_sequences, lag, alphabet, seed)
    test = task.generate(n_sequences, Rng(seed).stream('copy-task', 'test'), 'test')

    paths = []
    for corpus in (train, valid, test):
        path = out_dir / f'copy.{corpus.split}.txt'
        path.write_text(task.to_text(corpus), encoding='utf-8')
        paths.append(path)
    return paths
