from __future__ import annotations

import logging
import pathlib
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from models.errors import ContractViolation

logger = logging.getLogger(__name__)

UNK = '<unk>'
EOS = '<eos>'


def tokenize(text: str) -> List[str]:
    """Whitespace tokens; every line break becomes an end-of-sentence token.

    A last line without a trailing newline gets no end-of-sentence token.
    """
    lines = text.split('\n')
    tokens = []
    for number, line in enumerate(lines, start=1):
        tokens.extend(line.split())
        if number < len(lines):
            tokens.append(EOS)
    return tokens


def detokenize(tokens: Iterable[str]) -> str:
    lines, current = [], []
    for token in tokens:
        if token == EOS:
            lines.append(' '.join(current))
            current = []
        else:
            current.append(token)
    text = ''.join(line + '\n' for line in lines)
    if current:
        text += ' '.join(current)
    return text


@dataclass
class Vocab:
    id_to_token: List[str]
    token_to_id: Dict[str, int] = field(init=False)

    def __post_init__(self):
        self.token_to_id = {token: index for index, token in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise ContractViolation('data', 'vocabulary has duplicate tokens')
        if UNK not in self.token_to_id:
            raise ContractViolation('data', f'vocabulary lacks {UNK}')

    @property
    def unk_id(self) -> int:
        return self.token_to_id[UNK]

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def encode(self, tokens: Iterable[str]) -> np.ndarray:
        unk = self.unk_id
        return np.fromiter((self.token_to_id.get(t, unk) for t in tokens), dtype=np.int64)

    def decode(self, ids: Iterable[int]) -> List[str]:
        return [self.id_to_token[int(i)] for i in ids]

    def save(self, path: Union[str, pathlib.Path]) -> None:
        pathlib.Path(path).write_text(''.join(t + '\n' for t in self.id_to_token), encoding='utf-8')

    @classmethod
    def load(cls, path: Union[str, pathlib.Path]) -> Vocab:
        return cls(pathlib.Path(path).read_text(encoding='utf-8').splitlines())


def build_vocab(train_text: Union[str, Sequence[str]], max_size: Optional[int] = None) -> Vocab:
    """Vocabulary from training text.

    Tokens are ranked by frequency, ties broken lexicographically. With no
    `max_size` every distinct token is kept (pre-capped corpora such as PTB);
    otherwise the top `max_size - 1` tokens plus the unk token. Unk always takes
    the last id unless it occurs in the text and no cap is set.
    """
    tokens = tokenize(train_text) if isinstance(train_text, str) else list(train_text)
    if not tokens:
        raise ContractViolation('data', 'cannot build a vocabulary from empty text')
    if max_size is not None and max_size < 2:
        raise ContractViolation('data', f'vocabulary cap must be at least 2, got {max_size}')

    counts = Counter(tokens)
    ranked = sorted(counts, key=lambda token: (-counts[token], token))
    if max_size is None:
        if UNK not in counts:
            ranked.append(UNK)
        return Vocab(ranked)

    kept = [token for token in ranked if token != UNK][:max_size - 1]
    dropped = len(counts) - len(kept) - (1 if UNK in counts else 0)
    if dropped:
        logger.info('Vocabulary capped at %d; %d token types map to %s', max_size, dropped, UNK)
    return Vocab(kept + [UNK])


@dataclass
class TokenCorpus:
    ids: np.ndarray
    vocab_size: int
    split: str = 'train'

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        if self.ids.ndim != 1:
            raise ContractViolation('data', 'corpus ids must be a flat sequence')
        if len(self.ids) and (self.ids.min() < 0 or self.ids.max() >= self.vocab_size):
            raise ContractViolation(
                'data', f'{self.split} corpus has ids outside [0, {self.vocab_size})')

    def __len__(self) -> int:
        return len(self.ids)


def encode_text(text: str, vocab: Vocab, split: str = 'train') -> TokenCorpus:
    tokens = tokenize(text)
    ids = vocab.encode(tokens)
    unknown = sum(1 for t in tokens if t not in vocab and t != UNK)
    if unknown:
        warnings.warn(f'{unknown} tokens of the {split} split are not in the vocabulary')
    return TokenCorpus(ids=ids, vocab_size=len(vocab), split=split)


def read_corpus(path: Union[str, pathlib.Path], vocab: Vocab, split: str) -> TokenCorpus:
    path = pathlib.Path(path)
    if not path.is_file():
        raise ContractViolation('data', f'{split} file not found: {path}')
    corpus = encode_text(path.read_text(encoding='utf-8'), vocab, split)
    logger.info('Loaded %s split: %d tokens from %s', split, len(corpus), path)
    return corpus


@dataclass
class CorpusSplits:
    train: TokenCorpus
    valid: TokenCorpus
    test: Optional[TokenCorpus] = None

    @property
    def vocab_size(self) -> int:
        return self.train.vocab_size


def load_splits(train_path, valid_path, test_path=None,
                max_size: Optional[int] = None) -> tuple[Vocab, CorpusSplits]:
    """Vocabulary from the train file, then every split encoded with it."""
    train_path = pathlib.Path(train_path)
    if not train_path.is_file():
        raise ContractViolation('data', f'train file not found: {train_path}')
    vocab = build_vocab(train_path.read_text(encoding='utf-8'), max_size)
    splits = CorpusSplits(
        train=read_corpus(train_path, vocab, 'train'),
        valid=read_corpus(valid_path, vocab, 'valid'),
        test=read_corpus(test_path, vocab, 'test') if test_path else None,
    )
    return vocab, splits
