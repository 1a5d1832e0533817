from .batching import SequenceBatch, batchify, count_windows, split_streams, stream_offsets
from .synthetic import CopyTask, gen_copy_task, write_copy_task
from .vocab import (EOS, UNK, CorpusSplits, TokenCorpus, Vocab, build_vocab, detokenize,
                    encode_text, load_splits, read_corpus, tokenize)


__all__ = [
    'EOS',
    'UNK',
    'CopyTask',
    'CorpusSplits',
    'SequenceBatch',
    'TokenCorpus',
    'Vocab',
    'batchify',
    'build_vocab',
    'count_windows',
    'detokenize',
    'encode_text',
    'gen_copy_task',
    'load_splits',
    'read_corpus',
    'split_streams',
    'stream_offsets',
    'tokenize',
    'write_copy_task',
]
