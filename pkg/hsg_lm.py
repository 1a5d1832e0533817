#!/usr/bin/env python3

import argparse
import logging
import pathlib
import sys
from typing import Dict, List, Optional

import numpy as np
from pydantic import (BaseModel, NonNegativeFloat, PositiveFloat, PositiveInt,
                      ValidationError, confloat)

from corpus import Vocab, build_vocab, load_splits, read_corpus, write_copy_task
from diagnostics import (depth_sweep, gate_histogram, gradient_probe, path_lengths,
                         random_gradcheck, summarize, write_sweep)
from models.errors import ContractViolation, NumericalFailure
from models.lm import ModelConfig, evaluate_perplexity, init_model, load_checkpoint
from models.lm.config import Rate
from models.tensor import Rng
from training import TrainConfig, train

# Usage:
# ./hsg_lm.py train --train ptb.train.txt --valid ptb.valid.txt --depth 10 --out runs/d10
# ./hsg_lm.py paths --arch rhn+hsg --depth 30 --horizon 10


def root_dir():
    """Root directory."""
    return pathlib.Path(__file__).parent


VERSION = '0.1.0'
GRADCHECK_TOLERANCE = 1e-5
GRADCHECK_VOCAB = 5
ENUMERATE_MAX_HORIZON = 12

logging.basicConfig(
    level=logging.INFO, format='%(asctime)s :: %(levelname)s :: %(message)s',
    datefmt='%H:%M:%S'
)

logger = logging.getLogger(__name__)


class CliConfig(BaseModel):
    """Every option the subcommands read, with its default.

    Values come from (in increasing priority) these defaults, the `--config`
    file and command-line flags.
    """
    seed: int = 0
    # model
    depth: PositiveInt = 10
    hidden: PositiveInt = 830
    embed: Optional[PositiveInt] = None
    vocab_cap: Optional[PositiveInt] = None
    hsg: bool = True
    coupled: bool = True
    gate_bias: float = -2.5
    precision: int = 64
    dropout_embedding: Rate = 0.0
    dropout_state: Rate = 0.0
    dropout_output: Rate = 0.0
    dropout_hsg: Rate = 0.0
    # training
    lr: NonNegativeFloat = 0.2
    lr_decay: confloat(gt=0.0, le=1.0) = 0.98
    epochs: PositiveInt = 20
    window: PositiveInt = 35
    batch: PositiveInt = 20
    l2: NonNegativeFloat = 1e-7
    clip: Optional[PositiveFloat] = 10.0
    eval_every: PositiveInt = 1
    # data and files
    train: Optional[str] = None
    valid: Optional[str] = None
    test: Optional[str] = None
    out: str = 'out'
    checkpoint: Optional[str] = None
    resume: Optional[str] = None
    # diagnostics
    arch: str = 'rhn+hsg'
    horizon: PositiveInt = 10
    probe_step: int = 0
    max_lag: PositiveInt = 20
    steps: PositiveInt = 80
    bins: PositiveInt = 20
    # copy task and sweep
    lag: PositiveInt = 50
    alphabet: PositiveInt = 16
    sequences: PositiveInt = 1000
    depths: str = '4,8'
    seeds: PositiveInt = 3

    class Config:
        extra = 'forbid'

    def to_model_config(self, vocab_size: int) -> ModelConfig:
        return ModelConfig(
            depth=self.depth, hidden=self.hidden, embed=self.embed, vocab_size=vocab_size,
            coupled=self.coupled, use_hsg=self.hsg, gate_bias_init=self.gate_bias,
            precision=self.precision, dropout_embedding=self.dropout_embedding,
            dropout_state=self.dropout_state, dropout_output=self.dropout_output,
            dropout_hsg=self.dropout_hsg,
        )

    def to_train_config(self) -> TrainConfig:
        return TrainConfig(
            initial_lr=self.lr, lr_decay=self.lr_decay, epochs=self.epochs,
            window_length=self.window, batch_size=self.batch, l2_lambda=self.l2,
            clip_norm=self.clip, seed=self.seed, eval_every=self.eval_every,
        )

    def echo(self) -> str:
        """The resolved options in config-file grammar."""
        values = self.dict()
        return ''.join(f'{key} = {_format_value(values[key])}\n' for key in sorted(values))


def _format_value(value) -> str:
    if value is None:
        return 'none'
    if isinstance(value, bool):
        return 'true' if value else 'false'
    return str(value)


def read_config_file(path) -> Dict[str, Optional[str]]:
    """Parse flat `key = value` lines; `#` starts a comment."""
    path = pathlib.Path(path)
    if not path.is_file():
        raise ContractViolation('cli', f'config file not found: {path}')

    options = {}
    for number, raw in enumerate(path.read_text(encoding='utf-8').splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition('=')
        if not sep:
            raise ContractViolation('cli', f'{path}:{number}: expected "key = value"')
        value = value.strip()
        options[key.strip().replace('-', '_')] = None if value.lower() == 'none' else value
    return options


def resolve_config(args: argparse.Namespace) -> CliConfig:
    options = read_config_file(args.config) if getattr(args, 'config', None) else {}
    flags = {key: value for key, value in vars(args).items()
             if key not in ('command', 'config', 'verbose', 'quiet')}
    options.update(flags)
    return CliConfig(**options)


def _output_dir(cfg: CliConfig) -> pathlib.Path:
    out = pathlib.Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / 'config.cfg').write_text(cfg.echo(), encoding='utf-8')
    return out


def _require(cfg: CliConfig, *keys: str) -> None:
    missing = [key for key in keys if getattr(cfg, key) is None]
    if missing:
        raise ContractViolation('cli', 'missing required option(s): '
                                + ', '.join('--' + k.replace('_', '-') for k in missing))


def _load_model(cfg: CliConfig, vocab_size: int):
    """Model from --checkpoint when given, freshly initialized otherwise."""
    if cfg.checkpoint:
        checkpoint = load_checkpoint(cfg.checkpoint)
        return checkpoint.params, checkpoint.config
    model_config = cfg.to_model_config(vocab_size)
    return init_model(model_config, cfg.seed), model_config


def _read_text(path, split: str) -> str:
    path = pathlib.Path(path)
    if not path.is_file():
        raise ContractViolation('cli', f'{split} file not found: {path}')
    return path.read_text(encoding='utf-8')


def _vocab_for_checkpoint(cfg: CliConfig) -> Optional[Vocab]:
    if cfg.checkpoint:
        vocab_path = pathlib.Path(cfg.checkpoint).parent / 'vocab.txt'
        if vocab_path.is_file():
            return Vocab.load(vocab_path)
    return None


def _diagnostic_tokens(cfg: CliConfig, vocab_size: int, length: int) -> np.ndarray:
    """Tokens of --valid when given (and a vocabulary is at hand), random otherwise."""
    vocab = _vocab_for_checkpoint(cfg)
    if cfg.valid and vocab is not None:
        return read_corpus(cfg.valid, vocab, 'valid').ids
    return Rng(cfg.seed).stream('cli-tokens').integers(0, vocab_size, size=length)


def cmd_train(cfg: CliConfig) -> int:
    _require(cfg, 'train', 'valid')
    out = _output_dir(cfg)
    vocab, splits = load_splits(cfg.train, cfg.valid, cfg.test, cfg.vocab_cap)
    vocab.save(out / 'vocab.txt')

    result = train(cfg.to_model_config(len(vocab)), cfg.to_train_config(), splits,
                   out_dir=out, resume_from=cfg.resume, progress=True)
    print(f'best valid perplexity: {result.best_valid_ppl:.3f}')
    return 0


def cmd_eval(cfg: CliConfig) -> int:
    _require(cfg, 'checkpoint')
    checkpoint = load_checkpoint(cfg.checkpoint)
    vocab = _vocab_for_checkpoint(cfg)
    if vocab is None:
        _require(cfg, 'train')
        vocab = build_vocab(_read_text(cfg.train, 'train'), cfg.vocab_cap)

    for split in ('valid', 'test'):
        path = getattr(cfg, split)
        if path:
            corpus = read_corpus(path, vocab, split)
            ppl = evaluate_perplexity(checkpoint.params, checkpoint.config, corpus, cfg.window)
            print(f'{split} perplexity: {ppl:.3f}')
    return 0


def cmd_gradcheck(cfg: CliConfig) -> int:
    model_config = cfg.to_model_config(cfg.vocab_cap or GRADCHECK_VOCAB).copy(
        update={'precision': 64})
    report = random_gradcheck(model_config, seed=cfg.seed, window=3)
    print(f'max relative error: {report.max_rel_error:.3e} ({report.worst_tensor})')
    if not report.passed(GRADCHECK_TOLERANCE):
        raise NumericalFailure('diagnostics', f'gradient check failed in {report.worst_tensor}',
                               tensor=report.worst_tensor)
    return 0


def cmd_probe(cfg: CliConfig) -> int:
    out = _output_dir(cfg)
    params, model_config = _load_model(cfg, cfg.vocab_cap or 10)
    tokens = _diagnostic_tokens(cfg, model_config.vocab_size, cfg.probe_step + cfg.max_lag + 2)
    report = gradient_probe(params, model_config, tokens, cfg.probe_step, cfg.max_lag)
    report.write_csv(out / 'probe.csv')
    for row in report.rows:
        print(f'{row.lag}\t{row.state_grad_norm:.6g}')
    return 0


def cmd_hist(cfg: CliConfig) -> int:
    out = _output_dir(cfg)
    params, model_config = _load_model(cfg, cfg.vocab_cap or 10)
    tokens = _diagnostic_tokens(cfg, model_config.vocab_size, 10 * cfg.steps + 1)
    histogram = gate_histogram(params, model_config, tokens, cfg.steps, cfg.bins, cfg.seed)
    histogram.write_values(out / 'gates.csv')
    histogram.write_csv(out / 'gate_histogram.csv')
    print(f'{histogram.total} gate values, {histogram.mass(0.0, 0.3):.1%} in [0, 0.3]')
    return 0


def cmd_paths(cfg: CliConfig) -> int:
    report = path_lengths(cfg.arch, cfg.depth, cfg.horizon,
                          enumerate_routes=cfg.horizon <= ENUMERATE_MAX_HORIZON)
    if report.agrees is False:
        logger.warning('Closed form %s differs from enumerated routes %s',
                       report.lengths, report.enumerated)
    report.write_csv(_output_dir(cfg) / 'paths.csv')
    print(' '.join(str(length) for length in report.lengths))
    return 0


def cmd_synth(cfg: CliConfig) -> int:
    paths = write_copy_task(cfg.out, cfg.sequences, cfg.lag, cfg.alphabet, cfg.seed)
    for path in paths:
        print(path)
    return 0


def cmd_sweep(cfg: CliConfig) -> int:
    out = _output_dir(cfg)
    try:
        depths = [int(d) for d in cfg.depths.split(',') if d.strip()]
    except ValueError:
        raise ContractViolation('cli', f'--depths must be comma separated integers: {cfg.depths}')

    runs = depth_sweep(depths, [cfg.seed + i for i in range(cfg.seeds)],
                       cfg.to_model_config(cfg.alphabet + 2), cfg.to_train_config(),
                       lag=cfg.lag, alphabet=cfg.alphabet, n_sequences=cfg.sequences,
                       data_seed=cfg.seed, progress=True)
    write_sweep(out / 'sweep.csv', runs)
    for summary in summarize(runs):
        print(f'depth {summary.depth}: vanilla {summary.vanilla_query_loss:.4f} '
              f'hsg {summary.hsg_query_loss:.4f} advantage {summary.hsg_advantage:+.4f}')
    return 0


COMMANDS = {
    'train': (cmd_train, 'Train a language model'),
    'eval': (cmd_eval, 'Perplexity of a checkpoint on --valid/--test'),
    'gradcheck': (cmd_gradcheck, 'Finite-difference check of the full model'),
    'probe': (cmd_probe, 'Gradient norm through time'),
    'hist': (cmd_hist, 'Histogram of HSG gate values'),
    'paths': (cmd_paths, 'Route lengths through the unrolled graph'),
    'synth': (cmd_synth, 'Write the copy task as text corpora'),
    'sweep': (cmd_sweep, 'Depth sweep, vanilla vs HSG, on the copy task'),
}


def build_parser() -> argparse.ArgumentParser:
    options = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    options.add_argument('--config', metavar='FILE', help='Flat "key = value" config file')
    options.add_argument('--seed', type=int, help='Seed for every random draw (default: 0)')
    options.add_argument('--verbose', action='store_true', default=False, help='Debug logging')
    options.add_argument('--quiet', action='store_true', default=False, help='Warnings only')

    model = options.add_argument_group('model')
    model.add_argument('--depth', type=int, metavar='L', help='Transition depth (default: 10)')
    model.add_argument('--hidden', type=int, metavar='N', help='Hidden size (default: 830)')
    model.add_argument('--embed', type=int, metavar='M', help='Embedding size (default: hidden)')
    model.add_argument('--vocab-cap', type=int, metavar='V', help='Keep the V most frequent tokens')
    model.add_argument('--hsg', dest='hsg', action='store_true', help='Add the HSG cell (default)')
    model.add_argument('--no-hsg', dest='hsg', action='store_false', help='Vanilla RHN')
    model.add_argument('--coupled', dest='coupled', action='store_true', help='C = 1 - T (default)')
    model.add_argument('--uncoupled', dest='coupled', action='store_false', help='Separate C gate')
    model.add_argument('--gate-bias', type=float, help='Initial T and HSG gate bias (default: -2.5)')
    model.add_argument('--precision', type=int, choices=(32, 64), help='Float bits (default: 64)')
    for site in ('embedding', 'state', 'output', 'hsg'):
        model.add_argument(f'--dropout-{site}', type=float, metavar='P',
                           help=f'Variational dropout on the {site} site (default: 0)')

    training = options.add_argument_group('training')
    training.add_argument('--lr', type=float, help='Initial learning rate (default: 0.2)')
    training.add_argument('--lr-decay', type=float, help='Per-epoch lr factor (default: 0.98)')
    training.add_argument('--epochs', type=int, help='Epochs (default: 20)')
    training.add_argument('--window', type=int, help='Truncated BPTT length (default: 35)')
    training.add_argument('--batch', type=int, help='Parallel streams (default: 20)')
    training.add_argument('--l2', type=float, help='L2 weight decay on matrices (default: 1e-7)')
    training.add_argument('--clip', type=lambda v: None if v.lower() == 'none' else float(v),
                          help='Global gradient norm cap, or "none" (default: 10)')
    training.add_argument('--eval-every', type=int, help='Epochs between evaluations (default: 1)')

    files = options.add_argument_group('files')
    for split in ('train', 'valid', 'test'):
        files.add_argument(f'--{split}', metavar='PATH', help=f'{split} text file')
    files.add_argument('--out', metavar='DIR', help='Output directory (default: out)')
    files.add_argument('--checkpoint', metavar='PATH', help='Checkpoint to evaluate or probe')
    files.add_argument('--resume', metavar='PATH', help='Resume training from a checkpoint')

    diag = options.add_argument_group('diagnostics')
    diag.add_argument('--arch', choices=('stacked', 'rhn', 'rhn+hsg'),
                      help='Architecture for paths (default: rhn+hsg)')
    diag.add_argument('--horizon', type=int, metavar='T', help='Time steps for paths (default: 10)')
    diag.add_argument('--probe-step', type=int, help='Step t the probe measures at (default: 0)')
    diag.add_argument('--max-lag', type=int, help='Largest probe lag (default: 20)')
    diag.add_argument('--steps', type=int, help='Random steps for the histogram (default: 80)')
    diag.add_argument('--bins', type=int, help='Histogram bins (default: 20)')
    diag.add_argument('--lag', type=int, help='Copy task lag (default: 50)')
    diag.add_argument('--alphabet', type=int, help='Copy task alphabet (default: 16)')
    diag.add_argument('--sequences', type=int, help='Copy task sequences per split (default: 1000)')
    diag.add_argument('--depths', help='Comma separated sweep depths (default: 4,8)')
    diag.add_argument('--seeds', type=int, help='Seeds per sweep cell (default: 3)')

    parser = argparse.ArgumentParser('hsg-lm')
    parser.add_argument('--version', '-v', action='version', version=f'%(prog)s {VERSION}')
    subparsers = parser.add_subparsers(dest='command', required=True)
    for name, (_, help_text) in COMMANDS.items():
        subparsers.add_parser(name, parents=[options], help=help_text)
    return parser


def run(argv: List[str]) -> int:
    """Run one subcommand: 0 ok, 1 bad config/data, 2 numerical failure."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    elif args.quiet:
        logging.getLogger().setLevel(logging.WARNING)

    try:
        cfg = resolve_config(args)
        handler, _ = COMMANDS[args.command]
        return handler(cfg)
    except ValidationError as e:
        logger.error('cli: invalid configuration\n%s', e)
        return 1
    except ContractViolation as e:
        logger.error('%s', e)
        return 1
    except NumericalFailure as e:
        logger.error('%s', e)
        return 2


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == '__main__':
    main()
