"""Checkpoint container.

A text header followed by a little-endian payload::

    HIGHWAY-LM 1
    config {"depth": 2, "hidden": 4, ...}
    meta {"epoch": 3, ...}
    tensor embedding f8 5x3 0
    tensor rhn.input.w_h f8 4x3 120
    ...
    end

`meta` is optional. Tensor offsets are byte offsets from the first payload byte;
tensor names never contain whitespace.
"""
from __future__ import annotations

import json
import logging
import pathlib
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Optional, Union

import numpy as np

from ..errors import ContractViolation
from .config import ModelConfig
from .params import ModelParams, params_from_tensors

logger = logging.getLogger(__name__)

MAGIC = 'HIGHWAY-LM 1'
PRECISION_CODES = {'f4': np.dtype('<f4'), 'f8': np.dtype('<f8')}


@dataclass
class Checkpoint:
    config: ModelConfig
    params: ModelParams
    meta: Dict[str, Any] = field(default_factory=dict)


def _code_for(array: np.ndarray) -> str:
    for code, dtype in PRECISION_CODES.items():
        if array.dtype.itemsize == dtype.itemsize and array.dtype.kind == 'f':
            return code
    raise ContractViolation('checkpoint', f'unsupported dtype {array.dtype}')


def save_checkpoint(path: Union[str, pathlib.Path], params: ModelParams, config: ModelConfig,
                    meta: Optional[Mapping[str, Any]] = None) -> pathlib.Path:
    path = pathlib.Path(path)
    tensors = params.named_tensors()

    lines = [MAGIC, 'config ' + json.dumps(config.dict(), sort_keys=True)]
    if meta:
        lines.append('meta ' + json.dumps(dict(meta), sort_keys=True))

    payload = []
    offset = 0
    for name, array in tensors.items():
        code = _code_for(array)
        data = np.ascontiguousarray(array, dtype=PRECISION_CODES[code]).tobytes()
        shape = 'x'.join(str(d) for d in array.shape)
        lines.append(f'tensor {name} {code} {shape} {offset}')
        payload.append(data)
        offset += len(data)
    lines.append('end')

    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_suffix(path.suffix + '.tmp')
    with tmp_path.open('wb') as f:
        f.write(('\n'.join(lines) + '\n').encode('utf-8'))
        for data in payload:
            f.write(data)
    tmp_path.replace(path)
    logger.debug('Checkpoint written to %s (%d tensors)', path, len(tensors))
    return path


def load_checkpoint(path: Union[str, pathlib.Path]) -> Checkpoint:
    path = pathlib.Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise ContractViolation('checkpoint', f'no checkpoint at {path}') from None

    marker = b'\nend\n'
    header_end = raw.find(marker)
    if not raw.startswith(MAGIC.encode('utf-8')) or header_end < 0:
        raise ContractViolation('checkpoint', f'{path} is not a checkpoint')
    header = raw[:header_end].decode('utf-8').split('\n')
    payload = memoryview(raw)[header_end + len(marker):]

    config, meta, tensors = None, {}, {}
    for line in header[1:]:
        kind, _, rest = line.partition(' ')
        if kind == 'config':
            config = ModelConfig(**json.loads(rest))
        elif kind == 'meta':
            meta = json.loads(rest)
        elif kind == 'tensor':
            name, code, shape_text, offset_text = rest.split(' ')
            dtype = PRECISION_CODES[code]
            shape = tuple(int(d) for d in shape_text.split('x') if d)
            offset = int(offset_text)
            count = int(np.prod(shape, dtype=np.int64))
            array = np.frombuffer(payload, dtype=dtype, count=count, offset=offset)
            tensors[name] = array.reshape(shape).astype(dtype.newbyteorder('='))
        else:
            raise ContractViolation('checkpoint', f'unknown header line {line!r}')

    if config is None:
        raise ContractViolation('checkpoint', f'{path} has no config block')

    return Checkpoint(config=config, params=params_from_tensors(config, tensors), meta=meta)
