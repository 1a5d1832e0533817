"""Route lengths through the unrolled graph from the state at time t to time t+T.

Graph model used by the enumerator: one node per highway (or stacked RNN) layer
per time step, one node per HSG cell; a route's length is the number of nodes it
visits, the source state itself excluded.
"""
from __future__ import annotations

import csv
import pathlib
from dataclasses import dataclass
from typing import Dict, Hashable, List, Optional, Set, Tuple, Union

from models.errors import ContractViolation

ARCHITECTURES = ('stacked', 'rhn', 'rhn+hsg')


@dataclass
class PathLengthReport:
    arch: str
    depth: int
    horizon: int
    lengths: List[int]
    enumerated: Optional[List[int]] = None

    @property
    def agrees(self) -> Optional[bool]:
        if self.enumerated is None:
            return None
        return self.lengths == self.enumerated

    def write_csv(self, path: Union[str, pathlib.Path]) -> None:
        enumerated = set(self.enumerated or [])
        with open(path, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(['arch', 'depth', 'horizon', 'length', 'enumerated'])
            for length in self.lengths:
                found = '' if self.enumerated is None else int(length in enumerated)
                writer.writerow([self.arch, self.depth, self.horizon, length, found])


def _check(arch: str, depth: int, horizon: int) -> None:
    if arch not in ARCHITECTURES:
        raise ContractViolation('diagnostics', f'unknown architecture {arch!r}')
    if depth < 1 or horizon < 1:
        raise ContractViolation('diagnostics', 'depth and horizon must be at least 1')


def path_lengths(arch: str, depth: int, horizon: int, enumerate_routes: bool = False
                 ) -> PathLengthReport:
    """Closed-form route lengths: L+T-1 stacked, L×T for RHN, T + L·j (j = 0..T) with HSG."""
    _check(arch, depth, horizon)
    if arch == 'stacked':
        lengths = [depth + horizon - 1]
    elif arch == 'rhn':
        lengths = [depth * horizon]
    else:
        lengths = sorted({horizon + depth * j for j in range(horizon + 1)})

    enumerated = enumerate_path_lengths(arch, depth, horizon) if enumerate_routes else None
    return PathLengthReport(arch=arch, depth=depth, horizon=horizon, lengths=lengths,
                            enumerated=enumerated)


def build_graph(arch: str, depth: int, horizon: int
                ) -> Tuple[Dict[Hashable, List[Hashable]], Hashable, Hashable]:
    """Explicit unrolled graph as (successors, source, sink).

    Layer nodes are ('layer', l, τ), HSG nodes ('hsg', τ); the source node is not
    counted in route lengths.
    """
    _check(arch, depth, horizon)
    succ: Dict[Hashable, List[Hashable]] = {}

    def edge(a, b):
        succ.setdefault(a, []).append(b)

    if arch == 'stacked':
        # Source is the input at time t entering layer 1; sink is layer L at the last step.
        source = 'source'
        edge(source, ('layer', 1, 0))
        for tau in range(horizon):
            for l in range(1, depth + 1):
                if l < depth:
                    edge(('layer', l, tau), ('layer', l + 1, tau))
                if tau + 1 < horizon:
                    edge(('layer', l, tau), ('layer', l, tau + 1))
        return succ, source, ('layer', depth, horizon - 1)

    if arch == 'rhn':
        source = 'source'
        edge(source, ('layer', 1, 0))
        for tau in range(horizon):
            for l in range(1, depth):
                edge(('layer', l, tau), ('layer', l + 1, tau))
            if tau + 1 < horizon:
                edge(('layer', depth, tau), ('layer', 1, tau + 1))
        return succ, source, ('layer', depth, horizon - 1)

    # rhn+hsg: the source is ŝ before the first step, which feeds both the
    # first RHN step and the first HSG cell.
    source = ('hsg', -1)
    for tau in range(horizon):
        edge(('hsg', tau - 1), ('hsg', tau))
        edge(('hsg', tau - 1), ('layer', 1, tau))
        for l in range(1, depth):
            edge(('layer', l, tau), ('layer', l + 1, tau))
        edge(('layer', depth, tau), ('hsg', tau))
    return succ, source, ('hsg', horizon - 1)


def enumerate_path_lengths(arch: str, depth: int, horizon: int) -> List[int]:
    """Distinct lengths of every route from source to sink.

    Lengths are memoized per node so shared suffixes are walked once.
    """
    succ, source, sink = build_graph(arch, depth, horizon)
    memo: Dict[Hashable, Set[int]] = {sink: {0}}

    def lengths_to_sink(node) -> Set[int]:
        if node not in memo:
            memo[node] = {1 + n for nxt in succ.get(node, []) for n in lengths_to_sink(nxt)}
        return memo[node]

    return sorted(lengths_to_sink(source))
