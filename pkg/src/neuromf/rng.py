"""Deterministic stream-keyed noise.

Every random draw in the package is addressed by an explicit key, so any
sub-computation can be replayed bit for bit regardless of batching, worker
count, or which other components happen to be simulated alongside it.
This is also what lets the coupling construction hand the exact same
Brownian increments to an interacting system and to its independent-copy
counterpart.

Two addressing schemes share one Philox key space and never collide
(a discriminator bit in the packed key word):

* scalar streams, keyed (seed, path, neuron, component), behind
  `RngStreamKey` / `gaussian_increments`;
* block streams, keyed (seed, path, component), which carry one value per
  (step, column) in row-major order and feed the vectorized engine.

Successive draws from one numpy Generator concatenate exactly, so block
buffering is free to choose any chunk size without changing a single value.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .stepping import TimeGrid

_MASK64 = (1 << 64) - 1
MAX_PATH = 1 << 22
MAX_NEURON = 1 << 24
MAX_COMPONENT = 1 << 16
_BLOCK_FLAG = np.uint64(1 << 62)


class Component(IntEnum):
    """Tags for the independent driving-noise families of one neuron/copy."""

    V = 0         # membrane noise
    Y = 1         # synaptic proportion noise
    GATE_N = 2
    GATE_M = 3
    GATE_H = 4
    J_BASE = 8    # + source population index: conductance noise family
    INIT_V = 16   # initial-condition draws
    INIT_Y = 17
    INIT_W = 18
    INIT_GATE_N = 19
    INIT_GATE_M = 20
    INIT_GATE_H = 21
    INIT_J_BASE = 24  # + source population index

    @staticmethod
    def j(source_index: int) -> int:
        if not 0 <= source_index < 8:
            raise ValueError("at most 8 populations are supported by the key layout")
        return int(Component.J_BASE) + source_index

    @staticmethod
    def init_j(source_index: int) -> int:
        if not 0 <= source_index < 8:
            raise ValueError("at most 8 populations are supported by the key layout")
        return int(Component.INIT_J_BASE) + source_index


def _check_ids(path: int, neuron: int, component: int) -> None:
    if not 0 <= path < MAX_PATH:
        raise ValueError(f"path index {path} outside [0, {MAX_PATH})")
    if not 0 <= neuron < MAX_NEURON:
        raise ValueError(f"neuron index {neuron} outside [0, {MAX_NEURON})")
    if not 0 <= component < MAX_COMPONENT:
        raise ValueError(f"component tag {component} outside [0, {MAX_COMPONENT})")


def _philox(seed: int, packed: np.uint64) -> np.random.Generator:
    key = np.array([np.uint64(seed & _MASK64), packed], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class RngStreamKey:
    """Address of one scalar noise stream.

    Distinct keys yield independent streams; the same key reproduces the
    identical sequence on every run and under any scheduling.
    """

    seed: int
    path: int
    neuron: int
    component: int

    def stream(self) -> np.random.Generator:
        _check_ids(self.path, self.neuron, self.component)
        packed = np.uint64((self.path << 40) | (self.neuron << 16) | self.component)
        return _philox(self.seed, packed)


def block_stream(seed: int, path: int, component: int) -> np.random.Generator:
    """Stream feeding a whole (step, column) block; see module docstring."""
    _check_ids(path, 0, component)
    packed = _BLOCK_FLAG | np.uint64((path << 40) | component)
    return _philox(seed, packed)


def gaussian_increments(key: RngStreamKey, grid: TimeGrid) -> np.ndarray:
    """The n_steps Brownian increments N(0, dt) of one scalar stream."""
    if grid.n_steps == 0:
        return np.empty(0, dtype=float)
    return key.stream().standard_normal(grid.n_steps) * np.sqrt(grid.dt)


class BlockNoise:
    """Buffered per-(path, component) increment source for the engine.

    Serves, at each step k, a raw-normal array of shape (n_paths, n_cols)
    per component; entry [b, i] is element (k * n_cols + i) of the block
    stream (seed, path_ids[b], component).  Values are independent of the
    buffer size, which is chosen from a memory budget.
    """

    def __init__(self, seed: int, path_ids: list[int], components: list[int],
                 n_cols: int, n_steps: int, max_bytes: int = 1 << 28):
        self.seed = int(seed)
        self.path_ids = list(path_ids)
        self.components = list(components)
        self.n_cols = int(n_cols)
        self.n_steps = int(n_steps)
        n_streams = max(1, len(self.path_ids) * len(self.components))
        per_step = 8 * n_streams * self.n_cols
        self.block = int(min(max(1, max_bytes // max(per_step, 1)), 512, max(n_steps, 1)))
        self._gens = {
            (p, c): block_stream(self.seed, p, c)
            for p in self.path_ids for c in self.components
        }
        self._buf: dict[int, np.ndarray] = {
            c: np.empty((self.block, len(self.path_ids), self.n_cols)) for c in self.components
        }
        self._lo = -1
        self._hi = -1

    def _refill(self, k0: int) -> None:
        count = min(self.block, self.n_steps - k0)
        for c in self.components:
            buf = self._buf[c]
            for b, p in enumerate(self.path_ids):
                buf[:count, b, :] = self._gens[(p, c)].standard_normal((count, self.n_cols))
        self._lo, self._hi = k0, k0 + count

    def step(self, k: int) -> dict[int, np.ndarray]:
        """Raw N(0, 1) draws for step k, one (n_paths, n_cols) array per component."""
        if not 0 <= k < self.n_steps:
            raise IndexError(f"step {k} outside [0, {self.n_steps})")
        if not self._lo <= k < self._hi:
            if self._hi not in (-1, k):
                raise IndexError("BlockNoise must be consumed in step order")
            self._refill(k)
        return {c: self._buf[c][k - self._lo] for c in self.components}

    def init_stream(self, path: int, component: int) -> np.random.Generator:
        """Fresh generator for the initial-condition draws of one path."""
        return block_stream(self.seed, path, component)
