"""Counter-based random streams for reproducible, order-independent ensembles.

Every ensemble keyed by ``base_seed`` partitions its paths into fixed-size
blocks of ``BLOCK_SIZE`` rows.  Block ``b`` is an independent Philox stream
keyed by the 128-bit pair ``(base_seed, b)``; path ``i`` owns row
``i % BLOCK_SIZE`` of the row-major uniform draw from block ``i // BLOCK_SIZE``.

Two properties follow from this splitting rule and are relied on by tests:

* scheduling independence: blocks can be generated in any order (or on any
  number of workers) without changing a single draw, and
* prefix stability: enlarging an ensemble never perturbs existing paths,
  because row ``r`` of a row-major draw occupies stream positions
  ``r*n .. (r+1)*n - 1`` regardless of how many rows are requested.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidParameterError

BLOCK_SIZE = 4096

_MASK64 = (1 << 64) - 1


def block_generator(base_seed: int, block: int) -> np.random.Generator:
    """Philox generator for one block of an ensemble keyed by ``base_seed``."""
    if base_seed < 0:
        raise InvalidParameterError(f"seed must be nonnegative, got {base_seed}")
    if block < 0:
        raise InvalidParameterError(f"block index must be nonnegative, got {block}")
    key = np.array([base_seed & _MASK64, block & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def n_blocks(n_paths: int) -> int:
    """Number of blocks an ensemble of ``n_paths`` paths occupies."""
    return (n_paths + BLOCK_SIZE - 1) // BLOCK_SIZE
