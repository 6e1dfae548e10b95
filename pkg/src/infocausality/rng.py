"""Counter-based random streams keyed by (seed, run index).

Every protocol run owns a fixed-width block of Philox output, located by its
run index alone.  Any partition of the runs into chunks, evaluated in any
order or in parallel, therefore draws exactly the same numbers.
"""

from __future__ import annotations

import numpy as np

U64_MAX = 2**64 - 1
_WORDS_PER_BLOCK = 4  # Philox4x64 emits four 64-bit words per counter value


def check_seed(seed: int) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise ValueError(f"seed must be an integer, got {seed!r}")
    seed = int(seed)
    if not 0 <= seed <= U64_MAX:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def padded_width(draws: int) -> int:
    """Words reserved per run: ``draws`` rounded up to whole Philox blocks."""
    return -(-draws // _WORDS_PER_BLOCK) * _WORDS_PER_BLOCK


def run_uniforms(seed: int, start: int, count: int, draws: int) -> np.ndarray:
    """Uniform doubles in [0, 1) of shape (count, draws) for runs start..start+count-1."""
    width = padded_width(draws)
    bitgen = np.random.Philox(key=check_seed(seed), counter=start * (width // _WORDS_PER_BLOCK))
    raw = bitgen.random_raw(count * width).reshape(count, width)[:, :draws]
    return (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53


def run_generator(seed: int, run: int) -> np.random.Generator:
    """A Generator for one scalar run (e.g. a single OT).

    The run index goes into the high key word, so these streams never overlap
    the block streams of :func:`run_uniforms`, which use high word zero.
    """
    if not 0 <= run < U64_MAX:
        raise ValueError(f"run index out of range: {run}")
    key = ((run + 1) << 64) | check_seed(seed)
    return np.random.Generator(np.random.Philox(key=key))
