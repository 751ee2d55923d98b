"""Deterministic random streams.

Every stream is a Philox counter-based generator keyed by a SeedSequence
built from ``(seed, *stream)``. Results therefore depend only on the seed
and the stream coordinates, never on how work was split across workers.
"""
import numpy as np

#: trials are drawn in blocks of this many; each block has its own stream
BLOCK_SIZE = 8192


def make_rng(seed, *stream):
    ss = np.random.SeedSequence([int(seed), *[int(s) for s in stream]])
    return np.random.Generator(np.random.Philox(ss))


def iter_blocks(trials, seed, *stream, block_size=BLOCK_SIZE):
    """Yield ``(rng, n)`` pairs covering ``trials`` draws in fixed blocks."""
    for b, start in enumerate(range(0, trials, block_size)):
        yield make_rng(seed, *stream, b), min(block_size, trials - start)
