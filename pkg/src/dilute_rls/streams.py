"""Deterministic random-stream splitting.

Every random draw in the package comes from a named substream of a single
root seed.  Substreams are keyed by (purpose, agent, ...) labels, so adding a
new consumer (extra metrics, an extra agent) never perturbs the draws seen by
existing consumers.  Labels are hashed with sha256, not the builtin hash,
which keeps streams stable across processes and platforms.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK = (1 << 63) - 1


def _label_word(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label) & _MASK
    digest = hashlib.sha256(str(label).encode("utf8")).digest()
    return int.from_bytes(digest[:8], "little") & _MASK


def substream(root_seed: int, *labels) -> np.random.Generator:
    """Generator for the substream of ``root_seed`` named by ``labels``."""
    words = [int(root_seed) & _MASK] + [_label_word(x) for x in labels]
    return np.random.default_rng(np.random.SeedSequence(words))
