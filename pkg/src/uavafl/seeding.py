"""Named random substreams derived from a single top-level seed."""

from __future__ import annotations

import zlib

import numpy as np


def _key(name: str | int) -> int:
    if isinstance(name, (int, np.integer)):
        return int(name)
    return zlib.crc32(str(name).encode("utf-8"))


def substream(seed: int, *names: str | int) -> np.random.Generator:
    """Independent generator for the path ``names`` under ``seed``.

    The same (seed, names) pair always yields the same stream, and distinct
    paths give statistically independent streams (``SeedSequence`` spawn keys).
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key(n) for n in names))
    return np.random.default_rng(ss)


def derive_seed(seed: int, *names: str | int) -> int:
    """Integer seed for ``names``; handy where a plain int must cross a boundary."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key(n) for n in names))
    return int(ss.generate_state(1, dtype=np.uint32)[0])
