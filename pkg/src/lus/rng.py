"""Deterministic random streams derived from a single user seed.

Every source of randomness in the package is a named sub-stream of one
64-bit seed, so whole pipelines replay bit-identically from a single
``--seed`` value. Sub-streams are independent Philox generators keyed by
``(seed, *tags)``; per-point Bernoulli draws additionally use a
counter-style uniform stream in which the value at position ``i`` is a
pure function of ``(key, i)``, independent of chunking or worker layout.
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1
_MASK128 = (1 << 128) - 1

__all__ = ["seed_sequence", "substream", "stream_key", "point_uniforms"]


def _tag_key(tags: tuple) -> tuple[int, ...]:
    # crc32 is stable across platforms and Python versions, unlike hash().
    return tuple(zlib.crc32(str(t).encode("utf-8")) for t in tags)


def seed_sequence(seed: int, *tags) -> np.random.SeedSequence:
    """SeedSequence for the sub-stream of ``seed`` named by ``tags``."""
    return np.random.SeedSequence(entropy=int(seed) & _MASK64, spawn_key=_tag_key(tags))


def substream(seed: int, *tags) -> np.random.Generator:
    """Independent generator for the named sub-stream of ``seed``."""
    return np.random.Generator(np.random.Philox(seed_sequence(seed, *tags)))


def stream_key(seed: int, *tags) -> int:
    """64-bit integer key identifying a named sub-stream.

    Use where an API takes a plain integer seed (e.g. ``draw_subsample``)
    but the caller wants the seed tied to a named stream of a master seed.
    """
    return int(seed_sequence(seed, *tags).generate_state(1, np.uint64)[0])


def point_uniforms(key: int, start: int, count: int) -> np.ndarray:
    """Uniforms at positions ``start .. start+count-1`` of stream ``key``.

    The value at position ``i`` depends only on ``(key, i)``: disjoint
    chunks assembled in any order reproduce the single full-stream draw.
    """
    if start < 0 or count < 0:
        raise ValueError("start and count must be non-negative")
    gen = np.random.Generator(np.random.Philox(key=int(key) & _MASK128))
    return gen.random(start + count)[start:]
