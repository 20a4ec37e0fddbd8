"""Splittable, replayable noise streams.

Every random draw in the package flows through a ``NoiseStream``: a
counter-based Philox generator keyed by ``(master_seed, stream_id)`` where
``stream_id`` is a path of labels such as ``(trial, "dz")``.  Children can be
split without coordination, so parallel trials are schedule-independent, and
recreating a stream with the same key replays the same bytes.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _encode_label(label) -> int:
    if isinstance(label, (int, np.integer)):
        if label < 0:
            raise ValueError("stream labels must be nonnegative integers or strings")
        return int(label) & _MASK64
    if isinstance(label, str):
        digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    raise TypeError(f"unsupported stream label type: {type(label).__name__}")


class NoiseStream:
    """Deterministic RNG stream addressed by (master_seed, label path).

    ``position`` counts draw calls made on this instance; identical
    (master_seed, stream_id, position) always reproduces identical output.
    A single instance must not be shared across threads; split children
    with :meth:`child` instead.
    """

    def __init__(self, master_seed: int, _path: tuple[int, ...] = ()):
        self.master_seed = int(master_seed) & _MASK64
        self.stream_id = tuple(_path)
        self.position = 0
        seq = np.random.SeedSequence(entropy=self.master_seed, spawn_key=self.stream_id)
        self._gen = np.random.Generator(np.random.Philox(seq))

    def __repr__(self):
        return f"NoiseStream(seed={self.master_seed}, id={self.stream_id}, pos={self.position})"

    def child(self, *labels) -> "NoiseStream":
        """Independent substream addressed by appending ``labels`` to the path."""
        encoded = tuple(_encode_label(lb) for lb in labels)
        return NoiseStream(self.master_seed, self.stream_id + encoded)

    def replay(self) -> "NoiseStream":
        """Fresh stream with the same key, positioned at the start."""
        return NoiseStream(self.master_seed, self.stream_id)

    def normal(self, shape=None) -> np.ndarray:
        self.position += 1
        return self._gen.standard_normal(shape)

    def uniform(self, shape=None) -> np.ndarray:
        self.position += 1
        return self._gen.random(shape)

    def integers(self, low, high, shape=None) -> np.ndarray:
        self.position += 1
        return self._gen.integers(low, high, size=shape)

    def rademacher(self, size: int) -> np.ndarray:
        """i.i.d. uniform signs in {-1.0, +1.0}."""
        self.position += 1
        return (self._gen.integers(0, 2, size=size) * 2 - 1).astype(float)

    def subset(self, n: int, k: int) -> np.ndarray:
        """Sorted uniformly random k-subset of range(n)."""
        self.position += 1
        return np.sort(self._gen.choice(n, size=k, replace=False))
