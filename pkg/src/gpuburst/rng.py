"""Counter-based random streams.

Every draw is a pure function of (root_seed, stream_name, draw_index), so any
stochastic decision in a run can be replayed or audited by its address, and
interleaving draws from different streams never perturbs any stream's own
sequence. The generator is a SplitMix64-style finalizer over a per-stream
64-bit key derived by hashing the (seed, name) pair.
"""

from __future__ import annotations

import hashlib
import math
from statistics import NormalDist

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15  # 2^64 / phi, the SplitMix64 increment
_SUBSTREAM_SALT = 0xD1B54A32D192ED03
_INV_2_64 = 1.0 / (1 << 64)

_norm = NormalDist()


def _mix64(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK64
    return z ^ (z >> 31)


def _stream_key(root_seed: int, name: str) -> int:
    digest = hashlib.sha256(f"{root_seed}\x1f{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


class RngStream:
    """One named, indexable stream of uniforms on [0, 1)."""

    __slots__ = ("root_seed", "name", "index", "_key")

    def __init__(self, root_seed: int, name: str, *, _key: int | None = None):
        self.root_seed = root_seed
        self.name = name
        self.index = 0
        self._key = _stream_key(root_seed, name) if _key is None else _key

    def uniform_at(self, index: int) -> float:
        """Value at a given draw index without advancing the stream."""
        return _mix64((self._key + index * _GOLDEN) & _MASK64) * _INV_2_64

    def uniform(self) -> float:
        u = self.uniform_at(self.index)
        self.index += 1
        return u

    def uniform_open(self) -> float:
        """Uniform on (0, 1], safe as a -ln(u) argument."""
        return 1.0 - self.uniform()

    def normal(self) -> float:
        """Standard normal via inverse CDF of one uniform draw."""
        u = self.uniform()
        if u <= 0.0:
            u = _INV_2_64
        return _norm.inv_cdf(u)

    def exponential(self, rate: float) -> float:
        """Exponential with the given rate; rate 0 means never (inf)."""
        if rate == 0.0:
            self.index += 1  # keep draw addressing stable across rates
            return math.inf
        return -math.log(self.uniform_open()) / rate

    def uniform_block(self, n: int) -> np.ndarray:
        """Vector of the next n draws (advances the stream by n)."""
        idx = np.arange(self.index, self.index + n, dtype=np.uint64)
        self.index += n
        z = (np.uint64(self._key) + idx * np.uint64(_GOLDEN)) & np.uint64(_MASK64)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
        return z.astype(np.float64) * _INV_2_64

    def substream(self, i: int) -> "RngStream":
        """Derived stream i (e.g. one per photon), pure in (seed, name, i)."""
        key = _mix64(self._key ^ ((i + 1) * _SUBSTREAM_SALT & _MASK64))
        child = RngStream(self.root_seed, f"{self.name}[{i}]", _key=key)
        return child

    def __repr__(self) -> str:
        return f"RngStream(seed={self.root_seed}, name={self.name!r}, index={self.index})"
