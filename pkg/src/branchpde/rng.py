"""Counter-based random streams.

Every random number used by the solver is a pure function of
``(seed, tag, lineage id, step, draw)``.  There is no sequential generator
state, so particle kernels can be chunked or threaded in any way and still
produce identical output.

The block cipher is Philox4x32-10 (Salmon et al., SC'11), vectorised with
numpy ``uint64`` arithmetic holding 32-bit words.
"""

from __future__ import annotations

import os

import numpy as np

try:
    if os.environ.get("BRANCHPDE_PURE_PYTHON"):
        raise ImportError("pure-python backend requested")
    from ._kernels import philox_uniform_pair as _compiled_pair
except ImportError:
    _compiled_pair = None

_MASK32 = np.uint64(0xFFFFFFFF)
_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_SHIFT32 = np.uint64(32)

# Kernel tags; distinct tags give statistically independent streams.
TAG_INIT = 1
TAG_SDE = 2
TAG_BRANCH = 3
TAG_TEST = 99


def _u64(x) -> np.ndarray:
    return np.asarray(x, dtype=np.uint64)


def philox4x32(counter, key, rounds: int = 10) -> tuple[np.ndarray, ...]:
    """Philox4x32 block function.

    ``counter`` is a 4-tuple of arrays (broadcastable) of 32-bit words and
    ``key`` a 2-tuple.  Returns four ``uint64`` arrays holding 32-bit outputs.
    """
    c0, c1, c2, c3 = (_u64(c) & _MASK32 for c in counter)
    k0, k1 = (_u64(k) & _MASK32 for k in key)
    c0, c1, c2, c3 = np.broadcast_arrays(c0, c1, c2, c3)
    for r in range(rounds):
        if r:
            k0 = (k0 + _W0) & _MASK32
            k1 = (k1 + _W1) & _MASK32
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0, lo0 = p0 >> _SHIFT32, p0 & _MASK32
        hi1, lo1 = p1 >> _SHIFT32, p1 & _MASK32
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


def splitmix64(x) -> np.ndarray:
    """SplitMix64 finaliser, used to hash seeds and lineage tuples."""
    z = _u64(x).copy()
    with np.errstate(over="ignore"):
        z = z + np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def stream_key(seed: int, tag: int, population: int = 0) -> tuple[int, int]:
    """Derive a 64-bit Philox key from the run seed, kernel tag and population."""
    h = int(splitmix64(np.uint64(seed % 2**64)))
    h = int(splitmix64(np.uint64(h ^ ((tag & 0xFFFF) << 16 | (population & 0xFFFF)))))
    return h & 0xFFFFFFFF, h >> 32


def child_ids(parent_ids, step: int, ordinals) -> np.ndarray:
    """Lineage ids for offspring: hash of (parent id, step index, copy ordinal)."""
    parent = _u64(parent_ids)
    with np.errstate(over="ignore"):
        mixed = splitmix64(parent ^ splitmix64(np.uint64(step) * np.uint64(0x100000001B3)))
        mixed = splitmix64(mixed + _u64(ordinals) * np.uint64(0x9E3779B97F4A7C15))
    return mixed


def _to_unit(hi: np.ndarray, lo: np.ndarray) -> np.ndarray:
    # 53 random bits -> (0, 1); the half-ulp offset keeps log() finite.
    bits = ((hi << _SHIFT32) | lo) >> np.uint64(11)
    return (bits.astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


def uniform_pair(key: tuple[int, int], ids, step: int, draw) -> tuple[np.ndarray, np.ndarray]:
    """Two independent uniforms on (0, 1) per id for counter (id, step, draw)."""
    ids = np.ascontiguousarray(ids, dtype=np.uint64).reshape(-1)
    if _compiled_pair is not None:
        draws = np.ascontiguousarray(draw, dtype=np.uint64).reshape(-1)
        out1, out2 = np.empty(ids.size), np.empty(ids.size)
        _compiled_pair(ids, step & 0xFFFFFFFF, draws, key[0], key[1], out1, out2)
        return out1, out2
    x0, x1, x2, x3 = philox4x32(
        (ids & _MASK32, ids >> _SHIFT32, np.uint64(step & 0xFFFFFFFF), _u64(draw)), key
    )
    return _to_unit(x0, x1), _to_unit(x2, x3)


def normals(key: tuple[int, int], ids, step: int, d: int) -> np.ndarray:
    """Standard normal matrix of shape ``(len(ids), d)`` via Box-Muller."""
    ids = _u64(ids)
    out = np.empty((ids.size, d))
    for block in range((d + 1) // 2):
        u1, u2 = uniform_pair(key, ids, step, block)
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = 2.0 * np.pi * u2
        out[:, 2 * block] = radius * np.cos(angle)
        if 2 * block + 1 < d:
            out[:, 2 * block + 1] = radius * np.sin(angle)
    return out


class Stream:
    """Sequential view of a single counter-based stream.

    Convenient for scalar use; the vectorised kernels address counters
    directly instead.
    """

    def __init__(self, seed: int, lineage_id: int = 0, step: int = 0, tag: int = TAG_TEST):
        self.key = stream_key(seed, tag)
        self.lineage_id = lineage_id
        self.step = step
        self.draw = 0

    def uniform(self) -> float:
        u, _ = uniform_pair(self.key, [self.lineage_id], self.step, self.draw)
        self.draw += 1
        return float(u[0])
