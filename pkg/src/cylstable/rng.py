"""Counter-based random numbers (Philox4x32-10) and the symmetric stable sampler.

Every variate is a pure function of ``(seed, path, coord, step)``, so a path
can be regenerated in isolation and results do not depend on how paths are
split between workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba as nb
import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)


@nb.njit(cache=True, nogil=True, inline="always")
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Ten rounds of Philox4x32 on a 128-bit counter; words carried in uint64."""
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> _S32
        lo0 = p0 & _MASK
        hi1 = p1 >> _S32
        lo1 = p1 & _MASK
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
        k0 = (k0 + _W0) & _MASK
        k1 = (k1 + _W1) & _MASK
    return c0, c1, c2, c3


@nb.njit(cache=True, nogil=True, inline="always")
def _unit53(a, b):
    # strictly inside (0, 1)
    m = ((a >> np.uint64(5)) << np.uint64(26)) | (b >> np.uint64(6))
    return (np.float64(m) + 0.5) * (1.0 / 9007199254740992.0)


@nb.njit(cache=True, nogil=True, inline="always")
def uniform_pair(seed, path, coord, step):
    """Two independent U(0,1) variates for one (seed, path, coord, step) counter."""
    s = np.uint64(seed)
    p = np.uint64(path)
    o0, o1, o2, o3 = philox4x32(
        np.uint64(step) & _MASK, np.uint64(coord) & _MASK, p & _MASK, p >> _S32,
        s & _MASK, s >> _S32,
    )
    return _unit53(o0, o1), _unit53(o2, o3)


@nb.njit(cache=True, nogil=True, inline="always")
def cms_symmetric(alpha, u, v):
    """Chambers-Mallows-Stuck transform, symmetric case.

    ``u`` and ``v`` are U(0,1); the result has characteristic function
    ``exp(-|xi|**alpha)``. At alpha = 1 the formula reduces to ``tan``.
    """
    theta = np.pi * (u - 0.5)
    w = -np.log(v)
    if alpha == 1.0:
        return np.tan(theta)
    a = np.sin(alpha * theta) / np.cos(theta) ** (1.0 / alpha)
    b = (np.cos((1.0 - alpha) * theta) / w) ** ((1.0 - alpha) / alpha)
    return a * b


@nb.njit(cache=True, nogil=True, inline="always")
def stable_variate(alpha, seed, path, coord, step):
    u, v = uniform_pair(seed, path, coord, step)
    return cms_symmetric(alpha, u, v)


@nb.njit(cache=True, nogil=True)
def _fill_standard(alpha, seed, path, coord, step0, out):
    for i in range(out.shape[0]):
        out[i] = stable_variate(alpha, seed, path, coord, step0 + i)


@nb.njit(cache=True, nogil=True)
def _fill_across_paths(alpha, seed, path0, coord, step, out):
    for i in range(out.shape[0]):
        out[i] = stable_variate(alpha, seed, path0 + i, coord, step)


def philox_block(counter, key):
    """Raw Philox4x32-10 output for a 4-word counter and 2-word key (for testing)."""
    c = [np.uint64(v) for v in counter]
    k = [np.uint64(v) for v in key]
    return tuple(int(w) for w in philox4x32(c[0], c[1], c[2], c[3], k[0], k[1]))


@dataclass
class RandomStream:
    """A sequential view onto the counter space of one ``(seed, path, coord)``.

    Successive draws advance ``step``; two streams with equal
    ``(seed, path, coord)`` produce identical sequences.
    """

    seed: int
    path: int = 0
    coord: int = 0
    step: int = field(default=0)

    def standard_stable(self, alpha: float, size: int) -> np.ndarray:
        out = np.empty(int(size))
        _fill_standard(float(alpha), self.seed, self.path, self.coord, self.step, out)
        self.step += int(size)
        return out


def stream(seed: int, path_index: int = 0, coord: int = 0) -> RandomStream:
    return RandomStream(int(seed), int(path_index), int(coord))


def standard_stable_across_paths(alpha, seed, path0, n, coord=0, step=0):
    """One draw for each of paths ``path0 .. path0+n-1`` at a fixed step."""
    out = np.empty(int(n))
    _fill_across_paths(float(alpha), int(seed), int(path0), int(coord), int(step), out)
    return out
