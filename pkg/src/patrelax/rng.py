"""PCG32 (XSH-RR) stream and Box-Muller normals, reproducible bit-for-bit.

States are advanced in blocks with the LCG jump-ahead so that long streams are
generated with vectorized uint64 arithmetic.
"""
from __future__ import annotations

import numpy as np

MULT = 6364136223846793005
DEFAULT_STREAM = 0xDA3E39CB94B95BDB
MASK64 = (1 << 64) - 1
_BLOCK = 4096


def _jump(mult: int, inc: int, steps: int) -> tuple[int, int]:
    """(A, C) with state_{k+steps} = A * state_k + C (mod 2^64)."""
    acc_mult, acc_plus = 1, 0
    cur_mult, cur_plus = mult, inc
    while steps:
        if steps & 1:
            acc_mult = (acc_mult * cur_mult) & MASK64
            acc_plus = (acc_plus * cur_mult + cur_plus) & MASK64
        cur_plus = ((cur_mult + 1) * cur_plus) & MASK64
        cur_mult = (cur_mult * cur_mult) & MASK64
        steps >>= 1
    return acc_mult, acc_plus


class Pcg32:
    """Minimal PCG32 generator seeded like ``pcg32_srandom(seed, stream)``."""

    def __init__(self, seed: int, stream: int = DEFAULT_STREAM):
        self.inc = ((int(stream) << 1) | 1) & MASK64
        self.state = 0
        self._step()
        self.state = (self.state + (int(seed) & MASK64)) & MASK64
        self._step()

    def _step(self) -> None:
        self.state = (self.state * MULT + self.inc) & MASK64

    def next_uint32(self) -> int:
        old = self.state
        self._step()
        xorshifted = (((old >> 18) ^ old) >> 27) & 0xFFFFFFFF
        rot = old >> 59
        return ((xorshifted >> rot) | (xorshifted << ((-rot) & 31))) & 0xFFFFFFFF

    def uint32_array(self, count: int) -> np.ndarray:
        """Next ``count`` outputs, identical to repeated :meth:`next_uint32` calls."""
        if count <= 0:
            return np.zeros(0, dtype=np.uint32)
        lanes = min(count, _BLOCK)
        first = np.empty(lanes, dtype=np.uint64)
        s = self.state
        for i in range(lanes):
            first[i] = s
            s = (s * MULT + self.inc) & MASK64
        nblocks = -(-count // lanes)
        jm, jc = _jump(MULT, self.inc, lanes)
        states = np.empty((nblocks, lanes), dtype=np.uint64)
        states[0] = first
        a, c = np.uint64(jm), np.uint64(jc)
        with np.errstate(over="ignore"):
            for b in range(1, nblocks):
                states[b] = states[b - 1] * a + c
        old = states.ravel()[:count]
        am, ac = _jump(MULT, self.inc, count)
        self.state = (am * self.state + ac) & MASK64

        xorshifted = (((old >> np.uint64(18)) ^ old) >> np.uint64(27)) & np.uint64(0xFFFFFFFF)
        rot = old >> np.uint64(59)
        left = (np.uint64(32) - rot) & np.uint64(31)
        out = ((xorshifted >> rot) | (xorshifted << left)) & np.uint64(0xFFFFFFFF)
        return out.astype(np.uint32)

    def normal_array(self, count: int) -> np.ndarray:
        """Standard normals from Box-Muller pairs, consumed in index order."""
        pairs = -(-count // 2)
        u = self.uint32_array(2 * pairs).astype(np.float64)
        u1 = (u[0::2] + 1.0) / 4294967296.0  # (0, 1]
        u2 = u[1::2] / 4294967296.0  # [0, 1)
        radius = np.sqrt(-2.0 * np.log(u1))
        z = np.empty(2 * pairs)
        z[0::2] = radius * np.cos(2.0 * np.pi * u2)
        z[1::2] = radius * np.sin(2.0 * np.pi * u2)
        return z[:count]


def gaussian_noise(shape, std: float, seed: int) -> np.ndarray:
    """i.i.d. N(0, std^2) samples, row-major, from a fresh PCG32 stream."""
    if std < 0:
        raise ValueError(f"std must be >= 0, got {std}")
    count = int(np.prod(shape))
    if std == 0:
        return np.zeros(shape)
    return std * Pcg32(seed).normal_array(count).reshape(shape)
