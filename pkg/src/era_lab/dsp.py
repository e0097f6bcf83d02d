"""Numeric kernels: radix-2 FFT, Gray-labelled constellations, AWGN, seeded RNG streams."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class SizingError(ValueError):
    """Transform length is not a power of two."""


class FramingError(ValueError):
    """Bit count does not split into whole constellation symbols."""


def _check_pow2(n: int) -> None:
    if n < 1 or n & (n - 1):
        raise SizingError(f"FFT length must be a power of two, got {n}")


@lru_cache(maxsize=32)
def _bit_reverse(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def fft(x) -> np.ndarray:
    """Unnormalized forward DFT along the last axis (iterative radix-2 DIT)."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    _check_pow2(n)
    lead = x.shape[:-1]
    y = x[..., _bit_reverse(n)]
    size = 2
    while size <= n:
        half = size // 2
        tw = np.exp(-2j * np.pi * np.arange(half) / size)
        y = y.reshape(*lead, n // size, size)
        even = y[..., :half]
        odd = y[..., half:] * tw
        y = np.concatenate((even + odd, even - odd), axis=-1)
        size *= 2
    return y.reshape(*lead, n)


def ifft(X) -> np.ndarray:
    """Inverse of :func:`fft`; carries the 1/K scaling."""
    X = np.asarray(X, dtype=np.complex128)
    return np.conj(fft(np.conj(X))) / X.shape[-1]


# --- constellations -------------------------------------------------------

@dataclass(frozen=True)
class Constellation:
    """Gray-labelled constellation with unit average energy.

    ``points[label]`` is the complex point for the integer label whose binary
    expansion (MSB first) is the bit group. For QAM the first half of the
    label bits selects the in-phase level and the second half the quadrature
    level; bit value 0 on the leading axis bit means a positive coordinate.
    """

    order: int
    points: np.ndarray
    axis_levels: np.ndarray  # axis level value indexed by axis label (unnormalized)
    scale: float

    @property
    def bits_per_symbol(self) -> int:
        return self.order.bit_length() - 1

    @property
    def is_bpsk(self) -> bool:
        return self.order == 2


def _axis_levels(m: int) -> np.ndarray:
    """Axis value for each Gray label, levels ordered most positive first."""
    L = 1 << m
    levels = np.empty(L)
    for j in range(L):
        levels[j ^ (j >> 1)] = (L - 1) - 2 * j
    return levels


@lru_cache(maxsize=None)
def constellation(order: int) -> Constellation:
    if order not in (2, 4, 16, 64):
        raise ValueError(f"unsupported constellation order {order}")
    if order == 2:
        levels = _axis_levels(1)
        points = levels.astype(np.complex128)
        scale = 1.0
    else:
        m = (order.bit_length() - 1) // 2
        levels = _axis_levels(m)
        L = 1 << m
        scale = 1.0 / np.sqrt(2.0 * (L * L - 1) / 3.0)
        labels = np.arange(order)
        points = (levels[labels >> m] + 1j * levels[labels & (L - 1)]) * scale
    points.setflags(write=False)
    levels.setflags(write=False)
    return Constellation(order, points, levels, scale)


def map_bits(bits, c: Constellation) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64).reshape(-1)
    m = c.bits_per_symbol
    if bits.size % m:
        raise FramingError(f"{bits.size} bits do not divide into {m}-bit symbols")
    weights = 1 << np.arange(m - 1, -1, -1)
    labels = bits.reshape(-1, m) @ weights
    return c.points[labels]


def _axis_decide(v: np.ndarray, levels: np.ndarray) -> np.ndarray:
    # levels are indexed by label, so argmin returns the smallest label on exact ties
    return np.argmin(np.abs(v[:, None] - levels[None, :]), axis=1)


def demap_bits(symbols, c: Constellation) -> np.ndarray:
    """Hard nearest-point decision; exact ties go to the smallest label."""
    s = np.asarray(symbols, dtype=np.complex128).reshape(-1)
    m = c.bits_per_symbol
    if c.is_bpsk:
        labels = _axis_decide(s.real, c.axis_levels)
    else:
        half = m // 2
        li = _axis_decide(s.real / c.scale, c.axis_levels)
        lq = _axis_decide(s.imag / c.scale, c.axis_levels)
        labels = (li << half) | lq
    shifts = np.arange(m - 1, -1, -1)
    return ((labels[:, None] >> shifts) & 1).astype(np.uint8).reshape(-1)


# --- noise and randomness ---------------------------------------------------

def awgn(x, variance: float, rng: np.random.Generator) -> np.ndarray:
    """Add circularly symmetric complex Gaussian noise of per-sample variance ``variance``."""
    if variance < 0:
        raise ValueError("noise variance must be non-negative")
    x = np.asarray(x, dtype=np.complex128)
    if variance == 0:
        return x.copy()
    n = rng.standard_normal((2,) + x.shape)
    return x + np.sqrt(variance / 2.0) * (n[0] + 1j * n[1])


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream keyed by ``(seed, stream)``.

    Philox is keyed directly, so two streams never depend on the order in
    which they were created.
    """

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed & 0xFFFFFFFFFFFFFFFF, self.stream & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    return RngStream(seed, stream).generator()
