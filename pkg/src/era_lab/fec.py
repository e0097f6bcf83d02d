"""K=7 (133, 171) convolutional code with 802.11-style puncturing, block interleaver
and a hard-decision Viterbi decoder.

Coded streams are serialized ``A0 B0 A1 B1 ...``. Received streams use int8 with
``ERASURE`` (-1) on positions that carry no information (punctured or erased
subcarriers); erasures add nothing to the branch metric.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numba
import numpy as np

CONSTRAINT_LENGTH = 7
TAIL_BITS = CONSTRAINT_LENGTH - 1
N_STATES = 1 << TAIL_BITS
ERASURE = -1

PUNCTURE_PATTERNS = {
    Fraction(1, 2): (1, 1),
    Fraction(2, 3): (1, 1, 1, 0),
    Fraction(3, 4): (1, 1, 1, 0, 0, 1),
    Fraction(5, 6): (1, 1, 1, 0, 0, 1, 1, 0, 0, 1),
}


@dataclass(frozen=True)
class CodeConfig:
    rate: Fraction = Fraction(1, 2)
    generators: tuple[int, int] = (0o133, 0o171)

    def __post_init__(self):
        object.__setattr__(self, "rate", Fraction(self.rate))
        if self.rate not in PUNCTURE_PATTERNS:
            raise ValueError(f"unsupported code rate {self.rate}")

    @property
    def pattern(self) -> np.ndarray:
        return np.array(PUNCTURE_PATTERNS[self.rate], dtype=bool)

    def coded_length(self, n_info: int) -> int:
        """Transmitted bit count for ``n_info`` payload bits (tail included)."""
        mother = 2 * (n_info + TAIL_BITS)
        return int(_keep_mask(mother, self.pattern).sum())


def _keep_mask(n: int, pattern: np.ndarray) -> np.ndarray:
    reps = -(-n // pattern.size)
    return np.tile(pattern, reps)[:n]


def _taps(g: int) -> list[int]:
    # delays d (0 = current input) whose tap is set; the octal MSB is the current input
    return [d for d in range(CONSTRAINT_LENGTH) if (g >> (CONSTRAINT_LENGTH - 1 - d)) & 1]


def encode_mother(bits, cfg: CodeConfig = CodeConfig()) -> np.ndarray:
    """Rate-1/2 encoding with 6 zero tail bits appended; no puncturing."""
    u = np.concatenate([np.asarray(bits, dtype=np.uint8).reshape(-1),
                        np.zeros(TAIL_BITS, dtype=np.uint8)])
    padded = np.concatenate([np.zeros(TAIL_BITS, dtype=np.uint8), u])
    n = u.size
    out = np.empty(2 * n, dtype=np.uint8)
    for j, g in enumerate(cfg.generators):
        acc = np.zeros(n, dtype=np.uint8)
        for d in _taps(g):
            acc ^= padded[TAIL_BITS - d: TAIL_BITS - d + n]
        out[j::2] = acc
    return out


def puncture(mother, cfg: CodeConfig) -> np.ndarray:
    mother = np.asarray(mother)
    return mother[_keep_mask(mother.size, cfg.pattern)]


def depuncture(received, cfg: CodeConfig, n_info: int) -> np.ndarray:
    """Re-expand to the mother-code length, marking removed positions as erasures."""
    mother_len = 2 * (n_info + TAIL_BITS)
    keep = _keep_mask(mother_len, cfg.pattern)
    received = np.asarray(received, dtype=np.int8)
    if received.size != keep.sum():
        raise ValueError(f"expected {keep.sum()} received bits, got {received.size}")
    out = np.full(mother_len, ERASURE, dtype=np.int8)
    out[keep] = received
    return out


def conv_encode(bits, cfg: CodeConfig = CodeConfig()) -> np.ndarray:
    return puncture(encode_mother(bits, cfg), cfg)


@numba.njit(cache=True)
def _parity(x):
    p = 0
    while x:
        p ^= x & 1
        x >>= 1
    return p


def _branch_tables(generators):
    # for next-state ns and predecessor choice b: the predecessor state and the two output bits
    prev = np.empty((N_STATES, 2), dtype=np.int64)
    outs = np.empty((N_STATES, 2, 2), dtype=np.int8)
    for ns in range(N_STATES):
        u = ns >> (TAIL_BITS - 1)
        for b in range(2):
            s = ((ns & (N_STATES // 2 - 1)) << 1) | b
            reg = (u << TAIL_BITS) | s
            prev[ns, b] = s
            for j, g in enumerate(generators):
                outs[ns, b, j] = bin(reg & g).count("1") & 1
    return prev, outs


_TABLES: dict = {}


@numba.njit(cache=True, nogil=True)
def _viterbi_kernel(rx, n_steps, prev, outs):
    big = 1 << 28
    metric = np.full(N_STATES, big, dtype=np.int64)
    metric[0] = 0
    new = np.empty(N_STATES, dtype=np.int64)
    decisions = np.empty((n_steps, N_STATES), dtype=np.uint8)
    for t in range(n_steps):
        ra = rx[2 * t]
        rb = rx[2 * t + 1]
        for ns in range(N_STATES):
            best = big * 4
            choice = 0
            for b in range(2):
                m = metric[prev[ns, b]]
                if ra >= 0 and ra != outs[ns, b, 0]:
                    m += 1
                if rb >= 0 and rb != outs[ns, b, 1]:
                    m += 1
                if m < best:
                    best = m
                    choice = b
            new[ns] = best
            decisions[t, ns] = choice
        metric[:] = new
    bits = np.empty(n_steps, dtype=np.uint8)
    s = 0
    for t in range(n_steps - 1, -1, -1):
        bits[t] = s >> (TAIL_BITS - 1)
        s = prev[s, decisions[t, s]]
    return bits


def viterbi_decode(rx, cfg: CodeConfig = CodeConfig()) -> np.ndarray:
    """ML decode of a depunctured (mother-length) stream; returns info bits without tail.

    The trellis starts and ends in the all-zero state.
    """
    rx = np.ascontiguousarray(rx, dtype=np.int8)
    if rx.size % 2 or rx.size < 2 * TAIL_BITS:
        raise ValueError("received stream must hold whole trellis steps including the tail")
    key = tuple(cfg.generators)
    if key not in _TABLES:
        _TABLES[key] = _branch_tables(cfg.generators)
    prev, outs = _TABLES[key]
    bits = _viterbi_kernel(rx, rx.size // 2, prev, outs)
    return bits[: rx.size // 2 - TAIL_BITS]


def decode(received, cfg: CodeConfig, n_info: int) -> np.ndarray:
    """Depuncture then Viterbi-decode a received punctured stream."""
    return viterbi_decode(depuncture(received, cfg, n_info), cfg)


# --- interleaver -------------------------------------------------------------

@dataclass(frozen=True)
class Interleaver:
    """Block interleaver: written column by column, read row by row.

    Output position ``r*cols + c`` takes input position ``c*rows + r``, so bits
    adjacent at the output sit ``rows`` apart at the input.
    """

    rows: int
    cols: int

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def _check(self, bits: np.ndarray) -> None:
        if bits.shape[-1] != self.size:
            raise ValueError(f"interleaver block is {self.size} bits, got {bits.shape[-1]}")


def interleave(bits, il: Interleaver) -> np.ndarray:
    bits = np.asarray(bits)
    il._check(bits)
    lead = bits.shape[:-1]
    return bits.reshape(*lead, il.cols, il.rows).swapaxes(-1, -2).reshape(*lead, il.size)


def deinterleave(bits, il: Interleaver) -> np.ndarray:
    bits = np.asarray(bits)
    il._check(bits)
    lead = bits.shape[:-1]
    return bits.reshape(*lead, il.rows, il.cols).swapaxes(-1, -2).reshape(*lead, il.size)


def interleaver_for(n_subcarriers: int, bits_per_symbol: int) -> Interleaver:
    """Per-OFDM-symbol block: 18 columns where the subcarrier count allows it."""
    n = n_subcarriers * bits_per_symbol
    cols = 18 if n % 18 == 0 else 1
    return Interleaver(rows=n // cols, cols=cols)
