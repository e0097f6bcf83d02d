"""OFDM packet chain: MCS table, packet construction, LS estimation, ZF equalization
and genie packet adjudication.

A packet is one full-band BPSK pilot symbol followed by ``n_data_symbols`` data
symbols, each with a cyclic prefix. The transmitter scales the IFFT output by
sqrt(K) and the receiver scales the FFT by 1/sqrt(K), so per-subcarrier noise
variance equals the time-domain per-sample variance.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

from . import fec
from .dsp import Constellation, constellation, demap_bits, fft, ifft, make_rng, map_bits

ZF_EPS = 1e-12


@dataclass(frozen=True)
class McsProfile:
    index: int
    order: int
    rate: Fraction

    @property
    def constellation(self) -> Constellation:
        return constellation(self.order)

    @property
    def code(self) -> fec.CodeConfig:
        return fec.CodeConfig(self.rate)

    @property
    def bits_per_subcarrier(self) -> int:
        return self.order.bit_length() - 1


MCS_TABLE = tuple(
    McsProfile(i, order, Fraction(rate))
    for i, (order, rate) in enumerate([
        (2, "1/2"), (4, "1/2"), (4, "3/4"), (16, "1/2"),
        (16, "3/4"), (64, "2/3"), (64, "3/4"), (64, "5/6"),
    ])
)


def mcs(index: int) -> McsProfile:
    return MCS_TABLE[index]


@dataclass(frozen=True)
class OfdmConfig:
    fft_size: int = 128
    n_data_subcarriers: int = 108
    cp_length: int = 32
    n_data_symbols: int = 16
    sample_rate: float = 40e6

    def __post_init__(self):
        if self.n_data_symbols < 1:
            raise ValueError("need at least one data symbol")
        if not 0 < self.n_data_subcarriers < self.fft_size:
            raise ValueError("data subcarriers must fit beside DC")
        if not 0 <= self.cp_length <= self.fft_size:
            raise ValueError("cyclic prefix must not exceed the FFT size")

    @cached_property
    def data_subcarriers(self) -> np.ndarray:
        """FFT bins carrying data: nonzero offsets closest to DC, negative first on ties."""
        half = self.fft_size // 2
        offsets = sorted((f for f in range(-half + 1, half) if f != 0), key=lambda f: (abs(f), f))
        return np.sort(np.mod(offsets[: self.n_data_subcarriers], self.fft_size))

    @property
    def symbol_samples(self) -> int:
        return self.fft_size + self.cp_length

    @property
    def n_symbols(self) -> int:
        return 1 + self.n_data_symbols

    @property
    def packet_samples(self) -> int:
        return self.n_symbols * self.symbol_samples

    @property
    def symbol_duration(self) -> float:
        return self.symbol_samples / self.sample_rate

    @property
    def packet_duration(self) -> float:
        return self.packet_samples / self.sample_rate

    def coded_bits_per_symbol(self, m: McsProfile) -> int:
        return self.n_data_subcarriers * m.bits_per_subcarrier

    def data_bits_per_symbol(self, m: McsProfile) -> int:
        n = self.coded_bits_per_symbol(m) * m.rate
        if n.denominator != 1:
            raise ValueError(f"MCS {m.index} does not fill whole OFDM symbols")
        return int(n)

    def payload_bits(self, m: McsProfile) -> int:
        return self.n_data_symbols * self.data_bits_per_symbol(m) - fec.TAIL_BITS


def pilot_reference(n_fft: int) -> np.ndarray:
    """Known BPSK pilot on all subcarriers; fixed, independent of any trial seed."""
    rng = make_rng(0x9E3779B97F4A7C15, n_fft)
    return 1.0 - 2.0 * rng.integers(0, 2, n_fft)


@dataclass(frozen=True)
class OfdmPacket:
    payload: np.ndarray
    mcs: McsProfile
    cfg: OfdmConfig
    grid: np.ndarray  # (1 + D, K) frequency-domain symbols, row 0 = pilot
    samples: np.ndarray

    @property
    def data_symbols(self) -> np.ndarray:
        return self.grid[1:, self.cfg.data_subcarriers]


def random_payload(m: McsProfile, cfg: OfdmConfig, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, 2, cfg.payload_bits(m)).astype(np.uint8)


def build_packet(payload, m: McsProfile, cfg: OfdmConfig = OfdmConfig()) -> OfdmPacket:
    payload = np.asarray(payload, dtype=np.uint8).reshape(-1)
    if payload.size != cfg.payload_bits(m):
        raise ValueError(f"MCS {m.index} packet carries {cfg.payload_bits(m)} payload bits, got {payload.size}")
    K, D = cfg.fft_size, cfg.n_data_symbols
    coded = fec.conv_encode(payload, m.code).reshape(D, cfg.coded_bits_per_symbol(m))
    il = fec.interleaver_for(cfg.n_data_subcarriers, m.bits_per_subcarrier)
    coded = fec.interleave(coded, il)
    grid = np.zeros((1 + D, K), dtype=np.complex128)
    grid[0] = pilot_reference(K)
    grid[1:, cfg.data_subcarriers] = map_bits(coded.reshape(-1), m.constellation).reshape(D, -1)
    time = ifft(grid) * np.sqrt(K)
    with_cp = np.concatenate([time[:, K - cfg.cp_length:], time], axis=1)
    samples = with_cp.reshape(-1)
    payload.setflags(write=False)
    grid.setflags(write=False)
    samples.setflags(write=False)
    return OfdmPacket(payload, m, cfg, grid, samples)


def demodulate(samples, cfg: OfdmConfig) -> np.ndarray:
    """Strip CPs and FFT every symbol; returns the (1 + D, K) received grid."""
    samples = np.asarray(samples, dtype=np.complex128)[: cfg.packet_samples]
    blocks = samples.reshape(cfg.n_symbols, cfg.symbol_samples)[:, cfg.cp_length:]
    return fft(blocks) / np.sqrt(cfg.fft_size)


@dataclass(frozen=True)
class EqualizerState:
    """Per-subcarrier LS estimate, fixed for the rest of the packet."""

    h_est: np.ndarray

    def __post_init__(self):
        h = np.array(self.h_est, dtype=np.complex128)
        h.setflags(write=False)
        object.__setattr__(self, "h_est", h)


def estimate_channel_ls(y_pilot, x_pilot) -> EqualizerState:
    x_pilot = np.asarray(x_pilot, dtype=np.complex128)
    if np.any(np.abs(x_pilot) == 0):
        raise ValueError("pilot symbols must be nonzero")
    return EqualizerState(np.asarray(y_pilot) / x_pilot)


def equalize_zf(y, eq: EqualizerState, subcarriers=None):
    """X_hat = Y / H_hat. Returns ``(x_hat, erased)``; erased subcarriers have |H_hat| < 1e-12."""
    h = eq.h_est if subcarriers is None else eq.h_est[subcarriers]
    erased = np.abs(h) < ZF_EPS
    safe = np.where(erased, 1.0, h)
    x_hat = np.asarray(y) / safe
    x_hat = np.where(erased, 0.0, x_hat)
    return x_hat, np.broadcast_to(erased, x_hat.shape)


@dataclass
class RxResult:
    payload: np.ndarray
    ok: bool
    evm: np.ndarray  # rms error per data symbol
    equalized: np.ndarray = field(repr=False)  # (D, n_data) equalized data symbols
    equalizer: EqualizerState = field(repr=False)


def receive_packet(samples, tx: OfdmPacket) -> RxResult:
    """Demodulate, equalize with the pilot estimate, decode and compare against ``tx``.

    Timing is perfect; ``tx`` supplies the known pilot and the genie payload.
    """
    cfg, m = tx.cfg, tx.mcs
    grid = demodulate(samples, cfg)
    eq = estimate_channel_ls(grid[0], tx.grid[0])
    sc = cfg.data_subcarriers
    x_hat, erased = equalize_zf(grid[1:, sc], eq, sc)
    evm = np.sqrt(np.mean(np.abs(x_hat - tx.data_symbols) ** 2, axis=1))
    bits = demap_bits(x_hat.reshape(-1), m.constellation).astype(np.int8)
    bits = bits.reshape(cfg.n_data_symbols, cfg.n_data_subcarriers, m.bits_per_subcarrier)
    bits[erased] = fec.ERASURE
    bits = bits.reshape(cfg.n_data_symbols, -1)
    il = fec.interleaver_for(cfg.n_data_subcarriers, m.bits_per_subcarrier)
    coded = fec.deinterleave(bits, il).reshape(-1)
    decoded = fec.decode(coded, m.code, cfg.payload_bits(m))
    ok = bool(np.array_equal(decoded, tx.payload))
    return RxResult(decoded, ok, evm, x_hat, eq)
