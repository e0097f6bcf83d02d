"""Closed-form predictions for the ERA: outdated-equalizer symbol error, the ICI
coupling matrix of a time-varying CIR, IRS-induced ICI power and the PER bound."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .dsp import fft


def predicted_symbol_error(h0, h1, x, noise=None, est_noise=None) -> np.ndarray:
    """Symbol error after equalizing with an estimate taken under ``h0`` while the data saw ``h1``.

    With ``noise`` (data-symbol AWGN Z) and ``est_noise`` (estimate error Z~)
    the exact expression is used; without them this is the noiseless error
    X (H1 - H0) / H0, which is also the high-SNR approximation.
    """
    h0 = np.asarray(h0, dtype=np.complex128)
    if np.any(h0 == 0):
        raise ValueError("estimation channel H0 must be nonzero")
    h1 = np.asarray(h1, dtype=np.complex128)
    x = np.asarray(x, dtype=np.complex128)
    z = 0.0 if noise is None else np.asarray(noise)
    zt = 0.0 if est_noise is None else np.asarray(est_noise)
    return (x * (h1 - h0 - zt) + z) / (h0 + zt)


@dataclass(frozen=True)
class IciMatrix:
    """K x K coupling H[k, k'] from subcarrier k' into k for one OFDM symbol."""

    matrix: np.ndarray

    @property
    def n_fft(self) -> int:
        return self.matrix.shape[0]

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.matrix)

    def off_diagonal_power(self) -> np.ndarray:
        p = np.abs(self.matrix) ** 2
        return p.sum(axis=1) - np.diag(p)

    def apply(self, x) -> np.ndarray:
        return self.matrix @ np.asarray(x)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["k", "k_prime", "re", "im"])
            for k in range(self.n_fft):
                for kp in range(self.n_fft):
                    v = self.matrix[k, kp]
                    w.writerow([k, kp, repr(float(v.real)), repr(float(v.imag))])


def ici_matrix(cir, n_fft: int | None = None) -> IciMatrix:
    """Coupling matrix of a CIR varying over the FFT window.

    ``cir`` is (L, K): tap l at window sample m. Each tap is transformed along
    the sample axis and the results are combined with the tap's phase ramp.
    """
    h = np.asarray(cir, dtype=np.complex128)
    if h.ndim == 1:
        h = h[None, :]
    K = h.shape[1] if n_fft is None else n_fft
    if h.shape[1] != K:
        raise ValueError("CIR must be given for every sample of the FFT window")
    H_l = fft(h)  # (L, K), bin = k - k' (mod K)
    k = np.arange(K)
    offset = np.mod(k[:, None] - k[None, :], K)
    out = np.zeros((K, K), dtype=np.complex128)
    for l in range(h.shape[0]):
        out += H_l[l][offset] * np.exp(-2j * np.pi * l * k / K)[None, :]
    return IciMatrix(out / K)


@dataclass(frozen=True)
class SirReport:
    signal_power: np.ndarray  # S_k = |d_k|^2
    ici_power: float  # I_IRS by direct summation
    irs_power: float  # P_IRS, mean |h_IRS[m]|^2 over the window
    closed_form: bool  # zero-mean, constant-magnitude preconditions held

    @property
    def sir(self) -> np.ndarray:
        if self.ici_power == 0:
            return np.full(self.signal_power.shape, np.inf)
        return self.signal_power / self.ici_power

    @property
    def sir_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 10 * np.log10(self.sir)

    @property
    def predicted_sir(self) -> np.ndarray:
        """|d_k|^2 / P_IRS."""
        if self.irs_power == 0:
            return np.full(self.signal_power.shape, np.inf)
        return self.signal_power / self.irs_power

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["k", "signal_power", "ici_power", "irs_power", "sir", "sir_db", "closed_form"])
            for k, (s, r, rdb) in enumerate(zip(self.signal_power, self.sir, self.sir_db)):
                w.writerow([k, repr(float(s)), repr(self.ici_power), repr(self.irs_power),
                            repr(float(r)), repr(float(rdb)), int(self.closed_form)])


def irs_ici_power(irs_tap, direct_response, irs_tap_index: int = 0, tol: float = 1e-9) -> SirReport:
    """ICI produced by the IRS tap over one FFT window, per-subcarrier SIR.

    ``irs_tap`` holds h_IRS[m] for the K window samples. I_IRS is always
    summed from the coupling matrix; ``closed_form`` records whether the tap
    is zero-mean with constant magnitude, where I_IRS = P_IRS holds exactly.
    """
    h = np.asarray(irs_tap, dtype=np.complex128)
    K = h.size
    d = np.asarray(direct_response, dtype=np.complex128)
    cir = np.zeros((irs_tap_index + 1, K), dtype=np.complex128)
    cir[irs_tap_index] = h
    m = ici_matrix(cir).matrix
    # every row has the same total power, so row 0 stands for all k
    ici = float(np.sum(np.abs(m[0]) ** 2) - np.abs(m[0, 0]) ** 2)
    mags = np.abs(h)
    scale = max(mags.max(), 1e-300)
    closed = bool(np.all(np.abs(mags - mags[0]) <= tol * scale) and abs(h.sum()) <= tol * scale * K)
    return SirReport(np.abs(d) ** 2, ici, float(np.mean(mags ** 2)), closed)


def per_upper_bound(packet_duration: float, pattern_duration: float) -> float:
    """Fraction of packets hit by a switch when each pattern is held ``pattern_duration`` seconds."""
    if packet_duration <= 0 or pattern_duration <= 0:
        raise ValueError("durations must be positive")
    return min(1.0, packet_duration / pattern_duration)

