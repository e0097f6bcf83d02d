"""Direct tapped-delay-line channel plus an adversarial IRS folded onto one CIR tap,
JSR calibration and the free-space surface-size link budget."""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .dsp import awgn, make_rng
from .irs import IrsConfiguration, IrsSchedule

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class Cir:
    taps: np.ndarray

    def __post_init__(self):
        taps = np.atleast_1d(np.asarray(self.taps, dtype=np.complex128))
        if taps.ndim != 1 or taps.size < 1:
            raise ValueError("a CIR needs at least one tap")
        object.__setattr__(self, "taps", taps)

    def __len__(self) -> int:
        return self.taps.size

    def frequency_response(self, n_fft: int) -> np.ndarray:
        k = np.arange(n_fft)
        l = np.arange(self.taps.size)
        return np.exp(-2j * np.pi * np.outer(k, l) / n_fft) @ self.taps

    @property
    def power(self) -> float:
        return float(np.sum(np.abs(self.taps) ** 2))


@dataclass(frozen=True)
class EraChannel:
    """Static direct CIR plus N IRS element paths landing on tap ``irs_tap``.

    Element i contributes ``irs_scale * element_gains[i] * r_i`` to that tap, so
    its per-subcarrier cascade gain is that value times the tap's phase ramp.
    """

    direct: Cir
    element_gains: np.ndarray
    irs_tap: int = 0
    irs_scale: float = 1.0
    seed: int | None = None

    def __post_init__(self):
        gains = np.atleast_1d(np.asarray(self.element_gains, dtype=np.complex128))
        gains.setflags(write=False)
        object.__setattr__(self, "element_gains", gains)
        if gains.size < 1:
            raise ValueError("the IRS needs at least one element")
        if not 0 <= self.irs_tap < len(self.direct):
            raise ValueError("IRS tap must index an existing direct tap")
        if self.irs_scale < 0:
            raise ValueError("IRS scale must be non-negative")

    @property
    def n_elements(self) -> int:
        return self.element_gains.size

    @property
    def n_taps(self) -> int:
        return len(self.direct)

    @property
    def direct_power(self) -> float:
        return self.direct.power

    def irs_tap_value(self, config: IrsConfiguration) -> complex:
        _check_config(self, config)
        return complex(self.irs_scale * np.dot(self.element_gains, config.signs))

    def irs_power(self, config: IrsConfiguration | None = None) -> float:
        """|h_IRS|^2 for ``config`` (all-ones reference when omitted)."""
        config = config or IrsConfiguration.ones(self.n_elements)
        return abs(self.irs_tap_value(config)) ** 2

    def cascade_gains(self, n_fft: int) -> np.ndarray:
        """Per-element, per-subcarrier cascade gains q[i, k] (IRS scale included)."""
        ramp = np.exp(-2j * np.pi * self.irs_tap * np.arange(n_fft) / n_fft)
        return self.irs_scale * np.outer(self.element_gains, ramp)


def _check_config(ch: EraChannel, config: IrsConfiguration) -> None:
    if config.n != ch.n_elements:
        raise ValueError(f"configuration has {config.n} elements, channel has {ch.n_elements}")


def random_channel(seed: int, n_taps: int = 6, decay_db: float = 3.0, n_elements: int = 128,
                   irs_tap: int = 0) -> EraChannel:
    """Exponential power-delay profile, Rayleigh taps, unit total direct power.

    IRS elements get unit cascade amplitude and uniform random phase.
    """
    rng = make_rng(seed, 0xC4A7)
    profile = 10.0 ** (-decay_db * np.arange(n_taps) / 10.0)
    g = rng.standard_normal((2, n_taps))
    taps = np.sqrt(profile / 2.0) * (g[0] + 1j * g[1])
    taps /= np.sqrt(np.sum(np.abs(taps) ** 2))
    phases = rng.uniform(0.0, 2.0 * np.pi, n_elements)
    return EraChannel(Cir(taps), np.exp(1j * phases), irs_tap=irs_tap, irs_scale=1.0, seed=seed)


def effective_subcarrier_channel(ch: EraChannel, config: IrsConfiguration, n_fft: int) -> np.ndarray:
    """H_k = sum_i q[i, k] r_i + d_k."""
    _check_config(ch, config)
    return config.signs @ ch.cascade_gains(n_fft) + ch.direct.frequency_response(n_fft)


def irs_tap_series(ch: EraChannel, sched: IrsSchedule, n_samples: int, sample_rate: float,
                   start: int = 0) -> np.ndarray:
    """IRS tap value at every sample index ``start .. start + n_samples - 1``."""
    h0 = ch.irs_tap_value(sched.pattern0)
    if sched.is_static:
        return np.full(n_samples, h0, dtype=np.complex128)
    h1 = ch.irs_tap_value(sched.pattern1)
    t = (start + np.arange(n_samples)) / sample_rate
    return np.where(sched.pattern1_active(t), h1, h0)


def cir_series(ch: EraChannel, sched: IrsSchedule, n_samples: int, sample_rate: float,
               start: int = 0) -> np.ndarray:
    """Time-varying CIR h_l[m] as an (L, n_samples) array."""
    h = np.repeat(ch.direct.taps[:, None], n_samples, axis=1)
    h[ch.irs_tap] += irs_tap_series(ch, sched, n_samples, sample_rate, start)
    return h


def time_varying_cir(ch: EraChannel, sched: IrsSchedule, m: int, sample_rate: float) -> Cir:
    return Cir(cir_series(ch, sched, 1, sample_rate, start=m)[:, 0])


def time_varying_convolve(x, h) -> np.ndarray:
    """y[m] = sum_l h[l, m] x[m - l]; taps are indexed by output time."""
    x = np.asarray(x, dtype=np.complex128)
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim == 1:
        h = h[:, None]
    y = h[0] * x
    for l in range(1, h.shape[0]):
        y[l:] += h[l, l:] * x[:-l] if h.shape[1] > 1 else h[l, 0] * x[:-l]
    return y


def apply_channel(samples, ch: EraChannel, sched: IrsSchedule, noise_var: float,
                  rng: np.random.Generator | None, sample_rate: float) -> np.ndarray:
    """Pass a sample stream (sample 0 at t = 0) through the time-varying channel, then AWGN."""
    samples = np.asarray(samples, dtype=np.complex128)
    h = cir_series(ch, sched, samples.size, sample_rate)
    y = time_varying_convolve(samples, h)
    if noise_var > 0:
        y = awgn(y, noise_var, rng)
    return y


# --- JSR ---------------------------------------------------------------------

def measured_jsr(ch: EraChannel, config: IrsConfiguration | None = None) -> float:
    """P_IRS over the direct power (mean |d_k|^2 = sum |h_l|^2), linear."""
    return ch.irs_power(config) / ch.direct_power


def calibrate_jsr(ch: EraChannel, jsr_db: float) -> EraChannel:
    """Rescale the IRS so the all-ones configuration hits ``jsr_db``; -inf switches it off."""
    if ch.direct_power <= 0:
        raise ValueError("direct channel has zero power")
    if np.isneginf(jsr_db):
        return replace(ch, irs_scale=0.0)
    ref = abs(np.sum(ch.element_gains)) ** 2
    if ref <= 0:
        raise ValueError("all-ones IRS reference has zero power")
    target = 10.0 ** (jsr_db / 10.0) * ch.direct_power
    return replace(ch, irs_scale=float(np.sqrt(target / ref)))


# --- link budget -------------------------------------------------------------

@dataclass(frozen=True)
class LinkGeometry:
    d_ab: float
    d_ae: float
    d_eb: float
    frequency: float

    def __post_init__(self):
        if min(self.d_ab, self.d_ae, self.d_eb, self.frequency) <= 0:
            raise ValueError("distances and frequency must be positive")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.frequency

    @classmethod
    def perpendicular(cls, d_ab: float, d_ae: float, frequency: float) -> "LinkGeometry":
        """Eve offset from Alice at right angles to the Alice-Bob axis."""
        return cls(d_ab, d_ae, float(np.hypot(d_ab, d_ae)), frequency)


def direct_path_gain(g: LinkGeometry) -> float:
    return (g.wavelength / (4 * np.pi * g.d_ab)) ** 2


def irs_path_gain(g: LinkGeometry, area: float) -> float:
    return (area / (4 * np.pi * g.d_ae * g.d_eb)) ** 2


def jsr_from_geometry(g: LinkGeometry, area: float) -> float:
    """Linear JSR reached by an optimally configured surface of ``area`` m^2."""
    return (area * g.d_ab / (g.d_ae * g.d_eb * g.wavelength)) ** 2


def required_surface_area(g: LinkGeometry, jsr: float) -> float:
    """Surface area (m^2) needed for linear JSR ``jsr``."""
    if jsr < 0:
        raise ValueError("JSR must be non-negative (linear)")
    return float(np.sqrt(jsr) * g.d_ae * g.d_eb * g.wavelength / g.d_ab)


# --- persistence -------------------------------------------------------------

def save_channel(ch: EraChannel, path) -> None:
    doc = {
        "seed": ch.seed,
        "irs_tap": ch.irs_tap,
        "irs_scale": ch.irs_scale,
        "direct_taps": [[t.real, t.imag] for t in ch.direct.taps],
        "elements": [[g.real, g.imag] for g in ch.element_gains],
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_channel(path) -> EraChannel:
    doc = json.loads(Path(path).read_text())
    taps = np.array([complex(re, im) for re, im in doc["direct_taps"]])
    gains = np.array([complex(re, im) for re, im in doc["elements"]])
    return EraChannel(Cir(taps), gains, irs_tap=doc["irs_tap"], irs_scale=doc["irs_scale"],
                      seed=doc["seed"])
