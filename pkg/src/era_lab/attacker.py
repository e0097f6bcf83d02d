"""The adversary: toggle schedules and greedy adversarial pattern optimization."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .channel import EraChannel, effective_subcarrier_channel
from .irs import IrsConfiguration, IrsSchedule, all_zero_one_schedule

__all__ = [
    "IrsConfiguration", "IrsSchedule", "all_zero_one_schedule", "ProbeOracle",
    "OptimizationResult", "csi_distance", "optimize_patterns", "era_pair_from_optimizer",
]

Metric = Callable[[np.ndarray, np.ndarray], float]


def csi_distance(a, b) -> float:
    """Euclidean distance between two CSI vectors."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"CSI length mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum(np.abs(a - b) ** 2)))


class ProbeOracle:
    """Magnitude CSI |H_k| of a channel for a given IRS configuration.

    With ``snr_db`` set, each probe adds complex Gaussian estimation noise to H_k
    before taking magnitudes and averages ``repeats`` such probes. Responses are
    normalized to unit mean when ``normalize`` is true.
    """

    def __init__(self, ch: EraChannel, n_fft: int = 128, subcarriers=None, snr_db: float | None = None,
                 repeats: int = 1, rng: np.random.Generator | None = None, normalize: bool = True):
        if snr_db is not None and rng is None:
            raise ValueError("noisy probing needs an rng")
        self.ch = ch
        self.n_fft = n_fft
        self.subcarriers = subcarriers
        self.snr_db = snr_db
        self.repeats = repeats
        self.rng = rng
        self.normalize = normalize
        self.calls = 0

    def __call__(self, config: IrsConfiguration) -> np.ndarray:
        self.calls += 1
        h = effective_subcarrier_channel(self.ch, config, self.n_fft)
        if self.subcarriers is not None:
            h = h[self.subcarriers]
        if self.snr_db is None:
            mag = np.abs(h)
        else:
            var = self.ch.direct_power * 10.0 ** (-self.snr_db / 10.0)
            z = self.rng.standard_normal((self.repeats, 2, h.size)) * np.sqrt(var / 2.0)
            mag = np.mean(np.abs(h + z[:, 0] + 1j * z[:, 1]), axis=0)
        if self.normalize:
            mag = mag / np.mean(mag)
        return mag


@dataclass
class OptimizationResult:
    pattern0: IrsConfiguration
    pattern1: IrsConfiguration
    initial0: IrsConfiguration
    initial1: IrsConfiguration
    initial_distance: float
    trace: list[float] = field(default_factory=list)  # metric after every element visit
    probes: int = 0

    @property
    def final_distance(self) -> float:
        return self.trace[-1] if self.trace else self.initial_distance


def optimize_patterns(probe: Callable[[IrsConfiguration], np.ndarray], n: int, rounds: int = 2,
                      metric: Metric = csi_distance, rng: np.random.Generator | None = None,
                      init: tuple[IrsConfiguration, IrsConfiguration] | None = None,
                      keep_ties: bool = False) -> OptimizationResult:
    """Greedy two-pattern search maximizing the dissimilarity of the probed responses.

    Each round holds pattern1 fixed as reference and visits the elements of
    pattern0 in ascending order: flip, re-probe, and revert unless the metric
    strictly grew (``keep_ties=True`` keeps flips that leave it unchanged).
    The patterns swap roles after every round.
    """
    if n < 1:
        raise ValueError("need at least one element")
    if init is None:
        if rng is None:
            raise ValueError("random initialization needs an rng")
        init = (IrsConfiguration.random(n, rng), IrsConfiguration.random(n, rng))
    r0, r1 = init
    bits0 = list(r0.bits)
    probes = 0
    trace: list[float] = []
    initial_distance = None
    for _ in range(rounds):
        ref1 = probe(r1)
        probes += 1
        for i in range(n):
            before = probe(IrsConfiguration(bits0))
            bits0[i] ^= 1
            after = probe(IrsConfiguration(bits0))
            probes += 2
            d_before = metric(ref1, before)
            d_after = metric(ref1, after)
            if initial_distance is None:
                initial_distance = d_before
            improved = d_after > d_before or (keep_ties and d_after == d_before)
            if not improved:
                bits0[i] ^= 1
            trace.append(d_after if improved else d_before)
        r0, r1 = r1, IrsConfiguration(bits0)
        bits0 = list(r0.bits)
    # after an even number of swaps r0/r1 are back in their original roles
    return OptimizationResult(r0, r1, init[0], init[1],
                              initial_distance if initial_distance is not None else 0.0,
                              trace, probes)


def era_pair_from_optimizer(result: OptimizationResult, frequency: float, offset: float = 0.0) -> IrsSchedule:
    return IrsSchedule(result.pattern0, result.pattern1, frequency, offset)
