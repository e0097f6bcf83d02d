"""Monte-Carlo experiment runner: PER sweeps, surface-size curves and the optimizer demo.

Every packet draws from its own Philox stream keyed by the master seed and a
stream id packing (experiment id, grid index, trial index), so results do not
depend on the thread count or on trial scheduling.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml
from scipy.stats import binomtest

from . import ofdm
from .analysis import irs_ici_power, per_upper_bound
from .attacker import ProbeOracle, optimize_patterns
from .channel import (Cir, EraChannel, LinkGeometry, apply_channel, calibrate_jsr, effective_subcarrier_channel,
                      irs_tap_series, random_channel, required_surface_area)
from .dsp import fft, ifft, make_rng
from .irs import IrsConfiguration, IrsSchedule, all_zero_one_schedule
from .ofdm import OfdmConfig

EXPERIMENT_IDS = {
    "per-vs-jsr": 1,
    "era-vs-noise": 2,
    "per-vs-freq": 3,
    "surface-size": 4,
    "optimize": 5,
    "ici-check": 6,
    "selftest": 7,
    "per-bound": 8,
}

PER_COLUMNS = ["mcs", "jsr_db", "packets", "errors", "per", "ci_low", "ci_high", "seed"]
FREQ_COLUMNS = ["mcs", "f_irs_hz", "packets", "errors", "per", "ci_low", "ci_high", "seed"]
SURFACE_COLUMNS = ["d_ab_m", "d_ae_m", "d_eb_m", "area_m2"]
CSI_COLUMNS = ["k", "initial0", "initial1", "optimized0", "optimized1"]


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "per-vs-jsr"
    mcs: tuple[int, ...] = (0, 1, 2, 3, 4, 5, 6, 7)
    jsr_db: tuple[float, ...] = (-30.0, -25.0, -20.0, -15.0, -10.0, -5.0, 0.0)
    f_irs: tuple[float, ...] = (1e3, 2e3, 5e3, 10e3, 16e3, 30e3, 50e3, 100e3)
    era_frequency: float = 30e3
    fixed_jsr_db: float = -10.0
    snr_db: float = 50.0
    packets: int = 1000
    ofdm: OfdmConfig = field(default_factory=OfdmConfig)
    channel_seed: int = 1
    n_elements: int = 128
    n_taps: int = 6
    decay_db: float = 3.0
    seed: int = 2022
    out: str = "results"
    threads: int = 1
    rounds: int = 2
    probe_snr_db: float | None = None
    carrier_frequency: float = 5.35e9
    surface_jsr_db: float = -10.0
    surface_d_ab: tuple[float, ...] = tuple(float(d) for d in range(5, 101, 5))
    surface_d_ae: tuple[float, ...] = (1.0, 2.0, 10.0, 20.0)

    def __post_init__(self):
        for name in ("mcs", "jsr_db", "f_irs", "surface_d_ab", "surface_d_ae"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        self.validate()

    def validate(self) -> None:
        if self.kind not in EXPERIMENT_IDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.packets < 1:
            raise ConfigError("packets must be >= 1")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        for name in ("mcs", "jsr_db", "f_irs", "surface_d_ab", "surface_d_ae"):
            if not getattr(self, name):
                raise ConfigError(f"{name} grid must not be empty")
        if any(not 0 <= m < len(ofdm.MCS_TABLE) for m in self.mcs):
            raise ConfigError(f"MCS indices must lie in 0..{len(ofdm.MCS_TABLE) - 1}")
        if any(f <= 0 for f in self.f_irs) or self.era_frequency <= 0:
            raise ConfigError("modulation frequencies must be positive")
        if not 0 <= self.seed < 2 ** 64 or not 0 <= self.channel_seed < 2 ** 64:
            raise ConfigError("seeds must be unsigned 64-bit integers")

    @property
    def noise_var(self) -> float:
        return 10.0 ** (-self.snr_db / 10.0)

    def echo(self) -> dict:
        """Config content that determines results (excludes thread count and output path)."""
        d = asdict(self)
        d.pop("threads")
        d.pop("out")
        return d


def load_config(path, **overrides) -> ExperimentConfig:
    """Read a YAML config; unknown keys (top level or in ``ofdm``) are rejected."""
    try:
        doc = yaml.safe_load(Path(path).read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(doc, **overrides)


def config_from_dict(doc: dict, **overrides) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    doc = dict(doc)
    if "ofdm" in doc:
        sub = doc["ofdm"] or {}
        ofdm_known = {f.name for f in fields(OfdmConfig)}
        bad = set(sub) - ofdm_known
        if bad:
            raise ConfigError(f"unknown ofdm keys: {sorted(bad)}")
        try:
            doc["ofdm"] = OfdmConfig(**sub)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
    doc.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig(**doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


# --- results -------------------------------------------------------------------

def wilson_interval(errors: int, packets: int) -> tuple[float, float]:
    ci = binomtest(errors, packets).proportion_ci(confidence_level=0.95, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class PerResult:
    mcs: int
    point: float  # grid value: JSR in dB or modulation frequency in Hz
    packets: int
    errors: int
    seed: int
    label: str = ""

    def __post_init__(self):
        if not 0 <= self.errors <= self.packets:
            raise ValueError("error count must lie in 0..packets")

    @property
    def per(self) -> float:
        return self.errors / self.packets

    @property
    def interval(self) -> tuple[float, float]:
        return wilson_interval(self.errors, self.packets)

    def row(self) -> list:
        lo, hi = self.interval
        return [self.mcs, fmt_float(self.point), self.packets, self.errors, fmt_float(self.per), fmt_float(lo), fmt_float(hi), self.seed]


def fmt_float(x: float) -> str:
    return repr(float(x))


def per_table(results, mcs: int, label: str = "") -> list[PerResult]:
    return sorted((r for r in results if r.mcs == mcs and r.label == label), key=lambda r: r.point)


# --- trial machinery -------------------------------------------------------------

def stream_id(experiment: int, grid_index: int, trial: int) -> int:
    return (experiment << 56) | (grid_index << 32) | trial


def packet_error(ch: EraChannel, sched: IrsSchedule, m: ofdm.McsProfile, cfg: OfdmConfig,
                 noise_var: float, rng: np.random.Generator, randomize_phase: bool = True) -> bool:
    """Send one random packet; True when the decoded payload differs."""
    payload = ofdm.random_payload(m, cfg, rng)
    pkt = ofdm.build_packet(payload, m, cfg)
    if randomize_phase and not sched.is_static:
        sched = sched.with_offset(rng.uniform(0.0, sched.period))
    y = apply_channel(pkt.samples, ch, sched, noise_var, rng, cfg.sample_rate)
    return not ofdm.receive_packet(y, pkt).ok


def count_errors(ch, sched, m, cfg, noise_var, packets: int, seed: int, experiment: int,
                 grid_index: int, threads: int = 1) -> int:
    def run(chunk):
        return sum(packet_error(ch, sched, m, cfg, noise_var,
                                make_rng(seed, stream_id(experiment, grid_index, t))) for t in chunk)

    if threads == 1:
        return run(range(packets))
    chunks = [range(i, packets, threads) for i in range(threads)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return sum(pool.map(run, chunks))


def base_channel(cfg: ExperimentConfig) -> EraChannel:
    return random_channel(cfg.channel_seed, n_taps=cfg.n_taps, decay_db=cfg.decay_db,
                          n_elements=cfg.n_elements)


def _grid_index(i_mcs: int, i_point: int, variant: int = 0) -> int:
    return (variant << 20) | (i_mcs << 12) | i_point


# --- experiments -------------------------------------------------------------------

def run_per_vs_jsr(cfg: ExperimentConfig) -> list[PerResult]:
    exp = EXPERIMENT_IDS["per-vs-jsr"]
    ch0 = base_channel(cfg)
    sched = all_zero_one_schedule(cfg.n_elements, cfg.era_frequency)
    out = []
    for im, mi in enumerate(cfg.mcs):
        for ij, jsr in enumerate(cfg.jsr_db):
            ch = calibrate_jsr(ch0, jsr)
            n = count_errors(ch, sched, ofdm.mcs(mi), cfg.ofdm, cfg.noise_var, cfg.packets,
                             cfg.seed, exp, _grid_index(im, ij), cfg.threads)
            out.append(PerResult(mi, jsr, cfg.packets, n, cfg.seed))
    return out


def run_era_vs_noise(cfg: ExperimentConfig) -> list[PerResult]:
    """ERA on a noise-free link against a static IRS plus AWGN of the IRS signal power.

    Both arms share packet streams (paired comparison).
    """
    exp = EXPERIMENT_IDS["era-vs-noise"]
    ch0 = base_channel(cfg)
    era = all_zero_one_schedule(cfg.n_elements, cfg.era_frequency)
    static = IrsSchedule.static(IrsConfiguration.ones(cfg.n_elements))
    out = []
    for im, mi in enumerate(cfg.mcs):
        for ij, jsr in enumerate(cfg.jsr_db):
            ch = calibrate_jsr(ch0, jsr)
            gi = _grid_index(im, ij)
            n_era = count_errors(ch, era, ofdm.mcs(mi), cfg.ofdm, 0.0, cfg.packets, cfg.seed, exp, gi,
                                 cfg.threads)
            n_noise = count_errors(ch, static, ofdm.mcs(mi), cfg.ofdm, noise_power_equivalent(ch),
                                   cfg.packets, cfg.seed, exp, gi, cfg.threads)
            out.append(PerResult(mi, jsr, cfg.packets, n_era, cfg.seed, "era"))
            out.append(PerResult(mi, jsr, cfg.packets, n_noise, cfg.seed, "noise"))
    return out


def noise_power_equivalent(ch: EraChannel) -> float:
    """Per-sample noise variance equal to the received IRS signal power (unit transmit power)."""
    return ch.irs_power()


def run_per_vs_freq(cfg: ExperimentConfig) -> list[PerResult]:
    exp = EXPERIMENT_IDS["per-vs-freq"]
    ch = calibrate_jsr(base_channel(cfg), cfg.fixed_jsr_db)
    out = []
    for im, mi in enumerate(cfg.mcs):
        for jf, f in enumerate(cfg.f_irs):
            sched = all_zero_one_schedule(cfg.n_elements, f)
            n = count_errors(ch, sched, ofdm.mcs(mi), cfg.ofdm, cfg.noise_var, cfg.packets,
                             cfg.seed, exp, _grid_index(im, jf), cfg.threads)
            out.append(PerResult(mi, f, cfg.packets, n, cfg.seed))
    return out


def run_per_bound(cfg: ExperimentConfig, pattern_duration_factor: float = 10.0) -> tuple[PerResult, float]:
    """Guaranteed-fatal switches: direct path removed, complementary patterns,
    each pattern held ``pattern_duration_factor`` packet durations."""
    exp = EXPERIMENT_IDS["per-bound"]
    ch = replace(calibrate_jsr(base_channel(cfg), 0.0), direct=_zero_direct(cfg))
    Tp = cfg.ofdm.packet_duration
    hold = pattern_duration_factor * Tp
    sched = all_zero_one_schedule(cfg.n_elements, 1.0 / (2.0 * hold))
    m = ofdm.mcs(cfg.mcs[0])
    n = count_errors(ch, sched, m, cfg.ofdm, cfg.noise_var * ch.irs_power(), cfg.packets, cfg.seed, exp,
                     0, cfg.threads)
    return PerResult(m.index, sched.frequency, cfg.packets, n, cfg.seed), per_upper_bound(Tp, hold)


def _zero_direct(cfg: ExperimentConfig):
    return Cir(np.zeros(cfg.n_taps, dtype=np.complex128))


def run_surface_size(cfg: ExperimentConfig) -> list[tuple[float, float, float, float]]:
    jsr = 10.0 ** (cfg.surface_jsr_db / 10.0)
    rows = []
    for d_ae in cfg.surface_d_ae:
        for d_ab in cfg.surface_d_ab:
            g = LinkGeometry.perpendicular(d_ab, d_ae, cfg.carrier_frequency)
            rows.append((d_ab, d_ae, g.d_eb, required_surface_area(g, jsr)))
    return rows


@dataclass
class OptimizerDemo:
    result: object
    csi_before: tuple[np.ndarray, np.ndarray]
    csi_after: tuple[np.ndarray, np.ndarray]
    per: list[PerResult]


def run_optimizer_demo(cfg: ExperimentConfig) -> OptimizerDemo:
    """Greedy pattern search on a simulated channel, then a paired PER comparison
    of the all-0/all-1 pair against the optimized pair (same JSR calibration)."""
    exp = EXPERIMENT_IDS["optimize"]
    ch0 = base_channel(cfg)
    # the search runs on the link at the fixed JSR; the PER sweep rescales the same surface
    ch_probe = calibrate_jsr(ch0, cfg.fixed_jsr_db)
    sc = cfg.ofdm.data_subcarriers
    probe_rng = make_rng(cfg.seed, stream_id(exp, 0xFFFF, 1))
    probe = ProbeOracle(ch_probe, cfg.ofdm.fft_size, subcarriers=sc, snr_db=cfg.probe_snr_db,
                        rng=probe_rng if cfg.probe_snr_db is not None else None)
    res = optimize_patterns(probe, cfg.n_elements, rounds=cfg.rounds,
                            rng=make_rng(cfg.seed, stream_id(exp, 0xFFFF, 0)))
    exact = ProbeOracle(ch_probe, cfg.ofdm.fft_size, subcarriers=sc)
    before = (exact(res.initial0), exact(res.initial1))
    after = (exact(res.pattern0), exact(res.pattern1))
    pairs = {
        "all01": all_zero_one_schedule(cfg.n_elements, cfg.era_frequency),
        "optimized": IrsSchedule(res.pattern0, res.pattern1, cfg.era_frequency),
    }
    per = []
    for im, mi in enumerate(cfg.mcs):
        for ij, jsr in enumerate(cfg.jsr_db):
            ch = calibrate_jsr(ch0, jsr)
            for label, sched in pairs.items():
                n = count_errors(ch, sched, ofdm.mcs(mi), cfg.ofdm, cfg.noise_var, cfg.packets,
                                 cfg.seed, exp, _grid_index(im, ij), cfg.threads)
                per.append(PerResult(mi, jsr, cfg.packets, n, cfg.seed, label))
    return OptimizerDemo(res, before, after, per)


def csi_rows(cfg: ExperimentConfig, demo: OptimizerDemo) -> list[list]:
    """Normalized |H_k| on the data subcarriers before and after optimization."""
    cols = [*demo.csi_before, *demo.csi_after]
    return [[int(k)] + [fmt_float(c[i]) for c in cols] for i, k in enumerate(cfg.ofdm.data_subcarriers)]


# --- output ----------------------------------------------------------------------

def write_csv(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_manifest(path, cfg: ExperimentConfig, outputs: list[str]) -> None:
    echo = cfg.echo()
    blob = json.dumps(echo, sort_keys=True, default=str).encode()
    doc = {
        "experiment": cfg.kind,
        "config": echo,
        "seed": cfg.seed,
        "channel_seed": cfg.channel_seed,
        "content_hash": hashlib.sha256(blob).hexdigest(),
        "outputs": sorted(outputs),
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")


def per_rows(results: list[PerResult], with_label: bool = False) -> list[list]:
    if with_label:
        return [[r.label] + r.row() for r in results]
    return [r.row() for r in results]


def isotonic_violations(results: list[PerResult]) -> list[tuple[PerResult, PerResult]]:
    """Adjacent grid pairs whose PER decreases beyond their 95% intervals."""
    bad = []
    for a, b in zip(results, results[1:]):
        if b.interval[1] < a.interval[0]:
            bad.append((a, b))
    return bad


def at_least(a: PerResult, b: PerResult) -> bool:
    """PER(a) >= PER(b) modulo 95% intervals."""
    return a.interval[1] >= b.interval[0]


def relative_gap(a: float, b: float) -> float:
    top = max(a, b)
    return 0.0 if top == 0 else abs(a - b) / top


def binomial_band(p: float, n: int, k: float = 3.0) -> tuple[float, float]:
    s = math.sqrt(p * (1 - p) / n)
    return p - k * s, p + k * s


# --- ICI check -------------------------------------------------------------------

@dataclass(frozen=True)
class IciCheck:
    predicted_sir_db: np.ndarray  # |d_k|^2 / P_IRS
    simulated_sir_db: np.ndarray  # measured on time-domain simulated symbols
    closed_form_sir_db: np.ndarray  # from the coupling matrix
    symbols: int

    @property
    def max_deviation_db(self) -> float:
        return float(np.max(np.abs(self.simulated_sir_db - self.predicted_sir_db)))

    def rows(self) -> list[list]:
        return [[k, fmt_float(p), fmt_float(s), fmt_float(c)] for k, (p, s, c) in
                enumerate(zip(self.predicted_sir_db, self.simulated_sir_db, self.closed_form_sir_db))]


ICI_COLUMNS = ["k", "predicted_sir_db", "simulated_sir_db", "matrix_sir_db"]


def aligned_square_wave(n_elements: int, cfg: OfdmConfig) -> IrsSchedule:
    """All-0/all-1 toggling once per OFDM symbol, switching at the middle of each FFT window.

    Every FFT window then sees exactly half of its samples under each pattern,
    so the IRS tap is zero-mean with constant magnitude over the window.
    """
    ns, fs = cfg.symbol_samples, cfg.sample_rate
    first = cfg.cp_length + cfg.fft_size // 2 - ns // 2  # switch sample inside the cyclic prefix
    return all_zero_one_schedule(n_elements, fs / ns, offset=-(first - 0.5) / fs)


def run_ici_check(cfg: ExperimentConfig, symbols: int = 1000) -> IciCheck:
    """Send random QPSK symbols on every bin through the direct path plus an aligned square-wave
    IRS tap (no noise) and compare the per-subcarrier SIR with |d_k|^2 / P_IRS."""
    exp = EXPERIMENT_IDS["ici-check"]
    o = cfg.ofdm
    K, cp, ns = o.fft_size, o.cp_length, o.symbol_samples
    ch = calibrate_jsr(base_channel(cfg), cfg.fixed_jsr_db)
    sched = aligned_square_wave(cfg.n_elements, o)
    rng = make_rng(cfg.seed, stream_id(exp, 0, 0))
    X = np.exp(0.5j * np.pi * (rng.integers(0, 4, (symbols, K)) + 0.5))
    x = ifft(X) * np.sqrt(K)
    tx = np.concatenate([x[:, -cp:], x], axis=1).reshape(-1)
    y = apply_channel(tx, ch, sched, 0.0, None, o.sample_rate)
    Y = fft(y.reshape(symbols, ns)[:, cp:]) / np.sqrt(K)
    d = ch.direct.frequency_response(K)
    signal = np.mean(np.abs(d * X) ** 2, axis=0)
    ici = np.mean(np.abs(Y - d * X) ** 2, axis=0)
    window = irs_tap_series(ch, sched, ns, o.sample_rate)[cp:]
    rep = irs_ici_power(window, d, irs_tap_index=ch.irs_tap)
    if not rep.closed_form:
        raise RuntimeError("square-wave tap is not zero-mean over the FFT window")
    return IciCheck(_db(rep.predicted_sir), _db(signal / ici), rep.sir_db, symbols)


def _db(x) -> np.ndarray:
    return 10.0 * np.log10(np.asarray(x, dtype=float))
