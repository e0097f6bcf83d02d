"""Fast deterministic invariant checks across all modules, used by ``era-lab selftest``.

Output lines carry no timings so that repeated runs are byte-identical.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import analysis, channel as chm, fec, harness as H, ofdm
from .attacker import ProbeOracle, optimize_patterns
from .dsp import constellation, demap_bits, fft, ifft, make_rng, map_bits
from .irs import IrsConfiguration, IrsSchedule, all_zero_one_schedule


@dataclass
class SelftestReport:
    results: list[tuple[str, bool, str]] = field(default_factory=list)

    @property
    def failed(self) -> int:
        return sum(not ok for _, ok, _ in self.results)

    @property
    def ok(self) -> bool:
        return self.failed == 0

    def lines(self) -> list[str]:
        out = [f"{'PASS' if ok else 'FAIL'} {name}" + (f" ({detail})" if detail else "")
               for name, ok, detail in self.results]
        out.append(f"{len(self.results) - self.failed}/{len(self.results)} checks passed")
        return out


def _fft_matches_dft():
    rng = make_rng(1)
    x = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    n = np.arange(64)
    dft = np.exp(-2j * np.pi * np.outer(n, n) / 64) @ x
    return np.allclose(fft(x), dft, atol=1e-9) and np.allclose(ifft(fft(x)), x, atol=1e-12)


def _constellations():
    for order in (2, 4, 16, 64):
        c = constellation(order)
        if abs(np.mean(np.abs(c.points) ** 2) - 1) > 1e-12:
            return False
        bits = make_rng(order).integers(0, 2, 600 * c.bits_per_symbol).astype(np.uint8)
        if not np.array_equal(demap_bits(map_bits(bits, c), c), bits):
            return False
    return True


def _viterbi_roundtrip():
    bits = make_rng(2).integers(0, 2, 300).astype(np.uint8)
    for rate in (Fraction(1, 2), Fraction(2, 3), Fraction(3, 4), Fraction(5, 6)):
        cfg = fec.CodeConfig(rate)
        if not np.array_equal(fec.decode(fec.conv_encode(bits, cfg), cfg, bits.size), bits):
            return False
    return True


def _interleaver_roundtrip():
    for bps in (1, 2, 4, 6):
        il = fec.interleaver_for(108, bps)
        x = np.arange(il.size)
        if not np.array_equal(fec.deinterleave(fec.interleave(x, il), il), x):
            return False
    return True


def _complement_symmetry():
    ch = chm.random_channel(3, n_elements=32)
    r = IrsConfiguration.random(32, make_rng(3))
    d = ch.direct.frequency_response(128)
    a = chm.effective_subcarrier_channel(ch, r, 128) - d
    b = chm.effective_subcarrier_channel(ch, r.complement(), 128) - d
    return np.allclose(a, -b, atol=1e-12)


def _jsr_calibration():
    ch = chm.calibrate_jsr(chm.random_channel(4), -10)
    return abs(chm.measured_jsr(ch) - 0.1) < 1e-12 and chm.calibrate_jsr(ch, float("-inf")).irs_power() == 0


def _noiseless_loopback():
    ch = chm.calibrate_jsr(chm.random_channel(5, n_elements=16), -6)
    sched = IrsSchedule.static(IrsConfiguration.random(16, make_rng(5)))
    for m in ofdm.MCS_TABLE:
        cfg = ofdm.OfdmConfig()
        p = ofdm.build_packet(ofdm.random_payload(m, cfg, make_rng(5, m.index)), m, cfg)
        if not ofdm.receive_packet(chm.apply_channel(p.samples, ch, sched, 0.0, None, cfg.sample_rate), p).ok:
            return False
    return True


def _outdated_csi_error():
    cfg = ofdm.OfdmConfig()
    ch = chm.calibrate_jsr(chm.random_channel(6, n_elements=16), -3)
    g = make_rng(6, 1)
    r0, r1 = IrsConfiguration.random(16, g), IrsConfiguration.random(16, g)
    fs = cfg.sample_rate
    hold = 2 * cfg.packet_samples / fs
    sched = IrsSchedule(r0, r1, 1 / (2 * hold), offset=hold - (cfg.symbol_samples - 0.5) / fs)
    m = ofdm.mcs(3)
    p = ofdm.build_packet(ofdm.random_payload(m, cfg, g), m, cfg)
    res = ofdm.receive_packet(chm.apply_channel(p.samples, ch, sched, 0.0, None, fs), p)
    sc = cfg.data_subcarriers
    e = analysis.predicted_symbol_error(chm.effective_subcarrier_channel(ch, r0, 128)[sc],
                                        chm.effective_subcarrier_channel(ch, r1, 128)[sc], p.data_symbols)
    return np.allclose(res.equalized - p.data_symbols, e, atol=1e-9)


def _ici_matrix_equivalence():
    rng = make_rng(7)
    K, L = 64, 4
    h = rng.standard_normal((L, K)) + 1j * rng.standard_normal((L, K))
    X = rng.standard_normal(K) + 1j * rng.standard_normal(K)
    x = ifft(X)
    y = chm.time_varying_convolve(np.r_[x[-L:], x], np.concatenate([np.zeros((L, L)), h], axis=1))
    Y = fft(y[L:])
    return np.allclose(analysis.ici_matrix(h).apply(X), Y, atol=1e-9 * np.abs(Y).max())


def _closed_form_ici():
    h = 0.1 * np.r_[np.ones(64), -np.ones(64)]
    rep = analysis.irs_ici_power(h, np.ones(128))
    return rep.closed_form and np.allclose(rep.sir_db, 20.0)


def _surface_area():
    g = chm.LinkGeometry(30.0, 10.0, np.sqrt(1000.0), 5.35e9)
    a = chm.required_surface_area(g, 0.1)
    return abs(a / 0.19 - 1) <= 0.05, f"A = {a:.4f} m^2"


def _optimizer_trace():
    ch = chm.calibrate_jsr(chm.random_channel(8, n_elements=32), -3)
    res = optimize_patterns(ProbeOracle(ch, 128), 32, rng=make_rng(8))
    return bool(np.all(np.diff(res.trace) >= 0) and res.final_distance >= res.initial_distance)


def _schedule():
    s = all_zero_one_schedule(4, 1e4, 7e-6)
    t = s.switch_times(0.0, 1e-3)
    return np.allclose(np.diff(t), 5e-5) and bool(s.pattern1_active(t[0] + 1e-9) != s.pattern1_active(t[0] - 1e-9))


def _thread_invariance(cfg: H.ExperimentConfig):
    ch = H.calibrate_jsr(H.base_channel(cfg), -10)
    sched = all_zero_one_schedule(cfg.n_elements, 30e3)
    args = (ch, sched, ofdm.mcs(4), cfg.ofdm, cfg.noise_var, 24, cfg.seed, H.EXPERIMENT_IDS["selftest"], 0)
    one = H.count_errors(*args, threads=1)
    many = H.count_errors(*args, threads=max(cfg.threads, 2))
    return one == many, f"{one}/24 errors"


def _wilson():
    lo, hi = H.wilson_interval(0, 1000)
    lo2, hi2 = H.wilson_interval(500, 1000)
    return lo == 0 and 0 < hi < 0.005 and lo2 < 0.5 < hi2


def run_selftest(cfg: H.ExperimentConfig | None = None) -> SelftestReport:
    cfg = cfg or H.ExperimentConfig(kind="selftest")
    checks = [
        ("dsp.fft_matches_dft", _fft_matches_dft),
        ("dsp.constellation_roundtrip", _constellations),
        ("fec.viterbi_roundtrip", _viterbi_roundtrip),
        ("fec.interleaver_roundtrip", _interleaver_roundtrip),
        ("irs.schedule_switching", _schedule),
        ("channel.complement_symmetry", _complement_symmetry),
        ("channel.jsr_calibration", _jsr_calibration),
        ("channel.surface_area", _surface_area),
        ("ofdm.noiseless_loopback", _noiseless_loopback),
        ("ofdm.outdated_csi_error", _outdated_csi_error),
        ("analysis.ici_matrix_equivalence", _ici_matrix_equivalence),
        ("analysis.closed_form_ici", _closed_form_ici),
        ("attacker.trace_non_decreasing", _optimizer_trace),
        ("harness.wilson_interval", _wilson),
        ("harness.thread_invariance", lambda: _thread_invariance(cfg)),
    ]
    report = SelftestReport()
    for name, fn in checks:
        try:
            out = fn()
            ok, detail = out if isinstance(out, tuple) else (out, "")
        except Exception as exc:  # noqa: BLE001 - a crashing check is a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        report.results.append((name, bool(ok), detail))
    return report
