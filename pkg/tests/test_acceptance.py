"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Tolerances and runtimes are the contractual ones; the Monte-Carlo criteria use
the default experiment configuration (channel seed 1, master seed 2022).
"""
import itertools
import time

import numpy as np
from scipy.spatial.distance import cdist

from era_lab import analysis, cli, ofdm
from era_lab import channel as chm
from era_lab import harness as H
from era_lab.attacker import ProbeOracle, optimize_patterns
from era_lab.channel import Cir, EraChannel, LinkGeometry
from era_lab.dsp import fft, ifft, make_rng
from era_lab.irs import IrsConfiguration, IrsSchedule

CFG = ofdm.OfdmConfig()


def switch_after_pilot(p0, p1, cfg=CFG):
    """p0 during the pilot symbol, p1 for every data symbol."""
    fs = cfg.sample_rate
    hold = 2 * cfg.packet_samples / fs
    return IrsSchedule(p0, p1, 1 / (2 * hold), offset=hold - (cfg.symbol_samples - 0.5) / fs)


def test_c01_closed_form_sir(criterion):
    t = time.perf_counter()
    r = H.run_ici_check(H.ExperimentConfig(kind="ici-check"), symbols=1000)
    dt = time.perf_counter() - t
    dev = np.abs(r.simulated_sir_db - r.predicted_sir_db)
    ok = dev.max() <= 0.2 and dt < 5
    criterion(1, ok, f"max |SIR_sim - |d_k|^2/P_IRS| = {dev.max():.3f} dB over 128 subcarriers "
                     f"(mean {dev.mean():.3f} dB, tol 0.2 dB), {dt:.2f} s")


def test_c02_ici_matrix_equivalence(criterion):
    t = time.perf_counter()
    rng = make_rng(2, 2)
    K, worst = 128, 0.0
    for _ in range(50):
        L = int(rng.integers(1, 9))
        h = rng.standard_normal((L, K)) + 1j * rng.standard_normal((L, K))
        X = rng.standard_normal(K) + 1j * rng.standard_normal(K)
        x = ifft(X)
        h_full = np.concatenate([rng.standard_normal((L, L)) + 0j, h], axis=1)  # CP-time taps are discarded
        Y = fft(chm.time_varying_convolve(np.r_[x[K - L:], x], h_full)[L:])
        Y_ici = analysis.ici_matrix(h).apply(X)
        worst = max(worst, np.linalg.norm(Y_ici - Y) / np.linalg.norm(Y))
    dt = time.perf_counter() - t
    criterion(2, worst <= 1e-9 and dt < 5, f"worst relative error {worst:.2e} over 50 CIRs, {dt:.2f} s")


def test_c03_outdated_csi_exactness(criterion):
    rng = make_rng(3, 3)
    worst = 0.0
    for trial in range(100):
        n = int(rng.integers(1, 129))
        ch = chm.calibrate_jsr(chm.random_channel(int(rng.integers(2 ** 32)), n_elements=n,
                                                  irs_tap=int(rng.integers(0, 4))), rng.uniform(-15, 5))
        r0, r1 = IrsConfiguration.random(n, rng), IrsConfiguration.random(n, rng)
        m = ofdm.mcs(int(rng.integers(0, 8)))
        p = ofdm.build_packet(ofdm.random_payload(m, CFG, rng), m, CFG)
        y = chm.apply_channel(p.samples, ch, switch_after_pilot(r0, r1), 0.0, None, CFG.sample_rate)
        res = ofdm.receive_packet(y, p)
        sc = CFG.data_subcarriers
        e = analysis.predicted_symbol_error(chm.effective_subcarrier_channel(ch, r0, 128)[sc],
                                            chm.effective_subcarrier_channel(ch, r1, 128)[sc], p.data_symbols)
        worst = max(worst, np.max(np.abs(res.equalized - p.data_symbols - e)))
    ch = EraChannel(Cir(np.zeros(4)), make_rng(3).standard_normal(16) + 1j * make_rng(4).standard_normal(16),
                    irs_tap=2)
    r = IrsConfiguration.random(16, rng)
    p = ofdm.build_packet(ofdm.random_payload(ofdm.mcs(4), CFG, rng), ofdm.mcs(4), CFG)
    res = ofdm.receive_packet(chm.apply_channel(p.samples, ch, switch_after_pilot(r, r.complement()), 0.0, None,
                                                CFG.sample_rate), p)
    neg = np.max(np.abs(res.equalized + p.data_symbols))
    criterion(3, worst <= 1e-9 and neg <= 1e-12,
              f"max |error - predicted| = {worst:.2e} over 100 pairs; complementary d=0 max |X_hat + X| = {neg:.1e}")


def test_c04_surface_area(criterion):
    g = LinkGeometry(30.0, 10.0, np.sqrt(1000.0), 5.35e9)
    t = time.perf_counter()
    a = chm.required_surface_area(g, 10 ** -1.0)
    dt = time.perf_counter() - t
    criterion(4, abs(a / 0.19 - 1) <= 0.05 and dt < 1e-3, f"A_IRS = {a:.4f} m^2 (target 0.19 +/- 5%), {dt * 1e6:.0f} us")


def test_c05_per_bound(criterion):
    t = time.perf_counter()
    cfg = H.ExperimentConfig(kind="per-vs-freq", mcs=(7,), packets=5000)
    res, bound = H.run_per_bound(cfg, pattern_duration_factor=10.0)
    dt = time.perf_counter() - t
    lo, hi = H.binomial_band(bound, res.packets)
    ok = lo <= res.per <= hi and dt < 120
    criterion(5, ok, f"PER = {res.per:.4f} ({res.errors}/{res.packets}), bound {bound:.3f}, "
                     f"3-sigma band [{lo:.4f}, {hi:.4f}], {dt:.0f} s")


def test_c06_per_vs_jsr_ordering(criterion):
    t = time.perf_counter()
    cfg = H.ExperimentConfig(kind="per-vs-jsr")
    res = H.run_per_vs_jsr(cfg)
    dt = time.perf_counter() - t
    bad = {m: H.isotonic_violations(H.per_table(res, m)) for m in cfg.mcs}
    at = {m: next(r for r in H.per_table(res, m) if r.point == -10.0) for m in (0, 4, 7)}
    order = H.at_least(at[7], at[4]) and H.at_least(at[4], at[0])
    ok = not any(bad.values()) and order and dt < 600
    criterion(6, ok, f"isotonic violations {sum(map(len, bad.values()))}; PER@-10dB MCS7/4/0 = "
                     f"{at[7].per:.3f}/{at[4].per:.3f}/{at[0].per:.3f}, {dt:.0f} s")


def test_c07_era_beats_noise(criterion):
    t = time.perf_counter()
    cfg = H.ExperimentConfig(kind="era-vs-noise", mcs=(3, 4, 5, 6, 7))
    res = H.run_era_vs_noise(cfg)
    dt = time.perf_counter() - t
    fails = []
    for m in cfg.mcs:
        for era, noise in zip(H.per_table(res, m, "era"), H.per_table(res, m, "noise")):
            if not H.at_least(era, noise):
                fails.append(f"MCS{m}@{era.point:g}dB {era.per:.3f}<{noise.per:.3f}")
    lowest = [r.per for r in res if r.point == min(cfg.jsr_db) and r.label == "noise"]
    criterion(7, not fails and dt < 600,
              f"{len(fails)} points with PER_ERA < PER_noise {fails[:3]}; noise-arm PER at "
              f"{min(cfg.jsr_db):g} dB max {max(lowest):.3f}, {dt:.0f} s")


def test_c08_frequency_plateau(criterion):
    t = time.perf_counter()
    cfg = H.ExperimentConfig(kind="per-vs-freq")
    res = H.run_per_vs_freq(cfg)
    dt = time.perf_counter() - t
    f_a, f_b = sorted(cfg.f_irs)[-2:]
    gaps, viol = {}, 0
    for m in cfg.mcs:
        table = H.per_table(res, m)
        per = {r.point: r.per for r in table}
        gaps[m] = H.relative_gap(per[f_a], per[f_b])
        viol += len(H.isotonic_violations(table))
    bad = {m: round(g, 3) for m, g in gaps.items() if g > 0.2}
    summary = " ".join(f"MCS{m}:{H.per_table(res, m)[-2].per:.3f}/{H.per_table(res, m)[-1].per:.3f}" for m in cfg.mcs)
    criterion(8, not bad and viol == 0 and dt < 600,
              f"PER at {f_a / 1e3:g}/{f_b / 1e3:g} kHz {summary}; gaps > 20%: {bad}; "
              f"isotonic violations {viol}, {dt:.0f} s")


def test_c09_optimizer(criterion):
    t = time.perf_counter()
    non_decreasing = improved = 0
    for seed in range(100):
        ch = chm.calibrate_jsr(chm.random_channel(1000 + seed), -10)
        res = optimize_patterns(ProbeOracle(ch, 128, subcarriers=CFG.data_subcarriers), 128,
                                rng=make_rng(seed, 9))
        non_decreasing += bool(np.all(np.diff(res.trace) >= 0))
        improved += res.final_distance > res.initial_distance

    # N = 10: independent one-probe-at-a-time replay and the exhaustive optimum
    n = 10
    ch = chm.calibrate_jsr(chm.random_channel(77, n_elements=n), -3)
    probe = ProbeOracle(ch, 128, subcarriers=CFG.data_subcarriers)
    init = (IrsConfiguration.random(n, make_rng(77, 1)), IrsConfiguration.random(n, make_rng(77, 2)))
    res = optimize_patterns(probe, n, init=init)
    r0, r1 = list(init[0].bits), list(init[1].bits)
    for _ in range(2):
        ref = probe(IrsConfiguration(tuple(r1)))
        for i in range(n):
            old = probe(IrsConfiguration(tuple(r0)))
            r0[i] = 1 - r0[i]
            if not analysis_distance(ref, probe(IrsConfiguration(tuple(r0)))) > analysis_distance(ref, old):
                r0[i] = 1 - r0[i]
        r0, r1 = r1, r0
    replay_ok = (res.pattern0.bits, res.pattern1.bits) == (tuple(r0), tuple(r1))
    table = np.array([probe(IrsConfiguration(b)) for b in itertools.product([0, 1], repeat=n)])
    best = cdist(table, table).max()
    fraction = res.final_distance / best

    cfg = H.ExperimentConfig(kind="optimize", mcs=(0,))
    demo = H.run_optimizer_demo(cfg)
    pairs = list(zip(H.per_table(demo.per, 0, "optimized"), H.per_table(demo.per, 0, "all01")))
    per_ok = all(H.at_least(o, a) for o, a in pairs)
    dt = time.perf_counter() - t
    per_txt = " ".join(f"{o.point:g}dB:{o.per:.3f}/{a.per:.3f}" for o, a in pairs)
    ok = non_decreasing == 100 and replay_ok and per_ok and dt < 300
    criterion(9, ok, f"trace non-decreasing {non_decreasing}/100, strict improvement {improved}/100; "
                     f"N=10 replay {'equal' if replay_ok else 'DIFFERENT'}, fraction of exhaustive optimum "
                     f"{fraction:.4f}; MCS0 PER optimized/all01 {per_txt}; {dt:.0f} s")


def analysis_distance(a, b):
    return float(np.sqrt(np.sum((np.asarray(a) - np.asarray(b)) ** 2)))


def test_c10_baseline_sanity(criterion):
    cfg = H.ExperimentConfig()
    base = H.base_channel(cfg)
    static = IrsSchedule.static(IrsConfiguration.ones(cfg.n_elements))
    exp = H.EXPERIMENT_IDS["per-vs-jsr"]
    equal, worst = True, 0.0
    for m in ofdm.MCS_TABLE:
        args = (m, cfg.ofdm, cfg.noise_var, cfg.packets, cfg.seed, exp, 0xABC00 + m.index)
        attacked = H.count_errors(chm.calibrate_jsr(base, -10), static, *args)
        clean = H.count_errors(chm.calibrate_jsr(base, float("-inf")), static, *args)
        equal &= attacked == clean
        worst = max(worst, clean / cfg.packets)
    criterion(10, equal and worst <= 0.001,
              f"static IRS errors equal baseline for all MCS: {equal}; worst clean PER {worst:.4f} (tol 0.001)")


def test_c11_determinism(criterion, tmp_path):
    sweep = tmp_path / "sweep.yaml"
    sweep.write_text("mcs: [0, 4, 7]\njsr_db: [-20.0, -10.0]\npackets: 40\n")
    outputs = []
    for i, threads in enumerate(["1", "8", "1", "8"]):
        run = tmp_path / f"run{i}"
        rc1 = cli.main(["selftest", "--out", str(run / "selftest"), "--seed", "99", "--threads", threads])
        rc2 = cli.main(["per-vs-jsr", "--config", str(sweep), "--out", str(run / "sweep"), "--seed", "99",
                        "--threads", threads])
        files = sorted(p for p in run.rglob("*") if p.is_file())
        outputs.append((rc1, rc2, {str(p.relative_to(run)): p.read_bytes() for p in files}))
    same = all(o == outputs[0] for o in outputs)
    criterion(11, same and outputs[0][:2] == (0, 0),
              f"{len(outputs[0][2])} files byte-identical across 4 runs (threads 1/8/1/8): {same}; "
              f"exit codes {outputs[0][:2]}")
