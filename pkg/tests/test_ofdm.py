import numpy as np
import pytest

from era_lab import channel as chm
from era_lab import ofdm
from era_lab.analysis import predicted_symbol_error
from era_lab.channel import Cir, EraChannel
from era_lab.dsp import make_rng
from era_lab.irs import IrsConfiguration, IrsSchedule
from era_lab.ofdm import MCS_TABLE, OfdmConfig

CFG = OfdmConfig()


def packet(m, seed=0, cfg=CFG):
    return ofdm.build_packet(ofdm.random_payload(m, cfg, make_rng(seed, m.index)), m, cfg)


def switch_after_pilot(p0, p1, cfg=CFG):
    """Schedule holding p0 for the pilot symbol and p1 for the rest of the packet."""
    fs = cfg.sample_rate
    hold = 2 * cfg.packet_samples / fs
    first_switch = (cfg.symbol_samples - 0.5) / fs
    return IrsSchedule(p0, p1, 1 / (2 * hold), offset=hold - first_switch)


def test_mcs_table():
    expected = [(2, "1/2"), (4, "1/2"), (4, "3/4"), (16, "1/2"), (16, "3/4"), (64, "2/3"), (64, "3/4"), (64, "5/6")]
    assert [(m.order, str(m.rate)) for m in MCS_TABLE] == expected


def test_bit_accounting():
    # 16 symbols x 108 subcarriers x 1 bit x 1/2, minus 6 tail bits
    assert CFG.payload_bits(ofdm.mcs(0)) == 16 * 108 // 2 - 6 == 858
    for m in MCS_TABLE:
        n = CFG.payload_bits(m)
        assert m.code.coded_length(n) == 16 * CFG.coded_bits_per_symbol(m)


def test_sample_count_and_durations():
    p = packet(ofdm.mcs(0))
    assert p.samples.size == 17 * 160 == 2720
    assert CFG.symbol_duration == pytest.approx(4e-6)
    assert CFG.n_data_symbols * CFG.symbol_duration == pytest.approx(64e-6)


def test_data_subcarriers_exclude_dc():
    sc = CFG.data_subcarriers
    assert sc.size == 108 and 0 not in sc and len(set(sc)) == 108


def test_build_is_deterministic():
    a, b = packet(ofdm.mcs(5), 3), packet(ofdm.mcs(5), 3)
    assert a.samples.tobytes() == b.samples.tobytes()


def test_payload_size_checked():
    with pytest.raises(ValueError):
        ofdm.build_packet(np.zeros(10, np.uint8), ofdm.mcs(0), CFG)


def test_ls_estimate_noiseless():
    ch = chm.random_channel(2, n_elements=8)
    H = ch.direct.frequency_response(128)
    X = ofdm.pilot_reference(128)
    np.testing.assert_allclose(ofdm.estimate_channel_ls(H * X, X).h_est, H, atol=1e-12)


def test_ls_estimate_rejects_zero_pilot():
    with pytest.raises(ValueError):
        ofdm.estimate_channel_ls(np.ones(4), np.array([1, 0, 1, 1]))


def test_ls_estimate_noise_matches_snr():
    H = chm.random_channel(4).direct.frequency_response(128)
    X = ofdm.pilot_reference(128)
    snr = 100.0
    rng = make_rng(4, 4)
    err = []
    for _ in range(10_000):
        z = (rng.standard_normal(128) + 1j * rng.standard_normal(128)) * np.sqrt(np.mean(np.abs(H) ** 2) / snr / 2)
        err.append(np.abs(ofdm.estimate_channel_ls(H * X + z, X).h_est - H) ** 2)
    nmse = np.mean(err) / np.mean(np.abs(H) ** 2)
    assert nmse == pytest.approx(1 / snr, rel=0.05)


def test_equalizer_state_is_frozen():
    eq = ofdm.estimate_channel_ls(np.ones(4), np.ones(4))
    with pytest.raises(ValueError):
        eq.h_est[0] = 2.0


def test_zf_erases_near_zero_subcarriers():
    eq = ofdm.EqualizerState(np.array([1.0, 1e-14, 2.0]))
    x, erased = ofdm.equalize_zf(np.array([1.0, 1.0, 1.0]), eq)
    assert erased.tolist() == [False, True, False]
    assert x[0] == 1.0 and x[2] == 0.5


@pytest.mark.parametrize("m", MCS_TABLE, ids=lambda m: f"mcs{m.index}")
def test_noiseless_static_loopback(m):
    ch = chm.calibrate_jsr(chm.random_channel(6, n_elements=16, irs_tap=1), -6)
    p = packet(m, 11)
    r = IrsConfiguration.random(16, make_rng(6, 1))
    y = chm.apply_channel(p.samples, ch, IrsSchedule.static(r), 0.0, None, CFG.sample_rate)
    res = ofdm.receive_packet(y, p)
    assert res.ok
    assert res.evm.max() <= 1e-10


@pytest.mark.parametrize("m", MCS_TABLE, ids=lambda m: f"mcs{m.index}")
def test_clean_channel_high_snr(m):
    ch = chm.calibrate_jsr(chm.random_channel(1), float("-inf"))
    sched = IrsSchedule.static(IrsConfiguration.ones(128))
    fails = 0
    for t in range(200):
        rng = make_rng(77, t)
        p = ofdm.build_packet(ofdm.random_payload(m, CFG, rng), m, CFG)
        y = chm.apply_channel(p.samples, ch, sched, 1e-5, rng, CFG.sample_rate)
        fails += not ofdm.receive_packet(y, p).ok
    assert fails == 0


def test_outdated_estimate_matches_prediction():
    ch = chm.calibrate_jsr(chm.random_channel(9, n_elements=32, irs_tap=2), -3)
    g = make_rng(9, 9)
    r0, r1 = IrsConfiguration.random(32, g), IrsConfiguration.random(32, g)
    p = packet(ofdm.mcs(3), 2)
    y = chm.apply_channel(p.samples, ch, switch_after_pilot(r0, r1), 0.0, None, CFG.sample_rate)
    res = ofdm.receive_packet(y, p)
    sc = CFG.data_subcarriers
    h0 = chm.effective_subcarrier_channel(ch, r0, 128)[sc]
    h1 = chm.effective_subcarrier_channel(ch, r1, 128)[sc]
    e = predicted_symbol_error(h0, h1, p.data_symbols)
    np.testing.assert_allclose(res.equalized - p.data_symbols, e, atol=1e-9)


def test_complementary_switch_without_direct_path_negates_symbols():
    ch = EraChannel(Cir(np.zeros(3)), make_rng(1).standard_normal(8) + 0j, irs_tap=1)
    r = IrsConfiguration.random(8, make_rng(1, 1))
    p = packet(ofdm.mcs(0), 4)
    y = chm.apply_channel(p.samples, ch, switch_after_pilot(r, r.complement()), 0.0, None, CFG.sample_rate)
    res = ofdm.receive_packet(y, p)
    np.testing.assert_allclose(res.equalized, -p.data_symbols, atol=1e-12)
    assert not res.ok


def test_static_irs_matches_no_attacker_baseline():
    base = chm.random_channel(1)
    attacked = chm.calibrate_jsr(base, -10)
    off = chm.calibrate_jsr(base, float("-inf"))
    sched = IrsSchedule.static(IrsConfiguration.ones(128))
    m = ofdm.mcs(4)
    outcomes = {}
    for name, ch in (("irs", attacked), ("none", off)):
        fails = 0
        for t in range(100):
            rng = make_rng(3, t)
            p = ofdm.build_packet(ofdm.random_payload(m, CFG, rng), m, CFG)
            fails += not ofdm.receive_packet(chm.apply_channel(p.samples, ch, sched, 1e-5, rng, CFG.sample_rate), p).ok
        outcomes[name] = fails
    assert outcomes["irs"] == outcomes["none"]
