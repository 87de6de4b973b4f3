import math
from dataclasses import replace

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import ncx2

from beamtrack.link import (
    HD_FEC_BER,
    LinkConfig,
    OffsetTrace,
    PacketResult,
    ber_ook,
    calibrate_snr0,
    coupled_fraction,
    eval_packet,
    packet_bers,
    q_function,
    summarize_run,
)

CFG = LinkConfig()


def ncx2_fraction(r, sigma=1e-3, a=6e-3):
    # power of a circular Gaussian inside a disc = noncentral chi-square CDF
    r = np.asarray(r, dtype=float)
    return ncx2.cdf((a / sigma) ** 2, 2, (r / sigma) ** 2)


def test_q_function_at_three():
    with mpmath.workdps(30):
        ref = float(mpmath.erfc(3 / mpmath.sqrt(2)) / 2)
    assert q_function(3.0) == pytest.approx(ref, rel=1e-12)
    assert q_function(3.0) == pytest.approx(1.3499e-3, rel=1e-4)
    assert q_function(0.0) == 0.5


def test_fraction_matches_noncentral_chi_square():
    r = np.linspace(0, 0.02, 401)
    np.testing.assert_allclose(coupled_fraction(r), ncx2_fraction(r), rtol=1e-6, atol=1e-12)


def test_fraction_limits():
    # centred beam: Rayleigh CDF of the aperture radius
    assert coupled_fraction(0.0) == pytest.approx(-math.expm1(-18.0), rel=1e-12)
    assert coupled_fraction(1.0) == 0.0
    assert coupled_fraction(float("nan")) == 0.0
    wide = LinkConfig(aperture_radius=0.05)
    assert coupled_fraction(0.0, wide) == pytest.approx(1.0, abs=1e-12)


def test_fraction_monotone_against_fine_oracle():
    r = np.linspace(0, 0.02, 2001)          # 10x finer than a 0.1-mm grid
    f = coupled_fraction(r)
    assert np.all(np.diff(f) <= 1e-15)
    assert np.all((0 <= f) & (f <= 1))


def test_calibration_anchor():
    assert ber_ook(0.0) < HD_FEC_BER
    assert ber_ook(0.007) == pytest.approx(HD_FEC_BER, rel=1e-6)
    assert ber_ook(0.010) > HD_FEC_BER


def test_calibration_idempotent():
    snr0 = calibrate_snr0(CFG)
    again = calibrate_snr0(CFG.calibrated())
    assert again == pytest.approx(snr0, rel=1e-12)
    assert CFG.calibrated().snr0 == pytest.approx(snr0, rel=1e-9)


def test_calibration_with_independent_root_finder():
    from scipy.optimize import brentq
    frac = ncx2_fraction(0.007)
    root = brentq(lambda s: q_function(math.sqrt(s) * frac) - HD_FEC_BER, 1, 1e4, xtol=1e-12)
    assert calibrate_snr0(CFG) == pytest.approx(root, rel=1e-6)


def test_ber_monotone_on_grid():
    b = ber_ook(np.arange(0, 0.030001, 1e-4))
    assert np.all(np.diff(b) >= 0)
    assert np.all((0 <= b) & (b <= 0.5))


def test_ber_scales_with_rate():
    slow = replace(CFG, data_rate=5e7)
    assert ber_ook(0.007, slow) < ber_ook(0.007)
    assert ber_ook(0.007, replace(CFG, data_rate=CFG.ref_rate)) == ber_ook(0.007)


def test_fixed_snr_is_used():
    cfg = replace(CFG, snr0_db=20.0)
    assert cfg.snr0 == pytest.approx(100.0)
    assert ber_ook(0.0, cfg) == pytest.approx(q_function(10 * coupled_fraction(0.0)))


def test_packet_examples():
    assert eval_packet(np.zeros(10)) == PacketResult(ber_ook(0.0), False)
    far = eval_packet(np.full(10, 0.03))
    assert far.ber == pytest.approx(0.5, abs=1e-6) and far.lost
    mixed = np.array([0.0, 0.005, 0.008, 0.012])
    expect = sum(ber_ook(float(v)) for v in mixed) / 4
    assert eval_packet(mixed).ber == pytest.approx(expect, rel=1e-14)
    with pytest.raises(ValueError):
        eval_packet([])


@given(st.lists(st.floats(0, 0.03), min_size=1, max_size=20))
def test_lost_iff_above_threshold(offsets):
    p = eval_packet(offsets)
    assert p.lost == (p.ber > HD_FEC_BER)


def test_packet_bers_against_piecewise_oracle():
    rng = np.random.default_rng(3)
    t = np.arange(50) * 1e-4
    ber = rng.uniform(0, 0.01, 50)
    cfg = replace(CFG, data_rate=10_000 / 3e-4)      # 0.3-ms packets span 3 samples
    got = packet_bers(t, ber, 50e-4, cfg)
    assert len(got) == 16
    for k, g in enumerate(got):
        lo, hi = k * 3e-4, (k + 1) * 3e-4
        # exact overlap integral of the sample-and-hold signal
        area = sum(b * max(0.0, min(hi, t0 + 1e-4) - max(lo, t0)) for t0, b in zip(t, ber))
        assert g == pytest.approx(area / 3e-4, rel=1e-9)


def test_short_packets_take_their_sample_value():
    t = np.arange(3) * 1e-4
    got = packet_bers(t, np.array([0.1, 0.2, 0.3]), 3e-4, CFG)    # 10-us packets
    assert len(got) == 30
    np.testing.assert_allclose(got, np.repeat([0.1, 0.2, 0.3], 10), rtol=1e-9)


def test_summarize_examples():
    trace = OffsetTrace(np.arange(5.0), np.full(5, 0.002), np.full(5, -0.001))
    cfg = replace(CFG, packets_per_run=100)
    bers = np.array([0.01] * 15 + [1e-5] * 85)
    m = summarize_run(bers, trace, cfg)
    assert m.plr == 0.15
    assert m.throughput == cfg.data_rate * (1 - 0.15)
    assert m.throughput == pytest.approx(850e6)
    assert (m.offset_std_x, m.offset_std_y) == (0.0, 0.0)
    clean = summarize_run([PacketResult(1e-6, False)] * 100, trace, cfg)
    assert clean.plr == 0.0 and clean.throughput == cfg.data_rate


def test_summarize_needs_enough_packets():
    trace = OffsetTrace(np.zeros(1), np.zeros(1), np.zeros(1))
    with pytest.raises(ValueError):
        summarize_run(np.zeros(99), trace, CFG)


@settings(max_examples=50)
@given(st.integers(0, 100), st.sampled_from([5e7, 2e8, 8.5e8, 1e9]))
def test_throughput_identity_exact(n_lost, rate):
    cfg = replace(CFG, data_rate=rate)
    bers = np.array([0.1] * n_lost + [0.0] * (100 - n_lost))
    m = summarize_run(bers, OffsetTrace(np.zeros(2), np.zeros(2), np.zeros(2)), cfg)
    assert m.throughput == rate * (1 - m.plr)
    assert 0 <= m.plr <= 1


def test_offset_std_about_mean():
    x = np.array([0.0, 0.002, 0.004, 0.006])
    m = summarize_run(np.zeros(100), OffsetTrace(np.arange(4.0), x, 2 * x), CFG)
    assert m.offset_std_x == pytest.approx(np.std(x))
    assert m.offset_std == pytest.approx(math.hypot(np.std(x), 2 * np.std(x)))


def test_offset_trace_samples_velocity():
    t = np.linspace(0, 1, 11)
    s = list(OffsetTrace(t, 2 * t, -t).samples())
    assert s[3].vx == pytest.approx(2.0) and s[3].vy == pytest.approx(-1.0)


@pytest.mark.parametrize("bad", [dict(aperture_radius=0), dict(fec_ber=0.6),
                                 dict(symbols_per_packet=0), dict(data_rate=-1)])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        LinkConfig(**bad)
