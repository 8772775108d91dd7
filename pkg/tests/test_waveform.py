"""Frame synthesis: Gold chips, PRS grids, OFDM structure."""

import numpy as np
import pytest

from multiscout import (
    BasebandFrame,
    WaveformConfig,
    build_prs_symbols,
    generate_gold_sequence,
    make_frame,
    ofdm_modulate,
)


def ref_lfsr(taps, seed, n):
    """Independent shift-register route: list shifting, ints only."""
    reg_len = taps[0]
    reg = list(seed)
    out = []
    for _ in range(n):
        out.append(reg[0])
        bit = reg[0]
        for t in taps[1:]:
            if t < reg_len:
                bit ^= reg[t]
        reg = reg[1:] + [bit]
    return np.array(out, dtype=np.uint8)


def test_gold_matches_reference_lfsr():
    got = generate_gold_sequence(length=4095)
    a = ref_lfsr((12, 6, 4, 1), (1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0), 4095)
    b = ref_lfsr((12, 7, 4, 3), (0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1), 4095)
    assert np.array_equal(got, a ^ b)


def test_gold_balance():
    g = generate_gold_sequence(length=4095)
    assert int(g.sum()) == 2048  # 2048 ones vs 2047 zeros over one period
    bpsk = 1.0 - 2.0 * g.astype(float)
    assert abs(bpsk.sum()) == 1.0


def test_gold_rejects_degenerate_inputs():
    with pytest.raises(ValueError):
        generate_gold_sequence(seed_a=(0,) * 12)
    with pytest.raises(ValueError):
        generate_gold_sequence(length=0)
    with pytest.raises(ValueError):
        generate_gold_sequence(length=4096)


def test_config_derived_sizes():
    cfg = WaveformConfig()
    assert cfg.sample_rate_hz == 15.36e6
    assert cfg.active_tones == 952
    assert cfg.frame_len == 140368
    assert WaveformConfig(num_symbols=16).frame_len == 17552


def test_config_validation():
    with pytest.raises(ValueError):
        WaveformConfig(cp_first_len=64, cp_rest_len=72)
    with pytest.raises(ValueError):
        WaveformConfig(guard_tones=512)
    with pytest.raises(ValueError):
        WaveformConfig(num_symbols=0)


def test_frame_shape_and_power(frame128):
    assert frame128.samples.size == 140368
    assert frame128.sample_rate_hz == 15.36e6
    assert frame128.carrier_freq_hz == 2.5e9
    assert np.mean(np.abs(frame128.samples) ** 2) == pytest.approx(1.0, rel=1e-12)
    bounds = frame128.symbol_boundaries
    assert bounds.size == 128 and bounds[0] == 0
    assert np.all(np.diff(bounds) > 0)


def test_cyclic_prefix_copies_symbol_tail(frame16):
    cfg = WaveformConfig(num_symbols=16)
    samples = frame16.samples
    for s, start in enumerate(frame16.symbol_boundaries):
        cp = cfg.cp_len(s)
        assert cp == (80 if s % 14 == 0 else 72)
        body_start = start + cp
        tail = samples[body_start + cfg.fft_len - cp : body_start + cfg.fft_len]
        np.testing.assert_allclose(samples[start : start + cp], tail, rtol=0, atol=1e-15)


def test_prs_grid_bpsk_and_nulls():
    cfg = WaveformConfig(num_symbols=4)
    chips = generate_gold_sequence(length=4095)
    grids = build_prs_symbols(cfg, chips)
    assert grids.shape == (4, 1024)
    assert grids[0, 0] == 0.0  # DC nulled
    active = np.flatnonzero(grids[0])
    assert active.size == cfg.active_tones
    assert set(np.unique(grids[0, active]).tolist()) == {-1.0 + 0j, 1.0 + 0j}
    # chips are consumed cyclically, 952 per symbol
    n_act = cfg.active_tones
    order = np.concatenate([np.arange(1024 - 476, 1024), np.arange(1, 477)])
    for s in range(4):
        want = 1.0 - 2.0 * chips[(np.arange(s * n_act, (s + 1) * n_act)) % 4095]
        np.testing.assert_array_equal(grids[s, order].real, want)


def test_demodulation_recovers_grid(frame16):
    """FFT of each symbol body (global power scale divided out) gives back BPSK."""
    cfg = WaveformConfig(num_symbols=16)
    chips = generate_gold_sequence(length=4095)
    grids = build_prs_symbols(cfg, chips)
    raw = ofdm_modulate(grids, cfg)
    # one real positive scalar relates every demodulated bin to its BPSK value
    ref_bin = np.flatnonzero(grids[0])[0]
    first = frame16.symbol_boundaries[0] + cfg.cp_len(0)
    scale = grids[0, ref_bin] / (
        np.fft.fft(frame16.samples[first : first + cfg.fft_len]) / cfg.fft_len
    )[ref_bin]
    assert scale.imag == pytest.approx(0.0, abs=1e-12)
    assert scale.real > 0
    for s in (0, 7, 15):
        start = frame16.symbol_boundaries[s] + cfg.cp_len(s)
        body = frame16.samples[start : start + cfg.fft_len]
        demod = np.fft.fft(body) / cfg.fft_len * scale
        np.testing.assert_allclose(demod, grids[s], rtol=0, atol=1e-9)
    assert np.array_equal(raw.samples, frame16.samples)


def test_guard_tone_override():
    cfg = WaveformConfig(num_symbols=2, guard_tones=100)
    assert cfg.active_tones == 1024 - 200 - 1
    grids = build_prs_symbols(cfg, generate_gold_sequence(length=4095))
    occupied = set(np.flatnonzero(grids[0]).tolist())
    assert len(occupied) == cfg.active_tones
    # positive side carries the extra tone; bins 413..612 and DC stay clear
    assert occupied.isdisjoint(range(413, 613))
    assert 0 not in occupied


def test_frame_determinism():
    a = make_frame(WaveformConfig(num_symbols=8))
    b = make_frame(WaveformConfig(num_symbols=8))
    assert np.array_equal(a.samples, b.samples)
    assert np.array_equal(a.symbol_boundaries, b.symbol_boundaries)


def test_frame_rejects_nonfinite():
    with pytest.raises(ValueError):
        BasebandFrame(
            samples=np.array([1.0, np.nan], dtype=np.complex128),
            sample_rate_hz=1.0,
            symbol_boundaries=np.array([0]),
        )
