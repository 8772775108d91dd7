"""
Building the reference waveform
===============================

A tour of the pilot frame the whole workbench correlates against: the
scrambling code, the subcarrier grid, the cyclic prefixes, and the final
baseband sample stream.
"""

import numpy as np

from multiscout import WaveformConfig, build_prs_symbols, generate_gold_sequence, make_frame

# 1. The scrambling code. Two 12-stage shift registers, XORed. A maximal
#    family member is nearly balanced: one extra one over the 4095 bits.
chips = generate_gold_sequence(length=4095)
ones = int(chips.sum())
print(f"code length {chips.size}, ones {ones}, zeros {chips.size - ones}")
print(f"BPSK sum {np.sum(1.0 - 2.0 * chips):+.0f}  (a balanced code sums to +-1)")

# 2. The numerology. 1024-point FFT at 15 kHz spacing gives a 15.36 MHz
#    sample rate; 952 of the 1024 tones carry chips, DC stays dark.
cfg = WaveformConfig()
print(f"\nsample rate {cfg.sample_rate_hz / 1e6:.2f} MHz")
print(f"active tones {cfg.active_tones} of {cfg.fft_len}")
print(f"frame length {cfg.frame_len} samples ({cfg.num_symbols} symbols)")

# 3. One mapped symbol. Chips fill the tones from the lowest frequency
#    upward; in FFT indexing that is two occupied blocks (negative bins
#    high, positive bins low) around a dark DC bin.
grids = build_prs_symbols(WaveformConfig(num_symbols=1), chips)
occupied = np.flatnonzero(grids[0])
lo = occupied[occupied <= 512]
hi = occupied[occupied > 512]
print(f"\nsymbol 0 occupies bins {lo.min()}..{lo.max()} and {hi.min()}..{hi.max()}, DC dark")
print(f"values drawn from {sorted(set(np.unique(grids[0, occupied]).real.tolist()))}")

# 4. The time-domain frame. Slot-leading symbols get the 80-sample prefix,
#    the rest 72; each prefix is a verbatim copy of its symbol tail.
frame = make_frame(cfg)
power = np.mean(np.abs(frame.samples) ** 2)
print(f"\nframe {frame.samples.size} samples, mean power {power:.6f} (normalized to 1)")

start = frame.symbol_boundaries[0]
cp = cfg.cp_len(0)
body = start + cp
tail = frame.samples[body + cfg.fft_len - cp : body + cfg.fft_len]
print(f"long prefix equals symbol tail: {np.array_equal(frame.samples[start:start + cp], tail)}")
