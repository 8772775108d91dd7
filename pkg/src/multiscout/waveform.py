"""PRS-style OFDM baseband frame synthesis.

A Gold sequence feeds BPSK symbols onto the active subcarriers of each OFDM
symbol; symbols get cyclic prefixes and are concatenated into slots of 14.
The result is the unit-power transmit frame every receiver correlates
against.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SYMBOLS_PER_SLOT = 14

# Feedback tap sets for the two 12-stage generators, both maximal
# (period 4095 checked from any nonzero state). taps = exponents of the
# feedback polynomial except the constant term: new bit
# x[n+12] = x[n+6] ^ x[n+4] ^ x[n+1] ^ x[n] for [12, 6, 4, 1].
GOLD_TAPS_A = (12, 6, 4, 1)
GOLD_TAPS_B = (12, 7, 4, 3)

# Default register states, chosen so the XOR of the two m-sequences comes
# out balanced (2048 ones / 2047 zeros over one 4095-bit period).
GOLD_SEED_A = (1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0)
GOLD_SEED_B = (0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1)


@dataclass
class WaveformConfig:
    """OFDM numerology and PRS mapping knobs.

    ``guard_tones`` counts nulled tones per band edge. When left as None the
    active-tone count is derived as ``fft_len - cp_rest_len`` (952 by
    default) and split exactly evenly around the nulled DC bin; an explicit
    integer ``g`` activates ``fft_len - 2g - 1`` tones instead (odd count,
    the positive side carries the extra tone).
    """

    carrier_freq_hz: float = 2.5e9
    subcarrier_spacing_hz: float = 15e3
    fft_len: int = 1024
    cp_first_len: int = 80
    cp_rest_len: int = 72
    symbols_per_slot: int = SYMBOLS_PER_SLOT
    num_symbols: int = 128
    guard_tones: int | None = None
    dc_null: bool = True
    gold_taps_a: tuple = GOLD_TAPS_A
    gold_taps_b: tuple = GOLD_TAPS_B
    gold_seed_a: tuple = GOLD_SEED_A
    gold_seed_b: tuple = GOLD_SEED_B

    def __post_init__(self):
        if self.fft_len <= 0 or self.num_symbols <= 0:
            raise ValueError("fft_len and num_symbols must be positive")
        if not (self.cp_first_len >= self.cp_rest_len >= 0):
            raise ValueError("need cp_first_len >= cp_rest_len >= 0")
        if self.symbols_per_slot <= 0:
            raise ValueError("symbols_per_slot must be positive")
        if self.guard_tones is not None:
            active = self.fft_len - 2 * self.guard_tones - 1
            if active <= 0:
                raise ValueError("guard_tones leave no active tones")

    @property
    def sample_rate_hz(self) -> float:
        return self.fft_len * self.subcarrier_spacing_hz

    @property
    def active_tones(self) -> int:
        """Nonzero subcarriers per symbol (DC excluded)."""
        if self.guard_tones is None:
            return self.fft_len - self.cp_rest_len
        return self.fft_len - 2 * self.guard_tones - 1

    def cp_len(self, symbol_index: int) -> int:
        """CP length for one symbol; slot-leading symbols get the long CP."""
        return self.cp_first_len if symbol_index % self.symbols_per_slot == 0 else self.cp_rest_len

    @property
    def frame_len(self) -> int:
        return sum(self.fft_len + self.cp_len(i) for i in range(self.num_symbols))


@dataclass
class BasebandFrame:
    samples: np.ndarray
    sample_rate_hz: float
    symbol_boundaries: np.ndarray  # start offset of each CP+symbol block
    carrier_freq_hz: float = 2.5e9  # needed downstream to map Doppler <-> velocity

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.complex128)
        self.symbol_boundaries = np.asarray(self.symbol_boundaries, dtype=np.int64)
        if not np.all(np.isfinite(self.samples.view(np.float64))):
            raise ValueError("frame contains non-finite samples")


def _lfsr_sequence(taps, seed_bits, length: int) -> np.ndarray:
    """Fibonacci LFSR bit stream.

    taps[0] is the register length L; the recurrence is
    x[n+L] = XOR of x[n+t] for the remaining taps, XOR x[n].
    """
    L = taps[0]
    if len(seed_bits) != L:
        raise ValueError(f"seed must have {L} bits")
    if not any(seed_bits):
        raise ValueError("all-zero LFSR seed is degenerate")
    x = np.zeros(max(length, L), dtype=np.uint8)
    x[:L] = seed_bits
    low = [t for t in taps[1:] if t < L]
    for n in range(len(x) - L):
        b = x[n]
        for t in low:
            b ^= x[n + t]
        x[n + L] = b
    return x[:length]


def generate_gold_sequence(
    register_len: int = 12,
    length: int = 4095,
    seed_a=GOLD_SEED_A,
    seed_b=GOLD_SEED_B,
    taps_a=None,
    taps_b=None,
) -> np.ndarray:
    """XOR of two maximal-length sequences, trimmed to `length` bits."""
    if taps_a is None:
        taps_a = GOLD_TAPS_A if register_len == 12 else None
    if taps_b is None:
        taps_b = GOLD_TAPS_B if register_len == 12 else None
    if taps_a is None or taps_b is None:
        raise ValueError("tap sets required for register lengths other than 12")
    if taps_a[0] != register_len or taps_b[0] != register_len:
        raise ValueError("tap sets do not match register_len")
    period = 2**register_len - 1
    if not (1 <= length <= period):
        raise ValueError(f"length must be in [1, {period}]")
    a = _lfsr_sequence(taps_a, seed_a, length)
    b = _lfsr_sequence(taps_b, seed_b, length)
    return a ^ b


def build_prs_symbols(cfg: WaveformConfig, chips: np.ndarray) -> np.ndarray:
    """Map BPSK chips onto per-symbol frequency grids.

    Returns an array of shape (num_symbols, fft_len) in FFT bin order.
    Chips are consumed cyclically across symbols, `active_tones` per symbol,
    mapped 0 -> +1, 1 -> -1 onto the tones closest to DC (DC itself nulled).
    """
    chips = np.asarray(chips, dtype=np.uint8).ravel()
    n_active = cfg.active_tones
    if len(chips) < n_active:
        raise ValueError(f"need at least {n_active} chips per symbol, got {len(chips)}")

    n_pos = (n_active + 1) // 2  # positive side gets the extra tone for odd counts
    n_neg = n_active - n_pos
    pos_bins = np.arange(1, n_pos + 1)
    neg_bins = np.arange(cfg.fft_len - n_neg, cfg.fft_len)
    # chips fill the band in ascending frequency order, DC skipped
    order = np.concatenate([neg_bins, pos_bins])

    grids = np.zeros((cfg.num_symbols, cfg.fft_len), dtype=np.complex128)
    idx = 0
    for s in range(cfg.num_symbols):
        take = np.take(chips, np.arange(idx, idx + n_active) % len(chips))
        grids[s, order] = 1.0 - 2.0 * take.astype(np.float64)
        idx = (idx + n_active) % len(chips)
    return grids


def ofdm_modulate(grids: np.ndarray, cfg: WaveformConfig) -> BasebandFrame:
    """IFFT each grid, prepend its cyclic prefix, concatenate in slot order."""
    grids = np.asarray(grids, dtype=np.complex128)
    if grids.ndim != 2 or grids.shape[1] != cfg.fft_len:
        raise ValueError(f"grids must be (num_symbols, {cfg.fft_len})")
    n_sym = grids.shape[0]
    bodies = np.fft.ifft(grids, axis=1) * cfg.fft_len  # unnormalized IDFT sum
    pieces = []
    boundaries = np.zeros(n_sym, dtype=np.int64)
    pos = 0
    for s in range(n_sym):
        cp = cfg.cp_len(s)
        boundaries[s] = pos
        body = bodies[s]
        pieces.append(body[cfg.fft_len - cp :])
        pieces.append(body)
        pos += cp + cfg.fft_len
    samples = np.concatenate(pieces) if pieces else np.zeros(0, dtype=np.complex128)
    # unit average power so the link budget's alpha is the only gain knob
    power = np.mean(np.abs(samples) ** 2)
    if power > 0:
        samples = samples / np.sqrt(power)
    return BasebandFrame(
        samples=samples,
        sample_rate_hz=cfg.sample_rate_hz,
        symbol_boundaries=boundaries,
        carrier_freq_hz=cfg.carrier_freq_hz,
    )


def make_frame(cfg: WaveformConfig | None = None) -> BasebandFrame:
    """Gold chips -> PRS grids -> modulated frame, all from one config."""
    cfg = cfg or WaveformConfig()
    chips = generate_gold_sequence(
        register_len=12,
        length=4095,
        seed_a=cfg.gold_seed_a,
        seed_b=cfg.gold_seed_b,
        taps_a=tuple(cfg.gold_taps_a),
        taps_b=tuple(cfg.gold_taps_b),
    )
    grids = build_prs_symbols(cfg, chips)
    return ofdm_modulate(grids, cfg)
