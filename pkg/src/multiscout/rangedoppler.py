"""Cross-ambiguity processing: range-Doppler maps and peak extraction.

The CAF is CAF(d, f) = sum_n y[n+d] x*[n] exp(-j 2 pi f n T_s). Rows are
evaluated exactly on the zoom Doppler grid with a chirp-z transform (one
reusable plan, rows chunked to bound memory); any change here must keep the
direct-sum equivalence checked by the test suite. Peaks refine to sub-bin
precision with a three-point parabola in each axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import CZT

from .constants import SPEED_OF_LIGHT
from .scene import ReceiverCapture
from .waveform import BasebandFrame


class DetectionError(RuntimeError):
    """Fewer usable peaks than requested."""


@dataclass
class DopplerGrid:
    span_hz: float = 400.0
    points: int = 401

    def __post_init__(self):
        if self.points < 3 or self.points % 2 == 0:
            raise ValueError("points must be odd and >= 3 (grid must contain 0 Hz)")
        if self.span_hz <= 0:
            raise ValueError("span_hz must be positive")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(-self.span_hz, self.span_hz, self.points)

    @property
    def step_hz(self) -> float:
        return 2.0 * self.span_hz / (self.points - 1)


@dataclass
class RangeDopplerMap:
    caf: np.ndarray  # complex, (delay_bins, doppler_points)
    delay_bin_m: float
    doppler_grid: DopplerGrid
    receiver_index: int
    carrier_freq_hz: float = 2.5e9

    def __post_init__(self):
        self.caf = np.asarray(self.caf, dtype=np.complex128)
        if not np.all(np.isfinite(self.caf.view(np.float64))):
            raise ValueError("CAF contains non-finite entries")


@dataclass
class DetectionPeak:
    delay_bin_refined: float
    doppler_hz_refined: float
    bistatic_range_m: float
    radial_velocity_mps: float
    magnitude: float


def compute_caf(capture: ReceiverCapture, frame: BasebandFrame, delay_bins: int, grid: DopplerGrid) -> RangeDopplerMap:
    """Evaluate the CAF over delay_bins lags and the zoom Doppler grid."""
    if delay_bins <= 0:
        raise ValueError("delay_bins must be positive")
    x = frame.samples
    y = capture.samples
    n = len(x)
    if len(y) != n:
        raise ValueError("capture and frame lengths differ")
    if delay_bins > n:
        raise ValueError("delay_bins exceeds capture length")
    if capture.sample_rate_hz != frame.sample_rate_hz:
        raise ValueError("capture and frame sample rates differ")

    ts = 1.0 / frame.sample_rate_hz
    f0 = -grid.span_hz
    df = grid.step_hz
    # CZT point k evaluates sum_n z[n] exp(-j 2 pi (f0 + k df) n Ts)
    plan = CZT(n=n, m=grid.points, w=np.exp(-2j * np.pi * df * ts), a=np.exp(2j * np.pi * f0 * ts))

    xc = np.conj(x)
    caf = np.empty((delay_bins, grid.points), dtype=np.complex128)
    chunk = max(1, int(4_000_000 // max(n, 1)))
    for start in range(0, delay_bins, chunk):
        stop = min(start + chunk, delay_bins)
        rows = np.zeros((stop - start, n), dtype=np.complex128)
        for i, d in enumerate(range(start, stop)):
            rows[i, : n - d] = y[d:] * xc[: n - d]
        caf[start:stop] = plan(rows, axis=-1)

    return RangeDopplerMap(
        caf=caf,
        delay_bin_m=SPEED_OF_LIGHT / frame.sample_rate_hz,
        doppler_grid=grid,
        receiver_index=capture.receiver_index,
        carrier_freq_hz=frame.carrier_freq_hz,
    )


def coarse_peak(rd_map: RangeDopplerMap) -> tuple:
    """Global magnitude maximum as (delay_bin, doppler_hz).

    Ties go to the smallest delay, then the smallest |Doppler| (earlier grid
    point if both signs tie).
    """
    mag = np.abs(rd_map.caf)
    if mag.size == 0:
        raise ValueError("empty map")
    peak = np.max(mag)
    dd, ff = np.nonzero(mag == peak)
    freqs = rd_map.doppler_grid.values
    order = np.lexsort((ff, np.abs(freqs[ff]), dd))
    d0 = int(dd[order[0]])
    f0 = float(freqs[ff[order[0]]])
    return d0, f0


def parabolic_refine(m_minus: float, m0: float, m_plus: float) -> float:
    """Sub-bin vertex offset of the parabola through three magnitudes."""
    denom = 2.0 * (m_minus - 2.0 * m0 + m_plus)
    if denom == 0.0:
        return 0.0
    x_star = (m_minus - m_plus) / denom
    return float(np.clip(x_star, -0.5, 0.5))


def detect_multi_delays(rd_map: RangeDopplerMap, k: int, rho: float = 1.5) -> list:
    """Delay bins of the k brightest locally dominant ridges.

    Row brightness gamma[d] sums |CAF| across Doppler. A bin is accepted only
    when it beats both neighbors by the factor rho; each acceptance suppresses
    its two neighbor bins so one ridge cannot detect twice. Edge bins have a
    missing neighbor and are never accepted. Returns bins brightest-first.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if rho <= 1.0:
        raise ValueError("rho must exceed 1")
    gamma = np.sum(np.abs(rd_map.caf), axis=1)
    n = len(gamma)
    order = np.argsort(-gamma, kind="stable")
    suppressed = np.zeros(n, dtype=bool)
    accepted: list[int] = []
    for d in order:
        d = int(d)
        if suppressed[d]:
            continue
        if d == 0 or d == n - 1:
            continue
        if gamma[d] > rho * gamma[d - 1] and gamma[d] > rho * gamma[d + 1]:
            accepted.append(d)
            suppressed[d - 1] = suppressed[d + 1] = suppressed[d] = True
            if len(accepted) == k:
                return accepted
    raise DetectionError(f"found {len(accepted)} dominant delay bins, needed {k}")


def doppler_at_delay(rd_map: RangeDopplerMap, delay_bin: int) -> DetectionPeak:
    """Refined delay/Doppler peak for the ridge at one delay bin."""
    caf = rd_map.caf
    n_d, n_f = caf.shape
    if not (0 <= delay_bin < n_d):
        raise ValueError("delay_bin outside map")
    row = np.abs(caf[delay_bin])
    j0 = int(np.argmax(row))
    if 0 < j0 < n_f - 1:
        off_f = parabolic_refine(row[j0 - 1], row[j0], row[j0 + 1])
    else:
        off_f = 0.0
    grid = rd_map.doppler_grid
    f_refined = -grid.span_hz + (j0 + off_f) * grid.step_hz

    col = np.abs(caf[:, j0])
    if 0 < delay_bin < n_d - 1:
        off_d = parabolic_refine(col[delay_bin - 1], col[delay_bin], col[delay_bin + 1])
    else:
        off_d = 0.0
    d_refined = delay_bin + off_d

    return DetectionPeak(
        delay_bin_refined=float(d_refined),
        doppler_hz_refined=float(f_refined),
        bistatic_range_m=float(d_refined * rd_map.delay_bin_m),
        radial_velocity_mps=float(f_refined * SPEED_OF_LIGHT / rd_map.carrier_freq_hz),
        magnitude=float(row[j0]),
    )
