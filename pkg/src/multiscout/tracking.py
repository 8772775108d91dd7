"""Recursive track filters over position/velocity fix sequences.

Two filters share the measurement vector z = [x, y, vx, vy]: a linear
constant-velocity filter whose state is the same vector, and an extended
filter whose state carries speed and heading [x, y, v, theta] so turns show
up as smooth heading drift instead of model mismatch.  Truth generators for
straight and constant-turn motion feed the comparison experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .scene import TargetState

DEFAULT_PROCESS_COV = np.diag([1e-4, 1e-4, 1e-2, 1e-2])
DEFAULT_MEASUREMENT_COV = np.diag([10.0, 10.0, 1.0, 1.0])
INITIAL_STATE_COV = np.diag([100.0, 100.0, 25.0, 25.0])

# Below this speed the heading column of the measurement Jacobian vanishes
# and theta stops being observable; updates still run but get flagged.
_SPEED_EPS = 1e-6

_EIG_FLOOR = -1e-9


def _wrap_angle(theta: float) -> float:
    """Wrap to (-pi, pi]."""
    wrapped = (theta + math.pi) % math.tau - math.pi
    if wrapped <= -math.pi:
        wrapped += math.tau
    return wrapped


def _psd_guard(cov: np.ndarray, stage: str) -> np.ndarray:
    sym = 0.5 * (cov + cov.T)
    smallest = float(np.linalg.eigvalsh(sym)[0])
    if smallest < _EIG_FLOOR:
        raise ValueError(
            f"covariance lost positive semidefiniteness after {stage} "
            f"(min eigenvalue {smallest:.3e})"
        )
    return sym


def _check_cov(mat: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(mat, dtype=float)
    if arr.shape != (4, 4):
        raise ValueError(f"{name} must be 4x4")
    if not np.allclose(arr, arr.T, atol=1e-12):
        raise ValueError(f"{name} must be symmetric")
    if float(np.linalg.eigvalsh(arr)[0]) < _EIG_FLOOR:
        raise ValueError(f"{name} must be positive semidefinite")
    return arr


def _check_measurement(z) -> np.ndarray:
    arr = np.asarray(z, dtype=float)
    if arr.shape != (4,):
        raise ValueError("measurement must be a length-4 vector [x, y, vx, vy]")
    if not np.all(np.isfinite(arr)):
        raise ValueError("measurement must be finite")
    return arr


@dataclass
class NoiseModel:
    """Process/measurement covariances and the filter sampling period."""

    Q: np.ndarray = field(default_factory=lambda: DEFAULT_PROCESS_COV.copy())
    R: np.ndarray = field(default_factory=lambda: DEFAULT_MEASUREMENT_COV.copy())
    T_s_filter: float = 1.0

    def __post_init__(self):
        self.Q = _check_cov(self.Q, "Q")
        self.R = _check_cov(self.R, "R")
        self.T_s_filter = float(self.T_s_filter)
        if not self.T_s_filter > 0.0:
            raise ValueError("T_s_filter must be positive")


@dataclass
class KfState:
    """Constant-velocity filter state: x = [x, y, vx, vy], covariance P."""

    x: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if self.x.shape != (4,):
            raise ValueError("state vector must have shape (4,)")
        self.P = _psd_guard(np.asarray(self.P, dtype=float), "initialization")


@dataclass
class EkfState:
    """Speed/heading filter state: x = [x, y, v, theta], covariance P.

    degenerate marks an update linearized at near-zero speed, where heading
    is unobservable from the measurement function.
    """

    x: np.ndarray
    P: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if self.x.shape != (4,):
            raise ValueError("state vector must have shape (4,)")
        self.x[3] = _wrap_angle(float(self.x[3]))
        self.P = _psd_guard(np.asarray(self.P, dtype=float), "initialization")


@dataclass
class MotionProfile:
    """Truth-motion recipe: steady nominal speed with small per-step jitter.

    kind "linear" keeps the heading fixed; "circular" advances it by
    turn_rate_rad_s * T every step so the velocity vector rotates at a
    constant angular rate.
    """

    kind: str
    nominal_speed_mps: float
    speed_jitter_frac: float = 0.05
    turn_rate_rad_s: float = math.radians(3.0)
    start_pos: tuple = (0.0, 0.0)
    start_heading_rad: float = 0.0
    num_steps: int = 60

    def __post_init__(self):
        if self.kind not in ("linear", "circular"):
            raise ValueError("kind must be 'linear' or 'circular'")
        if not 0.0 <= self.speed_jitter_frac <= 0.2:
            raise ValueError("speed_jitter_frac must lie in [0, 0.2]")
        if not math.isfinite(self.turn_rate_rad_s):
            raise ValueError("turn_rate_rad_s must be finite")
        if self.num_steps < 1:
            raise ValueError("num_steps must be at least 1")


def _solve_spd(S: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve S X = B for symmetric positive-definite S."""
    try:
        factor = cho_factor(S, lower=True)
    except np.linalg.LinAlgError as exc:
        raise ValueError(
            "innovation covariance is singular; R must be positive definite"
        ) from exc
    return cho_solve(factor, B)


def kf_step(state: KfState, z, noise: NoiseModel) -> KfState:
    """One predict/update cycle of the constant-velocity filter.

    Transition is the block form [[I, T*I], [0, I]]; the measurement matrix
    is the identity.  Covariances are re-symmetrized after every stage and
    checked against a -1e-9 eigenvalue floor.
    """
    z = _check_measurement(z)
    T = noise.T_s_filter
    F = np.eye(4)
    F[0, 2] = T
    F[1, 3] = T

    x_pred = F @ state.x
    P_pred = _psd_guard(F @ state.P @ F.T + noise.Q, "predict")

    S = P_pred + noise.R  # H is the identity
    gain = _solve_spd(S, P_pred.T).T
    x_new = x_pred + gain @ (z - x_pred)
    P_new = _psd_guard((np.eye(4) - gain) @ P_pred, "update")
    return KfState(x=x_new, P=P_new)


def _ekf_predict_jacobian(x: np.ndarray, T: float) -> np.ndarray:
    _, _, v, th = x
    return np.array(
        [
            [1.0, 0.0, T * math.cos(th), -T * v * math.sin(th)],
            [0.0, 1.0, T * math.sin(th), T * v * math.cos(th)],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def _ekf_measurement(x: np.ndarray) -> np.ndarray:
    px, py, v, th = x
    return np.array([px, py, v * math.cos(th), v * math.sin(th)])


def _ekf_measurement_jacobian(x: np.ndarray) -> np.ndarray:
    _, _, v, th = x
    return np.array(
        [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, math.cos(th), -v * math.sin(th)],
            [0.0, 0.0, math.sin(th), v * math.cos(th)],
        ]
    )


def ekf_step(state: EkfState, z, noise: NoiseModel) -> EkfState:
    """One predict/update cycle of the speed/heading filter.

    Prediction moves the position along the current heading,
    f(x) = [x + T v cos(theta), y + T v sin(theta), v, theta], and the
    measurement function maps the state back to [x, y, vx, vy].  Heading is
    wrapped to (-pi, pi] after the update.
    """
    z = _check_measurement(z)
    T = noise.T_s_filter
    x = state.x

    F = _ekf_predict_jacobian(x, T)
    x_pred = np.array(
        [
            x[0] + T * x[2] * math.cos(x[3]),
            x[1] + T * x[2] * math.sin(x[3]),
            x[2],
            x[3],
        ]
    )
    P_pred = _psd_guard(F @ state.P @ F.T + noise.Q, "predict")

    degenerate = abs(float(x_pred[2])) < _SPEED_EPS
    H = _ekf_measurement_jacobian(x_pred)
    S = H @ P_pred @ H.T + noise.R
    gain = _solve_spd(S, (P_pred @ H.T).T).T
    x_new = x_pred + gain @ (z - _ekf_measurement(x_pred))
    x_new[3] = _wrap_angle(float(x_new[3]))
    P_new = _psd_guard((np.eye(4) - gain @ H) @ P_pred, "update")
    return EkfState(x=x_new, P=P_new, degenerate=degenerate)


def generate_motion(profile: MotionProfile, seed, period_s: float = 1.0):
    """Truth trajectory for a motion profile; one TargetState per step.

    Each step draws speed = nominal * (1 + u), u uniform in +/- jitter.
    Positions integrate the per-step velocity over period_s, matching the
    prediction model of the filters at the same period.
    """
    if not period_s > 0.0:
        raise ValueError("period_s must be positive")
    rng = np.random.default_rng(seed)
    pos = np.asarray(profile.start_pos, dtype=float).copy()
    heading = float(profile.start_heading_rad)
    states = []
    for step in range(profile.num_steps):
        if step > 0 and profile.kind == "circular":
            heading += profile.turn_rate_rad_s * period_s
        jitter = rng.uniform(-profile.speed_jitter_frac, profile.speed_jitter_frac)
        speed = profile.nominal_speed_mps * (1.0 + jitter)
        vel = speed * np.array([math.cos(heading), math.sin(heading)])
        states.append(TargetState(pos=pos.copy(), vel=vel))
        pos = pos + period_s * vel
    return states


@dataclass
class TrackReport:
    """Filtered track plus accumulated position errors against truth.

    estimates holds the filter output mapped to measurement space
    [x, y, vx, vy] per step; totals sum position errors over the steps after
    the first (the first measurement only seeds the state).  Error fields
    are NaN when no truth was supplied.
    """

    filter_kind: str
    states: list
    estimates: np.ndarray
    measurements: np.ndarray
    filter_pos_errors: Optional[np.ndarray]
    measurement_pos_errors: Optional[np.ndarray]
    total_filter_error_m: float
    total_measurement_error_m: float


def _truth_positions(truth, expected_len: int) -> np.ndarray:
    if hasattr(truth[0], "pos"):
        arr = np.asarray([np.asarray(s.pos, dtype=float) for s in truth])
    else:
        arr = np.asarray(truth, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != expected_len or arr.shape[1] < 2:
        raise ValueError("truth must supply one 2D position per measurement")
    return arr[:, :2]


def track_sequence(
    measurements,
    filter_kind: str,
    noise: Optional[NoiseModel] = None,
    init=None,
    truth=None,
) -> TrackReport:
    """Run one filter over a fix sequence and report position errors.

    measurements: (N, 4) array of [x, y, vx, vy] rows, N >= 2.  The first
    row seeds the state (speed/heading derived for the extended filter) with
    an inflated initial covariance; remaining rows are filtered in order.
    truth, when given, is a matching sequence of positions (or TargetState
    objects) used for the error totals.
    """
    z = np.asarray(measurements, dtype=float)
    if z.ndim != 2 or z.shape[1] != 4:
        raise ValueError("measurements must be an (N, 4) array of [x, y, vx, vy]")
    if z.shape[0] < 2:
        raise ValueError("need at least two measurements to track")
    if not np.all(np.isfinite(z)):
        raise ValueError("measurements must be finite")
    if filter_kind not in ("kf", "ekf"):
        raise ValueError("filter_kind must be 'kf' or 'ekf'")
    if noise is None:
        noise = NoiseModel()

    if init is None:
        if filter_kind == "kf":
            state = KfState(x=z[0].copy(), P=INITIAL_STATE_COV.copy())
        else:
            vx, vy = z[0, 2], z[0, 3]
            state = EkfState(
                x=np.array([z[0, 0], z[0, 1], math.hypot(vx, vy), math.atan2(vy, vx)]),
                P=INITIAL_STATE_COV.copy(),
            )
    else:
        state = init

    step_fn = kf_step if filter_kind == "kf" else ekf_step
    to_meas = (lambda s: s.x.copy()) if filter_kind == "kf" else (lambda s: _ekf_measurement(s.x))

    states = [state]
    estimates = np.empty_like(z)
    estimates[0] = to_meas(state)
    for k in range(1, z.shape[0]):
        state = step_fn(state, z[k], noise)
        states.append(state)
        estimates[k] = to_meas(state)

    filter_err = None
    meas_err = None
    total_filter = math.nan
    total_meas = math.nan
    if truth is not None:
        truth_pos = _truth_positions(truth, z.shape[0])
        filter_err = np.linalg.norm(estimates[:, :2] - truth_pos, axis=1)
        meas_err = np.linalg.norm(z[:, :2] - truth_pos, axis=1)
        total_filter = float(np.sum(filter_err[1:]))
        total_meas = float(np.sum(meas_err[1:]))

    return TrackReport(
        filter_kind=filter_kind,
        states=states,
        estimates=estimates,
        measurements=z.copy(),
        filter_pos_errors=filter_err,
        measurement_pos_errors=meas_err,
        total_filter_error_m=total_filter,
        total_measurement_error_m=total_meas,
    )
