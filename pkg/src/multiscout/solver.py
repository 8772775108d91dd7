"""Position/velocity fusion from per-receiver bistatic measurements.

Position comes from damped Gauss-Newton (Levenberg-Marquardt) iterations on
the bistatic-range residuals, multi-started from random points in the
inflated scene box; an optional common range bias (clock offset times c) is
estimated jointly. Velocity follows from a ridge-regularized linear inversion
of the radial-velocity rows at the fixed position estimate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import SPEED_OF_LIGHT


class GeometryError(ValueError):
    """Receiver geometry cannot support the requested fix."""


@dataclass
class BistaticMeasurementSet:
    ranges_m: np.ndarray
    radial_velocities_mps: np.ndarray | None
    receiver_positions: list
    transmitter_pos: np.ndarray

    def __post_init__(self):
        self.ranges_m = np.asarray(self.ranges_m, dtype=np.float64)
        self.receiver_positions = [np.asarray(r, dtype=np.float64) for r in self.receiver_positions]
        self.transmitter_pos = np.asarray(self.transmitter_pos, dtype=np.float64)
        if self.radial_velocities_mps is not None:
            self.radial_velocities_mps = np.asarray(self.radial_velocities_mps, dtype=np.float64)
            if len(self.radial_velocities_mps) != len(self.ranges_m):
                raise ValueError("radial velocity count must match range count")
        if len(self.receiver_positions) != len(self.ranges_m):
            raise ValueError("receiver count must match range count")
        d = self.transmitter_pos.shape[0]
        for r in self.receiver_positions:
            if r.shape != (d,):
                raise ValueError("positions must share dimensionality")

    @property
    def dims(self) -> int:
        return int(self.transmitter_pos.shape[0])


@dataclass
class SolverSettings:
    restarts: int = 20
    max_iters: int = 100
    step_tol: float = 1e-9
    grad_tol: float = 1e-9
    mu_init: float = 1e-3
    mu_up: float = 10.0
    mu_down: float = 0.1
    ridge_eps: float = 1e-3
    init_box_margin_m: float = 200.0
    seed: int = 12345

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if min(self.step_tol, self.grad_tol) <= 0:
            raise ValueError("tolerances must be positive")
        if self.ridge_eps < 0:
            raise ValueError("ridge_eps must be nonnegative")


@dataclass
class PositionFix:
    pos: np.ndarray
    residual_cost: float  # 0.5 * sum of squared range residuals at pos
    clock_bias_s: float | None
    converged: bool


@dataclass
class VelocityFix:
    vel: np.ndarray
    speed_mps: float
    heading_deg: float


def lm_minimize(residual_fn, jacobian_fn, x0, settings: SolverSettings):
    """Damped Gauss-Newton on 0.5*||r(x)||^2.

    Each iteration solves (J'J + mu I) step = -J'r; a step is kept only if it
    lowers the cost (mu shrinks), otherwise mu grows and the iteration spends
    itself on the retry. Returns (x, cost, converged).
    """
    x = np.asarray(x0, dtype=np.float64).copy()
    r = np.asarray(residual_fn(x), dtype=np.float64)
    if not np.all(np.isfinite(r)):
        raise ValueError("non-finite residual at the initial point")
    cost = 0.5 * float(r @ r)
    mu = settings.mu_init
    eye = np.eye(len(x))
    converged = False
    for _ in range(settings.max_iters):
        jac = np.asarray(jacobian_fn(x), dtype=np.float64)
        grad = jac.T @ r
        if np.linalg.norm(grad, ord=np.inf) < settings.grad_tol:
            converged = True
            break
        try:
            step = np.linalg.solve(jac.T @ jac + mu * eye, -grad)
        except np.linalg.LinAlgError:
            mu *= settings.mu_up
            continue
        x_new = x + step
        r_new = np.asarray(residual_fn(x_new), dtype=np.float64)
        cost_new = 0.5 * float(r_new @ r_new) if np.all(np.isfinite(r_new)) else np.inf
        if cost_new < cost:
            x, r, cost = x_new, r_new, cost_new
            mu *= settings.mu_down
            if np.linalg.norm(step) < settings.step_tol:
                converged = True
                break
        else:
            mu *= settings.mu_up
    return x, cost, converged


def _check_geometry(receivers, dims: int) -> None:
    stack = np.asarray(receivers, dtype=np.float64)
    rel = stack - stack.mean(axis=0)
    s = np.linalg.svd(rel, compute_uv=False)
    if len(s) < dims or s[dims - 1] <= 1e-9 * max(1.0, s[0]):
        kind = "collinear" if dims == 2 else "coplanar"
        raise GeometryError(f"receivers are {kind}; {dims}D fix is unobservable")


def _range_residual_builder(meas: BistaticMeasurementSet, estimate_bias: bool):
    recv = np.asarray(meas.receiver_positions, dtype=np.float64)
    t = meas.transmitter_pos
    b_meas = meas.ranges_m
    dims = meas.dims

    def residual(x):
        p = x[:dims]
        bias = x[dims] if estimate_bias else 0.0
        d_t = np.linalg.norm(p - t)
        d_r = np.linalg.norm(p - recv, axis=1)
        return d_t + d_r + bias - b_meas

    def jacobian(x):
        p = x[:dims]
        d_t = np.linalg.norm(p - t)
        diff_r = p - recv
        d_r = np.linalg.norm(diff_r, axis=1)
        d_t = max(d_t, 1e-12)
        d_r = np.maximum(d_r, 1e-12)
        rows = (p - t) / d_t + diff_r / d_r[:, None]
        if estimate_bias:
            rows = np.hstack([rows, np.ones((len(d_r), 1))])
        return rows

    return residual, jacobian


def trilaterate(meas: BistaticMeasurementSet, settings: SolverSettings | None = None, estimate_bias: bool = False) -> PositionFix:
    """Least-squares position (and optional common range bias) from ranges."""
    settings = settings or SolverSettings()
    dims = meas.dims
    if dims not in (2, 3):
        raise GeometryError("positions must be 2D or 3D")
    if len(meas.ranges_m) < dims + 1:
        raise GeometryError(f"need at least {dims + 1} receivers, got {len(meas.ranges_m)}")
    _check_geometry(meas.receiver_positions, dims)

    residual, jacobian = _range_residual_builder(meas, estimate_bias)
    anchors = np.vstack([meas.transmitter_pos] + list(meas.receiver_positions))
    lo = anchors.min(axis=0) - settings.init_box_margin_m
    hi = anchors.max(axis=0) + settings.init_box_margin_m
    rng = np.random.default_rng(settings.seed)

    best = None
    for _ in range(settings.restarts):
        p0 = rng.uniform(lo, hi)
        x0 = np.concatenate([p0, [0.0]]) if estimate_bias else p0
        x, cost, converged = lm_minimize(residual, jacobian, x0, settings)
        if best is None or cost < best[1]:
            best = (x, cost, converged)
    x, cost, converged = best
    return PositionFix(
        pos=x[:dims].copy(),
        residual_cost=float(cost),
        clock_bias_s=float(x[dims]) / SPEED_OF_LIGHT if estimate_bias else None,
        converged=bool(converged),
    )


def estimate_velocity(fix: PositionFix, meas: BistaticMeasurementSet, ridge_eps: float | None = None) -> VelocityFix:
    """Ridge inversion of radial velocities at the fixed position estimate."""
    if meas.radial_velocities_mps is None:
        raise ValueError("measurement set has no radial velocities")
    eps = SolverSettings().ridge_eps if ridge_eps is None else ridge_eps
    p = np.asarray(fix.pos, dtype=np.float64)
    t = meas.transmitter_pos
    dims = meas.dims
    rows = []
    d_t = np.linalg.norm(p - t)
    if d_t == 0.0:
        raise ValueError("position estimate coincides with the transmitter")
    for r in meas.receiver_positions:
        d_r = np.linalg.norm(p - r)
        if d_r == 0.0:
            raise ValueError("position estimate coincides with a receiver")
        rows.append((p - t) / d_t + (p - r) / d_r)
    a = np.asarray(rows)
    lhs = a.T @ a + eps * np.eye(dims)
    try:
        vel = np.linalg.solve(lhs, a.T @ meas.radial_velocities_mps)
    except np.linalg.LinAlgError as exc:
        raise ValueError("singular normal equations; use ridge_eps > 0") from exc
    heading = float(np.degrees(np.arctan2(vel[1], vel[0])))
    if heading <= -180.0:
        heading += 360.0
    return VelocityFix(vel=vel, speed_mps=float(np.linalg.norm(vel)), heading_deg=heading)
