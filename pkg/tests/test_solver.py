"""Nonlinear least squares position fixes and linear velocity recovery."""

import math

import numpy as np
import pytest

from multiscout import (
    SPEED_OF_LIGHT,
    BistaticMeasurementSet,
    GeometryError,
    SolverSettings,
    bistatic_radial_velocity,
    bistatic_range,
    estimate_velocity,
    lm_minimize,
    trilaterate,
)

TX = (250.0, 144.34)
RX = [(0.0, 0.0), (500.0, 0.0), (250.0, 433.0)]
RX4 = RX + [(0.0, 500.0)]
TRUE_POS = (67.18, 423.72)
TRUE_VEL = (-4.48, -23.76)


def exact_measurements(receivers, pos=TRUE_POS, vel=TRUE_VEL, bias_m=0.0):
    ranges = [bistatic_range(pos, TX, r) + bias_m for r in receivers]
    rates = [bistatic_radial_velocity(pos, vel, TX, r) for r in receivers]
    return BistaticMeasurementSet(
        ranges_m=ranges, radial_velocities_mps=rates,
        receiver_positions=receivers, transmitter_pos=TX,
    )


def test_lm_solves_linear_problem_exactly():
    """On linear residuals LM must land on the normal-equations solution."""
    rng = np.random.default_rng(4)
    a = rng.normal(size=(6, 3))
    b = rng.normal(size=6)
    res = lambda x: a @ x - b
    jac = lambda x: a
    x, cost, converged = lm_minimize(res, jac, np.zeros(3), SolverSettings())
    want, *_ = np.linalg.lstsq(a, b, rcond=None)
    np.testing.assert_allclose(x, want, rtol=1e-8)
    assert converged
    assert cost == pytest.approx(0.5 * np.sum((a @ want - b) ** 2), rel=1e-6)


def test_lm_rejects_nonfinite_start():
    with pytest.raises(ValueError):
        lm_minimize(lambda x: np.array([np.inf]), lambda x: np.array([[1.0]]),
                    np.array([1.0]), SolverSettings())


def test_jacobian_matches_finite_differences():
    """Range residual Jacobian against central differences, random scenes."""
    rng = np.random.default_rng(12)
    for _ in range(25):
        pos = rng.uniform(50, 450, 2)
        meas = exact_measurements(RX, pos=pos)
        res = lambda p: np.array([bistatic_range(p, TX, r) for r in RX]) - np.asarray(meas.ranges_m)

        def jac_analytic(p):
            p = np.asarray(p, dtype=float)
            rows = []
            for r in RX:
                ut = (p - np.asarray(TX)) / np.linalg.norm(p - np.asarray(TX))
                ur = (p - np.asarray(r)) / np.linalg.norm(p - np.asarray(r))
                rows.append(ut + ur)
            return np.array(rows)

        probe = pos + rng.uniform(-20, 20, 2)
        h = 1e-4
        fd = np.zeros((3, 2))
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            fd[:, k] = (res(probe + e) - res(probe - e)) / (2 * h)
        np.testing.assert_allclose(jac_analytic(probe), fd, rtol=1e-5, atol=1e-8)


def test_noiseless_trilateration_is_exact():
    fix = trilaterate(exact_measurements(RX))
    assert fix.converged
    assert fix.clock_bias_s is None  # not requested, not estimated
    np.testing.assert_allclose(fix.pos, TRUE_POS, atol=1e-6)
    assert fix.residual_cost < 1e-12


def test_trilateration_beats_grid_search():
    """LM cost must undercut the best point of an independent coarse grid."""
    meas = exact_measurements(RX)
    ranges = np.asarray(meas.ranges_m)

    def cost_at(p):
        r = np.array([bistatic_range(p, TX, r_) for r_ in RX]) - ranges
        return 0.5 * float(r @ r)

    xs = np.linspace(0, 500, 51)
    grid_best = min(cost_at((x, y)) for x in xs for y in xs)
    fix = trilaterate(meas)
    assert fix.residual_cost <= grid_best + 1e-12
    assert cost_at(fix.pos) == pytest.approx(fix.residual_cost, abs=1e-9)


def test_published_2d_fix_reproduced():
    """Measured-range anchor: quantized ranges give the published fix."""
    meas = BistaticMeasurementSet(
        ranges_m=[761.67, 937.68, 507.87],
        radial_velocities_mps=[-41.99, -30.30, -11.71],
        receiver_positions=RX, transmitter_pos=TX,
    )
    fix = trilaterate(meas)
    np.testing.assert_allclose(fix.pos, (72.49, 424.99), atol=0.05)
    assert fix.residual_cost == pytest.approx(6.886, abs=0.02)
    assert math.dist(fix.pos, TRUE_POS) == pytest.approx(5.46, abs=0.05)


def test_published_bias_fix_reproduced():
    meas = BistaticMeasurementSet(
        ranges_m=[761.67, 937.68, 507.87, 429.68],
        radial_velocities_mps=[-41.99, -30.30, -11.71, -2.55],
        receiver_positions=RX4, transmitter_pos=TX,
    )
    fix = trilaterate(meas, estimate_bias=True)
    np.testing.assert_allclose(fix.pos, (69.94, 428.11), atol=0.05)
    assert fix.residual_cost == pytest.approx(3.219, abs=0.02)
    assert math.dist(fix.pos, TRUE_POS) == pytest.approx(5.19, abs=0.05)


def test_published_3d_fix_reproduced():
    tx = (125.0, 125.0, 125.0)
    rx = [(0.0, 0.0, 0.0), (500.0, 0.0, 0.0), (0.0, 500.0, 0.0), (0.0, 0.0, 500.0)]
    meas = BistaticMeasurementSet(
        ranges_m=[977.13, 1112.81, 800.70, 839.96],
        radial_velocities_mps=[-34.89, -22.22, -34.57, -20.18],
        receiver_positions=rx, transmitter_pos=tx,
    )
    fix = trilaterate(meas)
    np.testing.assert_allclose(fix.pos, (73.17, 420.85, 387.71), atol=0.05)
    assert fix.residual_cost == pytest.approx(1.316, abs=0.02)


def test_trilateration_is_deterministic():
    noisy = exact_measurements(RX)
    noisy = BistaticMeasurementSet(
        ranges_m=[r + d for r, d in zip(noisy.ranges_m, (1.2, -0.7, 0.4))],
        radial_velocities_mps=noisy.radial_velocities_mps,
        receiver_positions=RX, transmitter_pos=TX,
    )
    a = trilaterate(noisy, SolverSettings(seed=777))
    b = trilaterate(noisy, SolverSettings(seed=777))
    assert np.array_equal(a.pos, b.pos)
    assert a.residual_cost == b.residual_cost


def test_geometry_rejections():
    with pytest.raises(GeometryError):
        trilaterate(exact_measurements(RX[:2]))  # too few receivers
    line = [(0.0, 0.0), (100.0, 0.0), (200.0, 0.0)]
    with pytest.raises(GeometryError):
        trilaterate(exact_measurements(line))
    with pytest.raises(ValueError):
        BistaticMeasurementSet(
            ranges_m=[1.0, 2.0], radial_velocities_mps=[0.0, 0.0],
            receiver_positions=[(0.0, 0.0)], transmitter_pos=(1.0, 1.0),
        )


def test_coplanar_receivers_rejected_in_3d():
    tx = (125.0, 125.0, 125.0)
    flat = [(0.0, 0.0, 0.0), (500.0, 0.0, 0.0), (0.0, 500.0, 0.0), (500.0, 500.0, 0.0)]
    pos = (100.0, 200.0, 300.0)
    meas = BistaticMeasurementSet(
        ranges_m=[bistatic_range(pos, tx, r) for r in flat],
        radial_velocities_mps=[0.0] * 4,
        receiver_positions=flat, transmitter_pos=tx,
    )
    with pytest.raises(GeometryError):
        trilaterate(meas)


def test_clock_bias_recovered_noiseless():
    for bias_ns in (50.0, 200.0):
        bias_m = bias_ns * 1e-9 * SPEED_OF_LIGHT
        fix = trilaterate(exact_measurements(RX4, bias_m=bias_m), estimate_bias=True)
        assert fix.converged
        np.testing.assert_allclose(fix.pos, TRUE_POS, atol=1e-3)
        assert fix.clock_bias_s * 1e9 == pytest.approx(bias_ns, abs=1e-3)


def test_bias_with_minimum_receivers_is_determined():
    """Three 2D receivers with bias: three unknowns, three ranges, zero cost."""
    bias_m = 120.0e-9 * SPEED_OF_LIGHT
    fix = trilaterate(exact_measurements(RX, bias_m=bias_m), estimate_bias=True)
    assert fix.residual_cost < 1e-9
    assert fix.clock_bias_s * 1e9 == pytest.approx(120.0, abs=1e-2)


def test_lm_solves_rosenbrock():
    res = lambda x: np.array([10.0 * (x[1] - x[0] ** 2), 1.0 - x[0]])
    jac = lambda x: np.array([[-20.0 * x[0], 10.0], [-1.0, 0.0]])
    x, cost, converged = lm_minimize(
        res, jac, np.array([-1.2, 1.0]), SolverSettings(max_iters=500)
    )
    np.testing.assert_allclose(x, [1.0, 1.0], atol=1e-6)
    assert cost < 1e-12
    assert converged


def test_lm_huge_damping_follows_negative_gradient():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(5, 2))
    b = rng.normal(size=5)
    res = lambda x: a @ x - b
    jac = lambda x: a
    x0 = np.array([2.0, -1.0])
    settings = SolverSettings(mu_init=1e9, max_iters=1, grad_tol=1e-18, step_tol=1e-18)
    x, _, _ = lm_minimize(res, jac, x0, settings)
    step = x - x0
    grad = a.T @ (a @ x0 - b)
    cos = -np.dot(step, grad) / (np.linalg.norm(step) * np.linalg.norm(grad))
    assert math.degrees(math.acos(np.clip(cos, -1, 1))) < 1.0


def test_velocity_recovery_exact():
    meas = exact_measurements(RX)
    fix = trilaterate(meas)
    vel = estimate_velocity(fix, meas, ridge_eps=0.0)
    np.testing.assert_allclose(vel.vel, TRUE_VEL, atol=1e-5)
    assert vel.speed_mps == pytest.approx(math.hypot(*TRUE_VEL), abs=1e-5)
    want_heading = math.degrees(math.atan2(TRUE_VEL[1], TRUE_VEL[0]))
    assert vel.heading_deg == pytest.approx(want_heading, abs=1e-3)
    assert -180.0 < vel.heading_deg <= 180.0


def test_velocity_ridge_limits_to_least_squares():
    meas = exact_measurements(RX)
    fix = trilaterate(meas)
    p = np.asarray(fix.pos)

    rows = []
    for r in RX:
        ut = (p - np.asarray(TX)) / np.linalg.norm(p - np.asarray(TX))
        ur = (p - np.asarray(r)) / np.linalg.norm(p - np.asarray(r))
        rows.append(ut + ur)
    a = np.array(rows)
    want, *_ = np.linalg.lstsq(a, np.asarray(meas.radial_velocities_mps), rcond=None)

    for eps in (1e-6, 1e-9, 0.0):
        got = estimate_velocity(fix, meas, ridge_eps=eps).vel
        np.testing.assert_allclose(got, want, atol=1e-4)
    # default eps is small enough not to bias the fixed scene noticeably
    default = estimate_velocity(fix, meas).vel
    np.testing.assert_allclose(default, want, atol=0.05)


def test_velocity_rejects_degenerate_position():
    meas = exact_measurements(RX)
    from multiscout import PositionFix

    at_tx = PositionFix(pos=np.asarray(TX), residual_cost=0.0, clock_bias_s=0.0, converged=True)
    with pytest.raises(ValueError):
        estimate_velocity(at_tx, meas)


def test_settings_validation():
    with pytest.raises(ValueError):
        SolverSettings(restarts=0)
    with pytest.raises(ValueError):
        SolverSettings(ridge_eps=-1.0)
    with pytest.raises(ValueError):
        SolverSettings(step_tol=0.0)
