"""
Estimating a shared clock offset
================================

Receivers that are not time-synchronized to the transmitter all measure
the same extra delay. Left uncorrected it drags the position fix off; a
fourth receiver makes the offset jointly observable.
"""

import numpy as np

from multiscout import SPEED_OF_LIGHT, BistaticMeasurementSet, bistatic_range, default_scene, trilaterate

scene = default_scene("bias")
target = scene.targets[0]
bias_ns = 120.0
bias_m = bias_ns * 1e-9 * SPEED_OF_LIGHT
print(f"injected offset {bias_ns:.0f} ns  (= {bias_m:.2f} m on every range)")

# every measured range carries the same additive offset
meas = BistaticMeasurementSet(
    ranges_m=[
        bistatic_range(target.pos, scene.transmitter_pos, rx) + bias_m
        for rx in scene.receivers
    ],
    radial_velocities_mps=[0.0] * len(scene.receivers),
    receiver_positions=scene.receivers,
    transmitter_pos=scene.transmitter_pos,
)

# 1. Ignore the offset: the ellipses no longer meet at the target and the
#    fix lands wherever the residuals balance.
naive = trilaterate(meas)
print(f"\nignoring it:   pos {np.round(naive.pos, 2)}, "
      f"error {np.linalg.norm(naive.pos - target.pos):.2f} m, cost {naive.residual_cost:.1f}")

# 2. Estimate it jointly: one more unknown, still overdetermined with four
#    receivers, and both the position and the offset come back exact.
joint = trilaterate(meas, estimate_bias=True)
print(f"estimating it: pos {np.round(joint.pos, 2)}, "
      f"error {np.linalg.norm(joint.pos - target.pos):.2e} m, cost {joint.residual_cost:.2e}")
print(f"recovered offset {joint.clock_bias_s * 1e9:.3f} ns")
