"""
Positioning in three dimensions
===============================

Four receivers on a tetrahedron localize a target in 3D. The same solver
runs unchanged; what matters is that the receivers span the space. Flatten
them into a plane and the normal equations go singular, so the solver
refuses the geometry up front.
"""

import numpy as np

from multiscout import (
    BistaticMeasurementSet,
    GeometryError,
    bistatic_range,
    default_scene,
    trilaterate,
)

scene = default_scene("threed")
target = scene.targets[0]
print("receivers:")
for rx in scene.receivers:
    print(f"  {rx}")
print(f"transmitter {scene.transmitter_pos}, target {target.pos}")

meas = BistaticMeasurementSet(
    ranges_m=[bistatic_range(target.pos, scene.transmitter_pos, rx) for rx in scene.receivers],
    radial_velocities_mps=[0.0] * len(scene.receivers),
    receiver_positions=scene.receivers,
    transmitter_pos=scene.transmitter_pos,
)
fix = trilaterate(meas)
print(f"\nfix {np.round(fix.pos, 2)}, error {np.linalg.norm(fix.pos - target.pos):.2e} m")

# collapse the fourth receiver into the plane of the first three
flat = [np.array([0.0, 0.0, 0.0]), np.array([500.0, 0.0, 0.0]),
        np.array([0.0, 500.0, 0.0]), np.array([500.0, 500.0, 0.0])]
bad = BistaticMeasurementSet(
    ranges_m=[bistatic_range(target.pos, scene.transmitter_pos, rx) for rx in flat],
    radial_velocities_mps=[0.0] * 4,
    receiver_positions=flat,
    transmitter_pos=scene.transmitter_pos,
)
try:
    trilaterate(bad)
except GeometryError as exc:
    print(f"\ncoplanar set rejected: {exc}")
