"""Multistatic OFDM sensing workbench.

One transmitter broadcasts a PRS-style OFDM frame; several receivers pick up
target echoes of the same frame. The chain goes waveform synthesis -> echo
simulation -> cross-ambiguity range-Doppler maps -> per-receiver delay/Doppler
peaks -> position and velocity fusion (with optional clock-bias estimation and
multi-target association) -> Kalman tracking. `harness` orchestrates the
scenario modes and `cli` exposes them as the `multiscout` command.
"""

from .constants import SPEED_OF_LIGHT
from .waveform import WaveformConfig, BasebandFrame, generate_gold_sequence, build_prs_symbols, ofdm_modulate, make_frame
from .scene import (
    Scene,
    TargetState,
    LinkBudget,
    ReceiverCapture,
    bistatic_range,
    bistatic_radial_velocity,
    path_gain,
    synthesize_capture,
    remove_direct_path,
)
from .rangedoppler import (
    DopplerGrid,
    RangeDopplerMap,
    DetectionPeak,
    DetectionError,
    compute_caf,
    coarse_peak,
    parabolic_refine,
    detect_multi_delays,
    doppler_at_delay,
)
from .solver import (
    BistaticMeasurementSet,
    SolverSettings,
    PositionFix,
    VelocityFix,
    GeometryError,
    lm_minimize,
    trilaterate,
    estimate_velocity,
)
from .association import (
    AssignmentHypothesis,
    AssociationError,
    MeasurementContext,
    enumerate_assignments,
    score_assignment,
    associate_targets,
)
from .tracking import (
    KfState,
    EkfState,
    NoiseModel,
    MotionProfile,
    TrackReport,
    kf_step,
    ekf_step,
    generate_motion,
    track_sequence,
)
from .harness import (
    ScenarioConfig,
    MetricsReport,
    association_screen,
    default_scene,
    draw_random_scene,
    run_single,
    run_monte_carlo,
    run_bias,
    run_threed,
    run_multi,
    run_track,
    run_mode,
)

__version__ = "0.1.0"

__all__ = [
    "WaveformConfig",
    "BasebandFrame",
    "generate_gold_sequence",
    "build_prs_symbols",
    "ofdm_modulate",
    "make_frame",
    "Scene",
    "TargetState",
    "LinkBudget",
    "ReceiverCapture",
    "bistatic_range",
    "bistatic_radial_velocity",
    "path_gain",
    "synthesize_capture",
    "remove_direct_path",
    "DopplerGrid",
    "RangeDopplerMap",
    "DetectionPeak",
    "DetectionError",
    "compute_caf",
    "coarse_peak",
    "parabolic_refine",
    "detect_multi_delays",
    "doppler_at_delay",
    "BistaticMeasurementSet",
    "SolverSettings",
    "PositionFix",
    "VelocityFix",
    "GeometryError",
    "lm_minimize",
    "trilaterate",
    "estimate_velocity",
    "AssignmentHypothesis",
    "AssociationError",
    "MeasurementContext",
    "enumerate_assignments",
    "score_assignment",
    "associate_targets",
    "KfState",
    "EkfState",
    "NoiseModel",
    "MotionProfile",
    "TrackReport",
    "kf_step",
    "ekf_step",
    "generate_motion",
    "track_sequence",
    "ScenarioConfig",
    "MetricsReport",
    "association_screen",
    "default_scene",
    "draw_random_scene",
    "run_single",
    "run_monte_carlo",
    "run_bias",
    "run_threed",
    "run_multi",
    "run_track",
    "run_mode",
    "SPEED_OF_LIGHT",
]
