"""Scenario orchestration: build scenes, run the chain, aggregate metrics.

Modes map to the experiment families: `single` (three receivers, one
target), `bias` (four receivers, joint clock-offset estimation), `threed`
(tetrahedron geometry), `multi` (two-plus targets with association),
`montecarlo` (randomized scenes of the single or multi flavor), and `track`
(filtered trajectories).  Every run is reproducible from (config, seed), and
when an output directory is set the run drops config.json, CSV tables,
metrics.json, and tables.md under <output_dir>/<mode>/<seed>/.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .association import (
    AssociationError,
    MeasurementContext,
    associate_targets,
    enumerate_assignments,
    score_assignment,
)
from .constants import SPEED_OF_LIGHT
from .rangedoppler import (
    DetectionError,
    DopplerGrid,
    coarse_peak,
    compute_caf,
    detect_multi_delays,
    doppler_at_delay,
)
from .reporting import (
    dump_json,
    format_table_md,
    write_caf_csv,
    write_rows_csv,
    write_tables_md,
)
from .scene import LinkBudget, Scene, TargetState, bistatic_range, bistatic_radial_velocity, synthesize_capture
from .solver import BistaticMeasurementSet, SolverSettings, estimate_velocity, trilaterate
from .tracking import MotionProfile, NoiseModel, generate_motion, track_sequence
from .waveform import WaveformConfig, make_frame

MODES = ("single", "bias", "threed", "multi", "montecarlo", "track")

RECEIVERS_2D = ((0.0, 0.0), (500.0, 0.0), (250.0, 433.0))
RECEIVER_4TH_2D = (0.0, 500.0)
TRANSMITTER_2D = (250.0, 144.34)
RECEIVERS_3D = ((0.0, 0.0, 0.0), (500.0, 0.0, 0.0), (0.0, 500.0, 0.0), (0.0, 0.0, 500.0))
TRANSMITTER_3D = (125.0, 125.0, 125.0)

AREA_HALF_WIDTH_M = 500.0
MIN_STANDOFF_M = 10.0
MULTI_MIN_SEPARATION_M = 100.0
SPEED_RANGE_MPS = (20.0, 30.0)
DELAY_MARGIN_BINS = 16

# Fixed-scene runs keep the published +/-400 Hz, 401-point grid.  Random
# scenes draw speeds whose Doppler can exceed 400 Hz at this carrier, so
# those runs widen the span (same 2 Hz pitch) rather than clip the peak.
FIXED_DOPPLER = (400.0, 401)
RANDOM_DOPPLER = (520.0, 521)
TRACK_CHAIN_DOPPLER = (520.0, 53)


def heading_to_velocity(speed_mps: float, heading_deg: float) -> np.ndarray:
    a = math.radians(heading_deg)
    return speed_mps * np.array([math.cos(a), math.sin(a)])


def wrapped_angle_error_deg(est_deg: float, true_deg: float) -> float:
    return abs(math.remainder(est_deg - true_deg, 360.0))


def single_target_truth() -> TargetState:
    return TargetState(pos=(67.18, 423.72), vel=heading_to_velocity(24.17, -100.68))


def threed_target_truth() -> TargetState:
    return TargetState(pos=(67.18, 423.72, 381.89), vel=(-13.482, -7.545, -18.586))


def multi_target_truth() -> list:
    return [
        TargetState(pos=(46.93, 14.17), vel=heading_to_velocity(23.97, 150.91)),
        TargetState(pos=(417.88, 216.38), vel=heading_to_velocity(25.39, -113.32)),
    ]


def default_scene(mode: str, clock_bias_s: float = 0.0, num_targets: int = 2) -> Scene:
    """Reference geometry and targets for each mode's fixed scenario."""
    if mode in ("single", "montecarlo", "track"):
        return Scene(TRANSMITTER_2D, list(RECEIVERS_2D), [single_target_truth()])
    if mode == "bias":
        receivers = list(RECEIVERS_2D) + [RECEIVER_4TH_2D]
        return Scene(TRANSMITTER_2D, receivers, [single_target_truth()], clock_bias_s=clock_bias_s)
    if mode == "threed":
        return Scene(TRANSMITTER_3D, list(RECEIVERS_3D), [threed_target_truth()])
    if mode == "multi":
        truths = multi_target_truth()
        if num_targets > len(truths):
            raise ValueError(
                f"fixed multi scene defines {len(truths)} targets; "
                "use random_scene for other counts"
            )
        return Scene(TRANSMITTER_2D, list(RECEIVERS_2D), truths[:num_targets])
    raise ValueError(f"unknown mode {mode!r}")


def draw_random_scene(
    rng: np.random.Generator,
    transmitter,
    receivers,
    num_targets: int = 1,
    min_separation_m: float = 0.0,
    clock_bias_s: float = 0.0,
) -> Scene:
    """Uniform targets in the [0, 500]^dims box, speed 20-30 m/s, any heading.

    Positions closer than 10 m to the transmitter or a receiver (degenerate
    unit vectors) or closer than min_separation_m to an earlier target are
    redrawn.
    """
    transmitter = np.asarray(transmitter, dtype=float)
    dims = transmitter.shape[0]
    anchors = [transmitter] + [np.asarray(r, dtype=float) for r in receivers]
    targets = []
    while len(targets) < num_targets:
        pos = rng.uniform(0.0, AREA_HALF_WIDTH_M, dims)
        if min(np.linalg.norm(pos - a) for a in anchors) < MIN_STANDOFF_M:
            continue
        if targets and min(
            np.linalg.norm(pos - tg.pos) for tg in targets
        ) < min_separation_m:
            continue
        speed = rng.uniform(*SPEED_RANGE_MPS)
        if dims == 2:
            heading = rng.uniform(0.0, 2.0 * math.pi)
            vel = speed * np.array([math.cos(heading), math.sin(heading)])
        else:
            direction = rng.normal(size=3)
            direction /= np.linalg.norm(direction)
            vel = speed * direction
        targets.append(TargetState(pos=pos, vel=vel))
    return Scene(transmitter, list(receivers), targets, clock_bias_s=clock_bias_s)


@dataclass
class ScenarioConfig:
    """One experiment: mode, radio/solver knobs, trial count, and seed."""

    mode: str = "single"
    waveform: WaveformConfig = field(default_factory=WaveformConfig)
    link: LinkBudget = field(default_factory=LinkBudget)
    doppler: Optional[DopplerGrid] = None  # None -> per-mode default
    solver: SolverSettings = field(default_factory=SolverSettings)
    trials: int = 1
    seed: int = 20250101
    output_dir: Optional[str] = None
    scene: Optional[Scene] = None  # None -> mode default (or random draw)
    random_scene: bool = False
    clock_bias_s: float = 0.0  # injected offset, bias mode
    num_targets: int = 1
    motion: Optional[MotionProfile] = None  # track mode
    track_feed: str = "fast"  # fast | chain
    tracking_noise: Optional[NoiseModel] = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.track_feed not in ("fast", "chain"):
            raise ValueError("track_feed must be 'fast' or 'chain'")
        if self.num_targets < 1:
            raise ValueError("num_targets must be at least 1")
        if self.mode == "multi" and self.num_targets == 1:
            self.num_targets = 2
        if self.mode == "montecarlo":
            self.random_scene = True
        if self.scene is not None:
            need = {"single": 3, "bias": 4, "threed": 4}.get(self.mode)
            if need is not None and len(self.scene.receivers) < need:
                raise ValueError(f"{self.mode} mode needs at least {need} receivers")
            if self.mode == "threed" and self.scene.dims != 3:
                raise ValueError("threed mode requires a 3D scene")
            if not self.random_scene:
                # the provided scene fixes the target count
                self.num_targets = len(self.scene.targets)


@dataclass
class MetricsReport:
    """Aggregated run metrics in the layout of the published summary tables.

    Percentages are derived from the absolutes: RMS range error over the
    mean true bistatic range, speed error over the mean true speed, angle
    error over the full circle.  Fields that a mode cannot populate (for
    example positioning columns of a fast-feed tracking run) are NaN, which
    serializes to null.  extras carries mode-specific values such as bias
    estimates, association accuracy, or per-filter error totals.
    """

    mode: str
    seed: int
    trials_requested: int
    trials_completed: int
    failures: int
    trilateration_cost: float
    rms_bistatic_range_error_m: float
    rms_bistatic_range_error_pct: float
    abs_speed_error_mps: float
    abs_speed_error_pct: float
    abs_angle_error_deg: float
    abs_angle_error_pct: float
    position_error_m: float
    per_trial: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)


def _doppler_grid(cfg: ScenarioConfig) -> DopplerGrid:
    if cfg.doppler is not None:
        return cfg.doppler
    if cfg.mode == "track" and cfg.track_feed == "chain":
        return DopplerGrid(*TRACK_CHAIN_DOPPLER)
    if cfg.random_scene:
        return DopplerGrid(*RANDOM_DOPPLER)
    return DopplerGrid(*FIXED_DOPPLER)


def _delay_span_bins(scene: Scene, delay_bin_m: float) -> int:
    longest = max(
        bistatic_range(tg.pos, scene.transmitter_pos, r)
        for tg in scene.targets
        for r in scene.receivers
    )
    longest += abs(scene.clock_bias_s) * SPEED_OF_LIGHT
    return int(math.ceil(longest / delay_bin_m)) + DELAY_MARGIN_BINS


def _trial_seed(child: np.random.SeedSequence) -> int:
    return int(child.generate_state(1, np.uint32)[0])


def _capture_peaks(cfg, scene, trial_seed, num_targets, collect_caf=False):
    """Full front end for one scene: synthesize, CAF, detect per receiver.

    Returns (peaks_per_rx, rd_maps, delay_bin_m); peaks are sorted by delay
    so candidate index k is the k-th nearest bistatic range at the receiver.
    """
    frame = make_frame(cfg.waveform)
    grid = _doppler_grid(cfg)
    delay_bin_m = SPEED_OF_LIGHT / frame.sample_rate_hz
    delay_bins = _delay_span_bins(scene, delay_bin_m)
    peaks_per_rx = []
    rd_maps = []
    for m in range(len(scene.receivers)):
        capture = synthesize_capture(frame, scene, m, budget=cfg.link, phase_seed=trial_seed)
        rd = compute_caf(capture, frame, delay_bins, grid)
        if num_targets == 1:
            d0, _ = coarse_peak(rd)
            peaks = [doppler_at_delay(rd, d0)]
        else:
            delays = sorted(detect_multi_delays(rd, num_targets))
            peaks = [doppler_at_delay(rd, d) for d in delays]
        peaks_per_rx.append(peaks)
        if collect_caf:
            rd_maps.append(rd)
    return peaks_per_rx, rd_maps, delay_bin_m


def _truth_rows(scene: Scene, trial: int):
    rows = []
    for m, r in enumerate(scene.receivers):
        for k, tg in enumerate(scene.targets):
            rows.append(
                {
                    "trial": trial,
                    "receiver": m,
                    "target": k,
                    "range_true_m": bistatic_range(tg.pos, scene.transmitter_pos, r),
                    "vel_true_mps": bistatic_radial_velocity(
                        tg.pos, tg.vel, scene.transmitter_pos, r
                    ),
                }
            )
    return rows


def _match_truth(fixes, targets):
    """Pair estimated fixes with true targets by minimum total position distance."""
    import itertools as _it

    k = len(fixes)
    best = None
    for perm in _it.permutations(range(k)):
        total = sum(
            np.linalg.norm(np.asarray(fixes[i].pos) - targets[perm[i]].pos)
            for i in range(k)
        )
        if best is None or total < best[0]:
            best = (total, perm)
    return best[1]


def _target_metrics(fix, vfix, target: TargetState):
    true_speed = float(np.linalg.norm(target.vel))
    true_heading = math.degrees(math.atan2(target.vel[1], target.vel[0]))
    return {
        "pos_err_m": float(np.linalg.norm(fix.pos - target.pos)),
        "speed_true_mps": true_speed,
        "speed_est_mps": vfix.speed_mps,
        "speed_err_mps": abs(vfix.speed_mps - true_speed),
        "angle_true_deg": true_heading,
        "angle_est_deg": vfix.heading_deg,
        "angle_err_deg": wrapped_angle_error_deg(vfix.heading_deg, true_heading),
    }


def _positioning_trial(cfg, scene, trial, trial_seed, estimate_bias, collect_caf):
    """One chain trial for the single/bias/threed family (one target)."""
    peaks_per_rx, rd_maps, _ = _capture_peaks(cfg, scene, trial_seed, 1, collect_caf)
    target = scene.targets[0]
    ranges = [p[0].bistatic_range_m for p in peaks_per_rx]
    vels = [p[0].radial_velocity_mps for p in peaks_per_rx]
    meas = BistaticMeasurementSet(
        ranges_m=ranges,
        radial_velocities_mps=vels,
        receiver_positions=scene.receivers,
        transmitter_pos=scene.transmitter_pos,
    )
    fix = trilaterate(meas, cfg.solver, estimate_bias=estimate_bias)
    vfix = estimate_velocity(fix, meas)

    meas_rows = _truth_rows(scene, trial)
    for m, p in enumerate(peaks_per_rx):
        meas_rows[m]["range_est_m"] = p[0].bistatic_range_m
        meas_rows[m]["vel_est_mps"] = p[0].radial_velocity_mps

    n_res = len(scene.receivers)
    row = {
        "trial": trial,
        "target": 0,
        "cost": fix.residual_cost,
        "rms_range_err_m": math.sqrt(fix.residual_cost / n_res),
        "converged": fix.converged,
    }
    for axis, name in zip(range(scene.dims), "xyz"):
        row[f"pos_{name}_true_m"] = float(target.pos[axis])
        row[f"pos_{name}_est_m"] = float(fix.pos[axis])
    row.update(_target_metrics(fix, vfix, target))
    if estimate_bias:
        row["bias_true_ns"] = scene.clock_bias_s * 1e9
        row["bias_est_ns"] = fix.clock_bias_s * 1e9
        row["bias_err_ns"] = abs(row["bias_est_ns"] - row["bias_true_ns"])
    return row, meas_rows, rd_maps


def _true_assignment(scene: Scene):
    """The ground-truth labeling: candidate index = rank by true bistatic range."""
    perms = []
    for r in scene.receivers:
        ranges = [bistatic_range(tg.pos, scene.transmitter_pos, r) for tg in scene.targets]
        order = np.argsort(np.argsort(ranges))
        perms.append(tuple(int(v) for v in order))
    return tuple(perms)


def relabel_class(permutations: tuple) -> tuple:
    """Canonical key of a labeling under global target renumbering."""
    first = permutations[0]
    inverse = [0] * len(first)
    for k, cand in enumerate(first):
        inverse[cand] = k
    return tuple(
        tuple(perm[inverse[j]] for j in range(len(first))) for perm in permutations
    )


def _multi_trial(cfg, scene, trial, trial_seed, collect_caf):
    """One chain trial with detection, association, and per-target metrics."""
    k = len(scene.targets)
    peaks_per_rx, rd_maps, delay_bin_m = _capture_peaks(cfg, scene, trial_seed, k, collect_caf)
    delay_lists = [[p.delay_bin_refined for p in peaks] for peaks in peaks_per_rx]
    context = MeasurementContext(
        receiver_positions=scene.receivers,
        transmitter_pos=scene.transmitter_pos,
        delay_bin_m=delay_bin_m,
    )
    winner = associate_targets(delay_lists, context, cfg.solver)

    hyp_rows = []
    cache: dict = {}
    for hyp in enumerate_assignments(k, len(scene.receivers)):
        scored = score_assignment(hyp, delay_lists, context, cfg.solver, _fix_cache=cache)
        hyp_rows.append(
            {
                "trial": trial,
                "permutations": str(scored.permutations),
                "total_cost": scored.total_cost,
            }
        )
    costs = [r["total_cost"] for r in hyp_rows]
    correct = relabel_class(winner.permutations) == relabel_class(_true_assignment(scene))

    # velocity per associated target, then truth matching for the metrics
    vfixes = []
    for t in range(k):
        ranges = [
            peaks_per_rx[m][winner.permutations[m][t]].bistatic_range_m
            for m in range(len(scene.receivers))
        ]
        vels = [
            peaks_per_rx[m][winner.permutations[m][t]].radial_velocity_mps
            for m in range(len(scene.receivers))
        ]
        meas = BistaticMeasurementSet(
            ranges_m=ranges,
            radial_velocities_mps=vels,
            receiver_positions=scene.receivers,
            transmitter_pos=scene.transmitter_pos,
        )
        vfixes.append(estimate_velocity(winner.fixes[t], meas))

    pairing = _match_truth(winner.fixes, scene.targets)
    rows = []
    n_res = k * len(scene.receivers)
    for t in range(k):
        target = scene.targets[pairing[t]]
        row = {
            "trial": trial,
            "target": t,
            "matched_truth": pairing[t],
            "cost": winner.total_cost,
            "rms_range_err_m": math.sqrt(winner.total_cost / n_res),
            "converged": winner.fixes[t].converged,
            "association_correct": bool(correct),
            "tied": winner.tied,
        }
        for axis, name in zip(range(scene.dims), "xyz"):
            row[f"pos_{name}_true_m"] = float(target.pos[axis])
            row[f"pos_{name}_est_m"] = float(winner.fixes[t].pos[axis])
        row.update(_target_metrics(winner.fixes[t], vfixes[t], target))
        rows.append(row)

    meas_rows = _truth_rows(scene, trial)
    for entry in meas_rows:
        m, tk = entry["receiver"], entry["target"]
        est_idx = None
        for t in range(k):
            if pairing[t] == tk:
                est_idx = winner.permutations[m][t]
        peak = peaks_per_rx[m][est_idx]
        entry["range_est_m"] = peak.bistatic_range_m
        entry["vel_est_mps"] = peak.radial_velocity_mps
    return rows, meas_rows, rd_maps, hyp_rows, costs


def _aggregate(cfg, target_rows, meas_rows, failures, extras) -> MetricsReport:
    completed_trials = sorted({r["trial"] for r in target_rows})
    if not completed_trials:
        return MetricsReport(
            mode=cfg.mode,
            seed=cfg.seed,
            trials_requested=cfg.trials,
            trials_completed=0,
            failures=failures,
            trilateration_cost=math.nan,
            rms_bistatic_range_error_m=math.nan,
            rms_bistatic_range_error_pct=math.nan,
            abs_speed_error_mps=math.nan,
            abs_speed_error_pct=math.nan,
            abs_angle_error_deg=math.nan,
            abs_angle_error_pct=math.nan,
            position_error_m=math.nan,
            per_trial=[],
            extras=extras,
        )
    by_trial = {}
    for row in target_rows:
        by_trial.setdefault(row["trial"], []).append(row)
    cost = float(np.mean([rows[0]["cost"] for rows in by_trial.values()]))
    rms = float(np.mean([rows[0]["rms_range_err_m"] for rows in by_trial.values()]))
    speed_err = float(np.mean([r["speed_err_mps"] for r in target_rows]))
    angle_err = float(np.mean([r["angle_err_deg"] for r in target_rows]))
    pos_err = float(np.mean([r["pos_err_m"] for r in target_rows]))
    mean_true_range = float(np.mean([r["range_true_m"] for r in meas_rows]))
    mean_true_speed = float(np.mean([r["speed_true_mps"] for r in target_rows]))
    extras = dict(extras)
    extras["mean_true_bistatic_range_m"] = mean_true_range
    extras["mean_true_speed_mps"] = mean_true_speed
    return MetricsReport(
        mode=cfg.mode,
        seed=cfg.seed,
        trials_requested=cfg.trials,
        trials_completed=len(completed_trials),
        failures=failures,
        trilateration_cost=cost,
        rms_bistatic_range_error_m=rms,
        rms_bistatic_range_error_pct=100.0 * rms / mean_true_range,
        abs_speed_error_mps=speed_err,
        abs_speed_error_pct=100.0 * speed_err / mean_true_speed,
        abs_angle_error_deg=angle_err,
        abs_angle_error_pct=100.0 * angle_err / 360.0,
        position_error_m=pos_err,
        per_trial=target_rows,
        extras=extras,
    )


def _metrics_sections(report: MetricsReport, meas_rows) -> list:
    sections = []
    if meas_rows:
        header = ["trial", "receiver", "target", "B_true (m)", "B_est (m)", "v_true (m/s)", "v_est (m/s)"]
        rows = [
            [
                r["trial"],
                r["receiver"],
                r["target"],
                r["range_true_m"],
                r.get("range_est_m", math.nan),
                r["vel_true_mps"],
                r.get("vel_est_mps", math.nan),
            ]
            for r in meas_rows
        ]
        sections.append(format_table_md("Per-receiver bistatic estimates", header, rows))
    metric_rows = [
        ["Trilateration cost", report.trilateration_cost],
        ["RMS bistatic-range error (m)", report.rms_bistatic_range_error_m],
        ["RMS bistatic-range error (% of mean range)", report.rms_bistatic_range_error_pct],
        ["Speed error (m/s)", report.abs_speed_error_mps],
        ["Speed error (% of true speed)", report.abs_speed_error_pct],
        ["Angle error (deg)", report.abs_angle_error_deg],
        ["Angle error (% of full circle)", report.abs_angle_error_pct],
        ["Position error (m)", report.position_error_m],
        ["Trials completed", report.trials_completed],
        ["Failures", report.failures],
    ]
    sections.append(format_table_md("Run metrics", ["Metric", "Value"], metric_rows))
    return sections


def _emit(cfg, report, meas_rows, rd_maps, sections, extra_csv=None):
    if cfg.output_dir is None:
        return None
    out = Path(cfg.output_dir) / cfg.mode / str(cfg.seed)
    out.mkdir(parents=True, exist_ok=True)
    dump_json(out / "config.json", cfg)
    dump_json(out / "metrics.json", report)
    if meas_rows:
        write_rows_csv(out / "measurements.csv", meas_rows)
    if report.per_trial:
        write_rows_csv(out / "fixes.csv", report.per_trial)
    for rd in rd_maps:
        write_caf_csv(out / f"caf_rx{rd.receiver_index}.csv", rd)
    for name, rows in (extra_csv or {}).items():
        write_rows_csv(out / name, rows)
    write_tables_md(out / "tables.md", sections)
    return out


def _scene_for_trial(cfg, child, kind):
    """Fixed scene, or a fresh random draw from the trial's seed stream."""
    if cfg.scene is not None and not cfg.random_scene:
        return cfg.scene
    if not cfg.random_scene:
        return default_scene(kind, clock_bias_s=cfg.clock_bias_s, num_targets=cfg.num_targets)
    rng = np.random.default_rng(child)
    if kind == "threed":
        transmitter, receivers = TRANSMITTER_3D, RECEIVERS_3D
    elif kind == "bias":
        transmitter, receivers = TRANSMITTER_2D, tuple(RECEIVERS_2D) + (RECEIVER_4TH_2D,)
    else:
        transmitter, receivers = TRANSMITTER_2D, RECEIVERS_2D
    separation = MULTI_MIN_SEPARATION_M if cfg.num_targets > 1 else 0.0
    return draw_random_scene(
        rng,
        transmitter,
        receivers,
        num_targets=cfg.num_targets,
        min_separation_m=separation,
        clock_bias_s=cfg.clock_bias_s if kind == "bias" else 0.0,
    )


def _run_positioning(cfg: ScenarioConfig, kind: str) -> MetricsReport:
    estimate_bias = kind == "bias"
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.trials)
    target_rows, meas_rows, kept_maps, hyp_rows = [], [], [], []
    failures = 0
    extras: dict = {}
    correct_count = 0
    multi_trials = 0
    for trial, child in enumerate(children):
        scene = _scene_for_trial(cfg, child, kind)
        trial_seed = _trial_seed(child)
        collect_caf = not kept_maps  # emit the first completed trial's maps
        try:
            if cfg.num_targets == 1 or kind in ("single", "bias", "threed"):
                row, m_rows, maps = _positioning_trial(
                    cfg, scene, trial, trial_seed, estimate_bias, collect_caf
                )
                rows = [row]
                costs = None
            else:
                rows, m_rows, maps, h_rows, costs = _multi_trial(
                    cfg, scene, trial, trial_seed, collect_caf
                )
                hyp_rows.extend(h_rows)
                multi_trials += 1
                if rows[0]["association_correct"]:
                    correct_count += 1
                if costs is not None and trial == 0:
                    extras["hypothesis_count"] = len(costs)
                    extras["hypothesis_cost_ratio"] = max(costs) / min(costs)
        except (DetectionError, AssociationError) as exc:
            failures += 1
            extras.setdefault("failure_reasons", []).append(f"trial {trial}: {exc}")
            continue
        target_rows.extend(rows)
        meas_rows.extend(m_rows)
        if maps:
            kept_maps = maps

    if estimate_bias:
        bias_rows = [r for r in target_rows if "bias_est_ns" in r]
        if bias_rows:
            extras["mean_abs_bias_error_ns"] = float(
                np.mean([r["bias_err_ns"] for r in bias_rows])
            )
            extras["bias_true_ns"] = bias_rows[0]["bias_true_ns"]
    if multi_trials:
        extras["association_trials"] = multi_trials
        extras["association_correct"] = correct_count
        extras["association_accuracy"] = correct_count / multi_trials

    report = _aggregate(cfg, target_rows, meas_rows, failures, extras)
    sections = _metrics_sections(report, meas_rows)
    extra_csv = {"hypotheses.csv": hyp_rows} if hyp_rows else None
    _emit(cfg, report, meas_rows, kept_maps, sections, extra_csv)
    return report


def run_single(cfg: ScenarioConfig) -> MetricsReport:
    return _run_positioning(cfg, "single")


def run_bias(cfg: ScenarioConfig) -> MetricsReport:
    return _run_positioning(cfg, "bias")


def run_threed(cfg: ScenarioConfig) -> MetricsReport:
    return _run_positioning(cfg, "threed")


def run_multi(cfg: ScenarioConfig) -> MetricsReport:
    return _run_positioning(cfg, "multi")


def run_monte_carlo(cfg: ScenarioConfig) -> MetricsReport:
    kind = "multi" if cfg.num_targets > 1 else "single"
    return _run_positioning(cfg, kind)


def _track_measurements_fast(truth, noise: NoiseModel, child) -> np.ndarray:
    rng = np.random.default_rng(child)
    z = np.array([np.concatenate([s.pos, s.vel]) for s in truth])
    return z + rng.normal(0.0, 1.0, z.shape) * np.sqrt(np.diag(noise.R))


def _track_measurements_chain(cfg, truth, trial_seed) -> np.ndarray:
    """Per-step single-target chain estimates as the measurement feed."""
    rows = []
    for step, state in enumerate(truth):
        scene = Scene(TRANSMITTER_2D, list(RECEIVERS_2D), [state])
        peaks_per_rx, _, _ = _capture_peaks(cfg, scene, trial_seed + step, 1)
        meas = BistaticMeasurementSet(
            ranges_m=[p[0].bistatic_range_m for p in peaks_per_rx],
            radial_velocities_mps=[p[0].radial_velocity_mps for p in peaks_per_rx],
            receiver_positions=scene.receivers,
            transmitter_pos=scene.transmitter_pos,
        )
        fix = trilaterate(meas, cfg.solver)
        vfix = estimate_velocity(fix, meas)
        rows.append([fix.pos[0], fix.pos[1], vfix.vel[0], vfix.vel[1]])
    return np.asarray(rows)


def _default_profiles(cfg: ScenarioConfig) -> dict:
    if cfg.motion is not None:
        return {cfg.motion.kind: cfg.motion}
    base = dict(
        nominal_speed_mps=25.0,
        start_pos=(100.0, 100.0),
        start_heading_rad=math.radians(30.0),
        num_steps=60,
    )
    return {
        "linear": MotionProfile(kind="linear", **base),
        "circular": MotionProfile(kind="circular", **base),
    }


def run_track(cfg: ScenarioConfig) -> MetricsReport:
    """Filter-comparison runs over seeded motion profiles.

    The fast feed perturbs the truth with Gaussian noise matched to R; the
    chain feed estimates each step with the full waveform pipeline.  Each
    trial is one independent seed; both filters see identical measurements.
    Positioning columns are NaN here (no trilateration aggregate in the fast
    feed); extras carries totals and medians per motion and filter.
    """
    noise = cfg.tracking_noise or NoiseModel()
    profiles = _default_profiles(cfg)
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.trials)
    per_trial = []
    track_csv: dict = {}
    totals: dict = {}
    for trial, child in enumerate(children):
        motion_child, meas_child = child.spawn(2)
        for name, profile in profiles.items():
            truth = generate_motion(profile, motion_child, period_s=noise.T_s_filter)
            if cfg.track_feed == "fast":
                z = _track_measurements_fast(truth, noise, meas_child)
            else:
                z = _track_measurements_chain(cfg, truth, _trial_seed(meas_child))
            row = {"trial": trial, "motion": name}
            for kind in ("kf", "ekf"):
                rep = track_sequence(z, kind, noise, truth=truth)
                row[f"{kind}_total_err_m"] = rep.total_filter_error_m
                row["meas_total_err_m"] = rep.total_measurement_error_m
                totals.setdefault(f"{kind}_{name}", []).append(rep.total_filter_error_m)
                if trial == 0:
                    track_csv[f"track_{kind}_{name}.csv"] = [
                        {
                            "step": i,
                            "truth_x_m": truth[i].pos[0],
                            "truth_y_m": truth[i].pos[1],
                            "meas_x_m": z[i, 0],
                            "meas_y_m": z[i, 1],
                            "filt_x_m": rep.estimates[i, 0],
                            "filt_y_m": rep.estimates[i, 1],
                            "filt_speed_mps": float(np.hypot(rep.estimates[i, 2], rep.estimates[i, 3])),
                            "filt_heading_deg": math.degrees(
                                math.atan2(rep.estimates[i, 3], rep.estimates[i, 2])
                            ),
                            "meas_err_m": rep.measurement_pos_errors[i],
                            "filt_err_m": rep.filter_pos_errors[i],
                        }
                        for i in range(len(truth))
                    ]
            totals.setdefault(f"meas_{name}", []).append(row["meas_total_err_m"])
            per_trial.append(row)

    extras = {
        f"median_{key}_total_m": float(np.median(vals)) for key, vals in totals.items()
    }
    extras["feed"] = cfg.track_feed
    extras["num_steps"] = next(iter(profiles.values())).num_steps
    report = MetricsReport(
        mode=cfg.mode,
        seed=cfg.seed,
        trials_requested=cfg.trials,
        trials_completed=cfg.trials,
        failures=0,
        trilateration_cost=math.nan,
        rms_bistatic_range_error_m=math.nan,
        rms_bistatic_range_error_pct=math.nan,
        abs_speed_error_mps=math.nan,
        abs_speed_error_pct=math.nan,
        abs_angle_error_deg=math.nan,
        abs_angle_error_pct=math.nan,
        position_error_m=math.nan,
        per_trial=per_trial,
        extras=extras,
    )
    header = ["Filter", "Motion", "Median total meas error (m)", "Median total filter error (m)"]
    rows = []
    for name in profiles:
        for kind in ("kf", "ekf"):
            rows.append(
                [
                    kind,
                    name,
                    extras[f"median_meas_{name}_total_m"],
                    extras[f"median_{kind}_{name}_total_m"],
                ]
            )
    sections = [format_table_md("Tracking error totals", header, rows)]
    _emit(cfg, report, [], [], sections, track_csv)
    return report


def association_screen(
    trials: int = 100,
    seed: int = 7,
    noise_sigma_m: float = 2.0,
    min_separation_m: float = MULTI_MIN_SEPARATION_M,
    settings: Optional[SolverSettings] = None,
) -> dict:
    """Measurement-level association sweep over random 2-target scenes.

    Skips the waveform front end: true bistatic ranges get Gaussian noise and
    go straight to the assignment search, isolating association behavior
    from detection behavior.  Returns the fraction of trials whose winner
    matches the ground-truth pairing up to a global relabel.
    """
    settings = settings or SolverSettings()
    children = np.random.SeedSequence(seed).spawn(trials)
    correct = 0
    tied = 0
    for child in children:
        rng = np.random.default_rng(child)
        scene = draw_random_scene(
            rng, TRANSMITTER_2D, RECEIVERS_2D, num_targets=2, min_separation_m=min_separation_m
        )
        context = MeasurementContext(
            receiver_positions=scene.receivers,
            transmitter_pos=scene.transmitter_pos,
            delay_bin_m=1.0,
        )
        delay_lists = []
        for r in scene.receivers:
            ranges = [
                bistatic_range(tg.pos, scene.transmitter_pos, r)
                + rng.normal(0.0, noise_sigma_m)
                for tg in scene.targets
            ]
            delay_lists.append(sorted(ranges))
        winner = associate_targets(delay_lists, context, settings)
        if relabel_class(winner.permutations) == relabel_class(_true_assignment(scene)):
            correct += 1
        if winner.tied:
            tied += 1
    return {
        "trials": trials,
        "correct": correct,
        "accuracy": correct / trials,
        "tied": tied,
    }


def run_mode(cfg: ScenarioConfig) -> MetricsReport:
    runners = {
        "single": run_single,
        "bias": run_bias,
        "threed": run_threed,
        "multi": run_multi,
        "montecarlo": run_monte_carlo,
        "track": run_track,
    }
    return runners[cfg.mode](cfg)
