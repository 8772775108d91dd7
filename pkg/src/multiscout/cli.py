"""Command line front end: `multiscout <mode> --config <file>` plus `waveform`.

Every scenario mode accepts a JSON config matching the ScenarioConfig
schema; CLI flags override the file.  Exit codes: 0 success, 1 config error,
2 detection or association failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from .association import AssociationError
from .harness import MODES, ScenarioConfig, run_mode
from .rangedoppler import DetectionError, DopplerGrid
from .reporting import to_jsonable, write_iq
from .scene import LinkBudget, Scene, TargetState
from .solver import SolverSettings
from .tracking import MotionProfile, NoiseModel
from .waveform import WaveformConfig, make_frame


def _from_dict(cls, data, name: str):
    if not isinstance(data, dict):
        raise ValueError(f"{name} must be a JSON object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ValueError(f"unknown {name} keys: {unknown}")
    kwargs = {
        k: tuple(v) if isinstance(v, list) and all(np.isscalar(x) for x in v) else v
        for k, v in data.items()
    }
    return cls(**kwargs)


def _scene_from_dict(data) -> Scene:
    if not isinstance(data, dict):
        raise ValueError("scene must be a JSON object")
    required = {"transmitter_pos", "receivers", "targets"}
    missing = sorted(required - set(data))
    if missing:
        raise ValueError(f"scene is missing keys: {missing}")
    targets = [
        TargetState(pos=t["pos"], vel=t["vel"], rcs_m2=t.get("rcs_m2", 4.0))
        for t in data["targets"]
    ]
    return Scene(
        transmitter_pos=data["transmitter_pos"],
        receivers=data["receivers"],
        targets=targets,
        clock_bias_s=data.get("clock_bias_s", 0.0),
    )


def _cov_from_json(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 1:
        return np.diag(arr)
    if arr.ndim == 2:
        return arr
    raise ValueError(f"{name} must be a diagonal list or a square matrix")


def _noise_from_dict(data) -> NoiseModel:
    if not isinstance(data, dict):
        raise ValueError("tracking_noise must be a JSON object")
    kwargs = {}
    if "Q" in data:
        kwargs["Q"] = _cov_from_json(data["Q"], "Q")
    if "R" in data:
        kwargs["R"] = _cov_from_json(data["R"], "R")
    if "T_s_filter" in data:
        kwargs["T_s_filter"] = data["T_s_filter"]
    unknown = sorted(set(data) - {"Q", "R", "T_s_filter"})
    if unknown:
        raise ValueError(f"unknown tracking_noise keys: {unknown}")
    return NoiseModel(**kwargs)


def scenario_from_dict(data: dict) -> ScenarioConfig:
    """Build a ScenarioConfig from the JSON config schema."""
    if not isinstance(data, dict):
        raise ValueError("config must be a JSON object")
    data = dict(data)
    kwargs = {}
    builders = {
        "waveform": lambda v: _from_dict(WaveformConfig, v, "waveform"),
        "link": lambda v: _from_dict(LinkBudget, v, "link"),
        "doppler": lambda v: _from_dict(DopplerGrid, v, "doppler"),
        "solver": lambda v: _from_dict(SolverSettings, v, "solver"),
        "motion": lambda v: _from_dict(MotionProfile, v, "motion"),
        "scene": _scene_from_dict,
        "tracking_noise": _noise_from_dict,
    }
    for key, build in builders.items():
        if key in data and data[key] is not None:
            kwargs[key] = build(data.pop(key))
        else:
            data.pop(key, None)
    scalars = {
        "mode", "trials", "seed", "output_dir", "random_scene",
        "clock_bias_s", "num_targets", "track_feed",
    }
    unknown = sorted(set(data) - scalars)
    if unknown:
        raise ValueError(f"unknown config keys: {unknown}")
    kwargs.update(data)
    return ScenarioConfig(**kwargs)


def _int_tuple(text: str) -> tuple:
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError("expected comma-separated integers") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multiscout",
        description="Multistatic OFDM sensing workbench: scenario runs and waveform export.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for mode in MODES:
        p = sub.add_parser(mode, help=f"run the {mode} scenario")
        p.add_argument("--config", type=Path, help="JSON config (ScenarioConfig schema)")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--trials", type=int, help="trial count override")
        p.add_argument("--out", type=Path, help="output directory for run files")
        p.add_argument(
            "--print-defaults",
            action="store_true",
            help="dump this mode's default configuration as JSON and exit",
        )

    wf = sub.add_parser("waveform", help="synthesize a reference frame and export I/Q")
    wf.add_argument("--out", type=Path, help="binary I/Q output path (sidecar at <out>.json)")
    wf.add_argument("--print-defaults", action="store_true")
    wf.add_argument("--carrier-freq-hz", type=float)
    wf.add_argument("--subcarrier-spacing-hz", type=float)
    wf.add_argument("--fft-len", type=int)
    wf.add_argument("--cp-first-len", type=int)
    wf.add_argument("--cp-rest-len", type=int)
    wf.add_argument("--symbols-per-slot", type=int)
    wf.add_argument("--num-symbols", type=int)
    wf.add_argument("--guard-tones", type=int)
    wf.add_argument("--no-dc-null", action="store_true", help="keep the DC subcarrier active")
    wf.add_argument("--gold-taps-a", type=_int_tuple)
    wf.add_argument("--gold-taps-b", type=_int_tuple)
    wf.add_argument("--gold-seed-a", type=_int_tuple)
    wf.add_argument("--gold-seed-b", type=_int_tuple)
    return parser


def _build_scenario(args) -> ScenarioConfig:
    data = {}
    if args.config is not None:
        data = json.loads(Path(args.config).read_text())
        if not isinstance(data, dict):
            raise ValueError("config must be a JSON object")
    data["mode"] = args.command
    if args.seed is not None:
        data["seed"] = args.seed
    if args.trials is not None:
        data["trials"] = args.trials
    if args.out is not None:
        data["output_dir"] = str(args.out)
    return scenario_from_dict(data)


def _print_report(report) -> None:
    print(
        f"{report.mode}: trials {report.trials_completed}/{report.trials_requested}"
        f" completed, {report.failures} failures"
    )
    if not math.isnan(report.position_error_m):
        print(
            f"  position error {report.position_error_m:.2f} m | "
            f"cost {report.trilateration_cost:.3f} | "
            f"rms range err {report.rms_bistatic_range_error_m:.3f} m "
            f"({report.rms_bistatic_range_error_pct:.3f}%)"
        )
        print(
            f"  speed err {report.abs_speed_error_mps:.3f} m/s "
            f"({report.abs_speed_error_pct:.3f}%) | "
            f"angle err {report.abs_angle_error_deg:.3f} deg "
            f"({report.abs_angle_error_pct:.3f}%)"
        )
    for key in sorted(report.extras):
        value = report.extras[key]
        if isinstance(value, (int, float, str)):
            print(f"  {key}: {value}")


def _run_waveform(args) -> int:
    flag_map = {
        "carrier_freq_hz": args.carrier_freq_hz,
        "subcarrier_spacing_hz": args.subcarrier_spacing_hz,
        "fft_len": args.fft_len,
        "cp_first_len": args.cp_first_len,
        "cp_rest_len": args.cp_rest_len,
        "symbols_per_slot": args.symbols_per_slot,
        "num_symbols": args.num_symbols,
        "guard_tones": args.guard_tones,
        "gold_taps_a": args.gold_taps_a,
        "gold_taps_b": args.gold_taps_b,
        "gold_seed_a": args.gold_seed_a,
        "gold_seed_b": args.gold_seed_b,
    }
    kwargs = {k: v for k, v in flag_map.items() if v is not None}
    if args.no_dc_null:
        kwargs["dc_null"] = False
    cfg = WaveformConfig(**kwargs)
    if args.print_defaults:
        print(json.dumps(to_jsonable(WaveformConfig()), sort_keys=True, indent=2))
        return 0
    frame = make_frame(cfg)
    print(
        f"frame: {frame.samples.size} samples at {frame.sample_rate_hz/1e6:.2f} MHz, "
        f"{cfg.num_symbols} symbols"
    )
    if args.out is not None:
        write_iq(args.out, frame.samples, frame.sample_rate_hz, extra_meta={"config": to_jsonable(cfg)})
        print(f"wrote {args.out} (+ sidecar {args.out}.json)")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "waveform":
            return _run_waveform(args)
        cfg = _build_scenario(args)
        if args.print_defaults:
            print(json.dumps(to_jsonable(cfg), sort_keys=True, indent=2))
            return 0
        report = run_mode(cfg)
        _print_report(report)
        if report.trials_completed == 0 and report.failures > 0:
            for reason in report.extras.get("failure_reasons", []):
                print(f"error: {reason}", file=sys.stderr)
            return 2
        return 0
    except (DetectionError, AssociationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, TypeError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
