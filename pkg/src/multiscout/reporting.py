"""File emission for runs: I/Q binaries, CSV tables, JSON metrics.

Everything written here is deterministic for a given input: JSON keys are
sorted, floats use repr, and CSV rows are emitted in caller order, so a
repeated run with the same configuration produces byte-identical files.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from pathlib import Path

import numpy as np

IQ_FORMAT = "float32-interleaved-le"


def to_jsonable(obj):
    """Recursively convert dataclasses/numpy/paths into JSON-ready values."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {
            f.name: to_jsonable(getattr(obj, f.name))
            for f in dataclasses.fields(obj)
        }
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def dump_json(path, payload) -> None:
    text = json.dumps(to_jsonable(payload), sort_keys=True, indent=2) + "\n"
    Path(path).write_text(text)


def write_iq(path, samples, sample_rate_hz: float, extra_meta=None) -> None:
    """Interleaved float32 little-endian I/Q with a JSON sidecar at <path>.json."""
    samples = np.asarray(samples, dtype=np.complex128)
    if samples.ndim != 1:
        raise ValueError("samples must be a 1D complex vector")
    data = np.empty(2 * samples.size, dtype="<f4")
    data[0::2] = samples.real
    data[1::2] = samples.imag
    data.tofile(str(path))
    meta = {
        "format": IQ_FORMAT,
        "num_samples": int(samples.size),
        "sample_rate_hz": float(sample_rate_hz),
    }
    if extra_meta:
        meta.update(extra_meta)
    dump_json(str(path) + ".json", meta)


def read_iq(path):
    """Inverse of write_iq; returns (samples, sidecar_meta)."""
    meta = json.loads(Path(str(path) + ".json").read_text())
    if meta.get("format") != IQ_FORMAT:
        raise ValueError(f"unsupported I/Q format {meta.get('format')!r}")
    raw = np.fromfile(str(path), dtype="<f4")
    if raw.size != 2 * meta["num_samples"]:
        raise ValueError("I/Q payload length disagrees with sidecar")
    samples = raw[0::2].astype(np.float64) + 1j * raw[1::2].astype(np.float64)
    return samples, meta


def write_rows_csv(path, rows, fieldnames=None) -> None:
    """Dict rows to CSV; column order from fieldnames or the first row."""
    rows = list(rows)
    if not rows:
        Path(path).write_text("")
        return
    if fieldnames is None:
        fieldnames = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(row.get(k)) for k in fieldnames})


def _cell(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


def write_caf_csv(path, rd_map) -> None:
    """CAF magnitude grid: one row per delay bin, one column per Doppler."""
    mags = np.abs(rd_map.caf)
    freqs = rd_map.doppler_grid.values
    header = ["delay_bin", "bistatic_range_m"] + [
        f"doppler_{f:+.3f}_hz" for f in freqs
    ]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for d in range(mags.shape[0]):
            row = [d, f"{d * rd_map.delay_bin_m:.6f}"]
            row += [f"{v:.9e}" for v in mags[d]]
            writer.writerow(row)


def format_table_md(title: str, header, rows, digits: int = 2) -> str:
    """Markdown pipe table with floats at fixed decimals."""
    def fmt(v):
        if isinstance(v, (float, np.floating)):
            return f"{v:.{digits}f}"
        return str(v)

    lines = [f"### {title}", ""]
    lines.append("| " + " | ".join(str(h) for h in header) + " |")
    lines.append("|" + "|".join(" --- " for _ in header) + "|")
    for row in rows:
        lines.append("| " + " | ".join(fmt(v) for v in row) + " |")
    return "\n".join(lines)


def write_tables_md(path, sections) -> None:
    Path(path).write_text("\n\n".join(sections) + "\n")
