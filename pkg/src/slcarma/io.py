"""Deterministic CSV/JSON artifact writers.

Floats are written with repr (shortest round-trip form), so identical
inputs produce byte-identical files.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ValidationError


def format_value(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path, header, rows):
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_value(v) for v in row) + "\n")
    return path


def write_json(path, payload: dict):
    path = Path(path)
    with path.open("w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_subordinator_csv(path_obj, out_path):
    """Event log: one row per jump with the running value of S."""
    running = path_obj.cumulative_at_events()
    rows = zip(path_obj.event_times, path_obj.jump_sizes, running)
    return write_csv(out_path, ["time", "jump", "cumulative_S"], rows)


def write_trajectory_csv(traj, out_path):
    p = traj.states.shape[1]
    header = ["time", "Y"] + [f"X_{i + 1}" for i in range(p)]
    rows = ((traj.times[i], traj.outputs[i], *traj.states[i])
            for i in range(traj.times.size))
    return write_csv(out_path, header, rows)


def write_mean_csv(phases, means, variances, out_path):
    rows = zip(phases, means, variances)
    return write_csv(out_path, ["phase", "mean_Y", "var_Y"], rows)


def write_autocov_csv(records, out_path):
    """records: iterable of (phase, lag, autocov_Y)."""
    return write_csv(out_path, ["phase", "lag", "autocov_Y"], records)


def write_coherence_csv(grid, out_path):
    mask = grid.mask if grid.mask is not None else np.zeros_like(grid.values, bool)
    lines = ["p,q,value,significant"]
    for p in range(grid.n):
        vals = grid.values[p]
        sig = mask[p]
        lines.extend(f"{p},{q},{vals[q]!r},{'true' if sig[q] else 'false'}"
                     for q in range(grid.n))
    Path(out_path).write_text("\n".join(lines) + "\n")
    return Path(out_path)


def write_acf_csv(acf, out_path):
    rows = ((k, acf[k]) for k in range(len(acf)))
    return write_csv(out_path, ["lag", "acf"], rows)


def read_series_csv(path) -> np.ndarray:
    """Load the Y column from a trajectory CSV, or a single-column series."""
    path = Path(path)
    try:
        fh = path.open()
    except OSError as exc:
        raise ValidationError(f"cannot read series {path}: {exc}") from exc
    with fh:
        header = fh.readline().strip().split(",")
        if "Y" in header:
            col = header.index("Y")
        elif len(header) == 1 and not _is_number(header[0]):
            col = 0
        elif _is_number(header[0]):
            col = 0
        else:
            raise ValidationError(f"{path}: no Y column and no numeric first row")
        rows = []
        if _is_number(header[0]):
            rows.append(float(header[col]))
        for line in fh:
            line = line.strip()
            if line:
                rows.append(float(line.split(",")[col]))
    return np.asarray(rows, dtype=float)


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False
