"""Summaries and figure data extracted from a simulation log CSV."""

import csv
import glob
import os
import re

import numpy as np

from .rasters import InputDataError, read_raster


def read_log(path) -> dict:
    """Columns of a log CSV as float arrays. Truncated rows are reported by row number."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise InputDataError(f"cannot read log {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputDataError(f"{path}: empty log") from None
        for need in ("t", "J", "J_near", "min_dist", "speed_1"):
            if need not in header:
                raise InputDataError(f"{path}: missing column {need!r}")
        data = []
        for n, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise InputDataError(f"{path}: row {n}: expected {len(header)} fields, found {len(row)}")
            try:
                data.append([float(v) for v in row])
            except ValueError:
                raise InputDataError(f"{path}: row {n}: non-numeric field") from None
    if not data:
        raise InputDataError(f"{path}: log has no data rows")
    arr = np.array(data)
    return {name: arr[:, k] for k, name in enumerate(header)}


def n_drones(log) -> int:
    return sum(1 for k in log if re.fullmatch(r"speed_\d+", k))


def regime_speeds(log, quantile=0.25):
    """Mean drone-1 speed over the top and bottom J_near quartiles."""
    jn, sp = log["J_near"], log["speed_1"]
    hi = jn >= np.quantile(jn, 1 - quantile)
    lo = jn <= np.quantile(jn, quantile)
    return float(sp[hi].mean()), float(sp[lo].mean())


def coverage_time(log, threshold=0.01):
    J = log["J"]
    if J[0] == 0:
        return 0.0
    hit = np.flatnonzero(J < threshold * J[0])
    return float(log["t"][hit[0]]) if hit.size else float("nan")


def summarize(log, threshold=0.01) -> dict:
    hi, lo = regime_speeds(log)
    return {
        "J(0)": float(log["J"][0]),
        "J(T)": float(log["J"][-1]),
        "T": float(log["t"][-1]),
        "coverage_time": coverage_time(log, threshold),
        "mean_speed_high_J_near": hi,
        "mean_speed_low_J_near": lo,
        "max_speed": float(max(log[f"speed_{i}"].max() for i in range(1, n_drones(log) + 1))),
        "min_pairwise_distance": float(log["min_dist"].min()),
        "fallback_events": int(log["fallbacks"].sum()) if "fallbacks" in log else 0,
    }


def format_summary(s: dict) -> str:
    return "\n".join(f"{k}: {v:.9g}" if isinstance(v, float) else f"{k}: {v}" for k, v in s.items())


def _write_columns(path, names, cols):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in zip(*cols):
            w.writerow([f"{v:.9g}" for v in row])
    return path


def find_snapshots(directory):
    """``psi_t*.csv`` rasters in ``directory`` sorted by time."""
    out = []
    for p in glob.glob(os.path.join(directory, "psi_t*.csv")):
        m = re.search(r"psi_t([0-9.]+)\.csv$", p)
        if m:
            out.append((float(m.group(1)), p))
    return sorted(out)


def write_figures(log, out_dir, snapshot_dir=None):
    """Per-figure CSVs plus PNG renderings; returns the written paths."""
    from . import plotting

    os.makedirs(out_dir, exist_ok=True)
    t = log["t"]
    N = n_drones(log)
    paths = [
        _write_columns(os.path.join(out_dir, "fig_J.csv"), ["t", "J"], [t, log["J"]]),
        _write_columns(os.path.join(out_dir, "fig_speed_jnear.csv"), ["t", "speed_1", "J_near"],
                       [t, log["speed_1"], log["J_near"]]),
    ]
    names, cols = ["t"], [t]
    for i in range(1, N + 1):
        names += [f"x_{i}", f"y_{i}"]
        cols += [log[f"x_{i}"], log[f"y_{i}"]]
    paths.append(_write_columns(os.path.join(out_dir, "fig_trajectories.csv"), names, cols))

    paths.append(plotting.plot_objective(t, log["J"], os.path.join(out_dir, "fig_J.png")))
    paths.append(plotting.plot_speed_jnear(t, log["speed_1"], log["J_near"],
                                           os.path.join(out_dir, "fig_speed_jnear.png")))
    pos = np.stack([np.column_stack([log[f"x_{i}"], log[f"y_{i}"]]) for i in range(1, N + 1)], axis=1)

    snaps = find_snapshots(snapshot_dir) if snapshot_dir else []
    extent = None
    rasters = []
    for ts, p in snaps:
        values, pitch, meta = read_raster(p)
        py = meta.get("pitch_y", pitch)
        extent = (0.0, values.shape[1] * pitch, 0.0, values.shape[0] * py)
        rasters.append((ts, values))
    paths.append(plotting.plot_trajectories(pos, extent, os.path.join(out_dir, "fig_trajectories.png")))
    if rasters:
        paths.append(plotting.plot_snapshots(rasters, os.path.join(out_dir, "fig_psi_snapshots.png"),
                                             extent=extent))
    return paths
