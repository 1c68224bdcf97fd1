"""
Plain-text raster formats.

P2 (ASCII portable graymap). The pixel pitch travels in a comment line
``# pitch_m <float>``; priority rasters also carry ``# phi_max <float>`` so
that integer gray levels map back to importance as ``level / maxval * phi_max``.
Rows are written top to bottom in file order and file row 0 is raster row 0
(low-y edge).

CSV. First line ``rows,cols,pitch_m`` (an optional fourth field gives a
distinct y pitch), then one comma-separated line per row.
"""

import math

import numpy as np


class InputDataError(ValueError):
    """Malformed or missing raster / log input."""


def _tokens(text):
    """P2 tokens with comments stripped, plus the comment lines themselves."""
    tokens, comments = [], []
    for line in text.splitlines():
        body, sep, comment = line.partition("#")
        if sep:
            comments.append(comment.strip())
        tokens.extend(body.split())
    return tokens, comments


def read_raster(path):
    """Return ``(values, pitch, meta)``. ``values`` is float, shape (rows, cols)."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise InputDataError(f"cannot read raster {path}: {exc.strerror}") from exc
    if text.lstrip().startswith("P2"):
        return _read_p2(text, path)
    return _read_csv(text, path)


def _read_p2(text, path):
    tokens, comments = _tokens(text)
    meta = {}
    for c in comments:
        parts = c.split()
        if len(parts) == 2:
            try:
                meta[parts[0]] = float(parts[1])
            except ValueError:
                pass
    try:
        cols, rows, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
        data = np.array(tokens[4:], dtype=float)
    except (IndexError, ValueError) as exc:
        raise InputDataError(f"{path}: malformed P2 header or data") from exc
    if data.size != rows * cols:
        raise InputDataError(f"{path}: expected {rows * cols} pixels, found {data.size}")
    if maxval <= 0 or np.any(data < 0) or np.any(data > maxval):
        raise InputDataError(f"{path}: gray levels outside [0, {maxval}]")
    if "pitch_m" not in meta:
        raise InputDataError(f"{path}: missing '# pitch_m <meters>' comment")
    meta["maxval"] = maxval
    values = data.reshape(rows, cols)
    if "phi_max" in meta:
        values = values / maxval * meta["phi_max"]
    return values, meta["pitch_m"], meta


def _read_csv(text, path):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise InputDataError(f"{path}: empty raster")
    try:
        head = [float(v) for v in lines[0].split(",")]
        rows, cols, pitch = int(head[0]), int(head[1]), head[2]
    except (ValueError, IndexError) as exc:
        raise InputDataError(f"{path}: header must be 'rows,cols,pitch_m'") from exc
    meta = {"pitch_y": head[3]} if len(head) > 3 else {}
    if len(lines) - 1 != rows:
        raise InputDataError(f"{path}: expected {rows} data rows, found {len(lines) - 1}")
    out = np.empty((rows, cols))
    for i, ln in enumerate(lines[1:]):
        try:
            row = [float(v) for v in ln.split(",")]
        except ValueError as exc:
            raise InputDataError(f"{path}: line {i + 2}: non-numeric value") from exc
        if len(row) != cols:
            raise InputDataError(f"{path}: line {i + 2}: expected {cols} values, found {len(row)}")
        out[i] = row
    return out, pitch, meta


def write_p2(path, values, pitch, phi_max=None, maxval=None):
    """Binary rasters go out as 0/1 with maxval 1; float rasters are quantized."""
    values = np.asarray(values, dtype=float)
    rows, cols = values.shape
    lines = ["P2", f"# pitch_m {pitch!r}"]
    if phi_max is None:
        maxval = maxval or max(1, int(values.max()))
        levels = np.rint(values).astype(int)
    else:
        maxval = maxval or 65535
        lines.append(f"# phi_max {phi_max!r}")
        scale = maxval / phi_max if phi_max > 0 else 0.0
        levels = np.clip(np.rint(values * scale), 0, maxval).astype(int)
    lines.append(f"{cols} {rows}")
    lines.append(str(maxval))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
        for row in levels:
            fh.write(" ".join(map(str, row)) + "\n")


def write_csv_raster(path, values, pitch, pitch_y=None):
    values = np.asarray(values, dtype=float)
    rows, cols = values.shape
    head = f"{rows},{cols},{pitch:.9g}"
    if pitch_y is not None and not math.isclose(pitch, pitch_y):
        head += f",{pitch_y:.9g}"
    with open(path, "w") as fh:
        fh.write(head + "\n")
        for row in values:
            fh.write(",".join(f"{v:.9g}" for v in row) + "\n")
