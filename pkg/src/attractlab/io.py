"""Output helpers: CSV with fixed conventions, JSON, heatmap grids and PPM images."""
import hashlib
import json
import os

import numpy as np

VERSION = "0.1.0"


def fmt(value):
    """17 significant digits; infinities and NaN spelled out."""
    v = float(value)
    if np.isnan(v):
        return "nan"
    if np.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.17g}"


def _cell(v):
    if isinstance(v, (str, bool, np.bool_)):
        return str(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return fmt(v)


def write_csv(path, header, rows, meta=None):
    """Write a CSV with LF endings; ``meta`` becomes a leading '#' comment line."""
    lines = []
    if meta:
        lines.append(_meta_line(meta))
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path):
    """Return (header, rows of floats) skipping comment lines."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
    header = lines[0].split(",")
    rows = [[float(c) for c in ln.split(",")] for ln in lines[1:] if ln]
    return header, np.array(rows)


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"not serializable: {type(o)}")


def write_json(path, obj):
    with open(path, "w", newline="\n") as fh:
        fh.write(canonical_json(obj))


def config_hash(resolved):
    return hashlib.sha256(canonical_json(resolved).encode()).hexdigest()[:16]


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def _meta_line(meta):
    return "# " + ", ".join(f"{k}={meta[k]}" for k in sorted(meta))


def write_heatmap(path, values, bounds, meta=None):
    """Plain text grid: a header with width, height and bounds, then one row per line."""
    values = np.asarray(values, dtype=float)
    h, w = values.shape
    lines = [_meta_line(meta)] if meta else []
    lines += [f"width {w}", f"height {h}",
             "bounds " + " ".join(fmt(b) for b in bounds)]
    for row in values:
        lines.append(" ".join(fmt(v) for v in row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# five-stop ramp, dark blue to yellow; NaN and infinities are drawn grey
RAMP = np.array([[13, 8, 135], [126, 3, 168], [204, 71, 120], [248, 149, 64], [240, 249, 33]], dtype=float)


def ramp_color(t):
    t = np.clip(t, 0.0, 1.0) * (len(RAMP) - 1)
    i = np.minimum(np.floor(t).astype(int), len(RAMP) - 2)
    frac = (t - i)[..., None]
    return np.round(RAMP[i] * (1 - frac) + RAMP[i + 1] * frac).astype(np.uint8)


def write_ppm(path, values, meta=None):
    """Binary P6 image of a scalar grid scaled to its finite range."""
    values = np.asarray(values, dtype=float)
    finite = np.isfinite(values)
    lo = values[finite].min() if finite.any() else 0.0
    hi = values[finite].max() if finite.any() else 1.0
    span = hi - lo if hi > lo else 1.0
    img = ramp_color(np.where(finite, (values - lo) / span, 0.0))
    img[~finite] = 128
    h, w = values.shape
    with open(path, "wb") as fh:
        comment = _meta_line(meta) + "\n" if meta else ""
        fh.write(f"P6\n{comment}{w} {h}\n255\n".encode())
        fh.write(img[::-1].tobytes())
