"""CSV tables with versioned header comments, plain PPM heatmaps, artifact manifests."""

from __future__ import annotations

import csv
import hashlib
import os
from pathlib import Path

import numpy as np

CSV_VERSION = 1
MID_GRAY = 128


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, schema: str, columns, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write(f"# rddi-{schema} v{CSV_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def read_csv(path) -> tuple[str, list[dict[str, str]]]:
    """Return the schema comment line and the rows as dicts."""
    with open(path, newline="") as fh:
        schema = fh.readline().strip()
        return schema, list(csv.DictReader(fh))


def diverging_rgb(values: np.ndarray) -> np.ndarray:
    """Map values in [-1, 1] linearly onto blue -> mid-gray -> red; 0 is neutral gray."""
    v = np.clip(np.asarray(values, dtype=float), -1.0, 1.0)
    pos = np.clip(v, 0.0, None)
    neg = np.clip(-v, 0.0, None)
    r = MID_GRAY + (255 - MID_GRAY) * pos - MID_GRAY * neg
    g = MID_GRAY - MID_GRAY * pos - MID_GRAY * neg
    b = MID_GRAY - MID_GRAY * pos + (255 - MID_GRAY) * neg
    return np.rint(np.stack([r, g, b], axis=-1)).astype(int)


def write_ppm(path, values: np.ndarray, comment: str = "") -> Path:
    """Plain (P3) pixmap of ``values / max|values|``; an all-zero map is uniform gray."""
    values = np.asarray(values, dtype=float)
    peak = float(np.max(np.abs(values))) if values.size else 0.0
    normed = values / peak if peak > 0 else np.zeros_like(values)
    rgb = diverging_rgb(normed)
    h, w = values.shape
    lines = ["P3", "# diverging ramp blue-gray-red, linear in value/max|value|"]
    if comment:
        lines.append(f"# {comment}")
    lines += [f"# max|value| = {peak!r}", f"{w} {h}", "255"]
    for row in rgb:
        lines.append(" ".join(f"{r} {g} {b}" for r, g, b in row))
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_ppm(path) -> np.ndarray:
    tokens = []
    for line in Path(path).read_text().splitlines():
        tokens += line.split("#", 1)[0].split()
    if tokens[0] != "P3":
        raise ValueError(f"{path}: not a plain PPM")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    data = np.array([int(t) for t in tokens[4:]])
    if data.size != w * h * 3 or data.max(initial=0) > maxval:
        raise ValueError(f"{path}: malformed pixel data")
    return data.reshape(h, w, 3)


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(path, stages: list[tuple[str, str]], files) -> Path:
    """Stage status lines then one ``file <sha256> <relative path>`` line per artifact."""
    path = Path(path)
    root = path.parent
    lines = ["# rddi-manifest v1"]
    lines += [f"stage {name} {status}" for name, status in stages]
    for f in sorted(set(Path(p) for p in files)):
        rel = Path(os.path.relpath(f, root)).as_posix()
        lines.append(f"file {sha256(f)} {rel}")
    path.write_text("\n".join(lines) + "\n")
    return path
