"""JSON and CSV helpers shared by the command-line front end."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .pingpong import PingPongCurve


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), indent=2, allow_nan=False) + "\n"


def write_json(path: Path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj), encoding="utf-8")
    return path


def read_json(path: Path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_csv(path: Path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def read_curves_csv(path: Path) -> list:
    """Ping-pong curves from a CSV with columns j, z, n, A (one curve per distinct A)."""
    groups = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(reader.fieldnames) != {"j", "z", "n", "A"}:
            raise ValueError(f"{path}: expected columns j, z, n, A")
        for row in reader:
            a = float(row["A"])
            groups.setdefault(a, []).append((int(row["j"]), float(row["z"]), int(row["n"])))
    curves = []
    for a in sorted(groups):
        rows = sorted(groups[a])
        shots = {r[2] for r in rows}
        if len(shots) != 1:
            raise ValueError(f"{path}: mixed shot counts at A={a}")
        curves.append(PingPongCurve([r[0] for r in rows], [r[1] for r in rows], shots.pop(), a))
    return curves


def curves_rows(curves) -> list:
    return [(int(j), float(z), int(c.shots), float(c.amplitude)) for c in curves for j, z in zip(c.j, c.z)]
