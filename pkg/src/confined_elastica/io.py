"""Plain-text curve snapshots, energy logs and JSON summaries."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .spline_fe import DiscreteCurve, Mesh

__all__ = [
    "ENERGY_COLUMNS",
    "SnapshotError",
    "write_snapshot",
    "read_snapshot",
    "write_energy_csv",
    "read_energy_csv",
    "write_json",
    "format_float",
]

ENERGY_COLUMNS = (
    "step", "time", "E_bend", "E_conf", "E_total", "dtu_norm", "arclen_violation", "max_penetration",
)


class SnapshotError(ValueError):
    def __init__(self, path, lineno, message):
        super().__init__(f"{path}:{lineno}: {message}")
        self.lineno = lineno


def format_float(x) -> str:
    # 17 significant digits round-trip every double
    return format(float(x), ".17g")


def write_snapshot(path, curve: DiscreteCurve, length: float | None = None, step: int = 0) -> Path:
    path = Path(path)
    mesh = curve.mesh
    L = mesh.length if length is None else float(length)
    lines = [
        f"# N {mesh.n_elements}",
        f"# closed {int(mesh.closed)}",
        f"# length {format_float(L)}",
        f"# step {int(step)}",
    ]
    if not (mesh.is_uniform() and mesh.nodes[0] == 0.0 and mesh.nodes[-1] == L):
        lines.append("# nodes " + " ".join(format_float(x) for x in mesh.nodes))
    for i, (p, d) in enumerate(zip(curve.positions, curve.tangents)):
        lines.append(f"{i} " + " ".join(format_float(v) for v in (*p, *d)))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_snapshot(path):
    """Return ``(curve, meta)``; ``meta`` has ``N``, ``closed``, ``length``, ``step``."""
    path = Path(path)
    meta = {}
    rows = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if not parts:
                continue
            key, values = parts[0], parts[1:]
            try:
                if key in ("N", "step"):
                    meta[key] = int(values[0])
                elif key == "closed":
                    meta[key] = bool(int(values[0]))
                elif key == "length":
                    meta[key] = float(values[0])
                elif key == "nodes":
                    meta[key] = np.array([float(v) for v in values])
            except (IndexError, ValueError):
                raise SnapshotError(path, lineno, f"malformed header line {line!r}") from None
            continue
        cols = line.split()
        if len(cols) != 7:
            raise SnapshotError(path, lineno, f"expected 7 columns, got {len(cols)}")
        try:
            idx = int(cols[0])
            vals = [float(v) for v in cols[1:]]
        except ValueError:
            raise SnapshotError(path, lineno, "non-numeric entry") from None
        if idx != len(rows):
            raise SnapshotError(path, lineno, f"expected node index {len(rows)}, got {idx}")
        rows.append(vals)
    for key in ("N", "closed", "length"):
        if key not in meta:
            raise SnapshotError(path, 0, f"missing header field {key!r}")
    meta.setdefault("step", 0)
    N, closed = meta["N"], meta["closed"]
    if "nodes" in meta:
        mesh = Mesh(meta.pop("nodes"), closed)
    else:
        mesh = Mesh.uniform(N, meta["length"], closed)
    if len(rows) != mesh.n_nodes:
        raise SnapshotError(path, 0, f"expected {mesh.n_nodes} node lines, got {len(rows)}")
    data = np.array(rows).reshape(-1, 6)
    return DiscreteCurve(mesh, data[:, :3], data[:, 3:]), meta


def write_energy_csv(path, history) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ENERGY_COLUMNS)
        for rec in history:
            writer.writerow([
                rec.k,
                format_float(rec.time),
                format_float(rec.E_bend),
                format_float(rec.E_conf),
                format_float(rec.E_total),
                format_float(rec.dtu_norm),
                format_float(rec.arclen_violation),
                format_float(rec.max_penetration),
            ])
    return path


def read_energy_csv(path) -> dict:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    return {col: np.array([float(r[col]) for r in rows]) for col in ENERGY_COLUMNS}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        return obj if math.isfinite(obj) else None
    return obj


def write_json(path, data) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")
    return path
