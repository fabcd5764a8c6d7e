"""Deterministic, bit-stable result serialization.

Every float is written with 17 significant digits so parsing the text
back reproduces the exact binary value.  Time series go to CSV, scalar
reports to JSON, and field snapshots to a raw little-endian block with a
JSON sidecar: magic ``HMF1``, then snapshot count and grid dimensions as
int64, then complex coefficients as interleaved float64 pairs in
(snapshot, mode, frequency) order.  The manifest is written last via an
atomic rename, so its presence marks a completed run.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np

from .spectral import FourierField, Grid

SNAPSHOT_MAGIC = b"HMF1"


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def write_csv(path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _emit_json(obj, indent: int = 0) -> str:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = [
            f"{inner}{json.dumps(str(k))}: {_emit_json(v, indent + 1)}"
            for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(parts) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        parts = [f"{inner}{_emit_json(v, indent + 1)}" for v in seq]
        return "[\n" + ",\n".join(parts) + f"\n{pad}]"
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if x != x or x in (float("inf"), float("-inf")):
            return json.dumps(str(x))
        return f"{x:.17g}"
    if isinstance(obj, complex):
        return _emit_json({"re": obj.real, "im": obj.imag}, indent)
    return json.dumps(str(obj))


def write_json(path, obj) -> None:
    Path(path).write_text(_emit_json(obj) + "\n", encoding="utf-8")


def write_snapshots(path_bin, path_sidecar, grid: Grid, times, snapshots) -> None:
    count = len(snapshots)
    dims = np.array([count, grid.n_modes, grid.n_xi], dtype="<i8")
    block = np.empty((count, grid.n_modes, grid.n_xi), dtype="<c16")
    for i, snap in enumerate(snapshots):
        block[i] = snap.coeffs
    with open(path_bin, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(dims.tobytes())
        fh.write(block.tobytes(order="C"))
    write_json(
        path_sidecar,
        {
            "format": "HMF1",
            "layout": "magic, int64[3] = (count, n_modes, n_xi), complex128 LE interleaved, snapshot/mode-major",
            "count": count,
            "n_modes": grid.n_modes,
            "n_xi": grid.n_xi,
            "grid": {
                "n_max": grid.n_max,
                "xi_max": grid.xi_max,
                "d_xi": grid.d_xi,
                "t_final": grid.t_final,
            },
            "times": [float(t) for t in times],
        },
    )


def read_snapshots(path_bin, grid: Grid) -> list[FourierField]:
    raw = Path(path_bin).read_bytes()
    if raw[:4] != SNAPSHOT_MAGIC:
        raise ValueError(f"bad snapshot magic {raw[:4]!r}")
    dims = np.frombuffer(raw, dtype="<i8", count=3, offset=4)
    count, n_modes, n_xi = (int(d) for d in dims)
    data = np.frombuffer(raw, dtype="<c16", offset=4 + 24, count=count * n_modes * n_xi)
    block = data.reshape(count, n_modes, n_xi)
    return [FourierField(grid, block[i].copy()) for i in range(count)]


def sha256_of(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest_atomic(out_dir, manifest: dict) -> Path:
    out_dir = Path(out_dir)
    files = sorted(
        str(p.relative_to(out_dir))
        for p in out_dir.rglob("*")
        if p.is_file() and p.relative_to(out_dir).parts[0] not in ("manifest.json", "manifest.json.tmp")
    )
    manifest["files"] = {name: sha256_of(out_dir / name) for name in files}
    tmp = out_dir / "manifest.json.tmp"
    write_json(tmp, manifest)
    final = out_dir / "manifest.json"
    os.replace(tmp, final)
    return final
