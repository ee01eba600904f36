"""CSV and JSON writers/readers for trajectories, spectra and tables.

CSVs use ``%.17g`` so floats round-trip exactly, ``\\n`` line endings and a
header row.  Trajectory metadata goes to a ``.meta.json`` sidecar.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .exceptions import StructuralError, ValidationError
from .signals import Trajectory
from .spectra import SpectrumModel


def _fmt(x) -> str:
    return "%.17g" % x


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path


def write_trajectory_csv(traj: Trajectory, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write("t,value\n")
        for t, v in zip(traj.times, traj.values):
            fh.write(f"{_fmt(t)},{_fmt(v)}\n")
    write_json(path.with_suffix(".meta.json"), traj.meta)
    return path


def read_trajectory_csv(path) -> Trajectory:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["t", "value"]:
        raise StructuralError(f"{path}: expected header 't,value'")
    data = np.array(rows[1:], dtype=float).reshape(-1, 2)
    meta_path = path.with_suffix(".meta.json")
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    return Trajectory(data[:, 0], data[:, 1], meta)


def write_spectrum_csv(spectrum: SpectrumModel, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write("index_label,eigenvalue,source\n")
        for i, ev in enumerate(spectrum.eigenvalues):
            if spectrum.labels is not None:
                lab = spectrum.labels[i]
                label = ";".join(f"{k}={v}" for k, v in lab.items()) if isinstance(lab, dict) else str(lab)
            else:
                label = str(i + 1)
            fh.write(f"{label},{_fmt(ev)},{spectrum.source}\n")
    return path


def read_spectrum_csv(path) -> SpectrumModel:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["index_label", "eigenvalue", "source"]:
        raise StructuralError(f"{path}: expected header 'index_label,eigenvalue,source'")
    body = rows[1:]
    sources = {r[2] for r in body}
    if len(sources) > 1:
        raise ValidationError("mixed sources in one spectrum file")
    labels = []
    for r in body:
        if "=" in r[0]:
            labels.append({k: int(v) for k, v in (p.split("=") for p in r[0].split(";"))})
        else:
            labels.append(r[0])
    return SpectrumModel(np.array([float(r[1]) for r in body]), labels,
                         sources.pop() if sources else "supplied")


def write_table_csv(columns: dict, path) -> Path:
    """Columns of equal length, written in dict order."""
    path = Path(path)
    names = list(columns)
    arrays = [np.asarray(columns[k]) for k in names]
    if len({a.size for a in arrays}) > 1:
        raise StructuralError("table columns differ in length")
    with path.open("w", newline="") as fh:
        fh.write(",".join(names) + "\n")
        for row in zip(*arrays):
            fh.write(",".join(_fmt(v) if np.isscalar(v) and not isinstance(v, str) else str(v)
                              for v in row) + "\n")
    return path


def read_table_csv(path) -> dict:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    names = rows[0]
    data = np.array(rows[1:], dtype=float).reshape(-1, len(names))
    return {k: data[:, i] for i, k in enumerate(names)}
