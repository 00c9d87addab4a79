"""CSV and JSON readers and writers for clouds, frames and embeddings."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .algebra import StratifiedAlgebra


def coordinate_header(alg: StratifiedAlgebra) -> list[str]:
    return [f"x_{r}_{i}" for (r, i) in alg.labels]


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _fmt(x: float) -> str:
    return repr(float(x))


def write_points_csv(path, points: np.ndarray, header: list[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in np.atleast_2d(points):
            w.writerow([_fmt(x) for x in row])
    return path


def read_points_csv(path) -> tuple[list[str], np.ndarray]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    header, body = rows[0], rows[1:]
    return header, np.array([[float(x) for x in r] for r in body], dtype=float).reshape(len(body), len(header))


def write_indexed_csv(path, values: np.ndarray, prefix: str = "y") -> Path:
    """One row per point: index followed by the coordinates."""
    values = np.atleast_2d(values)
    header = ["index"] + [f"{prefix}{j}" for j in range(values.shape[1])]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i, row in enumerate(values):
            w.writerow([i] + [_fmt(x) for x in row])
    return path


def read_indexed_csv(path) -> np.ndarray:
    header, data = read_points_csv(path)
    if header[0] != "index":
        raise ValueError(f"{path}: first column must be 'index'")
    order = np.argsort(data[:, 0], kind="stable")
    return data[order, 1:]


def write_frame_csv(path, vectors: np.ndarray) -> Path:
    """Rows ``(point, field, v_1..v_D)`` for a frame of shape ``(N, m, D)``."""
    vectors = np.asarray(vectors)
    N, m, D = vectors.shape
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["point", "field"] + [f"v{j}" for j in range(D)])
        for i in range(N):
            for a in range(m):
                w.writerow([i, a] + [_fmt(x) for x in vectors[i, a]])
    return path


def read_frame_csv(path) -> np.ndarray:
    _, data = read_points_csv(path)
    N = int(data[:, 0].max()) + 1
    m = int(data[:, 1].max()) + 1
    out = np.zeros((N, m, data.shape[1] - 2))
    out[data[:, 0].astype(int), data[:, 1].astype(int)] = data[:, 2:]
    return out
