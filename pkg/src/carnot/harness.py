"""Lattice balls, distortion measurement, epsilon sweeps and run reports."""
from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .algebra import StratifiedAlgebra, heisenberg
from .nets import PointCloud

MAX_BALL_POINTS = 2_000_000
EXHAUSTIVE_LIMIT = 3000


class BallTooLargeError(MemoryError):
    def __init__(self, estimate: int, limit: int):
        super().__init__(f"lattice ball would hold about {estimate} points, above the limit of {limit}")
        self.estimate = estimate
        self.limit = limit


def heisenberg_ball_estimate(R: float) -> int:
    """Lattice count of the quasinorm ball: unit-ball volume is 2/3 and the lattice has unit covolume."""
    return int(math.ceil(2.0 / 3.0 * R**4))


def generate_heisenberg_ball(R: float, max_points: int = MAX_BALL_POINTS) -> PointCloud:
    """Points of the integer Heisenberg lattice with quasinorm ``< R``.

    The lattice generated by ``exp(X1)`` and ``exp(X2)`` is
    ``{(a, b, c) : a, b in Z, c in ab/2 + Z}`` in exponential coordinates,
    so it is enumerated directly instead of by word search. Distinct points
    are at quasimetric distance at least 1.
    """
    if R < 2:
        raise ValueError("R must be at least 2")
    estimate = heisenberg_ball_estimate(R)
    if estimate > max_points:
        raise BallTooLargeError(estimate, max_points)
    rows = []
    top = int(math.ceil(R))
    for a in range(-top, top + 1):
        for b in range(-top, top + 1):
            rem = R - abs(a) - abs(b)
            if rem <= 0:
                continue
            shift = a * b / 2.0
            # |c|^(1/2) < rem  <=>  |c| < rem^2
            lim = rem * rem
            lo = math.floor(-lim - shift) - 1
            hi = math.ceil(lim - shift) + 1
            ks = np.arange(lo, hi + 1)
            c = shift + ks
            keep = np.abs(c) < lim
            for cv in c[keep]:
                rows.append((float(a), float(b), float(cv)))
    pts = np.array(sorted(rows, key=lambda r: (abs(r[0]) + abs(r[1]) + math.sqrt(abs(r[2])), r)))
    return PointCloud.from_carnot(heisenberg(), pts, name=f"heisenberg-ball-R{R:g}")


@dataclass
class DistortionReport:
    distortion: float
    expansion: float
    contraction: float
    expansion_pair: tuple[int, int]
    contraction_pair: tuple[int, int]
    exponent: float
    pairs: int
    exhaustive: bool
    runtime: float

    def to_json(self, include_runtime: bool = False) -> dict:
        out = {"distortion": _finite(self.distortion), "expansion": _finite(self.expansion),
               "contraction": _finite(self.contraction),
               "expansion_pair": list(self.expansion_pair), "contraction_pair": list(self.contraction_pair),
               "exponent": self.exponent, "pairs": self.pairs, "exhaustive": self.exhaustive}
        if include_runtime:
            out["runtime"] = self.runtime
        return out


def _finite(x: float):
    return x if math.isfinite(x) else "inf"


def pair_ratio(cloud: PointCloud, values: np.ndarray, i: int, j: int, exponent: float) -> float:
    """``|f(p_i) - f(p_j)| / d(p_i, p_j)^exponent``."""
    num = float(np.linalg.norm(values[i] - values[j]))
    return num / cloud.distance(i, j) ** exponent


def _ratios_from(cloud: PointCloud, values: np.ndarray, i: int, idx: np.ndarray, exponent: float) -> np.ndarray:
    d = cloud.distances_from(i, idx)
    num = np.linalg.norm(values[idx] - values[i], axis=1)
    return num / d**exponent


def _row_distances(values: np.ndarray, sq: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """``|v_i - v_j|`` for ``i`` in ``rows`` and all ``j``.

    Uses the Gram expansion and recomputes directly every entry where it
    cancels badly, so exact collisions still come out as zero.
    """
    diff2 = sq[rows, None] + sq[None, :] - 2.0 * (values[rows] @ values.T)
    scale = sq[rows, None] + sq[None, :]
    bad = diff2 <= 1e-8 * scale
    if np.any(bad):
        r, c = np.nonzero(bad)
        step = max(1, 4_000_000 // max(values.shape[1], 1))
        for k in range(0, len(r), step):
            rr, cc = r[k:k + step], c[k:k + step]
            diff2[rr, cc] = np.sum((values[rows[rr]] - values[cc]) ** 2, axis=1)
    return np.sqrt(np.clip(diff2, 0.0, None))


def distortion(cloud: PointCloud, embedding, exponent: float = 1.0, max_exhaustive: int = EXHAUSTIVE_LIMIT,
               samples: int = 1_000_000, seed: int = 0) -> DistortionReport:
    """Ratio of the largest to the smallest ``|f(p)-f(q)| / d(p,q)^exponent`` over pairs.

    ``embedding`` is either an array of embedded points aligned with the
    cloud or a callable on the point coordinates. Every pair is visited when
    the cloud is small; otherwise pairs are sampled and both extremes are
    refined by scanning all partners of their endpoints.
    """
    t0 = time.perf_counter()
    n = len(cloud)
    if n < 2:
        raise ValueError("distortion needs at least two points")
    values = np.asarray(embedding(cloud.points) if callable(embedding) else embedding, dtype=float)
    if values.shape[0] != n:
        raise ValueError("embedding values must align with the cloud")
    values = values.reshape(n, -1)
    hi, hi_pair = -np.inf, (0, 1)
    lo, lo_pair = np.inf, (0, 1)

    def absorb(i, idx, r):
        nonlocal hi, hi_pair, lo, lo_pair
        if len(r) == 0:
            return
        a, b = int(np.argmax(r)), int(np.argmin(r))
        if r[a] > hi:
            hi, hi_pair = float(r[a]), (i, int(idx[a]))
        if r[b] < lo:
            lo, lo_pair = float(r[b]), (i, int(idx[b]))

    exhaustive = n <= max_exhaustive
    if exhaustive:
        count = n * (n - 1) // 2
        sq = np.einsum("ij,ij->i", values, values)
        block = max(1, 2_000_000 // n)
        for start in range(0, n - 1, block):
            rows = np.arange(start, min(n - 1, start + block))
            num = _row_distances(values, sq, rows)
            for a, i in enumerate(rows):
                idx = np.arange(i + 1, n)
                d = cloud.distances_from(int(i), idx)
                absorb(int(i), idx, num[a, i + 1:] / d**exponent)
    else:
        rng = np.random.default_rng(seed)
        I = rng.integers(0, n, samples)
        J = rng.integers(0, n - 1, samples)
        J = J + (J >= I)
        d = cloud.metric(cloud.points[I], cloud.points[J])
        r = np.linalg.norm(values[I] - values[J], axis=1) / d**exponent
        a, b = int(np.argmax(r)), int(np.argmin(r))
        hi, hi_pair, lo, lo_pair = float(r[a]), (int(I[a]), int(J[a])), float(r[b]), (int(I[b]), int(J[b]))
        count = samples
        for end in {*hi_pair, *lo_pair}:
            idx = np.delete(np.arange(n), end)
            absorb(end, idx, _ratios_from(cloud, values, end, idx, exponent))
            count += len(idx)
    dist = math.inf if lo <= 0 else hi / lo
    return DistortionReport(dist, hi, lo, hi_pair, lo_pair, float(exponent), count, exhaustive,
                            time.perf_counter() - t0)


# --- sweeps --------------------------------------------------------------


@dataclass
class SweepRow:
    eps: float
    distortion: float
    holder: float
    ok: bool = True
    error: str = ""

    def to_json(self) -> dict:
        return {"eps": self.eps, "distortion": _finite(self.distortion), "holder": _finite(self.holder),
                "ok": self.ok, "error": self.error}


@dataclass
class SlopeFit:
    slope: float
    stderr: float
    intercept: float
    used: int
    dropped: int

    def to_json(self) -> dict:
        return {"slope": self.slope, "stderr": self.stderr, "intercept": self.intercept,
                "used": self.used, "dropped": self.dropped}


def sweep_epsilon(cloud: PointCloud, builder: Callable[[float], object], eps_list,
                  max_exhaustive: int = EXHAUSTIVE_LIMIT, seed: int = 0) -> list[SweepRow]:
    """Distortion of ``builder(eps)`` against ``d^{1-eps}`` for each ``eps``.

    ``builder`` returns embedded values aligned with the cloud or a callable
    on coordinates. Cells that raise are kept as rows marked not ok; a
    collapsed pair gives an infinite distortion but keeps the Hoelder column.
    """
    eps_list = list(eps_list)
    if len(eps_list) < 3:
        raise ValueError("a sweep needs at least three epsilon values")
    rows = []
    for eps in eps_list:
        try:
            emb = builder(eps)
            rep = distortion(cloud, emb, 1.0 - eps, max_exhaustive=max_exhaustive, seed=seed)
            note = "" if math.isfinite(rep.distortion) else "collapsed pair"
            rows.append(SweepRow(float(eps), rep.distortion, rep.expansion, True, note))
        except Exception as exc:  # a failing cell must not sink the sweep
            rows.append(SweepRow(float(eps), math.nan, math.nan, False, f"{type(exc).__name__}: {exc}"))
    return rows


def fit_loglog_slope(rows, key: str = "distortion") -> SlopeFit:
    """Least-squares slope of ``log(value)`` against ``log(1/eps)`` over usable rows.

    Rows may be :class:`SweepRow` objects or ``(eps, value)`` pairs. Rows
    whose value is not finite and positive are dropped and counted.
    """
    pts = []
    dropped = 0
    for row in rows:
        if isinstance(row, SweepRow):
            eps, val, ok = row.eps, getattr(row, key), row.ok
        else:
            eps, val = row
            ok = True
        if ok and eps > 0 and val is not None and math.isfinite(val) and val > 0:
            pts.append((math.log(1.0 / eps), math.log(val)))
        else:
            dropped += 1
    if len(pts) < 2:
        raise ValueError("fewer than two usable rows for a slope fit")
    x, y = np.array(pts).T
    X = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    dof = len(x) - 2
    if dof > 0:
        s2 = float(resid @ resid) / dof
        stderr = math.sqrt(s2 / float(np.sum((x - x.mean()) ** 2)))
    else:
        stderr = 0.0
    return SlopeFit(float(coef[0]), stderr, float(coef[1]), len(pts), dropped)


# --- reports -------------------------------------------------------------


def file_digest(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


class MissingArtifactsError(FileNotFoundError):
    def __init__(self, directory: Path, expected: list[str]):
        super().__init__(f"{directory}: no run artifacts found; expected any of {', '.join(expected)}")
        self.expected = expected


REPORT_ARTIFACTS = ("validate.json", "net.json", "color.json", "extend_frame.json", "oscillator.json",
                    "embed.json", "distortion.json", "sweep.json")


def _suite_verdict(name: str, data: dict) -> bool:
    for key in ("ok", "pass", "passed"):
        if key in data:
            return bool(data[key])
    if name == "distortion.json":
        return data.get("distortion") != "inf"
    if name == "sweep.json":
        return all(r.get("ok", False) for r in data.get("rows", []))
    return True


def build_report(run_dir) -> dict:
    """Collect the artifacts of a run directory into one summary with hashes and verdicts."""
    run_dir = Path(run_dir)
    present = [name for name in REPORT_ARTIFACTS if (run_dir / name).is_file()]
    if not present:
        raise MissingArtifactsError(run_dir, list(REPORT_ARTIFACTS))
    suites = {}
    for name in present:
        data = json.loads((run_dir / name).read_text(encoding="utf-8"))
        suites[name] = {"sha256": file_digest(run_dir / name), "pass": _suite_verdict(name, data),
                        "config": data.get("config", {})}
    return {"artifacts": present, "suites": suites, "all_pass": all(s["pass"] for s in suites.values())}


def render_report(report: dict) -> str:
    lines = ["run report", ""]
    for name, info in report["suites"].items():
        lines.append(f"{'PASS' if info['pass'] else 'FAIL'}  {name}  {info['sha256'][:12]}")
    lines.append("")
    lines.append("overall: " + ("PASS" if report["all_pass"] else "FAIL"))
    return "\n".join(lines) + "\n"
