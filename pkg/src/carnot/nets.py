"""Point clouds, greedy nets, colorings and doubling diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .algebra import StratifiedAlgebra

Metric = Callable[[np.ndarray, np.ndarray], np.ndarray]


def euclidean_metric(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.linalg.norm(np.asarray(a, float) - np.asarray(b, float), axis=-1)


def quasimetric(alg: StratifiedAlgebra, p, q, exact: bool = False):
    """``N(p^{-1} q)``; exact when ``exact=True`` and the inputs are rational."""
    if exact:
        return alg.quasinorm(alg.multiply(alg.inverse(tuple(p)), tuple(q)), exact=True)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return alg.quasinorm(alg.multiply(-p, q))


def carnot_metric(alg: StratifiedAlgebra) -> Metric:
    """Vectorized quasimetric; it is symmetric since ``N(-x) = N(x)``."""
    flt = alg.with_mode("floating")

    def metric(a, b):
        return quasimetric(flt, a, b)

    return metric


@dataclass
class PointCloud:
    """Finite point set with a distance oracle acting on coordinate arrays."""

    points: np.ndarray
    metric: Metric = euclidean_metric
    quasi: bool = False
    n_h: int | None = None
    name: str = ""

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))

    def __len__(self):
        return self.points.shape[0]

    @classmethod
    def from_carnot(cls, alg: StratifiedAlgebra, points, name: str = "") -> "PointCloud":
        return cls(np.asarray(points, dtype=float), carnot_metric(alg), quasi=True, n_h=alg.n_h, name=name)

    def distances_from(self, i: int, idx: np.ndarray | None = None) -> np.ndarray:
        targets = self.points if idx is None else self.points[idx]
        return self.metric(self.points[i][None, :], targets)

    def distances_to_point(self, x, idx: np.ndarray | None = None) -> np.ndarray:
        targets = self.points if idx is None else self.points[idx]
        return self.metric(np.asarray(x, float)[None, :], targets)

    def distance(self, i: int, j: int) -> float:
        return float(self.metric(self.points[i], self.points[j]))

    def distance_matrix(self, idx: np.ndarray | None = None) -> np.ndarray:
        idx = np.arange(len(self)) if idx is None else np.asarray(idx)
        P = self.points[idx]
        out = np.empty((len(idx), len(idx)))
        for a in range(len(idx)):
            out[a] = self.metric(P[a][None, :], P)
        return out

    def check_metric(self, samples: int = 1000, rng: np.random.Generator | None = None,
                     tol: float = 1e-9) -> list[str]:
        """Sampled check of the metric axioms; triangle skipped for quasi-metrics."""
        rng = rng or np.random.default_rng(0)
        n = len(self)
        problems = []
        if n == 0:
            return problems
        i, j, k = (rng.integers(0, n, samples) for _ in range(3))
        P = self.points
        dij = self.metric(P[i], P[j])
        dji = self.metric(P[j], P[i])
        if np.any(dij < 0):
            problems.append("negative distance")
        if np.any(np.abs(dij - dji) > tol * (1 + np.abs(dij))):
            problems.append("asymmetric distance")
        if np.any(self.metric(P[i], P[i]) > tol):
            problems.append("nonzero self-distance")
        if not self.quasi:
            djk = self.metric(P[j], P[k])
            dik = self.metric(P[i], P[k])
            if np.any(dik > dij + djk + tol * (1 + dik)):
                problems.append("triangle inequality fails")
        return problems


@dataclass
class Net:
    cloud: PointCloud
    delta: float
    members: np.ndarray

    def __len__(self):
        return len(self.members)

    @property
    def points(self) -> np.ndarray:
        return self.cloud.points[self.members]

    def to_json(self) -> dict:
        return {"delta": self.delta, "members": [int(i) for i in self.members]}


@dataclass
class NetReport:
    separation: list[tuple[int, int, float]] = field(default_factory=list)
    covering: list[tuple[int, float]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.separation and not self.covering

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "separation_violations": [[int(a), int(b), float(d)] for a, b, d in self.separation],
            "covering_violations": [[int(a), float(d)] for a, d in self.covering],
        }


def greedy_maximal_net(cloud: PointCloud, delta: float, order: np.ndarray | None = None) -> Net:
    """Scan points in order; keep a point unless it lies within ``delta`` of a kept one."""
    if len(cloud) == 0:
        raise ValueError("cannot build a net over an empty cloud")
    if delta <= 0:
        raise ValueError("delta must be positive")
    order = np.arange(len(cloud)) if order is None else np.asarray(order)
    covered = np.zeros(len(cloud), dtype=bool)
    members = []
    for i in order:
        if covered[i]:
            continue
        members.append(int(i))
        covered |= cloud.distances_from(int(i)) < delta
    return Net(cloud, float(delta), np.array(members, dtype=int))


def verify_net(net: Net, check_covering: bool = True, sep: float | None = None) -> NetReport:
    """Exhaustive separation check among members and covering of the parent cloud."""
    sep = net.delta if sep is None else sep
    rep = NetReport()
    cloud, mem = net.cloud, net.members
    for a_pos, a in enumerate(mem):
        if a_pos + 1 < len(mem):
            d = cloud.distances_from(int(a), mem[a_pos + 1:])
            for off in np.nonzero(d < sep)[0]:
                rep.separation.append((int(a), int(mem[a_pos + 1 + off]), float(d[off])))
    if check_covering and len(mem):
        best = np.full(len(cloud), np.inf)
        for a in mem:
            best = np.minimum(best, cloud.distances_from(int(a)))
        for i in np.nonzero(best > net.delta * (1 + 1e-12))[0]:
            rep.covering.append((int(i), float(best[i])))
    return rep


def volumetric_bound(R: float, delta: float, n_h: int) -> float:
    return (2.0 * R / delta + 1.0) ** n_h


def ball_count(net: Net, R: float, center) -> int:
    d = net.cloud.distances_to_point(center, net.members)
    return int(np.sum(d <= R))


def ball_count_check(net: Net, R: float, center, n_h: int | None = None) -> bool:
    """Whether ``|N_delta ∩ B_R(center)| <= (2R/delta + 1)^{n_h}``."""
    n_h = net.cloud.n_h if n_h is None else n_h
    if n_h is None:
        raise ValueError("homogeneous dimension required for the volumetric bound")
    return ball_count(net, R, center) <= volumetric_bound(R, net.delta, n_h)


def locbd_violations(net: Net, radii, centers=None, n_h: int | None = None) -> list[tuple[int, float, int]]:
    """Centers (cloud indices) and radii where the volumetric bound fails."""
    centers = net.members if centers is None else centers
    out = []
    for c in centers:
        for R in radii:
            cnt = ball_count(net, R, net.cloud.points[int(c)])
            if cnt > volumetric_bound(R, net.delta, n_h or net.cloud.n_h):
                out.append((int(c), float(R), cnt))
    return out


@dataclass
class Coloring:
    net: Net
    colors: np.ndarray
    coarse_sep: float

    @property
    def n_colors(self) -> int:
        return int(self.colors.max()) + 1 if len(self.colors) else 0

    def classes(self) -> list[np.ndarray]:
        """Cloud indices of the members in each color class."""
        return [self.net.members[self.colors == c] for c in range(self.n_colors)]

    def class_nets(self) -> list[Net]:
        return [Net(self.net.cloud, self.coarse_sep, cls) for cls in self.classes()]

    def to_json(self) -> dict:
        return {
            "coarse_sep": self.coarse_sep,
            "n_colors": self.n_colors,
            "colors": {str(int(m)): int(c) for m, c in zip(self.net.members, self.colors)},
        }


def color_net(net: Net, coarse_sep: float) -> Coloring:
    """Greedy coloring in member order so each class is ``coarse_sep``-separated."""
    mem = net.members
    colors = np.full(len(mem), -1, dtype=int)
    for a in range(len(mem)):
        if a:
            d = net.cloud.distances_from(int(mem[a]), mem[:a])
            used = set(colors[:a][d < coarse_sep].tolist())
        else:
            used = set()
        c = 0
        while c in used:
            c += 1
        colors[a] = c
    return Coloring(net, colors, float(coarse_sep))


def coloring_bound(net: Net, coarse_sep: float) -> int:
    """``1 + max`` number of other members closer than ``coarse_sep``."""
    worst = 0
    for a in net.members:
        d = net.cloud.distances_from(int(a), net.members)
        worst = max(worst, int(np.sum(d < coarse_sep)) - 1)
    return worst + 1


@dataclass(frozen=True)
class DoublingProfile:
    K: float
    n_h: int | None
    max_level: int
    worst_center: int

    def to_json(self) -> dict:
        return {"K": self.K, "n_h": self.n_h, "max_level": self.max_level, "worst_center": self.worst_center}


def doubling_profile(net: Net, max_level: int = 4, centers=None) -> DoublingProfile:
    """Smallest ``K`` with ``|N ∩ B_{2^m delta}(x)| <= K^{m+1}`` on the given centers."""
    centers = net.members if centers is None else np.asarray(centers)
    K, worst = 1.0, -1
    for c in centers:
        d = net.cloud.distances_to_point(net.cloud.points[int(c)], net.members)
        for m in range(max_level + 1):
            cnt = int(np.sum(d <= 2**m * net.delta))
            k_here = cnt ** (1.0 / (m + 1))
            if k_here > K:
                K, worst = k_here, int(c)
    return DoublingProfile(float(K), net.cloud.n_h, max_level, worst)


@dataclass(frozen=True)
class Calibration:
    c_low: float
    c_high: float
    pairs: int
    infeasible: int

    def to_json(self) -> dict:
        return {"c_low": self.c_low, "c_high": self.c_high, "pairs": self.pairs, "infeasible": self.infeasible}


def calibrate_equivalence(alg: StratifiedAlgebra, points, samples: int = 200, seed: int = 0,
                          n_segments: int = 8, iterations: int = 3) -> Calibration:
    """Empirical constants with ``c_low N <= cc_upper_bound <= c_high N`` on sampled pairs."""
    from .geodesic import cc_upper_bound

    rng = np.random.default_rng(seed)
    pts = np.asarray(points, dtype=float)
    flt = alg.with_mode("floating")
    ratios, bad = [], 0
    for _ in range(samples):
        i, j = rng.choice(len(pts), 2, replace=False)
        qn = float(quasimetric(flt, pts[i], pts[j]))
        if qn == 0:
            continue
        res = cc_upper_bound(flt, pts[i], pts[j], n_segments=n_segments, iterations=iterations,
                             seed=int(rng.integers(2**31)))
        if not res.feasible:
            bad += 1
            continue
        ratios.append(res.length / qn)
    if not ratios:
        return Calibration(math.nan, math.nan, 0, bad)
    return Calibration(float(min(ratios)), float(max(ratios)), len(ratios), bad)


def circle_metric(circumference: float) -> Metric:
    """Arc-length metric on a circle; points carry one coordinate in ``[0, C)``."""

    def metric(a, b):
        d = np.abs(np.asarray(a, float)[..., 0] - np.asarray(b, float)[..., 0]) % circumference
        return np.minimum(d, circumference - d)

    return metric


def torus_metric(side: float) -> Metric:
    """Flat metric on the square torus ``(R / side Z)^2``."""

    def metric(a, b):
        d = np.abs(np.asarray(a, float) - np.asarray(b, float)) % side
        d = np.minimum(d, side - d)
        return np.linalg.norm(d, axis=-1)

    return metric


def circle_cloud(n: int, circumference: float, seed: int = 0) -> PointCloud:
    rng = np.random.default_rng(seed)
    pts = np.sort(rng.uniform(0.0, circumference, n))[:, None]
    return PointCloud(pts, circle_metric(circumference), name="circle")


def torus_cloud(n: int, side: float, seed: int = 0) -> PointCloud:
    rng = np.random.default_rng(seed)
    return PointCloud(rng.uniform(0.0, side, (n, 2)), torus_metric(side), name="torus")
