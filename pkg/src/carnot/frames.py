"""Extension of pointwise-orthonormal Lipschitz frames by one more field.

Pipeline: maximal net at scale ``delta`` -> random unit vectors in each
orthocomplement, fixed up by Moser-Tardos resampling until nearby net
vectors are almost orthogonal -> quadratic partition of unity ->
interpolation -> projection and normalization.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .nets import Net, PointCloud, doubling_profile, greedy_maximal_net


class FrameExtensionError(RuntimeError):
    def __init__(self, message: str, report: "ExtensionReport | None" = None):
        self.report = report
        super().__init__(message)


@dataclass
class FrameField:
    """``vectors[p, i]`` is the i-th unit vector at cloud point ``p``."""

    cloud: PointCloud
    vectors: np.ndarray
    lipschitz: float = 1.0

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=float)
        if v.ndim == 2:
            v = v[:, None, :]
        self.vectors = v

    @property
    def m(self) -> int:
        return self.vectors.shape[1]

    @property
    def D(self) -> int:
        return self.vectors.shape[2]

    @classmethod
    def constant(cls, cloud: PointCloud, basis) -> "FrameField":
        basis = np.atleast_2d(np.asarray(basis, dtype=float))
        vecs = np.broadcast_to(basis, (len(cloud),) + basis.shape).copy()
        return cls(cloud, vecs, 0.0)

    @classmethod
    def empty(cls, cloud: PointCloud, D: int) -> "FrameField":
        return cls(cloud, np.zeros((len(cloud), 0, D)), 0.0)

    def orthonormality_error(self) -> float:
        if self.m == 0:
            return 0.0
        G = np.einsum("pid,pjd->pij", self.vectors, self.vectors)
        return float(np.max(np.abs(G - np.eye(self.m))))


@dataclass(frozen=True)
class ExtensionConfig:
    """Constants of one extension step, all derived from ``K`` and ``m``."""

    K: float
    m: int
    D: int
    seed: int = 0
    budget: int | None = None
    event_radius_factor: float = 2.0

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("doubling constant must be at least 1")
        if self.m < 0 or self.D <= self.m:
            raise ValueError("need 0 <= m < D")

    @property
    def delta(self) -> float:
        # m = 0 would give an infinite net scale; treat it like m = 1
        return 1.0 / (8.0 * self.K * max(self.m, 1))

    @property
    def eps_cap(self) -> float:
        return 1.0 / (4.0 * self.K**2)

    @property
    def gap_required(self) -> float:
        return 224.0 * self.K**4 * math.log(self.K) if self.K > 1 else 0.0

    @property
    def gap_ok(self) -> bool:
        return self.D - self.m >= self.gap_required

    @property
    def lipschitz_bound(self) -> float:
        m = max(self.m, 1)
        return 150.0 * self.K**5 * m * (m + 1)

    @property
    def dot_bound(self) -> float:
        return 1.0 / (4.0 * max(self.m, 1))

    def next(self) -> "ExtensionConfig":
        return replace(self, m=self.m + 1, seed=self.seed + 1)

    def to_json(self) -> dict:
        return {
            "K": self.K, "m": self.m, "D": self.D, "seed": self.seed,
            "delta": self.delta, "eps_cap": self.eps_cap,
            "gap_required": self.gap_required, "gap_ok": self.gap_ok,
            "event_radius_factor": self.event_radius_factor,
        }


def sample_orthocomplement_unit(basis, rng: np.random.Generator, D: int | None = None) -> np.ndarray:
    """Uniform unit vector in the orthogonal complement of orthonormal rows ``basis``."""
    B = np.asarray(basis, dtype=float)
    if B.size == 0:
        if D is None:
            raise ValueError("dimension required when the basis is empty")
        B = np.zeros((0, D))
    B = np.atleast_2d(B)
    m, D = B.shape
    if m >= D:
        raise ValueError("orthocomplement is trivial (m = D)")
    while True:
        g = rng.standard_normal(D)
        for _ in range(2):
            g -= B.T @ (B @ g)
        nrm = np.linalg.norm(g)
        if nrm > 1e-8:
            return g / nrm


@dataclass
class DiscreteAssignment:
    net: Net
    vectors: np.ndarray
    resamples: int
    surviving_events: int
    neighbors: list[np.ndarray]

    @property
    def success(self) -> bool:
        return self.surviving_events == 0


def _event_neighbors(net: Net, radius: float) -> list[np.ndarray]:
    """Net positions (not cloud indices) within ``radius`` of each member."""
    out = []
    for a, idx in enumerate(net.members):
        d = net.cloud.distances_from(int(idx), net.members)
        nb = np.nonzero(d < radius)[0]
        out.append(nb[nb != a])
    return out


def _violated(a: int, vecs: np.ndarray, nbrs: list[np.ndarray], eps: float) -> bool:
    nb = nbrs[a]
    if len(nb) == 0:
        return False
    return bool(np.any(np.abs(vecs[nb] @ vecs[a]) > eps))


def lll_resample(net: Net, frame_at_net: np.ndarray, config: ExtensionConfig,
                 rng: np.random.Generator | None = None) -> DiscreteAssignment:
    """Moser-Tardos resampling of the discrete field on the net.

    ``frame_at_net[a]`` holds the ``m`` frame vectors at net member ``a``.
    The event of member ``a`` is violated when some member within the event
    radius has ``|v'(a) . v'(b)| > eps_cap``; the lowest violated event is
    repaired first by resampling ``v'(a)``.
    """
    rng = rng or np.random.default_rng(config.seed)
    n = len(net)
    D = config.D
    frame_at_net = np.asarray(frame_at_net, dtype=float).reshape(n, -1, D)
    vecs = np.stack([sample_orthocomplement_unit(frame_at_net[a], rng, D) for a in range(n)]) if n else np.zeros((0, D))
    nbrs = _event_neighbors(net, config.event_radius_factor * config.delta)
    eps = config.eps_cap
    budget = config.budget if config.budget is not None else 100 * max(n, 1)
    heap = [a for a in range(n) if _violated(a, vecs, nbrs, eps)]
    heapq.heapify(heap)
    queued = set(heap)
    resamples = 0
    while heap and resamples < budget:
        a = heapq.heappop(heap)
        queued.discard(a)
        if not _violated(a, vecs, nbrs, eps):
            continue
        vecs[a] = sample_orthocomplement_unit(frame_at_net[a], rng, D)
        resamples += 1
        for b in [a, *nbrs[a].tolist()]:
            if b not in queued and _violated(b, vecs, nbrs, eps):
                heapq.heappush(heap, b)
                queued.add(b)
    surviving = sum(_violated(a, vecs, nbrs, eps) for a in range(n))
    return DiscreteAssignment(net, vecs, resamples, int(surviving), nbrs)


def recheck_events(assign: DiscreteAssignment, eps: float, radius: float) -> list[tuple[int, int, float]]:
    """Exhaustive pass over all net pairs closer than ``radius``."""
    net, vecs = assign.net, assign.vectors
    bad = []
    for a in range(len(net)):
        d = net.cloud.distances_from(int(net.members[a]), net.members[a + 1:])
        for off in np.nonzero(d < radius)[0]:
            b = a + 1 + off
            dot = float(vecs[a] @ vecs[b])
            if abs(dot) > eps:
                bad.append((int(net.members[a]), int(net.members[b]), dot))
    return bad


def tent(d: np.ndarray, delta: float) -> np.ndarray:
    """1 on ``[0, delta]``, linear down to 0 at ``2 delta``."""
    return np.clip(2.0 - np.asarray(d, dtype=float) / delta, 0.0, 1.0)


def partition_weights(dist_to_members: np.ndarray, delta: float) -> np.ndarray:
    """Quadratic partition of unity from distances to net members (last axis)."""
    t = tent(dist_to_members, delta)
    norm = np.sqrt(np.sum(t * t, axis=-1, keepdims=True))
    if np.any(norm == 0):
        raise ValueError("point not covered by any tent; is the net maximal?")
    return t / norm


def quadratic_partition(net: Net, delta: float, p) -> list[tuple[int, float]]:
    """Sparse weights ``(cloud index q, phi_q(p))`` with ``sum phi_q^2 = 1``."""
    d = net.cloud.distances_to_point(p, net.members)
    w = partition_weights(d, delta)
    return [(int(net.members[a]), float(w[a])) for a in np.nonzero(w)[0]]


@dataclass
class ExtensionReport:
    config: dict
    net_size: int
    resamples: int
    surviving_events: int
    recheck_violations: int
    norm2_min: float
    norm2_max: float
    dot_max: float
    lipschitz: float
    lipschitz_bound: float
    lipschitz_pairs: int
    orthonormality_error: float
    empirical_K: float
    best_effort: bool
    witnesses: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    @property
    def bound_norm_ok(self) -> bool:
        return 0.75 <= self.norm2_min and self.norm2_max <= 1.25

    @property
    def bound_dot_ok(self) -> bool:
        return self.dot_max <= 1.0 / (4.0 * max(self.config["m"], 1))

    @property
    def bound_lipschitz_ok(self) -> bool:
        return self.lipschitz <= self.lipschitz_bound

    @property
    def ok(self) -> bool:
        return (self.surviving_events == 0 and self.recheck_violations == 0 and self.bound_norm_ok
                and self.bound_dot_ok and self.bound_lipschitz_ok)

    def to_json(self) -> dict:
        return {
            "config": self.config, "net_size": self.net_size, "resamples": self.resamples,
            "surviving_events": self.surviving_events, "recheck_violations": self.recheck_violations,
            "norm2_min": self.norm2_min, "norm2_max": self.norm2_max, "dot_max": self.dot_max,
            "lipschitz": self.lipschitz, "lipschitz_bound": self.lipschitz_bound,
            "lipschitz_pairs": self.lipschitz_pairs,
            "orthonormality_error": self.orthonormality_error, "empirical_K": self.empirical_K,
            "best_effort": self.best_effort,
            "bounds": {"norm": self.bound_norm_ok, "dot": self.bound_dot_ok, "lipschitz": self.bound_lipschitz_ok},
            "ok": self.ok, "witnesses": self.witnesses, "warnings": self.warnings,
        }


def empirical_lipschitz(cloud: PointCloud, vectors: np.ndarray, max_exhaustive: int = 5000,
                        samples: int = 10**6, seed: int = 0) -> tuple[float, tuple[int, int], int]:
    """Largest ``|v(p) - v(q)| / d(p, q)`` over all pairs (or sampled pairs)."""
    V = np.asarray(vectors, dtype=float).reshape(len(cloud), -1)
    n = len(cloud)
    best, wit = 0.0, (0, 0)
    if n < 2:
        return 0.0, wit, 0
    if n <= max_exhaustive:
        sq = np.sum(V * V, axis=1)
        pairs = n * (n - 1) // 2
        block = max(1, 4_000_000 // n)
        for start in range(0, n, block):
            rows = np.arange(start, min(n, start + block))
            diff2 = sq[rows, None] + sq[None, :] - 2.0 * (V[rows] @ V.T)
            diff = np.sqrt(np.clip(diff2, 0.0, None))
            d = np.stack([cloud.distances_from(int(i)) for i in rows])
            mask = np.arange(n)[None, :] > rows[:, None]
            mask &= d > 0
            ratio = np.where(mask, diff / np.where(d > 0, d, 1.0), 0.0)
            k = np.unravel_index(np.argmax(ratio), ratio.shape)
            if ratio[k] > best:
                best, wit = float(ratio[k]), (int(rows[k[0]]), int(k[1]))
        return best, wit, pairs
    rng = np.random.default_rng(seed)
    i = rng.integers(0, n, samples)
    j = rng.integers(0, n, samples)
    keep = i != j
    i, j = i[keep], j[keep]
    d = cloud.metric(cloud.points[i], cloud.points[j])
    diff = np.linalg.norm(V[i] - V[j], axis=1)
    ratio = np.where(d > 0, diff / np.where(d > 0, d, 1.0), 0.0)
    k = int(np.argmax(ratio))
    return float(ratio[k]), (int(i[k]), int(j[k])), int(len(i))


def extend_frame(cloud: PointCloud, frame: FrameField, config: ExtensionConfig,
                 strict: bool = True) -> tuple[FrameField, ExtensionReport]:
    """Add one unit field orthogonal to ``frame`` with certified Lipschitz bound.

    With ``strict=True`` a failed diagnostic raises :class:`FrameExtensionError`
    carrying the report; otherwise the report is returned with ``ok=False``.
    """
    if frame.m != config.m or frame.D != config.D:
        raise ValueError(f"frame has m={frame.m}, D={frame.D}; config expects m={config.m}, D={config.D}")
    rng = np.random.default_rng(config.seed)
    delta = config.delta
    net = greedy_maximal_net(cloud, delta)
    assign = lll_resample(net, frame.vectors[net.members], config, rng)
    radius = config.event_radius_factor * delta
    recheck = recheck_events(assign, config.eps_cap, radius)

    n, m, D = len(cloud), config.m, config.D
    tilde = np.zeros((n, D))
    block = max(1, 2_000_000 // max(len(net), 1))
    for start in range(0, n, block):
        rows = range(start, min(n, start + block))
        dist = np.stack([cloud.distances_from(i, net.members) for i in rows])
        tilde[start:start + len(dist)] = partition_weights(dist, delta) @ assign.vectors
    norm2 = np.sum(tilde * tilde, axis=1)
    dots = np.abs(np.einsum("pd,pid->pi", tilde, frame.vectors)) if m else np.zeros((n, 0))
    dot_max = float(dots.max()) if dots.size else 0.0

    proj = tilde - np.einsum("pi,pid->pd", np.einsum("pd,pid->pi", tilde, frame.vectors), frame.vectors) if m else tilde
    proj = proj - (np.einsum("pi,pid->pd", np.einsum("pd,pid->pi", proj, frame.vectors), frame.vectors) if m else 0)
    new = proj / np.linalg.norm(proj, axis=1, keepdims=True)
    out = FrameField(cloud, np.concatenate([frame.vectors, new[:, None, :]], axis=1), config.lipschitz_bound)
    lip, lip_wit, lip_pairs = empirical_lipschitz(cloud, new, seed=config.seed)

    prof = doubling_profile(net, max_level=3)
    warnings = []
    if prof.K > config.K:
        warnings.append(f"empirical net doubling constant {prof.K:.3f} exceeds declared K={config.K}")
    if not config.gap_ok:
        warnings.append(f"D - m = {D - m} below the gap {config.gap_required:.1f}; best-effort run")
    witnesses = {
        "norm2_min_point": int(np.argmin(norm2)) if n else -1,
        "norm2_max_point": int(np.argmax(norm2)) if n else -1,
        "dot_max_point": int(np.unravel_index(np.argmax(dots), dots.shape)[0]) if dots.size else -1,
        "lipschitz_pair": list(lip_wit),
        "recheck": [list(v) for v in recheck[:10]],
    }
    report = ExtensionReport(
        config=config.to_json(), net_size=len(net), resamples=assign.resamples,
        surviving_events=assign.surviving_events, recheck_violations=len(recheck),
        norm2_min=float(norm2.min()), norm2_max=float(norm2.max()), dot_max=dot_max,
        lipschitz=lip, lipschitz_bound=config.lipschitz_bound, lipschitz_pairs=lip_pairs,
        orthonormality_error=out.orthonormality_error(), empirical_K=prof.K,
        best_effort=not config.gap_ok, witnesses=witnesses, warnings=warnings,
    )
    if strict and not report.ok:
        raise FrameExtensionError("frame extension diagnostics failed", report)
    return out, report


def extend_frame_repeated(cloud: PointCloud, frame: FrameField, count: int, config: ExtensionConfig,
                          strict: bool = True) -> tuple[FrameField, list[ExtensionReport]]:
    """Add ``count`` fields one at a time, each step against the running frame."""
    reports = []
    cfg = config
    for step in range(count):
        frame, rep = extend_frame(cloud, frame, cfg, strict=strict)
        reports.append(rep)
        if step + 1 < count:
            cfg = cfg.next()
    return frame, reports
