"""Snowflake embedding assembly: bilinear form, explicit solve, low-pass,
isometry fields, Weierstrass sums, scale concatenation and the Assouad baseline."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .algebra import StratifiedAlgebra
from .frames import ExtensionConfig, FrameField, extend_frame_repeated, empirical_lipschitz
from .multilinear import gram_schmidt, pseudoinverse, SingularMapError, wedge_norm
from .nets import PointCloud, color_net, greedy_maximal_net
from .oscillator import flow_difference

VectorMap = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class EmbeddingConfig:
    A: int = 16
    eps: float = 0.125
    M1: int = 0
    M2: int = 8
    D: int = 0
    alpha: float = 2.0 / 3.0
    m_star: int | None = None
    C0: int = 10
    N0: int = 8

    def __post_init__(self):
        if not 0 < self.eps < 0.5:
            raise ValueError("eps must lie in (0, 1/2)")
        if self.M1 > self.M2:
            raise ValueError("need M1 <= M2")
        if self.A < 2 or self.A & (self.A - 1):
            raise ValueError("A must be a power of two")

    @property
    def a(self) -> int:
        return int(self.A).bit_length() - 1

    def to_json(self) -> dict:
        return asdict(self)


# --- horizontal jets -----------------------------------------------------


def _derivative(alg, f, P, letters, h, richardson):
    coarse = flow_difference(alg, f, P, letters, h)
    if not richardson:
        return coarse
    fine = flow_difference(alg, f, P, letters, h / 2)
    return (4.0 * fine - coarse) / 3.0


@dataclass
class Jet:
    """First, second horizontal and stratum-2 derivatives of a map at points."""

    first: np.ndarray      # (N, k, D)
    second: np.ndarray     # (N, k, k, D), second[:, i, j] = X_i X_j f
    vertical: np.ndarray   # (N, k2, D)

    def rows(self) -> np.ndarray:
        """Rows ``X_i f``, ``X_i X_j f`` (i <= j), ``X_{2,i} f``: shape ``(N, r, D)``."""
        k = self.first.shape[1]
        sec = [self.second[:, i, j] for i in range(k) for j in range(i, k)]
        return np.concatenate([self.first, np.stack(sec, axis=1), self.vertical], axis=1)


def horizontal_jet(alg: StratifiedAlgebra, f: VectorMap, P, h: float = 1e-3, richardson: bool = True) -> Jet:
    alg = alg.with_mode("floating")
    P = np.atleast_2d(np.asarray(P, dtype=float))
    V1 = alg.stratum_indices(1)
    V2 = alg.stratum_indices(2) if alg.step >= 2 else []
    first = np.stack([_derivative(alg, f, P, (i,), h, richardson) for i in V1], axis=1)
    k = len(V1)
    second = np.zeros((P.shape[0], k, k, first.shape[2]))
    for a, i in enumerate(V1):
        for b, j in enumerate(V1):
            second[:, a, b] = _derivative(alg, f, P, (i, j), h, richardson)
    vertical = (np.stack([_derivative(alg, f, P, (i,), h, richardson) for i in V2], axis=1)
                if V2 else np.zeros((P.shape[0], 0, first.shape[2])))
    return Jet(first, second, vertical)


def bilinear_form_B(alg: StratifiedAlgebra, phi: VectorMap, psi: VectorMap, p, h: float = 1e-3,
                    richardson: bool = False) -> np.ndarray:
    """``Sym(X_i phi . X_j psi)`` at each point, shape ``(N, k, k)`` (or ``(k, k)``)."""
    P = np.asarray(p, dtype=float)
    single = P.ndim == 1
    P = np.atleast_2d(P)
    alg = alg.with_mode("floating")
    V1 = alg.stratum_indices(1)
    dphi = np.stack([_derivative(alg, phi, P, (i,), h, richardson) for i in V1], axis=1)
    dpsi = np.stack([_derivative(alg, psi, P, (i,), h, richardson) for i in V1], axis=1)
    G = np.einsum("nid,njd->nij", dphi, dpsi)
    B = 0.5 * (G + np.swapaxes(G, 1, 2))
    return B[0] if single else B


def T_psi(alg: StratifiedAlgebra, psi: VectorMap, p, h: float = 1e-3, richardson: bool = True) -> np.ndarray:
    """Row matrix of ``T_psi(p)``; shape ``(N, k + k(k+1)/2 + k2, D)``."""
    return horizontal_jet(alg, psi, p, h, richardson).rows()


def explicit_rhs(F: np.ndarray, k: int, k2: int) -> np.ndarray:
    """``(0, -F_ij for i <= j, 0)`` stacked per point."""
    F = np.asarray(F, dtype=float)
    single = F.ndim == 2
    F = F[None] if single else F
    iu = np.triu_indices(k)
    Fs = 0.5 * (F + np.swapaxes(F, 1, 2))
    y = np.concatenate([np.zeros((F.shape[0], k)), -Fs[:, iu[0], iu[1]], np.zeros((F.shape[0], k2))], axis=1)
    return y[0] if single else y


def explicit_solve(alg: StratifiedAlgebra, psi: VectorMap, F, p, h: float = 1e-3,
                   richardson: bool = True) -> np.ndarray:
    """``phi(p) = T_psi(p)^{-1} (0, -F(p), 0)`` with the minimum-norm right inverse.

    ``F`` is a symmetric ``k x k`` matrix, a stack of them matching ``p``, or
    a callable of the points.
    """
    P = np.asarray(p, dtype=float)
    single = P.ndim == 1
    P = np.atleast_2d(P)
    k = alg.k
    k2 = alg.strata_dims[1] if alg.step >= 2 else 0
    rows = T_psi(alg, psi, P, h, richardson)
    Fv = F(P) if callable(F) else np.broadcast_to(np.asarray(F, dtype=float), (P.shape[0], k, k))
    y = explicit_rhs(Fv, k, k2)
    out = np.zeros((P.shape[0], rows.shape[2]))
    for i in range(P.shape[0]):
        try:
            Tinv = pseudoinverse(rows[i])
        except SingularMapError as e:
            raise SingularMapError(e.det, f"T_psi is rank deficient at point {i}: wedge = {math.sqrt(max(e.det, 0)):.3e}") from None
        out[i] = Tinv @ y[i]
    return out[0] if single else out


# --- low-pass stand-in ---------------------------------------------------


def bump_quadrature(n: int, per_axis: int = 9) -> tuple[np.ndarray, np.ndarray]:
    """Nodes in ``(-1, 1)^n`` and weights of the product bump ``exp(-1/(1-t^2))``, unit mass."""
    t = (np.arange(per_axis) + 0.5) / per_axis * 2.0 - 1.0
    w1 = np.exp(-1.0 / (1.0 - t * t))
    grids = np.meshgrid(*([t] * n), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    wgrid = np.meshgrid(*([w1] * n), indexing="ij")
    weights = np.prod(np.stack([g.ravel() for g in wgrid], axis=1), axis=1)
    return nodes, weights / weights.sum()


def lowpass(alg: StratifiedAlgebra, f: VectorMap, N: float, per_axis: int = 9) -> VectorMap:
    """``P_N f(p) = sum_z w_z f(p . delta_{1/N}(z)^{-1})``: group convolution with a dilated bump."""
    alg = alg.with_mode("floating")
    nodes, weights = bump_quadrature(alg.n, per_axis)
    shifts = -alg.dilate(1.0 / N, nodes)

    def smoothed(P):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        total = 0.0
        for z, w in zip(shifts, weights):
            total = total + w * np.asarray(f(alg.multiply(P, z)))
        return total

    return smoothed


class ResolutionError(ValueError):
    pass


def mollifier_lowpass(alg: StratifiedAlgebra, axes: list[np.ndarray], samples: np.ndarray, N: float,
                      per_axis: int = 9) -> np.ndarray:
    """Low-pass filter gridded samples; refuses grids coarser than ``1/N``.

    ``axes[j]`` are the grid coordinates along ``x_j`` and ``samples`` has
    shape ``(len(axes[0]), ..., len(axes[n-1]))``. Off-grid values come from
    multilinear interpolation with linear extrapolation at the border.
    """
    spacing = max(float(np.max(np.diff(a))) for a in axes)
    if spacing >= 1.0 / N:
        raise ResolutionError(f"grid spacing {spacing:.4g} is not finer than 1/N = {1.0 / N:.4g}")
    interp = RegularGridInterpolator(tuple(axes), samples, bounds_error=False, fill_value=None)
    mesh = np.meshgrid(*axes, indexing="ij")
    P = np.stack([m.ravel() for m in mesh], axis=1)
    out = lowpass(alg, lambda Q: interp(Q), N, per_axis)(P)
    return np.asarray(out).reshape(samples.shape)


# --- isometry field ------------------------------------------------------


@dataclass
class IsometryField:
    columns: np.ndarray        # (N, d0, D)
    frame: np.ndarray          # (N, r, D) Gram-Schmidt of the rescaled derivative rows
    perp_residual: float
    constant: bool
    reports: list = field(default_factory=list)


def complement_basis(rows: np.ndarray, count: int) -> np.ndarray:
    """``count`` orthonormal vectors orthogonal to the span of ``rows``."""
    rows = np.atleast_2d(rows)
    D = rows.shape[1]
    q, _ = np.linalg.qr(np.concatenate([rows.T, np.eye(D)], axis=1))
    return q[:, rows.shape[0]:rows.shape[0] + count].T


def build_isometry_field(alg: StratifiedAlgebra, psi: VectorMap, M: float, A: float, cloud: PointCloud,
                         d0: int, K: float = 2.0, seed: int = 0, h: float = 1e-3,
                         jet: Jet | None = None) -> IsometryField:
    """Orthonormal columns ``U(p)`` perpendicular to the first and second derivatives of ``psi``.

    Rows ``M^{-1} X_i psi``, ``A X_i X_j psi`` and ``A X_{2,i} psi`` are
    orthonormalized pointwise; the frame is then extended by ``d0`` fields.
    """
    jet = jet if jet is not None else horizontal_jet(alg, psi, cloud.points, h)
    k = jet.first.shape[1]
    rows = jet.rows().copy()
    rows[:, :k] /= M
    rows[:, k:] *= A
    N, r, D = rows.shape
    frame = np.stack([gram_schmidt(rows[i]) for i in range(N)]) if N else np.zeros((0, r, D))
    if d0 == 0:
        return IsometryField(np.zeros((N, 0, D)), frame, 0.0, False)
    if d0 + r > D:
        raise ValueError(f"target dimension {D} too small for {r} rows plus {d0} columns")
    spread = float(np.max(np.abs(frame - frame[:1]))) if N else 0.0
    reports = []
    if spread < 1e-12:
        cols = np.broadcast_to(complement_basis(frame[0], d0), (N, d0, D)).copy()
        constant = True
    else:
        lip, _, _ = empirical_lipschitz(cloud, frame.reshape(N, -1))
        scale = max(lip, 1e-12)
        base_metric = cloud.metric
        scaled = PointCloud(cloud.points, lambda a, b: scale * base_metric(a, b), cloud.quasi, cloud.n_h, cloud.name)
        ff = FrameField(scaled, frame, 1.0)
        cfg = ExtensionConfig(K=K, m=r, D=D, seed=seed)
        out, reports = extend_frame_repeated(scaled, ff, d0, cfg, strict=False)
        cols = out.vectors[:, r:]
        constant = False
    targets = np.concatenate([jet.first, jet.second.reshape(N, k * k, D)], axis=1)
    perp = float(np.max(np.abs(np.einsum("ncd,ntd->nct", cols, targets)))) if N else 0.0
    return IsometryField(cols, frame, perp, constant, reports)


# --- Weierstrass families ------------------------------------------------


@dataclass
class EmbeddingMap:
    fn: VectorMap
    dim: int
    provenance: dict

    def __call__(self, P) -> np.ndarray:
        return self.fn(np.atleast_2d(np.asarray(P, dtype=float)))

    @property
    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.provenance, sort_keys=True).encode()).hexdigest()[:16]


def _sinc(y):
    return np.sinc(y / np.pi)


def circle_increment(x: np.ndarray, inv_scale: np.ndarray) -> np.ndarray:
    """``s (cos(x/s) - 1, sin(x/s))`` with ``s = 1/inv_scale``, stable for any ``s > 0``.

    ``x`` has shape ``(N,)`` and ``inv_scale`` shape ``(S,)``; output ``(N, S, 2)``.
    """
    y = x[:, None] * inv_scale[None, :]
    half = 0.5 * y
    first = -x[:, None] * half * _sinc(half) ** 2
    second = x[:, None] * _sinc(y)
    return np.stack([first, second], axis=-1)


@dataclass
class LacunaryFamily:
    """``phi_m(p) = A^m phi(delta_{A^{-m}} p)`` for ``M1 <= m <= M2``.

    The base map sends each horizontal coordinate to a unit circle, so every
    ``phi_m`` is 1-Lipschitz in each horizontal direction and bounded by ``2 A^m``.
    With ``block_orthogonal`` the scales occupy mutually orthogonal blocks;
    otherwise they share one set of coordinates.
    """

    alg: StratifiedAlgebra
    A: float
    M1: int
    M2: int
    block_orthogonal: bool = True

    @property
    def scales(self) -> np.ndarray:
        return np.arange(self.M1, self.M2 + 1)

    @property
    def block_dim(self) -> int:
        return 2 * self.alg.k

    def increments(self, P) -> np.ndarray:
        """``phi_m(p) - phi_m(0)`` for all scales: shape ``(N, S, 2k)``."""
        P = np.atleast_2d(np.asarray(P, dtype=float))
        inv = np.power(float(self.A), -self.scales.astype(float))
        parts = [circle_increment(P[:, i], inv) for i in self.alg.stratum_indices(1)]
        return np.concatenate(parts, axis=-1)

    def provenance(self) -> dict:
        return {"family": "circle", "A": self.A, "M1": self.M1, "M2": self.M2,
                "block_orthogonal": self.block_orthogonal, "dims": list(self.alg.strata_dims)}


@dataclass
class HolderDiagnostics:
    holder_constant: float
    predicted_M: float
    exponent: float
    pairs: int
    witness: tuple[int, int]

    def to_json(self) -> dict:
        return {"holder_constant": self.holder_constant, "predicted_M": self.predicted_M,
                "exponent": self.exponent, "pairs": self.pairs, "witness": list(self.witness)}


def predicted_holder_M(A: float, eps: float) -> float:
    return (1.0 - A ** (-2.0 * eps)) ** -0.5


def assemble_weierstrass(family: LacunaryFamily, eps: float) -> EmbeddingMap:
    """``Phi_1(p) = sum_m A^{-m eps} (phi_m(p) - phi_m(0))`` (blocks or shared coordinates)."""
    weights = np.power(float(family.A), -eps * family.scales.astype(float))

    def fn(P):
        inc = family.increments(P) * weights[None, :, None]
        if family.block_orthogonal:
            return inc.reshape(inc.shape[0], -1)
        return inc.sum(axis=1)

    dim = family.block_dim * (len(family.scales) if family.block_orthogonal else 1)
    prov = {**family.provenance(), "eps": eps}
    return EmbeddingMap(fn, dim, prov)


def holder_diagnostics(emb: EmbeddingMap, pairs_p: np.ndarray, pairs_q: np.ndarray, dist: np.ndarray,
                       eps: float, A: float) -> HolderDiagnostics:
    diff = np.linalg.norm(emb(pairs_p) - emb(pairs_q), axis=1)
    ratio = diff / dist ** (1.0 - eps)
    k = int(np.argmax(ratio))
    return HolderDiagnostics(float(ratio[k]), predicted_holder_M(A, eps), 1.0 - eps, len(ratio), (k, k))


def concatenate_scales(phi1: EmbeddingMap, alg: StratifiedAlgebra, a: int, eps: float) -> EmbeddingMap:
    """``Phi = ⊕_{m=1..a} 2^{(m-1)(1-eps)} Phi_1 ∘ delta_{2^{-(m-1)}}``."""
    alg = alg.with_mode("floating")

    def fn(P):
        blocks = [2.0 ** ((m - 1) * (1.0 - eps)) * phi1(alg.dilate(2.0 ** -(m - 1), P)) for m in range(1, a + 1)]
        return np.concatenate(blocks, axis=1)

    return EmbeddingMap(fn, a * phi1.dim, {**phi1.provenance, "concatenated": a})


# --- Assouad baseline ----------------------------------------------------


def assouad_baseline(cloud: PointCloud, eps: float, A: float = 2.0, period: int = 2,
                     coarse_sep: float = 4.0, tail: float = 1e-3) -> EmbeddingMap:
    """Net-bump Assouad map evaluated on the cloud points.

    At scale ``A^m`` each net point carries a tent ``max(0, 2 A^m - d)``
    in the coordinate of its color. Scales are summed with weights
    ``A^{-m eps}`` into blocks indexed by ``m mod period``, the classic
    reuse of coordinates that keeps the dimension independent of the
    number of scales. Scales start below the minimum separation. Above
    the diameter a single center covers the cloud and its tent is affine
    in ``d(., center)``; those scales are kept until the weight falls by
    the factor ``tail``, with the tent recentered to vanish at the
    center. The returned map accepts cloud indices.
    """
    n = len(cloud)
    if n < 2:
        raise ValueError("Assouad baseline needs at least two points")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    D = cloud.distance_matrix()
    positive = D[D > 0]
    dmin, diam = float(positive.min()), float(D.max())
    m_lo = int(math.floor(math.log(dmin / 2.0, A)))
    m_hi = int(math.ceil(math.log(diam, A)))
    m_top = m_hi + int(math.ceil(math.log(1.0 / tail) / (eps * math.log(A))))
    blocks: dict[int, list[np.ndarray]] = {}
    for m in range(m_lo, m_hi):
        r = A**m
        net = greedy_maximal_net(cloud, r)
        col = color_net(net, coarse_sep * r)
        feats = np.zeros((n, col.n_colors))
        tents = np.maximum(0.0, 2.0 * r - D[:, net.members])
        np.add.at(feats.T, col.colors, tents.T)
        blocks.setdefault((m - m_lo) % period, []).append(A ** (-m * eps) * feats)
    # above the diameter the greedy net is the first point alone
    radial = -D[:, :1]
    for key in range(period):
        ms = np.arange(m_hi, m_top + 1)
        ms = ms[(ms - m_lo) % period == key]
        if len(ms):
            blocks.setdefault(key, []).append(float(np.sum(np.power(A, -eps * ms))) * radial)
    coords = []
    for key in sorted(blocks):
        width = max(b.shape[1] for b in blocks[key])
        acc = np.zeros((n, width))
        for b in blocks[key]:
            acc[:, :b.shape[1]] += b
        coords.append(acc)
    values = np.concatenate(coords, axis=1)

    def fn(idx):
        return values[np.asarray(idx, dtype=int).ravel()]

    prov = {"baseline": "assouad", "eps": eps, "A": A, "period": period, "scales": [m_lo, m_top], "points": n}
    return EmbeddingMap(fn, values.shape[1], prov)
