"""Upper bounds on the Carnot-Caratheodory distance by piecewise-horizontal paths."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares, minimize

from .algebra import StratifiedAlgebra


@dataclass(frozen=True)
class PathBound:
    length: float
    residual: float
    feasible: bool
    controls: np.ndarray
    restarts: int

    def to_json(self) -> dict:
        return {"length": self.length, "residual": self.residual, "feasible": self.feasible,
                "restarts": self.restarts}


def horizontal_path_end(alg: StratifiedAlgebra, start, controls: np.ndarray) -> np.ndarray:
    """``start * exp(u_1) * ... * exp(u_T)`` for horizontal controls ``u_t``."""
    n, k = alg.n, alg.k
    out = np.asarray(start, dtype=float)
    step = np.zeros(n)
    for u in np.asarray(controls, dtype=float).reshape(-1, k):
        step[:k] = u
        out = alg.multiply(out, step)
    return out


def _batched_end(alg: StratifiedAlgebra, start, U: np.ndarray) -> np.ndarray:
    """Path endpoints for a batch of control sequences, ``U`` of shape ``(B, T, k)``."""
    B, T, k = U.shape
    out = np.broadcast_to(np.asarray(start, dtype=float), (B, alg.n)).copy()
    step = np.zeros((B, alg.n))
    for t in range(T):
        step[:, :k] = U[:, t]
        out = alg.multiply(out, step)
    return out


def endpoint_error(alg: StratifiedAlgebra, start, target, controls) -> float:
    """Quasinorm of ``end^{-1} target``: the endpoint miss on the length scale."""
    g = alg.multiply(-horizontal_path_end(alg, start, controls), target)
    return float(alg.quasinorm(g))


def cc_upper_bound(alg: StratifiedAlgebra, p, q, n_segments: int = 8, iterations: int = 4,
                   seed: int = 0, tol: float = 1e-4) -> PathBound:
    """Length of the shortest piecewise-horizontal path found from ``p`` to ``q``.

    Each restart fits the endpoint by nonlinear least squares and then
    minimizes path energy under the endpoint constraint. Feasibility means
    the quasinorm of the endpoint miss is below ``tol``. The best feasible
    length over restarts is returned, so the value is nonincreasing in
    ``iterations``. Infeasible outcomes report ``length = inf``.
    """
    if n_segments < 1:
        raise ValueError("n_segments must be at least 1")
    alg = alg.with_mode("floating") if alg.scalar_mode != "floating" else alg
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    T, k = n_segments, alg.k
    g = alg.multiply(-p, q)
    if not np.any(g):
        return PathBound(0.0, 0.0, True, np.zeros((T, k)), 0)
    rng = np.random.default_rng(seed)
    scale = max(float(alg.quasinorm(g)), 1e-12)
    straight = np.tile(g[:k] / T, (T, 1))

    def resid(u):
        return alg.multiply(-horizontal_path_end(alg, p, u), q)

    def resid_jac(u):
        # central differences, all perturbations integrated as one batch
        eps = 1e-7
        E = np.eye(T * k) * eps
        U = np.concatenate([u[None, :] + E, u[None, :] - E]).reshape(-1, T, k)
        R = alg.multiply(-_batched_end(alg, p, U), q)
        return ((R[:T * k] - R[T * k:]) / (2 * eps)).T

    def miss(u):
        return endpoint_error(alg, p, q, u)

    best_len, best_res, best_u = np.inf, np.inf, np.zeros((T, k))
    if miss(straight.ravel()) < tol:
        best_len = float(np.sum(np.linalg.norm(straight, axis=1)))
        best_res, best_u = miss(straight.ravel()), straight
    # closed polygon in the first two horizontal directions, to leave u = 0
    angles = 2 * np.pi * np.arange(T) / T
    loop = np.zeros((T, k))
    loop[:, 0], loop[:, 1] = np.cos(angles), np.sin(angles)
    loop *= scale / T
    used = 0
    for it in range(iterations):
        used += 1
        if it == 0:
            u0 = (straight + loop).ravel()
        else:
            u0 = (straight + rng.normal(scale=scale / np.sqrt(T), size=(T, k))).ravel()
        u = least_squares(resid, u0, jac=resid_jac, method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000).x
        if miss(u) < tol:
            opt = minimize(lambda v: float(v @ v), u, method="SLSQP",
                           jac=lambda v: 2.0 * v,
                           constraints=[{"type": "eq", "fun": resid, "jac": resid_jac}],
                           options={"maxiter": 500, "ftol": 1e-15})
            # damped Gauss-Newton polish back onto the endpoint
            polish = least_squares(resid, opt.x, jac=resid_jac, method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=500)
            if miss(polish.x) < tol:
                u = polish.x
        res = miss(u)
        if res < tol:
            length = float(np.sum(np.linalg.norm(u.reshape(T, k), axis=1)))
            if length < best_len:
                best_len, best_res, best_u = length, res, u.reshape(T, k)
    feasible = np.isfinite(best_len)
    return PathBound(best_len, best_res if feasible else np.inf, bool(feasible), best_u, used)
