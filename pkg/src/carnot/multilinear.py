"""Wedge norms, pseudoinverses and quantitative Gram-Schmidt."""
from __future__ import annotations

from fractions import Fraction
from math import isqrt
from typing import Sequence

import numpy as np
from scipy.linalg import lapack


class SingularMapError(ValueError):
    """Raised when ``T T*`` is numerically singular."""

    def __init__(self, det: float, message: str = ""):
        self.det = det
        super().__init__(message or f"map is rank deficient: det(T T*) = {det:.3e}")


class DegeneratePrefixError(ValueError):
    """Raised when a prefix of the input tuple is (numerically) dependent."""

    def __init__(self, prefix_length: int, wedge: float):
        self.prefix_length = prefix_length
        self.wedge = wedge
        super().__init__(f"prefix of length {prefix_length} is degenerate (wedge = {wedge:.3e})")


def _as_tuple(vs) -> np.ndarray:
    arr = np.asarray(vs, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError("expected a 2-D array of row vectors")
    return arr


def gram_determinant(vs) -> float:
    """Determinant of the Gram matrix, via pivoted Cholesky (clamped at 0)."""
    V = _as_tuple(vs)
    n = V.shape[0]
    if n == 0:
        return 1.0
    if n > V.shape[1]:
        return 0.0
    G = V @ V.T
    scale = float(np.max(np.abs(np.diag(G)))) if n else 0.0
    if scale == 0.0:
        return 0.0
    c, _, rank, info = lapack.dpstrf(G / scale, lower=1, tol=-1.0)
    if info < 0:
        raise ValueError("pivoted Cholesky failed")
    if rank < n:
        return 0.0
    diag = np.diag(c)[:n]
    return float(np.prod(diag**2) * scale**n)


def wedge_norm(vs) -> float:
    """``|v_1 ^ ... ^ v_n|`` as the root of the Gram determinant."""
    arr = np.asarray(vs, dtype=float)
    if arr.ndim == 2 and arr.shape[0] == 0:
        return 1.0
    return float(np.sqrt(gram_determinant(arr)))


def wedge_norm_batch(V: np.ndarray) -> np.ndarray:
    """Wedge norms of a stack of tuples, shape ``(batch, n, D)``; uses eigenvalues."""
    V = np.asarray(V, dtype=float)
    G = V @ np.swapaxes(V, -1, -2)
    ev = np.linalg.eigvalsh(G)
    ev = np.clip(ev, 0.0, None)
    return np.sqrt(np.prod(ev, axis=-1))


def polarized_wedge_inner(us, vs) -> float:
    """``<u_1 ^ ... ^ u_n, v_1 ^ ... ^ v_n> = det(u_i . v_j)``."""
    U, V = _as_tuple(us), _as_tuple(vs)
    if U.shape != V.shape:
        raise ValueError("tuples must have equal length and dimension")
    return float(np.linalg.det(U @ V.T))


def wedge_cauchy_schwarz_check(vs, split: int, tol: float = 1e-9) -> bool:
    """Whether ``|v_1^...^v_n| <= |v_1^...^v_i| |v_{i+1}^...^v_n|`` holds."""
    V = _as_tuple(vs)
    whole = wedge_norm(V)
    left, right = wedge_norm(V[:split]), wedge_norm(V[split:])
    return whole <= left * right * (1 + tol) + tol


def exact_gram_determinant(vs: Sequence[Sequence]) -> Fraction:
    """Gram determinant in exact rational arithmetic."""
    rows = [[Fraction(x) for x in v] for v in vs]
    n = len(rows)
    G = [[sum((a * b for a, b in zip(rows[i], rows[j])), Fraction(0)) for j in range(n)] for i in range(n)]
    return exact_determinant(G)


def exact_determinant(M: list[list[Fraction]]) -> Fraction:
    A = [list(r) for r in M]
    n = len(A)
    det = Fraction(1)
    for col in range(n):
        piv = next((i for i in range(col, n) if A[i][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            A[col], A[piv] = A[piv], A[col]
            det = -det
        det *= A[col][col]
        inv = 1 / A[col][col]
        for i in range(col + 1, n):
            if A[i][col] != 0:
                f = A[i][col] * inv
                A[i] = [a - f * b for a, b in zip(A[i], A[col])]
    return det


def exact_wedge_norm(vs) -> Fraction | float:
    """Exact wedge norm: a ``Fraction`` when the Gram determinant is a rational square."""
    g = exact_gram_determinant(vs)
    num, den = g.numerator, g.denominator
    rn, rd = isqrt(num), isqrt(den)
    if rn * rn == num and rd * rd == den:
        return Fraction(rn, rd)
    return float(g) ** 0.5


def pseudoinverse(T, tol: float | None = None) -> np.ndarray:
    """Minimum-norm right inverse ``T* (T T*)^{-1}`` of a full-row-rank map.

    The map is declared singular when the smallest eigenvalue of ``T T*``
    is below ``tol`` (default ``1e-12 * max_row_norm**2``).
    """
    T = np.atleast_2d(np.asarray(T, dtype=float))
    m, D = T.shape
    G = T @ T.T
    scale2 = float(np.max(np.sum(T * T, axis=1))) if T.size else 0.0
    tol = 1e-12 * scale2 if tol is None else tol
    det = gram_determinant(T)
    if m > D or scale2 == 0.0 or np.linalg.eigvalsh(G)[0] <= tol:
        raise SingularMapError(det)
    return T.T @ np.linalg.solve(G, np.eye(m))


def gram_schmidt(ws, tol: float = 1e-10) -> np.ndarray:
    """Orthonormalize rows keeping prefix spans; raises on a degenerate prefix.

    Each step scales the residual by the ratio of consecutive prefix wedge
    norms, which equals the reciprocal of the residual length.
    """
    W = _as_tuple(ws)
    n = W.shape[0]
    out = np.zeros_like(W)
    prev = 1.0
    for i in range(n):
        resid = W[i] - out[:i].T @ (out[:i] @ W[i]) if i else W[i].copy()
        # second pass for stability
        if i:
            resid = resid - out[:i].T @ (out[:i] @ resid)
        cur = prev * float(np.linalg.norm(resid))
        scale = float(np.linalg.norm(W[i]))
        if scale == 0.0 or cur <= tol * prev * scale:
            raise DegeneratePrefixError(i + 1, cur)
        out[i] = (prev / cur) * resid
        prev = cur
    return out
