"""Locally free base maps: the Veronese map and its pasted, compactly supported version."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .algebra import OperatorWord, StratifiedAlgebra
from .multilinear import exact_determinant, exact_gram_determinant, wedge_norm
from .nets import Coloring
from .polynomial import Polynomial, PolynomialMap


def multi_indices(n: int, max_degree: int) -> list[tuple[int, ...]]:
    """Exponent vectors with ``1 <= |alpha| <= max_degree``, graded then lexicographic."""
    out = []
    for deg in range(1, max_degree + 1):
        for combo in itertools.combinations_with_replacement(range(n), deg):
            alpha = [0] * n
            for i in combo:
                alpha[i] += 1
            out.append(tuple(alpha))
    return out


def veronese_map(alg: StratifiedAlgebra) -> PolynomialMap:
    """Components ``x^alpha / alpha!`` for every monomial of degree ``1..s``.

    These are the distinct coordinates of the symmetric tensors
    ``x^{⊗r} / r!`` rescaled so that the ordered-word derivative matrix is
    unitriangular.
    """
    n = alg.n
    comps = []
    for alpha in multi_indices(n, alg.step):
        denom = math.prod(math.factorial(a) for a in alpha)
        comps.append(Polynomial(n, {alpha: Fraction(1, denom)}, alg.stratum_of))
    return PolynomialMap(comps)


def as_vector_map(pmap: PolynomialMap, n: int):
    """Floating evaluator ``P (N, n) -> (N, len(pmap))`` for a polynomial map."""
    comps = [c.map_coefficients(float) for c in pmap]

    def fn(P):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        vals = [P[:, i] for i in range(n)]
        return np.stack([np.broadcast_to(c.evaluate(vals), P.shape[:1]) for c in comps], axis=1)

    return fn


def word_derivative_polynomials(alg: StratifiedAlgebra, pmap: PolynomialMap,
                                words: list[OperatorWord] | None = None) -> list[list[Polynomial]]:
    words = alg.ordered_words() if words is None else words
    return [[alg.apply_field(w, c) for c in pmap] for w in words]


def exact_word_matrix(alg: StratifiedAlgebra, p, pmap: PolynomialMap | None = None,
                      derivs: list[list[Polynomial]] | None = None) -> list[list[Fraction]]:
    """Rows ``W phi(p)`` over ordered words, evaluated exactly."""
    if derivs is None:
        derivs = word_derivative_polynomials(alg, pmap if pmap is not None else veronese_map(alg))
    vals = [Fraction(x) for x in p]
    return [[Fraction(c.evaluate(vals)) for c in row] for row in derivs]


def veronese_wedge_exact(alg: StratifiedAlgebra, p, derivs=None) -> Fraction:
    """Exact squared wedge norm of ``{W phi0(p)}`` for the unpasted Veronese map."""
    M = exact_word_matrix(alg, p, derivs=derivs)
    if len(M) == len(M[0]):
        return exact_determinant(M) ** 2
    return exact_gram_determinant(M)


def _smooth_zero(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_cutoff(r, inner: float = 1.0, outer: float = 1.5):
    """C-infinity profile: 1 on ``[0, inner]``, 0 on ``[outer, inf)``."""
    a = _smooth_zero(outer - np.asarray(r, float))
    b = _smooth_zero(np.asarray(r, float) - inner)
    return a / (a + b)


@dataclass
class OscillatorMap:
    """Direct sum over colors of translated, cut-off Veronese pieces."""

    alg: StratifiedAlgebra
    centers: np.ndarray
    colors: np.ndarray
    n_colors: int
    inner: float = 1.0
    outer: float = 1.5

    def __post_init__(self):
        self.alg = self.alg.with_mode("floating")
        self._vero = [c.map_coefficients(float) for c in veronese_map(self.alg)]
        self.centers = np.asarray(self.centers, dtype=float)
        self.colors = np.asarray(self.colors, dtype=int)

    @property
    def n_components(self) -> int:
        return len(self._vero)

    @property
    def dim(self) -> int:
        return self.n_colors * self.n_components

    def piece(self, x: np.ndarray) -> np.ndarray:
        """Cut-off Veronese map in local coordinates, shape ``(..., n_components)``."""
        x = np.asarray(x, dtype=float)
        vals = [x[..., i] for i in range(self.alg.n)]
        cut = smooth_cutoff(self.alg.gauge(x), self.inner, self.outer)
        comps = np.stack([np.broadcast_to(c.evaluate(vals), x.shape[:-1]) for c in self._vero], axis=-1)
        return cut[..., None] * comps

    def active_pairs(self, P: np.ndarray, margin: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
        """(point, center) index pairs whose local gauge is below ``outer + margin``."""
        P = np.asarray(P, dtype=float)
        pi, ci = [], []
        for c in range(len(self.centers)):
            loc = self.alg.multiply(-self.centers[c], P)
            near = np.nonzero(self.alg.gauge(loc) < self.outer + margin)[0]
            pi.append(near)
            ci.append(np.full(len(near), c))
        return np.concatenate(pi) if pi else np.zeros(0, int), np.concatenate(ci) if ci else np.zeros(0, int)

    def evaluate(self, P, pairs=None) -> np.ndarray:
        P = np.atleast_2d(np.asarray(P, dtype=float))
        pi, ci = self.active_pairs(P) if pairs is None else pairs
        out = np.zeros((P.shape[0], self.n_colors, self.n_components))
        if len(pi):
            vals = self.piece(self.alg.multiply(-self.centers[ci], P[pi]))
            np.add.at(out, (pi, self.colors[ci]), vals)
        return out.reshape(P.shape[0], self.dim)

    def word_derivatives(self, P, words: list[OperatorWord] | None = None, h: float = 1e-2) -> np.ndarray:
        """``W phi(p)`` for each word, shape ``(points, words, dim)``; central differences."""
        P = np.atleast_2d(np.asarray(P, dtype=float))
        words = self.alg.ordered_words() if words is None else words
        pairs = self.active_pairs(P)
        out = np.zeros((P.shape[0], len(words), self.dim))
        for w_idx, w in enumerate(words):
            coarse = flow_difference(self.alg, lambda Q: self.evaluate(Q, pairs), P, w.letters, h)
            fine = flow_difference(self.alg, lambda Q: self.evaluate(Q, pairs), P, w.letters, h / 2)
            out[:, w_idx] = (4.0 * fine - coarse) / 3.0
        return out

    def wedge_lower_bound(self, P, h: float = 1e-2) -> np.ndarray:
        V = self.word_derivatives(P, h=h)
        return np.array([wedge_norm(v) for v in V])

    def covering_block_wedge(self, P, h: float = 1e-2) -> np.ndarray:
        """Wedge of the word derivatives restricted to the color block of a covering center.

        This isolates the single-translate contribution; the full wedge
        dominates it because Gram matrices of the blocks add up.
        """
        P = np.atleast_2d(np.asarray(P, dtype=float))
        V = self.word_derivatives(P, h=h).reshape(P.shape[0], -1, self.n_colors, self.n_components)
        out = np.zeros(P.shape[0])
        for i, p in enumerate(P):
            d = self.alg.quasinorm(self.alg.multiply(-self.centers, p))
            c = self.colors[int(np.argmin(d))]
            out[i] = wedge_norm(V[i, :, c, :])
        return out


def flow_difference(alg: StratifiedAlgebra, f, P: np.ndarray, letters, h: float) -> np.ndarray:
    """Mixed central difference for ``X_{a1}...X_{am} f`` at each row of ``P``.

    Uses ``f(p exp(t1 e_{a1}) ... exp(tm e_{am}))`` with ``t_i = ±h``.
    """
    m = len(letters)
    total = 0.0
    for signs in itertools.product((1.0, -1.0), repeat=m):
        Q = np.array(P, dtype=float)
        for s, a in zip(signs, letters):
            step = np.zeros(alg.n)
            step[a] = s * h
            Q = alg.multiply(Q, step)
        total = total + math.prod(signs) * f(Q)
    return total / (2.0 * h) ** m


def paste_oscillator(alg: StratifiedAlgebra, coloring: Coloring, inner: float = 1.0,
                     outer: float = 1.5) -> OscillatorMap:
    """One cut-off Veronese translate per net point, summed within each color class."""
    if coloring.coarse_sep < 2 * outer - 1e-12 and coloring.coarse_sep < 3.0:
        raise ValueError("coloring must separate same-color centers by at least 3")
    net = coloring.net
    return OscillatorMap(alg, net.points, coloring.colors, coloring.n_colors, inner, outer)


def sample_ball(alg: StratifiedAlgebra, count: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples of the quasinorm ball by rejection from its bounding box."""
    alg = alg.with_mode("floating")
    half = np.array([radius ** alg.stratum_of[j] for j in range(alg.n)])
    out = []
    have = 0
    while have < count:
        cand = rng.uniform(-1.0, 1.0, (max(4 * count, 64), alg.n)) * half
        cand = cand[alg.quasinorm(cand) < radius]
        out.append(cand)
        have += len(cand)
    return np.concatenate(out)[:count]


def pasted_oscillator_on_ball(alg: StratifiedAlgebra, eval_points: np.ndarray, radius: float,
                              padding: float = 1.5, fill: int = 6000, seed: int = 0,
                              ) -> tuple[OscillatorMap, Coloring]:
    """Pasted map whose 1-net covers ``eval_points`` and a padded ball around them.

    The net is built over the evaluation points together with ``fill``
    uniform samples of the ball of radius ``radius + padding``, so every
    evaluation point lies within distance 1 of a center.
    """
    from .nets import PointCloud, color_net, greedy_maximal_net

    rng = np.random.default_rng(seed)
    filler = sample_ball(alg, fill, radius + padding, rng)
    cloud = PointCloud.from_carnot(alg, np.concatenate([np.asarray(eval_points, float), filler]))
    net = greedy_maximal_net(cloud, 1.0)
    coloring = color_net(net, 3.0)
    return paste_oscillator(alg, coloring), coloring
