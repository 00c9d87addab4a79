"""Sparse multivariate polynomials with weighted degrees.

Coefficients are kept exactly as given (``Fraction`` in the symbolic
pipeline); evaluation works with any scalar or numpy array that supports
``+``, ``*`` and ``**``.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence

Monomial = tuple[int, ...]


class Polynomial:
    """Polynomial in ``nvars`` variables stored as ``{exponents: coeff}``.

    ``weights`` assigns a weight to every variable; the weighted degree of a
    monomial is ``sum(w_i * e_i)``.
    """

    __slots__ = ("nvars", "weights", "terms")

    def __init__(self, nvars: int, terms: dict | None = None, weights: Sequence[int] | None = None):
        self.nvars = nvars
        self.weights = tuple(weights) if weights is not None else (1,) * nvars
        if len(self.weights) != nvars:
            raise ValueError("weights length must equal nvars")
        self.terms: dict[Monomial, object] = {}
        if terms:
            for mono, c in terms.items():
                if c != 0:
                    if len(mono) != nvars:
                        raise ValueError("monomial length mismatch")
                    self.terms[tuple(mono)] = c

    # constructors
    @classmethod
    def zero(cls, nvars, weights=None):
        return cls(nvars, {}, weights)

    @classmethod
    def constant(cls, c, nvars, weights=None):
        return cls(nvars, {(0,) * nvars: c}, weights)

    @classmethod
    def variable(cls, i, nvars, weights=None, coeff=1):
        e = [0] * nvars
        e[i] = 1
        return cls(nvars, {tuple(e): coeff}, weights)

    def _like(self, terms):
        return Polynomial(self.nvars, terms, self.weights)

    def _coerce(self, other):
        if isinstance(other, Polynomial):
            if other.nvars != self.nvars:
                raise ValueError("polynomials over different variable sets")
            return other
        return Polynomial.constant(other, self.nvars, self.weights)

    # arithmetic
    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            v = out.get(m, 0) + c
            if v == 0:
                out.pop(m, None)
            else:
                out[m] = v
        return self._like(out)

    __radd__ = __add__

    def __neg__(self):
        return self._like({m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            if other == 0:
                return self._like({})
            return self._like({m: c * other for m, c in self.terms.items()})
        other = self._coerce(other)
        out: dict[Monomial, object] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                v = out.get(m, 0) + c1 * c2
                if v == 0:
                    out.pop(m, None)
                else:
                    out[m] = v
        return self._like(out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        result = Polynomial.constant(1, self.nvars, self.weights)
        for _ in range(k):
            result = result * self
        return result

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self.nvars == other.nvars and self.terms == other.terms
        return self == self._coerce(other)

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    def __bool__(self):
        return bool(self.terms)

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for m, c in sorted(self.terms.items()):
            mono = "*".join(f"x{i}" + (f"^{e}" if e > 1 else "") for i, e in enumerate(m) if e)
            parts.append(f"{c}" + (f"*{mono}" if mono else ""))
        return " + ".join(parts)

    # calculus
    def diff(self, i: int) -> "Polynomial":
        out = {}
        for m, c in self.terms.items():
            e = m[i]
            if e:
                mm = list(m)
                mm[i] = e - 1
                out[tuple(mm)] = c * e
        return self._like(out)

    def monomial_weight(self, m: Monomial) -> int:
        return sum(w * e for w, e in zip(self.weights, m))

    def weighted_degrees(self) -> set[int]:
        return {self.monomial_weight(m) for m in self.terms}

    def weighted_degree(self) -> int:
        """Largest weighted degree; ``-1`` for the zero polynomial."""
        return max(self.weighted_degrees(), default=-1)

    def is_homogeneous(self, degree: int | None = None) -> bool:
        degs = self.weighted_degrees()
        if not degs:
            return True
        if len(degs) != 1:
            return False
        return degree is None or degs == {degree}

    def constant_term(self):
        return self.terms.get((0,) * self.nvars, 0)

    def evaluate(self, values: Sequence):
        """Evaluate at ``values`` (scalars or broadcastable arrays)."""
        if len(values) != self.nvars:
            raise ValueError(f"expected {self.nvars} values, got {len(values)}")
        total = 0
        for m, c in self.terms.items():
            term = c
            for v, e in zip(values, m):
                if e == 1:
                    term = term * v
                elif e:
                    term = term * v**e
            total = total + term
        return total

    __call__ = evaluate

    def substitute(self, assignments: dict[int, object]) -> "Polynomial":
        """Replace variables by constants or polynomials (same variable set)."""
        result = self._like({})
        for m, c in self.terms.items():
            term = Polynomial.constant(c, self.nvars, self.weights)
            rest = list(m)
            for i, val in assignments.items():
                e = m[i]
                rest[i] = 0
                if e:
                    term = term * (val**e if isinstance(val, Polynomial) else val**e)
            term = term * self._like({tuple(rest): 1})
            result = result + term
        return result

    def drop_variables(self, indices: Iterable[int]) -> "Polynomial":
        """Set the listed variables to zero."""
        idx = tuple(indices)
        return self._like({m: c for m, c in self.terms.items() if all(m[i] == 0 for i in idx)})

    def restrict(self, keep: Sequence[int], weights=None) -> "Polynomial":
        """Project onto the variables in ``keep`` (others must not occur)."""
        out = {}
        for m, c in self.terms.items():
            if any(m[i] for i in range(self.nvars) if i not in keep):
                raise ValueError("polynomial depends on a dropped variable")
            out[tuple(m[i] for i in keep)] = c
        w = weights if weights is not None else tuple(self.weights[i] for i in keep)
        return Polynomial(len(keep), out, w)

    def map_coefficients(self, fn) -> "Polynomial":
        return self._like({m: fn(c) for m, c in self.terms.items()})


class PolynomialMap:
    """A vector of polynomials over a common variable set."""

    __slots__ = ("components",)

    def __init__(self, components: Sequence[Polynomial]):
        comps = list(components)
        if comps:
            nv = comps[0].nvars
            if any(c.nvars != nv for c in comps):
                raise ValueError("components must share the variable set")
        self.components = comps

    def __len__(self):
        return len(self.components)

    def __getitem__(self, i):
        return self.components[i]

    def __iter__(self):
        return iter(self.components)

    def __eq__(self, other):
        return isinstance(other, PolynomialMap) and self.components == other.components

    def __add__(self, other):
        return PolynomialMap([a + b for a, b in zip(self.components, other.components, strict=True)])

    def __sub__(self, other):
        return PolynomialMap([a - b for a, b in zip(self.components, other.components, strict=True)])

    def scale(self, c):
        return PolynomialMap([p * c for p in self.components])

    def evaluate(self, values):
        return [p.evaluate(values) for p in self.components]

    __call__ = evaluate

    def constant_terms(self):
        return [p.constant_term() for p in self.components]

    def __repr__(self):
        return "PolynomialMap(" + ", ".join(repr(c) for c in self.components) + ")"


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**12)
    return Fraction(x)
