"""Stratified nilpotent Lie algebras and their Carnot groups.

Points of the group are written in exponential coordinates: a point is the
coefficient vector of ``log(p)`` in the fixed graded basis ``X_{r,i}``.
Basis elements are addressed by a flat index; the flat order is stratum-major,
so it coincides with the lexicographic order on ``(r, i)`` labels.

Two scalar regimes are supported by every group operation:

* exact: sequences of ``Fraction`` (tuples in, tuples out);
* floating: numpy arrays of shape ``(..., n)`` (batched over leading axes).
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .polynomial import Polynomial, PolynomialMap, as_fraction

BUNDLED = ("h3", "h5", "engel")


@dataclass(frozen=True)
class Violation:
    axiom: str
    basis: tuple
    detail: str = ""


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def axioms(self) -> set[str]:
        return {v.axiom for v in self.violations}

    def __len__(self):
        return len(self.violations)

    def to_dict(self):
        return {
            "ok": self.ok,
            "violations": [
                {"axiom": v.axiom, "basis": [list(b) if isinstance(b, tuple) else b for b in v.basis],
                 "detail": v.detail}
                for v in self.violations
            ],
        }


@dataclass(frozen=True)
class OperatorWord:
    """Product ``X_{a_1} ... X_{a_m}`` of left-invariant fields (flat indices)."""

    letters: tuple[int, ...]

    def __len__(self):
        return len(self.letters)

    def is_ordered(self) -> bool:
        return all(a <= b for a, b in zip(self.letters, self.letters[1:]))

    def weight(self, alg: "StratifiedAlgebra") -> int:
        return sum(alg.stratum_of[a] for a in self.letters)


class RootSum:
    """Exact value of a quasinorm: a formal sum of ``radicand ** (1/root)``.

    Two root sums compare equal when their canonical term multisets agree,
    which certifies exact equality of the real numbers.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: Iterable[tuple[int, Fraction]]):
        self.terms = tuple(sorted((r, Fraction(a)) for r, a in terms if a != 0))

    def scale(self, lam) -> "RootSum":
        lam = Fraction(lam)
        if lam < 0:
            raise ValueError("scale factor must be nonnegative")
        return RootSum((r, a * lam**r) for r, a in self.terms)

    def __eq__(self, other):
        if isinstance(other, RootSum):
            return self.terms == other.terms
        return NotImplemented

    def __hash__(self):
        return hash(self.terms)

    def __float__(self):
        return float(sum(float(a) ** (1.0 / r) for r, a in self.terms))

    def rational_value(self) -> Fraction | None:
        """Exact rational value when every radicand is a perfect power."""
        total = Fraction(0)
        for r, a in self.terms:
            root = _exact_root(a, r)
            if root is None:
                return None
            total += root
        return total

    def __repr__(self):
        return " + ".join(f"({a})^(1/{r})" for r, a in self.terms) or "0"


def _exact_root(a: Fraction, r: int) -> Fraction | None:
    def iroot(n):
        x = round(n ** (1.0 / r)) if n < 2**1000 else int(math.exp(math.log(n) / r))
        for cand in (x - 1, x, x + 1):
            if cand >= 0 and cand**r == n:
                return cand
        return None

    num, den = iroot(a.numerator), iroot(a.denominator)
    if num is None or den is None:
        return None
    return Fraction(num, den)


def _rank(rows: list[list[Fraction]]) -> int:
    """Exact rank by Gaussian elimination."""
    m = [list(r) for r in rows if any(x != 0 for x in r)]
    if not m:
        return 0
    rank, ncols = 0, len(m[0])
    for col in range(ncols):
        piv = next((i for i in range(rank, len(m)) if m[i][col] != 0), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        for i in range(len(m)):
            if i != rank and m[i][col] != 0:
                f = m[i][col] / m[rank][col]
                m[i] = [a - f * b for a, b in zip(m[i], m[rank])]
        rank += 1
        if rank == len(m):
            break
    return rank


class StratifiedAlgebra:
    """Graded nilpotent Lie algebra ``V_1 + ... + V_s`` and its Carnot group.

    ``structure_constants`` maps a pair of flat basis indices ``(a, b)`` to a
    dict ``{c: coeff}`` giving ``[X_a, X_b] = sum coeff X_c``. Missing pairs
    are zero. The table is used as given, so a malformed table can be
    inspected with :meth:`validate`.
    """

    def __init__(self, strata_dims: Sequence[int], structure_constants: dict,
                 scalar_mode: str = "rational", name: str = ""):
        if scalar_mode not in ("rational", "floating"):
            raise ValueError("scalar_mode must be 'rational' or 'floating'")
        dims = tuple(int(k) for k in strata_dims)
        if not dims or any(k <= 0 for k in dims):
            raise ValueError("strata dimensions must be positive integers")
        self.strata_dims = dims
        self.scalar_mode = scalar_mode
        self.name = name
        table: dict[tuple[int, int], dict[int, Fraction]] = {}
        for (a, b), out in structure_constants.items():
            entry = {int(c): as_fraction(v) for c, v in out.items() if v != 0}
            if entry:
                table[(int(a), int(b))] = entry
        self.structure_constants = table
        self.labels = tuple((r + 1, i + 1) for r, k in enumerate(dims) for i in range(k))
        self.stratum_of = tuple(r for r, _ in self.labels)

    # --- derived quantities
    @property
    def step(self) -> int:
        return len(self.strata_dims)

    @property
    def n(self) -> int:
        return sum(self.strata_dims)

    @property
    def n_h(self) -> int:
        return sum((r + 1) * k for r, k in enumerate(self.strata_dims))

    @property
    def k(self) -> int:
        return self.strata_dims[0]

    def stratum_indices(self, r: int) -> list[int]:
        """Flat indices of the basis of ``V_r`` (``r`` is 1-based)."""
        return [a for a, s in enumerate(self.stratum_of) if s == r]

    def index(self, r: int, i: int) -> int:
        """Flat index of the label ``(r, i)`` (both 1-based)."""
        try:
            return self.labels.index((r, i))
        except ValueError:
            raise IndexError(f"basis label {(r, i)} out of range") from None

    def __repr__(self):
        return f"StratifiedAlgebra({self.name or 'anon'}, dims={self.strata_dims})"

    def with_mode(self, scalar_mode: str) -> "StratifiedAlgebra":
        alg = StratifiedAlgebra(self.strata_dims, self.structure_constants, scalar_mode, self.name)
        return alg

    # --- validation
    def validate(self) -> ValidationReport:
        rep = ValidationReport()
        n, s = self.n, self.step
        for (a, b), out in self.structure_constants.items():
            if not (0 <= a < n and 0 <= b < n) or any(not 0 <= c < n for c in out):
                rep.violations.append(Violation("syntax", (a, b), "index out of range"))
        if rep.violations:
            return rep
        for a in range(n):
            for b in range(a, n):
                cab = self.structure_constants.get((a, b), {})
                cba = self.structure_constants.get((b, a), {})
                keys = set(cab) | set(cba)
                if any(cab.get(c, 0) != -cba.get(c, 0) for c in keys):
                    rep.violations.append(
                        Violation("antisymmetry", (self.labels[a], self.labels[b]),
                                  f"c[a,b]={dict(cab)} c[b,a]={dict(cba)}"))
        for (a, b), out in self.structure_constants.items():
            target = self.stratum_of[a] + self.stratum_of[b]
            bad = [c for c in out if self.stratum_of[c] != target]
            if bad:
                rep.violations.append(
                    Violation("grading", (self.labels[a], self.labels[b]),
                              f"lands in strata {sorted({self.stratum_of[c] for c in bad})}, expected {target}"))
        basis = [self._basis_vec(a) for a in range(n)]
        for a, b, c in itertools.combinations(range(n), 3):
            x, y, z = basis[a], basis[b], basis[c]
            jac = [p + q + r for p, q, r in zip(
                self.bracket(x, self.bracket(y, z)),
                self.bracket(y, self.bracket(z, x)),
                self.bracket(z, self.bracket(x, y)))]
            if any(v != 0 for v in jac):
                rep.violations.append(
                    Violation("jacobi", (self.labels[a], self.labels[b], self.labels[c]), f"sum={jac}"))
        v1 = self.stratum_indices(1)
        for r in range(1, s):
            rows = []
            for i in v1:
                for j in self.stratum_indices(r):
                    vec = self.bracket(basis[i], basis[j])
                    rows.append([vec[c] for c in self.stratum_indices(r + 1)])
            rk = _rank(rows)
            if rk != self.strata_dims[r]:
                rep.violations.append(
                    Violation("generation", (r, r + 1),
                              f"rank [V1,V{r}] = {rk}, dim V{r + 1} = {self.strata_dims[r]}"))
        if s >= 2:
            if self.strata_dims[0] < 2 or self.strata_dims[1] < 1 or self.n_h < 4:
                rep.violations.append(
                    Violation("dimension", (), f"need k1>=2, k2>=1, n_h>=4; got {self.strata_dims}, n_h={self.n_h}"))
        return rep

    def _basis_vec(self, a: int) -> list[Fraction]:
        v = [Fraction(0)] * self.n
        v[a] = Fraction(1)
        return v

    # --- Lie bracket
    def bracket(self, a, b):
        """Bilinear extension of the structure constants.

        Works for sequences of exact scalars, numpy arrays ``(..., n)``, and
        sequences of :class:`Polynomial`.
        """
        if len(a) != self.n or len(b) != self.n:
            raise ValueError(f"expected vectors of length {self.n}")
        if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
            a = np.asarray(a, dtype=float)
            b = np.asarray(b, dtype=float)
            out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
            for (i, j), res in self.structure_constants.items():
                prod = a[..., i] * b[..., j]
                for c, coeff in res.items():
                    out[..., c] += float(coeff) * prod
            return out
        out = [0] * self.n
        for (i, j), res in self.structure_constants.items():
            ai, bj = a[i], b[j]
            if _is_zero(ai) or _is_zero(bj):
                continue
            prod = ai * bj
            for c, coeff in res.items():
                out[c] = out[c] + prod * coeff
        return out

    def bracket_basis(self, a: int, b: int) -> dict[int, Fraction]:
        return dict(self.structure_constants.get((a, b), {}))

    # --- group law
    @cached_property
    def _group_law(self) -> list[Polynomial]:
        """Coordinates of ``exp(x) exp(y)`` as polynomials in ``(x, y)``."""
        n = self.n
        weights = self.stratum_of * 2
        xs = [Polynomial.variable(i, 2 * n, weights) for i in range(n)]
        ys = [Polynomial.variable(n + i, 2 * n, weights) for i in range(n)]
        z = bch_series(xs, ys, self.bracket, self.step)
        return [zi if isinstance(zi, Polynomial) else Polynomial.constant(zi, 2 * n, weights) for zi in z]

    @cached_property
    def _law_corrections(self) -> list[tuple[Polynomial, Polynomial]]:
        """Nonlinear part of the group law, split for exact/float evaluation."""
        n = self.n
        out = []
        for j, zj in enumerate(self._group_law):
            lin = Polynomial.variable(j, 2 * n, zj.weights) + Polynomial.variable(n + j, 2 * n, zj.weights)
            corr = zj - lin
            out.append((corr, corr.map_coefficients(float)))
        return out

    def group_law_polynomials(self) -> PolynomialMap:
        return PolynomialMap(self._group_law)

    def coerce(self, p):
        """Convert to the algebra's native scalar representation."""
        if self.scalar_mode == "floating" or isinstance(p, np.ndarray):
            arr = np.asarray(p, dtype=float)
            if arr.shape[-1] != self.n:
                raise ValueError(f"point must have {self.n} coordinates")
            return arr
        if len(p) != self.n:
            raise ValueError(f"point must have {self.n} coordinates")
        return tuple(as_fraction(x) for x in p)

    def identity(self):
        if self.scalar_mode == "floating":
            return np.zeros(self.n)
        return (Fraction(0),) * self.n

    def multiply(self, p, q):
        """``exp^{-1}(exp(p) exp(q))`` via the truncated BCH series."""
        if isinstance(p, np.ndarray) or isinstance(q, np.ndarray) or self.scalar_mode == "floating":
            p = np.asarray(p, dtype=float)
            q = np.asarray(q, dtype=float)
            if p.shape[-1] != self.n or q.shape[-1] != self.n:
                raise ValueError("algebra mismatch: wrong coordinate count")
            p, q = np.broadcast_arrays(p, q)
            vals = [p[..., i] for i in range(self.n)] + [q[..., i] for i in range(self.n)]
            out = p + q
            out = np.array(out, dtype=float, copy=True)
            for j, (_, corr) in enumerate(self._law_corrections):
                if corr.terms:
                    out[..., j] += corr.evaluate(vals)
            return out
        if len(p) != self.n or len(q) != self.n:
            raise ValueError("algebra mismatch: wrong coordinate count")
        vals = list(p) + list(q)
        return tuple(p[j] + q[j] + (corr.evaluate(vals) if corr.terms else 0)
                     for j, (corr, _) in enumerate(self._law_corrections))

    def product(self, *points):
        out = points[0]
        for q in points[1:]:
            out = self.multiply(out, q)
        return out

    def inverse(self, p):
        if isinstance(p, np.ndarray):
            return -p
        return tuple(-x for x in p)

    def dilate(self, lam, p):
        """Dilation ``delta_lam``: stratum ``r`` coordinates scale by ``lam**r``."""
        if lam <= 0:
            raise ValueError("dilation factor must be positive")
        if isinstance(p, np.ndarray):
            scale = np.array([float(lam) ** r for r in self.stratum_of])
            return p * scale
        return tuple(x * lam**r for x, r in zip(p, self.stratum_of))

    def quasinorm(self, p, exact: bool = False):
        """``sum |x_{r,i}|^{1/r}``; exact mode returns a :class:`RootSum`."""
        if exact:
            return RootSum((r, abs(as_fraction(x))) for x, r in zip(p, self.stratum_of))
        if isinstance(p, np.ndarray):
            pw = np.array([1.0 / r for r in self.stratum_of])
            return np.sum(np.abs(p) ** pw, axis=-1)
        return float(sum(abs(float(x)) ** (1.0 / r) for x, r in zip(p, self.stratum_of)))

    def gauge(self, p):
        """Smooth homogeneous gauge ``(sum |x_{r,i}|^{2 s!/r})^{1/(2 s!)}``."""
        e = 2 * math.factorial(self.step)
        p = np.asarray(p, dtype=float)
        pw = np.array([e / r for r in self.stratum_of])
        return np.sum(p**pw, axis=-1) ** (1.0 / e)

    # --- left-invariant vector fields
    @cached_property
    def _fields(self) -> tuple[tuple[Polynomial, ...], ...]:
        n = self.n
        ys = list(range(n, 2 * n))
        keep = list(range(n))
        out = []
        for a in range(n):
            coeffs = []
            for zj in self._group_law:
                d = zj.diff(n + a).drop_variables(ys)
                coeffs.append(d.restrict(keep, self.stratum_of))
            out.append(tuple(coeffs))
        return tuple(out)

    def left_invariant_field(self, a) -> tuple[Polynomial, ...]:
        """Coefficients of ``X_a`` in the coordinate frame ``d/dx_j``.

        ``a`` is a flat index or an ``(r, i)`` label.
        """
        if isinstance(a, tuple):
            a = self.index(*a)
        if not 0 <= a < self.n:
            raise IndexError(f"field index {a} out of range")
        return self._fields[a]

    def field_matrix(self, p) -> np.ndarray:
        """Matrix ``M[a, j]`` of field coefficients at ``p`` (floating)."""
        p = np.asarray(p, dtype=float)
        vals = [p[..., i] for i in range(self.n)]
        M = np.zeros(p.shape[:-1] + (self.n, self.n))
        for a, coeffs in enumerate(self._fields):
            for j, c in enumerate(coeffs):
                if c.terms:
                    M[..., a, j] = c.map_coefficients(float).evaluate(vals)
        return M

    def apply_letter(self, a: int, poly: Polynomial) -> Polynomial:
        out = Polynomial.zero(poly.nvars, poly.weights)
        for j, c in enumerate(self._fields[a]):
            if c.terms:
                dj = poly.diff(j)
                if dj.terms:
                    out = out + c * dj
        return out

    def apply_field(self, word, target):
        """Apply the operator word to a polynomial or polynomial map.

        Letters act right-to-left, i.e. ``X_{a1} X_{a2}`` means ``X_{a1}(X_{a2} f)``.
        """
        letters = word.letters if isinstance(word, OperatorWord) else tuple(word)
        if isinstance(target, PolynomialMap):
            return PolynomialMap([self.apply_field(letters, c) for c in target])
        out = target
        for a in reversed(letters):
            out = self.apply_letter(a, out)
        return out

    def coordinate_polynomial(self, j: int) -> Polynomial:
        return Polynomial.variable(j, self.n, self.stratum_of)

    # --- operator words
    def ordered_words(self, max_len: int | None = None) -> list[OperatorWord]:
        """All ordered words of length ``1..max_len`` (default: step), shortest first."""
        max_len = self.step if max_len is None else max_len
        words = []
        for m in range(1, max_len + 1):
            for combo in itertools.combinations_with_replacement(range(self.n), m):
                words.append(OperatorWord(combo))
        return words

    def normalize_operator_word(self, word) -> dict[OperatorWord, Fraction]:
        """Rewrite a word as a combination of ordered words with equal weight."""
        letters = word.letters if isinstance(word, OperatorWord) else tuple(word)
        out = self._normalize(letters)
        return {OperatorWord(w): c for w, c in out.items() if c != 0}

    def _normalize(self, letters: tuple[int, ...]) -> dict[tuple[int, ...], Fraction]:
        cache = self.__dict__.setdefault("_normalize_cache", {})
        if letters in cache:
            return cache[letters]
        descent = next((i for i in range(len(letters) - 1) if letters[i] > letters[i + 1]), None)
        if descent is None:
            result = {letters: Fraction(1)}
        else:
            i = descent
            a, b = letters[i], letters[i + 1]
            result: dict[tuple[int, ...], Fraction] = {}
            swapped = letters[:i] + (b, a) + letters[i + 2:]
            _accumulate(result, self._normalize(swapped), Fraction(1))
            # X_a X_b = X_b X_a + [X_a, X_b]
            for c, coeff in self.structure_constants.get((a, b), {}).items():
                shorter = letters[:i] + (c,) + letters[i + 2:]
                _accumulate(result, self._normalize(shorter), coeff)
            result = {w: c for w, c in result.items() if c != 0}
        cache[letters] = result
        return result

    # --- serialization
    def to_json(self) -> dict:
        brackets = []
        for (a, b), out in sorted(self.structure_constants.items()):
            brackets.append({
                "a": list(self.labels[a]),
                "b": list(self.labels[b]),
                "out": [[str(v), list(self.labels[c])] for c, v in sorted(out.items())],
            })
        return {"name": self.name, "step": self.step, "strata_dims": list(self.strata_dims), "brackets": brackets}


def _is_zero(x) -> bool:
    if isinstance(x, Polynomial):
        return not x.terms
    try:
        return x == 0
    except Exception:
        return False


def _accumulate(target: dict, src: dict, coeff):
    for w, c in src.items():
        v = target.get(w, 0) + coeff * c
        target[w] = v


def bch_series(g, h, bracket, step: int):
    """Truncated Baker-Campbell-Hausdorff series ``log(exp g exp h)``.

    Uses the nested-commutator (Dynkin) form; terms whose total bracket
    length exceeds ``step`` vanish by nilpotency and are never generated.
    """
    n = len(g)
    total = [0] * n
    for m in range(1, step + 1):
        for blocks in _dynkin_blocks(m, step):
            seq = []
            for r_i, s_i in blocks:
                seq.extend([g] * r_i)
                seq.extend([h] * s_i)
            length = len(seq)
            denom = length
            for r_i, s_i in blocks:
                denom *= math.factorial(r_i) * math.factorial(s_i)
            coeff = Fraction((-1) ** (m - 1), m * denom)
            term = seq[-1]
            for x in reversed(seq[:-1]):
                term = bracket(x, term)
            for j in range(n):
                if not _is_zero(term[j]):
                    total[j] = total[j] + term[j] * coeff
    return total


def _dynkin_blocks(m: int, step: int):
    pairs = [(r, s) for r in range(step + 1) for s in range(step + 1) if 0 < r + s <= step]
    for blocks in itertools.product(pairs, repeat=m):
        if sum(r + s for r, s in blocks) > step:
            continue
        r_last, s_last = blocks[-1]
        # innermost bracket [h,h] or [g,g] vanishes
        if s_last > 1 or (s_last == 0 and r_last > 1):
            continue
        yield blocks


# --- I/O


def _parse_coeff(v) -> Fraction:
    if isinstance(v, str):
        return Fraction(v)
    return as_fraction(v)


def algebra_from_json(data: dict, scalar_mode: str = "rational", complete: bool = True) -> StratifiedAlgebra:
    """Build an algebra from a group description (parsed JSON object).

    With ``complete=True`` a bracket given for one ordering only is mirrored
    by antisymmetry; pairs given in both orders are kept verbatim.
    """
    dims = data["strata_dims"]
    if "step" in data and int(data["step"]) != len(dims):
        raise ValueError("step does not match the number of strata")
    labels = [(r + 1, i + 1) for r, k in enumerate(dims) for i in range(k)]
    pos = {lab: j for j, lab in enumerate(labels)}
    table: dict[tuple[int, int], dict[int, Fraction]] = {}
    for br in data.get("brackets", []):
        try:
            a = pos[tuple(br["a"])]
            b = pos[tuple(br["b"])]
        except KeyError as e:
            raise ValueError(f"unknown basis label {e}") from None
        out = {}
        for coeff, lab in br["out"]:
            if tuple(lab) not in pos:
                raise ValueError(f"unknown basis label {lab}")
            c = pos[tuple(lab)]
            out[c] = out.get(c, 0) + _parse_coeff(coeff)
        table[(a, b)] = out
    if complete:
        for (a, b), out in list(table.items()):
            if (b, a) not in table and a != b:
                table[(b, a)] = {c: -v for c, v in out.items()}
    return StratifiedAlgebra(dims, table, scalar_mode, data.get("name", ""))


def load_algebra(source, scalar_mode: str = "rational") -> StratifiedAlgebra:
    """Load a bundled algebra by name (``h3``, ``h5``, ``engel``) or a JSON path."""
    if isinstance(source, str) and source in BUNDLED:
        text = resources.files("carnot").joinpath("data", f"{source}.json").read_text(encoding="utf-8")
        return algebra_from_json(json.loads(text), scalar_mode)
    return algebra_from_json(json.loads(Path(source).read_text(encoding="utf-8")), scalar_mode)


def heisenberg(scalar_mode: str = "rational") -> StratifiedAlgebra:
    return load_algebra("h3", scalar_mode)
