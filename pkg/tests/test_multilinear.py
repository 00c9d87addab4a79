from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from hypothesis.extra.numpy import arrays

from carnot.multilinear import (DegeneratePrefixError, SingularMapError, exact_determinant,
                                exact_gram_determinant, exact_wedge_norm, gram_determinant, gram_schmidt,
                                polarized_wedge_inner, pseudoinverse, wedge_cauchy_schwarz_check,
                                wedge_norm, wedge_norm_batch)

from oracles import exterior_coordinates

floats = st.floats(-3, 3, allow_nan=False, width=64)


def tuples(max_n=3, max_D=6):
    return st.integers(1, max_D).flatmap(
        lambda D: st.integers(1, min(max_n, D)).flatmap(lambda n: arrays(np.float64, (n, D), elements=floats)))


def test_wedge_examples():
    assert wedge_norm(np.eye(3)[:2]) == pytest.approx(1.0)
    assert wedge_norm([[1, 1, 0], [1, -1, 0]]) == pytest.approx(2.0)
    v = np.array([1.0, 2.0, -1.0])
    assert wedge_norm([v, 2 * v]) == 0.0
    assert wedge_norm(np.zeros((0, 4))) == 1.0
    with pytest.raises(ValueError):
        wedge_norm([[1.0, 2.0], [1.0]])


def test_wedge_matches_exterior_coordinates_random():
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        D = int(rng.integers(1, 7))
        n = int(rng.integers(1, min(3, D) + 1))
        V = rng.normal(size=(n, D))
        ref = np.linalg.norm(exterior_coordinates(V))
        assert wedge_norm(V) == pytest.approx(ref, rel=1e-9, abs=1e-12)


@given(tuples())
def test_wedge_matches_exterior_coordinates(V):
    ref = np.linalg.norm(exterior_coordinates(V))
    assert wedge_norm(V) == pytest.approx(ref, rel=1e-7, abs=1e-6 * max(1.0, np.abs(V).max()) ** V.shape[0])


def test_batch_agrees():
    rng = np.random.default_rng(2)
    V = rng.normal(size=(20, 3, 5))
    np.testing.assert_allclose(wedge_norm_batch(V), [wedge_norm(v) for v in V], rtol=1e-9)


def test_polarized_examples():
    E = np.eye(4)
    assert polarized_wedge_inner(E[:2], E[:2]) == pytest.approx(1.0)
    assert polarized_wedge_inner(E[:2], E[2:]) == 0.0
    rng = np.random.default_rng(1)
    for _ in range(50):
        U, V = rng.normal(size=(2, 3, 5))
        ref = exterior_coordinates(U) @ exterior_coordinates(V)
        assert polarized_wedge_inner(U, V) == pytest.approx(ref, rel=1e-9, abs=1e-12)
    with pytest.raises(ValueError):
        polarized_wedge_inner(E[:2], E[:3])


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
@given(arrays(np.float64, (3, 5), elements=floats), arrays(np.float64, (3, 5), elements=floats))
def test_polarized_is_symmetric_and_matches_norm(U, V):
    assert polarized_wedge_inner(U, V) == pytest.approx(polarized_wedge_inner(V, U), rel=1e-9, abs=1e-9)
    assert polarized_wedge_inner(U, U) == pytest.approx(wedge_norm(U) ** 2, rel=1e-7, abs=1e-7)


def test_cauchy_schwarz_examples():
    assert wedge_cauchy_schwarz_check(np.eye(4), 2)
    assert wedge_norm(np.eye(4)) == pytest.approx(wedge_norm(np.eye(4)[:2]) * wedge_norm(np.eye(4)[2:]))
    v = np.ones(3)
    assert wedge_cauchy_schwarz_check([v, v, np.eye(3)[0]], 1)
    rng = np.random.default_rng(5)
    for _ in range(10_000):
        n = int(rng.integers(2, 5))
        V = rng.normal(size=(n, 5))
        assert wedge_cauchy_schwarz_check(V, int(rng.integers(1, n)))


@given(arrays(np.float64, (4, 6), elements=floats), st.integers(1, 3))
def test_cauchy_schwarz_property(V, split):
    assert wedge_cauchy_schwarz_check(V, split, tol=1e-7)


def test_exact_helpers():
    assert exact_determinant([[Fraction(2), Fraction(1)], [Fraction(1), Fraction(1)]]) == 1
    assert exact_gram_determinant([[1, 1, 0], [1, -1, 0]]) == 4
    assert exact_wedge_norm([[1, 1, 0], [1, -1, 0]]) == 2
    assert gram_determinant([[1.0, 0.0]]) == pytest.approx(1.0)


def test_pseudoinverse_examples():
    np.testing.assert_allclose(pseudoinverse([[2.0, 0.0]]) @ [1.0], [0.5, 0.0])
    Q, _ = np.linalg.qr(np.random.default_rng(0).normal(size=(6, 3)))
    np.testing.assert_allclose(pseudoinverse(Q.T), Q, atol=1e-12)
    T = np.random.default_rng(1).normal(size=(4, 9))
    assert np.max(np.abs(T @ pseudoinverse(T) - np.eye(4))) <= 1e-10


def test_pseudoinverse_singular():
    with pytest.raises(SingularMapError) as err:
        pseudoinverse([[1.0, 2.0, 0.0], [2.0, 4.0, 0.0]])
    assert err.value.det == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(SingularMapError):
        pseudoinverse(np.ones((3, 2)))


@given(st.integers(1, 4).flatmap(lambda m: arrays(np.float64, (m, m + 3), elements=floats)))
def test_pseudoinverse_identities(T):
    try:
        P = pseudoinverse(T)
    except SingularMapError:
        return
    if np.linalg.cond(T) > 1e6:
        return
    np.testing.assert_allclose(T @ P, np.eye(T.shape[0]), atol=1e-8)
    np.testing.assert_allclose(T @ P @ T, T, atol=1e-8)
    np.testing.assert_allclose(P @ T @ P, P, atol=1e-8)
    np.testing.assert_allclose(P @ T, (P @ T).T, atol=1e-8)
    # minimum norm: the preimage lies in the row space
    y = np.arange(1.0, T.shape[0] + 1)
    x = P @ y
    lstsq = np.linalg.lstsq(T, y, rcond=None)[0]
    np.testing.assert_allclose(x, lstsq, atol=1e-7)


def test_gram_schmidt_examples():
    np.testing.assert_allclose(gram_schmidt(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(gram_schmidt([[1.0, 0.0], [1.0, 1.0]]), np.eye(2), atol=1e-15)
    W = np.random.default_rng(0).normal(size=(5, 8))
    V = gram_schmidt(W)
    assert np.max(np.abs(V @ V.T - np.eye(5))) <= 1e-10
    with pytest.raises(DegeneratePrefixError) as err:
        gram_schmidt([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    assert err.value.prefix_length == 2


@given(arrays(np.float64, (4, 7), elements=floats))
def test_gram_schmidt_properties(W):
    norms = np.linalg.norm(W, axis=1)
    assume(norms.min() > 1e-3)
    assume(min(wedge_norm(W[:i]) / np.prod(norms[:i]) for i in range(1, 5)) > 1e-4)
    V = gram_schmidt(W)
    assert np.max(np.abs(V @ V.T - np.eye(4))) <= 1e-9
    assert np.all(np.einsum("ij,ij->i", V, W) > 0)
    for i in range(1, 5):
        # prefix spans agree: W_i lies in span(V_1..V_i)
        proj = V[:i].T @ (V[:i] @ W[i - 1])
        assert np.linalg.norm(W[i - 1] - proj) <= 1e-8 * (1 + np.linalg.norm(W[i - 1]))
