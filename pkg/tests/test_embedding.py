import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from carnot import load_algebra
from carnot.embedding import (EmbeddingConfig, EmbeddingMap, Jet, LacunaryFamily, ResolutionError,
                              assemble_weierstrass, assouad_baseline, bilinear_form_B, build_isometry_field,
                              circle_increment, concatenate_scales, explicit_solve, horizontal_jet, lowpass,
                              mollifier_lowpass, predicted_holder_M)
from carnot.harness import distortion, fit_loglog_slope, generate_heisenberg_ball, sweep_epsilon
from carnot.multilinear import SingularMapError
from carnot.nets import PointCloud
from carnot.oscillator import as_vector_map, sample_ball, veronese_map


@pytest.fixture(scope="module")
def alg():
    return load_algebra("h3", "floating")


@pytest.fixture(scope="module")
def vero(alg):
    return as_vector_map(veronese_map(alg), alg.n)


def coord(i, width=1, slot=0):
    def fn(P):
        P = np.atleast_2d(P)
        out = np.zeros((P.shape[0], width))
        out[:, slot] = P[:, i]
        return out
    return fn


def test_config_validation():
    assert EmbeddingConfig(A=16).a == 4
    for bad in ({"eps": 0.5}, {"eps": 0.0}, {"M1": 3, "M2": 1}, {"A": 12}):
        with pytest.raises(ValueError):
            EmbeddingConfig(**bad)


def test_B_linear_coordinate(alg):
    B = bilinear_form_B(alg, coord(0), coord(0), np.array([0.3, -0.2, 0.7]))
    assert np.allclose(B, [[1, 0], [0, 0]], atol=1e-10)


def test_B_constant_and_orthogonal(alg):
    P = sample_ball(alg, 20, 1.0, np.random.default_rng(0))
    const = lambda Q: np.ones((np.atleast_2d(Q).shape[0], 2))
    assert np.all(bilinear_form_B(alg, const, coord(1, 2), P) == 0)
    assert np.allclose(bilinear_form_B(alg, coord(0, 2, 0), coord(1, 2, 1), P), 0, atol=1e-12)


def test_B_symmetric(alg, vero):
    P = sample_ball(alg, 20, 1.0, np.random.default_rng(1))
    shifted = lambda Q: vero(Q)[:, ::-1] ** 2
    B = bilinear_form_B(alg, shifted, vero, P)
    assert np.array_equal(B, np.swapaxes(B, 1, 2))


def test_explicit_zero_rhs(alg, vero):
    phi = explicit_solve(alg, vero, np.zeros((2, 2)), np.array([0.2, 0.1, -0.3]))
    assert np.all(phi == 0)


def test_explicit_veronese_identity_rows(alg, vero):
    phi = explicit_solve(alg, vero, np.eye(2), np.zeros(3))
    # exact derivative rows from the symbolic fields
    pm = veronese_map(load_algebra("h3"))
    h3 = load_algebra("h3")

    def row(word):
        return np.array([float(c.evaluate([0, 0, 0])) for c in h3.apply_field(word, pm)])

    for i in range(2):
        assert abs(phi @ row((i,))) < 1e-8
        for j in range(i, 2):
            assert abs(phi @ row((i, j)) + (1.0 if i == j else 0.0)) < 1e-8
    assert abs(phi @ row((2,))) < 1e-8


def test_explicit_singular(alg):
    flat = lambda Q: np.zeros((np.atleast_2d(Q).shape[0], 6))
    with pytest.raises(SingularMapError):
        explicit_solve(alg, flat, np.eye(2), np.zeros(3))


def smooth_F(P):
    P = np.atleast_2d(P)
    out = np.zeros((len(P), 2, 2))
    out[:, 0, 0] = 1 + 0.3 * np.sin(P[:, 0])
    out[:, 1, 1] = 1 + P[:, 1] ** 2
    out[:, 0, 1] = out[:, 1, 0] = 0.2 * np.cos(P[:, 2])
    return out


def explicit_residuals(alg, psi, grid, steps):
    errs = []
    for h in steps:
        phi = lambda Q, h=h: explicit_solve(alg, psi, smooth_F, Q, h=h)
        errs.append(float(np.abs(bilinear_form_B(alg, phi, psi, grid, h=h) - smooth_F(grid)).max()))
    return errs


def test_explicit_convergence(alg, vero):
    g = np.linspace(-0.5, 0.5, 3)
    grid = np.stack(np.meshgrid(g, g, g, indexing="ij"), -1).reshape(-1, 3)
    e = explicit_residuals(alg, vero, grid, [0.1, 0.05])
    assert e[0] / e[1] >= 1.8


def test_lowpass_constant(alg):
    axes = [np.linspace(-1, 1, 9)] * 3
    out = mollifier_lowpass(alg, axes, np.full((9, 9, 9), 2.5), 1.0)
    assert np.allclose(out, 2.5, atol=1e-8)


def test_lowpass_refuses_coarse_grid(alg):
    axes = [np.linspace(-1, 1, 3)] * 3
    with pytest.raises(ResolutionError):
        mollifier_lowpass(alg, axes, np.zeros((3, 3, 3)), 1.0)


def test_lowpass_tiny_kernel(alg):
    # a kernel narrower than any grid step is refused on samples, so use the callable form
    axes = [np.linspace(-1, 1, 9)] * 3
    P = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, 3)
    f = lambda Q: np.sin(np.atleast_2d(Q)[:, 0]) + Q[:, 1] * Q[:, 2]
    with pytest.raises(ResolutionError):
        mollifier_lowpass(alg, axes, f(P).reshape(9, 9, 9), 1e7)
    assert np.allclose(lowpass(alg, f, 1e7)(P), f(P), atol=1e-6)


def test_lowpass_damps_oscillation(alg):
    N = 1.0
    wave = lambda P: np.sin(2 * np.pi * 8 * N * np.atleast_2d(P)[:, 0])
    P = sample_ball(alg, 40, 1.0, np.random.default_rng(0))
    raw = np.abs(wave(P + np.array([1 / (32 * N), 0, 0]))).max()
    smoothed = np.abs(lowpass(alg, wave, N, per_axis=25)(P)).max()
    assert raw / smoothed >= 4


@settings(max_examples=15)
@given(st.floats(0.25, 4), st.floats(0.5, 8))
def test_lowpass_scaling_covariance(lam, N):
    alg = load_algebra("h3", "floating")
    f = lambda P: np.cos(np.atleast_2d(P) @ np.array([1.0, -0.5, 0.3]))
    P = sample_ball(alg, 10, 1.0, np.random.default_rng(2))
    lhs = lowpass(alg, lambda Q: f(alg.dilate(lam, Q)), N, per_axis=5)(P)
    rhs = lowpass(alg, f, N / lam, per_axis=5)(alg.dilate(lam, P))
    assert np.allclose(lhs, rhs, atol=1e-12)


def constant_jet(N):
    first = np.zeros((N, 2, 8))
    second = np.zeros((N, 2, 2, 8))
    vertical = np.zeros((N, 1, 8))
    first[:, 0, 0] = first[:, 1, 1] = 1
    second[:, 0, 0, 2] = 1
    second[:, 0, 1, 3] = second[:, 1, 0, 3] = 1
    second[:, 1, 1, 4] = 1
    vertical[:, 0, 5] = 1
    return Jet(first, second, vertical)


def test_isometry_constant_rows(alg):
    cloud = PointCloud.from_carnot(alg, sample_ball(alg, 30, 1.0, np.random.default_rng(0)))
    iso = build_isometry_field(alg, None, 1.0, 1.0, cloud, 2, jet=constant_jet(30))
    assert iso.constant
    assert np.all(iso.columns == iso.columns[:1])
    assert np.allclose(iso.columns[0][:, :6], 0, atol=1e-12)
    assert np.allclose(iso.columns[0] @ iso.columns[0].T, np.eye(2), atol=1e-12)


def test_isometry_empty(alg, vero):
    cloud = PointCloud.from_carnot(alg, sample_ball(alg, 5, 1.0, np.random.default_rng(0)))
    iso = build_isometry_field(alg, vero, 2.0, 2.0, cloud, 0)
    assert iso.columns.shape == (5, 0, 9) and iso.perp_residual == 0


def test_isometry_too_many_columns(alg, vero):
    cloud = PointCloud.from_carnot(alg, sample_ball(alg, 5, 1.0, np.random.default_rng(0)))
    with pytest.raises(ValueError):
        build_isometry_field(alg, vero, 2.0, 2.0, cloud, 4)


def test_isometry_veronese_cloud(alg, vero):
    cloud = PointCloud.from_carnot(alg, sample_ball(alg, 200, 1.0, np.random.default_rng(0)))
    iso = build_isometry_field(alg, vero, 2.0, 2.0, cloud, 3)
    assert iso.perp_residual <= 1e-7
    G = np.einsum("ncd,ned->nce", iso.columns, iso.columns)
    assert np.abs(G - np.eye(3)).max() < 1e-9
    assert all(r.ok for r in iso.reports)


def test_predicted_M():
    assert predicted_holder_M(2, 0.5) == pytest.approx(math.sqrt(2), abs=1e-15)


@given(st.floats(-50, 50), st.floats(1e-3, 1e3))
def test_circle_increment_closed_form(x, s):
    inc = circle_increment(np.array([x]), np.array([1 / s]))[0, 0]
    assert np.allclose(inc, [s * (math.cos(x / s) - 1), s * math.sin(x / s)], atol=1e-9 * max(1, s))


def test_single_scale_family(alg):
    P = sample_ball(alg, 30, 2.0, np.random.default_rng(0))
    emb = assemble_weierstrass(LacunaryFamily(alg, 2.0, 0, 0), 0.25)
    oracle = np.concatenate([np.stack([np.cos(P[:, i]) - 1, np.sin(P[:, i])], axis=1) for i in (0, 1)], axis=1)
    assert np.allclose(emb(P), oracle, atol=1e-12)
    assert np.all(emb(np.zeros(3)) == 0)


def test_pythagorean_identity(alg):
    eps, A = 0.25, 2.0
    fam = LacunaryFamily(alg, A, 0, 6, block_orthogonal=True)
    P = sample_ball(alg, 20, 2.0, np.random.default_rng(4))
    jet = horizontal_jet(alg, assemble_weierstrass(fam, eps), P)
    grad2 = np.sum(jet.first**2, axis=(1, 2))
    # each circle scale has unit speed along its own horizontal direction
    assert np.allclose(grad2, 2 * np.sum(A ** (-2 * eps * fam.scales)), atol=1e-9)


def test_shared_family_dimension(alg):
    fam = LacunaryFamily(alg, 2.0, 0, 5, block_orthogonal=False)
    assert assemble_weierstrass(fam, 0.25).dim == 4
    assert assemble_weierstrass(LacunaryFamily(alg, 2.0, 0, 5), 0.25).dim == 24


def test_concatenation_single(alg):
    phi1 = assemble_weierstrass(LacunaryFamily(alg, 2.0, 0, 4), 0.25)
    P = sample_ball(alg, 50, 2.0, np.random.default_rng(0))
    assert np.array_equal(concatenate_scales(phi1, alg, 1, 0.25)(P), phi1(P))


def test_concatenation_identity(alg):
    eps = 0.25
    phi1 = assemble_weierstrass(LacunaryFamily(alg, 8.0, 0, 4), eps)
    full = concatenate_scales(phi1, alg, 3, eps)
    assert full.dim == 3 * phi1.dim
    P = sample_ball(alg, 200, 3.0, np.random.default_rng(0))
    for m in (1, 2, 3):
        block = full(alg.dilate(2.0 ** (m - 1), P))[:, (m - 1) * phi1.dim:m * phi1.dim]
        assert np.abs(block - 2.0 ** ((m - 1) * (1 - eps)) * phi1(P)).max() <= 1e-10


def test_assouad_two_points():
    cloud = PointCloud(np.array([[0.0], [3.0]]))
    emb = assouad_baseline(cloud, 0.25)
    assert distortion(cloud, emb(np.arange(2)), 0.75).distortion == pytest.approx(1.0)


def test_assouad_line():
    cloud = PointCloud(np.arange(10.0)[:, None])
    emb = assouad_baseline(cloud, 0.25)
    assert distortion(cloud, emb(np.arange(10)), 0.75).distortion <= 20


def test_assouad_errors_and_determinism():
    with pytest.raises(ValueError):
        assouad_baseline(PointCloud(np.zeros((1, 1))), 0.25)
    with pytest.raises(ValueError):
        assouad_baseline(PointCloud(np.arange(3.0)[:, None]), 1.5)
    cloud = generate_heisenberg_ball(4)
    a, b = assouad_baseline(cloud, 0.125), assouad_baseline(cloud, 0.125)
    idx = np.arange(len(cloud))
    assert np.array_equal(a(idx), b(idx)) and a.digest == b.digest


@pytest.mark.slow
def test_assouad_epsilon_rate_on_lattice_ball():
    cloud = generate_heisenberg_ball(8)
    idx = np.arange(len(cloud))
    rows = sweep_epsilon(cloud, lambda e: assouad_baseline(cloud, e)(idx), [2.0**-j for j in range(2, 7)])
    fit = fit_loglog_slope(rows)
    assert fit.dropped == 0
    # distortion ~ eps^{-1}: slope vs log(eps) in [-1.3, -0.7]
    assert 0.7 <= fit.slope <= 1.3
