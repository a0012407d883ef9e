import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fsplanewave.exceptions import ConfigurationError, DomainExitError, NearSingularError, SingularResolventError
from fsplanewave.operators import (
    FsParams,
    apply_neumann_series,
    coarse_hamiltonian,
    complement_min_eigenvalue,
    effective_interaction,
    fs_blocks,
    lambda_guard,
    lift,
    neumann_series,
    schur_exact_derivative,
    schur_exact_interaction,
    windowed_resolvent,
)
from fsplanewave.planewave import (
    FourierPotential,
    IndexWindow,
    PlanewaveBasis,
    kappa,
    laplacian_diagonal,
    potential_block,
    regularity_norm,
    spectral_norm_hermitian,
)

FOUR_PI2 = 4 * np.pi**2


def window(M, N, L=1.0, conv="strictly_below"):
    return IndexWindow(PlanewaveBasis(L, M, conv), PlanewaveBasis(L, N, conv))


def test_params_validation():
    with pytest.raises(ConfigurationError):
        FsParams(M=3, N=2)
    with pytest.raises(ConfigurationError):
        FsParams(M=0, N=2)
    with pytest.raises(ConfigurationError):
        FsParams(M=1, N=2, K=-1)
    with pytest.raises(ConfigurationError):
        FsParams(M=1, N=2, r=-1)
    assert FsParams(2, 5).replace(K=3).K == 3


def test_windowed_resolvent_examples():
    w = window(1, 2, conv="strictly_below")  # modes +-1
    np.testing.assert_allclose(windowed_resolvent(w, 0.0), [1 / FOUR_PI2] * 2, rtol=1e-15)
    with pytest.raises(SingularResolventError):
        windowed_resolvent(w, FOUR_PI2)
    w3 = window(2, 3)
    g = windowed_resolvent(w3, -1.0)
    assert g[list(w3.modes).index(2)] == pytest.approx(1 / (16 * np.pi**2 + 1), rel=1e-15)


def test_neumann_series_zero_potential():
    w = window(2, 6)
    zero = FourierPotential(np.zeros(1))
    for K in (0, 3):
        np.testing.assert_allclose(neumann_series(w, zero, -2.0, K), np.diag(windowed_resolvent(w, -2.0)))


def test_neumann_series_two_terms(v1):
    w = window(2, 9)
    lam = 3.0
    G = np.diag(windowed_resolvent(w, lam))
    Vw = potential_block(v1, w, w)
    np.testing.assert_allclose(neumann_series(w, v1, lam, 1), G - G @ Vw @ G, rtol=1e-13, atol=1e-16)


def test_neumann_series_converges_to_inverse(v1):
    # window at M=4: q = 4 rho^-r ||V||_r < 1, so the series converges geometrically
    M, N = 4, 120
    w = window(M, N)
    lam = 0.0
    nv = regularity_norm(v1, 1.0, 2000)
    q = 4 * PlanewaveBasis(1.0, M).rho ** -1 * nv
    assert q < 1
    exact = np.linalg.inv(np.diag(laplacian_diagonal(w)) + potential_block(v1, w, w) - lam * np.eye(w.dim))
    for K in (4, 8, 16, 64):
        R = neumann_series(w, v1, lam, K)
        rel = np.linalg.norm(R - exact, 2) / np.linalg.norm(exact, 2)
        # at K=64 the bound (~2e-16) sits below double-precision roundoff
        assert rel <= q ** (K + 1) / (1 - q) + 1e-14


def test_apply_route_matches_matrix_route(v1):
    w = window(2, 40)
    X = np.random.default_rng(1).standard_normal((w.dim, 3))
    g = windowed_resolvent(w, -5.0)
    Vw = potential_block(v1, w, w)
    for K in (0, 1, 5):
        np.testing.assert_allclose(apply_neumann_series(g, Vw, X, K), neumann_series(w, v1, -5.0, K) @ X, rtol=1e-12, atol=1e-15)


def test_effective_interaction_trivial(v1, zero_potential):
    assert np.all(effective_interaction(FsParams(2, 30, 3), zero_potential, 0.0) == 0)
    U = effective_interaction(FsParams(3, 3, 3), v1, 0.0)
    assert U.shape == (5, 5) and np.all(U == 0)


def test_effective_interaction_K0_triple_product(v1):
    p = FsParams(2, 40, 0)
    cb, w = p.coarse(1.0), p.window(1.0)
    B = potential_block(v1, cb, w)
    G = np.diag(windowed_resolvent(w, 1.5))
    np.testing.assert_allclose(effective_interaction(p, v1, 1.5), -B @ G @ B.conj().T, rtol=1e-13, atol=1e-16)


def test_effective_interaction_hermitian_complex_potential():
    V = FourierPotential.from_mapping({0: 1.0, 1: [0.3, 0.7], 2: [-1.0, 0.2], 5: [0.1, -0.4]})
    U = effective_interaction(FsParams(3, 25, 4), V, -2.0)
    assert np.linalg.norm(U - U.conj().T) <= 1e-13 * np.linalg.norm(U)
    H = coarse_hamiltonian(FsParams(3, 25, 4), V, -2.0).matrix
    assert np.linalg.norm(H - H.conj().T) <= 1e-13 * np.linalg.norm(H)


def test_domain_guard(v1):
    p = FsParams(2, 30, 2)
    blocks = fs_blocks(2, 30, v1)
    assert lambda_guard(blocks) == pytest.approx(FOUR_PI2 * 4 * (1 - 1e-9))
    with pytest.raises(DomainExitError):
        effective_interaction(p, v1, FOUR_PI2 * 4)
    effective_interaction(p, v1, FOUR_PI2 * 4 * 0.99)


def test_schur_exact_matches_long_series(v1):
    # same truncation N = N_e, series to high order: the two assembly routes agree
    M, N_e = 4, 400
    lam = -11.0
    exact = schur_exact_interaction(M, N_e, v1, lam)
    series = effective_interaction(FsParams(M, N_e, 80), v1, lam)
    assert np.linalg.norm(exact - series, 2) <= 1e-10


def test_schur_exact_matches_series_at_m2(v1):
    # M=2 violates the crude ratio condition but the actual series still converges
    M, N_e = 2, 300
    exact = schur_exact_interaction(M, N_e, v1, -11.5)
    series = effective_interaction(FsParams(M, N_e, 60), v1, -11.5)
    assert np.linalg.norm(exact - series, 2) <= 1e-10


def test_schur_exact_zero_and_errors(zero_potential, v1):
    assert np.all(schur_exact_interaction(2, 50, zero_potential, 0.0) == 0)
    top = complement_min_eigenvalue(2, 100, v1)
    with pytest.raises(NearSingularError) as info:
        schur_exact_interaction(2, 100, v1, top + 1.0)
    assert info.value.smallest_eigenvalue == pytest.approx(-1.0, abs=1e-8)


def test_schur_derivative_matches_finite_difference(v1):
    lam, h = 5.0, 1e-3
    d = schur_exact_derivative(4, 200, v1, lam)
    fd = (schur_exact_interaction(4, 200, v1, lam + h) - schur_exact_interaction(4, 200, v1, lam - h)) / (2 * h)
    assert np.linalg.norm(d - fd, 2) <= 1e-6 * np.linalg.norm(d, 2)


def test_schur_monotone_and_nonpositive(v1):
    lams = np.linspace(-40, 60, 6)
    mats = [schur_exact_interaction(2, 400, v1, x) for x in lams]
    for U in mats:
        assert np.linalg.eigvalsh(U).max() <= 1e-12
    for U1, U2 in zip(mats, mats[1:]):
        assert np.linalg.eigvalsh(U2 - U1).max() <= 1e-12


def test_complement_lower_bound(v1):
    # the complement operator is bounded below by kappa_M (truncated norm at cutoff >= N_e)
    for M in (2, 4):
        N_e = 600
        nv = regularity_norm(v1, 1.0, 2 * N_e)
        assert complement_min_eigenvalue(M, N_e, v1) >= kappa(PlanewaveBasis(1.0, M), 1.0, nv)


def test_coarse_hamiltonian_examples(v1, zero_potential):
    op = coarse_hamiltonian(FsParams(3, 10, 2), zero_potential, 0.0)
    np.testing.assert_array_equal(op.matrix, np.diag(laplacian_diagonal(PlanewaveBasis(1.0, 3))))
    op = coarse_hamiltonian(FsParams(3, 3, 2), v1, 0.0)
    cb = PlanewaveBasis(1.0, 3)
    np.testing.assert_allclose(op.matrix, np.diag(laplacian_diagonal(cb)) + potential_block(v1, cb, cb))


def test_interaction_vanishes_far_below(v1):
    p = FsParams(2, 500, 4)
    far = np.linalg.norm(effective_interaction(p, v1, -1e6), 2)
    near = np.linalg.norm(effective_interaction(p, v1, 0.0), 2)
    assert far <= 1e-3 * near


def test_lift_examples(v1, zero_potential):
    c = np.array([1.0, 0.5, -0.25])
    out = lift(FsParams(2, 8, 3), zero_potential, 0.0, c)
    np.testing.assert_array_equal(out.fine[:3], c)
    assert np.all(out.fine[3:] == 0)

    p = FsParams(2, 8, 0)
    e0 = np.array([1.0, 0.0, 0.0])
    out = lift(p, v1, -3.0, e0)
    w = p.window(1.0)
    g = windowed_resolvent(w, -3.0)
    column = v1.coefficient(w.modes - 0)
    np.testing.assert_allclose(out.fine[3:], -g * column, rtol=1e-14)
    np.testing.assert_array_equal(out.fine[:3], e0)
    with pytest.raises(ConfigurationError):
        lift(p, v1, -3.0, np.ones(4))


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 4), st.integers(0, 8), st.integers(0, 5), st.floats(-200.0, 30.0), st.integers(0, 2**32 - 1))
def test_lift_keeps_coarse_block(M, extra, K, lam, seed):
    V = FourierPotential(np.concatenate(([-2.0], np.random.default_rng(seed).standard_normal(6))))
    p = FsParams(M, M + extra, K)
    c = np.random.default_rng(seed + 1).standard_normal(p.coarse(1.0).dim)
    out = lift(p, V, lam, c)
    np.testing.assert_array_equal(out.fine[: c.size], c)
    assert out.fine.size == p.fine(1.0).dim


def test_series_error_decays_geometrically_in_K(v1):
    M, N_e, lam = 4, 400, -11.0
    nv = regularity_norm(v1, 1.0, 2 * N_e)
    q = 4 * nv / PlanewaveBasis(1.0, M).rho
    exact = schur_exact_interaction(M, N_e, v1, lam)
    errs = [np.linalg.norm(effective_interaction(FsParams(M, N_e, K), v1, lam) - exact, 2) for K in range(6)]
    ratios = np.array(errs[1:]) / np.array(errs[:-1])
    assert np.all(ratios <= q)
