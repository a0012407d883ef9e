import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fsplanewave.exceptions import ConfigurationError
from fsplanewave.planewave import (
    Convention,
    FourierPotential,
    IndexWindow,
    PlanewaveBasis,
    kappa,
    laplacian_diagonal,
    load_potential,
    mode_indices,
    potential_block,
    potential_from_json,
    potential_to_json,
    regularity_norm,
    regularity_norm_report,
    vt_potential,
)

TWO_PI = 2 * np.pi


def test_mode_order_is_prefix_stable():
    assert mode_indices(2).tolist() == [0, 1, -1, 2, -2]
    assert mode_indices(0).tolist() == [0]
    assert mode_indices(5)[:5].tolist() == mode_indices(2).tolist()


@pytest.mark.parametrize("M", [1, 2, 5, 17])
def test_dimension_conventions(M):
    assert PlanewaveBasis(1.0, M).dim == 2 * (M - 1) + 1
    assert PlanewaveBasis(1.0, M, Convention.UP_TO).dim == 2 * M + 1


def test_rho():
    b = PlanewaveBasis(2.0, 3)
    assert b.rho == pytest.approx((TWO_PI * 3 / 2.0) ** 2, rel=1e-15)


def test_laplacian_examples():
    np.testing.assert_allclose(
        laplacian_diagonal(PlanewaveBasis(1.0, 1, "up_to")), [0, TWO_PI**2, TWO_PI**2], rtol=1e-15
    )
    assert laplacian_diagonal(PlanewaveBasis(1.0, 1)).tolist() == [0.0]
    b = PlanewaveBasis(2.0, 2, "up_to")
    lap = laplacian_diagonal(b)
    assert lap[list(b.modes).index(2)] == pytest.approx(np.pi**2 * 4, rel=1e-15)


def test_laplacian_nonnegative_and_even():
    b = PlanewaveBasis(1.3, 40)
    lap = laplacian_diagonal(b)
    assert np.all(lap >= 0)
    by_mode = dict(zip(b.modes.tolist(), lap))
    for k in range(1, 40):
        assert by_mode[k] == by_mode[-k]


def test_invalid_basis():
    with pytest.raises(ConfigurationError):
        PlanewaveBasis(0.0, 3)
    with pytest.raises(ConfigurationError):
        PlanewaveBasis(1.0, 0)
    with pytest.raises(ConfigurationError):
        PlanewaveBasis(1.0, -1, "up_to")


def test_window_is_slice_of_fine_basis():
    lo, hi = PlanewaveBasis(1.0, 3), PlanewaveBasis(1.0, 7)
    w = IndexWindow(lo, hi)
    assert w.dim == hi.dim - lo.dim
    assert w.modes.tolist() == hi.modes[lo.dim:].tolist()
    with pytest.raises(ConfigurationError):
        IndexWindow(hi, lo)
    with pytest.raises(ConfigurationError):
        IndexWindow(lo, PlanewaveBasis(2.0, 7))
    with pytest.raises(ConfigurationError):
        IndexWindow(lo, PlanewaveBasis(1.0, 7, "up_to"))


def test_potential_block_examples():
    b = PlanewaveBasis(1.0, 4)
    zero = FourierPotential(np.zeros(1))
    assert np.all(potential_block(zero, b, b) == 0)
    const = FourierPotential(np.array([2.5]))
    np.testing.assert_array_equal(potential_block(const, b, b), 2.5 * np.eye(b.dim))


def test_vt_potential_three_by_three():
    V = vt_potential(1.0)
    b = PlanewaveBasis(1.0, 1, "up_to")  # modes 0, 1, -1
    A = potential_block(V, b, b)
    order = np.argsort(b.modes)  # -1, 0, 1
    A = A[np.ix_(order, order)]
    expected = np.array([[-10, -5, -2.5], [-5, -10, -5], [-2.5, -5, -10]])
    np.testing.assert_array_equal(A, expected)


def test_potential_block_entries_and_hermitian():
    V = FourierPotential.from_mapping({1: [1.0, 2.0], 3: [0.5, -0.25], 0: 3.0})
    b = PlanewaveBasis(1.0, 4)
    A = potential_block(V, b, b)
    np.testing.assert_array_equal(A, A.conj().T)
    for a, k in enumerate(b.modes):
        for c, kk in enumerate(b.modes):
            n = k - kk
            expected = {0: 3.0, 1: 1 + 2j, -1: 1 - 2j, 3: 0.5 - 0.25j, -3: 0.5 + 0.25j}.get(n, 0)
            assert A[a, c] == expected


def test_potential_block_rejects_mismatch():
    V = vt_potential(1.0)
    with pytest.raises(ConfigurationError):
        potential_block(V, PlanewaveBasis(1.0, 3), PlanewaveBasis(1.0, 3, "up_to"))
    with pytest.raises(ConfigurationError):
        potential_block(V, PlanewaveBasis(2.0, 3), PlanewaveBasis(2.0, 3))


def test_from_mapping_symmetry_checks():
    V = FourierPotential.from_mapping({"-2": [1.0, 1.0]})
    assert V.coefficient(np.array([2, -2])).tolist() == [1 - 1j, 1 + 1j]
    with pytest.raises(ConfigurationError):
        FourierPotential.from_mapping({"2": [1.0, 1.0], "-2": [1.0, 1.0]})
    with pytest.raises(ConfigurationError):
        FourierPotential.from_mapping({"0": [1.0, 1.0]})
    with pytest.raises(ConfigurationError):
        FourierPotential.from_mapping({"x": 1.0})


def test_potential_json_roundtrip(tmp_path):
    V = FourierPotential.from_mapping({"1": [0.5, 0.25], "0": [-1.0, 0.0]}, L=2.0)
    path = tmp_path / "v.json"
    path.write_text(json.dumps(potential_to_json(V)))
    W = load_potential(path)
    assert W.L == 2.0
    np.testing.assert_array_equal(W.values, V.values)
    fam = potential_from_json({"family": "Vt", "t": 1})
    assert fam.coefficient(np.array([0, 2])).tolist() == [-10.0, -2.5]
    with pytest.raises(ConfigurationError):
        potential_from_json({"family": "Vt"})
    with pytest.raises(ConfigurationError):
        potential_from_json({"family": "other", "t": 1})
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ConfigurationError):
        load_potential(bad)


def test_regularity_norm_trivial():
    zero = FourierPotential(np.zeros(1))
    assert regularity_norm(zero, 0.5, 50) == 0.0
    const = FourierPotential(np.array([-3.0]))
    assert regularity_norm(const, 1.0, 50) == pytest.approx(3.0, rel=1e-13)
    with pytest.raises(ConfigurationError):
        regularity_norm(const, -0.1, 10)


def _dense_norm(V, r, c):
    ks = np.arange(-c, c + 1)
    w = (1 + (TWO_PI * ks / V.L) ** 2) ** ((r - 1) / 2)
    A = w[:, None] * V.coefficient(ks[:, None] - ks[None, :]) * w[None, :]
    return np.linalg.norm(A, 2)


def test_regularity_norm_matches_dense_oracle(v1):
    # dense 2-norm via SVD, independent of the Hermitian/Lanczos routes
    for c in (50, 500):
        assert regularity_norm(v1, 1.0, c) == pytest.approx(_dense_norm(v1, 1.0, c), rel=1e-10)


def test_regularity_norm_lanczos_route_matches_dense(v1):
    # cutoff 1000 uses the Toeplitz/Lanczos path (dimension 2001)
    assert regularity_norm(v1, 1.0, 1000) == pytest.approx(_dense_norm(v1, 1.0, 1000), rel=1e-9)


def test_regularity_norm_t1_r1_grows_logarithmically(v1):
    # V_1 has a logarithmic singularity, so the r=1 norm (sup |V|) is infinite;
    # truncations grow by about 10 log 2 per cutoff doubling
    a = regularity_norm(v1, 1.0, 500)
    b = regularity_norm(v1, 1.0, 1000)
    assert b > a
    assert (b - a) == pytest.approx(10 * math.log(2), rel=0.05)
    assert not regularity_norm_report(v1, 1.0, 500).converged


def test_regularity_norm_converges_below_critical_index(v1):
    rep = regularity_norm_report(v1, 0.5, 500)
    assert rep.rel_change < 1e-2
    assert rep.doubled >= rep.value


@settings(max_examples=25, deadline=None)
@given(
    st.floats(0.0, 1.5),
    st.integers(2, 30),
    st.floats(-3.0, 3.0).filter(lambda a: abs(a) > 1e-3),
    st.integers(0, 2**32 - 1),
)
def test_regularity_norm_monotone_and_homogeneous(r, c, alpha, seed):
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    vals[0] = vals[0].real
    V = FourierPotential(vals, L=1.0 + rng.random())
    n1 = regularity_norm(V, r, c)
    n2 = regularity_norm(V, r, c + 3)
    assert n2 >= n1 * (1 - 1e-12)
    assert regularity_norm(V.scaled(alpha), r, c) == pytest.approx(abs(alpha) * n1, rel=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2**32 - 1), st.sampled_from(["strictly_below", "up_to"]))
def test_square_blocks_hermitian(M, seed, conv):
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal(9) + 1j * rng.standard_normal(9)
    vals[0] = vals[0].real
    V = FourierPotential(vals)
    b = PlanewaveBasis(1.0, M, conv)
    A = potential_block(V, b, b)
    np.testing.assert_array_equal(A, A.conj().T)


def test_kappa_examples(v1):
    b = PlanewaveBasis(1.0, 2)
    assert kappa(b, 1.0, 0.0) == b.rho

    class Unit:
        rho = 1.0

    assert kappa(Unit, 0.0, 0.7) == pytest.approx(1 - 2 * 0.7)
    nv = regularity_norm(v1, 1.0, 2000)
    expected = b.rho - (b.rho + 1) * nv / b.rho
    assert kappa(b, 1.0, nv) == pytest.approx(expected, rel=1e-14)
    assert 60 < kappa(b, 1.0, nv) < 75
