import numpy as np
import pytest

from yeebands.lattice import preset, preset_cell
from yeebands.material import PermittivityField
from yeebands.oracle import (
    OracleCapError,
    dense_assemble,
    dense_gep_eigs,
    dense_matrix,
    hermitian_eigvalsh,
    hermitian_tridiagonalize,
    tridiagonal_eigenvalues,
)
from yeebands.spectral import build_svd_blocks, eigen_angles
from yeebands.yee_operators import DiscreteCurl


def _random_hermitian(rng, n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return a + a.conj().T


# ---------------------------------------------------------------------------
# Dense Hermitian solver, checked against numpy's LAPACK bindings
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("n", [1, 2, 5, 40])
def test_eigvalsh_matches_lapack(n, rng):
    a = _random_hermitian(rng, n)
    np.testing.assert_allclose(hermitian_eigvalsh(a), np.linalg.eigvalsh(a),
                               atol=1e-11 * np.abs(a).max())


def test_tridiagonalize_preserves_trace_and_frobenius(rng):
    a = _random_hermitian(rng, 12)
    d, e = hermitian_tridiagonalize(a)
    assert d.sum() == pytest.approx(np.trace(a).real)
    assert np.sum(d**2) + 2 * np.sum(e**2) == pytest.approx(np.linalg.norm(a) ** 2)


def test_ql_on_known_tridiagonal():
    # (2, -1) Toeplitz: eigenvalues 2 - 2 cos(j pi / (n + 1))
    n = 9
    vals = tridiagonal_eigenvalues(np.full(n, 2.0), np.full(n - 1, 1.0))
    expect = 2 - 2 * np.cos(np.arange(1, n + 1) * np.pi / (n + 1))
    np.testing.assert_allclose(vals, np.sort(expect), atol=1e-13)


def test_ql_with_degenerate_zero_cluster():
    a = np.zeros((6, 6), dtype=complex)
    a[5, 5] = 3.0
    vals = hermitian_eigvalsh(a)
    np.testing.assert_allclose(vals, [0, 0, 0, 0, 0, 3.0], atol=1e-14)


def test_large_zero_cluster_converges(rng):
    # a third of the spectrum at zero, as for the double curl
    q, _ = np.linalg.qr(rng.normal(size=(120, 120)) + 1j * rng.normal(size=(120, 120)))
    lam = np.concatenate([np.zeros(40), np.linspace(2.0, 600.0, 80)])
    a = (q * lam) @ q.conj().T
    vals = hermitian_eigvalsh(a)
    np.testing.assert_allclose(vals, np.linalg.eigvalsh(a), atol=1e-10)
    assert np.sum(np.abs(vals) < 1e-10) == 40


# ---------------------------------------------------------------------------
# Dense curl bundle
# ---------------------------------------------------------------------------


def _bundle(shape, k, field=None):
    lat, _ = preset_cell(preset("cubic", shape))
    curl = DiscreteCurl.build(lat, k)
    basis = eigen_angles(lat, k)
    svd = None if np.allclose(k, 0) else build_svd_blocks(basis)
    field = field or PermittivityField.uniform(lat.n)
    return lat, curl, basis, dense_assemble(curl, basis, svd, field)


def test_gamma_double_curl_is_real_with_zero_row_sums():
    _, curl, _, b = _bundle((2, 2, 2), np.zeros(3))
    assert np.abs(b.A.imag).max() == 0.0
    for cl in curl.assemble_Cl():
        np.testing.assert_allclose(np.asarray(cl.sum(axis=1)).ravel(), 0.0, atol=1e-14)


def test_assembly_matches_matrix_free(rng):
    k = rng.normal(size=3)
    _, curl, _, b = _bundle((3, 3, 2), k)
    np.testing.assert_allclose(b.C, dense_matrix(curl.apply_C, b.C.shape[0]), atol=1e-13)


def test_b_diagonal_is_field(rng):
    field = PermittivityField(*(1 + rng.random(8) for _ in range(3)))
    _, _, _, b = _bundle((2, 2, 2), rng.normal(size=3), field)
    np.testing.assert_array_equal(b.B, field.stacked)


def test_vacuum_gep_null_count_and_lambda_q(rng):
    k = rng.normal(size=3)
    lat, _, basis, b = _bundle((4, 3, 3), k)
    vals = dense_gep_eigs(b.A, b.B)
    n = lat.n
    assert np.sum(vals < 1e-10) == n
    assert vals.min() >= -1e-12
    np.testing.assert_allclose(vals[n:], np.sort(np.repeat(basis.lambda_q, 2)), rtol=1e-10)


def test_cap():
    lat, _ = preset_cell(preset("cubic", (11, 10, 10)))
    k = np.full(3, 0.1)
    curl = DiscreteCurl.build(lat, k)
    with pytest.raises(OracleCapError):
        dense_assemble(curl, eigen_angles(lat, k), None, PermittivityField.uniform(lat.n))
