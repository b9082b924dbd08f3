import numpy as np
import pytest
import scipy.sparse as sp

from yeebands.oracle import (
    assemble_J3_case_table,
    forward_difference_loop,
    lattice_from_grid,
    random_lattice,
)
from yeebands.yee_operators import (
    BlochPhases,
    DiscreteCurl,
    assemble_J2,
    block_swap,
    j3_category,
    reduce_grid_points,
    shift_block,
)


def _dense(m):
    return m.toarray() if sp.issparse(m) else np.asarray(m)


def test_shift_block_layout():
    m = _dense(shift_block(4, 1, 2.0, 3.0))
    expect = np.zeros((4, 4))
    expect[0, 3] = 2.0
    expect[1:, :3] = 3.0 * np.eye(3)
    np.testing.assert_array_equal(m, expect)


def test_block_swap_layout():
    top = sp.identity(2) * 5.0
    bottom = sp.identity(2) * 7.0
    m = _dense(block_swap(3, 1, top, bottom))
    assert m.shape == (6, 6)
    np.testing.assert_array_equal(m[0:2, 4:6], 5.0 * np.eye(2))
    np.testing.assert_array_equal(m[2:6, 0:4], 7.0 * np.eye(4))


def test_j2_integer_phase_is_permutation():
    j2 = _dense(assemble_J2(5, 2, 0, 3.0))
    assert np.all((np.abs(j2) < 1e-12) | (np.abs(j2 - 1) < 1e-12))
    assert np.allclose(j2.sum(axis=0), 1) and np.allclose(j2.sum(axis=1), 1)


def test_matrix_free_matches_explicit_remap_loop(small_lattices, rng):
    for lat in small_lattices[:8]:
        k = rng.normal(size=3)
        curl = DiscreteCurl.build(lat, k)
        n1, n2, n3 = lat.shape
        u = rng.normal(size=(n3, n2, n1)) + 1j * rng.normal(size=(n3, n2, n1))
        for axis in range(3):
            ref = forward_difference_loop(u, lat, curl.phases, axis)
            got = curl.apply_Cl(axis, u.ravel()).reshape(n3, n2, n1)
            np.testing.assert_allclose(got, ref, atol=1e-12 * np.abs(ref).max())


def test_matrix_free_matches_assembly(small_lattices, rng):
    for lat in small_lattices:
        curl = DiscreteCurl.build(lat, rng.normal(size=3))
        v = rng.normal(size=(curl.n, 2)) + 1j * rng.normal(size=(curl.n, 2))
        for axis, cl in enumerate(curl.assemble_Cl()):
            np.testing.assert_allclose(curl.apply_Cl(axis, v), cl @ v, atol=1e-13 * np.abs(cl @ v).max())
            np.testing.assert_allclose(curl.apply_Cl(axis, v, adjoint=True), cl.conj().T @ v,
                                       atol=1e-13 * np.abs(cl.conj().T @ v).max())


def test_general_j3_matches_sixteen_case_table(small_lattices, rng):
    for lat in small_lattices:
        curl = DiscreteCurl.build(lat, rng.normal(size=3))
        diff = curl.assemble_J3() - assemble_J3_case_table(lat, curl.phases)
        assert abs(diff).max() < 1e-14


def test_j3_categories_cover_all_four(small_lattices):
    assert {j3_category(l) for l in small_lattices} == {1, 2, 3, 4}


def test_blocks_are_unitary(small_lattices, rng):
    for lat in small_lattices:
        curl = DiscreteCurl.build(lat, rng.normal(size=3))
        for j in (curl.assemble_J2(), curl.assemble_J3()):
            j = _dense(j)
            np.testing.assert_allclose(j.conj().T @ j, np.eye(j.shape[0]), atol=1e-13)


def test_partial_derivatives_commute(small_lattices, rng):
    for lat in small_lattices:
        c1, c2, c3 = (_dense(c) for c in DiscreteCurl.build(lat, rng.normal(size=3)).assemble_Cl())
        for a, b in ((c1, c2), (c1, c3), (c2, c3)):
            assert np.linalg.norm(a @ b - b @ a) <= 1e-12 * max(1.0, np.linalg.norm(a) * np.linalg.norm(b))


def test_curl_adjoint_identity(small_lattices, rng):
    for lat in small_lattices[:6]:
        curl = DiscreteCurl.build(lat, rng.normal(size=3))
        e = rng.normal(size=3 * curl.n) + 1j * rng.normal(size=3 * curl.n)
        h = rng.normal(size=3 * curl.n) + 1j * rng.normal(size=3 * curl.n)
        lhs = np.vdot(h, curl.apply_C(e))
        rhs = np.vdot(curl.apply_C_adjoint(h), e)
        assert abs(lhs - rhs) <= 1e-12 * abs(lhs)


def test_divergence_of_curl_adjoint_vanishes(small_lattices, rng):
    # C G = 0 for the discrete gradient G = [C1; C2; C3]
    for lat in small_lattices[:6]:
        curl = DiscreteCurl.build(lat, rng.normal(size=3))
        phi = rng.normal(size=curl.n) + 1j * rng.normal(size=curl.n)
        grad = np.concatenate([curl.apply_Cl(a, phi) for a in range(3)])
        assert np.linalg.norm(curl.apply_C(grad)) <= 1e-12 * np.linalg.norm(grad) * 10


def test_batched_apply_matches_columns(rng):
    lat = random_lattice(rng, (4, 3, 2), 1, 1, 2, 0, 1, 1)
    curl = DiscreteCurl.build(lat, rng.normal(size=3))
    v = rng.normal(size=(3 * curl.n, 3)) + 0j
    batched = curl.apply_A(v)
    for j in range(3):
        np.testing.assert_allclose(batched[:, j], curl.apply_A(v[:, j]), atol=1e-13)


def test_reduce_grid_points_round_trip(rng):
    lat = lattice_from_grid((5, 4, 3), 2, 1, 3, 0, 1, 1, 0.6, 0.45)
    g = lat.grid_vectors
    I = rng.integers(0, 5, 20)
    J = rng.integers(0, 4, 20)
    K = rng.integers(0, 3, 20)
    c = rng.integers(-2, 3, size=(3, 20))
    shifted = np.stack([I, J, K]) + g @ c
    out = reduce_grid_points(lat, *shifted)
    np.testing.assert_array_equal(out[0], I)
    np.testing.assert_array_equal(out[1], J)
    np.testing.assert_array_equal(out[2], K)


def test_bloch_phases_from_k():
    lat = lattice_from_grid((4, 3, 2), 1, 0, 0, 0, 0, 0, 0.5, 0.5)
    k = np.array([0.1, 0.2, 0.3])
    ph = BlochPhases.from_k(lat, k)
    np.testing.assert_allclose(ph.t, lat.vectors.T @ k)
    assert ph.phi1 == pytest.approx(np.exp(2j * np.pi * ph.t1))
