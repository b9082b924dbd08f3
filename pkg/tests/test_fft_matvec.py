import numpy as np
import pytest

from yeebands.fft_matvec import (
    TransformPlan,
    apply_Q0,
    apply_Q0_adjoint,
    apply_Qr,
    apply_Qr_adjoint,
)
from yeebands.oracle import random_lattice
from yeebands.spectral import build_svd_blocks, build_T_dense, dense_blocks, eigen_angles


def _cvec(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


@pytest.mark.parametrize("shape", [(4, 3, 2), (8, 6, 5), (6, 6, 6)])
def test_transforms_match_dense_T(shape, rng):
    lat = random_lattice(rng, shape, 1, 1, 2, 0, 1, 1)
    basis = eigen_angles(lat, rng.normal(size=3))
    T = build_T_dense(basis)
    plan = TransformPlan.build(basis)
    v = _cvec(rng, basis.n, 100)
    norms = np.linalg.norm(v, axis=0)
    fwd = plan.apply_T(v.copy())
    adj = plan.apply_T_adjoint(v.copy())
    assert np.all(np.linalg.norm(fwd - T @ v, axis=0) <= 1e-12 * norms)
    assert np.all(np.linalg.norm(adj - T.conj().T @ v, axis=0) <= 1e-12 * norms)


def test_single_vector_matches_batched(rng):
    lat = random_lattice(rng, (5, 4, 3), 2, 0, 1, 1, 2, 0)
    plan = TransformPlan.build(eigen_angles(lat, rng.normal(size=3)))
    v = _cvec(rng, lat.n, 3)
    batched = plan.apply_T_adjoint(v.copy())
    for j in range(3):
        np.testing.assert_allclose(plan.apply_T_adjoint(v[:, j].copy()), batched[:, j], atol=1e-13)


def test_round_trip_32_cubed(rng):
    lat = random_lattice(rng, (32, 32, 32), 5, 1, 11, 0, 7, 1)
    plan = TransformPlan.build(eigen_angles(lat, rng.normal(size=3)))
    v = _cvec(rng, lat.n)
    back = plan.apply_T(plan.apply_T_adjoint(v.copy()))
    assert np.linalg.norm(back - v) <= 1e-12 * np.linalg.norm(v)


def test_inputs_not_modified(rng):
    lat = random_lattice(rng, (4, 3, 2), 1, 1, 2, 0, 1, 1)
    plan = TransformPlan.build(eigen_angles(lat, rng.normal(size=3)))
    v = _cvec(rng, lat.n)
    keep = v.copy()
    plan.apply_T(v)
    plan.apply_T_adjoint(v)
    np.testing.assert_array_equal(v, keep)


def test_shape_check(rng):
    lat = random_lattice(rng, (4, 3, 2), 1, 1, 2, 0, 1, 1)
    plan = TransformPlan.build(eigen_angles(lat, rng.normal(size=3)))
    with pytest.raises(ValueError):
        plan.apply_T(np.zeros(lat.n + 1, dtype=complex))


def test_range_and_null_applies_match_dense(small_lattices, rng):
    for lat in small_lattices[:6]:
        basis = eigen_angles(lat, rng.normal(size=3))
        svd = build_svd_blocks(basis)
        plan = TransformPlan.build(basis)
        Q, _ = dense_blocks(svd, build_T_dense(basis))
        n = basis.n
        qr, q0 = Q[:, :2 * n], Q[:, 2 * n:]
        y = _cvec(rng, 2 * n, 2)
        z = _cvec(rng, n, 2)
        v = _cvec(rng, 3 * n, 2)
        tol = 1e-12 * np.linalg.norm(v)
        assert np.linalg.norm(apply_Qr(y, svd, plan) - qr @ y) <= 1e-12 * np.linalg.norm(y)
        assert np.linalg.norm(apply_Qr_adjoint(v, svd, plan) - qr.conj().T @ v) <= tol
        assert np.linalg.norm(apply_Q0(z, svd, plan) - q0 @ z) <= 1e-12 * np.linalg.norm(z)
        assert np.linalg.norm(apply_Q0_adjoint(v, svd, plan) - q0.conj().T @ v) <= tol
