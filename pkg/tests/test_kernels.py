import numpy as np
import pytest

from branchpde import kernels

compiled = pytest.mark.skipif(kernels.backend_name() == "numpy", reason="compiled core not built")


def _pos(n, seed=0, d=2):
    return np.random.default_rng(seed).uniform(0, 2 * np.pi, size=(n, d))


@compiled
@pytest.mark.parametrize("K", [1, 5, 12])
def test_backends_agree_projection(K):
    pos = _pos(5000)
    a = kernels.basis_sums(pos, K)
    b = kernels.basis_sums(pos, K, force_python=True)
    np.testing.assert_allclose(a, b, rtol=1e-11, atol=1e-10)


@compiled
def test_backends_agree_evaluation():
    rs = np.random.default_rng(2)
    coeffs = rs.normal(size=(15, 15))
    pos = _pos(3000, 1)
    v1, g1 = kernels.evaluate(coeffs, pos, with_grad=True)
    v2, g2 = kernels.evaluate(coeffs, pos, with_grad=True, force_python=True)
    np.testing.assert_allclose(v1, v2, rtol=1e-11, atol=1e-11)
    np.testing.assert_allclose(g1, g2, rtol=1e-11, atol=1e-10)
    np.testing.assert_array_equal(kernels.evaluate(coeffs, pos), v1)


@pytest.mark.parametrize("force_python", [False, True])
def test_worker_count_does_not_change_bits(force_python):
    pos = _pos(10 * kernels.BLOCK + 17, 3)
    ref = kernels.basis_sums(pos, 6, workers=1, force_python=force_python)
    for w in (2, 3, 8):
        np.testing.assert_array_equal(kernels.basis_sums(pos, 6, workers=w, force_python=force_python), ref)
    coeffs = np.random.default_rng(0).normal(size=(13, 13))
    v = kernels.evaluate(coeffs, pos, workers=1, force_python=force_python)
    np.testing.assert_array_equal(kernels.evaluate(coeffs, pos, workers=4, force_python=force_python), v)


def test_numpy_backend_any_dimension():
    pos = _pos(200, 4, d=3)
    sums = kernels.basis_sums(pos, 2)
    assert sums.shape == (5, 5, 5)
    assert sums[2, 2, 2] == pytest.approx(200 / (2 * np.pi) ** 1.5)


def test_pairwise_sum_tree():
    parts = np.arange(7.0)[:, None]
    assert kernels.pairwise_sum(parts)[0] == 21.0
    with pytest.raises(ValueError):
        kernels.pairwise_sum(np.empty((0, 1)))
