import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from src.tools.manifold import Sphere, Stiefel
from src.utils.errors import InvalidInput, NotPSD
from src.utils.linalg import (
    commutation_matrix,
    factorize,
    kron,
    log_pseudo_det,
    pseudo_inverse,
    psd_inv_sqrt,
    psd_sqrt,
    unvec,
    vec,
)
from tests.conftest import make_psd


def test_factorize_diagonal():
    f = factorize(np.diag([2.0, 0.0]))
    assert_allclose(f.eigenvalues, [2.0, 0.0])
    assert f.rank == 1


def test_factorize_identity():
    f = factorize(np.eye(3))
    assert_allclose(f.eigenvalues, [1.0, 1.0, 1.0])
    assert f.rank == 3


def test_factorize_reconstructs_random_psd(rng):
    a = make_psd(5, 5, rng)
    f = factorize(a)
    assert np.all(np.diff(f.eigenvalues) <= 0.0)
    assert_allclose(f.eigenvectors.T @ f.eigenvectors, np.eye(5), atol=1e-12)
    assert np.linalg.norm(f.reconstruct() - a) <= 1e-10 * max(1.0, np.linalg.norm(a))


def test_factorize_rejects_non_symmetric():
    with pytest.raises(InvalidInput):
        factorize(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_factorize_rejects_non_square():
    with pytest.raises(InvalidInput):
        factorize(np.ones((2, 3)))


def test_pseudo_inverse_diagonal():
    assert_allclose(pseudo_inverse(factorize(np.diag([2.0, 0.0]))), np.diag([0.5, 0.0]))


def test_pseudo_inverse_of_projection_is_itself():
    x = np.array([1.0, 2.0, 2.0]) / 3.0
    pi = np.eye(3) - np.outer(x, x)
    assert_allclose(pseudo_inverse(factorize(pi)), pi, atol=1e-12)


@pytest.mark.parametrize("trial", range(100))
def test_moore_penrose_axioms(trial):
    rng = np.random.default_rng(trial)
    n = int(rng.integers(2, 13))
    a = make_psd(n, int(rng.integers(1, n + 1)), rng)
    ap = pseudo_inverse(factorize(a, rtol=1e-10))
    assert_allclose(a @ ap @ a, a, atol=1e-9 * max(1.0, np.linalg.norm(a)))
    assert_allclose(ap @ a @ ap, ap, atol=1e-9 * max(1.0, np.linalg.norm(ap)))
    assert_allclose(a @ ap, (a @ ap).T, atol=1e-9)
    assert_allclose(ap @ a, (ap @ a).T, atol=1e-9)


def test_log_pseudo_det_diagonal():
    assert log_pseudo_det(factorize(np.diag([2.0, 0.0]))) == pytest.approx(np.log(2.0))


def test_log_pseudo_det_of_projection_is_zero(rng):
    x = rng.standard_normal(3)
    x /= np.linalg.norm(x)
    assert abs(log_pseudo_det(factorize(np.eye(3) - np.outer(x, x)))) < 1e-10


def test_log_pseudo_det_matches_nonzero_eigenvalue_product(rng, dense_s2):
    x = rng.standard_normal(3)
    x /= np.linalg.norm(x)
    pi = np.eye(3) - np.outer(x, x)
    op = pi @ dense_s2 @ pi
    op = 0.5 * (op + op.T)
    eig = np.sort(np.linalg.eigvalsh(op))[1:]
    assert log_pseudo_det(factorize(op, rtol=1e-10)) == pytest.approx(np.log(np.prod(eig)), rel=1e-10)


def test_log_pseudo_det_rejects_negative_eigenvalue():
    with pytest.raises(NotPSD):
        log_pseudo_det(factorize(np.diag([1.0, -1.0])))


def test_psd_sqrt_and_inv_sqrt_diagonal():
    f = factorize(np.diag([4.0, 0.0]))
    assert_allclose(psd_sqrt(f), np.diag([2.0, 0.0]))
    assert_allclose(psd_inv_sqrt(f), np.diag([0.5, 0.0]))


def test_psd_sqrt_of_projection_is_itself():
    pi = np.diag([0.0, 1.0, 1.0])
    f = factorize(pi)
    assert_allclose(psd_sqrt(f), pi)
    assert_allclose(psd_inv_sqrt(f), pi)


def test_psd_sqrt_squares_back(rng):
    a = make_psd(6, 4, rng)
    f = factorize(a, rtol=1e-10)
    s = psd_sqrt(f)
    assert_allclose(s @ s, a, atol=1e-9 * max(1.0, np.linalg.norm(a)))
    assert_allclose(s @ a, a @ s, atol=1e-9 * np.linalg.norm(a))
    # inverse square root is the square root of the pseudo-inverse
    inv = psd_inv_sqrt(f)
    assert_allclose(inv @ inv, pseudo_inverse(f), atol=1e-9 * np.linalg.norm(pseudo_inverse(f)))


def test_psd_sqrt_rejects_indefinite():
    with pytest.raises(NotPSD):
        psd_sqrt(factorize(np.diag([2.0, -3.0])))


def test_commutation_matrix_trivial():
    assert_array_equal(commutation_matrix(1, 1).toarray(), [[1.0]])


def test_commutation_matrix_two_by_two():
    x = np.array([[1.0, 2.0], [3.0, 4.0]])
    p = commutation_matrix(2, 2)
    assert_array_equal(vec(x), [1.0, 3.0, 2.0, 4.0])
    assert_array_equal(p @ vec(x), [1.0, 2.0, 3.0, 4.0])


def test_commutation_matrix_rectangular(rng):
    p = commutation_matrix(3, 2)
    for _ in range(20):
        x = rng.standard_normal((3, 2))
        assert_array_equal(p.apply(vec(x)), vec(x.T))


def test_commutation_matrix_is_a_permutation():
    p = commutation_matrix(3, 4).toarray()
    assert set(np.unique(p)) == {0.0, 1.0}
    assert_array_equal(p @ p.T, np.eye(12))
    assert_array_equal(p.T, commutation_matrix(4, 3).toarray())
    assert_array_equal(commutation_matrix(3, 4).T.toarray(), commutation_matrix(4, 3).toarray())


def test_commutation_matrix_rejects_empty():
    with pytest.raises(InvalidInput):
        commutation_matrix(0, 2)


def test_kron_block_swap():
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])
    expected = np.zeros((4, 4))
    expected[:2, :2] = swap
    expected[2:, 2:] = swap
    assert_array_equal(kron(np.eye(2), swap), expected)


def test_vec_identity(rng):
    a = rng.standard_normal((3, 2))
    x = rng.standard_normal((2, 2))
    b = rng.standard_normal((2, 4))
    assert_allclose(vec(a @ x @ b), kron(b.T, a) @ vec(x), atol=1e-12)


def test_unvec_inverts_vec(rng):
    x = rng.standard_normal((4, 2))
    assert_array_equal(unvec(vec(x), 4, 2), x)
    with pytest.raises(InvalidInput):
        unvec(np.zeros(7), 4, 2)


def test_spectral_ops_are_deterministic(rng):
    a = make_psd(7, 5, rng)
    assert_array_equal(pseudo_inverse(factorize(a)), pseudo_inverse(factorize(a.copy())))


@pytest.mark.parametrize("m", [Sphere(3), Sphere(6), Stiefel(4, 2), Stiefel(5, 3)])
def test_default_tolerance_sees_the_null_space_of_tangent_projections(m):
    rng = np.random.default_rng(2024)
    for _ in range(100):
        pi = m.projection_matrix(m.uniform(rng))
        f = factorize(pi)
        assert f.rank == m.tangent_dim
        assert_allclose(pseudo_inverse(f), pi, atol=1e-10)
        assert abs(log_pseudo_det(f)) < 1e-10
