import numpy as np
import pytest

from mageo import eigencalc as ec
from mageo.errors import DegenerateEigenvalueError
from mageo.selftest import fd_second


def rand_sym(rng, n):
    A = rng.normal(size=(n, n))
    return A + A.T


def test_symmatrix_storage():
    S = ec.SymMatrix.from_array([[1, 2, 3], [99, 4, 5], [99, 99, 6]])
    assert np.array_equal(S.array, [[1, 2, 3], [2, 4, 5], [3, 5, 6]])
    with pytest.raises(ValueError):
        ec.SymMatrix(5, np.zeros(15))
    with pytest.raises(ValueError):
        ec.SymMatrix(2, [1.0, np.inf, 0.0])
    with pytest.raises(ValueError):
        ec.SymMatrix.from_array(np.zeros((2, 3)))


def test_identity_tie_convention():
    E = ec.eigen_decompose(np.eye(3))
    assert np.array_equal(E.lambdas, [1, 1, 1])
    assert np.array_equal(E.vectors, np.eye(3))


def test_diag_sorted():
    E = ec.eigen_decompose(np.diag([1.0, 5.0, 2.0]))
    assert np.allclose(E.lambdas, [5, 2, 1])
    assert np.allclose(E.vectors, np.eye(3)[:, [1, 2, 0]])
    E = ec.eigen_decompose(np.diag([5.0, 2.0, 1.0]))
    assert np.array_equal(E.vectors, np.eye(3))


def test_sign_convention(rng):
    for _ in range(20):
        E = ec.eigen_decompose(rand_sym(rng, 4))
        for v in E.vectors.T:
            assert v[np.flatnonzero(np.abs(v) > 1e-14)[0]] > 0


@pytest.mark.parametrize("n", [2, 3, 4])
def test_reconstruction_and_orthonormality(rng, n):
    for _ in range(50):
        S = rand_sym(rng, n)
        E = ec.eigen_decompose(ec.SymMatrix.from_array(S))
        assert np.linalg.norm(S - E.reconstruct()) <= 1e-10 * (1 + np.linalg.norm(S))
        assert np.linalg.norm(E.vectors.T @ E.vectors - np.eye(n)) <= 1e-10
        assert np.all(np.diff(E.lambdas) <= 0)
        assert np.allclose(E.lambdas, np.sort(np.linalg.eigvalsh(S))[::-1], atol=1e-12)


def test_rejects_nonfinite_and_large():
    with pytest.raises(ValueError):
        ec.eigen_decompose(np.array([[1.0, np.nan], [np.nan, 1.0]]))
    with pytest.raises(ValueError):
        ec.eigen_decompose(np.eye(5))


def test_batched_matches_numpy(rng):
    A = rng.normal(size=(7, 5, 3, 3))
    A = A + np.swapaxes(A, -1, -2)
    ref = np.sort(np.linalg.eigvalsh(A), axis=-1)[..., ::-1]
    assert np.allclose(ec.eigvalsh_desc(A), ref, atol=1e-12)
    A2 = rng.normal(size=(11, 2, 2))
    A2 = A2 + np.swapaxes(A2, -1, -2)
    assert np.allclose(ec.eigvalsh_desc(A2), np.sort(np.linalg.eigvalsh(A2), axis=-1)[..., ::-1])


def test_perturbation_B_examples(rng):
    assert np.array_equal(ec.perturbation_B(np.eye(4)[0]).array, np.diag([0.0, 1, 1, 1]))
    B = ec.perturbation_B(np.array([1.0, 1.0, 0.0]) / np.sqrt(2)).array
    assert B[0, 0] == pytest.approx(0.5) and B[1, 1] == pytest.approx(0.5)
    assert B[0, 1] == pytest.approx(-0.5) and B[2, 2] == 1.0
    for _ in range(20):
        v = rng.normal(size=4)
        v /= np.linalg.norm(v)
        B = ec.perturbation_B(v)
        assert np.abs(B.array @ v).max() <= 1e-12
        assert np.allclose(np.sort(np.linalg.eigvalsh(B.array)), [0, 1, 1, 1], atol=1e-12)
    with pytest.raises(ValueError):
        ec.perturbation_B(np.array([1.0, 1e-5, 0.0]))


def test_phi_endomorphism_examples():
    H = np.diag([5.0, 5.0, 1.0])
    Phi = ec.phi_endomorphism(H, ec.perturbation_B(np.eye(3)[0]))
    assert np.array_equal(Phi.array, np.diag([5.0, 4.0, 0.0]))
    E = ec.eigen_decompose(Phi)
    assert E.lambdas[0] - E.lambdas[1] == pytest.approx(1.0)
    Phi = ec.phi_endomorphism(np.diag([5.0, 2.0, 1.0]), ec.perturbation_B(np.eye(3)[0]))
    assert ec.eigen_decompose(Phi).lambdas[0] == 5.0
    with pytest.raises(ValueError):
        ec.phi_endomorphism(np.eye(3), ec.perturbation_B(np.eye(4)[0]))


def test_phi_preserves_top_and_shifts_rest(rng):
    for _ in range(30):
        H = rand_sym(rng, 4)
        E = ec.eigen_decompose(H)
        Phi = ec.phi_endomorphism(H, ec.perturbation_B(E.vectors[:, 0]))
        F = ec.eigen_decompose(Phi)
        assert abs(F.lambdas[0] - E.lambdas[0]) <= 1e-10
        assert np.allclose(F.lambdas[1:], E.lambdas[1:] - 1, atol=1e-10)
        assert F.lambdas[1] < F.lambdas[0]


def test_d_lambda1_examples():
    D = ec.d_lambda1(ec.eigen_decompose(np.diag([5.0, 2.0, 1.0])))
    expected = np.zeros((3, 3))
    expected[0, 0] = 1
    assert np.array_equal(D, expected)
    th = 0.3
    R = np.array([[np.cos(th), -np.sin(th), 0], [np.sin(th), np.cos(th), 0], [0, 0, 1]])
    D = ec.d_lambda1(ec.eigen_decompose(R @ np.diag([5.0, 2.0, 1.0]) @ R.T))
    assert np.allclose(D, np.outer(R[:, 0], R[:, 0]), atol=1e-12)


def test_degenerate_rejected():
    E = ec.eigen_decompose(np.diag([3.0, 3.0, 1.0]))
    with pytest.raises(DegenerateEigenvalueError):
        ec.d_lambda1(E)
    with pytest.raises(DegenerateEigenvalueError):
        ec.d2_lambda1(E, np.eye(3), np.eye(3))


def test_d2_lambda1_hand_values():
    E = ec.eigen_decompose(np.diag([5.0, 2.0, 1.0]))
    P = np.zeros((3, 3))
    P[0, 1] = P[1, 0] = 1 / np.sqrt(2)
    assert ec.d2_lambda1(E, P, P) == pytest.approx(1 / 3, abs=1e-14)
    E11 = np.zeros((3, 3))
    E11[0, 0] = 1
    assert ec.d2_lambda1(E, E11, E11) == 0.0


def test_d2_lambda1_symmetric_and_psd(rng):
    for _ in range(30):
        E = ec.eigen_decompose(rand_sym(rng, 4))
        P, Q = rand_sym(rng, 4), rand_sym(rng, 4)
        assert ec.d2_lambda1(E, P, Q) == pytest.approx(ec.d2_lambda1(E, Q, P), rel=1e-12, abs=1e-14)
        assert ec.d2_lambda1(E, P, P) >= -1e-12
        V, lam = E.vectors, E.lambdas
        closed = 2 * sum((V[:, 0] @ P @ V[:, m]) ** 2 / (lam[0] - lam[m]) for m in range(1, 4))
        assert ec.d2_lambda1(E, P, P) == pytest.approx(closed, rel=1e-12)


def test_d2_lambda1_finite_difference(rng):
    lam1 = lambda A: ec.eigen_decompose(A).lambdas[0]
    for _ in range(20):
        A = rand_sym(rng, 3) + np.diag([3.0, 0, 0])
        D = rand_sym(rng, 3)
        an = ec.d2_lambda1(ec.eigen_decompose(A), D, D)
        assert fd_second(lam1, A, D) == pytest.approx(an, rel=1e-5, abs=1e-5)


def test_h_eval_examples():
    h, hp, hpp = ec.h_eval(ec.HFunState(2.0, 2.0))
    assert (h, hp, hpp) == (0.0, 0.5, 0.5)
    h, hp, hpp = ec.h_eval(ec.HFunState(1.0, 3.0))
    assert h == pytest.approx(-0.5 * np.log(3))
    assert hp == pytest.approx(1 / 6) and hpp == pytest.approx(1 / 18)
    with pytest.raises(ValueError):
        ec.h_eval(ec.HFunState(3.5, 3.0))
    with pytest.raises(ValueError):
        ec.h_eval(ec.HFunState(-0.1, 3.0))


def test_h_derivatives_numerically():
    s_max = 2.5
    for s in np.linspace(0.1, 2.4, 25):
        d = 1e-6
        num = (ec.h_eval(ec.HFunState(s + d, s_max))[0] - ec.h_eval(ec.HFunState(s - d, s_max))[0]) / (2 * d)
        _, hp, hpp = ec.h_eval(ec.HFunState(s, s_max))
        assert abs(num - hp) <= 1e-6
        assert abs(hpp - 2 * hp * hp) <= 1e-12
    s = np.linspace(0, s_max, 101)
    assert np.allclose(ec.h_values(s, s_max), [ec.h_eval(ec.HFunState(v, s_max))[0] for v in s],
                       atol=1e-15)


def test_complex_structure_and_top_frame(rng):
    J = ec.complex_structure(4)
    assert np.array_equal(J @ J, -np.eye(4))
    assert np.array_equal(J @ np.eye(4)[0], np.eye(4)[1])
    with pytest.raises(ValueError):
        ec.complex_structure(3)
    E = ec.eigen_decompose(rand_sym(rng, 4))
    fr = ec.top_frame(E)
    # J V1 is orthogonal to V1, so it lies in the span of the remaining eigenvectors
    assert np.sum(fr.mu ** 2) == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(E.vectors[:, 1:] @ fr.mu, fr.jv1, atol=1e-12)
    assert np.sum(np.abs(fr.nu) ** 2) == pytest.approx(1.0, abs=1e-12)


def test_complex_hessian_from_real():
    # phi = |z|^2 = x^2 + y^2 has phi_{z zbar} = 1
    H = np.diag([2.0, 2.0])
    assert ec.complex_hessian_from_real(H)[0, 0] == pytest.approx(1.0)
    # matches the torus slot entry a - 1 = (f_xx + f_yy)/4
    H = np.array([[1.0, 0.3], [0.3, -0.4]])
    assert ec.complex_hessian_from_real(H)[0, 0].real == pytest.approx((1.0 - 0.4) / 4)
