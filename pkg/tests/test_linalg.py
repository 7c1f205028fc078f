import numpy as np
import pytest

from ttrlab.linalg import (
    EigDecomposition,
    RankDeficiencyError,
    herm_eig,
    hermitianize,
    kron,
    mat_func,
    mat_inv_sqrt,
    mat_log,
    mat_sqrt,
    partial_trace,
    require_density,
    require_full_rank,
    require_unitary,
    sylvester_sqrt_solve,
    trace_norm,
    unitary_exp,
)

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)


def random_hermitian(rng, d):
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return 0.5 * (m + m.conj().T)


def random_density(rng, d, full_rank=True):
    m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = m @ m.conj().T
    if full_rank:
        rho += 0.1 * np.eye(d)
    return rho / np.trace(rho).real


def test_herm_eig_diagonal_sorted_ascending():
    eig = herm_eig(np.diag([2.0, 1.0]).astype(complex))
    assert np.allclose(eig.values, [1.0, 2.0])
    assert np.allclose(eig.vectors[:, 0], [0, 1])
    assert np.allclose(eig.vectors[:, 1], [1, 0])


def test_herm_eig_pauli_x_reconstruction():
    eig = herm_eig(X)
    assert np.allclose(eig.values, [-1.0, 1.0])
    assert np.max(np.abs(eig.reconstruct() - X)) < 1e-12


def test_herm_eig_phase_convention_real_positive_pivot():
    rng = np.random.default_rng(7)
    for _ in range(20):
        m = random_hermitian(rng, 4)
        vecs = herm_eig(m).vectors
        for col in vecs.T:
            pivot = col[np.argmax(np.abs(col))]
            assert pivot.real > 0
            assert abs(pivot.imag) < 1e-12


def test_herm_eig_random_reconstruction_and_unitarity():
    rng = np.random.default_rng(11)
    for d in (2, 3, 4, 6):
        for _ in range(25):
            m = random_hermitian(rng, d)
            eig = herm_eig(m)
            assert np.max(np.abs(eig.reconstruct() - m)) < 1e-12 * max(1.0, np.abs(m).max())
            assert np.max(np.abs(eig.vectors.conj().T @ eig.vectors - np.eye(d))) < 1e-12


def test_herm_eig_rejects_non_hermitian():
    with pytest.raises(ValueError):
        herm_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_degeneracy_flag():
    assert herm_eig(I2).degenerate()
    assert not herm_eig(np.diag([0.2, 0.8]).astype(complex)).degenerate()


def test_mat_sqrt_frozen():
    assert np.allclose(mat_sqrt(np.diag([4.0, 9.0]).astype(complex)), np.diag([2.0, 3.0]))


def test_mat_inv_sqrt_maximally_mixed():
    assert np.allclose(mat_inv_sqrt(I2 / 2), np.sqrt(2.0) * I2)


def test_mat_sqrt_square_roundtrip():
    rng = np.random.default_rng(3)
    for _ in range(20):
        rho = random_density(rng, 3)
        s = mat_sqrt(rho)
        assert np.max(np.abs(s @ s - rho)) < 1e-9


def test_mat_inv_sqrt_rank_guard():
    with pytest.raises(RankDeficiencyError):
        mat_inv_sqrt(np.diag([1.0, 1e-14]).astype(complex))
    with pytest.raises(RankDeficiencyError):
        mat_log(np.diag([1.0, 0.0]).astype(complex))


def test_mat_func_generic_callable():
    m = np.diag([1.0, 4.0]).astype(complex)
    assert np.allclose(mat_func(m, lambda w: w**2), np.diag([1.0, 16.0]))


def test_unitary_exp_pauli_x_half_turn():
    # exp(-i X pi) = -identity
    assert np.max(np.abs(unitary_exp(X, np.pi) + I2)) < 1e-12


def test_unitary_exp_zero_time_and_inverse():
    rng = np.random.default_rng(5)
    h = random_hermitian(rng, 4)
    assert np.allclose(unitary_exp(h, 0.0), np.eye(4))
    u = unitary_exp(h, 0.37)
    assert np.max(np.abs(u @ unitary_exp(h, -0.37) - np.eye(4))) < 1e-12
    require_unitary(u)


def test_unitary_exp_xx_closed_form():
    xx = kron(X, X)
    theta = 0.83
    expected = np.cos(theta) * np.eye(4) - 1j * np.sin(theta) * xx
    assert np.max(np.abs(unitary_exp(xx, theta) - expected)) < 1e-12


def test_partial_trace_product_state():
    rng = np.random.default_rng(9)
    a = random_density(rng, 2)
    b = random_density(rng, 3)
    joint = kron(a, b)
    assert np.max(np.abs(partial_trace(joint, 2, 3, "S") - a)) < 1e-12
    assert np.max(np.abs(partial_trace(joint, 2, 3, "E") - b)) < 1e-12


def test_partial_trace_bell_state():
    bell = np.zeros((4, 4), dtype=complex)
    for i in (0, 3):
        for j in (0, 3):
            bell[i, j] = 0.5
    assert np.max(np.abs(partial_trace(bell, 2, 2, "S") - I2 / 2)) < 1e-12
    assert np.max(np.abs(partial_trace(bell, 2, 2, "E") - I2 / 2)) < 1e-12


def test_partial_trace_preserves_trace():
    rng = np.random.default_rng(13)
    m = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    assert abs(np.trace(partial_trace(m, 2, 3, "S")) - np.trace(m)) < 1e-12


def test_trace_norm_frozen_values():
    assert abs(trace_norm(Z) - 2.0) < 1e-12
    assert abs(trace_norm(np.diag([3.0, -4.0])) - 7.0) < 1e-12
    # trace norm of a rank-one |v><v| is |v|^2
    v = np.array([1.0, 2.0])
    assert abs(trace_norm(np.outer(v, v)) - 5.0) < 1e-12


def test_sylvester_identity_prior_halves():
    rng = np.random.default_rng(17)
    c = random_hermitian(rng, 3)
    b = sylvester_sqrt_solve(np.eye(3, dtype=complex), c)
    assert np.max(np.abs(b - c / 2)) < 1e-12


def test_sylvester_zero_rhs():
    rng = np.random.default_rng(19)
    gamma = random_density(rng, 3)
    b = sylvester_sqrt_solve(gamma, np.zeros((3, 3)))
    assert np.max(np.abs(b)) < 1e-14


def test_sylvester_resubstitution_random():
    rng = np.random.default_rng(23)
    for d in (2, 3):
        for _ in range(40):
            gamma = random_density(rng, d)
            c = random_hermitian(rng, d)
            b = sylvester_sqrt_solve(gamma, c)
            s = mat_sqrt(gamma)
            assert np.max(np.abs(s @ b + b @ s - c)) < 1e-10 * max(1.0, np.abs(c).max())


def test_sylvester_rejects_singular_prior():
    with pytest.raises(RankDeficiencyError):
        sylvester_sqrt_solve(np.diag([1.0, 0.0]).astype(complex), I2)


def test_density_and_rank_validators():
    require_density(I2 / 2)
    require_full_rank(I2 / 2)
    with pytest.raises(ValueError):
        require_density(I2)  # trace 2
    with pytest.raises(RankDeficiencyError):
        require_full_rank(np.diag([1.0, 0.0]).astype(complex))


def test_hermitianize():
    m = np.array([[1.0, 2.0], [0.0, 3.0]], dtype=complex)
    h = hermitianize(m)
    assert np.max(np.abs(h - h.conj().T)) == 0.0
