import math

import numpy as np
import pytest

from spinzero.qcore import (
    MAX_QUBITS,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    CapacityError,
    DimensionMismatchError,
    NonHermitianError,
    apply,
    as_state,
    commutator,
    fidelity,
    hermitian_eigen,
    inner,
    max_abs,
    permute_qubits,
    random_hermitian,
    random_state,
    tensor,
)
from spinzero.states import basis_ket, spin_zero_basis
from spinzero.observables import observable_f, pauli

from helpers import PHI1_EXPECTED, product_ket

KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)


def test_tensor_basis_product():
    assert np.allclose(tensor(KET0, KET1), [0, 1, 0, 0])


def test_tensor_x_basis_expansion():
    plus = basis_ket("+")
    assert np.allclose(tensor(plus, plus), [0.5, 0.5, 0.5, 0.5])


def test_tensor_eight_qubit_norm_by_direct_summation():
    pair = spin_zero_basis()
    bob = (pair.phi0 + math.sqrt(3.0) * pair.phi1) / 2.0
    vec = tensor(basis_ket("00++"), bob)
    assert vec.shape == (256,)
    total = sum(abs(a) ** 2 for a in vec)  # direct summation oracle
    assert abs(total - 1.0) < 1e-12


def test_tensor_norm_multiplies():
    rng = np.random.default_rng(3)
    a = 2.0 * random_state(2, rng)
    b = 0.5 * random_state(3, rng)
    assert abs(np.linalg.norm(tensor(a, b)) - np.linalg.norm(a) * np.linalg.norm(b)) < 1e-12


def test_tensor_capacity_error():
    big = np.zeros(2 ** 6, dtype=complex)
    big[0] = 1.0
    other = np.zeros(2 ** 5, dtype=complex)
    other[0] = 1.0
    with pytest.raises(CapacityError):
        tensor(big, other)


def test_tensor_associative():
    rng = np.random.default_rng(11)
    for _ in range(20):
        a, b, c = (random_state(1, rng) for _ in range(3))
        assert np.allclose(tensor(tensor(a, b), c), tensor(a, tensor(b, c)), atol=1e-10)


def test_inner_basis_change():
    assert abs(inner(basis_ket("+"), KET0) - 1 / math.sqrt(2)) < 1e-12


def test_inner_paper_overlap_value():
    # |<00++|phi1>|^2 pinned to 1/12, checked against the frozen expansion.
    ket = basis_ket("00++")
    assert abs(abs(inner(ket, PHI1_EXPECTED)) ** 2 - 1.0 / 12.0) < 1e-12
    assert abs(abs(inner(ket, spin_zero_basis().phi1)) ** 2 - 1.0 / 12.0) < 1e-12


def test_inner_phi0_orthogonal_to_all_up_ket():
    assert abs(inner(basis_ket("00++"), spin_zero_basis().phi0)) < 1e-12


def test_inner_conjugate_symmetry():
    rng = np.random.default_rng(5)
    for _ in range(25):
        a = random_state(3, rng)
        b = random_state(3, rng)
        assert abs(inner(a, b) - np.conj(inner(b, a))) < 1e-12
        assert abs(inner(a, a) - 1.0) < 1e-12


def test_inner_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        inner(KET0, np.array([1, 0, 0, 0], dtype=complex))


def test_apply_pauli_x_flips():
    assert np.allclose(apply(SIGMA_X, KET0), KET1)


def test_apply_identity():
    rng = np.random.default_rng(8)
    s = random_state(2, rng)
    assert np.allclose(apply(np.eye(4), s), s)


def test_apply_projector_squared_norm():
    phi1 = spin_zero_basis().phi1
    proj = np.outer(phi1, phi1.conj())
    out = apply(proj, basis_ket("00++"))
    assert abs(np.linalg.norm(out) ** 2 - 1.0 / 12.0) < 1e-12


def test_commutator_vanishes_for_equal():
    assert max_abs(commutator(SIGMA_Z, SIGMA_Z)) == 0.0


def test_commutator_pauli_algebra():
    assert np.allclose(commutator(SIGMA_Z, SIGMA_X), 2j * SIGMA_Y)


def test_commutator_collective_vs_single_site():
    f_matrix = observable_f().matrix()
    z1 = pauli("z", 1, 4).matrix()
    assert max_abs(commutator(f_matrix, z1)) > 0.1


def test_permute_qubits_swaps_sites():
    assert np.allclose(permute_qubits(basis_ket("01+"), (2, 1, 3)), basis_ket("10+"))
    assert np.allclose(permute_qubits(product_ket("0-1+"), (4, 3, 2, 1)),
                       product_ket("+1-0"))


def test_as_state_rejects_bad_input():
    with pytest.raises(ValueError):
        as_state([np.nan, 0.0])
    with pytest.raises(DimensionMismatchError):
        as_state([1.0, 0.0, 0.0])
    with pytest.raises(CapacityError):
        as_state(np.zeros(2 ** (MAX_QUBITS + 1)))


def test_eigen_diagonal():
    dec = hermitian_eigen(np.diag([3.0, 2.0]))
    assert np.allclose(dec.eigenvalues, [3.0, 2.0])
    assert abs(fidelity(dec.eigenvectors[:, 0], KET0) - 1.0) < 1e-12


def test_eigen_sigma_x():
    dec = hermitian_eigen(SIGMA_X)
    assert np.allclose(dec.eigenvalues, [1.0, -1.0], atol=1e-12)
    assert abs(fidelity(dec.eigenvectors[:, 0], basis_ket("+")) - 1.0) < 1e-12
    assert abs(fidelity(dec.eigenvectors[:, 1], basis_ket("-")) - 1.0) < 1e-12


def test_eigen_collective_observable_spectrum():
    dec = hermitian_eigen(observable_f().matrix())
    rounded = np.round(dec.eigenvalues, 10)
    assert rounded[0] == 1.0
    assert rounded[-1] == -1.0
    assert np.all(rounded[1:-1] == 0.0)


def test_eigen_random_hermitian_properties():
    rng = np.random.default_rng(17)
    for _ in range(25):
        dim = int(rng.choice([2, 3, 4, 8, 16]))
        m = random_hermitian(dim, rng)
        dec = hermitian_eigen(m)
        # eigenvalues sorted descending and real
        assert np.all(np.diff(dec.eigenvalues) <= 1e-12)
        # orthonormal eigenvectors
        v = dec.eigenvectors
        assert max_abs(v.conj().T @ v - np.eye(dim)) < 1e-10
        # reconstruction residual
        assert max_abs(dec.reconstruct() - m) < 1e-9
        # numpy as an independent oracle for the spectrum
        assert np.allclose(np.sort(dec.eigenvalues), np.linalg.eigvalsh(m), atol=1e-9)


def test_eigen_rejects_non_hermitian():
    with pytest.raises(NonHermitianError):
        hermitian_eigen(np.array([[0.0, 1.0], [0.0, 0.0]]))
