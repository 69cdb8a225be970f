"""Truncated Fock-space operator tests against scipy oracles."""

import numpy as np
import pytest
import scipy.linalg
import scipy.special

from bosonbench.errors import (
    InvalidArgumentError,
    InvalidDimensionError,
    NumericalConsistencyError,
)
from bosonbench.fock import (
    FockOperator,
    FockState,
    annihilation,
    annihilation_matrix,
    clamped_eigh,
    displacement,
    hermitian_sqrt,
    k_guard,
    number_translation,
    rotation,
    squeeze,
)


def test_annihilation_entries():
    a = annihilation_matrix(6)
    for n in range(1, 6):
        assert a[n - 1, n] == pytest.approx(np.sqrt(n))
    assert np.count_nonzero(a) == 5


def test_annihilation_action():
    a = annihilation(5)
    ket3 = np.zeros(5)
    ket3[3] = 1.0
    out = a.apply(FockState(ket3))
    expected = np.zeros(5, dtype=complex)
    expected[2] = np.sqrt(3)
    np.testing.assert_allclose(out.amplitudes, expected, atol=1e-15)


def test_commutator_truncation_structure():
    # [a, a+] = I everywhere except the top corner, which absorbs the cutoff
    dim = 12
    a = annihilation_matrix(dim)
    comm = a @ a.conj().T - a.conj().T @ a
    expected = np.eye(dim)
    expected[-1, -1] = -(dim - 1)
    np.testing.assert_allclose(comm, expected, atol=1e-12)


@pytest.mark.parametrize("alpha", [0.5, 1.2 + 0.7j, -0.3 + 1.1j])
def test_displacement_matches_expm(alpha):
    dim = 64
    a = annihilation_matrix(dim)
    gen = alpha * a.conj().T - np.conj(alpha) * a
    oracle = scipy.linalg.expm(gen)
    built = displacement(alpha, dim)
    assert built.unitary
    np.testing.assert_allclose(built.entries, oracle, atol=1e-11)


@pytest.mark.parametrize("r", [0.2, 0.5, -0.4])
def test_squeeze_matches_expm(r):
    dim = 64
    a = annihilation_matrix(dim)
    gen = 0.5 * r * (a @ a - a.conj().T @ a.conj().T)
    oracle = scipy.linalg.expm(gen)
    built = squeeze(r, dim)
    np.testing.assert_allclose(built.entries, oracle, atol=1e-11)


def test_displacement_vacuum_coherent():
    # D(alpha)|0> must be the coherent state with Poisson amplitudes
    alpha = 0.9
    dim = 40
    column = displacement(alpha, dim).entries[:, 0]
    ns = np.arange(dim)
    expected = np.exp(-0.5 * alpha**2) * alpha**ns / np.sqrt(
        scipy.special.factorial(ns)
    )
    np.testing.assert_allclose(column.real, expected, atol=1e-12)
    np.testing.assert_allclose(column.imag, 0.0, atol=1e-12)


def test_rotation_diagonal():
    phi = 0.73
    op = rotation(phi, 9)
    expected = np.diag(np.exp(1j * phi * np.arange(9)))
    np.testing.assert_allclose(op.entries, expected, atol=1e-15)


def test_number_translation_superdiagonal():
    op = number_translation(2, 6)
    expected = np.zeros((6, 6))
    expected[0, 2] = expected[1, 3] = expected[2, 4] = expected[3, 5] = 1.0
    np.testing.assert_allclose(op.entries, expected)


@pytest.mark.parametrize("bad", [-1, 6, 10])
def test_number_translation_range_errors(bad):
    with pytest.raises(InvalidArgumentError):
        number_translation(bad, 6)


def test_k_guard_monotone():
    assert k_guard() == 10
    assert k_guard(alpha=2.0) >= k_guard(alpha=1.0)
    assert k_guard(r=0.5) > k_guard()


@pytest.mark.parametrize("alpha,dim", [(1.0, 30), (2.0, 40), (3.0, 60)])
def test_guarded_block_unitarity(alpha, dim):
    # exponential constructors promise U+U = I on the block at least
    # k_guard levels below the cutoff
    guard = k_guard(alpha=alpha)
    keep = dim - guard
    assert keep > 0
    u = displacement(alpha, dim).entries
    block = (u.conj().T @ u)[:keep, :keep]
    assert np.max(np.abs(block - np.eye(keep))) < 1e-10


def test_clamped_eigh_reconstruction(rng):
    q, _ = np.linalg.qr(rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8)))
    vals = np.array([3.0, 1.0, 0.5, 0.1, 1e-9, 1e-13, 0.0, 2.0])
    m = (q * vals) @ q.conj().T
    clamped, vecs, herm_defect, clamp_mass = clamped_eigh(m, clamp=1e-12)
    assert herm_defect < 1e-14
    # eigenvalues below clamp*max are zeroed and their weight is accounted
    assert np.all(clamped >= 0.0)
    assert clamp_mass == pytest.approx(1e-13, rel=0.5)
    recon = (vecs * clamped) @ vecs.conj().T
    keep = (q * np.where(vals < 1e-12 * vals.max(), 0.0, vals)) @ q.conj().T
    np.testing.assert_allclose(recon, keep, atol=1e-12)


def test_clamped_eigh_reports_hermiticity_defect(rng):
    m = rng.normal(size=(5, 5))
    m[0, 1] += 0.1  # deliberately non-symmetric
    _, _, herm_defect, _ = clamped_eigh(m, clamp=1e-12)
    assert herm_defect > 1e-3


def test_hermitian_sqrt_matches_scipy(rng):
    x = rng.normal(size=(10, 10)) + 1j * rng.normal(size=(10, 10))
    m = x @ x.conj().T
    root = hermitian_sqrt(m)
    oracle = scipy.linalg.sqrtm(m)
    np.testing.assert_allclose(root, oracle, atol=1e-9)
    np.testing.assert_allclose(root @ root, m, atol=1e-10)


def test_hermitian_sqrt_rejects_nonhermitian(rng):
    m = rng.normal(size=(6, 6))
    m[2, 4] += 1.0
    with pytest.raises(NumericalConsistencyError):
        hermitian_sqrt(m)


def test_operator_shape_validation():
    with pytest.raises(InvalidDimensionError):
        FockOperator(np.zeros((3, 4)))
    with pytest.raises(InvalidDimensionError):
        FockState(np.zeros((2, 2)))


def test_operator_apply_dim_mismatch():
    op = annihilation(4)
    with pytest.raises(InvalidDimensionError):
        op.apply(FockState(np.zeros(5)))
