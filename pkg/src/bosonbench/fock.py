"""Truncated Fock-space primitives.

Everything downstream works in a finite Fock basis |0>, ..., |N-1> with
dense complex128 matrices.  Gaussian unitaries are built by exact
eigendecomposition of their Hermitian generators, which keeps them
numerically unitary far below the truncation edge; the top ~k_guard
levels are where truncation bites and callers are expected to keep real
amplitude away from them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, InvalidDimensionError, NumericalConsistencyError

UNITARITY_TOL = 1e-10


def _as_complex_matrix(entries, dim: int) -> np.ndarray:
    arr = np.ascontiguousarray(entries, dtype=np.complex128)
    if arr.shape != (dim, dim):
        raise InvalidDimensionError(
            f"operator entries have shape {arr.shape}, expected ({dim}, {dim})"
        )
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class FockState:
    """A ket in the truncated Fock basis."""

    amplitudes: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)
        if arr.ndim != 1 or arr.size < 1:
            raise InvalidDimensionError("state amplitudes must be a non-empty 1-d array")
        arr.flags.writeable = False
        object.__setattr__(self, "amplitudes", arr)
        object.__setattr__(self, "dim", arr.size)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True)
class FockOperator:
    """A dense operator on the truncated Fock basis.

    ``unitary`` marks operators built as exponentials of anti-Hermitian
    generators; they satisfy U^dag U = I up to truncation effects in the
    top k_guard levels.
    """

    entries: np.ndarray
    unitary: bool = False
    dim: int = field(init=False)

    def __post_init__(self) -> None:
        arr = np.asarray(self.entries)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
            raise InvalidDimensionError(f"operator entries must be square, got shape {arr.shape}")
        object.__setattr__(self, "entries", _as_complex_matrix(arr, arr.shape[0]))
        object.__setattr__(self, "dim", arr.shape[0])

    def apply(self, state: FockState) -> FockState:
        if state.dim != self.dim:
            raise InvalidDimensionError(
                f"operator dim {self.dim} does not match state dim {state.dim}"
            )
        return FockState(self.entries @ state.amplitudes)

    def __matmul__(self, other: "FockOperator") -> "FockOperator":
        if not isinstance(other, FockOperator):
            return NotImplemented
        if other.dim != self.dim:
            raise InvalidDimensionError("operator dimensions differ")
        return FockOperator(self.entries @ other.entries)

    def dagger(self) -> "FockOperator":
        return FockOperator(self.entries.conj().T, unitary=self.unitary)


def _check_dim(dim: int) -> int:
    if not isinstance(dim, (int, np.integer)) or dim < 1:
        raise InvalidDimensionError(f"dimension must be a positive integer, got {dim!r}")
    return int(dim)


def k_guard(alpha: complex = 0.0, r: float = 0.0) -> int:
    """Number of top Fock levels where a Gaussian unitary of the given
    strength is allowed to deviate from unitarity."""
    return int(math.ceil(4.0 * abs(alpha) ** 2 + 4.0 * math.sinh(abs(r)) ** 2 + 10.0))


def annihilation_matrix(dim: int) -> np.ndarray:
    dim = _check_dim(dim)
    a = np.zeros((dim, dim), dtype=np.complex128)
    ns = np.arange(1, dim)
    a[ns - 1, ns] = np.sqrt(ns)
    return a


def annihilation(dim: int) -> FockOperator:
    """Ladder-down operator: sqrt(n) on the first superdiagonal."""
    return FockOperator(annihilation_matrix(dim))


def _guarded_unitarity_check(u: np.ndarray, guard: int, what: str) -> None:
    """Assert U^dag U = I on the block at least ``guard`` levels below the cutoff."""
    dim = u.shape[0]
    keep = dim - guard
    if keep <= 0:
        return
    block = (u.conj().T @ u)[:keep, :keep]
    defect = float(np.max(np.abs(block - np.eye(keep))))
    if defect >= UNITARITY_TOL:
        raise NumericalConsistencyError(
            f"{what} failed guarded unitarity check: defect {defect:.3e} "
            f"on the lowest {keep} of {dim} levels"
        )


def displacement(alpha: complex, dim: int) -> FockOperator:
    """exp(alpha a^dag - conj(alpha) a) via eigendecomposition of the
    Hermitian generator i(alpha a^dag - conj(alpha) a)."""
    dim = _check_dim(dim)
    a = annihilation_matrix(dim)
    h = 1j * (alpha * a.conj().T - np.conj(alpha) * a)
    vals, vecs = np.linalg.eigh(h)
    u = (vecs * np.exp(-1j * vals)) @ vecs.conj().T
    _guarded_unitarity_check(u, k_guard(alpha=alpha), "displacement")
    return FockOperator(u, unitary=True)


def squeeze(r: float, dim: int) -> FockOperator:
    """exp((r/2)(a^2 - a^dag^2)) by the same eigendecomposition route."""
    dim = _check_dim(dim)
    if not np.isfinite(r):
        raise InvalidArgumentError(f"squeeze parameter must be finite, got {r!r}")
    a = annihilation_matrix(dim)
    a2 = a @ a
    h = 1j * (0.5 * r) * (a2 - a2.conj().T)
    vals, vecs = np.linalg.eigh(h)
    u = (vecs * np.exp(-1j * vals)) @ vecs.conj().T
    _guarded_unitarity_check(u, k_guard(r=r), "squeeze")
    return FockOperator(u, unitary=True)


def rotation(phi: float, dim: int) -> FockOperator:
    """Number-basis phase rotation diag(exp(i phi n))."""
    dim = _check_dim(dim)
    if not np.isfinite(phi):
        raise InvalidArgumentError(f"rotation angle must be finite, got {phi!r}")
    return FockOperator(np.diag(np.exp(1j * phi * np.arange(dim))), unitary=True)


def number_translation(l: int, dim: int) -> FockOperator:
    """Sigma_l: ones on the l-th superdiagonal, |n><n+l|."""
    dim = _check_dim(dim)
    if not isinstance(l, (int, np.integer)) or l < 0 or l >= dim:
        raise InvalidArgumentError(
            f"translation step must be an integer in [0, {dim}), got {l!r}"
        )
    m = np.zeros((dim, dim), dtype=np.complex128)
    idx = np.arange(dim - l)
    m[idx, idx + l] = 1.0
    return FockOperator(m)


def clamped_eigh(m: np.ndarray, clamp: float) -> tuple[np.ndarray, np.ndarray, float, float]:
    """Eigendecompose a nominally Hermitian PSD matrix.

    Returns (clamped eigenvalues, eigenvectors, hermiticity defect,
    clamped mass).  Eigenvalues below clamp * max-eigenvalue are set to
    zero; the clamped mass is the total absolute weight removed.
    """
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidDimensionError(f"expected a square matrix, got shape {m.shape}")
    herm_defect = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
    sym = 0.5 * (m + m.conj().T)
    vals, vecs = np.linalg.eigh(sym)
    top = float(vals[-1]) if vals.size else 0.0
    if top <= 0.0:
        return np.zeros_like(vals), vecs, herm_defect, float(np.sum(np.abs(vals)))
    cut = clamp * top
    small = vals < cut
    clamp_mass = float(np.sum(np.abs(vals[small])))
    vals = vals.copy()
    vals[small] = 0.0
    return vals, vecs, herm_defect, clamp_mass


def hermitian_sqrt(m: np.ndarray, clamp: float = 1e-12) -> np.ndarray:
    """Principal square root of a Hermitian PSD matrix with eigenvalue
    clamping: eigenvalues below clamp * max eigenvalue are zeroed.

    Rejects inputs whose hermiticity defect exceeds 1e-10 relative to the
    largest entry.
    """
    vals, vecs, herm_defect, _ = clamped_eigh(m, clamp)
    scale = float(np.max(np.abs(m))) if np.asarray(m).size else 0.0
    if scale > 0.0 and herm_defect > 1e-10 * scale:
        raise NumericalConsistencyError(
            f"matrix is not Hermitian: defect {herm_defect:.3e} vs scale {scale:.3e}"
        )
    return (vecs * np.sqrt(vals)) @ vecs.conj().T
