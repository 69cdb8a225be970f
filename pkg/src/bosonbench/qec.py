"""Near-optimal error-correction fidelity from the code-channel Gram matrix.

The central object is the matrix M of overlaps between all damaged
codewords N_i |mu>.  Its square root, partially traced over the logical
index, gives a two-sided fidelity band [f_tilde, (1 + f_tilde)/2] that
brackets the fidelity of the best possible recovery map.  A slow
transpose-channel recovery is kept alongside as an independent oracle;
it must land inside the band.

Every evaluation carries its numerical error budget (channel
completeness defect, codeword tail mass, hermiticity and trace defects
of M, clamped eigenvalue mass).  A result whose defects are not well
below its own infidelity is flagged rather than silently reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .channel import (
    DEFAULT_EPS_KRAUS,
    DEFAULT_FLOORS,
    KrausChannel,
    NoisePoint,
    compose_channel,
)
from .codes import CodePair, build_trivial_fock
from .errors import (
    InvalidArgumentError,
    InvalidDimensionError,
    NumericalConsistencyError,
    OracleScaleError,
)
from .fock import clamped_eigh

EIG_CLAMP = 1e-12
FLAG_FLOOR = 1e-7
ORACLE_DIM_LIMIT = 64
ORACLE_KRAUS_LIMIT = 64
DEFAULT_EPS_TOL = 1e-8
EPS_CEILING = 1e-4
TOL_SAFETY = 500.0


@dataclass(frozen=True)
class QecMatrix:
    """Gram matrix of the damaged codewords v_(mu,i) = N_i |mu>.

    Rows and columns are ordered logical-index major: index mu * n_k + i.
    The trailing fields record where the matrix came from so the
    fidelity stage can audit the full error budget.
    """

    entries: np.ndarray
    n_k: int
    d_l: int = 2
    herm_defect: float = 0.0
    eps_trunc: float = 0.0
    tail_mass: float = 0.0
    dim: int = 0

    def __post_init__(self) -> None:
        entries = np.asarray(self.entries, dtype=np.complex128)
        side = self.d_l * self.n_k
        if entries.shape != (side, side):
            raise InvalidDimensionError(
                f"expected a {side}x{side} matrix for d_l={self.d_l}, n_k={self.n_k}, "
                f"got shape {entries.shape}"
            )
        if not np.all(np.isfinite(entries.view(np.float64))):
            raise NumericalConsistencyError("QEC matrix contains non-finite entries")
        object.__setattr__(self, "entries", entries)


@dataclass(frozen=True)
class QecDiagnostics:
    """Numerical error budget of one fidelity evaluation."""

    eps_trunc: float
    tail_mass: float
    herm_defect: float
    trace_defect: float
    clamp_mass: float
    n_kraus: int
    dim: int
    budget: float
    flagged: bool

    def defects(self) -> tuple[float, ...]:
        return (
            self.eps_trunc,
            self.tail_mass,
            self.herm_defect,
            self.trace_defect,
            self.clamp_mass,
        )


@dataclass(frozen=True)
class FidelityResult:
    f_tilde: float
    f_lower: float
    f_upper: float
    diagnostics: QecDiagnostics

    @property
    def flagged(self) -> bool:
        return self.diagnostics.flagged

    @property
    def infidelity(self) -> float:
        return 1.0 - self.f_tilde


def _damaged_vectors(code: CodePair, channel: KrausChannel) -> np.ndarray:
    """Stack v_(mu,i) = N_i |mu> as rows, logical index major, Kraus
    operators in their row-major (l, k) order."""
    if code.dim != channel.dim:
        raise InvalidDimensionError(
            f"code dim {code.dim} does not match channel dim {channel.dim}"
        )
    kets = code.ket_matrix()  # (2, dim)
    loss = np.stack(channel.loss_matrices)  # (K, dim, dim)
    damaged = loss @ kets.T  # (K, dim, 2): damaged[k, :, mu] = A_k |mu>
    damaged = np.moveaxis(damaged, -1, 0)  # (2, K, dim)
    diags = channel.dephasing_diagonals  # (L, dim)
    v = damaged[:, None, :, :] * diags[None, :, None, :]  # (2, L, K, dim)
    return v.reshape(2 * channel.n_kraus, code.dim)


def qec_matrix(code: CodePair, channel: KrausChannel) -> QecMatrix:
    """Assemble the Gram matrix of all damaged codewords.

    Works on the factorized channel: loss operators hit the two
    codewords once each, dephasing diagonals are broadcast over the
    results, and a single matrix product forms all inner products.
    """
    v = _damaged_vectors(code, channel)
    gram = np.conj(v) @ v.T  # gram[r, c] = <v_r | v_c>
    herm_defect = float(np.max(np.abs(gram - gram.conj().T)))
    gram = 0.5 * (gram + gram.conj().T)
    return QecMatrix(
        entries=gram,
        n_k=channel.n_kraus,
        herm_defect=herm_defect,
        eps_trunc=channel.completeness_error,
        tail_mass=code.tail_mass,
        dim=code.dim,
    )


def near_optimal_fidelity(m: QecMatrix) -> FidelityResult:
    """Two-sided fidelity band from the matrix square root of M.

    f_tilde = ||Tr_L sqrt(M)||_F^2 / 4 is the lower edge; the upper edge
    is (1 + f_tilde) / 2.  The best recovery fidelity lies between them.
    """
    vals, vecs, _, clamp_mass = clamped_eigh(m.entries, EIG_CLAMP)
    root = (vecs * np.sqrt(vals)) @ vecs.conj().T
    nk = m.n_k
    traced = root[:nk, :nk] + root[nk:, nk:]
    f_tilde = float(np.sum(np.abs(traced) ** 2)) / 4.0
    if f_tilde > 1.0 + 1e-9:
        raise NumericalConsistencyError(
            f"fidelity estimate {f_tilde!r} exceeds 1 beyond numerical slack"
        )
    f_tilde = min(max(f_tilde, 0.0), 1.0)
    trace_defect = abs(float(np.trace(m.entries).real) - 2.0) / 2.0
    budget = max(0.01 * (1.0 - f_tilde), FLAG_FLOOR)
    diag = QecDiagnostics(
        eps_trunc=m.eps_trunc,
        tail_mass=m.tail_mass,
        herm_defect=m.herm_defect,
        trace_defect=trace_defect,
        clamp_mass=clamp_mass,
        n_kraus=nk,
        dim=m.dim,
        budget=budget,
        flagged=False,
    )
    flagged = any(d > budget for d in diag.defects())
    diag = replace(diag, flagged=flagged)
    return FidelityResult(
        f_tilde=f_tilde,
        f_lower=f_tilde,
        f_upper=(1.0 + f_tilde) / 2.0,
        diagnostics=diag,
    )


def transpose_channel_oracle(code: CodePair, channel: KrausChannel) -> float:
    """Entanglement fidelity of the explicit transpose-channel recovery,
    computed by direct superoperator action.

    Deliberately slow and structurally independent of the Gram-matrix
    route; guarded to small instances.
    """
    if code.dim > ORACLE_DIM_LIMIT:
        raise OracleScaleError(
            f"oracle limited to dim <= {ORACLE_DIM_LIMIT}, got {code.dim}"
        )
    if channel.n_kraus > ORACLE_KRAUS_LIMIT:
        raise OracleScaleError(
            f"oracle limited to {ORACLE_KRAUS_LIMIT} Kraus operators, got {channel.n_kraus}"
        )
    if code.dim != channel.dim:
        raise InvalidDimensionError(
            f"code dim {code.dim} does not match channel dim {channel.dim}"
        )
    kets = code.ket_matrix()
    proj = kets.T @ kets.conj()  # P = |0><0| + |1><1|
    ops = [op.entries for op in channel.operators]
    n_proj = np.zeros_like(proj)
    for op in ops:
        n_proj += op @ proj @ op.conj().T
    vals, vecs = np.linalg.eigh(0.5 * (n_proj + n_proj.conj().T))
    top = float(vals[-1]) if vals.size else 0.0
    inv_root = np.zeros_like(vals)
    keep = vals > 1e-10 * max(top, 0.0)
    inv_root[keep] = 1.0 / np.sqrt(vals[keep])
    n_inv_sqrt = (vecs * inv_root) @ vecs.conj().T
    recoveries = [proj @ op.conj().T @ n_inv_sqrt for op in ops]

    total = 0.0
    for mu in range(2):
        for nu in range(2):
            rho = np.outer(kets[mu], kets[nu].conj())
            sent = np.zeros_like(rho)
            for op in ops:
                sent += op @ rho @ op.conj().T
            back = np.zeros_like(rho)
            for rec in recoveries:
                back += rec @ sent @ rec.conj().T
            total += float(np.real(kets[mu].conj() @ back @ kets[nu]))
    return total / 4.0


@dataclass(frozen=True)
class EvalOptions:
    """Accuracy and support knobs for one end-to-end evaluation."""

    eps_tol: float = DEFAULT_EPS_TOL
    eps_kraus: float = DEFAULT_EPS_KRAUS
    floors: tuple[int, int] = DEFAULT_FLOORS
    support_mode: str = "quantile"

    def __post_init__(self) -> None:
        if self.support_mode not in ("quantile", "strict"):
            raise InvalidArgumentError(
                f"support_mode must be 'quantile' or 'strict', got {self.support_mode!r}"
            )


def resolve_tolerances(
    infidelity_scale: float,
    base_eps_tol: float = DEFAULT_EPS_TOL,
    base_eps_kraus: float = DEFAULT_EPS_KRAUS,
) -> tuple[float, float]:
    """Pick evaluation tolerances a fixed safety factor below an expected
    infidelity, clipped to [base, ceiling].

    Keeps operator counts proportionate to the accuracy actually needed:
    noisy cells relax toward the ceiling, clean cells keep the tight
    defaults.
    """
    if not math.isfinite(infidelity_scale):
        raise InvalidArgumentError(f"infidelity_scale must be finite, got {infidelity_scale!r}")
    scale = max(infidelity_scale, 0.0) / TOL_SAFETY
    eps_tol = min(max(scale, base_eps_tol), EPS_CEILING)
    eps_kraus = min(max(scale, base_eps_kraus), EPS_CEILING)
    return eps_tol, eps_kraus


def _fidelity_from_vectors(code: CodePair, channel: KrausChannel) -> FidelityResult:
    """Same band as near_optimal_fidelity, computed through the dim x dim
    Gram of the damaged-vector columns.

    M = conj(V V^dag) shares its nonzero spectrum with G = V^dag V, and
    sqrt(M) = conj(V G^{-1/2} V^dag), so the partial trace needs only the
    two logical diagonal blocks of V X V^dag with X = G^{-1/2}.  Exact up
    to roundoff, and much cheaper whenever 2 n_k exceeds dim.
    """
    v = _damaged_vectors(code, channel)
    nk = channel.n_kraus
    small = v.conj().T @ v  # dim x dim, same nonzero spectrum as the QEC matrix
    herm_defect = float(np.max(np.abs(small - small.conj().T)))
    vals, vecs, _, clamp_mass = clamped_eigh(small, EIG_CLAMP)
    inv_root = np.zeros_like(vals)
    keep = vals > 0.0
    inv_root[keep] = 1.0 / np.sqrt(vals[keep])
    x = (vecs * inv_root) @ vecs.conj().T
    blocks = [v[:nk], v[nk:]]
    traced = sum(b @ x @ b.conj().T for b in blocks)
    f_tilde = float(np.sum(np.abs(traced) ** 2)) / 4.0
    if f_tilde > 1.0 + 1e-9:
        raise NumericalConsistencyError(
            f"fidelity estimate {f_tilde!r} exceeds 1 beyond numerical slack"
        )
    f_tilde = min(max(f_tilde, 0.0), 1.0)
    trace_defect = abs(float(np.trace(small).real) - 2.0) / 2.0
    budget = max(0.01 * (1.0 - f_tilde), FLAG_FLOOR)
    diag = QecDiagnostics(
        eps_trunc=channel.completeness_error,
        tail_mass=code.tail_mass,
        herm_defect=herm_defect,
        trace_defect=trace_defect,
        clamp_mass=clamp_mass,
        n_kraus=nk,
        dim=code.dim,
        budget=budget,
        flagged=False,
    )
    diag = replace(diag, flagged=any(d > budget for d in diag.defects()))
    return FidelityResult(
        f_tilde=f_tilde,
        f_lower=f_tilde,
        f_upper=(1.0 + f_tilde) / 2.0,
        diagnostics=diag,
    )


def evaluate_pair(
    code: CodePair, noise: NoisePoint, options: EvalOptions = EvalOptions()
) -> FidelityResult:
    """Compose the channel on the code's occupied support and run the
    Gram-matrix fidelity pipeline.

    When the damaged-vector count exceeds the Fock dimension, the
    rank-limited route through the dim x dim Gram is used; the two
    routes agree to roundoff.
    """
    if options.support_mode == "strict":
        n_max = code.dim - 1
    else:
        n_max = code.support_level(options.eps_kraus)
    channel = compose_channel(
        noise,
        code.dim,
        n_max,
        eps_kraus=options.eps_kraus,
        floors=options.floors,
    )
    if 2 * channel.n_kraus > code.dim:
        return _fidelity_from_vectors(code, channel)
    return near_optimal_fidelity(qec_matrix(code, channel))


def baseline_fidelity(
    noise: NoisePoint,
    dim: int = 4,
    options: EvalOptions = EvalOptions(),
) -> FidelityResult:
    """Fidelity of the bare Fock |0>,|1> qubit through the same pipeline;
    the break-even reference for encoded performance."""
    return evaluate_pair(build_trivial_fock(dim), noise, options)
