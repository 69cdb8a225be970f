"""Logical codeword construction.

Two bosonic code families are built here as explicit Fock-basis vectors:
GKP codes as envelope-damped coherent-state lattice sums, and
number-phase (NP) codes as displaced-squeezed envelopes combed onto
every s-th Fock level with a quadratic phase.  A trivial |0>/|1> Fock
encoding serves as the baseline.  Construction always happens in a
padded working space so the discarded tail above the published
truncation dimension can be measured honestly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    InvalidArgumentError,
    InvalidDimensionError,
    InvalidEnvelopeError,
    LatticeWindowError,
    TruncationFailureError,
)
from .fock import FockState, displacement, squeeze

FAMILY_GKP = "gkp"
FAMILY_NP = "number-phase"
FAMILY_TRIVIAL = "trivial"

MAX_LATTICE_WINDOW = 60
NP_DIM_CAP = 2048

_ORTHECK_TOL = 1e-12


def _require_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise InvalidArgumentError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class GkpParams:
    """Lattice generators and envelope width for a GKP code.

    The second generator is complex; only its real part is free because
    the symplectic constraint fixes Im(beta) = pi / (2 alpha).
    """

    alpha: float
    beta_real: float
    delta: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", _require_finite("alpha", self.alpha))
        object.__setattr__(self, "beta_real", _require_finite("beta_real", self.beta_real))
        object.__setattr__(self, "delta", _require_finite("delta", self.delta))
        if self.alpha <= 0.0:
            raise InvalidArgumentError(f"alpha must be positive, got {self.alpha}")
        if self.delta <= 0.0:
            raise InvalidArgumentError(f"delta must be positive, got {self.delta}")

    @property
    def beta(self) -> complex:
        return complex(self.beta_real, math.pi / (2.0 * self.alpha))


@dataclass(frozen=True)
class NpParams:
    """Lattice and envelope parameters for a number-phase code."""

    f: float
    s: int
    r: float
    n: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "f", _require_finite("f", self.f))
        object.__setattr__(self, "r", _require_finite("r", self.r))
        object.__setattr__(self, "n", _require_finite("n", self.n))
        if not isinstance(self.s, (int, np.integer)) or self.s < 1:
            raise InvalidArgumentError(f"s must be a positive integer, got {self.s!r}")
        object.__setattr__(self, "s", int(self.s))
        if not 0.0 <= self.f <= 1.0:
            raise InvalidArgumentError(f"f must lie in [0, 1], got {self.f}")
        if self.n < math.sinh(self.r) ** 2:
            raise InvalidEnvelopeError(
                f"mean photon number n={self.n} is below sinh^2(r)={math.sinh(self.r) ** 2:.6f}; "
                "the envelope displacement would be imaginary"
            )

    @property
    def envelope_displacement(self) -> float:
        return math.sqrt(max(self.n - math.sinh(self.r) ** 2, 0.0))


@dataclass(frozen=True)
class CodePair:
    """An orthonormal logical codeword pair with its construction audit."""

    family: str
    dim: int
    ket0: FockState
    ket1: FockState
    raw_overlap: complex
    mean_photon: float
    photon_variance: float
    tail_mass: float
    params: object = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.ket0.dim != self.dim or self.ket1.dim != self.dim:
            raise InvalidDimensionError("codeword dimensions do not match the pair dim")
        for ket in (self.ket0, self.ket1):
            if abs(ket.norm() - 1.0) > 1e-12:
                raise InvalidArgumentError("codewords must be normalized")
        overlap = abs(np.vdot(self.ket0.amplitudes, self.ket1.amplitudes))
        if overlap > _ORTHECK_TOL:
            raise InvalidArgumentError(
                f"codewords must be orthogonal after construction, got |overlap|={overlap:.3e}"
            )

    def ket_matrix(self) -> np.ndarray:
        """Both codewords as rows of a (2, dim) array."""
        return np.vstack([self.ket0.amplitudes, self.ket1.amplitudes])

    def mixed_distribution(self) -> np.ndarray:
        """Photon-number distribution of the maximally mixed logical state."""
        return 0.5 * (np.abs(self.ket0.amplitudes) ** 2 + np.abs(self.ket1.amplitudes) ** 2)

    def support_level(self, eps: float) -> int:
        """Smallest Fock level L whose cumulative mixed-state weight
        reaches 1 - eps; levels above L carry less than eps in total."""
        cum = np.cumsum(self.mixed_distribution())
        idx = np.searchsorted(cum, 1.0 - eps, side="left")
        return int(min(idx, self.dim - 1))


def photon_stats(state: FockState) -> tuple[float, float, Callable[[int], float]]:
    """Mean, variance, and a tail-mass function of a normalized state."""
    p = np.abs(state.amplitudes) ** 2
    ns = np.arange(state.dim, dtype=float)
    mean = float(np.dot(ns, p))
    variance = float(np.dot(ns * ns, p) - mean * mean)

    def tail_mass_at(level: int) -> float:
        if level <= 0:
            return float(np.sum(p))
        if level >= state.dim:
            return 0.0
        return float(np.sum(p[level:]))

    return mean, variance, tail_mass_at


def gkp_truncation(delta: float, eps_tol: float) -> int:
    """Fock cutoff for an envelope of width delta: the envelope damps the
    population like exp(-2 delta^2 n), so the tail drops below eps_tol
    around -ln(eps_tol) / (2 delta^2).  Floored at 16."""
    delta = _require_finite("delta", delta)
    eps_tol = _require_finite("eps_tol", eps_tol)
    if delta <= 0.0:
        raise InvalidArgumentError(f"delta must be positive, got {delta}")
    if not 0.0 < eps_tol < 1.0:
        raise InvalidArgumentError(f"eps_tol must lie in (0, 1), got {eps_tol}")
    return max(16, int(math.ceil(-math.log(eps_tol) / (2.0 * delta * delta))))


def _gkp_padding(delta: float) -> int:
    # The truncation formula drops a 1/(2 delta^2) prefactor on the tail;
    # recover it (plus a fixed margin) so the measured tail really lands
    # below eps_tol.
    two_d2 = 2.0 * delta * delta
    extra = max(0.0, math.log(1.0 / two_d2)) / two_d2
    return int(math.ceil(extra)) + 16


def _coherent_block(gammas: np.ndarray, nmax: int) -> np.ndarray:
    """Fock amplitudes <n|gamma> for a batch of coherent states, computed
    by the stable recursion c_n = c_{n-1} * gamma / sqrt(n)."""
    block = np.zeros((gammas.size, nmax), dtype=np.complex128)
    block[:, 0] = np.exp(-0.5 * np.abs(gammas) ** 2)
    for level in range(1, nmax):
        block[:, level] = block[:, level - 1] * gammas / math.sqrt(level)
    return block


def _loewdin_orthogonalize(k0: np.ndarray, k1: np.ndarray) -> tuple[np.ndarray, np.ndarray, complex]:
    """Symmetric orthogonalization of two normalized vectors.

    Returns the orthonormal pair and the raw overlap <k0|k1>.  Symmetric:
    swapping the inputs swaps the outputs.
    """
    overlap = complex(np.vdot(k0, k1))
    if abs(overlap) >= 1.0 - 1e-12:
        raise TruncationFailureError(
            f"codewords are numerically linearly dependent (|overlap| = {abs(overlap):.6f})"
        )
    gram = np.array([[1.0, overlap], [np.conj(overlap), 1.0]], dtype=np.complex128)
    vals, vecs = np.linalg.eigh(gram)
    inv_sqrt = (vecs / np.sqrt(vals)) @ vecs.conj().T
    stacked = np.stack([k0, k1], axis=1) @ inv_sqrt
    out0 = stacked[:, 0]
    out1 = stacked[:, 1]
    # one exact renormalization pass to absorb float fuzz
    out0 = out0 / np.linalg.norm(out0)
    out1 = out1 - np.vdot(out0, out1) * out0
    out1 = out1 / np.linalg.norm(out1)
    return out0, out1, overlap


def _finalize_pair(
    family: str,
    kets_work: list[np.ndarray],
    dim: int,
    eps_tol: float,
    params: object,
) -> CodePair:
    """Shared tail accounting, truncation, and orthogonalization.

    ``kets_work`` are unnormalized codewords in a working space larger
    than ``dim``; the tail above ``dim`` is measured there.
    """
    tails = []
    truncated = []
    for vec in kets_work:
        norm = np.linalg.norm(vec)
        if norm < 1e-12:
            raise InvalidEnvelopeError(f"a {family} codeword has vanishing norm")
        unit = vec / norm
        tails.append(float(np.sum(np.abs(unit[dim:]) ** 2)))
        head = unit[:dim]
        truncated.append(head / np.linalg.norm(head))
    tail_mass = max(tails)
    if tail_mass >= eps_tol:
        raise TruncationFailureError(
            f"{family} codewords keep {tail_mass:.3e} probability above dim={dim} "
            f"(tolerance {eps_tol:.3e})"
        )
    k0, k1, raw_overlap = _loewdin_orthogonalize(truncated[0], truncated[1])
    ket0 = FockState(k0)
    ket1 = FockState(k1)
    mean0, _, _ = photon_stats(ket0)
    mean1, _, _ = photon_stats(ket1)
    p_mixed = 0.5 * (np.abs(k0) ** 2 + np.abs(k1) ** 2)
    ns = np.arange(dim, dtype=float)
    mean = float(np.dot(ns, p_mixed))
    variance = float(np.dot(ns * ns, p_mixed) - mean * mean)
    return CodePair(
        family=family,
        dim=dim,
        ket0=ket0,
        ket1=ket1,
        raw_overlap=raw_overlap,
        mean_photon=mean,
        photon_variance=variance,
        tail_mass=tail_mass,
        params=params,
    )


def build_gkp(params: GkpParams, eps_tol: float = 1e-8, max_dim: int | None = None) -> CodePair:
    """Construct a finite-energy GKP codeword pair.

    The ideal codewords are lattice sums of coherent states |m alpha +
    l beta> with phase exp(-i pi m l / 2); even m builds |0_L>, odd m
    builds |1_L>.  The envelope exp(-delta^2 n) is applied diagonally,
    then the pair is normalized, truncated, and Loewdin-orthogonalized.
    """
    delta = params.delta
    beta = params.beta
    dim = gkp_truncation(delta, eps_tol) + _gkp_padding(delta)
    if max_dim is not None and dim > max_dim:
        raise TruncationFailureError(
            f"GKP code at delta={delta} needs dim={dim}, above the cap {max_dim}"
        )

    # Window size: every omitted lattice point has max(|m|,|l|) > W, so
    # |gamma| >= sigma_min * (W+1) with sigma_min the smallest singular
    # value of the lattice basis.  Pick W so the omitted envelope weight
    # exp(-delta^2 |gamma|^2) stays under eps_tol / 100.
    basis = np.array([[params.alpha, params.beta_real], [0.0, beta.imag]])
    sigma_min = float(np.linalg.svd(basis, compute_uv=False)[-1])
    needed = math.sqrt(math.log(100.0 / eps_tol)) / (delta * sigma_min)
    window = int(math.ceil(needed))
    if window > MAX_LATTICE_WINDOW:
        raise LatticeWindowError(
            f"lattice window {window} exceeds the cap {MAX_LATTICE_WINDOW} "
            f"(alpha={params.alpha}, beta_real={params.beta_real}, delta={delta})"
        )

    n_work = dim + 48
    ms, ls = np.meshgrid(np.arange(-window, window + 1), np.arange(-window, window + 1), indexing="ij")
    ms = ms.ravel()
    ls = ls.ravel()
    gammas = ms * params.alpha + ls * beta
    phases = np.exp(-0.5j * math.pi * ms * ls)
    envelope = np.exp(-delta * delta * np.arange(n_work, dtype=float))

    kets = []
    for parity in (0, 1):
        pick = (np.abs(ms) % 2) == parity
        block = _coherent_block(gammas[pick], n_work)
        vec = phases[pick] @ block
        kets.append(vec * envelope)
    return _finalize_pair(FAMILY_GKP, kets, dim, eps_tol, params)


def _np_envelope(params: NpParams, levels: int) -> np.ndarray:
    """Envelope amplitudes theta_m = <m|D(alpha_env) S(r)|0> computed in a
    padded space, returned for m = 0..levels-1."""
    pad = max(32, int(math.ceil(8.0 * math.sqrt(max(params.n, 1.0)))))
    space = max(64, levels + pad)
    while True:
        vac = np.zeros(space, dtype=np.complex128)
        vac[0] = 1.0
        env = displacement(params.envelope_displacement, space).entries @ (
            squeeze(params.r, space).entries @ vac
        )
        # converged once the top pad carries (relatively) nothing
        top = float(np.sum(np.abs(env[space - pad // 2 :]) ** 2))
        if top < 1e-14:
            break
        space = int(math.ceil(space * 1.5))
        if space > 4096:
            raise TruncationFailureError("envelope amplitudes did not converge")
    return env[:levels]


def _np_code_tail(theta2: np.ndarray, s: int, dim: int) -> float:
    """Worst codeword tail above ``dim`` for envelope weights theta2=|theta_m|^2."""
    levels = np.arange(theta2.size) * s
    tails = []
    for parity in (0, 1):
        pick = (np.arange(theta2.size) % 2) == parity
        total = float(np.sum(theta2[pick]))
        if total <= 0.0:
            tails.append(0.0)
            continue
        above = float(np.sum(theta2[pick & (levels >= dim)]))
        tails.append(above / total)
    return max(tails)


def _np_provisional_dim(params: NpParams) -> int:
    sh2 = math.sinh(params.r) ** 2
    ch2 = math.cosh(params.r) ** 2
    spread = params.n + 3.0 * sh2 * ch2 + params.n * math.exp(2.0 * abs(params.r))
    guard = 16 + 2 * params.s
    return int(math.ceil(2.0 * params.s * spread)) + guard


def np_truncation(params: NpParams, eps_tol: float = 1e-8, cap: int = NP_DIM_CAP) -> int:
    """Truncation dimension for an NP code: start from a variance-based
    provisional size and grow by 1.5x until the constructed codewords'
    tail above the cutoff drops below eps_tol."""
    if not 0.0 < eps_tol < 1.0:
        raise InvalidArgumentError(f"eps_tol must lie in (0, 1), got {eps_tol}")
    dim = _np_provisional_dim(params)
    # envelope computed once, generously, and reused for every candidate
    env_levels = int(math.ceil(min(cap, dim * 4) / params.s)) + 8
    theta2 = np.abs(_np_envelope(params, env_levels)) ** 2
    while True:
        if dim > cap:
            raise TruncationFailureError(
                f"NP code at s={params.s}, n={params.n}, r={params.r} exceeds "
                f"the dimension cap {cap}"
            )
        if (dim - 1) // params.s + 1 > theta2.size:
            env_levels = (dim - 1) // params.s + 16
            theta2 = np.abs(_np_envelope(params, env_levels)) ** 2
        if _np_code_tail(theta2, params.s, dim) < eps_tol:
            return dim
        dim = int(math.ceil(dim * 1.5))


def build_np(params: NpParams, eps_tol: float = 1e-8, max_dim: int | None = None) -> CodePair:
    """Construct a number-phase codeword pair.

    The |+>/|-> states place the envelope amplitude theta_m at Fock level
    s*m with sign (+/-1)^m under the quadratic phase exp(-i f pi
    n^2/(2 s^2)); the logical kets are their sum and difference, which
    live on disjoint (even/odd m) combs and are exactly orthogonal.
    """
    cap = NP_DIM_CAP if max_dim is None else min(NP_DIM_CAP, max_dim)
    dim = np_truncation(params, eps_tol, cap=cap)
    s = params.s
    m_work = (dim - 1) // s + 1 + max(8, 32 // s)
    n_work = (m_work - 1) * s + 1
    theta = _np_envelope(params, m_work)
    ms = np.arange(m_work)
    # exp(-i f pi n^2 / (2 s^2)) at n = s m reduces to exp(-i f pi m^2 / 2)
    quad = np.exp(-0.5j * math.pi * params.f * ms.astype(float) ** 2)
    signs = np.where(ms % 2 == 0, 1.0, -1.0)

    plus = np.zeros(n_work, dtype=np.complex128)
    minus = np.zeros(n_work, dtype=np.complex128)
    plus[ms * s] = quad * theta
    minus[ms * s] = quad * signs * theta
    k0 = (plus + minus) / math.sqrt(2.0)
    k1 = (plus - minus) / math.sqrt(2.0)
    return _finalize_pair(FAMILY_NP, [k0, k1], dim, eps_tol, params)


def build_trivial_fock(dim: int) -> CodePair:
    """The |0>/|1> Fock-state baseline encoding."""
    if not isinstance(dim, (int, np.integer)) or dim < 2:
        raise InvalidDimensionError(f"trivial encoding needs dim >= 2, got {dim!r}")
    dim = int(dim)
    k0 = np.zeros(dim, dtype=np.complex128)
    k1 = np.zeros(dim, dtype=np.complex128)
    k0[0] = 1.0
    k1[1] = 1.0
    return CodePair(
        family=FAMILY_TRIVIAL,
        dim=dim,
        ket0=FockState(k0),
        ket1=FockState(k1),
        raw_overlap=0.0 + 0.0j,
        mean_photon=0.5,
        photon_variance=0.25,
        tail_mass=0.0,
        params=None,
    )
