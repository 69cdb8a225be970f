"""Composed photon-loss / dephasing Kraus channel.

The integrated noise map factorizes into a loss part A_k (binomially
distributed loss events) followed by a dephasing part B_l (Poisson
distributed at rate kappa_t n^2).  Operator counts come from exact tail
accumulation of those two distributions at the worst occupied Fock
level; the composed channel is certified by measuring how far
sum_i N_i^dag N_i sits from the identity on the code support.

Everything that involves factorials or powers is accumulated in log
domain, so counts and matrix entries never overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    IncompleteChannelError,
    InvalidArgumentError,
    InvalidDimensionError,
)
from .fock import FockOperator

DEFAULT_EPS_KRAUS = 1e-9
DEFAULT_FLOORS = (3, 3)


@dataclass(frozen=True)
class NoisePoint:
    """Dimensionless loss and dephasing strengths (rate times time)."""

    gamma_t: float
    kappa_t: float

    def __post_init__(self) -> None:
        for name, value in (("gamma_t", self.gamma_t), ("kappa_t", self.kappa_t)):
            value = float(value)
            if not math.isfinite(value) or value < 0.0:
                raise InvalidArgumentError(f"{name} must be finite and non-negative, got {value!r}")
            object.__setattr__(self, name, value)


def _log_factorials(count: int) -> np.ndarray:
    return np.array([math.lgamma(k + 1.0) for k in range(count)])


def _validate_count_args(n_max: int, eps: float, floor: int) -> None:
    if not isinstance(n_max, (int, np.integer)) or n_max < 0:
        raise InvalidArgumentError(f"n_max must be a non-negative integer, got {n_max!r}")
    if not 0.0 < eps <= 1.0:
        raise InvalidArgumentError(f"eps must lie in (0, 1], got {eps!r}")
    if not isinstance(floor, (int, np.integer)) or floor < 0:
        raise InvalidArgumentError(f"floor must be a non-negative integer, got {floor!r}")


def loss_count(gamma_t: float, n_max: int, eps: float, floor: int = 3) -> int:
    """Smallest k_max whose binomial loss tail beyond k_max at the worst
    level n_max drops below eps, floored at ``floor``.

    The loss-event count on a level-n state is binomial with success
    probability p = 1 - exp(-gamma_t); the tail is accumulated exactly
    from log-domain terms.
    """
    if not math.isfinite(gamma_t) or gamma_t < 0.0:
        raise InvalidArgumentError(f"gamma_t must be finite and non-negative, got {gamma_t!r}")
    _validate_count_args(n_max, eps, floor)
    p = -math.expm1(-gamma_t)
    if p <= 0.0 or n_max == 0:
        return int(floor)
    log_p = math.log(p)
    log_q = -gamma_t  # log(1-p) exactly
    lf = _log_factorials(n_max + 1)
    ks = np.arange(n_max + 1)
    log_pmf = lf[n_max] - lf[ks] - lf[n_max - ks] + ks * log_p + (n_max - ks) * log_q
    pmf = np.exp(log_pmf)
    # tail(k) = sum_{j > k} pmf(j), summed from the top to avoid cancellation
    tail_beyond = np.concatenate([np.cumsum(pmf[::-1])[::-1][1:], [0.0]])
    k_max = int(np.argmax(tail_beyond < eps))
    return max(k_max, int(floor))


def deph_count(kappa_t: float, n_max: int, eps: float, floor: int = 3) -> int:
    """Smallest l_max whose Poisson dephasing tail beyond l_max at the
    worst level n_max drops below eps, floored at ``floor``.

    The dephasing-event count is Poisson with parameter kappa_t n_max^2.
    """
    if not math.isfinite(kappa_t) or kappa_t < 0.0:
        raise InvalidArgumentError(f"kappa_t must be finite and non-negative, got {kappa_t!r}")
    _validate_count_args(n_max, eps, floor)
    lam = kappa_t * float(n_max) ** 2
    if lam <= 0.0:
        return int(floor)
    top = int(math.ceil(lam + 20.0 * math.sqrt(lam + 1.0) + 50.0))
    ls = np.arange(top + 1)
    lf = _log_factorials(top + 1)
    log_pmf = -lam + ls * math.log(lam) - lf
    pmf = np.exp(log_pmf)
    tail_beyond = np.concatenate([np.cumsum(pmf[::-1])[::-1][1:], [0.0]])
    l_max = int(np.argmax(tail_beyond < eps))
    return max(l_max, int(floor))


def _loss_matrices(gamma_t: float, dim: int, k_max: int) -> list[np.ndarray]:
    p = -math.expm1(-gamma_t)
    lf = _log_factorials(dim + k_max + 1)
    ops = []
    for k in range(k_max + 1):
        m = np.zeros((dim, dim), dtype=np.complex128)
        if k == 0:
            np.fill_diagonal(m, np.exp(-0.5 * gamma_t * np.arange(dim)))
        elif p > 0.0:
            rows = np.arange(dim - k)
            # entry <m|A_k|m+k>: sqrt of the binomial pmf factors, all in log domain
            log_amp = (
                0.5 * k * math.log(p)
                - 0.5 * lf[k]
                - 0.5 * gamma_t * rows
                + 0.5 * (lf[rows + k] - lf[rows])
            )
            m[rows, rows + k] = np.exp(log_amp)
        ops.append(m)
    return ops


def build_loss_kraus(gamma_t: float, dim: int, k_max: int) -> list[FockOperator]:
    """Loss operators A_k = (1-e^{-gamma_t})^{k/2}/sqrt(k!) e^{-gamma_t n/2} a^k
    for k = 0..k_max."""
    if not isinstance(dim, (int, np.integer)) or dim < 1:
        raise InvalidDimensionError(f"dim must be a positive integer, got {dim!r}")
    if not isinstance(k_max, (int, np.integer)) or k_max < 0 or k_max >= dim:
        raise InvalidArgumentError(f"k_max must lie in [0, dim), got {k_max!r}")
    if not math.isfinite(gamma_t) or gamma_t < 0.0:
        raise InvalidArgumentError(f"gamma_t must be finite and non-negative, got {gamma_t!r}")
    return [FockOperator(m) for m in _loss_matrices(gamma_t, int(dim), int(k_max))]


def _deph_diagonals(kappa_t: float, dim: int, l_max: int) -> np.ndarray:
    ns = np.arange(dim, dtype=float)
    lam = kappa_t * ns * ns  # Poisson parameter per Fock level
    diags = np.zeros((l_max + 1, dim))
    lf = _log_factorials(l_max + 1)
    with np.errstate(divide="ignore"):
        log_lam = np.where(lam > 0.0, np.log(lam), -np.inf)
    for l in range(l_max + 1):
        if l == 0:
            diags[0] = np.exp(-0.5 * lam)
        elif kappa_t > 0.0:
            # sqrt of the Poisson pmf: exp(0.5 (l ln lam - lam - ln l!))
            log_amp = 0.5 * (l * log_lam - lam - lf[l])
            diags[l] = np.where(ns > 0.0, np.exp(log_amp), 0.0)
    return diags


def build_deph_kraus(kappa_t: float, dim: int, l_max: int) -> list[FockOperator]:
    """Dephasing operators B_l = (kappa_t)^{l/2}/sqrt(l!) e^{-kappa_t n^2/2} n^l,
    diagonal in the number basis, for l = 0..l_max."""
    if not isinstance(dim, (int, np.integer)) or dim < 1:
        raise InvalidDimensionError(f"dim must be a positive integer, got {dim!r}")
    if not isinstance(l_max, (int, np.integer)) or l_max < 0:
        raise InvalidArgumentError(f"l_max must be non-negative, got {l_max!r}")
    if not math.isfinite(kappa_t) or kappa_t < 0.0:
        raise InvalidArgumentError(f"kappa_t must be finite and non-negative, got {kappa_t!r}")
    diags = _deph_diagonals(kappa_t, int(dim), int(l_max))
    return [FockOperator(np.diag(d.astype(np.complex128))) for d in diags]


class KrausChannel:
    """The composed channel N_(l,k) = B_l A_k in row-major (l, k) order.

    Operators whose scalar prefactor is exactly zero (possible only at
    zero noise) are pruned, so a noiseless channel is the single
    identity.  The loss matrices and dephasing diagonals are kept in
    factorized form; the composed dense operator list is materialized
    lazily since the fidelity pipeline never needs it.
    """

    def __init__(
        self,
        noise: NoisePoint,
        dim: int,
        loss_ops: list[np.ndarray],
        deph_diags: np.ndarray,
        eps_kraus: float,
        support_levels: int,
    ) -> None:
        self.noise = noise
        self.dim = int(dim)
        self._loss_ops = loss_ops
        self._deph_diags = deph_diags
        self.loss_count = len(loss_ops)
        self.deph_count = deph_diags.shape[0]
        self.eps_kraus = float(eps_kraus)
        self.support_levels = int(support_levels)
        self.completeness_error = certify_completeness(self, self.support_levels)

    @property
    def n_kraus(self) -> int:
        return self.loss_count * self.deph_count

    @property
    def loss_matrices(self) -> list[np.ndarray]:
        return self._loss_ops

    @property
    def dephasing_diagonals(self) -> np.ndarray:
        return self._deph_diags

    @cached_property
    def operators(self) -> list[FockOperator]:
        ops = []
        for l in range(self.deph_count):
            d = self._deph_diags[l][:, None]
            for k in range(self.loss_count):
                ops.append(FockOperator(d * self._loss_ops[k]))
        return ops


def certify_completeness(channel: KrausChannel, support_levels: int) -> float:
    """Max over Fock levels 0..support_levels-1 of |1 - sum_i <n|N_i^dag N_i|n>|.

    Every N_i^dag N_i is diagonal in the number basis, so the defect is
    computed exactly from the factorized representation: the loss part
    contributes the squared superdiagonal amplitude, the dephasing part
    its squared diagonals evaluated at the post-loss level.
    """
    if support_levels > channel.dim:
        raise InvalidArgumentError(
            f"support_levels {support_levels} exceeds channel dim {channel.dim}"
        )
    if support_levels < 1:
        raise InvalidArgumentError("support_levels must be at least 1")
    dim = channel.dim
    deph_sq_sum = np.sum(channel.dephasing_diagonals**2, axis=0)  # per post-loss level
    total = np.zeros(dim)
    for k, op in enumerate(channel.loss_matrices):
        amp = np.diagonal(op, offset=k)  # <n-k|A_k|n> for n = k..dim-1
        total[k:] += np.abs(amp) ** 2 * deph_sq_sum[: dim - k]
    defect = np.abs(1.0 - total[:support_levels])
    return float(np.max(defect))


def compose_channel(
    noise: NoisePoint,
    dim: int,
    n_max_support: int,
    eps_kraus: float = DEFAULT_EPS_KRAUS,
    floors: tuple[int, int] = DEFAULT_FLOORS,
) -> KrausChannel:
    """Build and certify the composed loss-dephasing channel.

    Counts are chosen at the worst occupied level ``n_max_support`` with
    half the tolerance budget per factor, so the certified completeness
    defect (at most the sum of the two tails) stays below eps_kraus.
    """
    if not isinstance(dim, (int, np.integer)) or dim < 1:
        raise InvalidDimensionError(f"dim must be a positive integer, got {dim!r}")
    if not isinstance(n_max_support, (int, np.integer)) or not 0 <= n_max_support <= dim:
        raise InvalidArgumentError(
            f"n_max_support must lie in [0, dim], got {n_max_support!r}"
        )
    if not 0.0 < eps_kraus <= 1.0:
        raise InvalidArgumentError(f"eps_kraus must lie in (0, 1], got {eps_kraus!r}")
    n_max = int(min(n_max_support, dim - 1))
    floor_loss, floor_deph = floors
    k_max = loss_count(noise.gamma_t, n_max, eps_kraus / 2.0, floor_loss)
    l_max = deph_count(noise.kappa_t, n_max, eps_kraus / 2.0, floor_deph)
    k_max = min(k_max, dim - 1)  # a^k vanishes identically at k >= dim

    loss_ops = _loss_matrices(noise.gamma_t, int(dim), k_max)
    deph_diags = _deph_diagonals(noise.kappa_t, int(dim), l_max)
    if noise.gamma_t == 0.0:
        loss_ops = loss_ops[:1]
    if noise.kappa_t == 0.0:
        deph_diags = deph_diags[:1]

    channel = KrausChannel(
        noise=noise,
        dim=int(dim),
        loss_ops=loss_ops,
        deph_diags=deph_diags,
        eps_kraus=eps_kraus,
        support_levels=n_max + 1,
    )
    if channel.completeness_error >= eps_kraus:
        raise IncompleteChannelError(
            f"channel completeness defect {channel.completeness_error:.3e} does not meet "
            f"eps_kraus={eps_kraus:.3e} on levels 0..{n_max}"
        )
    return channel


def estimate_memory(
    d_l: int, n_kraus: int, bytes_per_element: int = 16, alpha_factor: float = 3.0
) -> float:
    """Peak-memory estimate alpha * (d_L * N_K)^2 * bytes for the QEC-matrix
    stage; the planner warns when this exceeds its budget."""
    if d_l < 1 or n_kraus < 1 or bytes_per_element < 1 or alpha_factor <= 0.0:
        raise InvalidArgumentError("all memory-estimate inputs must be positive")
    return float(alpha_factor) * float(d_l * n_kraus) ** 2 * float(bytes_per_element)
