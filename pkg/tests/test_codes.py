"""Codeword construction tests.

The finite-energy GKP stabilizer expectation follows the analytic
damping law exp(-Delta^2 |2g|^2 / 2) for the nearest lattice stabilizer
g; that law is the oracle here, checked to sub-percent precision over
the working Delta range.
"""

import math

import numpy as np
import pytest

from bosonbench.codes import (
    FAMILY_GKP,
    FAMILY_NP,
    FAMILY_TRIVIAL,
    CodePair,
    GkpParams,
    NpParams,
    build_gkp,
    build_np,
    build_trivial_fock,
    gkp_truncation,
    np_truncation,
    photon_stats,
)
from bosonbench.errors import (
    InvalidArgumentError,
    InvalidEnvelopeError,
    TruncationFailureError,
)
from bosonbench.fock import FockState, displacement

HEX_ALPHA = math.sqrt(math.pi / math.sqrt(3))


def hexagonal(delta: float) -> GkpParams:
    return GkpParams(alpha=HEX_ALPHA, beta_real=HEX_ALPHA / 2.0, delta=delta)


def test_gkp_pair_is_orthonormal():
    code = build_gkp(hexagonal(0.3))
    assert code.family == FAMILY_GKP
    assert code.ket0.norm() == pytest.approx(1.0, abs=1e-12)
    assert code.ket1.norm() == pytest.approx(1.0, abs=1e-12)
    assert abs(np.vdot(code.ket0.amplitudes, code.ket1.amplitudes)) < 1e-12


@pytest.mark.parametrize("delta", [0.25, 0.3, 0.4])
def test_gkp_mean_photon_envelope_law(delta):
    # finite-energy envelope gives n_bar ~= 1/(2 Delta^2) - 1/2
    code = build_gkp(hexagonal(delta))
    predicted = 1.0 / (2.0 * delta * delta) - 0.5
    assert code.mean_photon == pytest.approx(predicted, rel=0.02)


@pytest.mark.parametrize("delta", [0.2, 0.25, 0.3])
def test_gkp_stabilizer_damping_law_tight(delta):
    code = build_gkp(hexagonal(delta))
    u = displacement(2.0 * HEX_ALPHA, code.dim).entries
    e0 = abs(np.vdot(code.ket0.amplitudes, u @ code.ket0.amplitudes))
    law = math.exp(-(delta**2) * (2.0 * HEX_ALPHA) ** 2 / 2.0)
    assert e0 == pytest.approx(law, rel=5e-4)


@pytest.mark.parametrize("delta", [0.35, 0.4])
def test_gkp_stabilizer_damping_law_loose(delta):
    # finite-energy corrections grow with delta and split the pair; the
    # logical average still tracks the law to better than a percent
    code = build_gkp(hexagonal(delta))
    u = displacement(2.0 * HEX_ALPHA, code.dim).entries
    e0 = abs(np.vdot(code.ket0.amplitudes, u @ code.ket0.amplitudes))
    e1 = abs(np.vdot(code.ket1.amplitudes, u @ code.ket1.amplitudes))
    law = math.exp(-(delta**2) * (2.0 * HEX_ALPHA) ** 2 / 2.0)
    assert 0.5 * (e0 + e1) == pytest.approx(law, rel=1e-2)


def test_gkp_stabilizer_attainable_thresholds():
    # directly measured floors; a 0.9 expectation is not attainable at
    # these envelopes (see the damping law above)
    c20 = build_gkp(hexagonal(0.2))
    u = displacement(2.0 * HEX_ALPHA, c20.dim).entries
    assert abs(np.vdot(c20.ket0.amplitudes, u @ c20.ket0.amplitudes)) > 0.85
    c25 = build_gkp(hexagonal(0.25))
    u = displacement(2.0 * HEX_ALPHA, c25.dim).entries
    assert abs(np.vdot(c25.ket0.amplitudes, u @ c25.ket0.amplitudes)) > 0.75


def test_gkp_square_lattice_builds():
    code = build_gkp(GkpParams(alpha=math.sqrt(math.pi / 2.0), beta_real=0.0, delta=0.35))
    assert code.dim > 16
    assert abs(np.vdot(code.ket0.amplitudes, code.ket1.amplitudes)) < 1e-12


def test_gkp_tail_mass_under_tolerance():
    code = build_gkp(hexagonal(0.3), eps_tol=1e-8)
    assert code.tail_mass < 1e-8


def test_gkp_raw_overlap_shrinks_with_delta():
    big = abs(build_gkp(hexagonal(0.55)).raw_overlap)
    small = abs(build_gkp(hexagonal(0.3)).raw_overlap)
    assert small < big
    assert big > 1e-6  # visibly nonzero at loose envelopes, yet the pair is orthogonalized


def test_gkp_truncation_values():
    assert gkp_truncation(0.18, 1e-8) == 285
    assert gkp_truncation(0.9, 0.999) == 16  # floor applies near eps -> 1
    assert gkp_truncation(0.2, 1e-8) > gkp_truncation(0.3, 1e-8)


def test_gkp_max_dim_enforced():
    with pytest.raises(TruncationFailureError):
        build_gkp(hexagonal(0.18), max_dim=64)


def test_gkp_param_validation():
    with pytest.raises(InvalidArgumentError):
        GkpParams(alpha=-1.0, beta_real=0.5, delta=0.3)
    with pytest.raises(InvalidArgumentError):
        GkpParams(alpha=1.0, beta_real=0.5, delta=0.0)
    with pytest.raises(InvalidArgumentError):
        GkpParams(alpha=float("nan"), beta_real=0.5, delta=0.3)


def test_np_exact_comb_orthogonality():
    code = build_np(NpParams(f=0.5, s=2, r=0.0, n=4.0))
    assert code.family == FAMILY_NP
    assert code.raw_overlap == 0
    k0 = np.nonzero(np.abs(code.ket0.amplitudes) > 1e-14)[0]
    k1 = np.nonzero(np.abs(code.ket1.amplitudes) > 1e-14)[0]
    assert np.all(k0 % 4 == 0)
    assert np.all(k1 % 4 == 2)


@pytest.mark.parametrize("s,n", [(1, 2.0), (2, 4.0), (3, 2.5), (5, 4.0)])
def test_np_mean_photon_target(s, n):
    # codeword mean photon tracks s * <m> of the envelope, i.e. s * n
    code = build_np(NpParams(f=0.3, s=s, r=0.0, n=n))
    assert code.mean_photon == pytest.approx(s * n, rel=0.02)


def test_np_cat_code_correspondence():
    # f=0, s=1, r=0: the logical kets are even/odd coherent combs
    n = 1.3
    code = build_np(NpParams(f=0.0, s=1, r=0.0, n=n))
    alpha = math.sqrt(n)
    ns = np.arange(code.dim, dtype=float)
    coherent = np.exp(
        -0.5 * alpha**2 + ns * math.log(alpha) - 0.5 * np.cumsum(np.log(np.maximum(ns, 1.0)))
    )
    even = np.where(np.arange(code.dim) % 2 == 0, coherent, 0.0)
    even /= np.linalg.norm(even)
    overlap = abs(np.vdot(code.ket0.amplitudes, even))
    assert overlap == pytest.approx(1.0, abs=1e-9)


def test_np_zero_f_real_amplitudes():
    code = build_np(NpParams(f=0.0, s=2, r=0.0, n=3.0))
    assert np.max(np.abs(code.ket0.amplitudes.imag)) < 1e-14


def test_np_quadratic_phase_applied():
    flat = build_np(NpParams(f=0.0, s=2, r=0.0, n=3.0))
    skew = build_np(NpParams(f=0.7, s=2, r=0.0, n=3.0))
    np.testing.assert_allclose(
        np.abs(flat.ket0.amplitudes), np.abs(skew.ket0.amplitudes), atol=1e-12
    )
    assert np.max(np.abs(skew.ket0.amplitudes.imag)) > 1e-3


def test_np_truncation_growth_rules():
    base = np_truncation(NpParams(f=0.0, s=5, r=0.0, n=4.0))
    assert base >= 40  # at least 2*s*n before guard
    squeezed = np_truncation(NpParams(f=0.0, s=2, r=0.4, n=4.0))
    plain = np_truncation(NpParams(f=0.0, s=2, r=0.0, n=4.0))
    assert squeezed > plain


def test_np_truncation_cap_error():
    with pytest.raises(TruncationFailureError):
        np_truncation(NpParams(f=0.0, s=5, r=0.0, n=4.0), cap=16)


def test_np_envelope_validation():
    with pytest.raises(InvalidEnvelopeError):
        build_np(NpParams(f=0.0, s=1, r=1.5, n=1.0))  # sinh^2 r exceeds n
    with pytest.raises(InvalidArgumentError):
        NpParams(f=1.5, s=2, r=0.0, n=2.0)
    with pytest.raises(InvalidArgumentError):
        NpParams(f=0.5, s=0, r=0.0, n=2.0)


def test_trivial_fock_pair():
    code = build_trivial_fock(4)
    assert code.family == FAMILY_TRIVIAL
    assert code.dim == 4
    np.testing.assert_allclose(code.ket0.amplitudes, [1, 0, 0, 0], atol=0)
    np.testing.assert_allclose(code.ket1.amplitudes, [0, 1, 0, 0], atol=0)
    assert code.mean_photon == pytest.approx(0.5)


def test_support_level_quantile():
    code = build_trivial_fock(8)
    assert code.support_level(1e-6) == 1
    gkp = build_gkp(hexagonal(0.3))
    lvl = gkp.support_level(1e-8)
    tail = np.sum(gkp.mixed_distribution()[lvl + 1 :])
    assert tail < 1e-8


def test_photon_stats_hand_case():
    state = FockState(np.array([0.6, 0.0, 0.8]))
    mean, var, tail = photon_stats(state)
    assert mean == pytest.approx(0.36 * 0 + 0.64 * 2)
    assert var == pytest.approx(0.64 * 4 - 1.28**2)
    assert tail(2) == pytest.approx(0.64)


def test_code_pair_rejects_unnormalized():
    with pytest.raises(InvalidArgumentError):
        CodePair(
            family=FAMILY_TRIVIAL,
            dim=2,
            ket0=FockState(np.array([2.0, 0.0])),
            ket1=FockState(np.array([0.0, 1.0])),
            raw_overlap=0j,
            mean_photon=0.0,
            photon_variance=0.0,
            tail_mass=0.0,
        )
