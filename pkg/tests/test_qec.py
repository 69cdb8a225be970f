"""Fidelity-engine tests.

Two independent routes exist for the near-optimal fidelity (direct
eigendecomposition of the QEC matrix, and the vector-Gram fast route)
plus a constructive transpose-channel recovery oracle; these tests pin
all three against one another on randomized instances.
"""

import dataclasses
import math

import numpy as np
import pytest

from bosonbench.channel import NoisePoint, compose_channel
from bosonbench.codes import GkpParams, NpParams, build_gkp, build_np, build_trivial_fock
from bosonbench.errors import NumericalConsistencyError, OracleScaleError
from bosonbench.qec import (
    EvalOptions,
    FidelityResult,
    QecMatrix,
    baseline_fidelity,
    evaluate_pair,
    near_optimal_fidelity,
    qec_matrix,
    resolve_tolerances,
    transpose_channel_oracle,
    _fidelity_from_vectors,
)

HEX_ALPHA = math.sqrt(math.pi / math.sqrt(3))


def random_code(rng, dim):
    """A random orthonormal pair as a CodePair stand-in via the trivial builder."""
    base = build_trivial_fock(dim)
    x = rng.normal(size=(dim, 2)) + 1j * rng.normal(size=(dim, 2))
    q, _ = np.linalg.qr(x)
    return dataclasses.replace(
        base,
        ket0=dataclasses.replace(base.ket0, amplitudes=q[:, 0]),
        ket1=dataclasses.replace(base.ket1, amplitudes=q[:, 1]),
    )


def small_instance(rng, max_kraus=64):
    while True:
        dim = int(rng.integers(8, 33))
        noise = NoisePoint(float(rng.uniform(0.0, 0.2)), float(rng.uniform(0.0, 0.01)))
        channel = compose_channel(noise, dim, n_max_support=dim - 1, eps_kraus=1e-7)
        if channel.n_kraus <= max_kraus:
            return random_code(rng, dim), channel


def test_identity_channel_unit_fidelity():
    code = build_gkp(GkpParams(HEX_ALPHA, HEX_ALPHA / 2, 0.35))
    channel = compose_channel(NoisePoint(0.0, 0.0), code.dim, n_max_support=code.dim - 1)
    result = near_optimal_fidelity(qec_matrix(code, channel))
    assert abs(result.f_tilde - 1.0) < 1e-9


def test_band_ordering():
    code = build_trivial_fock(6)
    channel = compose_channel(NoisePoint(0.1, 1e-3), 6, n_max_support=5)
    result = near_optimal_fidelity(qec_matrix(code, channel))
    assert result.f_lower == result.f_tilde
    assert result.f_upper == pytest.approx((1.0 + result.f_tilde) / 2.0)
    assert 0.0 <= result.f_tilde <= 1.0


def test_qec_matrix_is_hermitian_psd(rng):
    code, channel = small_instance(rng)
    m = qec_matrix(code, channel).entries
    np.testing.assert_allclose(m, m.conj().T, atol=1e-12)
    vals = np.linalg.eigvalsh(m)
    assert vals.min() > -1e-10
    # total trace equals d_L = 2 up to channel truncation
    assert np.trace(m).real == pytest.approx(2.0, abs=1e-5)


def test_oracle_agreement_quick(rng):
    for _ in range(10):
        code, channel = small_instance(rng)
        result = near_optimal_fidelity(qec_matrix(code, channel))
        oracle = transpose_channel_oracle(code, channel)
        assert abs(result.f_tilde - oracle) < 1e-7
        assert result.f_tilde - 1e-12 <= oracle <= (1.0 + result.f_tilde) / 2.0 + 1e-12


def test_fast_route_matches_direct(rng):
    for _ in range(8):
        code, channel = small_instance(rng)
        direct = near_optimal_fidelity(qec_matrix(code, channel))
        fast = _fidelity_from_vectors(code, channel)
        assert abs(direct.f_tilde - fast.f_tilde) < 5e-13


def test_fidelity_invariant_under_kraus_relabeling(rng):
    code, channel = small_instance(rng)
    m = qec_matrix(code, channel)
    n_k = m.n_k
    f_base = near_optimal_fidelity(m).f_tilde
    perm = rng.permutation(n_k)
    # same permutation applied inside each logical block
    full = np.concatenate([perm, n_k + perm])
    entries = m.entries[np.ix_(full, full)]
    shuffled = dataclasses.replace(m, entries=entries)
    assert near_optimal_fidelity(shuffled).f_tilde == pytest.approx(f_base, abs=1e-13)


def test_evaluate_pair_dispatch_consistency():
    # force both routes on the same physical problem by toggling n_kraus
    # through the noise point
    code = build_np(NpParams(f=0.4, s=2, r=0.0, n=2.0))
    light = evaluate_pair(code, NoisePoint(0.02, 1e-4))
    assert 0.9 < light.f_tilde < 1.0
    heavy = evaluate_pair(code, NoisePoint(0.02, 5e-3))
    assert 0.9 < heavy.f_tilde < 1.0
    assert heavy.f_tilde < light.f_tilde


def test_flagging_on_injected_tail_mass():
    code = build_trivial_fock(8)
    dirty = dataclasses.replace(code, tail_mass=1e-3)
    result = evaluate_pair(dirty, NoisePoint(0.05, 1e-3))
    assert result.flagged
    clean = evaluate_pair(code, NoisePoint(0.05, 1e-3))
    assert not clean.flagged


def test_flag_budget_floor():
    # near-identity evaluations must not flag on certificate-scale dust
    code = build_trivial_fock(4)
    result = evaluate_pair(code, NoisePoint(0.0, 0.0))
    assert result.f_tilde == pytest.approx(1.0, abs=1e-12)
    assert not result.flagged
    assert result.diagnostics.budget == pytest.approx(1e-7)


def test_oracle_scale_guards(rng):
    code = random_code(rng, 96)
    channel = compose_channel(NoisePoint(0.05, 0.0), 96, n_max_support=95)
    with pytest.raises(OracleScaleError):
        transpose_channel_oracle(code, channel)


def test_resolve_tolerances_clipping():
    eps_tol, eps_kraus = resolve_tolerances(1e-2)
    assert eps_tol == pytest.approx(2e-5)
    assert eps_kraus == pytest.approx(2e-5)
    eps_tol, eps_kraus = resolve_tolerances(1e-9)
    assert eps_tol == 1e-8 and eps_kraus == 1e-9  # base floors
    eps_tol, _ = resolve_tolerances(0.9)
    assert eps_tol == 1e-4  # ceiling


def test_baseline_matches_trivial_code():
    noise = NoisePoint(0.15, 0.0072)
    base = baseline_fidelity(noise, dim=4)
    direct = evaluate_pair(build_trivial_fock(4), noise)
    assert base.f_tilde == pytest.approx(direct.f_tilde, abs=1e-15)


def test_infidelity_property():
    r = FidelityResult(
        f_tilde=0.99,
        f_lower=0.99,
        f_upper=0.995,
        diagnostics=evaluate_pair(build_trivial_fock(4), NoisePoint(0.0, 0.0)).diagnostics,
    )
    assert r.infidelity == pytest.approx(0.01)


def test_qec_matrix_rejects_nonfinite_entries():
    with pytest.raises(NumericalConsistencyError):
        QecMatrix(entries=np.full((4, 4), np.nan + 0j), n_k=2)
