import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from qlatt import bounds
from qlatt.bounds import (
    compress,
    imaginary_time_norms,
    lemma_part1,
    lemma_part2,
    lemma_suite,
    omega_vs_trace_ratio,
    random_hermitian,
    random_positive,
    ruelle_bound,
    subadditivity_gap,
    theta_norms,
)
from qlatt.gibbs import SpectralCache
from qlatt.lattice import SPIN_HALF, Interaction, Region, norm_lambda
from qlatt.models import build_spin_chain
from qlatt.operators import local_operator


def ising(J, h):
    return build_spin_chain("transverse_ising", J, h).interaction


def sigma_z_field():
    return Interaction.build(1, SPIN_HALF, [([(0,)], "sigma_z", 1.0)])


# -- lemma part 1 ----------------------------------------------------------------


def test_part1_zero_perturbation(rng):
    rep = lemma_part1(random_hermitian(6, rng), np.zeros((6, 6)))
    assert rep.lhs == pytest.approx(0.0, abs=1e-13) and rep.rhs == 0.0 and rep.passed


@pytest.mark.parametrize("c", [-1.5, 0.3, 2.0])
def test_part1_equality_case(c):
    H = np.diag([0.0, 1.0, -2.0])
    rep = lemma_part1(H, c * np.eye(3))
    assert rep.lhs == pytest.approx(abs(c), rel=1e-12)
    assert rep.rhs == pytest.approx(abs(c), rel=1e-12)
    assert rep.passed


def test_part1_dimension_mismatch():
    with pytest.raises(ValueError):
        lemma_part1(np.eye(2), np.eye(3))


def test_part1_random_instances():
    reps = lemma_suite(1, n_instances=50, seed=3)
    assert all(r.passed for r in reps)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), scale=st.floats(0.01, 5.0))
def test_part1_property(seed, scale):
    rng = np.random.default_rng(seed)
    assert lemma_part1(random_hermitian(5, rng, 3.0), random_hermitian(5, rng, scale)).passed


# -- lemma part 2 ----------------------------------------------------------------


def test_part2_zero_perturbation(rng):
    rep = lemma_part2(random_hermitian(4, rng), np.zeros((4, 4)), random_positive(4, rng), n_coarse=33)
    assert rep.lhs == pytest.approx(0.0, abs=1e-13) and rep.rhs == 0.0 and rep.passed


def test_part2_commuting_rhs_is_norm(rng):
    H = np.diag(rng.normal(size=5))
    P = np.diag(rng.normal(size=5))
    rep = lemma_part2(H, P, random_positive(5, rng), n_coarse=33)
    assert rep.details["rhs_raw"] == pytest.approx(np.max(np.abs(np.diag(P))), rel=1e-12)
    assert rep.passed


def test_part2_conjugation_oracle(rng):
    H, P = random_hermitian(4, rng), random_hermitian(4, rng)
    vals = bounds.conjugation_sup(H, P, 5, 5)
    t, s = 0.75, -0.25
    from scipy.linalg import expm

    u = expm(s * (H + t * P))
    ref = np.linalg.norm(np.linalg.inv(u) @ P @ u, 2)
    assert vals[3, 1] == pytest.approx(ref, rel=1e-10)


def test_part2_errors(rng):
    H = random_hermitian(3, rng)
    with pytest.raises(ValueError):
        lemma_part2(H, H, -np.eye(3))
    with pytest.raises(ValueError):
        lemma_part2(H, H, np.eye(3), n_coarse=9)
    with pytest.raises(ValueError):
        lemma_part2(H, H, np.eye(4))


def test_part2_small_suite():
    reps = lemma_suite(2, n_instances=5, n=6, seed=11, n_coarse=33)
    assert all(r.passed for r in reps)
    rep = reps[0]
    assert rep.rhs >= rep.details["rhs_raw"] >= rep.details["rhs_coarse"]
    assert json.loads(rep.to_json())["name"] == "lemma_part2"


# -- Ruelle strip ------------------------------------------------------------------


def centre_sz(L):
    return local_operator(oracles.SZ, [((L - 1) // 2,)])


def test_ruelle_real_z_is_unitary():
    phi = ising(1.0, 0.5)
    rep = ruelle_bound(phi, 0.2, centre_sz(4), Region.chain(4), [0.0, 0.7, -2.0])
    np.testing.assert_allclose(rep.details["lhs"], 1.0, rtol=1e-12)
    assert rep.passed


def test_ruelle_zero_interaction():
    phi = Interaction(1, SPIN_HALF)
    rep = ruelle_bound(phi, 1.0, centre_sz(3), Region.chain(3), [1j, 0.5 + 3j])
    np.testing.assert_allclose(rep.details["lhs"], 1.0)
    assert rep.grid["strip"] == math.inf


@pytest.mark.parametrize("L", [4, 6])
def test_ruelle_weak_ising(L, weak_ising):
    lam = 1.0
    zs = [x + 1j * y for x in (-1.0, 0.0, 0.5) for y in (0.1, 0.25, 0.5, -0.5)]
    rep = ruelle_bound(weak_ising.interaction, lam, centre_sz(L), Region.chain(L), zs)
    assert rep.passed
    assert rep.details["norm_lambda"] == pytest.approx(norm_lambda(weak_ising.interaction, lam))


def test_ruelle_weighted_hamiltonian():
    phi = ising(0.3, 0.2)
    region = Region.chain(3)
    zero = bounds.weighted_hamiltonian(phi, region, lambda placed: 0.0)
    assert np.max(np.abs(zero)) == 0
    full = bounds.weighted_hamiltonian(phi, region)
    np.testing.assert_allclose(full, oracles.ising_oracle(3, 0.3, 0.2), atol=1e-14)
    with pytest.raises(ValueError):
        bounds.weighted_hamiltonian(phi, region, lambda placed: 1.5)
    rep = ruelle_bound(phi, 0.5, centre_sz(3), region, [0.3j], u=lambda placed: 0.5)
    assert rep.passed


def test_ruelle_outside_strip():
    phi = ising(1.0, 1.0)
    with pytest.raises(ValueError):
        ruelle_bound(phi, 1.0, centre_sz(3), Region.chain(3), [10j])


def test_imaginary_time_norms_uniform(weak_ising):
    out = imaginary_time_norms(weak_ising.interaction, local_operator(oracles.SZ, [(0,)]), [4, 6], [0.1, 0.5])
    assert out[6] / out[4] < 1.05
    assert all(v >= 1.0 - 1e-12 for v in out.values())


def test_analytic_admissible():
    tp, ok = bounds.analytic_admissible(0.5, 0.1, 0.2)
    assert tp == pytest.approx(0.5 * math.exp(0.08)) and ok
    assert not bounds.analytic_admissible(0.9, 1.0, 1.0)[1]


# -- theta norms --------------------------------------------------------------------


def window_op(ops, n_max):
    """Kronecker product over [-n_max, n_max] with ``ops`` keyed by position."""
    return oracles.kron_all([ops.get(x, oracles.I2) for x in range(-n_max, n_max + 1)])


def test_theta_local_operator_tail_vanishes():
    a = window_op({-1: oracles.SX, 1: oracles.SZ}, 2)
    rep = theta_norms(a, 0.5, 2)
    assert rep.tail_upper[0] == pytest.approx(1.0)
    assert rep.tail_upper[1:] == (0.0, 0.0)
    assert not rep.truncated


def test_theta_identity():
    rep = theta_norms(np.eye(2**5), 0.5, 2)
    assert rep.tail_upper == (1.0, 0.0, 0.0)


def test_theta_two_point():
    a = window_op({0: oracles.SZ, 2: oracles.SZ}, 2)
    rep = theta_norms(a, 0.3, 2)
    assert rep.tail_upper[1] > 0
    assert rep.tail_upper[2] == 0.0
    assert rep.tail_lower[1] == pytest.approx(rep.tail_upper[1] / 2)
    assert rep.norm_inverse_weight == pytest.approx(1 + 1 / 0.3)
    assert rep.norm_direct_weight == pytest.approx(1 + 0.3)


def test_compress_matches_oracle(rng):
    a = random_hermitian(2**5, rng)
    for n in (0, 1, 2):
        keep = list(range(2 - n, 3 + n))
        ref = oracles.partial_trace_compress(a, keep, 5)
        np.testing.assert_allclose(compress(a, 2, n), ref, atol=1e-12)


def test_theta_tails_nonincreasing(rng):
    a = random_hermitian(2**5, rng)
    tails = theta_norms(a, 0.5, 2).tail_upper
    assert all(b <= t + 1e-14 for t, b in zip(tails, tails[1:]))
    assert tails[-1] == 0.0


def test_theta_errors():
    with pytest.raises(ValueError):
        theta_norms(np.eye(8), 1.5, 1)
    with pytest.raises(ValueError):
        theta_norms(np.eye(4), 0.5, 1)


# -- block estimate --------------------------------------------------------------------


def test_subadditivity_no_coupling():
    rep = subadditivity_gap(Interaction(1, SPIN_HALF), sigma_z_field(), 1.0, 0.4, 6, 3, 0.5, cache=SpectralCache())
    assert rep.lhs == pytest.approx(0.0, abs=1e-14)
    assert rep.details["g_L"] == pytest.approx(math.log(math.cosh(0.4)), rel=1e-12)
    assert rep.passed


def test_subadditivity_single_block():
    rep = subadditivity_gap(ising(0.1, 0.2), sigma_z_field(), 1.0, 0.3, 5, 5, 0.5, cache=SpectralCache())
    assert rep.lhs == pytest.approx(0.0, abs=1e-14)
    assert rep.rhs == pytest.approx(0.0, abs=1e-14)


def test_subadditivity_weak_ising_small():
    phi = ising(0.1, 0.2)
    psi = build_spin_chain("transverse_ising", 0.0, -1.0).interaction
    rep = subadditivity_gap(phi, sigma_z_field(), 1.0, 0.2, 7, 3, 0.5, cache=SpectralCache())
    assert rep.passed
    assert rep.details["rhs_phi_prefactor"] >= rep.details["first_term"]
    rep2 = subadditivity_gap(phi, psi, 1.0, 0.2, 6, 3, 0.5, cache=SpectralCache())
    assert rep2.passed


def test_subadditivity_rejections():
    with pytest.raises(ValueError):
        subadditivity_gap(ising(5.0, 1.0), sigma_z_field(), 1.0, 0.1, 6, 3, 1.0)
    pair = ising(0.5, 0.0)
    with pytest.raises(ValueError):
        subadditivity_gap(ising(0.05, 0.0), pair, 1.0, 100.0, 6, 3, 0.5)


# -- omega versus trace ratio -------------------------------------------------------------


def test_omega_single_site_exact():
    phi = Interaction.build(1, SPIN_HALF, [([(0,)], "sigma_x", 0.7)])
    rep = omega_vs_trace_ratio(phi, sigma_z_field(), 1.0, 0.5, 3, 6, cache=SpectralCache())
    assert rep.d < 1e-13


def test_omega_inner_equals_outer():
    rep = omega_vs_trace_ratio(ising(0.3, 0.4), sigma_z_field(), 1.0, 0.5, 5, 5, cache=SpectralCache())
    assert rep.d == pytest.approx(0.0, abs=1e-14)


def test_omega_matches_expm_oracle():
    from scipy.linalg import expm

    J, h, alpha = 0.3, 0.4, 0.5
    rep = omega_vs_trace_ratio(ising(J, h), sigma_z_field(), 1.0, alpha, 2, 4, cache=SpectralCache())
    H = oracles.ising_oracle(4, J, h)
    K = oracles.site_op(oracles.SZ, 1, 4) + oracles.site_op(oracles.SZ, 2, 4)
    rho = expm(-H)
    ref = np.log(np.trace(expm(alpha * K) @ rho).real / np.trace(rho).real)
    assert rep.log_omega == pytest.approx(ref, rel=1e-10)
    assert rep.to_dict()["d"] == rep.d


def test_omega_inner_outside_rejected():
    with pytest.raises(ValueError):
        omega_vs_trace_ratio(ising(0.3, 0.4), sigma_z_field(), 1.0, 0.5, Region.chain(3, start=4), 5)
