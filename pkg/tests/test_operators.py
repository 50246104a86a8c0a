import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from qlatt.lattice import FERMION, SPIN_HALF, Region
from qlatt.models import build_hubbard, build_spin_chain, make_model, observable_operator
from qlatt.operators import (
    assemble,
    car_ops,
    commutator_norm,
    embed,
    identity,
    local_operator,
    macro_observable,
    number_operator,
    parity,
    surface_term,
)


def anti(a, b):
    return a @ b + b @ a


def test_embed_sigma_z():
    op = local_operator(oracles.SZ, [(0,)])
    np.testing.assert_array_equal(embed(op, Region.chain(2)).matrix, np.diag([1.0, 1.0, -1.0, -1.0]))


@pytest.mark.parametrize("kind,n_spins", [(SPIN_HALF, 1), (FERMION, 2)])
def test_embed_identity(kind, n_spins):
    d = 2 if kind == SPIN_HALF else 4
    op = local_operator(np.eye(d), [(0,)], kind, n_spins)
    big = embed(op, Region.chain(3))
    np.testing.assert_array_equal(big.matrix, identity(Region.chain(3), kind, n_spins).matrix)


def test_embed_fermion_number_trace():
    c, cd = car_ops(Region.chain(1), (0,), "up")
    op = local_operator(cd @ c, [(0,)], FERMION, 2)
    big = embed(op, Region.chain(2))
    assert np.trace(big.matrix) == pytest.approx(16 / 2)


def test_embed_rejects_outside_and_odd():
    op = local_operator(oracles.SZ, [(5,)])
    with pytest.raises(ValueError):
        embed(op, Region.chain(2))
    c, _ = car_ops(Region.chain(1), (0,), "up")
    with pytest.raises(ValueError):
        embed(local_operator(c + c.T, [(0,)], FERMION, 2), Region.chain(2))


def test_embed_fermion_hop_matches_oracle():
    # hop on sites (1, 2) inside a 3-site chain: even, strings must be rebuilt
    region = Region.chain(2, start=1)
    c1, cd1 = car_ops(region, (1,), 0)
    c2, cd2 = car_ops(region, (2,), 0)
    local = local_operator(cd1 @ c2 + cd2 @ c1, [(1,), (2,)], FERMION, 2)
    big = embed(local, Region.chain(3)).matrix
    c = oracles.jw_annihilators(6)
    ref = c[2].T @ c[4] + c[4].T @ c[2]
    np.testing.assert_allclose(big, ref, atol=1e-14)


@pytest.mark.parametrize("L", [1, 2, 3])
def test_car_relations(L):
    region = Region.chain(L)
    ops = [car_ops(region, (x,), s) for x in range(L) for s in ("up", "down")]
    d = 4**L
    for (ci, cdi), (cj, cdj) in itertools.product(ops, repeat=2):
        same = ci is cj
        assert np.max(np.abs(anti(ci, cdj) - (np.eye(d) if same else 0))) < 1e-12
        assert np.max(np.abs(anti(ci, cj))) < 1e-12
        assert np.max(np.abs(anti(cdi, cdj))) < 1e-12
    for c, cd in ops:
        np.testing.assert_array_equal(cd, c.conj().T)
        assert np.max(np.abs(cd @ cd)) == 0


def test_car_errors():
    with pytest.raises(ValueError):
        car_ops(Region.chain(2), (3,), "up")
    with pytest.raises(ValueError):
        car_ops(Region.chain(2), (0,), "sideways")


def test_car_matches_jordan_wigner_oracle():
    region = Region.chain(2)
    ref = oracles.jw_annihilators(4)
    for x, s in itertools.product(range(2), range(2)):
        c, _ = car_ops(region, (x,), s)
        np.testing.assert_array_equal(c, ref[2 * x + s])


def test_parity_examples():
    region = Region.chain(1)
    c, cd = car_ops(region, (0,), "up")
    assert parity(cd @ c) == "even"
    assert parity(cd) == "odd"
    assert parity(cd + cd @ c) == "mixed"


def test_even_disjoint_commute(rng):
    region = Region.chain(3)
    for _ in range(50):
        a_sites, b_sites = rng.permutation(3)[:1], rng.permutation(3)[:1]
        if a_sites[0] == b_sites[0]:
            b_sites = [(a_sites[0] + 1) % 3]
        mats = []
        for site in (a_sites[0], b_sites[0]):
            # random even operator: Hermitian combination of even monomials at one site
            c_up, cd_up = car_ops(Region.chain(1), (0,), "up")
            c_dn, cd_dn = car_ops(Region.chain(1), (0,), "down")
            basis = [cd_up @ c_up, cd_dn @ c_dn, cd_up @ c_dn, cd_up @ cd_dn, np.eye(4)]
            coef = rng.normal(size=len(basis)) + 1j * rng.normal(size=len(basis))
            m = sum(k * b for k, b in zip(coef, basis))
            op = local_operator(m, [(int(site),)], FERMION, 2)
            mats.append(embed(op, region).matrix)
        assert commutator_norm(*mats) < 1e-12


def test_spin_disjoint_commute(rng):
    region = Region.chain(4)
    for _ in range(50):
        x, y = rng.choice(4, size=2, replace=False)
        a = embed(local_operator(rng.normal(size=(2, 2)), [(int(x),)]), region).matrix
        b = embed(local_operator(rng.normal(size=(2, 2)), [(int(y),)]), region).matrix
        assert commutator_norm(a, b) < 1e-12


def test_translation_covariance_spin():
    L = 4
    region = Region.chain(L)
    a = np.kron(oracles.SX, oracles.SZ) + 0.3 * np.kron(oracles.SY, oracles.SY)
    base = embed(local_operator(a, [(0,), (1,)]), region).matrix
    shifted = embed(local_operator(a, [(1,), (2,)]), region).matrix
    # cyclic permutation of tensor factors moving site k to k+1
    perm = np.zeros((2**L, 2**L))
    for i in range(2**L):
        bits = [(i >> (L - 1 - k)) & 1 for k in range(L)]
        rolled = bits[-1:] + bits[:-1]
        j = sum(b << (L - 1 - k) for k, b in enumerate(rolled))
        perm[j, i] = 1
    np.testing.assert_array_equal(perm @ base @ perm.T, shifted)


def test_translation_of_region_same_matrix():
    inter = build_hubbard(T={1: 1.0}, U=2.0).interaction
    np.testing.assert_array_equal(assemble(inter, Region.chain(3)).matrix, assemble(inter, Region.chain(3, start=5)).matrix)


@pytest.mark.parametrize("theta", [0.3, 1.1])
def test_hubbard_number_conservation(theta):
    m = build_hubbard(T={1: 1.0, 2: 0.4}, U=2.0, J={1: 0.5})
    H = m.hamiltonian(3).matrix
    n = np.diag(m.number_operator(3).matrix)
    u = np.exp(1j * theta * n)
    conj = (u[:, None] * H) * u.conj()[None, :]
    assert np.max(np.abs(conj - H)) < 1e-10
    assert commutator_norm(H, np.diag(n)) < 1e-12


@pytest.mark.parametrize("L", [1, 2, 3])
def test_hubbard_matches_oracle(L, rng):
    T = {1: rng.uniform(-1, 1), 2: rng.uniform(-1, 1)}
    U = rng.uniform(0, 4)
    J = {1: rng.uniform(-1, 1)}
    H_ref, N_ref, _ = oracles.hubbard_oracle(L, {r: t for r, t in T.items() if r < L} or {1: 0.0}, U, J)
    m = build_hubbard(T, U, J)
    np.testing.assert_allclose(m.hamiltonian(L).matrix, H_ref, atol=1e-13)
    np.testing.assert_allclose(m.number_operator(L).matrix, N_ref, atol=0)


def test_hubbard_single_site_spectrum():
    U = 2.5
    ev = np.linalg.eigvalsh(build_hubbard(T=1.0, U=U).hamiltonian(1).matrix)
    np.testing.assert_allclose(ev, [0, 0, 0, U])


def test_hubbard_two_site_single_particle():
    t = 0.7
    m = build_hubbard(T=t, U=0.0)
    H = m.hamiltonian(2).matrix
    n = np.diag(m.number_operator(2).matrix)
    one = np.flatnonzero(n == 1)
    ev = np.linalg.eigvalsh(H[np.ix_(one, one)])
    np.testing.assert_allclose(ev, [-t, -t, t, t], atol=1e-14)


@pytest.mark.parametrize("L", [1, 2, 4])
def test_ising_matches_oracle(L):
    J, h = 0.8, 0.3
    H = build_spin_chain("transverse_ising", J, h).hamiltonian(L).matrix
    np.testing.assert_allclose(H, oracles.ising_oracle(L, J, h), atol=1e-14)


def test_heisenberg_matches_oracle():
    H = build_spin_chain("heisenberg", 1.3, 0.2).hamiltonian(4).matrix
    np.testing.assert_allclose(H, oracles.heisenberg_oracle(4, 1.3, 0.2), atol=1e-14)


def test_spin_chain_examples():
    h = 0.6
    np.testing.assert_allclose(np.linalg.eigvalsh(build_spin_chain("transverse_ising", 1.0, h).hamiltonian(1).matrix), [-h, h])
    np.testing.assert_allclose(np.linalg.eigvalsh(build_spin_chain("transverse_ising", 2.0, 0.0).hamiltonian(2).matrix), [-2, -2, 2, 2])
    np.testing.assert_allclose(np.linalg.eigvalsh(build_spin_chain("heisenberg", 1.0, 0.0).hamiltonian(2).matrix), [-0.75, 0.25, 0.25, 0.25])


def test_macro_observable_examples():
    m = make_model("transverse_ising")
    np.testing.assert_array_equal(observable_operator(m, "magnetization_z", 2).matrix, np.diag([2.0, 0, 0, -2]))
    hub = make_model("hubbard")
    np.testing.assert_array_equal(observable_operator(hub, "number", 2).matrix, number_operator(Region.chain(2)).matrix)


def test_macro_observable_additivity():
    psi = build_spin_chain("transverse_ising", 1.0, 0.5).interaction
    amb = Region.from_sites([(0,), (1,), (4,), (5,)])
    a, b = Region.chain(2), Region.chain(2, start=4)
    k_ab = macro_observable(psi, amb).matrix
    k_a = macro_observable(psi, a, ambient=amb).matrix
    k_b = macro_observable(psi, b, ambient=amb).matrix
    assert np.max(np.abs(k_ab - k_a - k_b)) == 0


def test_surface_term_nn():
    inter = build_spin_chain("transverse_ising", 1.0, 0.0).interaction
    w = surface_term(inter, Region.chain(2, start=1), Region.chain(4)).matrix
    ref = -(oracles.site_op(oracles.SZ, 0, 4) @ oracles.site_op(oracles.SZ, 1, 4) + oracles.site_op(oracles.SZ, 2, 4) @ oracles.site_op(oracles.SZ, 3, 4))
    np.testing.assert_allclose(w, ref)


def test_operator_hermitian_flag():
    from qlatt.operators import AssembledOperator

    with pytest.raises(ValueError):
        AssembledOperator(Region.chain(1), np.array([[0, 1.0], [0, 0]]))
    with pytest.raises(ValueError):
        AssembledOperator(Region.chain(2), np.eye(2))


@settings(max_examples=25, deadline=None)
@given(J=st.floats(-2, 2), h=st.floats(-2, 2), L=st.integers(1, 5))
def test_ising_hermitian_and_oracle(J, h, L):
    H = build_spin_chain("transverse_ising", J, h).hamiltonian(L).matrix
    np.testing.assert_allclose(H, H.T)
    np.testing.assert_allclose(H, oracles.ising_oracle(L, J, h), atol=1e-13)
