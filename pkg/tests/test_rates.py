import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from entlab import operators as ops
from entlab import rates
from entlab.errors import DomainError

seeds = st.integers(0, 2**32 - 1)
BETA_BITS = 1.9123


def rel(a, b):
    return abs(a - b) / max(abs(a), abs(b))


# --- mixing ---------------------------------------------------------------

def test_mixing_rate_trivial_cases(rng):
    rho = ops.random_density(3, rng)
    h = ops.random_hermitian(3, rng)
    assert rates.mixing_rate(rates.TwoStateEnsemble(0.3, rho, rho), h) == pytest.approx(0, abs=1e-12)
    ens = rates.random_ensemble(3, rng)
    assert rates.mixing_rate(ens, np.eye(3)) == pytest.approx(0, abs=1e-12)


def test_mixing_rate_matches_finite_difference(rng):
    for _ in range(10):
        ens = rates.random_ensemble(2, rng)
        h = ops.random_hermitian(2, rng, norm=1.0)
        assert rel(rates.mixing_rate(ens, h), rates.mixing_rate_fd(ens, h, 1e-4)) < 1e-5


def test_max_mixing_rate_dominates_samples(rng):
    ens = rates.random_ensemble(3, rng)
    top = rates.max_mixing_rate(ens)
    for _ in range(1000):
        h = ops.random_hermitian(3, rng, norm=float(rng.uniform(0, 1)))
        assert rates.mixing_rate(ens, h) <= top + 1e-10


def test_mixing_rate_against_eigenbasis_sum(rng):
    # rho diagonal with entries d: rate = (1-p) sum_ij i H_ji (rho2)_ij (log d_j - log d_i)
    p, d = 0.5, np.array([0.6, 0.4])
    rho2 = np.array([[0.5, 0.1 + 0.05j], [0.1 - 0.05j, 0.5]])
    rho1 = (np.diag(d) - (1 - p) * rho2) / p
    assert np.linalg.eigvalsh(rho1).min() > 0
    h = ops.random_hermitian(2, rng)
    oracle = 0.0
    for i in range(2):
        for j in range(2):
            oracle += (1j * h[j, i] * rho2[i, j] * (math.log(d[j]) - math.log(d[i]))).real
    oracle *= 1 - p
    assert rates.mixing_rate(rates.TwoStateEnsemble(p, rho1, rho2), h) == pytest.approx(oracle, abs=1e-14)
    commuting = rates.TwoStateEnsemble(p, np.diag([0.2, 0.8]), np.diag([0.9, 0.1]))
    assert rates.mixing_rate(commuting, h) == pytest.approx(0, abs=1e-14)
    assert rates.max_mixing_rate(commuting) == pytest.approx(0, abs=1e-14)


def test_ensemble_mixing_rate(rng):
    rho = ops.random_density(3, rng)
    hs = [ops.random_hermitian(3, rng) for _ in range(3)]
    assert rates.ensemble_mixing_rate([0.2, 0.3, 0.5], [rho] * 3, hs) == pytest.approx(0, abs=1e-12)
    ens = rates.random_ensemble(3, rng)
    h = ops.random_hermitian(3, rng)
    two = rates.ensemble_mixing_rate([ens.p, 1 - ens.p], [ens.rho1, ens.rho2], [np.zeros((3, 3)), h])
    assert two == pytest.approx(rates.mixing_rate(ens, h), abs=1e-12)
    ps = [0.2, 0.3, 0.5]
    rhos = [ops.random_density(3, rng) for _ in range(3)]
    hs = [ops.random_hermitian(3, rng, norm=1.0) for _ in range(3)]
    a = rates.ensemble_mixing_rate(ps, rhos, hs)
    assert rel(a, rates.ensemble_mixing_rate_fd(ps, rhos, hs)) < 1e-5
    assert abs(a) <= rates.max_ensemble_mixing_rate(ps, rhos) + 1e-12


def test_total_mixing_check(rng):
    rho = ops.random_density(2, rng)
    h = ops.random_hermitian(2, rng)
    tight = rates.total_mixing_check(rates.TwoStateEnsemble(1.0, rho, ops.random_density(2, rng)), h, [0, 1])
    assert tight["lower"] == pytest.approx(tight["upper"])
    assert tight["ok"]
    v = ops.random_state(2, rng)
    pure = np.outer(v, v.conj())
    res = rates.total_mixing_check(rates.TwoStateEnsemble(0.3, pure, pure), h, np.linspace(0, 10, 50))
    assert res["lower"] == pytest.approx(0, abs=1e-12)
    assert max(res["entropies"]) <= ops.binary_entropy(0.3) + 1e-12
    res = rates.total_mixing_check(rates.random_ensemble(2, rng), h, np.linspace(0, 10, 50))
    assert res["violations"] == 0


# --- entangling -----------------------------------------------------------

def test_entropy_rate_trivial_cases(rng):
    dims = (2, 2, 2, 2)
    psi = ops.random_state(16, rng)
    assert rates.entropy_rate(psi, dims, [0, 1], np.zeros((16, 16))) == 0.0
    product = np.kron(ops.random_state(4, rng), ops.random_state(4, rng))
    h = ops.random_hermitian(16, rng)
    assert rates.entropy_rate(product, dims, [0, 1], h) == pytest.approx(0, abs=1e-12)
    max_ent = np.eye(4).reshape(-1) / 2  # (aA | Bb) maximally entangled
    assert rates.entropy_rate(max_ent, dims, [0, 1], h) == pytest.approx(0, abs=1e-12)


def test_entangling_rate_finite_difference_and_richardson(rng):
    setting = rates.random_setting((2, 2, 2, 2), rng)
    gamma = rates.entangling_rate(setting)
    assert rel(gamma, rates.rate_finite_difference(setting, 1e-4)) < 1e-4
    assert rel(gamma, rates.rate_finite_difference(setting, 5e-5)) < 1e-4
    ratio = rates.richardson_ratio(lambda h: rates.rate_finite_difference(setting, h), 1e-2)
    assert ratio == pytest.approx(4.0, rel=0.05)
    zero = rates.BipartiteSetting(setting.dims, np.zeros((4, 4)), setting.psi)
    assert rates.entangling_rate(zero) == 0.0


def test_swap_on_maximally_entangled_pairs():
    phi = rates.maximally_entangled(2)
    setting = rates.BipartiteSetting((2, 2, 2, 2), rates.swap_operator(2), np.kron(phi, phi))
    assert rates.entangling_rate(setting) == pytest.approx(rates.rate_finite_difference(setting), abs=1e-4)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_swap_changes_entropy_by_two_log_d(d):
    phi = rates.maximally_entangled(d)
    res = rates.total_entangling_check(rates.swap_operator(d), np.kron(phi, phi), (d, d, d, d))
    assert res["change"] == pytest.approx(2 * math.log(d), abs=1e-9)


def test_total_entangling_check(rng):
    psi = ops.random_state(16, rng)
    assert rates.total_entangling_check(np.eye(4), psi, (2, 2, 2, 2))["change"] == pytest.approx(0, abs=1e-12)
    for _ in range(1000):
        res = rates.total_entangling_check(ops.random_unitary(4, rng), ops.random_state(16, rng), (2, 2, 2, 2))
        assert res["change"] <= 2 * math.log(2) + 1e-12
    with pytest.raises(DomainError):
        rates.total_entangling_check(2 * np.eye(4), psi, (2, 2, 2, 2))


# --- reduction ------------------------------------------------------------

def test_extension_state_cases(rng):
    rho_a = ops.random_density(2, rng)
    product = np.kron(rho_a, np.eye(2) / 2)
    assert np.allclose(rates.extension_state(product, (2, 2)), product)
    zero = np.zeros((4, 4))
    zero[0, 0] = 1
    mu = rates.extension_state(zero, (2, 2))
    assert np.allclose(mu, np.diag([1 / 3, 2 / 3, 0, 0]))
    bell = rates.maximally_entangled(2)
    mu = rates.extension_state(np.outer(bell, bell), (2, 2))
    assert np.trace(mu).real == pytest.approx(1)
    assert np.linalg.eigvalsh(mu).min() >= -1e-12
    with pytest.raises(DomainError):
        rates.extension_state(np.eye(2) / 2, (2, 1))


@given(seeds, st.sampled_from([2, 3]))
def test_reduction_identity(seed, d):
    rng = np.random.default_rng(seed)
    res = rates.reduction_check(ops.random_hermitian(d * d, rng, norm=1.0), ops.random_state(d * d, rng), (d, d))
    assert res["error"] <= 1e-9


# --- optimizer ------------------------------------------------------------

def test_optimizer_scalar_hamiltonian():
    rep = rates.maximize_entangling_rate(np.eye(4), (2, 2), (2, 2), restarts=2)
    assert rep.value == 0.0


def test_optimizer_zz_reaches_reference():
    z = np.diag([1.0, -1.0])
    rep = rates.maximize_entangling_rate(np.kron(z, z), (2, 2), (2, 2), restarts=20, seed=0)
    bits = rep.value / math.log(2)
    assert bits >= 1.85
    assert bits == pytest.approx(BETA_BITS, abs=5e-4)
    assert rep.value <= rep.bound
    assert len(rep.restarts) == 20


def test_optimizer_swap_positive_and_validated():
    rep = rates.maximize_entangling_rate(rates.swap_operator(2), (2, 2), (2, 2), restarts=5, seed=3)
    assert 0 < rep.value <= 4 * math.log(2)
    psi = ops.operator_from_json(rep.witness["psi"])
    h = ops.operator_from_json(rep.witness["H_AB"])
    setting = rates.BipartiteSetting((2, 2, 2, 2), h, psi / np.linalg.norm(psi))
    assert rates.rate_finite_difference(setting, 1e-5) == pytest.approx(rep.value, rel=1e-4)


def test_optimizer_is_seeded():
    h = ops.random_hermitian(4, np.random.default_rng(1))
    a = rates.maximize_entangling_rate(h, (2, 2), (2, 2), restarts=3, seed=11)
    b = rates.maximize_entangling_rate(h, (2, 2), (2, 2), restarts=3, seed=11)
    assert a.restarts == b.restarts


def test_entangling_rate_gradient_matches_directional_derivative(rng):
    setting = rates.random_setting((2, 2, 2, 2), rng)
    value, grad = rates.entangling_rate_gradient(setting)
    assert value == pytest.approx(rates.entangling_rate(setting), abs=1e-12)
    direction = ops.random_state(16, rng)
    eps = 1e-6

    def rate_at(x):
        v = setting.psi + x * direction
        return rates.entangling_rate(rates.BipartiteSetting(setting.dims, setting.H_AB, v / np.linalg.norm(v)))

    fd = (rate_at(eps) - rate_at(-eps)) / (2 * eps)
    # derivative of the normalized state along `direction`
    tangent = direction - np.real(np.vdot(setting.psi, direction)) * setting.psi
    assert np.real(np.vdot(grad, tangent)) == pytest.approx(fd, rel=1e-5, abs=1e-8)


# --- superposition --------------------------------------------------------

def test_superposition_cases(rng):
    dims, keep = (2, 2, 2, 2), [0, 1]
    v1 = ops.random_state(16, rng)
    v2 = ops.random_state(16, rng)
    v2 -= np.vdot(v1, v2) * v1
    v2 /= np.linalg.norm(v2)
    res = rates.superposition_entropy_check(v1, v2, 1.0, 0.0, dims, keep)
    assert res["entropy"] == pytest.approx(ops.entanglement_entropy(v1, dims, keep))
    assert res["ok"]
    e = np.eye(16)
    a = 1 / math.sqrt(2)
    res = rates.superposition_entropy_check(e[0], e[5], a, a, dims, keep)
    assert res["entropy"] <= 2 * math.log(2) + 1e-12
    for _ in range(100):
        v1, v2 = np.linalg.qr(rng.standard_normal((16, 2)) + 1j * rng.standard_normal((16, 2)))[0].T
        th = rng.uniform(0, math.pi / 2)
        assert rates.superposition_entropy_check(v1, v2, math.cos(th), math.sin(th), dims, keep)["ok"]
    with pytest.raises(DomainError):
        rates.superposition_entropy_check(e[0], e[0] + e[1], a, a, dims, keep)


# --- properties -----------------------------------------------------------

@given(seeds, st.sampled_from([2, 3, 4]))
def test_sim_bound(seed, dim):
    rng = np.random.default_rng(seed)
    ens = rates.random_ensemble(dim, rng, p=float(rng.choice([0.5, 0.1, 0.01, 0.9])))
    h = ops.random_hermitian(dim, rng, norm=1.0)
    hp = ops.binary_entropy(ens.p)
    assert abs(rates.mixing_rate(ens, h)) <= 2 * hp + 1e-12
    assert rates.max_mixing_rate(ens) <= 2 * hp + 1e-12


@given(seeds)
def test_local_unitary_invariance(seed):
    rng = np.random.default_rng(seed)
    dims = (2, 2, 2, 2)
    setting = rates.random_setting(dims, rng)
    ua, ub = ops.random_unitary(2, rng), ops.random_unitary(2, rng)
    u = np.kron(ua, ub)
    full = np.kron(np.kron(np.eye(2), u), np.eye(2))
    moved = rates.BipartiteSetting(dims, u @ setting.H_AB @ u.conj().T, full @ setting.psi)
    assert rates.entangling_rate(moved) == pytest.approx(rates.entangling_rate(setting), abs=1e-9)


@given(seeds)
def test_rate_is_real(seed):
    rng = np.random.default_rng(seed)
    setting = rates.random_setting((2, 2, 2, 2), rng)
    rho = np.outer(setting.psi, setting.psi.conj())
    log_cut = np.kron(ops.hermitian_log_support(ops.reduced_density(setting.psi, setting.dims, [0, 1])), np.eye(4))
    val = 1j * np.trace(setting.full_hamiltonian() @ ops.commutator(rho, log_cut))
    assert abs(val.imag) <= 1e-10
    assert val.real == pytest.approx(rates.entangling_rate(setting), abs=1e-10)


@given(seeds)
def test_sie_bound(seed):
    rng = np.random.default_rng(seed)
    setting = rates.random_setting((2, 2, 2, 2), rng)
    assert abs(rates.entangling_rate(setting)) <= 4 * setting.h_norm * math.log(2)
