import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from entlab import hamiltonian as ham
from entlab import operators as ops
from entlab import qac
from entlab.errors import DomainError, ParameterError, PathError
from entlab.lattice import LatticeSpec, Region


def qubit_path(h0, h1):
    return qac.QAPath(ham.Potential((2,), (ham.Term((0,), h0, 0),)),
                      ham.Potential((2,), (ham.Term((0,), h1, 0),)))


@pytest.fixture(scope="module")
def filt():
    return qac.build_filter(1.0)


def test_filter_weight_beyond_gap(filt):
    assert filt.W(2.0) == -1 / 2.0
    assert filt.W(-3.5) == 1 / 3.5
    omega = np.linspace(-0.999, 0.999, 101)
    assert np.allclose(filt.W(omega), -filt.W(-omega))
    assert np.all(np.isfinite(filt.W(omega)))


def test_filter_time_domain(filt):
    t = np.linspace(0, 50, 301)
    assert np.abs(filt.F(t) + filt.F(-t)).max() <= 1e-10
    assert filt.decay_exponent() <= -6


def test_filter_validation():
    with pytest.raises(ParameterError):
        qac.build_filter(1.0, sharpness=80)
    with pytest.raises(ParameterError):
        qac.build_filter(1.0, sharpness=0.01)
    with pytest.raises(DomainError):
        qac.build_filter(0.0)


@given(st.floats(0.05, 20.0), st.floats(1.0, 1e3))
def test_filter_matches_inverse_frequency(delta, scale):
    f = qac.build_filter(delta)
    omega = np.array([delta * scale, -delta * scale])
    assert np.abs(f.W(omega) + 1 / omega).max() <= 1e-8


def test_constant_path_has_zero_generator(filt):
    path = qubit_path(ham.Z, ham.Z)
    assert np.allclose(qac.qac_generator(path, 0.3, filt), 0)


def test_two_level_first_order_perturbation():
    # H(s) = Z + sX; at s = 0 the ground state is |1> and d psi/ds = -|0>/2
    path = qubit_path(ham.Z, ham.Z + ham.X)
    f = qac.build_filter(1.9)
    psi = qac.ground_state(path, 0.0)
    k = qac.qac_generator(path, 0.0, f)
    expected = -0.5 * np.array([1, 0]) * (psi[1] / abs(psi[1]))
    assert np.allclose(1j * k @ psi, expected, atol=1e-10)


def test_generator_rejects_filter_above_gap():
    path = qubit_path(ham.Z, ham.Z + ham.X)
    with pytest.raises(PathError):
        qac.qac_generator(path, 0.0, qac.build_filter(2.5))


def test_path_validation_reports_gap_collapse():
    path = qac.tfim_path(4, 2.0, 0.0)
    with pytest.raises(PathError, match="last valid"):
        path.validate(np.linspace(0, 1, 11))


def test_tangency_on_tfim_chain():
    path = qac.tfim_path(6, 2.0, 1.5)
    f = qac.build_filter(0.95 * path.validate(np.linspace(0, 1, 11)).min())
    for s in (0.0, 0.5, 1.0):
        res = qac.tangency_residual(path, s, f)
        assert res["residual"] <= 1e-6 * res["scale"]
        assert res["hermiticity"] <= 1e-10


def test_sub_and_reversed_paths():
    path = qac.tfim_path(4, 2.0, 1.0)
    assert np.allclose(path.sub(0.5, 1.0).hamiltonian(0.0), path.hamiltonian(0.5))
    assert np.allclose(path.reversed().hamiltonian(0.25), path.hamiltonian(0.75))
    assert np.allclose(path.reversed().derivative(), -path.derivative())


def test_truncated_generators_decay_and_telescope():
    path = qac.tfim_path(8, 3.0, 2.5)
    f = qac.build_filter(0.95 * path.validate(np.linspace(0, 1, 5)).min())
    res = qac.truncated_generators(path, 0.5, f, center=0)
    norms = res["norms"]
    tail = norms[2:]  # beyond the light cone of the nearest-neighbour coupling
    assert all(b < a for a, b in zip(tail, tail[1:]))
    assert qac.telescoping_defect(res, path, 0.5, f) <= 1e-12
    full = qac.per_term_generator(path, 0.5, f, 0)
    assert np.allclose(ops.embed(res["full"][1], res["full"][0], path.dims) if len(res["full"][0]) < 8
                       else res["full"][1], full, atol=1e-10)
    with pytest.raises(DomainError):
        qac.truncated_generators(path, 0.5, f, center=0, r_max=5)


def test_generator_constant_and_centers():
    path = qac.tfim_path(6, 3.0, 2.5)
    assert qac.translation_centers(path) == [0]
    f = qac.build_filter(0.95 * path.validate(np.linspace(0, 1, 5)).min())
    c = qac.generator_constant(path, 0.0, f)
    assert c["C"] > 0 and c["C"] == pytest.approx(2 * 4.0 * np.log(2) * c["series"])


def test_polar_unitary(rng):
    m = ops.random_unitary(5, rng) + 1e-3 * rng.standard_normal((5, 5))
    u = qac.polar_unitary(m)
    assert np.allclose(u.conj().T @ u, np.eye(5), atol=1e-12)


def test_constant_path_transport():
    spec = LatticeSpec(1, 4)
    pot = ham.tfim(spec, 1.0, 2.0)
    path = qac.QAPath(pot, pot)
    res = qac.transport(path, None, Region.slab("0..1", spec), steps=5, consistency=False)
    assert res.fidelity[-1] == pytest.approx(1.0, abs=1e-12)
    assert res.delta_S == pytest.approx(0, abs=1e-12)
    assert np.allclose(qac.transport_unitary(path, qac.build_filter(1.0), 5), np.eye(16), atol=1e-12)


@pytest.fixture(scope="module")
def short_path():
    path = qac.tfim_path(6, 2.0, 1.5)
    return path, qac.build_filter(0.95 * path.validate(np.linspace(0, 1, 21)).min())


def test_round_trip_returns_ground_state(short_path):
    path, f = short_path
    psi0 = qac.ground_state(path, 0.0)
    u = qac.transport_unitary(path, f, 40)
    back = qac.transport_unitary(path.reversed(), f, 40)
    assert abs(np.vdot(psi0, back @ u @ psi0)) >= 0.998


def test_concatenated_halves_match_single_path(short_path):
    path, f = short_path
    psi0 = qac.ground_state(path, 0.0)
    whole = qac.transport_unitary(path, f, 40) @ psi0
    halves = qac.transport_unitary(path.sub(0.5, 1.0), f, 20) @ qac.transport_unitary(path.sub(0.0, 0.5), f, 20) @ psi0
    assert abs(np.vdot(whole, halves)) >= 1 - 1e-3


def test_transport_bound_on_small_chain(short_path):
    path, _ = short_path
    res = qac.transport(path, None, Region.slab("0..2", path.pot0.spec), steps=40, constant_every=10)
    assert res.violations == []
    assert res.fidelity[-1] >= 0.999
    assert res.unitarity_defect <= 1e-8
    assert res.consistency <= 1e-6
    assert len(res.rows()) == 41


def test_derivative_constant_on_field_ramp():
    # only the field moves: |dg| = 0.5 against a largest term max(J, g(s)) >= 1.5
    path = qac.tfim_path(4, 2.0, 1.5)
    assert qac.derivative_constant(path, np.linspace(0, 1, 11)) == pytest.approx(0.5 / 1.5, rel=1e-12)
    flat = qac.tfim_path(4, 2.0, 2.0)
    assert qac.derivative_constant(flat, [0.0, 1.0]) == 0.0
