import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from entlab import commutator as cm
from entlab import operators as ops
from entlab.errors import DomainError, UsageError

seeds = st.integers(0, 2**32 - 1)
probs = st.sampled_from([0.5, 0.3, 0.1, 0.05, 0.01, 1e-3])
profiles = st.sampled_from(cm.PROFILES)


def dense_trace_norm(A, B):
    """Direct evaluation with a general-purpose matrix logarithm and SVD."""
    L = scipy.linalg.logm(B)
    return np.linalg.svd(A @ L - L @ A, compute_uv=False).sum()


def test_commuting_pairs_vanish(rng):
    B = ops.random_density(4, rng)
    pair = cm.DominatedPair(0.3 * B, B, 0.3)
    assert cm.commutator_trace_norm(pair) == pytest.approx(0, abs=1e-13)
    whole = cm.DominatedPair(B, B, 1.0)
    assert cm.commutator_trace_norm(whole) == 0.0
    assert ops.binary_entropy(1.0) == 0.0


def test_contraction_with_scalar_gives_scaled_b(rng):
    B = ops.random_density(5, rng)
    for X in (0.1 * np.eye(5), np.eye(5)):
        A = cm.dominated_from_contraction(B, X, 0.1)
        assert np.allclose(A, 0.1 * B, atol=1e-12)


def test_trace_norm_matches_dense_oracle(rng):
    for _ in range(20):
        pair = cm.sample_dominated_pair(2, float(rng.uniform(0.05, 0.95)), rng=rng, profile="simplex")
        assert cm.commutator_trace_norm(pair) == pytest.approx(dense_trace_norm(pair.A, pair.B), abs=1e-12)


def test_sampled_pair_invariants():
    pair = cm.sample_dominated_pair(8, 0.1, seed=5)
    assert np.linalg.eigvalsh(pair.A).min() >= -1e-10
    assert np.linalg.eigvalsh(pair.B - pair.A).min() >= -1e-10
    assert np.trace(pair.A).real == pytest.approx(0.1, abs=1e-10)
    assert np.trace(pair.B).real == pytest.approx(1.0, abs=1e-10)


def test_sampler_is_seeded_and_validates():
    a = cm.sample_dominated_pair(4, 0.2, seed=9)
    b = cm.sample_dominated_pair(4, 0.2, seed=9)
    assert np.array_equal(a.A, b.A)
    with pytest.raises(UsageError):
        cm.sample_dominated_pair(4, 0.2, seed=1, profile="flat")
    with pytest.raises(DomainError):
        cm.sample_dominated_pair(4, 1.0, seed=1)


def test_pair_validation():
    B = np.diag([0.5, 0.5])
    with pytest.raises(DomainError):
        cm.DominatedPair(np.diag([0.6, 0.0]), B, 0.6)
    with pytest.raises(DomainError):
        cm.DominatedPair(np.diag([0.1, 0.1]), B, 0.3)
    with pytest.raises(DomainError):
        cm.DominatedPair(np.diag([0.1, 0.1]), np.eye(2), 0.2)


def test_f_small_values():
    assert cm.f_small(math.exp(-2)) == pytest.approx(0.7357588823428847, abs=1e-15)
    assert cm.f_small(0.5) == pytest.approx(2 / math.e)
    assert cm.f_small(0.01) == pytest.approx(0.4605170185988091, abs=1e-15)
    with pytest.raises(DomainError):
        cm.f_small(0.0)


def test_interval_index():
    p = 0.1
    b = np.array([0.5, 0.1, 0.05, 0.009, 1e-4])
    assert cm.interval_index(b, p).tolist() == [0, 0, 1, 2, 3]


def test_decomposition_commuting_pair(rng):
    B = ops.random_density(4, rng)
    dec = cm.partition_decompose(cm.DominatedPair(0.2 * B, B, 0.2))
    for value in (dec.W, dec.V, dec.Vprime, dec.Wpp):
        assert value == pytest.approx(0, abs=1e-13)


def test_decomposition_seeded_instance():
    dec = cm.partition_decompose(cm.sample_dominated_pair(8, 0.05, seed=3))
    b = dec.bounds()
    assert dec.violations() == []
    assert dec.W == pytest.approx(dec.trace_norm, abs=1e-10)
    assert dec.W <= 6 * math.sqrt(0.05) * cm.f_small(0.05) + 5 * 0.05 * math.log(20)
    assert b["W"] == pytest.approx(b["Wpp"] + b["V"] + b["Vprime"])


def test_ratio_scan_small_cell():
    scan = cm.ratio_scan([2], [0.5], 100, seed=1)
    assert scan["global_max"] <= 2
    assert not scan["violations"]
    skipped = cm.ratio_scan([2], [1.0, 0.5], 5, seed=1)
    assert [c["p"] for c in skipped["cells"]] == [0.5]
    assert cm.ratio_scan([2, 4], [0.1], 10, seed=4) == cm.ratio_scan([2, 4], [0.1], 10, seed=4)


@given(seeds, st.integers(2, 8), probs, profiles)
def test_commutator_ratio_within_constants(seed, dim, p, profile):
    pair = cm.sample_dominated_pair(dim, p, seed=seed, profile=profile)
    ratio = cm.commutator_trace_norm(pair) / ops.binary_entropy(p)
    assert ratio <= cm.SOFT_CONSTANT


@given(seeds, st.integers(2, 6))
def test_clustered_spectrum_lemma(seed, dim):
    rng = np.random.default_rng(seed)
    w = rng.uniform(1.0, float(rng.uniform(1.0, 5.0)), dim)
    u = ops.random_unitary(dim, rng)
    B = (u * (w / w.sum())) @ u.conj().T
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    A = g @ g.conj().T
    lhs, rhs = cm.clustered_check(A, B)
    assert lhs <= rhs * (1 + 1e-10) + 1e-12


@given(seeds, st.integers(2, 6))
def test_sylvester_bound(seed, dim):
    rng = np.random.default_rng(seed)
    A, B = ops.random_hermitian(dim, rng), ops.random_hermitian(dim, rng)
    X = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    lhs, rhs = cm.sylvester_check(A, B, X)
    assert lhs <= rhs + 1e-10


@given(seeds, st.integers(2, 8), probs, profiles)
def test_complement_symmetry(seed, dim, p, profile):
    pair = cm.sample_dominated_pair(dim, p, seed=seed, profile=profile)
    assert cm.commutator_trace_norm(pair.complement()) == pytest.approx(cm.commutator_trace_norm(pair), abs=1e-10)


@given(seeds, st.integers(2, 12), probs, profiles)
def test_decomposition_identity(seed, dim, p, profile):
    pair = cm.sample_dominated_pair(dim, p, seed=seed, profile=profile)
    dec = cm.partition_decompose(pair)
    assert dec.residual <= 1e-8
    # the blocks sum to the dual pairing at the optimal H, i.e. the trace norm
    A, B = pair.A, pair.B
    L = ops.hermitian_log_support(B)
    H = ops.matrix_sign(1j * ops.commutator(A, L))
    pairing = (1j * np.trace(H @ ops.commutator(A, L))).real
    assert dec.W == pytest.approx(pairing, abs=1e-8)
    assert dec.W == pytest.approx(cm.commutator_trace_norm(pair), abs=1e-8)
