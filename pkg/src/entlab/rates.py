"""Mixing and entangling rates, their total-change sandwiches and optimizers.

Sign convention: states evolve as ``exp(-iHt) rho exp(iHt)``.  Under that
convention the instantaneous entropy derivative is

    dS/dt = i (1-p) Tr(H [rho_2, log rho])             (mixing)
    dS/dt = i Tr(H [|psi><psi|, log rho_aA (x) 1])      (entangling)

which is what the finite-difference oracles in the test-suite confirm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import operators as ops
from .errors import DimensionError, DomainError, UsageError

IMAG_TOL = 1e-10


# ---------------------------------------------------------------------------
# ensembles and mixing rates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TwoStateEnsemble:
    """Ensemble ``{(p, rho1), (1-p, rho2)}``; only ``rho2`` evolves."""

    p: float
    rho1: np.ndarray
    rho2: np.ndarray

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise DomainError(f"p={self.p} outside [0, 1]")
        r1 = np.asarray(self.rho1, dtype=complex)
        r2 = np.asarray(self.rho2, dtype=complex)
        if r1.shape != r2.shape:
            raise DimensionError("ensemble states must share a dimension")
        object.__setattr__(self, "rho1", r1)
        object.__setattr__(self, "rho2", r2)
        ops.DensityOperator(self.expected())

    @property
    def dim(self) -> int:
        return self.rho1.shape[0]

    def expected(self) -> np.ndarray:
        return self.p * self.rho1 + (1.0 - self.p) * self.rho2

    def at_time(self, H, t: float) -> np.ndarray:
        """Expected state after evolving ``rho2`` for time ``t``."""
        return self.p * self.rho1 + (1.0 - self.p) * evolve_density(H, t, self.rho2)


def evolve_density(H, t: float, rho) -> np.ndarray:
    w, v = ops.eigh(H)
    u = (v * np.exp(-1j * w * t)) @ v.conj().T
    return u @ np.asarray(rho, dtype=complex) @ u.conj().T


def _real(value: complex, scale: float = 1.0) -> float:
    if abs(value.imag) > IMAG_TOL * max(1.0, scale):
        raise ArithmeticError(f"rate has imaginary residue {value.imag:.3e}")
    return float(value.real)


def _commutator_rate(H, rho_i, log_rho) -> float:
    """``i Tr(H [rho_i, log_rho])``."""
    c = ops.commutator(rho_i, log_rho)
    val = 1j * np.trace(np.asarray(H, dtype=complex) @ c)
    return _real(complex(val), np.abs(c).max())


def mixing_rate(ens: TwoStateEnsemble, H) -> float:
    """Entropy derivative of the expected state at ``t = 0``."""
    H = np.asarray(H, dtype=complex)
    if H.shape != (ens.dim, ens.dim):
        raise DimensionError("Hamiltonian and ensemble dimensions differ")
    log_rho = ops.hermitian_log_support(ens.expected())
    return (1.0 - ens.p) * _commutator_rate(H, ens.rho2, log_rho)


def max_mixing_rate(ens: TwoStateEnsemble) -> float:
    """Maximum of :func:`mixing_rate` over ``-1 <= H <= 1``."""
    log_rho = ops.hermitian_log_support(ens.expected())
    c = ops.commutator(ens.rho2, log_rho)
    return (1.0 - ens.p) * ops.hermitian_trace_norm(1j * c)


def mixing_rate_fd(ens: TwoStateEnsemble, H, dt: float = 1e-4) -> float:
    s_plus = ops.von_neumann_entropy(ens.at_time(H, dt))
    s_minus = ops.von_neumann_entropy(ens.at_time(H, -dt))
    return (s_plus - s_minus) / (2 * dt)


def _ensemble_inputs(ps, rhos, Hs=None):
    ps = np.asarray(ps, dtype=float)
    rhos = [np.asarray(r, dtype=complex) for r in rhos]
    if len(ps) != len(rhos):
        raise DimensionError("probabilities and states differ in length")
    if Hs is not None:
        if isinstance(Hs, np.ndarray) and Hs.ndim == 2:
            Hs = [Hs] * len(rhos)
        Hs = [np.asarray(h, dtype=complex) for h in Hs]
        if len(Hs) != len(rhos):
            raise DimensionError("Hamiltonians and states differ in length")
    ops.shannon_entropy(ps)
    return ps, rhos, Hs


def ensemble_mixing_rate(ps, rhos, Hs) -> float:
    """Mixing rate of a k-state ensemble, state ``i`` evolving under ``Hs[i]``.

    A single matrix for ``Hs`` applies the same Hamiltonian to every member.
    """
    ps, rhos, Hs = _ensemble_inputs(ps, rhos, Hs)
    rho = sum(p * r for p, r in zip(ps, rhos))
    log_rho = ops.hermitian_log_support(rho)
    return float(sum(p * _commutator_rate(h, r, log_rho) for p, r, h in zip(ps, rhos, Hs)))


def max_ensemble_mixing_rate(ps, rhos) -> float:
    """Maximum over independent ``-1 <= H_i <= 1`` of :func:`ensemble_mixing_rate`."""
    ps, rhos, _ = _ensemble_inputs(ps, rhos)
    rho = sum(p * r for p, r in zip(ps, rhos))
    log_rho = ops.hermitian_log_support(rho)
    return float(sum(p * ops.hermitian_trace_norm(1j * ops.commutator(r, log_rho))
                     for p, r in zip(ps, rhos)))


def ensemble_state_at(ps, rhos, Hs, t: float) -> np.ndarray:
    ps, rhos, Hs = _ensemble_inputs(ps, rhos, Hs)
    return sum(p * evolve_density(h, t, r) for p, r, h in zip(ps, rhos, Hs))


def ensemble_mixing_rate_fd(ps, rhos, Hs, dt: float = 1e-4) -> float:
    s_plus = ops.von_neumann_entropy(ensemble_state_at(ps, rhos, Hs, dt))
    s_minus = ops.von_neumann_entropy(ensemble_state_at(ps, rhos, Hs, -dt))
    return (s_plus - s_minus) / (2 * dt)


def total_mixing_check(ens: TwoStateEnsemble, H, t_grid: Sequence[float], tol: float = 1e-9) -> dict:
    """Check ``Sbar <= S(rho(t)) <= Sbar + h(p)`` on a time grid."""
    s_bar = ens.p * ops.von_neumann_entropy(ens.rho1) + (1 - ens.p) * ops.von_neumann_entropy(ens.rho2)
    h = ops.binary_entropy(ens.p)
    w, v = ops.eigh(H)
    entropies = []
    for t in t_grid:
        u = (v * np.exp(-1j * w * t)) @ v.conj().T
        rho_t = ens.p * ens.rho1 + (1 - ens.p) * (u @ ens.rho2 @ u.conj().T)
        entropies.append(ops.von_neumann_entropy(rho_t))
    s = np.asarray(entropies)
    lower_violation = float(np.max(s_bar - s, initial=0.0))
    upper_violation = float(np.max(s - (s_bar + h), initial=0.0))
    worst = max(lower_violation, upper_violation)
    return {
        "lower": s_bar,
        "upper": s_bar + h,
        "entropies": s.tolist(),
        "max_violation": worst,
        "violations": int(np.sum(s_bar - s > tol) + np.sum(s - (s_bar + h) > tol)),
        "ok": worst <= tol,
    }


def superposition_entropy_check(psi1, psi2, alpha: complex, beta: complex,
                                dims: Sequence[int], keep: Sequence[int], tol: float = 1e-9) -> dict:
    """Entropy of a superposition of two orthogonal states versus the superposition bound."""
    v1 = np.asarray(psi1, dtype=complex).reshape(-1)
    v2 = np.asarray(psi2, dtype=complex).reshape(-1)
    if abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1) > 1e-10:
        raise DomainError("|alpha|^2 + |beta|^2 must equal 1")
    if abs(np.vdot(v1, v2)) > 1e-10:
        raise DomainError("superposed states must be orthogonal")
    a2, b2 = abs(alpha) ** 2, abs(beta) ** 2
    s1 = ops.entanglement_entropy(v1, dims, keep)
    s2 = ops.entanglement_entropy(v2, dims, keep)
    s = ops.entanglement_entropy(alpha * v1 + beta * v2, dims, keep)
    bound = 2 * (a2 * s1 + b2 * s2 + ops.shannon_entropy([a2, b2]))
    return {"entropy": s, "bound": bound, "margin": bound - s, "ok": s <= bound + tol}


# ---------------------------------------------------------------------------
# entangling rates
# ---------------------------------------------------------------------------

def entropy_rate(psi, dims: Sequence[int], keep: Sequence[int], H) -> float:
    """``i Tr(H [|psi><psi|, log rho_keep (x) 1])`` for a pure state.

    ``H`` is either a full matrix or a callable returning ``H @ psi``.
    """
    dims = tuple(int(d) for d in dims)
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    apply_h = H if callable(H) else (lambda v, m=np.asarray(H, dtype=complex): m @ v)
    mat = ops.state_matrix(psi, dims, keep)
    log_rho = ops.hermitian_log_support(mat @ mat.conj().T)
    phi = ops.state_from_matrix(log_rho @ mat, dims, keep)
    h_psi = apply_h(psi)
    x = np.vdot(phi, h_psi)
    y = np.vdot(h_psi, phi)
    return _real(complex(1j * (x - y)), abs(x) + 1.0)


@dataclass(frozen=True)
class BipartiteSetting:
    """Interaction ``H_AB`` acting on ``a (x) A (x) B (x) b`` with a pure state."""

    dims: tuple[int, int, int, int]
    H_AB: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 4 or min(dims) < 1:
            raise UsageError("dims must be (dim_a, dim_A, dim_B, dim_b)")
        h = np.asarray(self.H_AB, dtype=complex)
        if h.shape != (dims[1] * dims[2],) * 2:
            raise DimensionError("H_AB does not act on A (x) B")
        v = np.asarray(self.psi, dtype=complex).reshape(-1)
        if v.size != math.prod(dims):
            raise DimensionError("state dimension does not match dims")
        if abs(np.linalg.norm(v) - 1) > 1e-12:
            raise DomainError("state must be normalized")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "H_AB", h)
        object.__setattr__(self, "psi", v)

    @property
    def d(self) -> int:
        return min(self.dims[1], self.dims[2])

    @property
    def h_norm(self) -> float:
        return ops.hermitian_norm(self.H_AB)

    def apply_h(self, v) -> np.ndarray:
        a, A, B, b = self.dims
        t = np.asarray(v, dtype=complex).reshape(a, A * B, b)
        return np.einsum("ij,ajb->aib", self.H_AB, t).reshape(-1)

    def full_hamiltonian(self) -> np.ndarray:
        a, _, _, b = self.dims
        return np.kron(np.kron(np.eye(a), self.H_AB), np.eye(b))

    def evolved(self, t: float) -> np.ndarray:
        a, A, B, b = self.dims
        w, v = ops.eigh(self.H_AB)
        u = (v * np.exp(-1j * w * t)) @ v.conj().T
        x = self.psi.reshape(a, A * B, b)
        return np.einsum("ij,ajb->aib", u, x).reshape(-1)

    def cut_entropy(self, psi=None) -> float:
        psi = self.psi if psi is None else psi
        return ops.entanglement_entropy(psi, self.dims, [0, 1])


def entangling_rate(setting: BipartiteSetting) -> float:
    """Instantaneous derivative of ``S(rho_aA)`` under ``1_a (x) H_AB (x) 1_b``."""
    return entropy_rate(setting.psi, setting.dims, [0, 1], setting.apply_h)


def rate_finite_difference(setting: BipartiteSetting, dt: float = 1e-4) -> float:
    """Central difference of ``S(rho_aA(t))`` under exact evolution."""
    if dt <= 0:
        raise DomainError("dt must be positive")
    s_plus = setting.cut_entropy(setting.evolved(dt))
    s_minus = setting.cut_entropy(setting.evolved(-dt))
    return (s_plus - s_minus) / (2 * dt)


def richardson_ratio(derivative: Callable[[float], float], dt: float) -> float:
    """``(D(h) - D(h/2)) / (D(h/2) - D(h/4))``; close to 4 for a second-order stencil."""
    d1, d2, d4 = derivative(dt), derivative(dt / 2), derivative(dt / 4)
    return (d1 - d2) / (d2 - d4)


def total_entangling_check(U, psi, dims: Sequence[int], tol: float = 1e-9) -> dict:
    """Entropy change of ``aA`` under a unitary on ``A (x) B`` versus ``2 log d``."""
    dims = tuple(int(d) for d in dims)
    u = np.asarray(U, dtype=complex)
    if np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0])) > 1e-10:
        raise DomainError("U is not unitary")
    setting = BipartiteSetting(dims, np.zeros_like(u), psi)
    a, A, B, b = dims
    after = np.einsum("ij,ajb->aib", u, setting.psi.reshape(a, A * B, b)).reshape(-1)
    s0 = setting.cut_entropy()
    s1 = setting.cut_entropy(after)
    bound = 2 * math.log(min(A, B))
    change = abs(s1 - s0)
    return {"before": s0, "after": s1, "change": change, "bound": bound,
            "margin": bound - change, "ok": change <= bound + tol}


def swap_operator(d: int) -> np.ndarray:
    s = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            s[j * d + i, i * d + j] = 1.0
    return s


def maximally_entangled(d: int) -> np.ndarray:
    return np.eye(d).reshape(-1) / math.sqrt(d)


# ---------------------------------------------------------------------------
# reduction of entangling to mixing
# ---------------------------------------------------------------------------

def extension_state(rho_AB, dims: Sequence[int]) -> np.ndarray:
    """State ``mu`` with ``rho_A (x) 1/d = rho_AB/d^2 + (1 - 1/d^2) mu``, ``d = dim B``."""
    dA, dB = (int(x) for x in dims)
    if dB == 1:
        raise DomainError("extension needs dim B > 1")
    rho = np.asarray(rho_AB, dtype=complex)
    rho_A = ops.partial_trace(rho, [0], (dA, dB))
    tau = np.kron(rho_A, np.eye(dB) / dB)
    return (tau - rho / dB**2) / (1 - 1 / dB**2)


def reduction_ensemble(rho_AB, dims: Sequence[int]) -> TwoStateEnsemble:
    """Ensemble whose expected state is ``rho_A (x) 1/d`` and whose evolving member is ``rho_AB``."""
    d = int(dims[1])
    mu = extension_state(rho_AB, dims)
    return TwoStateEnsemble(1 - 1 / d**2, mu, rho_AB)


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------

@dataclass
class RateReport:
    value: float
    bound: float
    ratio: float
    witness: dict
    seed: int | None = None
    iterations: int = 0
    converged: bool = True
    restarts: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "bound": self.bound,
            "ratio": self.ratio,
            "witness": self.witness,
            "seed": self.seed,
            "iterations": self.iterations,
            "converged": self.converged,
            "restarts": self.restarts,
        }


def _log_derivative(w, v, c, floor=ops.LOG_FLOOR):
    """Frechet derivative of the support logarithm at ``v diag(w) v^dagger`` applied to ``c``."""
    ct = v.conj().T @ c @ v
    wi, wj = np.meshgrid(w, w, indexing="ij")
    inside = (wi > floor) & (wj > floor)
    safe_i = np.where(inside, wi, 1.0)
    safe_j = np.where(inside, wj, 1.0)
    diff = safe_i - safe_j
    close = np.abs(diff) <= 1e-12 * np.maximum(safe_i, safe_j)
    ratio = np.where(close, 1.0 / safe_i,
                     (np.log(safe_i) - np.log(safe_j)) / np.where(close, 1.0, diff))
    return v @ (np.where(inside, ratio, 0.0) * ct) @ v.conj().T


def entangling_rate_gradient(setting: BipartiteSetting) -> tuple[float, np.ndarray]:
    """Rate and its Euclidean gradient with respect to the real inner product ``Re<.,.>``."""
    dims = setting.dims
    psi = setting.psi
    mat = ops.state_matrix(psi, dims, [0, 1])
    rho = mat @ mat.conj().T
    w, v = ops.eigh(rho)
    logw = np.where(w > ops.LOG_FLOOR, np.log(np.clip(w, ops.LOG_FLOOR, None)), 0.0)
    log_rho = (v * logw) @ v.conj().T
    h_psi = setting.apply_h(psi)
    h_mat = ops.state_matrix(h_psi, dims, [0, 1])
    phi = ops.state_from_matrix(log_rho @ mat, dims, [0, 1])
    x = np.vdot(phi, h_psi)
    rate = float((1j * (x - np.conj(x))).real)
    # G psi with G = i[L (x) 1, H]
    l_h_psi = ops.state_from_matrix(log_rho @ h_mat, dims, [0, 1])
    h_l_psi = setting.apply_h(phi)
    g_psi = 1j * (l_h_psi - h_l_psi)
    # M = Dlog[C], C = Tr_Bb i[H, P]
    c = 1j * (h_mat @ mat.conj().T - mat @ h_mat.conj().T)
    m = _log_derivative(w, v, c)
    m_psi = ops.state_from_matrix(m @ mat, dims, [0, 1])
    return rate, 2.0 * (g_psi + m_psi)


def _ascend(setting: BipartiteSetting, max_iter: int, tol: float):
    psi = setting.psi
    rate, grad = entangling_rate_gradient(setting)
    step = 0.5
    it = 0
    converged = False
    for it in range(1, max_iter + 1):
        xi = grad - np.real(np.vdot(psi, grad)) * psi
        gnorm = np.linalg.norm(xi)
        if gnorm < tol:
            converged = True
            break
        improved = False
        while step > 1e-12:
            trial = psi + step * xi / gnorm
            trial /= np.linalg.norm(trial)
            cand = BipartiteSetting(setting.dims, setting.H_AB, trial)
            new_rate, new_grad = entangling_rate_gradient(cand)
            if new_rate > rate:
                improved = True
                break
            step *= 0.5
        if not improved:
            converged = True
            break
        gain = new_rate - rate
        psi, rate, grad, setting = trial, new_rate, new_grad, cand
        step = min(step * 1.5, 1.0)
        if gain < tol * 1e-3:
            converged = True
            break
    return setting, rate, it, converged


def maximize_entangling_rate(H_AB, dims: Sequence[int], ancilla_dims: Sequence[int] = (1, 1),
                             restarts: int = 20, seed: int = 0, max_iter: int = 200,
                             tol: float = 1e-8) -> RateReport:
    """Riemannian gradient ascent of the entangling rate over pure states.

    ``H_AB`` is rescaled to unit operator norm.  The reported bound is
    ``4 log d`` with ``d = min(dim A, dim B)``.
    """
    if restarts < 1:
        raise UsageError("restarts must be at least 1")
    dA, dB = (int(x) for x in dims)
    da, db = (int(x) for x in ancilla_dims)
    full = (da, dA, dB, db)
    h = np.asarray(H_AB, dtype=complex)
    # the rate only sees H up to an additive constant, so drop the trace part before normalizing
    h = h - np.trace(h) / h.shape[0] * np.eye(h.shape[0])
    h_norm = ops.hermitian_norm(h)
    bound = 4 * math.log(min(dA, dB))
    if h_norm < 1e-14:
        psi = np.zeros(math.prod(full), dtype=complex)
        psi[0] = 1.0
        return RateReport(0.0, bound, 0.0, {"psi": ops.operator_to_json(psi, full)}, seed, 0, True, [0.0])
    h_unit = np.asarray(H_AB, dtype=complex) / ops.hermitian_norm(np.asarray(H_AB, dtype=complex))
    streams = np.random.SeedSequence(seed).spawn(restarts)
    best = None
    values = []
    total_iter = 0
    all_converged = True
    for ss in streams:
        rng = np.random.default_rng(ss)
        start = BipartiteSetting(full, h_unit, ops.random_state(math.prod(full), rng))
        final, rate, it, conv = _ascend(start, max_iter, tol)
        values.append(rate)
        total_iter += it
        all_converged &= conv
        if best is None or rate > best[1]:
            best = (final, rate)
    final, rate = best
    witness = {"psi": ops.operator_to_json(final.psi, full), "H_AB": ops.operator_to_json(h_unit, (dA, dB))}
    return RateReport(rate, bound, rate / bound if bound > 0 else 0.0, witness, seed,
                      total_iter, all_converged, values)


# ---------------------------------------------------------------------------
# seeded instances
# ---------------------------------------------------------------------------

def random_ensemble(dim: int, rng: np.random.Generator, p: float | None = None) -> TwoStateEnsemble:
    """Two full-rank states with a random weight in ``[0.05, 0.95]``."""
    p = float(rng.uniform(0.05, 0.95)) if p is None else p
    return TwoStateEnsemble(p, ops.random_density(dim, rng), ops.random_density(dim, rng))


def random_setting(dims: Sequence[int], rng: np.random.Generator) -> BipartiteSetting:
    """Random unit-norm ``H_AB`` and random pure state; the ``aA`` cut is full rank almost surely."""
    dims = tuple(int(d) for d in dims)
    h = ops.random_hermitian(dims[1] * dims[2], rng, norm=1.0)
    return BipartiteSetting(dims, h, ops.random_state(math.prod(dims), rng))


def reduction_check(H_AB, psi, dims: Sequence[int]) -> dict:
    """Ancilla-free entangling rate against ``d^2`` times the extension-lemma mixing rate."""
    dA, dB = (int(x) for x in dims)
    setting = BipartiteSetting((1, dA, dB, 1), H_AB, psi)
    gamma = entangling_rate(setting)
    rho = np.outer(setting.psi, setting.psi.conj())
    ens = reduction_ensemble(rho, (dA, dB))
    lam = mixing_rate(ens, H_AB)
    rho_a = ops.partial_trace(rho, [0], (dA, dB))
    direct = _commutator_rate(H_AB, rho, ops.hermitian_log_support(np.kron(rho_a, np.eye(dB) / dB)))
    return {"entangling_rate": gamma, "scaled_mixing_rate": dB**2 * lam, "direct": direct,
            "error": max(abs(gamma - dB**2 * lam), abs(gamma - direct))}
