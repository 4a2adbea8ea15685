"""Trace-norm commutator inequality for dominated pairs.

A dominated pair is ``0 <= A <= B`` with ``Tr B = 1`` and ``Tr A = p``.  The
quantity of interest is ``||[A, log B]||_1 / h(p)``.  Besides computing it we
rebuild the spectral-partition argument that bounds it: the spectrum of ``B``
is cut into intervals ``[p^(k+1), p^k)`` and the dual pairing with the optimal
``H`` is split into near-diagonal and far-off-diagonal blocks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import operators as ops
from .errors import DomainError, UsageError

PROFILES = ("simplex", "geometric", "two-scale")
DOMINATION_TOL = 1e-10
HARD_CONSTANT = 11.0
SOFT_CONSTANT = 2.0


@dataclass(frozen=True)
class DominatedPair:
    A: np.ndarray
    B: np.ndarray
    p: float

    def __post_init__(self):
        a = np.asarray(self.A, dtype=complex)
        b = np.asarray(self.B, dtype=complex)
        if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise UsageError("A and B must be square matrices of equal size")
        a = (a + a.conj().T) / 2
        b = (b + b.conj().T) / 2
        if abs(np.trace(b).real - 1) > 1e-10:
            raise DomainError("Tr B must equal 1")
        if np.linalg.eigvalsh(a).min() < -DOMINATION_TOL:
            raise DomainError("A is not positive")
        if np.linalg.eigvalsh(b - a).min() < -DOMINATION_TOL:
            raise DomainError("A is not dominated by B")
        p = float(np.trace(a).real)
        if abs(p - float(self.p)) > 1e-10:
            raise DomainError(f"Tr A = {p} differs from p = {self.p}")
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "B", b)
        object.__setattr__(self, "p", float(self.p))

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def complement(self) -> "DominatedPair":
        """The pair ``(B - A, B)`` with trace ``1 - p``."""
        return DominatedPair(self.B - self.A, self.B, 1.0 - self.p)


def f_small(p: float) -> float:
    """``sqrt(p) log(1/p)`` up to ``p = e^-2``, then its maximum ``2/e``."""
    if p <= 0:
        raise DomainError("f_small needs p > 0")
    if p <= math.exp(-2):
        return math.sqrt(p) * math.log(1 / p)
    return 2 / math.e


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def sample_spectrum(dim: int, p: float, profile: str, rng: np.random.Generator) -> np.ndarray:
    """Normalized positive spectrum for ``B``."""
    if profile == "simplex":
        w = rng.dirichlet(np.ones(dim))
    elif profile == "geometric":
        # ratio p between consecutive eigenvalues, jittered inside each interval
        w = p ** (np.arange(dim) + rng.uniform(0, 1, dim))
    elif profile == "two-scale":
        k = int(rng.integers(1, dim))
        w = np.concatenate([rng.uniform(0.5, 1.0, k), p * p * rng.uniform(0.5, 1.0, dim - k)])
    else:
        raise UsageError(f"unknown spectral profile {profile!r}; choose from {PROFILES}")
    w = np.maximum(w, 1e-300)
    return rng.permutation(w / w.sum())


def dominated_from_contraction(B, X, p: float) -> np.ndarray:
    """``B^1/2 X' B^1/2`` with trace ``p``, where ``X'`` is ``X`` rescaled or moved toward ``1``.

    Rescaling ``X`` keeps ``0 <= X' <= 1`` only while the scale factor times
    ``||X||`` stays below one; otherwise ``X`` is interpolated toward the
    identity, whose image ``B`` has trace one.
    """
    half = ops.hermitian_sqrt(B)
    a0 = half @ X @ half
    t0 = float(np.trace(a0).real)
    x_top = float(np.linalg.eigvalsh(X).max())
    if t0 > 0 and p / t0 * x_top <= 1.0:
        xs = X * (p / t0)
    else:
        lam = (p - t0) / (1.0 - t0)
        xs = (1 - lam) * X + lam * np.eye(X.shape[0])
    a = half @ xs @ half
    return (a + a.conj().T) / 2


def sample_dominated_pair(dim: int, p: float, seed=None, profile: str = "geometric",
                          rng: np.random.Generator | None = None) -> DominatedPair:
    """Random dominated pair of size ``dim`` with ``Tr A = p``."""
    if dim < 2:
        raise UsageError("dim must be at least 2")
    if not 0 < p < 1:
        raise DomainError("p must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed) if rng is None else rng
    w = sample_spectrum(dim, p, profile, rng)
    u = ops.random_unitary(dim, rng)
    B = (u * w) @ u.conj().T
    v = ops.random_unitary(dim, rng)
    X = (v * rng.uniform(0, 1, dim)) @ v.conj().T
    A = dominated_from_contraction(B, X, p)
    # the trace can drift by rounding; fix it without touching domination
    A *= p / np.trace(A).real
    return DominatedPair(A, B, p)


# ---------------------------------------------------------------------------
# commutator and decomposition
# ---------------------------------------------------------------------------

def _support_frame(B, floor=ops.LOG_FLOOR):
    w, v = ops.eigh(B)
    keep = w > floor
    return w[keep], v[:, keep]


def commutator_trace_norm(pair: DominatedPair) -> float:
    """``||[A, log B]||_1`` computed on the support of ``B``."""
    if pair.p <= 0 or pair.p >= 1:
        return 0.0
    w, v = _support_frame(pair.B)
    a = v.conj().T @ pair.A @ v
    log_b = np.log(w)
    comm = a * (log_b[None, :] - log_b[:, None])  # [A, L] in B's eigenbasis
    return ops.hermitian_trace_norm(1j * comm)


def interval_index(b, p: float) -> np.ndarray:
    """``k`` with ``b`` in ``[p^(k+1), p^k)``."""
    x = np.log(np.asarray(b, dtype=float)) / math.log(p)
    return np.maximum(np.ceil(x - 1e-12).astype(int) - 1, 0)


@dataclass
class PartitionDecomposition:
    W: float
    V: float
    Vprime: float
    Wpp: float
    trace_norm: float
    p: float
    blocks: list = field(default_factory=list)

    @property
    def residual(self) -> float:
        return abs(self.W - (self.V - self.Vprime + self.Wpp))

    def bounds(self) -> dict:
        p = self.p
        lp = math.log(1 / p)
        return {
            "Wpp": 6 * math.sqrt(p) * f_small(p),
            "V": 4 * p * lp,
            "Vprime": p * lp,
            "W": 6 * math.sqrt(p) * f_small(p) + 5 * p * lp,
        }

    def violations(self, tol: float = 1e-10) -> list[str]:
        b = self.bounds()
        out = []
        if abs(self.Wpp) > b["Wpp"] + tol:
            out.append("Wpp")
        if abs(self.V) > b["V"] + tol:
            out.append("V")
        if abs(self.Vprime) > b["Vprime"] + tol:
            out.append("Vprime")
        if self.W > b["W"] + tol:
            out.append("W")
        if self.residual > 1e-8 or abs(self.W - self.trace_norm) > 1e-8:
            out.append("identity")
        return out

    def to_json(self) -> dict:
        return {"W": self.W, "V": self.V, "Vprime": self.Vprime, "Wpp": self.Wpp,
                "trace_norm": self.trace_norm, "p": self.p, "blocks": self.blocks,
                "bounds": self.bounds(), "residual": self.residual}


def partition_decompose(pair: DominatedPair) -> PartitionDecomposition:
    """Split the dual pairing at the optimal ``H`` along the spectral intervals of ``B``."""
    p = pair.p
    if not 0 < p < 1:
        raise DomainError("partition needs 0 < p < 1")
    w, v = _support_frame(pair.B)
    a = v.conj().T @ pair.A @ v
    log_b = np.log(w)
    gap = log_b[None, :] - log_b[:, None]
    comm = a * gap
    h = ops.matrix_sign(1j * comm)
    # entry (i, j) of  i H_ji A_ij (L_j - L_i); summing a block gives W_kl
    terms = (1j * h.T * a * gap).real
    labels = interval_index(w, p)
    ks = np.unique(labels)
    pos = {k: n for n, k in enumerate(ks)}
    idx = np.array([pos[k] for k in labels])
    blockw = np.zeros((len(ks), len(ks)))
    np.add.at(blockw, (idx[:, None], idx[None, :]), terms)
    kset = set(int(k) for k in ks)
    kprime = [k for k in kset if k + 1 in kset]

    def wb(k, l):
        return blockw[pos[k], pos[l]]

    V = sum(wb(k, k) for k in kset) + sum(wb(k, k + 1) + wb(k + 1, k) + wb(k + 1, k + 1) for k in kprime)
    Vprime = sum(wb(k + 1, k + 1) for k in kprime)
    Wpp = sum(wb(k, l) for k in kset for l in kset if abs(k - l) >= 2)
    blocks = [{"k": int(k), "interval": [p ** (k + 1), p ** k], "dim": int(np.sum(labels == k))}
              for k in ks]
    return PartitionDecomposition(float(blockw.sum()), float(V), float(Vprime), float(Wpp),
                                  commutator_trace_norm(pair), p, blocks)


# ---------------------------------------------------------------------------
# auxiliary inequalities
# ---------------------------------------------------------------------------

def clustered_check(A, B) -> tuple[float, float]:
    """``(||[A, log B]||_1, log(b_max/b_min) Tr A)`` for positive ``A`` and positive definite ``B``."""
    w, v = ops.eigh(B)
    if w.min() <= 0:
        raise DomainError("B must be positive definite")
    a = v.conj().T @ np.asarray(A, dtype=complex) @ v
    log_b = np.log(w)
    lhs = ops.hermitian_trace_norm(1j * a * (log_b[None, :] - log_b[:, None]))
    return lhs, math.log(w.max() / w.min()) * float(np.trace(a).real)


def sylvester_check(A, B, X) -> tuple[float, float]:
    """``(||AX - XB||_2, max(a_U - b_L, b_U - a_L) ||X||_2)`` for Hermitian ``A``, ``B``."""
    wa = np.linalg.eigvalsh(A)
    wb = np.linalg.eigvalsh(B)
    lhs = np.linalg.norm(A @ X - X @ B)
    scale = max(wa.max() - wb.min(), wb.max() - wa.min())
    return float(lhs), float(scale * np.linalg.norm(X))


# ---------------------------------------------------------------------------
# scan
# ---------------------------------------------------------------------------

def cell_rng(seed: int, dim: int, p: float, index: int) -> np.random.Generator:
    p_bits = int(np.float64(p).view(np.uint64))
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(dim), p_bits, int(index)]))


def ratio_scan(dims: Sequence[int], p_grid: Sequence[float], samples_per_cell: int, seed: int = 0,
               profiles: Sequence[str] = PROFILES) -> dict:
    """Maximum of ``||[A, log B]||_1 / h(p)`` per ``(dim, p)`` cell.

    Profiles rotate with the sample index.  ``p = 1`` cells are skipped.
    """
    for prof in profiles:
        if prof not in PROFILES:
            raise UsageError(f"unknown spectral profile {prof!r}")
    cells, violations, soft, witnesses = [], [], [], {}
    global_max = 0.0
    for dim in dims:
        for p in p_grid:
            if p >= 1:
                continue
            if p <= 0:
                raise DomainError("scan probabilities must be positive")
            hp = ops.binary_entropy(p)
            best, best_pair = -1.0, None
            for i in range(samples_per_cell):
                rng = cell_rng(seed, dim, p, i)
                pair = sample_dominated_pair(dim, p, profile=profiles[i % len(profiles)], rng=rng)
                ratio = commutator_trace_norm(pair) / hp
                if ratio > HARD_CONSTANT:
                    violations.append({"dim": dim, "p": p, "sample": i, "ratio": ratio})
                if ratio > SOFT_CONSTANT:
                    soft.append({"dim": dim, "p": p, "sample": i, "ratio": ratio})
                if ratio > best:
                    best, best_pair = ratio, (i, pair)
            ref = f"witness_d{dim}_p{p:g}.json"
            witnesses[ref] = {"sample": best_pair[0], "p": p,
                              "A": ops.operator_to_json(best_pair[1].A),
                              "B": ops.operator_to_json(best_pair[1].B)}
            cells.append({"dim": int(dim), "p": float(p), "samples": int(samples_per_cell),
                          "max_ratio": best, "witness_ref": ref})
            global_max = max(global_max, best)
    return {"cells": cells, "global_max": global_max, "violations": violations,
            "soft_flags": soft, "witnesses": witnesses}
