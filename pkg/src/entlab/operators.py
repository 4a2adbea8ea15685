"""Dense complex linear-algebra primitives.

Everything downstream (rates, commutator bounds, lattice Hamiltonians,
quasi-adiabatic transport) reduces to a handful of operations on small dense
matrices: Kronecker products, partial traces, functions of Hermitian
matrices, trace norms and entropies.  All entropies are in nats.

The typed wrappers (:class:`HermitianOperator`, :class:`DensityOperator`,
:class:`PureState`) validate their invariants on construction and carry an
optional tensor-factor layout.  The functions accept either the wrappers or
plain ``numpy`` arrays.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import CapacityError, DimensionError, DomainError, UsageError

DIM_CAP = 2**14
LOG_FLOOR = 1e-12
HERMITIAN_WARN = 1e-10


def set_dim_cap(cap: int) -> int:
    """Set the global dimension cap and return the previous value."""
    global DIM_CAP
    previous, DIM_CAP = DIM_CAP, int(cap)
    return previous


def _check_cap(dim: int, cap: int | None = None) -> None:
    cap = DIM_CAP if cap is None else cap
    if dim > cap:
        raise CapacityError(f"dimension {dim} exceeds cap {cap}")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


def _check_layout(layout, dim):
    if layout is None:
        return None
    layout = tuple(int(d) for d in layout)
    if any(d < 1 for d in layout) or math.prod(layout) != dim:
        raise DimensionError(f"layout {layout} does not multiply to {dim}")
    return layout


@dataclass(frozen=True)
class HermitianOperator:
    """Dense Hermitian matrix with an optional tensor-factor layout.

    Small asymmetries are removed by symmetrizing ``(M + M^dagger)/2``; a
    warning is issued when the relative asymmetry exceeds 1e-10.
    """

    entries: np.ndarray
    layout: tuple[int, ...] | None = None

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"expected a square matrix, got shape {m.shape}")
        scale = max(np.linalg.norm(m), 1e-300)
        asym = np.linalg.norm(m - m.conj().T) / scale
        if asym > HERMITIAN_WARN:
            warnings.warn(f"symmetrizing operator with relative asymmetry {asym:.2e}")
        object.__setattr__(self, "entries", _frozen(0.5 * (m + m.conj().T)))
        object.__setattr__(self, "layout", _check_layout(self.layout, m.shape[0]))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def norm(self) -> float:
        """Operator (spectral) norm."""
        return operator_norm(self.entries)


@dataclass(frozen=True)
class DensityOperator(HermitianOperator):
    """Positive semidefinite, unit-trace Hermitian operator."""

    def __post_init__(self):
        super().__post_init__()
        tr = np.trace(self.entries).real
        if abs(tr - 1.0) > 1e-10:
            raise DomainError(f"trace {tr!r} differs from 1")
        lo = np.linalg.eigvalsh(self.entries)[0]
        if lo < -1e-10:
            raise DomainError(f"negative eigenvalue {lo:.3e}")

    def partial_trace(self, keep: Iterable[int]) -> "DensityOperator":
        return partial_trace(self, keep)

    def entropy(self) -> float:
        return von_neumann_entropy(self.entries)


@dataclass(frozen=True)
class PureState:
    """Unit vector with a tensor-factor layout."""

    amplitudes: np.ndarray
    layout: tuple[int, ...] = field(default=None)

    def __post_init__(self):
        v = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        nrm = np.linalg.norm(v)
        if abs(nrm - 1.0) > 1e-12:
            raise DomainError(f"state norm {nrm!r} differs from 1")
        layout = self.layout if self.layout is not None else (v.size,)
        object.__setattr__(self, "amplitudes", _frozen(v))
        object.__setattr__(self, "layout", _check_layout(layout, v.size))

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def __array__(self, dtype=None, copy=None):
        return self.amplitudes if dtype is None else self.amplitudes.astype(dtype)

    def density(self) -> DensityOperator:
        return DensityOperator(np.outer(self.amplitudes, self.amplitudes.conj()), self.layout)

    def reduced(self, keep: Iterable[int]) -> DensityOperator:
        """Reduced density operator on the factors in ``keep``."""
        rho = reduced_density(self.amplitudes, self.layout, keep)
        layout = tuple(self.layout[k] for k in sorted(set(keep)))
        return DensityOperator(rho, layout)


def normalized(psi, layout=None) -> PureState:
    """Normalize an arbitrary nonzero vector into a :class:`PureState`."""
    v = np.asarray(psi, dtype=complex).reshape(-1)
    return PureState(v / np.linalg.norm(v), layout)


# ---------------------------------------------------------------------------
# products and partial traces
# ---------------------------------------------------------------------------

def _layout_of(x, fallback=None):
    layout = getattr(x, "layout", None)
    if layout is None:
        layout = fallback
    return layout


def tensor_product(a, b, cap: int | None = None):
    """Kronecker product ``a (x) b`` with concatenated layouts.

    Returns a :class:`HermitianOperator` when both inputs are typed operators,
    a plain array otherwise.
    """
    ma, mb = np.asarray(a, dtype=complex), np.asarray(b, dtype=complex)
    for m in (ma, mb):
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError("tensor_product expects square matrices")
    dim = ma.shape[0] * mb.shape[0]
    _check_cap(dim, cap)
    out = np.kron(ma, mb)
    if isinstance(a, HermitianOperator) and isinstance(b, HermitianOperator):
        la = a.layout or (a.dim,)
        lb = b.layout or (b.dim,)
        return HermitianOperator(out, la + lb)
    return out


def kron_all(ops: Sequence[np.ndarray]) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def _keep_list(keep, n):
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise UsageError("keep must be a nonempty set of factor indices")
    if keep[0] < 0 or keep[-1] >= n:
        raise UsageError(f"factor indices {keep} out of range for {n} factors")
    return keep


def partial_trace(rho, keep: Iterable[int], dims: Sequence[int] | None = None):
    """Trace out every tensor factor not listed in ``keep``.

    ``dims`` is taken from ``rho.layout`` when ``rho`` is a typed operator.
    Kept factors stay in their original order.
    """
    dims = _layout_of(rho, dims)
    if dims is None:
        raise UsageError("partial_trace needs a tensor-factor layout")
    dims = tuple(int(d) for d in dims)
    m = np.asarray(rho, dtype=complex)
    if m.shape != (math.prod(dims),) * 2:
        raise DimensionError(f"matrix shape {m.shape} does not match layout {dims}")
    n = len(dims)
    keep = _keep_list(keep, n)
    drop = [k for k in range(n) if k not in keep]
    t = m.reshape(dims + dims)
    perm = keep + drop + [n + k for k in keep] + [n + k for k in drop]
    t = t.transpose(perm)
    dk = math.prod(dims[k] for k in keep)
    dd = math.prod(dims[k] for k in drop)
    t = t.reshape(dk, dd, dk, dd)
    out = np.einsum("ijkj->ik", t)
    if isinstance(rho, DensityOperator):
        return DensityOperator(out, tuple(dims[k] for k in keep))
    return out


def state_matrix(psi, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Reshape a state vector into a (kept x rest) matrix."""
    dims = tuple(int(d) for d in dims)
    v = np.asarray(psi, dtype=complex).reshape(dims)
    n = len(dims)
    keep = _keep_list(keep, n)
    drop = [k for k in range(n) if k not in keep]
    dk = math.prod(dims[k] for k in keep)
    return v.transpose(keep + drop).reshape(dk, -1)


def state_from_matrix(mat, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Inverse of :func:`state_matrix`."""
    dims = tuple(int(d) for d in dims)
    n = len(dims)
    keep = _keep_list(keep, n)
    drop = [k for k in range(n) if k not in keep]
    order = keep + drop
    t = np.asarray(mat).reshape([dims[k] for k in order])
    return t.transpose(np.argsort(order)).reshape(-1)


def reduced_density(psi, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Reduced density matrix of a pure state, computed without forming |psi><psi|."""
    m = state_matrix(psi, dims, keep)
    return m @ m.conj().T


def apply_on_factors(op: np.ndarray, psi, dims: Sequence[int], sites: Sequence[int]) -> np.ndarray:
    """Apply ``op`` (acting on the listed factors, in that order) to a state vector."""
    dims = tuple(int(d) for d in dims)
    sites = [int(s) for s in sites]
    n = len(dims)
    rest = [k for k in range(n) if k not in sites]
    v = np.asarray(psi, dtype=complex).reshape(dims).transpose(sites + rest)
    ds = math.prod(dims[s] for s in sites)
    v = (np.asarray(op, dtype=complex) @ v.reshape(ds, -1)).reshape([dims[k] for k in sites + rest])
    inv = np.argsort(sites + rest)
    return v.transpose(inv).reshape(-1)


def embed(op: np.ndarray, sites: Sequence[int], dims: Sequence[int], cap: int | None = None) -> np.ndarray:
    """Embed an operator on the listed factors into the full tensor product."""
    dims = tuple(int(d) for d in dims)
    sites = [int(s) for s in sites]
    n = len(dims)
    total = math.prod(dims)
    _check_cap(total, cap)
    rest = [k for k in range(n) if k not in sites]
    drest = math.prod(dims[k] for k in rest)
    full = np.kron(np.asarray(op, dtype=complex), np.eye(drest))
    order = sites + rest
    shape = [dims[k] for k in order]
    t = full.reshape(shape + shape)
    inv = list(np.argsort(order))
    t = t.transpose(inv + [n + i for i in inv])
    return t.reshape(total, total)


# ---------------------------------------------------------------------------
# spectral functions
# ---------------------------------------------------------------------------

def eigh(m) -> tuple[np.ndarray, np.ndarray]:
    m = np.asarray(m, dtype=complex)
    if not m.imag.any():
        # real symmetric input: the real solver is several times faster
        w, v = np.linalg.eigh(m.real)
        return w, v.astype(complex)
    return np.linalg.eigh(m)


def hermitian_function(m, fn, floor: float | None = None) -> np.ndarray:
    """Apply ``fn`` to the spectrum of a Hermitian matrix.

    Eigenvalues at or below ``floor`` (when given) are mapped to 0.
    """
    w, v = eigh(m)
    fw = np.zeros_like(w)
    mask = np.ones_like(w, dtype=bool) if floor is None else w > floor
    fw[mask] = fn(w[mask])
    return (v * fw) @ v.conj().T


def hermitian_log_support(rho, floor: float = LOG_FLOOR) -> np.ndarray:
    """Matrix logarithm restricted to the support of ``rho``.

    Eigenvalues below ``floor`` are treated as outside the support and get
    log-value 0.
    """
    if floor <= 0:
        raise DomainError("floor must be positive")
    m = np.asarray(rho, dtype=complex)
    if np.trace(m).real <= 0:
        raise DomainError("matrix logarithm needs a positive trace")
    return hermitian_function(m, np.log, floor)


def hermitian_sqrt(m) -> np.ndarray:
    return hermitian_function(m, lambda w: np.sqrt(np.clip(w, 0.0, None)))


def matrix_sign(m) -> np.ndarray:
    """Sign function of a Hermitian matrix (0 on the kernel)."""
    w, v = eigh(m)
    return (v * np.sign(np.where(np.abs(w) > 1e-14, w, 0.0))) @ v.conj().T


def von_neumann_entropy(rho, floor: float = LOG_FLOOR) -> float:
    """``-Tr rho log rho`` in nats, summed over eigenvalues above ``floor``."""
    w = np.linalg.eigvalsh(np.asarray(rho, dtype=complex))
    w = w[w > floor]
    return float(-np.sum(w * np.log(w)))


def entropy_from_spectrum(w, floor: float = LOG_FLOOR) -> float:
    w = np.asarray(w, dtype=float)
    w = w[w > floor]
    return float(-np.sum(w * np.log(w)))


def entanglement_entropy(psi, dims: Sequence[int], keep: Iterable[int]) -> float:
    """Entropy of the reduced state on ``keep`` via Schmidt coefficients."""
    s = np.linalg.svd(state_matrix(psi, dims, keep), compute_uv=False)
    return entropy_from_spectrum(s**2)


def shannon_entropy(p) -> float:
    """Shannon entropy in nats with the convention ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise DomainError("probabilities must be non-negative")
    if abs(p.sum() - 1.0) > 1e-10:
        raise DomainError(f"probabilities sum to {p.sum()!r}, not 1")
    q = p[p > 0]
    return float(-np.sum(q * np.log(q)))


def binary_entropy(p: float) -> float:
    return shannon_entropy([p, 1.0 - p])


def trace_norm(m) -> float:
    """Sum of singular values."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError("trace_norm expects a square matrix")
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def hermitian_trace_norm(m) -> float:
    """Trace norm of a Hermitian matrix as the sum of absolute eigenvalues."""
    return float(np.sum(np.abs(np.linalg.eigvalsh(np.asarray(m, dtype=complex)))))


def operator_norm(m) -> float:
    m = np.asarray(m, dtype=complex)
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


def hermitian_norm(m) -> float:
    w = np.linalg.eigvalsh(np.asarray(m, dtype=complex))
    return float(max(abs(w[0]), abs(w[-1])))


def commutator(a, b) -> np.ndarray:
    a, b = np.asarray(a, dtype=complex), np.asarray(b, dtype=complex)
    return a @ b - b @ a


# ---------------------------------------------------------------------------
# random sampling
# ---------------------------------------------------------------------------

def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR with phase correction."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_hermitian(n: int, rng: np.random.Generator, norm: float | None = None) -> np.ndarray:
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    h = 0.5 * (z + z.conj().T)
    if norm is not None:
        h *= norm / hermitian_norm(h)
    return h


def random_state(n: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v)


def random_density(n: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random density matrix from the induced (Hilbert-Schmidt-like) measure."""
    k = n if rank is None else rank
    g = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    rho = g @ g.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def operator_to_json(m, layout: Sequence[int] | None = None) -> dict:
    """Row-major ``{dim, layout, re, im}`` record."""
    layout = _layout_of(m, layout)
    a = np.asarray(m, dtype=complex)
    if a.ndim == 1:
        dim = a.size
    else:
        dim = a.shape[0]
    flat = a.reshape(-1)
    return {
        "dim": int(dim),
        "layout": None if layout is None else [int(d) for d in layout],
        "re": [float(x) for x in flat.real],
        "im": [float(x) for x in flat.imag],
    }


def operator_from_json(record: dict) -> np.ndarray:
    flat = np.asarray(record["re"], dtype=float) + 1j * np.asarray(record["im"], dtype=float)
    dim = int(record["dim"])
    if flat.size == dim:
        return flat
    return flat.reshape(dim, dim)
