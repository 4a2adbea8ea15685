"""Lattice potentials, presets, spectra and the Jordan-Wigner map.

A :class:`Potential` is a list of local terms.  Each term records the tensor
factors it acts on and an anchor lattice site; grouping terms by their radius
around the anchor gives the quasi-local decomposition ``H = sum_v sum_r h_v(r)``
without ever reading supports back off a dense matrix.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import operators as ops
from .errors import DimensionError, DomainError, UsageError
from .lattice import LatticeSpec

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
LOWER = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1| = (X + iY)/2, removes a fermion
DEGENERACY_TOL = 1e-8
GAP_FLOOR = 1e-8
PRESETS = ("tfim", "heisenberg", "hubbard_jw")


@dataclass(frozen=True)
class Term:
    sites: tuple[int, ...]
    op: np.ndarray
    anchor: int

    def __post_init__(self):
        sites = tuple(int(s) for s in self.sites)
        if len(set(sites)) != len(sites):
            raise UsageError("term sites must be distinct")
        op = np.asarray(self.op, dtype=complex)
        if np.abs(op - op.conj().T).max(initial=0.0) > 1e-12:
            raise DomainError("term is not Hermitian")
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "op", op)

    def scaled(self, c: float) -> "Term":
        return Term(self.sites, c * self.op, self.anchor)


@dataclass(frozen=True)
class Potential:
    """Local terms acting on tensor factors of dimensions ``dims``.

    ``positions[f]`` is the lattice-site index of factor ``f``; by default
    factor and site coincide.
    """

    dims: tuple[int, ...]
    terms: tuple[Term, ...] = ()
    spec: LatticeSpec | None = None
    positions: tuple[int, ...] | None = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "terms", tuple(self.terms))
        pos = tuple(range(len(dims))) if self.positions is None else tuple(int(p) for p in self.positions)
        if len(pos) != len(dims):
            raise DimensionError("positions must list one site per factor")
        object.__setattr__(self, "positions", pos)
        for t in self.terms:
            if any(s < 0 or s >= len(dims) for s in t.sites):
                raise DimensionError(f"term sites {t.sites} outside {len(dims)} factors")
            if t.op.shape != (math.prod(dims[s] for s in t.sites),) * 2:
                raise DimensionError("term matrix does not match its sites")

    @property
    def dim(self) -> int:
        return math.prod(self.dims)

    @property
    def n_factors(self) -> int:
        return len(self.dims)

    def site_distance(self, a: int, b: int) -> int:
        """Lattice distance between two site indices."""
        if self.spec is None:
            return abs(a - b)
        from .lattice import torus_distance
        return torus_distance(self.spec.site(a), self.spec.site(b), self.spec)

    def radius(self, term: Term) -> int:
        return max(self.site_distance(term.anchor, self.positions[s]) for s in term.sites)

    def diameter(self, term: Term) -> int:
        pts = {self.positions[s] for s in term.sites}
        return max((self.site_distance(a, b) for a in pts for b in pts), default=0)

    def uniform_bound(self) -> float:
        return max((ops.hermitian_norm(t.op) for t in self.terms), default=0.0)

    def with_terms(self, terms, name=None) -> "Potential":
        return Potential(self.dims, tuple(terms), self.spec, self.positions, name or self.name, dict(self.params))

    def merged(self, tol: float = 1e-15) -> "Potential":
        """Sum terms sharing sites and anchor; drop terms that cancel."""
        groups: dict = {}
        for t in self.terms:
            key = (t.sites, t.anchor)
            groups[key] = groups[key] + t.op if key in groups else t.op
        terms = [Term(s, op, a) for (s, a), op in groups.items() if np.abs(op).max(initial=0.0) > tol]
        return self.with_terms(terms)

    def restricted(self, factors) -> "Potential":
        """Terms supported inside ``factors``."""
        keep = set(int(f) for f in factors)
        return self.with_terms([t for t in self.terms if set(t.sites) <= keep])


def assemble(pot: Potential, cap: int | None = None) -> np.ndarray:
    """Dense Hamiltonian ``sum_V Phi(V)``."""
    if pot.dim > (cap or ops.DIM_CAP):
        from .errors import CapacityError
        raise CapacityError(f"dimension {pot.dim} exceeds cap {cap or ops.DIM_CAP}")
    H = np.zeros((pot.dim, pot.dim), dtype=complex)
    for t in pot.terms:
        H += ops.embed(t.op, t.sites, pot.dims, cap)
    return H


def local_sum(terms: Sequence[Term], dims: Sequence[int]) -> tuple[tuple[int, ...], np.ndarray]:
    """Sum of terms as a matrix on the union of their supports."""
    support = tuple(sorted({s for t in terms for s in t.sites}))
    if not support:
        return (), np.zeros((1, 1), dtype=complex)
    sub = [dims[s] for s in support]
    pos = {s: i for i, s in enumerate(support)}
    m = np.zeros((math.prod(sub),) * 2, dtype=complex)
    for t in terms:
        m += ops.embed(t.op, [pos[s] for s in t.sites], sub)
    return support, m


def apply_potential(pot: Potential, psi, terms: Sequence[Term] | None = None) -> np.ndarray:
    """``H psi`` applied term by term without forming ``H``."""
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    out = np.zeros_like(psi)
    for t in pot.terms if terms is None else terms:
        out += ops.apply_on_factors(t.op, psi, pot.dims, t.sites)
    return out


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

def bonds(spec: LatticeSpec) -> list[tuple[int, int]]:
    """Nearest-neighbour pairs ``(v, v + e_axis)`` as site indices, without duplicates."""
    out = []
    seen = set()
    for x in spec.sites():
        for axis in range(spec.nu):
            c = x[axis] + 1
            if c >= spec.L:
                if not spec.periodic:
                    continue
                c -= spec.L
            y = x[:axis] + (c,) + x[axis + 1:]
            a, b = spec.index(x), spec.index(y)
            key = frozenset((a, b))
            if a != b and key not in seen:
                seen.add(key)
                out.append((a, b))
    return out


def tfim(spec: LatticeSpec, J: float = 1.0, g: float = 1.0) -> Potential:
    """Transverse-field Ising model ``-J sum ZZ - g sum X``."""
    terms = [Term((a, b), -J * np.kron(Z, Z), a) for a, b in bonds(spec)]
    terms += [Term((v,), -g * X, v) for v in range(spec.n_sites)]
    return Potential((2,) * spec.n_sites, tuple(terms), spec, name="tfim", params={"J": J, "g": g})


def heisenberg(spec: LatticeSpec, J: float = 1.0) -> Potential:
    """Isotropic Heisenberg model ``J sum (XX + YY + ZZ)``."""
    bond = J * (np.kron(X, X) + np.kron(Y, Y) + np.kron(Z, Z)).real.astype(complex)
    terms = [Term((a, b), bond, a) for a, b in bonds(spec)]
    return Potential((2,) * spec.n_sites, tuple(terms), spec, name="heisenberg", params={"J": J})


def preset_potential(name: str, spec: LatticeSpec, **params) -> Potential:
    if name == "tfim":
        return tfim(spec, params.get("J", 1.0), params.get("g", 1.0))
    if name == "heisenberg":
        return heisenberg(spec, params.get("J", 1.0))
    if name == "hubbard_jw":
        fs = hubbard_spec(spec, params.get("t", 1.0), params.get("U", 4.0), params.get("mu", 0.0),
                          params.get("ordering", "row"))
        return jordan_wigner(fs)
    raise UsageError(f"unknown preset {name!r}; choose from {PRESETS}")


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralData:
    eigenvalues: np.ndarray
    gap: float
    degeneracy: int
    spread: float
    gapped: bool

    def to_json(self) -> dict:
        return {"eigenvalues": [float(e) for e in self.eigenvalues], "gap": self.gap,
                "degeneracy": self.degeneracy, "spread": self.spread, "gapped": self.gapped}


def ground_degeneracy(eigenvalues, tol: float = DEGENERACY_TOL) -> int:
    e = np.sort(np.asarray(eigenvalues, dtype=float))
    return int(np.sum(e - e[0] <= tol))


def spectral_gap(H, q: int | None = 1, floor: float = GAP_FLOOR, eigenvalues=None) -> SpectralData:
    """Gap above the lowest ``q`` levels; ``q=None`` detects the degeneracy."""
    e = np.sort(np.linalg.eigvalsh(np.asarray(H, dtype=complex)) if eigenvalues is None
                else np.asarray(eigenvalues, dtype=float))
    if q is None:
        q = ground_degeneracy(e)
    if q < 1:
        raise UsageError("q must be at least 1")
    if q >= e.size:
        raise UsageError("q must be smaller than the dimension")
    gap = float(e[q] - e[q - 1])
    return SpectralData(e, gap, int(q), float(e[q - 1] - e[0]), gap > floor)


# ---------------------------------------------------------------------------
# quasi-local structure
# ---------------------------------------------------------------------------

def fit_power_law(radii, norms) -> float | None:
    """Least-squares slope of ``log norm`` against ``log r`` over positive entries with ``r >= 1``."""
    r = np.asarray(radii, dtype=float)
    n = np.asarray(norms, dtype=float)
    mask = (r >= 1) & (n > 0)
    if mask.sum() < 2:
        return None
    return float(np.polyfit(np.log(r[mask]), np.log(n[mask]), 1)[0])


def anchored_groups(pot: Potential, anchor: int) -> dict[int, list[Term]]:
    groups: dict[int, list[Term]] = {}
    for t in pot.terms:
        if t.anchor == anchor:
            groups.setdefault(pot.radius(t), []).append(t)
    return groups


def quasi_local_decompose(pot: Potential, center: int, r_max: int | None = None) -> dict:
    """Norms ``||h_center(r)||`` and the fitted power-law exponent."""
    if not isinstance(pot, Potential):
        raise UsageError("quasi_local_decompose needs a Potential with recorded supports")
    groups = anchored_groups(pot, int(center))
    top = max(groups, default=0) if r_max is None else r_max
    norms = []
    supports = []
    for r in range(top + 1):
        support, m = local_sum(groups.get(r, []), pot.dims)
        norms.append(ops.hermitian_norm(m) if support else 0.0)
        supports.append(list(support))
    return {"center": int(center), "radii": list(range(top + 1)), "norms": norms,
            "supports": supports, "exponent": fit_power_law(range(top + 1), norms)}


def radius_norms(pot: Potential) -> np.ndarray:
    """``max_v ||h_v(r)||`` indexed by ``r``."""
    anchors = sorted({t.anchor for t in pot.terms})
    out: dict[int, float] = {}
    for v in anchors:
        for r, terms in anchored_groups(pot, v).items():
            out[r] = max(out.get(r, 0.0), ops.hermitian_norm(local_sum(terms, pot.dims)[1]))
    top = max(out, default=0)
    return np.array([out.get(r, 0.0) for r in range(top + 1)])


# ---------------------------------------------------------------------------
# translations
# ---------------------------------------------------------------------------

def shift_operator(spec: LatticeSpec, axis: int = 0, local_dim: int = 2) -> np.ndarray:
    """Permutation matrix moving the state on site ``x`` to site ``x + e_axis``."""
    n = spec.n_sites
    dim = local_dim**n
    if dim > ops.DIM_CAP:
        from .errors import CapacityError
        raise CapacityError(f"dimension {dim} exceeds cap")
    target = [spec.index(spec.translate(spec.site(i), [1 if a == axis else 0 for a in range(spec.nu)]))
              for i in range(n)]
    # output factor target[i] carries input factor i
    source = np.argsort(target)
    idx = np.arange(dim).reshape((local_dim,) * n).transpose(source).reshape(-1)
    T = np.zeros((dim, dim))
    T[np.arange(dim), idx] = 1.0
    return T


def translation_defect(H, spec: LatticeSpec, local_dim: int = 2) -> float:
    H = np.asarray(H, dtype=complex)
    worst = 0.0
    for axis in range(spec.nu):
        T = shift_operator(spec, axis, local_dim)
        worst = max(worst, float(np.abs(T @ H @ T.T - H).max()))
    return worst


# ---------------------------------------------------------------------------
# fermions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FermionicSpec:
    """Quadratic-plus-density fermionic Hamiltonian on ordered modes.

    ``hopping`` holds ``(i, j, t)`` for ``t c_i^dag c_j + h.c.``; ``onsite``
    holds ``(i, eps)`` for ``eps n_i``; ``interactions`` holds ``(i, j, U)``
    for ``U n_i n_j``.  ``positions[i]`` is the lattice site of mode ``i``.
    """

    n_modes: int
    hopping: tuple = ()
    onsite: tuple = ()
    interactions: tuple = ()
    positions: tuple[int, ...] | None = None
    spec: LatticeSpec | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        for i, j, _ in self.hopping:
            if i == j:
                raise UsageError("hopping needs distinct modes; use onsite for diagonal terms")
        for entry in tuple(self.hopping) + tuple(self.interactions):
            if not all(0 <= m < self.n_modes for m in entry[:2]):
                raise UsageError(f"mode index out of range in {entry}")


def snake_order(spec: LatticeSpec) -> list[int]:
    """Boustrophedon ordering of a 2D lattice; row order in 1D."""
    if spec.nu == 1:
        return list(range(spec.n_sites))
    if spec.nu != 2:
        raise UsageError("snake ordering is defined for 1D and 2D lattices")
    out = []
    for row in range(spec.L):
        cols = range(spec.L) if row % 2 == 0 else range(spec.L - 1, -1, -1)
        out.extend(spec.index((row, c)) for c in cols)
    return out


def hubbard_spec(spec: LatticeSpec, t: float = 1.0, U: float = 4.0, mu: float = 0.0,
                 ordering: str = "row") -> FermionicSpec:
    """Spinful Hubbard model; site ``x`` carries modes ``2 rank(x)`` (up) and ``2 rank(x) + 1`` (down)."""
    if ordering == "row":
        order = list(range(spec.n_sites))
    elif ordering == "snake":
        order = snake_order(spec)
    else:
        raise UsageError(f"unknown ordering {ordering!r}")
    rank = {site: k for k, site in enumerate(order)}
    hop = []
    for a, b in bonds(spec):
        for s in (0, 1):
            hop.append((2 * rank[a] + s, 2 * rank[b] + s, -t))
    onsite = [(m, -mu) for m in range(2 * spec.n_sites)]
    inter = [(2 * k, 2 * k + 1, U) for k in range(spec.n_sites)]
    positions = tuple(order[m // 2] for m in range(2 * spec.n_sites))
    return FermionicSpec(2 * spec.n_sites, tuple(hop), tuple(onsite), tuple(inter), positions, spec,
                         {"t": t, "U": U, "mu": mu, "ordering": ordering})


def window_annihilators(n: int) -> list[np.ndarray]:
    """Jordan-Wigner annihilators ``Z ... Z (X+iY)/2`` on an ``n``-mode register."""
    out = []
    for j in range(n):
        out.append(ops.kron_all([Z] * j + [LOWER] + [I2] * (n - j - 1)))
    return out


def jw_annihilators(n_modes: int) -> list[np.ndarray]:
    if 2**n_modes > ops.DIM_CAP:
        from .errors import CapacityError
        raise CapacityError("too many modes for dense matrices")
    return window_annihilators(n_modes)


def anticommutation_defect(n_modes: int) -> float:
    """Largest deviation from ``{c_i, c_j^dag} = delta_ij``, ``{c_i, c_j} = 0``."""
    c = jw_annihilators(n_modes)
    eye = np.eye(2**n_modes)
    worst = 0.0
    for i in range(n_modes):
        for j in range(n_modes):
            a = c[i] @ c[j].conj().T + c[j].conj().T @ c[i] - (eye if i == j else 0)
            b = c[i] @ c[j] + c[j] @ c[i]
            worst = max(worst, np.abs(a).max(), np.abs(b).max())
    return float(worst)


def _window_term(modes: Sequence[int], build) -> Term:
    """Term on the contiguous mode window covering ``modes``.

    Strings from modes below the window cancel in every even product, so a
    register starting at the lowest mode reproduces the operator exactly.
    """
    lo, hi = min(modes), max(modes)
    c = window_annihilators(hi - lo + 1)
    local = {m: c[m - lo] for m in range(lo, hi + 1)}
    op = build(local)
    return Term(tuple(range(lo, hi + 1)), (op + op.conj().T) / 2, lo)


def jordan_wigner(fs: FermionicSpec) -> Potential:
    """Spin form of a fermionic Hamiltonian with explicit ``Z`` strings."""
    terms = []
    for i, j, t in fs.hopping:
        terms.append(_window_term((i, j), lambda c, i=i, j=j, t=t:
                                  t * c[i].conj().T @ c[j] + np.conj(t) * c[j].conj().T @ c[i]))
    for i, eps in fs.onsite:
        if eps != 0:
            terms.append(_window_term((i,), lambda c, i=i, eps=eps: eps * c[i].conj().T @ c[i]))
    for i, j, U in fs.interactions:
        terms.append(_window_term((i, j), lambda c, i=i, j=j, U=U:
                                  U * (c[i].conj().T @ c[i]) @ (c[j].conj().T @ c[j])))
    positions = fs.positions if fs.positions is not None else tuple(range(fs.n_modes))
    anchored = [Term(t.sites, t.op, positions[t.anchor]) for t in terms]
    return Potential((2,) * fs.n_modes, tuple(anchored), fs.spec, positions, "hubbard_jw", dict(fs.params))


def number_operator(n_modes: int) -> np.ndarray:
    c = jw_annihilators(n_modes)
    return sum(ci.conj().T @ ci for ci in c)
