"""Quasi-adiabatic continuation along gapped Hamiltonian paths.

The generator is built in the energy eigenbasis,

    K_ij = -i W(E_i - E_j) (dH/ds)_ij,

with an odd spectral weight ``W`` equal to ``-1/w`` outside the gap.  This
choice makes ``i K |psi_0> = d|psi_0>/ds`` exactly, so ``dU/ds = i K U``
transports the ground state.  The matching time-domain filter
``F(t) = (1/2pi) int W(w) exp(-iwt) dw`` is purely imaginary and odd.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import operators as ops
from .errors import DomainError, ParameterError, PathError, UsageError
from .hamiltonian import Potential, Term, assemble, local_sum, tfim, translation_defect
from .lattice import LatticeSpec, Region, ball, ball_cap, boundary_and_area
from .rates import entropy_rate

SHARPNESS_RANGE = (0.1, 50.0)
DEFAULT_SHARPNESS = 8.0
QUADRATURE_NODES = 4000
SIE_CONSTANT = 4.0


@lru_cache(maxsize=8)
def _unit_nodes(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1), 0.5 * w


@dataclass(frozen=True)
class FilterFunction:
    """Spectral weight ``W(w) = -(1 - b(w/Delta))/w`` with a compact bump ``b``.

    ``b(x) = exp(-a x^2 / (1 - x^2))`` on ``|x| < 1`` and 0 outside, where
    ``a`` is the sharpness.
    """

    Delta: float
    sharpness: float = DEFAULT_SHARPNESS
    nodes: int = QUADRATURE_NODES

    def __post_init__(self):
        if not self.Delta > 0:
            raise DomainError("Delta must be positive")
        lo, hi = SHARPNESS_RANGE
        if not lo <= self.sharpness <= hi:
            raise ParameterError(f"sharpness {self.sharpness} outside the stable range [{lo}, {hi}]")
        if self.nodes < 100:
            raise ParameterError("at least 100 quadrature nodes are needed")

    def bump(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        inside = np.abs(x) < 1
        xi = x[inside]
        out[inside] = np.exp(-self.sharpness * xi**2 / (1 - xi**2))
        return out

    def _one_minus_bump(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.ones_like(x)
        inside = np.abs(x) < 1
        xi = x[inside]
        out[inside] = -np.expm1(-self.sharpness * xi**2 / (1 - xi**2))
        return out

    def W(self, omega) -> np.ndarray:
        """Odd spectral weight; exactly ``-1/w`` for ``|w| >= Delta`` and 0 at ``w = 0``."""
        w = np.asarray(omega, dtype=float)
        safe = np.where(w == 0, 1.0, w)
        return np.where(w == 0, 0.0, -self._one_minus_bump(w / self.Delta) / safe)

    def F_imag(self, t) -> np.ndarray:
        """``Im F(t)``; the real part vanishes identically."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        x, wts = _unit_nodes(self.nodes)
        g = self.bump(x) / x
        out = np.empty_like(t)
        for start in range(0, t.size, 256):
            chunk = t[start:start + 256]
            integral = np.sin(np.outer(self.Delta * chunk, x)) @ (wts * g)
            out[start:start + 256] = (np.pi / 2 * np.sign(chunk) - integral) / np.pi
        return out

    def F(self, t) -> np.ndarray:
        return 1j * self.F_imag(t)

    def decay_exponent(self, t_min: float = 5.0, t_max: float = 50.0, points: int = 2000) -> float:
        """Log-log slope of the running tail supremum of ``|F|`` on ``[t_min, t_max]``."""
        t = np.linspace(t_min, t_max, points)
        f = np.abs(self.F_imag(t))
        env = np.maximum.accumulate(f[::-1])[::-1]
        return float(np.polyfit(np.log(t), np.log(env), 1)[0])

    def to_json(self) -> dict:
        return {"Delta": self.Delta, "sharpness": self.sharpness, "nodes": self.nodes}


def build_filter(Delta: float, sharpness: float = DEFAULT_SHARPNESS, nodes: int = QUADRATURE_NODES) -> FilterFunction:
    return FilterFunction(float(Delta), float(sharpness), int(nodes))


def filtered_operator(energies, vectors, O, filt: FilterFunction) -> np.ndarray:
    """``sum_ij -i W(E_i - E_j) O_ij |i><j|`` in the original basis."""
    o = vectors.conj().T @ np.asarray(O, dtype=complex) @ vectors
    k = -1j * filt.W(energies[:, None] - energies[None, :]) * o
    k = vectors @ k @ vectors.conj().T
    return (k + k.conj().T) / 2


# ---------------------------------------------------------------------------
# paths
# ---------------------------------------------------------------------------

@dataclass
class QAPath:
    """Linear interpolation ``H(s) = (1 - u) H_0 + u H_1`` with ``u = a + s (b - a)``.

    ``s`` runs over ``[0, 1]``; ``(a, b)`` selects a sub-path or reversal.
    """

    pot0: Potential
    pot1: Potential
    interval: tuple[float, float] = (0.0, 1.0)
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.pot0.dims != self.pot1.dims:
            raise UsageError("path endpoints act on different spaces")
        self.interval = (float(self.interval[0]), float(self.interval[1]))

    @property
    def dims(self):
        return self.pot0.dims

    @property
    def speed(self) -> float:
        return self.interval[1] - self.interval[0]

    def u(self, s: float) -> float:
        a, b = self.interval
        return a + s * (b - a)

    def endpoints(self):
        if "H" not in self._cache:
            self._cache["H"] = (assemble(self.pot0), assemble(self.pot1))
        return self._cache["H"]

    def hamiltonian(self, s: float) -> np.ndarray:
        h0, h1 = self.endpoints()
        u = self.u(s)
        return (1 - u) * h0 + u * h1

    def derivative(self) -> np.ndarray:
        h0, h1 = self.endpoints()
        return self.speed * (h1 - h0)

    def potential(self, s: float) -> Potential:
        u = self.u(s)
        terms = [t.scaled(1 - u) for t in self.pot0.terms] + [t.scaled(u) for t in self.pot1.terms]
        return self.pot0.with_terms(terms, "path").merged()

    def derivative_potential(self) -> Potential:
        terms = [t.scaled(-self.speed) for t in self.pot0.terms] + [t.scaled(self.speed) for t in self.pot1.terms]
        return self.pot0.with_terms(terms, "path-derivative").merged()

    def eig(self, s: float):
        key = ("eig", round(float(s), 15))
        if key not in self._cache:
            if len(self._cache) > 64:
                self._cache = {"H": self._cache["H"]} if "H" in self._cache else {}
            self._cache[key] = ops.eigh(self.hamiltonian(s))
        return self._cache[key]

    def gap(self, s: float) -> float:
        e, _ = self.eig(s)
        return float(e[1] - e[0])

    def sub(self, s0: float, s1: float) -> "QAPath":
        return QAPath(self.pot0, self.pot1, (self.u(s0), self.u(s1)), {"H": self.endpoints()})

    def reversed(self) -> "QAPath":
        return QAPath(self.pot0, self.pot1, (self.interval[1], self.interval[0]), {"H": self.endpoints()})

    def validate(self, grid: Sequence[float], floor: float = 1e-8) -> np.ndarray:
        """Gaps along ``grid``; raises :class:`PathError` when one falls to ``floor``."""
        gaps = []
        last = None
        for s in grid:
            g = self.gap(s)
            if g <= floor:
                raise PathError(f"gap {g:.3e} at s={s}; last valid s={last}")
            gaps.append(g)
            last = float(s)
        return np.array(gaps)


def tfim_path(L: int, g0: float, g1: float, J: float = 1.0, nu: int = 1, periodic: bool = True) -> QAPath:
    spec = LatticeSpec(nu, L, periodic)
    return QAPath(tfim(spec, J, g0), tfim(spec, J, g1))


def derivative_constant(path: QAPath, grid: Sequence[float]) -> float:
    """Largest ``max_X ||dPhi_X/ds|| / max_X ||Phi_X(s)||`` over ``grid``.

    The path family requires the derivative of the potential to be bounded by
    a fixed multiple of the potential itself; for linear interpolation this is
    checked here rather than assumed.
    """
    top = path.derivative_potential().uniform_bound()
    return float(max(top / max(path.potential(s).uniform_bound(), 1e-300) for s in grid))


def ground_state(path: QAPath, s: float) -> np.ndarray:
    return path.eig(s)[1][:, 0]


def qac_generator(path: QAPath, s: float, filt: FilterFunction) -> np.ndarray:
    """Exact generator ``K(s)``; requires the gap at ``s`` to be at least ``filt.Delta``."""
    e, v = path.eig(s)
    gap = float(e[1] - e[0])
    if gap < filt.Delta * (1 - 1e-12):
        raise PathError(f"gap {gap:.4g} at s={s} is below the filter scale {filt.Delta:.4g}")
    return filtered_operator(e, v, path.derivative(), filt)


def aligned(reference, psi) -> np.ndarray:
    """``psi`` times the phase that makes its overlap with ``reference`` real and positive."""
    ov = np.vdot(reference, psi)
    return psi * (np.conj(ov) / abs(ov)) if abs(ov) > 0 else psi


def ground_state_derivative(path: QAPath, s: float, h: float = 1e-3) -> np.ndarray:
    """Five-point stencil of the phase-aligned ground state."""
    psi = ground_state(path, s)
    st = {k: aligned(psi, ground_state(path, s + k * h)) for k in (-2, -1, 1, 2)}
    return (st[-2] - 8 * st[-1] + 8 * st[1] - st[2]) / (12 * h)


def tangency_residual(path: QAPath, s: float, filt: FilterFunction, h: float = 1e-3) -> dict:
    """``||iK psi_0 - d psi_0/ds||`` and the scale it is judged against."""
    psi = ground_state(path, s)
    k = qac_generator(path, s, filt)
    deriv = ground_state_derivative(path, s, h)
    res = float(np.linalg.norm(1j * (k @ psi) - deriv))
    dn = float(np.linalg.norm(deriv))
    herm = float(np.abs(k - k.conj().T).max())
    return {"s": float(s), "residual": res, "derivative_norm": dn, "scale": max(1.0, dn), "hermiticity": herm}


# ---------------------------------------------------------------------------
# truncated generators
# ---------------------------------------------------------------------------

def _factors_at(pot: Potential, sites) -> list[int]:
    sites = set(sites)
    return [f for f, pos in enumerate(pot.positions) if pos in sites]


def _embed_local(m, support, target, dims) -> np.ndarray:
    """Embed a matrix on ``support`` into the register ``target`` (both sorted factor lists)."""
    pos = {f: i for i, f in enumerate(target)}
    return ops.embed(m, [pos[f] for f in support], [dims[f] for f in target])


def truncated_generators(path: QAPath, s: float, filt: FilterFunction, center: int, r_max: int | None = None) -> dict:
    """Telescoping quasi-local pieces ``k_r`` of the per-term generator anchored at ``center``.

    ``k_r = F^{L_r}(dh) - F^{L_(r-1)}(dh)`` where ``F^{L}`` filters with the
    Hamiltonian restricted to ``L_r = ball(center, r)`` plus the support of
    the derivative term ``dh``.
    """
    pot = path.potential(s)
    spec = pot.spec
    if spec is None:
        raise UsageError("truncated generators need lattice geometry")
    half = spec.L // 2
    r_max = half if r_max is None else int(r_max)
    if r_max > half:
        raise DomainError(f"r_max={r_max} exceeds L/2={half}")
    dpot = path.derivative_potential()
    dterms = [t for t in dpot.terms if t.anchor == center]
    d_support, d_local = local_sum(dterms, pot.dims)
    center_site = spec.site(center)
    prev = None
    pieces, norms, regions = [], [], []
    for r in range(r_max + 1):
        sites = set(spec.index(x) for x in ball(center_site, r, spec).sites)
        region = sorted(set(_factors_at(pot, sites)) | set(d_support))
        local_pot = pot.restricted(region)
        sub_dims = [pot.dims[f] for f in region]
        if math.prod(sub_dims) > ops.DIM_CAP:
            raise UsageError("truncation region exceeds the dimension cap")
        pos = {f: i for i, f in enumerate(region)}
        h_local = np.zeros((math.prod(sub_dims),) * 2, dtype=complex)
        for t in local_pot.terms:
            h_local += ops.embed(t.op, [pos[f] for f in t.sites], sub_dims)
        e, v = ops.eigh(h_local)
        dh = _embed_local(d_local, d_support, region, pot.dims) if d_support else np.zeros_like(h_local)
        f_r = filtered_operator(e, v, dh, filt)
        if prev is None:
            k_r = f_r
        else:
            prev_region, prev_f = prev
            k_r = f_r - _embed_local(prev_f, prev_region, region, pot.dims)
        pieces.append((region, k_r))
        norms.append(ops.hermitian_norm(k_r))
        regions.append(region)
        prev = (region, f_r)
    radii = np.arange(r_max + 1)
    fit_mask = radii >= 2
    slope = None
    nz = np.array(norms) > 0
    if np.sum(fit_mask & nz) >= 2:
        slope = float(np.polyfit(np.log(radii[fit_mask & nz]), np.log(np.array(norms)[fit_mask & nz]), 1)[0])
    return {"s": float(s), "center": int(center), "norms": norms, "regions": regions,
            "pieces": pieces, "slope": slope, "full": prev}


def telescoping_defect(result: dict, path: QAPath, s: float, filt: FilterFunction) -> float:
    """``||sum_r k_r - F^{L_rmax}(dh)||``; zero up to rounding by construction."""
    region, f_last = result["full"]
    total = np.zeros_like(f_last)
    dims = path.dims
    for reg, k in result["pieces"]:
        total += _embed_local(k, reg, region, dims)
    return float(np.abs(total - f_last).max())


def per_term_generator(path: QAPath, s: float, filt: FilterFunction, center: int) -> np.ndarray:
    """Filter of the derivative term at ``center`` with the full Hamiltonian."""
    dpot = path.derivative_potential()
    dterms = [t for t in dpot.terms if t.anchor == center]
    dh = np.zeros((math.prod(path.dims),) * 2, dtype=complex)
    for t in dterms:
        dh += ops.embed(t.op, t.sites, path.dims)
    e, v = path.eig(s)
    return filtered_operator(e, v, dh, filt)


def generator_constant(path: QAPath, s: float, filt: FilterFunction, centers: Sequence[int] | None = None,
                       sie_constant: float = SIE_CONSTANT) -> dict:
    """``C(s) = 2 c log d sum_r (2r+1)^(2 nu) max_v ||k_{v,r}(s)||``."""
    pot = path.pot0
    spec = pot.spec
    if centers is None:
        centers = translation_centers(path)
    worst: dict[int, float] = {}
    for c in centers:
        res = truncated_generators(path, s, filt, c)
        for r, n in enumerate(res["norms"]):
            worst[r] = max(worst.get(r, 0.0), n)
    series = float(sum(ball_cap(r, spec.nu) ** 2 * n for r, n in worst.items()))
    log_d = math.log(max(pot.dims))
    return {"s": float(s), "norms": [worst[r] for r in sorted(worst)], "series": series,
            "C": 2 * sie_constant * log_d * series}


def translation_centers(path: QAPath) -> list[int]:
    """One anchor when both endpoints are translation invariant, every anchor otherwise."""
    anchors = sorted({t.anchor for t in path.derivative_potential().terms})
    spec = path.pot0.spec
    if spec is not None and spec.periodic and path.pot0.positions == tuple(range(spec.n_sites)):
        h0, h1 = path.endpoints()
        if max(translation_defect(h0, spec), translation_defect(h1, spec)) < 1e-10:
            return anchors[:1]
    return anchors


# ---------------------------------------------------------------------------
# transport
# ---------------------------------------------------------------------------

def polar_unitary(m) -> np.ndarray:
    u, _, vh = np.linalg.svd(m)
    return u @ vh


@dataclass
class TransportResult:
    s: list
    gap: list
    fidelity: list
    entropy: list
    rate: list
    C: list
    area: int
    unitarity_defect: float
    delta_S: float
    C_max: float
    violations: list
    params: dict = field(default_factory=dict)
    consistency: float | None = None

    def rows(self) -> list[dict]:
        return [{"s": s, "gap": g, "fidelity": f, "S_B1": e, "dS_ds": r, "CA": c * self.area}
                for s, g, f, e, r, c in zip(self.s, self.gap, self.fidelity, self.entropy, self.rate, self.C)]

    def to_json(self) -> dict:
        return {"params": self.params, "area": self.area, "C_max": self.C_max, "bound": self.C_max * self.area,
                "delta_S": self.delta_S, "final_fidelity": self.fidelity[-1],
                "min_fidelity": min(self.fidelity), "unitarity_defect": self.unitarity_defect,
                "consistency": self.consistency, "violations": self.violations, "trace": self.rows()}


def _integrate(path: QAPath, filt: FilterFunction, steps: int, on_step=None) -> np.ndarray:
    dim = math.prod(path.dims)
    U = np.eye(dim, dtype=complex)
    h = 1.0 / steps
    k_next = qac_generator(path, 0.0, filt)
    for n in range(steps):
        s = n * h
        k0 = k_next
        kmid = qac_generator(path, s + h / 2, filt)
        k_next = qac_generator(path, s + h, filt)
        a1 = 1j * k0 @ U
        a2 = 1j * kmid @ (U + h / 2 * a1)
        a3 = 1j * kmid @ (U + h / 2 * a2)
        a4 = 1j * k_next @ (U + h * a3)
        U = polar_unitary(U + h / 6 * (a1 + 2 * a2 + 2 * a3 + a4))
        if on_step is not None:
            on_step(s + h, U, k_next)
    return U


def transport(path: QAPath, filt: FilterFunction | None, region: Region, steps: int = 200,
              gap_fraction: float = 0.95, constant_every: int = 1, consistency: bool = True,
              sie_constant: float = SIE_CONSTANT, tol: float = 1e-12,
              sharpness: float = DEFAULT_SHARPNESS) -> TransportResult:
    """Transport the ground state along ``path`` and track the entropy of ``region``.

    When ``filt`` is None the filter scale is ``gap_fraction`` times the
    smallest gap on the step grid, with the given ``sharpness``.
    """
    if steps < 1:
        raise UsageError("steps must be positive")
    grid = np.linspace(0.0, 1.0, steps + 1)
    gaps = path.validate(np.union1d(grid, grid[:-1] + 0.5 / steps))
    if filt is None:
        filt = build_filter(gap_fraction * float(gaps.min()), sharpness)
    pot = path.pot0
    spec = pot.spec
    keep = [f for f, pos in enumerate(pot.positions) if pos in set(region.indices(spec))]
    _, _, area = boundary_and_area(region, spec)
    psi0 = ground_state(path, 0.0)
    centers = translation_centers(path)

    trace = {"s": [], "gap": [], "fidelity": [], "entropy": [], "rate": [], "C": []}
    state = {"defect": 0.0, "last_C": None}

    def record(s, U, K):
        phi = U @ psi0
        trace["s"].append(float(s))
        trace["gap"].append(path.gap(s))
        trace["fidelity"].append(float(min(1.0, abs(np.vdot(ground_state(path, s), phi)))))
        trace["entropy"].append(ops.entanglement_entropy(phi, pot.dims, keep))
        trace["rate"].append(entropy_rate(phi, pot.dims, keep, -K))
        idx = len(trace["s"]) - 1
        if state["last_C"] is None or idx % constant_every == 0 or idx == steps:
            state["last_C"] = generator_constant(path, s, filt, centers, sie_constant)["C"]
        trace["C"].append(state["last_C"])
        state["defect"] = max(state["defect"], float(np.abs(U.conj().T @ U - np.eye(U.shape[0])).max()))

    record(0.0, np.eye(psi0.size, dtype=complex), qac_generator(path, 0.0, filt))
    U = _integrate(path, filt, steps, record)
    delta_s = trace["entropy"][-1] - trace["entropy"][0]
    c_max = max(trace["C"])
    violations = []
    for s, r, c in zip(trace["s"], trace["rate"], trace["C"]):
        if abs(r) > c * area + tol:
            violations.append({"s": s, "rate": r, "bound": c * area, "kind": "rate"})
    if abs(delta_s) > c_max * area + tol:
        violations.append({"delta_S": delta_s, "bound": c_max * area, "kind": "total"})
    cons = None
    if consistency:
        U2 = _integrate(path, filt, 2 * steps)
        cons = float(abs(abs(np.vdot(ground_state(path, 1.0), U2 @ psi0)) - trace["fidelity"][-1]))
    params = {"steps": steps, "filter": filt.to_json(), "interval": list(path.interval),
              "region": [list(x) for x in region.sorted()], "sie_constant": sie_constant,
              "min_gap": float(gaps.min()), "derivative_constant": derivative_constant(path, grid)}
    return TransportResult(trace["s"], trace["gap"], trace["fidelity"], trace["entropy"], trace["rate"],
                           trace["C"], area, state["defect"], float(delta_s), c_max, violations, params, cons)


def transport_unitary(path: QAPath, filt: FilterFunction, steps: int = 200) -> np.ndarray:
    return _integrate(path, filt, steps)
