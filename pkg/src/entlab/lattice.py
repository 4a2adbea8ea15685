"""Geometry of the discrete torus ``Z_L^nu``.

Sites are integer tuples, flattened row-major (last coordinate fastest) when
a linear index is needed.  The metric is the L1 shortest-path distance with
wrap-around, or the plain L1 distance when ``periodic=False``.
"""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DomainError, UsageError

OWN = "own"
OPPOSING = "opposing"


@dataclass(frozen=True)
class LatticeSpec:
    nu: int
    L: int
    periodic: bool = True

    def __post_init__(self):
        if self.nu < 1:
            raise UsageError("lattice dimension must be at least 1")
        if self.L < 2:
            raise UsageError("side length must be at least 2")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.L,) * self.nu

    @property
    def n_sites(self) -> int:
        return self.L**self.nu

    @property
    def diameter(self) -> int:
        return self.nu * (self.L // 2 if self.periodic else self.L - 1)

    def sites(self) -> list[tuple[int, ...]]:
        return list(itertools.product(range(self.L), repeat=self.nu))

    def check(self, x) -> tuple[int, ...]:
        x = tuple(int(c) for c in x)
        if len(x) != self.nu or any(c < 0 or c >= self.L for c in x):
            raise DomainError(f"site {x} outside the lattice {self.shape}")
        return x

    def index(self, x) -> int:
        return int(np.ravel_multi_index(self.check(x), self.shape))

    def site(self, i: int) -> tuple[int, ...]:
        return tuple(int(c) for c in np.unravel_index(int(i), self.shape))

    def coords(self) -> np.ndarray:
        """All sites as an ``(n_sites, nu)`` integer array in index order."""
        return np.array(self.sites(), dtype=int).reshape(-1, self.nu)

    def neighbours(self, x) -> list[tuple[int, ...]]:
        x = self.check(x)
        out = set()
        for axis in range(self.nu):
            for step in (-1, 1):
                c = x[axis] + step
                if self.periodic:
                    c %= self.L
                elif not 0 <= c < self.L:
                    continue
                y = x[:axis] + (c,) + x[axis + 1:]
                if y != x:
                    out.add(y)
        return sorted(out)

    def translate(self, x, shift) -> tuple[int, ...]:
        if not self.periodic:
            raise UsageError("translations need periodic boundaries")
        return tuple((a + b) % self.L for a, b in zip(x, shift))


def torus_distance(x, y, spec: LatticeSpec) -> int:
    x, y = spec.check(x), spec.check(y)
    total = 0
    for a, b in zip(x, y):
        d = abs(a - b)
        total += min(d, spec.L - d) if spec.periodic else d
    return total


def distance_matrix(spec: LatticeSpec) -> np.ndarray:
    """Pairwise distances between all sites in index order."""
    c = spec.coords()
    diff = np.abs(c[:, None, :] - c[None, :, :])
    if spec.periodic:
        diff = np.minimum(diff, spec.L - diff)
    return diff.sum(axis=-1)


def distances_from(x, spec: LatticeSpec) -> np.ndarray:
    c = spec.coords()
    diff = np.abs(c - np.asarray(spec.check(x)))
    if spec.periodic:
        diff = np.minimum(diff, spec.L - diff)
    return diff.sum(axis=-1)


@dataclass(frozen=True)
class Region:
    sites: frozenset

    def __post_init__(self):
        object.__setattr__(self, "sites", frozenset(tuple(int(c) for c in s) for s in self.sites))

    def __len__(self):
        return len(self.sites)

    def __iter__(self):
        return iter(sorted(self.sites))

    def __contains__(self, x):
        return tuple(x) in self.sites

    def sorted(self) -> list[tuple[int, ...]]:
        return sorted(self.sites)

    def complement(self, spec: LatticeSpec) -> "Region":
        return Region(frozenset(spec.sites()) - self.sites)

    def indices(self, spec: LatticeSpec) -> list[int]:
        return [spec.index(s) for s in self.sorted()]

    @classmethod
    def from_coords(cls, coords: Iterable, spec: LatticeSpec) -> "Region":
        out = []
        for c in coords:
            c = (c,) if np.isscalar(c) else c
            out.append(spec.check(c))
        return cls(frozenset(out))

    @classmethod
    def slab(cls, text: str, spec: LatticeSpec) -> "Region":
        """Parse an axis-aligned slab such as ``"0..4"`` or ``"0..1 x 2..3"``."""
        parts = [p.strip() for p in re.split(r"[x×]", text) if p.strip()]
        if len(parts) != spec.nu:
            raise UsageError(f"slab {text!r} needs {spec.nu} ranges")
        ranges = []
        for part in parts:
            m = re.fullmatch(r"(-?\d+)\s*(?:\.\.\s*(-?\d+))?", part)
            if not m:
                raise UsageError(f"cannot parse range {part!r}")
            lo = int(m.group(1))
            hi = int(m.group(2)) if m.group(2) is not None else lo
            if lo > hi:
                raise UsageError(f"empty range {part!r}")
            ranges.append(range(lo, hi + 1))
        return cls.from_coords(itertools.product(*ranges), spec)


def ball(v, r: int, spec: LatticeSpec) -> Region:
    """Sites within distance ``r`` of ``v``."""
    if r < 0:
        raise DomainError("radius must be non-negative")
    d = distances_from(v, spec)
    return Region(frozenset(spec.site(i) for i in np.flatnonzero(d <= r)))


def ball_cap(r: int, nu: int) -> int:
    """Polynomial cap ``(2r+1)^nu`` on ball sizes."""
    return (2 * r + 1) ** nu


def _proper(region: Region, spec: LatticeSpec) -> Region:
    for s in region.sites:
        spec.check(s)
    if len(region) == 0 or len(region) == spec.n_sites:
        raise DomainError("region must be a proper nonempty subset")
    return region.complement(spec)


def boundary_and_area(region: Region, spec: LatticeSpec) -> tuple[Region, Region, int]:
    """Inner boundaries of both sides and the area ``max(|dB1|, |dB2|)``."""
    other = _proper(region, spec)

    def inner(side, rest):
        return Region(frozenset(s for s in side.sites if any(n in rest.sites for n in spec.neighbours(s))))

    b1, b2 = inner(region, other), inner(other, region)
    return b1, b2, max(len(b1), len(b2))


def boundary_distances(region: Region, spec: LatticeSpec, convention: str = OWN) -> np.ndarray:
    """``m(v)`` for every site in index order.

    ``own``: distance to the boundary of the side containing ``v`` (so
    boundary sites have ``m = 0``).  ``opposing``: distance to the boundary of
    the other side.
    """
    b1, b2, _ = boundary_and_area(region, spec)
    dist = distance_matrix(spec)
    in_region = np.zeros(spec.n_sites, dtype=bool)
    in_region[region.indices(spec)] = True
    d1 = dist[:, b1.indices(spec)].min(axis=1)
    d2 = dist[:, b2.indices(spec)].min(axis=1)
    if convention == OWN:
        return np.where(in_region, d1, d2)
    if convention == OPPOSING:
        return np.where(in_region, d2, d1)
    raise UsageError(f"unknown convention {convention!r}")


def boundary_profile(region: Region, spec: LatticeSpec, r_max: int, convention: str = OWN) -> np.ndarray:
    """``M(r) = #{v : m(v) <= r}`` for ``r = 0..r_max``."""
    if r_max < 0:
        raise DomainError("r_max must be non-negative")
    m = boundary_distances(region, spec, convention)
    return np.array([int(np.sum(m <= r)) for r in range(r_max + 1)])


def profile_bound(area: int, r: int, nu: int) -> int:
    return 2 * area * ball_cap(r, nu)


def profile_rows(region: Region, spec: LatticeSpec, r_max: int, convention: str = OWN) -> list[dict]:
    """``(r, M(r), bound)`` rows for CSV export."""
    _, _, area = boundary_and_area(region, spec)
    prof = boundary_profile(region, spec, r_max, convention)
    return [{"r": r, "M": int(m), "bound": profile_bound(area, r, spec.nu)} for r, m in enumerate(prof)]


def _decay_values(K, distances: np.ndarray) -> np.ndarray:
    if callable(K):
        vals = np.array([float(K(int(d))) for d in range(int(distances.max()) + 1)])
    else:
        vals = np.asarray(K, dtype=float)
        if vals.size <= distances.max():
            raise UsageError("decay samples do not cover the lattice diameter")
    used = np.unique(distances)
    if np.any(vals[used] <= 0):
        raise DomainError("decay function must be positive on achieved distances")
    return vals[distances]


def reproducing_check(K, spec: LatticeSpec) -> float:
    """Smallest ``lam`` with ``sum_x K(d(v,x)) K(d(x,w)) <= lam K(d(v,w))`` for all ``v, w``.

    ``K`` is a callable of the integer distance or an array indexed by it.
    On the torus ``v`` is fixed at the origin and the sum is a circular
    convolution.
    """
    if not spec.periodic or spec.n_sites <= 2048:
        # direct double sum; exact for rapidly decaying K where FFT rounding would dominate
        k = _decay_values(K, distance_matrix(spec))
        if spec.periodic:
            return float(np.max((k[0] @ k) / k[0]))
        return float(np.max((k @ k) / k))
    origin = (0,) * spec.nu
    k = _decay_values(K, distances_from(origin, spec)).reshape(spec.shape)
    conv = np.fft.ifftn(np.fft.fftn(k) ** 2).real
    return float(np.max(conv / k))


def reproducing_growth(K, nu: int, Ls: Sequence[int], tol: float = 0.2) -> dict:
    """``lam`` across side lengths; flags growth that has not levelled off."""
    lams = [reproducing_check(K, LatticeSpec(nu, L)) for L in Ls]
    growth = lams[-1] / lams[-2] - 1 if len(lams) > 1 else 0.0
    return {"L": list(Ls), "lambda": lams, "last_growth": growth, "non_reproducing": growth > tol}


def power_decay(a: float) -> Callable[[int], float]:
    return lambda r: (1.0 + r) ** (-a)


def exp_decay(mu: float) -> Callable[[int], float]:
    return lambda r: math.exp(-mu * r)


def random_region(spec: LatticeSpec, rng: np.random.Generator) -> Region:
    """Random proper region: a slab, a ball or a random site subset."""
    kind = int(rng.integers(3))
    sites = spec.sites()
    if kind == 0:
        lo = [int(rng.integers(spec.L)) for _ in range(spec.nu)]
        hi = [lo[i] + int(rng.integers(spec.L - 1)) for i in range(spec.nu)]
        chosen = {tuple(c % spec.L for c in t) for t in itertools.product(*[range(a, b + 1) for a, b in zip(lo, hi)])}
    elif kind == 1:
        v = sites[int(rng.integers(len(sites)))]
        chosen = set(ball(v, int(rng.integers(spec.diameter)), spec).sites)
    else:
        mask = rng.random(len(sites)) < rng.uniform(0.1, 0.9)
        chosen = {s for s, m in zip(sites, mask) if m}
    if not chosen or len(chosen) == len(sites):
        chosen = {sites[0]}
    return Region(frozenset(chosen))
