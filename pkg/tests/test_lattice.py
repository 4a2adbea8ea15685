import itertools
from collections import deque

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from entlab import lattice as lat
from entlab.errors import DomainError, UsageError

seeds = st.integers(0, 2**32 - 1)
specs = st.builds(lat.LatticeSpec, st.integers(1, 2), st.integers(3, 7), st.booleans())


def bfs_distances(spec, source):
    """Graph distances over nearest-neighbour moves; independent of the closed-form metric."""
    dist = {source: 0}
    queue = deque([source])
    while queue:
        x = queue.popleft()
        for y in spec.neighbours(x):
            if y not in dist:
                dist[y] = dist[x] + 1
                queue.append(y)
    return dist


def wrap_oracle(x, y, L):
    return min(sum(abs(a - b + n * L) for a, b, n in zip(x, y, shift))
               for shift in itertools.product((-1, 0, 1), repeat=len(x)))


def test_distance_examples():
    assert lat.torus_distance((3,), (3,), lat.LatticeSpec(1, 10)) == 0
    assert lat.torus_distance((1,), (9,), lat.LatticeSpec(1, 10)) == 2
    assert lat.torus_distance((0, 0), (3, 5), lat.LatticeSpec(2, 6)) == 4
    assert lat.torus_distance((1,), (9,), lat.LatticeSpec(1, 10, periodic=False)) == 8


@pytest.mark.parametrize("spec", [lat.LatticeSpec(1, 9), lat.LatticeSpec(2, 5), lat.LatticeSpec(2, 4, False),
                                  lat.LatticeSpec(3, 3)])
def test_distance_matrix_matches_bfs(spec):
    dm = lat.distance_matrix(spec)
    for i, x in enumerate(spec.sites()):
        ref = bfs_distances(spec, x)
        assert all(dm[i, spec.index(y)] == d for y, d in ref.items())
    if spec.periodic:
        x, y = spec.sites()[1], spec.sites()[-1]
        assert lat.torus_distance(x, y, spec) == wrap_oracle(x, y, spec.L)


def test_ball_sizes():
    assert lat.ball((4,), 0, lat.LatticeSpec(1, 10)).sites == {(4,)}
    assert len(lat.ball((0,), 2, lat.LatticeSpec(1, 10))) == 5
    assert len(lat.ball((3, 3), 1, lat.LatticeSpec(2, 8))) == 5
    assert len(lat.ball((0, 0), 2, lat.LatticeSpec(2, 8))) <= lat.ball_cap(2, 2)
    with pytest.raises(DomainError):
        lat.ball((0,), -1, lat.LatticeSpec(1, 4))


def test_boundary_examples():
    chain = lat.LatticeSpec(1, 10)
    b1, b2, area = lat.boundary_and_area(lat.Region.slab("0..4", chain), chain)
    assert b1.sites == {(0,), (4,)} and b2.sites == {(5,), (9,)} and area == 2
    sq = lat.LatticeSpec(2, 5)
    b1, b2, area = lat.boundary_and_area(lat.Region.from_coords([(2, 2)], sq), sq)
    assert len(b1) == 1 and len(b2) == 4 and area == 4
    torus = lat.LatticeSpec(2, 4)
    assert lat.boundary_and_area(lat.Region.slab("0..1 x 0..3", torus), torus)[2] == 8


def test_region_errors():
    spec = lat.LatticeSpec(1, 4)
    with pytest.raises(DomainError):
        lat.boundary_and_area(lat.Region(frozenset()), spec)
    with pytest.raises(DomainError):
        lat.boundary_and_area(lat.Region(frozenset(spec.sites())), spec)
    with pytest.raises(UsageError):
        lat.Region.slab("0..1 x 0..1", spec)
    with pytest.raises(DomainError):
        lat.Region.slab("0..7", spec)
    with pytest.raises(UsageError):
        lat.LatticeSpec(1, 1)


def test_profile_on_chain():
    spec = lat.LatticeSpec(1, 10)
    prof = lat.boundary_profile(lat.Region.slab("0..4", spec), spec, 6)
    assert np.all(np.diff(prof) <= 4)
    assert prof[-1] == 10
    rows = lat.profile_rows(lat.Region.slab("0..4", spec), spec, 3)
    assert rows[0] == {"r": 0, "M": 4, "bound": 4}
    opp = lat.boundary_profile(lat.Region.slab("0..4", spec), spec, 6, lat.OPPOSING)
    assert opp[0] == 0 and opp[1] == 4


def test_reproducing_constants():
    spec = lat.LatticeSpec(1, 16)
    assert lat.reproducing_check(lambda r: 1.0, spec) == pytest.approx(16)
    assert lat.reproducing_check(lambda r: 1.0, lat.LatticeSpec(2, 5)) == pytest.approx(25)
    power = lat.reproducing_check(lat.power_decay(3), spec)
    assert np.isfinite(power) and power < 10
    growth = lat.reproducing_growth(lat.exp_decay(1.0), 1, [8, 16, 32])
    assert growth["non_reproducing"]
    assert growth["lambda"][0] < growth["lambda"][1] < growth["lambda"][2]
    assert not lat.reproducing_growth(lat.power_decay(3), 1, [16, 32, 64])["non_reproducing"]
    with pytest.raises(DomainError):
        lat.reproducing_check(lambda r: 0.0 if r == 3 else 1.0, spec)


def test_reproducing_fft_matches_direct():
    spec = lat.LatticeSpec(2, 48)  # 2304 sites takes the FFT route
    K = lat.power_decay(3)
    fft = lat.reproducing_check(K, spec)
    k = np.array([K(d) for d in range(spec.diameter + 1)])
    d0 = lat.distances_from((0, 0), spec)
    direct = max(np.sum(k[d0] * k[lat.distances_from(spec.site(j), spec)]) / k[d0[j]]
                 for j in range(0, spec.n_sites, 97))
    assert fft >= direct - 1e-9


@given(specs, seeds)
def test_metric_axioms(spec, seed):
    rng = np.random.default_rng(seed)
    sites = spec.sites()
    for _ in range(50):
        x, y, z = (sites[i] for i in rng.integers(len(sites), size=3))
        dxy = lat.torus_distance(x, y, spec)
        assert dxy == lat.torus_distance(y, x, spec)
        assert (dxy == 0) == (x == y)
        assert dxy <= lat.torus_distance(x, z, spec) + lat.torus_distance(z, y, spec)


@given(specs, seeds)
def test_boundaries_disjoint_and_crossed(spec, seed):
    rng = np.random.default_rng(seed)
    region = lat.random_region(spec, rng)
    other = region.complement(spec)
    b1, b2, _ = lat.boundary_and_area(region, spec)
    assert not b1.sites & b2.sites
    assert b1.sites <= region.sites and b2.sites <= other.sites
    x = sorted(region.sites)[int(rng.integers(len(region)))]
    y = sorted(other.sites)[int(rng.integers(len(other)))]
    # walk a random shortest path from x to y
    path, cur = [x], x
    while cur != y:
        d = lat.torus_distance(cur, y, spec)
        steps = [n for n in spec.neighbours(cur) if lat.torus_distance(n, y, spec) == d - 1]
        cur = steps[int(rng.integers(len(steps)))]
        path.append(cur)
    assert any(s in b1.sites for s in path) and any(s in b2.sites for s in path)


@given(specs, seeds, st.sampled_from([lat.OWN, lat.OPPOSING]))
def test_profile_bound(spec, seed, convention):
    region = lat.random_region(spec, np.random.default_rng(seed))
    _, _, area = lat.boundary_and_area(region, spec)
    prof = lat.boundary_profile(region, spec, spec.diameter, convention)
    for r, m in enumerate(prof):
        assert m <= lat.profile_bound(area, r, spec.nu)
