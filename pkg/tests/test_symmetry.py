from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from urbanretail.errors import ResourceLimitError, UnsupportedGeographyError
from urbanretail.geometry import (
    build_custom, build_ring, build_square_torus, build_tri_torus,
)
from urbanretail.symmetry import (
    PermGroup, canonicalize, canonicalize_state, enumerate_subgroups, invariant_supports,
    lattice_generators, lattice_group, orbit_supports, orbits, trivial_group,
)

SQUARE6_M = {1: 1, 2: 9, 3: 2, 4: 25, 6: 12, 8: 14, 9: 1, 12: 12, 16: 2, 18: 2, 24: 2, 36: 1}
TRI6_M = {1: 1, 2: 6, 3: 7, 4: 11, 6: 13, 8: 6, 9: 3, 12: 10, 16: 1, 18: 3, 24: 2, 27: 1, 36: 1}


@pytest.mark.parametrize("geo, order", [
    (build_square_torus(6), 288), (build_tri_torus(6), 432),
    (build_ring(16), 32), (build_ring(5), 10), (build_square_torus(4), 128),
])
def test_group_orders(geo, order):
    G = lattice_group(geo)
    assert G.order == order
    assert G.is_closed()
    assert np.array_equal(G.elements[0], np.arange(geo.K))


def test_every_element_is_an_automorphism(tri6, tri6_group):
    d = tri6.dist
    for g in tri6_group.elements:
        assert np.array_equal(d[np.ix_(g, g)], d)


def test_custom_geography_unsupported():
    with pytest.raises(UnsupportedGeographyError):
        lattice_group(build_custom([[0, 1], [1, 0]]))


def test_cyclic_six_subgroups():
    C6 = PermGroup.generate([np.roll(np.arange(6), 1)], 6)
    subs = enumerate_subgroups(C6)
    assert sorted(H.order for H in subs) == [1, 2, 3, 6]


def test_klein_four_subgroups():
    V4 = PermGroup.generate([[1, 0, 3, 2], [2, 3, 0, 1]], 4)
    assert V4.order == 4
    assert len(enumerate_subgroups(V4)) == 5


def test_non_solvable_group_uses_join():
    # S5 acting on five points: 156 subgroups
    S5 = PermGroup.generate([[1, 2, 3, 4, 0], [1, 0, 2, 3, 4]], 5)
    assert not S5.is_solvable()
    assert len(enumerate_subgroups(S5)) == 156


def test_subgroup_golden_counts(square6_group, tri6_group):
    assert len(enumerate_subgroups(square6_group)) == 1336
    assert len(enumerate_subgroups(tri6_group)) == 1289


@pytest.mark.parametrize("geo", [build_ring(12), build_square_torus(3), build_square_torus(4),
                                 build_tri_torus(3)])
def test_cyclic_extension_matches_join_oracle(geo):
    G = lattice_group(geo)
    a = {H.elements.tobytes() for H in enumerate_subgroups(G, method="cyclic_extension")}
    b = {H.elements.tobytes() for H in enumerate_subgroups(G, method="join")}
    assert a == b


def test_cap(square6_group):
    with pytest.raises(ResourceLimitError, match="cap"):
        enumerate_subgroups(square6_group, cap=100)


def test_orbit_examples(square6, square6_group):
    assert orbits(trivial_group(36)) == [(i,) for i in range(36)]
    gens = lattice_generators(square6)
    T = PermGroup.generate(gens[:2], 36)
    assert [len(o) for o in orbits(T)] == [36]
    rot = gens[2]
    half = PermGroup.generate([rot[rot]], 36)
    sizes = Counter(len(o) for o in orbits(half))
    assert sizes == {1: 4, 2: 16}


def test_orbits_refine_along_subgroups(square6_group):
    subs = enumerate_subgroups(square6_group)
    rng = np.random.default_rng(1)
    for k in rng.choice(len(subs), 40, replace=False):
        H = subs[k]
        big = [J for J in subs if J.order > H.order and np.all(np.isin(
            [r.tobytes() for r in H.elements], [r.tobytes() for r in J.elements]))][:3]
        for J in big:
            coarse = {i: o for o in orbits(J) for i in o}
            for o in orbits(H):
                assert set(o) <= set(coarse[o[0]])


def test_pattern_counts(square6_patterns, tri6_patterns):
    assert len(square6_patterns) == 83
    assert len(tri6_patterns) == 65
    assert Counter(p.M for p in square6_patterns) == SQUARE6_M
    assert Counter(p.M for p in tri6_patterns) == TRI6_M


def test_ring_two_patterns():
    pats = invariant_supports(build_ring(2))
    assert [p.support for p in pats] == [(0,), (0, 1)]


@pytest.mark.parametrize("geo, mult", [(build_square_torus(4), 8), (build_square_torus(6), 8),
                                       (build_tri_torus(4), 12), (build_tri_torus(6), 12)])
def test_divisibility(geo, mult):
    for p in invariant_supports(geo):
        assert (mult * geo.n**2) % p.M == 0


def test_ids_and_order(square6_patterns):
    assert [p.id for p in square6_patterns] == list(range(1, 84))
    keys = [(p.M, p.support) for p in square6_patterns]
    assert keys == sorted(keys)
    assert square6_patterns[0].M == 1 and square6_patterns[-1].M == 36


def test_canonical_keys_exhaustive(square6_group, square6_patterns):
    keys = {p.support for p in square6_patterns}
    for p in square6_patterns:
        assert canonicalize(p.support, square6_group) == p.support
        images = {tuple(sorted(g[list(p.support)])) for g in square6_group.elements}
        for img in images:
            assert canonicalize(img, square6_group) == p.support
        assert not (images - {p.support}) & keys


def test_corner_canonical(square6_group):
    assert {canonicalize([i], square6_group) for i in range(36)} == {(0,)}


def test_generator_order_independence(tri6):
    G1 = lattice_group(tri6)
    G2 = PermGroup.generate(lattice_generators(tri6)[::-1], 36)
    assert np.array_equal(G1.elements, G2.elements)
    assert orbit_supports(G1) == orbit_supports(G2)


@settings(max_examples=30, deadline=None)
@given(support=st.sets(st.integers(0, 35), min_size=1, max_size=10), k=st.integers(0, 287))
def test_canonicalize_is_invariant(support, k):
    G = _SQ6
    g = G.elements[k]
    img = tuple(sorted(g[list(support)]))
    c = canonicalize(support, G)
    assert canonicalize(img, G) == c
    assert canonicalize(c, G) == c


_SQ6 = lattice_group(build_square_torus(6))


def test_canonicalize_state(square6_group, rng):
    x = rng.dirichlet(np.ones(36))
    g = square6_group.elements[17]
    gx = np.empty_like(x)
    gx[g] = x
    assert np.allclose(canonicalize_state(x, square6_group), canonicalize_state(gx, square6_group))


def test_negative_control_non_orbit(square6_patterns):
    # two adjacent zones plus one far zone is not an orbit of any subgroup
    keys = {p.support for p in square6_patterns}
    assert canonicalize([0, 1, 21], _SQ6) not in keys
