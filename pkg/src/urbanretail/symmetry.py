"""Permutation groups acting on zones, subgroup lattices and orbit supports.

Permutations are integer arrays ``p`` with ``p[i]`` the image of zone ``i``
(0-based). Composition ``p * q`` means "apply q, then p", i.e. ``p[q]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from itertools import product

import numpy as np

from .errors import ResourceLimitError, UnsupportedGeographyError
from .geometry import Geography


def _as_perm(p, degree=None):
    p = np.asarray(p, dtype=np.int64)
    if p.ndim != 1 or (degree is not None and p.size != degree):
        raise ValueError("permutation must be a 1-d array of the group degree")
    if not np.array_equal(np.sort(p), np.arange(p.size)):
        raise ValueError(f"not a permutation: {p.tolist()}")
    return p


def _sort_rows(a):
    a = np.unique(a, axis=0)  # unique also sorts lexicographically
    a.setflags(write=False)
    return a


def closure(generators, degree):
    """All products of ``generators`` (BFS over the Cayley graph)."""
    gens = [_as_perm(g, degree) for g in generators]
    ident = np.arange(degree)
    seen = {ident.tobytes(): ident}
    frontier = [ident]
    while frontier:
        nxt = []
        for h in frontier:
            for g in gens:
                gh = g[h]
                key = gh.tobytes()
                if key not in seen:
                    seen[key] = gh
                    nxt.append(gh)
        frontier = nxt
    return _sort_rows(np.array(list(seen.values())))


class PermGroup:
    """Finite permutation group with all elements materialized.

    Elements are stored as rows of ``elements`` in lexicographic order; the
    identity is therefore row 0.
    """

    def __init__(self, elements, generators=None):
        elements = np.asarray(elements, dtype=np.int64)
        if elements.ndim != 2:
            raise ValueError("elements must be a 2-d array")
        self.elements = _sort_rows(elements)
        self.generators = None if generators is None else [np.asarray(g) for g in generators]

    @classmethod
    def generate(cls, generators, degree):
        gens = [_as_perm(g, degree) for g in generators]
        return cls(closure(gens, degree), gens)

    @property
    def degree(self) -> int:
        return int(self.elements.shape[1])

    @property
    def order(self) -> int:
        return int(self.elements.shape[0])

    def __len__(self):
        return self.order

    def __iter__(self):
        return iter(self.elements)

    def __repr__(self):
        return f"PermGroup(order={self.order}, degree={self.degree})"

    @cached_property
    def _index(self):
        return {row.tobytes(): k for k, row in enumerate(self.elements)}

    def index(self, p) -> int:
        return self._index[np.asarray(p, dtype=np.int64).tobytes()]

    def __contains__(self, p):
        return np.asarray(p, dtype=np.int64).tobytes() in self._index

    @cached_property
    def mul_table(self) -> np.ndarray:
        """``mul_table[a, b]`` is the index of ``elements[a] * elements[b]``."""
        E = self.elements
        idx = self._index
        table = np.empty((self.order, self.order), dtype=np.int64)
        for a in range(self.order):
            prods = E[a][E]
            table[a] = [idx[row.tobytes()] for row in prods]
        return table

    @cached_property
    def inverse(self) -> np.ndarray:
        return np.argmax(self.mul_table == 0, axis=1)

    @cached_property
    def conj_table(self) -> np.ndarray:
        """``conj_table[g, h]`` is the index of ``g h g^-1``."""
        return self.mul_table[self.mul_table, self.inverse[:, None]]

    def is_closed(self) -> bool:
        E = self.elements
        keys = self._index
        for a in E:
            for b in E:
                if a[b].tobytes() not in keys:
                    return False
        return True

    def subgroup(self, indices) -> "PermGroup":
        """Subgroup from row indices of ``elements``."""
        sub = PermGroup(self.elements[np.sort(np.asarray(indices))])
        sub.parent_indices = np.sort(np.asarray(indices))
        return sub

    def orbits(self) -> list[tuple[int, ...]]:
        return orbits(self)

    def is_solvable(self) -> bool:
        return _is_solvable(self)


# -- lattice groups ----------------------------------------------------------


def _coords_perm(n, fn):
    out = np.empty(n * n, dtype=np.int64)
    for r, c in product(range(n), range(n)):
        r2, c2 = fn(r, c)
        out[r * n + c] = (r2 % n) * n + (c2 % n)
    return out


def lattice_generators(geo: Geography) -> list[np.ndarray]:
    """Translations, a point-group rotation and a reflection as zone permutations."""
    if geo.kind == "ring":
        K = geo.K
        i = np.arange(K)
        return [(i + 1) % K, (-i) % K]
    if geo.kind == "square_torus":
        n = geo.n
        return [
            _coords_perm(n, lambda r, c: (r + 1, c)),
            _coords_perm(n, lambda r, c: (r, c + 1)),
            _coords_perm(n, lambda r, c: (c, -r)),  # 90 degrees
            _coords_perm(n, lambda r, c: (c, r)),
        ]
    if geo.kind == "tri_torus":
        n = geo.n
        return [
            _coords_perm(n, lambda r, c: (r + 1, c)),
            _coords_perm(n, lambda r, c: (r, c + 1)),
            _coords_perm(n, lambda r, c: (-c, r + c)),  # 60 degrees
            _coords_perm(n, lambda r, c: (c, r)),
        ]
    raise UnsupportedGeographyError(
        f"no built-in symmetry group for {geo.kind!r} geographies"
    )


def lattice_group(geo: Geography) -> PermGroup:
    """Full symmetry group of a ring, square torus or triangular torus."""
    G = PermGroup.generate(lattice_generators(geo), geo.K)
    d = geo.dist
    for g in G.elements:
        if not np.array_equal(d[np.ix_(g, g)], d):
            raise AssertionError("lattice generator is not a distance automorphism")
    return G


def trivial_group(degree: int) -> PermGroup:
    return PermGroup(np.arange(degree)[None, :])


# -- subgroup enumeration ----------------------------------------------------


def _key(mask):
    return np.packbits(mask).tobytes()


def _generated(G, mask):
    """Closure (as a mask over G's elements) of the elements in ``mask``."""
    mul = G.mul_table
    gens = np.flatnonzero(mask)
    cur = mask.copy()
    cur[0] = True
    frontier = np.flatnonzero(cur)
    while frontier.size:
        prods = np.unique(mul[np.ix_(frontier, gens)])
        new = prods[~cur[prods]]
        cur[new] = True
        frontier = new
    return cur


def _cyclic_masks(G):
    mul = G.mul_table
    seen = {}
    for g in range(G.order):
        mask = np.zeros(G.order, dtype=bool)
        h = 0
        while not mask[h]:
            mask[h] = True
            h = mul[h, g]
        seen.setdefault(_key(mask), mask)
    return list(seen.values())


def _is_solvable(G):
    """Derived series reaches the trivial group."""
    mul, inv = G.mul_table, G.inverse
    current = np.ones(G.order, dtype=bool)
    while True:
        idx = np.flatnonzero(current)
        # commutators a b a^-1 b^-1
        ab = mul[np.ix_(idx, idx)]
        comm = mul[ab, mul[np.ix_(inv[idx], inv[idx])]]
        mask = np.zeros(G.order, dtype=bool)
        mask[np.unique(comm)] = True
        derived = _generated(G, mask)
        if derived.sum() == 1:
            return True
        if derived.sum() == current.sum():
            return False
        current = derived


def _smallest_prime_factor_is_self(k):
    return k > 1 and all(k % p for p in range(2, int(math.isqrt(k)) + 1))


def _subgroups_cyclic_extension(G):
    """Every subgroup of a solvable group, grown from the trivial group.

    A nontrivial subgroup U of a solvable group has a normal subgroup V of
    prime index, so U = <V, g> with g normalizing V and g^p in V. Walking
    subgroups in order of size and extending each by such elements reaches
    every subgroup.
    """
    mul, conj = G.mul_table, G.conj_table
    trivial = np.zeros(G.order, dtype=bool)
    trivial[0] = True
    found = {_key(trivial): trivial}
    layers = {1: [trivial]}
    sizes = [1]
    while sizes:
        size = sizes.pop(0)
        for V in layers.pop(size):
            vidx = np.flatnonzero(V)
            normalizer = V[conj[:, vidx]].all(axis=1)
            covered = V.copy()
            for g in np.flatnonzero(normalizer):
                if covered[g]:
                    continue
                powers = [0, g]
                h = g
                while not V[h]:
                    h = mul[h, g]
                    powers.append(h)
                p = len(powers) - 1  # order of gV in N(V)/V
                if not _smallest_prime_factor_is_self(p):
                    continue
                cosets = mul[np.ix_(vidx, np.array(powers[:p]))].ravel()
                U = np.zeros(G.order, dtype=bool)
                U[cosets] = True
                covered |= U
                k = _key(U)
                if k not in found:
                    found[k] = U
                    m = int(U.sum())
                    if m not in layers:
                        layers[m] = []
                        sizes.append(m)
                        sizes.sort()
                    layers[m].append(U)
    return list(found.values())


def _subgroups_join(G):
    """Every subgroup as an iterated join of cyclic subgroups (any finite group)."""
    cyclic = _cyclic_masks(G)
    found = {_key(c): c for c in cyclic}
    trivial = np.zeros(G.order, dtype=bool)
    trivial[0] = True
    found.setdefault(_key(trivial), trivial)
    frontier = list(found.values())
    while frontier:
        nxt = []
        for H in frontier:
            for C in cyclic:
                if np.all(H[C]):
                    continue
                J = _generated(G, H | C)
                k = _key(J)
                if k not in found:
                    found[k] = J
                    nxt.append(J)
        frontier = nxt
    return list(found.values())


def enumerate_subgroups(G: PermGroup, cap: int = 1000, method: str = "auto") -> list[PermGroup]:
    """All subgroups of ``G``, trivial group and ``G`` included.

    ``method`` is ``"cyclic_extension"`` (solvable groups only),
    ``"join"`` (works for any group, much slower) or ``"auto"``.
    Results are sorted by order, then by element list.
    """
    if G.order > cap:
        raise ResourceLimitError(
            f"group order {G.order} exceeds the cap {cap}; raise it with --group-cap"
        )
    if method == "auto":
        method = "cyclic_extension" if G.is_solvable() else "join"
    if method == "cyclic_extension":
        masks = _subgroups_cyclic_extension(G)
    elif method == "join":
        masks = _subgroups_join(G)
    else:
        raise ValueError(f"unknown method {method!r}")
    masks.sort(key=lambda m: (int(m.sum()), tuple(np.flatnonzero(m))))
    return [G.subgroup(np.flatnonzero(m)) for m in masks]


# -- orbits and supports -----------------------------------------------------


def orbits(H: PermGroup) -> list[tuple[int, ...]]:
    """Orbit partition of ``range(degree)`` under ``H``, each orbit sorted."""
    E = H.elements
    seen = np.zeros(H.degree, dtype=bool)
    out = []
    for i in range(H.degree):
        if not seen[i]:
            orb = np.unique(E[:, i])
            seen[orb] = True
            out.append(tuple(int(j) for j in orb))
    return out


def canonicalize(support, G: PermGroup) -> tuple[int, ...]:
    """Lexicographically smallest sorted image of ``support`` under ``G``."""
    s = np.asarray(sorted(support), dtype=np.int64)
    if s.size == 0:
        raise ValueError("support must be nonempty")
    images = np.sort(G.elements[:, s], axis=1)
    best = np.lexsort(images.T[::-1])[0]
    return tuple(int(v) for v in images[best])


@dataclass(frozen=True)
class SupportPattern:
    """Support of an invariant pattern, in canonical form under the lattice group."""

    support: tuple[int, ...]
    id: int = 0

    @property
    def M(self) -> int:
        return len(self.support)

    @property
    def canonical_key(self) -> tuple[int, ...]:
        return self.support

    def mask(self, K: int) -> np.ndarray:
        m = np.zeros(K, dtype=bool)
        m[list(self.support)] = True
        return m

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "M": self.M,
            "support": [i + 1 for i in self.support],
            "canonical_key": [i + 1 for i in self.canonical_key],
        }


def orbit_supports(G: PermGroup, subgroups=None) -> set[tuple[int, ...]]:
    """Every orbit of every subgroup (raw, before symmetry reduction)."""
    if subgroups is None:
        subgroups = enumerate_subgroups(G)
    out = set()
    for H in subgroups:
        out.update(orbits(H))
    return out


def invariant_supports(geo: Geography, group: PermGroup | None = None,
                       subgroups=None, cap: int = 1000) -> list[SupportPattern]:
    """Supports of invariant patterns up to symmetry.

    Each orbit of each subgroup of the lattice group is a candidate support;
    candidates are reduced to canonical form and sorted by size, then key.
    IDs run from 1 in that order (so ID 1 is a single zone).
    """
    G = lattice_group(geo) if group is None else group
    if subgroups is None:
        subgroups = enumerate_subgroups(G, cap=cap)
    keys = {canonicalize(s, G) for s in orbit_supports(G, subgroups)}
    ordered = sorted(keys, key=lambda k: (len(k), k))
    return [SupportPattern(k, i + 1) for i, k in enumerate(ordered)]


def canonicalize_state(x, G: PermGroup, decimals: int = 6) -> np.ndarray:
    """Representative of ``G``-orbit of a state: lexicographically largest rounded image."""
    x = np.asarray(x, dtype=float)
    images = np.round(x[G.elements], decimals)
    # g acts by x -> x[g]; pick the lexicographic max so large masses come first
    best = np.lexsort((-images).T[::-1])[0]
    return x[G.elements[best]]
