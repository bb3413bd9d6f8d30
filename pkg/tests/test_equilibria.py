import csv
import math

import numpy as np
import pytest

from urbanretail.dynamics import integrate
from urbanretail.equilibria import (
    MARGINAL, STABLE, UNSTABLE, circular_pattern, classify_stability, invariant_potentials,
    make_state, select_global, verify_invariant, write_stability_csv,
)
from urbanretail.geometry import build_ring, build_square_torus, build_tri_torus
from urbanretail.model import RetailModel, tangent_basis
from urbanretail.symmetry import SupportPattern, invariant_supports

PHI_STAR = (1 - math.sqrt(0.2 / 1.2)) / (1 + math.sqrt(0.2 / 1.2))


def test_make_state(square6_patterns):
    full = make_state(square6_patterns[-1], 36)
    assert np.allclose(full.state, 1 / 36)
    corner = make_state(square6_patterns[0], 36)
    assert corner.state.sum() == 1 and np.count_nonzero(corner.state) == 1
    quad = next(p for p in square6_patterns if p.M == 4)
    x = make_state(quad, 36).state
    assert sorted(x[x > 0]) == [0.25] * 4
    with pytest.raises(ValueError):
        make_state(SupportPattern(()), 36)


@pytest.mark.parametrize("phi", [0.1, 0.5, 0.9])
def test_all_square_patterns_are_equilibria(square6, square6_patterns, phi):
    m = RetailModel.from_phi(square6, 1.2, phi)
    for p in square6_patterns:
        chk = verify_invariant(make_state(p, 36), m)
        assert chk.residual <= 1e-10 and chk.share_error <= 1e-12


def test_two_zone_share_exact(two_zone):
    p = SupportPattern((0, 1), 2)
    assert verify_invariant(make_state(p, 2), two_zone).share_error == 0.0


def test_non_orbit_support_fails(square6):
    m = RetailModel.from_phi(square6, 1.2, 0.4)
    # an adjacent pair is one orbit of a reflection, so it still passes
    pair = verify_invariant(make_state(SupportPattern((0, 1)), 36), m)
    assert pair.share_error <= 1e-12
    # a bent triple (middle zone fixed by the swap of its ends) is not one orbit
    bad = verify_invariant(make_state(SupportPattern((0, 1, 7)), 36), m)
    assert bad.share_error > 1e-3 and bad.residual > 1e-3


@pytest.mark.parametrize("geo", [build_ring(16), build_square_torus(6), build_tri_torus(6)])
@pytest.mark.parametrize("alpha", [1.1, 1.2, 2.5])
def test_corner_always_stable(geo, alpha):
    x = np.zeros(geo.K)
    x[0] = 1
    for phi in (0.1, 0.5, 0.9):
        rep = classify_stability(x, RetailModel.from_phi(geo, alpha, phi))
        assert rep.verdict == STABLE and rep.boundary_margin == pytest.approx(-1.0)


@pytest.mark.parametrize("phi, verdict", [(PHI_STAR - 1e-3, STABLE), (PHI_STAR + 1e-3, UNSTABLE),
                                          (0.1, STABLE), (0.9, UNSTABLE)])
def test_two_zone_dispersion(phi, verdict):
    m = RetailModel.from_phi(build_ring(2), 1.2, phi)
    assert classify_stability([0.5, 0.5], m).verdict == verdict


def test_marginal_at_threshold():
    m = RetailModel.from_phi(build_ring(2), 1.2, PHI_STAR)
    rep = classify_stability([0.5, 0.5], m)
    assert abs(rep.interior_max_eig) < 1e-9 and rep.verdict == MARGINAL


def test_circular_patterns_all_stable():
    m = RetailModel.from_phi(build_ring(16), 1.05, 0.1)
    for k in range(5):
        x = circular_pattern(16, k)
        assert m.equilibrium_residual(x) < 1e-12
        assert classify_stability(x, m).verdict == STABLE


def test_circular_pattern_bad_k():
    with pytest.raises(ValueError):
        circular_pattern(12, 3)


@pytest.mark.parametrize("phi, winner", [(0.2, 2), (0.5, 1)])
def test_select_two_zone(phi, winner):
    m = RetailModel.from_phi(build_ring(2), 1.2, phi)
    pats = invariant_supports(m.geo)
    sel = select_global([make_state(p, 2) for p in pats], m)
    assert sel.winner_ids == (winner,)


def test_select_mono_at_high_phi(square6, square6_patterns):
    m = RetailModel.from_phi(square6, 1.2, 0.95)
    sel = select_global([make_state(p, 36) for p in square6_patterns], m)
    assert sel.winner_ids == (1,)


def test_exact_corner_tie(two_zone):
    sel = select_global([("a", [1.0, 0.0]), ("b", [0.0, 1.0]), ("c", [0.5, 0.5])],
                        RetailModel.from_phi(build_ring(2), 1.2, 0.6))
    assert sel.winner_ids == ("a", "b")


def test_selection_invariances(square6, square6_group, square6_patterns):
    m = RetailModel.from_phi(square6, 1.4, 0.2)
    eqs = [make_state(p, 36) for p in square6_patterns]
    base = select_global(eqs, m)
    rev = select_global(eqs[::-1], m)
    assert base.winner_ids == rev.winner_ids
    g = square6_group.elements[101]
    moved = []
    for e in eqs:
        y = np.empty(36)
        y[g] = e.state
        moved.append((e.id, y))
    assert select_global(moved, m).winner_ids == base.winner_ids
    # f and g order the on-simplex candidates identically
    ids = list(base.f)
    assert sorted(ids, key=base.f.get) == sorted(ids, key=base.g.get)


def test_vectorized_potentials_match_direct(square6, square6_patterns):
    phis, alphas = [0.07, 0.5, 0.93], [1.0, 1.7, 3.0]
    F = invariant_potentials(square6, square6_patterns, phis, alphas)
    for i, phi in enumerate(phis):
        for k, a in enumerate(alphas):
            m = RetailModel.from_phi(square6, a, phi)
            for p in square6_patterns[::7]:
                assert F[p.id - 1, i, k] == pytest.approx(m.potential(make_state(p, 36).state).f,
                                                          abs=1e-12)


def _perturb(x, rng, eps=1e-4):
    S = np.flatnonzero(x > 0)
    v = np.zeros_like(x)
    v[S] = tangent_basis(len(S)) @ rng.standard_normal(len(S) - 1)
    y = x + eps * v / np.max(np.abs(v))
    return np.clip(y, 0.0, None) / np.clip(y, 0.0, None).sum()


@pytest.mark.parametrize("pid", [83, 61, 37, 10])
def test_stable_patterns_attract_perturbations(square6, square6_patterns, pid):
    m = RetailModel.from_phi(square6, 1.2, 0.1)
    x = make_state(square6_patterns[pid - 1], 36).state
    assert classify_stability(x, m).verdict == STABLE
    rng = np.random.default_rng(pid)
    for _ in range(10):
        tr = integrate(m, _perturb(x, rng))
        assert np.max(np.abs(tr.final - x)) < 1e-5


def test_unstable_dispersion_escapes():
    m = RetailModel.from_phi(build_ring(2), 1.2, 0.6)
    x = np.array([0.5, 0.5])
    assert classify_stability(x, m).verdict == UNSTABLE
    rng = np.random.default_rng(0)
    escaped = [np.max(np.abs(integrate(m, _perturb(x, rng)).final - x)) > 1e-5 for _ in range(10)]
    assert any(escaped)


def test_stability_csv(tmp_path, two_zone):
    rep = classify_stability([1.0, 0.0], two_zone)
    p = tmp_path / "s.csv"
    write_stability_csv([(1, 1, 0.5, 1.2, rep, -1.28)], p)
    rows = list(csv.reader(open(p)))
    assert rows[0] == ["pattern_id", "M", "phi", "alpha", "boundary_margin",
                       "interior_max_eig", "verdict", "f"]
    assert rows[1][6] == "stable"
