import json
import math

import numpy as np
import pytest

from urbanretail.errors import GeographyError
from urbanretail.geometry import (
    ModelParams, build_custom, build_ring, build_square_torus, build_tri_torus,
    geography_to_dict, load_geography, parse_geo, proximity, save_geography,
)


def test_ring_two_zones():
    g = build_ring(2)
    assert g.dist.tolist() == [[0, 1], [1, 0]]
    assert np.allclose(g.demand, 0.5) and g.kappa == 1.0


def test_ring_sixteen_wraparound():
    g = build_ring(16)
    assert g.zone_distance(1, 9) == 8
    assert g.zone_distance(1, 16) == 1


@pytest.mark.parametrize("pair, d", [((1, 2), 1), ((1, 9), 3), ((1, 36), 2), ((1, 28), 5), ((1, 7), 1)])
def test_square_distances(square6, pair, d):
    assert square6.zone_distance(*pair) == d


def test_square_max_distance(square6):
    assert square6.dist.max() == 6
    assert square6.zone_distance(1, 22) == 6


def test_square_matches_wraparound_l1():
    n = 5
    g = build_square_torus(n)
    for a in range(n * n):
        for b in range(n * n):
            dr, dc = abs(a // n - b // n), abs(a % n - b % n)
            assert g.dist[a, b] == min(dr, n - dr) + min(dc, n - dc)


def test_ring_matches_closed_form():
    K = 11
    g = build_ring(K)
    i, j = np.meshgrid(np.arange(K), np.arange(K), indexing="ij")
    assert np.array_equal(g.dist, np.minimum(abs(i - j), K - abs(i - j)))


def test_tri_six_neighbours(tri6):
    assert all(len(tri6.neighbours(i)) == 6 for i in range(tri6.K))


def test_tri_max_distance_golden(tri6):
    # frozen from the BFS builder
    assert tri6.dist.max() == 4


@pytest.mark.parametrize("builder", [build_ring, build_square_torus, build_tri_torus])
@pytest.mark.parametrize("n", [2, 3, 4, 5, 6, 7, 8])
def test_builders_are_metrics(builder, n):
    d = builder(n).dist
    assert np.array_equal(d, d.T) and np.all(np.diag(d) == 0)
    via = (d[:, :, None] + d[None, :, :]).min(axis=1)  # min_k d[i,k] + d[k,j]
    assert np.all(d <= via)


@pytest.mark.parametrize("builder", [build_square_torus, build_tri_torus])
def test_vertex_transitive_rows(builder):
    d = builder(6).dist
    rows = {tuple(sorted(r)) for r in d.tolist()}
    assert len(rows) == 1


@pytest.mark.parametrize("builder, bad", [(build_ring, 1), (build_square_torus, 1), (build_tri_torus, 0)])
def test_too_small(builder, bad):
    with pytest.raises(GeographyError):
        builder(bad)


def test_proximity_values(square6):
    assert np.allclose(proximity(build_ring(2), 0.5), [[1, 0.5], [0.5, 1]])
    P = proximity(square6, ModelParams.from_phi(1.2, 0.3))
    assert math.isclose(P[0, 27], 0.3**5)
    assert np.all(proximity(square6, 1 - 1e-12) > 1 - 1e-10)
    assert not P.flags.writeable


def test_proximity_decreasing_in_distance(square6):
    P = proximity(square6, 0.4)
    d = square6.dist
    for k in range(int(d.max())):
        assert P[d == k].min() > P[d == k + 1].max()


def test_params_phi_beta_consistency():
    p = ModelParams(1.2, 2.0)
    assert abs(p.phi - math.exp(-2.0)) < 1e-15
    with pytest.raises(ValueError):
        ModelParams(1.2, 1.0, phi=0.5)
    with pytest.raises(ValueError):
        ModelParams.from_phi(1.2, 1.0)
    with pytest.raises(ValueError):
        ModelParams(-1.0, 1.0)


def test_round_trip(tmp_path, square6):
    p = tmp_path / "g.json"
    save_geography(square6, p, full=True)
    back = load_geography(p)
    assert np.array_equal(back.dist, square6.dist)
    assert np.array_equal(back.demand, square6.demand)
    save_geography(square6, p)
    assert load_geography(p) == square6


def test_custom_rescales_kappa():
    g = build_custom([[0, 2], [2, 0]], demand=[1.0, 3.0], kappa=2.0)
    assert g.kappa == 4.0 and g.kappa_scale == 2.0
    assert g.total_demand / g.kappa == 1.0


@pytest.mark.parametrize("obj, msg", [
    ({"kind": "custom", "dist": [[0, 1], [2, 0]]}, "symmetric"),
    ({"kind": "custom", "dist": [[0, 1], [1, 0]], "demand": [0.5, -0.5]}, "positive"),
    ({"kind": "custom", "dist": [[0, 1, 5], [1, 0, 1], [5, 1, 0]]}, "triangle"),
    ({"kind": "custom", "dist": [[1, 1], [1, 0]]}, "diagonal"),
    ({"kind": "hexagon", "n": 3}, "unknown"),
    ({"kind": "square", "n": "6"}, "integer"),
])
def test_invalid_files(tmp_path, obj, msg):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(obj))
    with pytest.raises(GeographyError, match=msg):
        load_geography(p)


def test_parse_geo_forms(tmp_path):
    assert parse_geo("square:6").K == 36
    assert parse_geo("tri:4").label == "tri:4"
    assert parse_geo("ring:16").K == 16
    p = tmp_path / "r.json"
    p.write_text(json.dumps(geography_to_dict(build_ring(5))))
    assert parse_geo(str(p)) == build_ring(5)
    with pytest.raises(GeographyError):
        parse_geo("square:x")
    with pytest.raises(GeographyError):
        parse_geo("nowhere.json")
