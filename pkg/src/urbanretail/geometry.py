"""Lattice economies and custom geographies.

Zones are 0-based internally. Public helpers that mirror figure numbering
(``zone_distance``) take 1-based zone labels, row-major on the lattices.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GeographyError

KINDS = ("ring", "square_torus", "tri_torus", "custom")

# Neighbour offsets on the (row, col) grid.
SQUARE_OFFSETS = ((1, 0), (-1, 0), (0, 1), (0, -1))
TRI_OFFSETS = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1))


def _frozen(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Geography:
    """Exogenous environment: zones, distances, demand and entry cost.

    ``demand.sum() / kappa == 1`` always holds; custom inputs are brought
    there by rescaling ``kappa`` and the applied factor is kept in
    ``kappa_scale``.
    """

    dist: np.ndarray
    demand: np.ndarray
    kappa: float
    kind: str = "custom"
    n: int | None = None
    kappa_scale: float = 1.0
    adjacency: tuple = field(default=(), repr=False)

    def __post_init__(self):
        object.__setattr__(self, "dist", _frozen(self.dist))
        object.__setattr__(self, "demand", _frozen(np.asarray(self.demand, dtype=float)))
        validate_geography(self)

    @property
    def K(self) -> int:
        return int(self.dist.shape[0])

    @property
    def total_demand(self) -> float:
        return float(self.demand.sum())

    @property
    def is_lattice(self) -> bool:
        return self.kind in ("ring", "square_torus", "tri_torus")

    @property
    def label(self) -> str:
        short = {"ring": "ring", "square_torus": "square", "tri_torus": "tri"}
        if self.is_lattice:
            return f"{short[self.kind]}:{self.n}"
        return f"custom:{self.K}"

    def zone_distance(self, i: int, j: int) -> float:
        """Distance between 1-based zones ``i`` and ``j``."""
        return self.dist[i - 1, j - 1].item()

    def neighbours(self, i: int) -> np.ndarray:
        """0-based zones at distance one from 0-based zone ``i``."""
        return np.flatnonzero(self.dist[i] == 1)

    def __eq__(self, other):
        if not isinstance(other, Geography):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.n == other.n
            and self.kappa == other.kappa
            and np.array_equal(self.dist, other.dist)
            and np.array_equal(self.demand, other.demand)
        )

    __hash__ = object.__hash__


def validate_geography(geo: Geography) -> None:
    """Raise :class:`GeographyError` naming the first violated invariant."""
    d = geo.dist
    if geo.kind not in KINDS:
        raise GeographyError(f"unknown geography kind {geo.kind!r}")
    if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] < 1:
        raise GeographyError(f"dist must be a square matrix, got shape {d.shape}")
    K = d.shape[0]
    if not np.all(np.isfinite(d)):
        raise GeographyError("dist has non-finite entries")
    if np.any(d < 0):
        raise GeographyError("dist has negative entries")
    if not np.array_equal(d, d.T):
        raise GeographyError("dist is not symmetric")
    if np.any(np.diag(d) != 0):
        raise GeographyError("dist has a nonzero diagonal")
    # d[i, j] <= d[i, k] + d[k, j] for every k
    via = (d[:, :, None] + d[None, :, :]).min(axis=1)
    if np.any(d > via + 1e-12 * max(1.0, float(d.max()))):
        raise GeographyError("dist violates the triangle inequality")
    if geo.demand.shape != (K,):
        raise GeographyError(f"demand must have length {K}, got {geo.demand.shape}")
    if not np.all(np.isfinite(geo.demand)) or np.any(geo.demand <= 0):
        raise GeographyError("demand entries must be strictly positive")
    if not (math.isfinite(geo.kappa) and geo.kappa > 0):
        raise GeographyError("kappa must be positive")
    if abs(geo.total_demand / geo.kappa - 1.0) > 1e-12:
        raise GeographyError("demand must satisfy sum(demand) / kappa == 1")


def bfs_distances(adjacency) -> np.ndarray:
    """All-pairs hop counts of an unweighted graph given as adjacency lists."""
    K = len(adjacency)
    dist = np.full((K, K), -1, dtype=np.int64)
    for s in range(K):
        row = dist[s]
        row[s] = 0
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for v in adjacency[u]:
                if row[v] < 0:
                    row[v] = row[u] + 1
                    queue.append(v)
    if np.any(dist < 0):
        raise GeographyError("neighbour graph is disconnected")
    return dist


def _torus_adjacency(n, offsets):
    adj = []
    for r in range(n):
        for c in range(n):
            nb = sorted({((r + dr) % n) * n + (c + dc) % n for dr, dc in offsets} - {r * n + c})
            adj.append(tuple(nb))
    return tuple(adj)


def _uniform(adjacency, kind, n):
    K = len(adjacency)
    return Geography(
        dist=bfs_distances(adjacency),
        demand=np.full(K, 1.0 / K),
        kappa=1.0,
        kind=kind,
        n=n,
        adjacency=adjacency,
    )


def build_ring(K: int) -> Geography:
    """Circular economy of ``K`` equally spaced zones."""
    if int(K) != K or K < 2:
        raise GeographyError(f"ring needs K >= 2, got {K}")
    K = int(K)
    adj = tuple(tuple(sorted({(i - 1) % K, (i + 1) % K})) for i in range(K))
    return _uniform(adj, "ring", K)


def build_square_torus(n: int) -> Geography:
    """``n x n`` square lattice with periodic boundaries, zones row-major."""
    if int(n) != n or n < 2:
        raise GeographyError(f"square torus needs n >= 2, got {n}")
    n = int(n)
    return _uniform(_torus_adjacency(n, SQUARE_OFFSETS), "square_torus", n)


def build_tri_torus(n: int) -> Geography:
    """``n x n`` triangular lattice (six neighbours per zone) on a torus.

    Zone ``r * n + c`` sits at axial coordinate (r, c); the six neighbours
    are the offsets in :data:`TRI_OFFSETS`.
    """
    if int(n) != n or n < 2:
        raise GeographyError(f"triangular torus needs n >= 2, got {n}")
    n = int(n)
    return _uniform(_torus_adjacency(n, TRI_OFFSETS), "tri_torus", n)


def build_custom(dist, demand=None, kappa: float = 1.0) -> Geography:
    """Geography from an explicit distance matrix.

    ``kappa`` is rescaled to ``sum(demand)`` so that total demand over
    entry cost is one; the multiplier is stored as ``kappa_scale``.
    """
    dist = np.asarray(dist, dtype=float)
    if dist.ndim != 2:
        raise GeographyError("dist must be a matrix")
    if np.all(dist == np.round(dist)):
        dist = dist.astype(np.int64)
    K = dist.shape[0]
    demand = np.full(K, 1.0 / K) if demand is None else np.asarray(demand, dtype=float)
    kappa = float(kappa)
    if not (math.isfinite(kappa) and kappa > 0):
        raise GeographyError("kappa must be positive")
    if demand.shape == (K,) and np.all(demand > 0):
        Q = float(demand.sum())
        return Geography(dist=dist, demand=demand, kappa=Q, kappa_scale=Q / kappa)
    return Geography(dist=dist, demand=demand, kappa=kappa)


BUILDERS = {
    "ring": build_ring,
    "square_torus": build_square_torus,
    "tri_torus": build_tri_torus,
}

ALIASES = {
    "ring": "ring",
    "circle": "ring",
    "square": "square_torus",
    "square_torus": "square_torus",
    "sq": "square_torus",
    "tri": "tri_torus",
    "tri_torus": "tri_torus",
    "triangular": "tri_torus",
}


def parse_geo(spec: str) -> Geography:
    """Build from ``kind:n`` (``square:6``, ``tri:6``, ``ring:16``) or a JSON path."""
    if ":" in spec:
        kind, _, size = spec.partition(":")
        if kind.lower() in ALIASES:
            try:
                n = int(size)
            except ValueError:
                raise GeographyError(f"bad lattice size in {spec!r}") from None
            return BUILDERS[ALIASES[kind.lower()]](n)
    path = Path(spec)
    if path.exists():
        return load_geography(path)
    raise GeographyError(f"cannot interpret geography {spec!r}")


def geography_to_dict(geo: Geography, full: bool = False) -> dict:
    if geo.is_lattice and not full:
        return {"kind": geo.kind, "n": geo.n}
    return {
        "kind": "custom",
        "dist": geo.dist.tolist(),
        "demand": [float(q) for q in geo.demand],
        "kappa": float(geo.kappa),
    }


def geography_from_dict(obj: dict) -> Geography:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise GeographyError("geography object needs a 'kind' field")
    kind = ALIASES.get(str(obj["kind"]).lower(), obj["kind"])
    if kind in BUILDERS:
        if "n" not in obj:
            raise GeographyError(f"lattice kind {kind!r} needs an integer 'n'")
        n = obj["n"]
        if isinstance(n, bool) or not isinstance(n, int):
            raise GeographyError(f"'n' must be an integer, got {n!r}")
        return BUILDERS[kind](n)
    if kind != "custom":
        raise GeographyError(f"unknown geography kind {obj['kind']!r}")
    for key in ("dist",):
        if key not in obj:
            raise GeographyError(f"custom geography missing {key!r}")
    return build_custom(obj["dist"], obj.get("demand"), obj.get("kappa", 1.0))


def save_geography(geo: Geography, path, full: bool = False) -> None:
    Path(path).write_text(json.dumps(geography_to_dict(geo, full), indent=1) + "\n")


def load_geography(path) -> Geography:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise GeographyError(f"{path}: not valid JSON ({exc})") from exc
    return geography_from_dict(obj)


@dataclass(frozen=True)
class ModelParams:
    """Scale economies ``alpha`` and distance decay ``beta`` (``phi = exp(-beta)``)."""

    alpha: float
    beta: float
    phi: float = None

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise ValueError(f"beta must be positive, got {self.beta}")
        phi = math.exp(-self.beta)
        if self.phi is None:
            object.__setattr__(self, "phi", phi)
        elif abs(self.phi - phi) > 1e-12:
            raise ValueError(f"phi={self.phi} inconsistent with beta={self.beta}")

    @classmethod
    def from_phi(cls, alpha: float, phi: float) -> "ModelParams":
        if not 0 < phi < 1:
            raise ValueError(f"phi must lie in (0, 1), got {phi}")
        return cls(alpha, -math.log(phi), phi)


def proximity(geo: Geography, params: ModelParams | float) -> np.ndarray:
    """Matrix of ``phi ** dist``; accepts params or a bare ``phi``."""
    phi = params.phi if isinstance(params, ModelParams) else float(params)
    out = np.power(phi, geo.dist, dtype=float)
    out.setflags(write=False)
    return out
