"""Invariant equilibria: construction, checks, local stability, global selection."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .geometry import Geography
from .model import RetailModel
from .symmetry import SupportPattern

STABLE, UNSTABLE, MARGINAL = "stable", "unstable", "marginal"


@dataclass(frozen=True)
class InvariantEquilibrium:
    pattern: SupportPattern
    state: np.ndarray

    @property
    def M(self) -> int:
        return self.pattern.M

    @property
    def id(self) -> int:
        return self.pattern.id


def make_state(pattern: SupportPattern, K: int) -> InvariantEquilibrium:
    """Mass ``1/M`` on each zone of the support."""
    if pattern.M == 0:
        raise ValueError("support must be nonempty")
    x = np.zeros(K)
    x[list(pattern.support)] = 1.0 / pattern.M
    x.setflags(write=False)
    return InvariantEquilibrium(pattern, x)


def circular_pattern(K: int, k: int) -> np.ndarray:
    """Ring state with ``K / 2**k`` equal agglomerations spaced ``2**k`` apart."""
    step = 2**k
    if K % step:
        raise ValueError(f"2**{k} does not divide K={K}")
    x = np.zeros(K)
    x[::step] = step / K
    return x


@dataclass(frozen=True)
class InvariantCheck:
    residual: float
    share_error: float


def market_shares(model: RetailModel, support) -> np.ndarray:
    """Aggregate demand captured by each support zone under uniform masses."""
    S = np.asarray(sorted(support))
    P = model.prox[:, S]
    shares = P / P.sum(axis=1, keepdims=True)  # phi_ji / Phi_j
    return model.geo.demand @ shares


def verify_invariant(eq: InvariantEquilibrium, model: RetailModel) -> InvariantCheck:
    """Equilibrium residual and worst deviation from equal market shares."""
    captured = market_shares(model, eq.pattern.support)
    share_error = float(np.max(np.abs(captured - model.geo.total_demand / eq.M)))
    return InvariantCheck(model.equilibrium_residual(eq.state), share_error)


@dataclass(frozen=True)
class StabilityReport:
    boundary_margin: float  # max payoff over empty zones
    interior_max_eig: float  # top eigenvalue of the tangent Hessian on the face
    verdict: str


def _verdict(margin, eig, tol):
    if margin < -tol and eig < -tol:
        return STABLE
    if margin > tol or eig > tol:
        return UNSTABLE
    return MARGINAL


def classify_stability(state, model: RetailModel, tol: float = 1e-9) -> StabilityReport:
    """Local stability of an equilibrium under the entry/exit dynamics.

    Empty zones contribute their payoffs (the transversal eigenvalues);
    the populated face contributes the tangent-space Hessian of the
    potential. ``state`` may be an :class:`InvariantEquilibrium`.
    """
    x = np.asarray(getattr(state, "state", state), dtype=float)
    S = x > 0
    pi = model.payoff(x)
    margin = float(pi[~S].max()) if np.any(~S) else -math.inf
    if S.sum() > 1:
        T = model.tangent_hessian(x)
        if not np.all(np.isfinite(T)):
            raise NumericalError(f"non-finite tangent Hessian (alpha={model.alpha})")
        try:
            eig = float(np.linalg.eigvalsh(T)[-1])
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                f"eigvalsh failed; Hessian condition number {np.linalg.cond(T):.3g}"
            ) from exc
    else:
        eig = -math.inf
    return StabilityReport(margin, eig, _verdict(margin, eig, tol))


# -- global selection --------------------------------------------------------


def distance_histograms(geo: Geography, patterns) -> np.ndarray:
    """``h[p, j, d]``: zones of pattern ``p`` at integer distance ``d`` from ``j``."""
    d = np.asarray(geo.dist)
    if not np.issubdtype(d.dtype, np.integer):
        raise ValueError("distance histograms need integer distances")
    D = int(d.max()) + 1
    out = np.zeros((len(patterns), geo.K, D))
    for p, pat in enumerate(patterns):
        sub = d[:, list(pat.support)]
        for dist_val in range(D):
            out[p, :, dist_val] = (sub == dist_val).sum(axis=1)
    return out


def invariant_potentials(geo: Geography, patterns, phis, alphas) -> np.ndarray:
    """Potential of each uniform-on-support pattern over a (phi, alpha) grid.

    Returns ``f[p, i, k]`` for pattern ``p``, ``phis[i]``, ``alphas[k]``,
    using ``f = -Q log M + (1/alpha) sum_j Q_j log Phi_j - kappa`` with
    ``Phi_j = sum_{k in S} phi ** d_jk``.
    """
    phis = np.atleast_1d(np.asarray(phis, dtype=float))
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    Q = geo.demand
    try:
        h = distance_histograms(geo, patterns)
        powers = phis[None, :] ** np.arange(h.shape[2])[:, None]  # (D, n_phi)
        Phi = h @ powers  # (P, K, n_phi)
    except ValueError:
        Phi = np.stack([
            np.stack([(phi ** geo.dist[:, list(p.support)]).sum(axis=1) for phi in phis], axis=-1)
            for p in patterns
        ])
    G = np.einsum("j,pji->pi", Q, np.log(Phi))
    M = np.array([p.M for p in patterns], dtype=float)
    return (-geo.total_demand * np.log(M))[:, None, None] + G[:, :, None] / alphas[None, None, :] - geo.kappa


@dataclass(frozen=True)
class Selection:
    winner_ids: tuple
    f: dict
    g: dict

    @property
    def f_max(self) -> float:
        return max(self.f.values())


def select_global(candidates, model: RetailModel, tie_tol: float = 1e-10) -> Selection:
    """Candidates whose potential is within ``tie_tol`` of the best.

    ``candidates`` are :class:`InvariantEquilibrium` objects or
    ``(id, state)`` pairs.
    """
    items = []
    for c in candidates:
        if isinstance(c, InvariantEquilibrium):
            items.append((c.id, c.state))
        else:
            items.append((c[0], np.asarray(c[1], dtype=float)))
    if not items:
        raise ValueError("no candidates")
    f, g = {}, {}
    for cid, x in items:
        pv = model.potential(x)
        f[cid], g[cid] = pv.f, pv.g
    best = max(f.values())
    winners = tuple(sorted((cid for cid, v in f.items() if v >= best - tie_tol), key=str))
    return Selection(winners, f, g)


def write_stability_csv(rows, path) -> None:
    """Rows of ``(pattern_id, M, phi, alpha, StabilityReport, f)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pattern_id", "M", "phi", "alpha", "boundary_margin",
                    "interior_max_eig", "verdict", "f"])
        for pid, M, phi, alpha, rep, f in rows:
            w.writerow([pid, M, repr(float(phi)), repr(float(alpha)),
                        repr(rep.boundary_margin), repr(rep.interior_max_eig),
                        rep.verdict, repr(float(f))])
