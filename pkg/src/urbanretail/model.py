"""Spending flows, retailer profits and the potential function.

All quantities are for the retail model with origin-constrained gravity
demand::

    A_j(x)   = sum_k x_k**alpha * phi_jk
    V_ij(x)  = x_i**alpha * phi_ji / A_j(x) * Q_j
    pi_i(x)  = sum_j V_ij(x) / x_i - kappa
    f(x)     = (1/alpha) * sum_j Q_j log A_j(x) - kappa * sum_i x_i

``grad f == pi`` on the positive orthant, which is what makes the model a
potential game.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._validation import check_state
from .errors import DegenerateStateError
from .geometry import Geography, ModelParams, proximity


class PotentialValue(NamedTuple):
    f: float
    g: float


def tangent_basis(m: int) -> np.ndarray:
    """Orthonormal basis (``m x (m-1)``) of ``{v : sum(v) == 0}``.

    Built from the Householder reflector sending ``e_1`` to ``1/sqrt(m)``.
    """
    if m < 1:
        raise ValueError("m must be positive")
    if m == 1:
        return np.zeros((1, 0))
    u = np.full(m, 1.0 / np.sqrt(m))
    u[0] -= 1.0
    H = np.eye(m) - 2.0 * np.outer(u, u) / (u @ u)
    return H[:, 1:]


@dataclass(frozen=True)
class RetailModel:
    """A geography together with structural parameters.

    >>> from urbanretail.geometry import build_ring
    >>> m = RetailModel(build_ring(2), ModelParams.from_phi(1.2, 0.5))
    >>> round(m.potential([0.5, 0.5]).f, 6)
    -1.35526
    """

    geo: Geography
    params: ModelParams
    prox: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.prox is None:
            object.__setattr__(self, "prox", proximity(self.geo, self.params))

    @classmethod
    def from_phi(cls, geo: Geography, alpha: float, phi: float) -> "RetailModel":
        return cls(geo, ModelParams.from_phi(alpha, phi))

    @property
    def alpha(self) -> float:
        return self.params.alpha

    @property
    def kappa(self) -> float:
        return self.geo.kappa

    @property
    def K(self) -> int:
        return self.geo.K

    # -- building blocks -------------------------------------------------

    def _powers(self, x):
        x = check_state(x, self.K)
        if not np.any(x > 0):
            raise DegenerateStateError("state has no populated zone")
        xa = np.power(x, self.alpha)
        A = self.prox @ xa  # A_j, proximity is symmetric
        return x, xa, A

    def attraction(self, x) -> np.ndarray:
        """Denominators ``A_j = sum_k x_k^alpha phi_jk``."""
        return self._powers(x)[2]

    def flow_matrix(self, x) -> np.ndarray:
        """``V[i, j]``: spending in zone ``i`` by consumers living in ``j``."""
        x, xa, A = self._powers(x)
        return xa[:, None] * self.prox * (self.geo.demand / A)[None, :]

    def _xpow_alpha_minus_one(self, x):
        a = self.alpha
        out = np.empty_like(x)
        pos = x > 0
        out[pos] = np.power(x[pos], a - 1.0)
        out[~pos] = 0.0 if a > 1 else (1.0 if a == 1 else np.inf)
        return out

    # -- payoffs and potential -------------------------------------------

    def payoff(self, x) -> np.ndarray:
        """Profit per retailer in each zone.

        Empty zones take the limit of ``x_i**(alpha-1)``: zero for
        ``alpha > 1`` (profit ``-kappa``), ``+inf`` for ``alpha < 1``.
        """
        x, xa, A = self._powers(x)
        B = self.prox @ (self.geo.demand / A)
        return self._xpow_alpha_minus_one(x) * B - self.kappa

    potential_gradient = payoff

    def replicator_field(self, x) -> np.ndarray:
        """``E_i = x_i * pi_i(x)`` written without the ``1/x_i`` factor."""
        x, xa, A = self._powers(x)
        return xa * (self.prox @ (self.geo.demand / A)) - self.kappa * x

    def potential(self, x) -> PotentialValue:
        x, _, A = self._powers(x)
        with np.errstate(divide="ignore"):
            g = float(self.geo.demand @ np.log(A)) / self.alpha
        return PotentialValue(g - self.kappa * float(x.sum()), g)

    def potential_hessian(self, x, support=None) -> np.ndarray:
        """Second partials of ``f`` over the support coordinates.

        ``support`` defaults to the populated zones of ``x``; the returned
        matrix is indexed in that (sorted) order.
        """
        x, xa, A = self._powers(x)
        S = np.flatnonzero(x > 0) if support is None else np.sort(np.asarray(support))
        if S.size == 0:
            raise DegenerateStateError("empty support")
        if np.any(x[S] <= 0):
            raise DegenerateStateError("Hessian needs a strictly positive support")
        a = self.alpha
        Q = self.geo.demand
        P = self.prox[:, S]  # phi_{j, i} for i in S
        xs = x[S]
        B = P.T @ (Q / A)
        W = P * np.power(xs, a - 1.0)[None, :]  # x_i^{a-1} phi_ji
        H = -a * (W.T * (Q / A**2)[None, :]) @ W
        H[np.diag_indices_from(H)] += (a - 1.0) * np.power(xs, a - 2.0) * B
        return 0.5 * (H + H.T)

    def tangent_hessian(self, x, support=None) -> np.ndarray:
        """Hessian projected on the face's simplex tangent space."""
        H = self.potential_hessian(x, support)
        T = tangent_basis(H.shape[0])
        return T.T @ H @ T

    def equilibrium_residual(self, x) -> float:
        """Worst violation of ``x_i pi_i = 0, x_i >= 0, pi_i <= 0``."""
        x = check_state(x, self.K, allow_negative=True)
        xc = np.clip(x, 0.0, None)
        E = self.replicator_field(xc)
        pi = self.payoff(xc)
        with np.errstate(invalid="ignore"):
            viol = np.concatenate([np.abs(E), np.maximum(pi, 0.0), np.maximum(-x, 0.0)])
        return float(np.max(viol))
