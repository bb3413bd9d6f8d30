"""Finite-population logit revision dynamics on the grid ``{x : N x integer}``.

Each jump one retailer, drawn uniformly from the population, revises: it
leaves zone ``i`` (probability ``x_i``) and picks zone ``j`` with logit
probability ``rho_j(x) = softmax(pi(x) / eta)_j``; picking its own zone
leaves the state unchanged.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve
from scipy.special import gammaln, logsumexp

from .errors import NumericalError, ResourceLimitError
from .model import RetailModel


@dataclass(frozen=True)
class ChainSpec:
    model: RetailModel
    N: int
    eta: float

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")
        if not (math.isfinite(self.eta) and self.eta > 0):
            raise ValueError(f"eta must be positive, got {self.eta}")

    @property
    def K(self) -> int:
        return self.model.K

    @property
    def n_states(self) -> int:
        return math.comb(self.N + self.K - 1, self.K - 1)


def logit_choice(payoffs, eta: float) -> np.ndarray:
    """Softmax of ``payoffs / eta`` with max-subtraction.

    Infinite payoffs (empty zones when ``alpha < 1``) absorb all the mass,
    split evenly among themselves.
    """
    p = np.asarray(payoffs, dtype=float)
    top = np.isposinf(p)
    if top.any():
        return top / top.sum()
    z = (p - p.max()) / eta
    w = np.exp(z)
    return w / w.sum()


def enumerate_states(K: int, N: int) -> np.ndarray:
    """All count vectors with ``K`` entries summing to ``N``, colexicographic."""
    rows = []
    for bars in combinations(range(N + K - 1), K - 1):
        prev = -1
        counts = []
        for b in bars:
            counts.append(b - prev - 1)
            prev = b
        counts.append(N + K - 2 - prev)
        rows.append(counts)
    states = np.array(rows, dtype=np.int64).reshape(-1, K)
    order = np.lexsort(states.T)  # last key is primary: colex
    return states[order]


def _check_size(spec, cap):
    if spec.n_states > cap:
        raise ResourceLimitError(
            f"{spec.n_states} states exceed the cap {cap}; use simulate() instead"
        )


def _row(spec: ChainSpec, counts):
    """Targets (as count tuples) and probabilities of one transition row."""
    N = spec.N
    x = np.asarray(counts, dtype=float) / N
    rho = logit_choice(spec.model.payoff(x), spec.eta)
    out = {}
    c = tuple(int(v) for v in counts)
    stay = 0.0
    for i in np.flatnonzero(x > 0):
        stay += x[i] * rho[i]
        for j in range(spec.K):
            if j == i or rho[j] == 0:
                continue
            t = list(c)
            t[i] -= 1
            t[j] += 1
            out[tuple(t)] = out.get(tuple(t), 0.0) + x[i] * rho[j]
    out[c] = stay
    return out


def transition_matrix(spec: ChainSpec, cap: int = 200_000):
    """Row-stochastic sparse matrix and the state array indexing it."""
    _check_size(spec, cap)
    states = enumerate_states(spec.K, spec.N)
    index = {tuple(s): k for k, s in enumerate(states.tolist())}
    rows, cols, vals = [], [], []
    for k, s in enumerate(states):
        for t, p in _row(spec, s).items():
            rows.append(k)
            cols.append(index[t])
            vals.append(p)
    n = len(states)
    P = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return P, states


def gth_stationary(P) -> np.ndarray:
    """Stationary vector by Grassmann-Taksar-Heyman elimination.

    Subtraction-free, so tiny probabilities keep full relative accuracy.
    """
    A = np.array(P.toarray() if sparse.issparse(P) else P, dtype=float)
    n = A.shape[0]
    for k in range(n - 1, 0, -1):
        s = A[k, :k].sum()
        if s <= 0:
            raise NumericalError(f"chain is reducible at state {k}")
        A[:k, k] /= s
        A[:k, :k] += np.outer(A[:k, k], A[k, :k])
    mu = np.zeros(n)
    mu[0] = 1.0
    for k in range(1, n):
        mu[k] = mu[:k] @ A[:k, k]
    return mu / mu.sum()


@dataclass
class StationaryResult:
    states: np.ndarray
    probs: np.ndarray
    method: str

    @property
    def measure(self) -> dict:
        return {tuple(s): float(p) for s, p in zip(self.states.tolist(), self.probs)}

    def to_csv(self, path) -> None:
        K = self.states.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"n_{i + 1}" for i in range(K)] + ["probability"])
            for s, p in zip(self.states.tolist(), self.probs):
                w.writerow(list(s) + [repr(float(p))])


def stationary_exact(spec: ChainSpec, cap: int = 200_000, dense_limit: int = 2000) -> StationaryResult:
    """Solve ``mu P = mu`` with ``sum(mu) = 1``."""
    P, states = transition_matrix(spec, cap)
    n = P.shape[0]
    if n <= dense_limit:
        mu = gth_stationary(P)
    else:
        A = (P.T - sparse.identity(n, format="csr")).tolil()
        A[0, :] = np.ones(n)
        b = np.zeros(n)
        b[0] = 1.0
        mu = spsolve(A.tocsc(), b)
        if not np.all(np.isfinite(mu)):
            raise NumericalError("sparse stationary solve failed")
        mu = np.clip(mu, 0.0, None)
        mu /= mu.sum()
    return StationaryResult(states, mu, "exact_solve")


def log_multinomial(counts) -> np.ndarray:
    c = np.atleast_2d(np.asarray(counts, dtype=float))
    N = c.sum(axis=1)
    return gammaln(N + 1) - gammaln(c + 1).sum(axis=1)


def pin_state(K: int, N: int) -> tuple:
    """Most even count vector; the gauge point for fitted potentials."""
    base, extra = divmod(N, K)
    return tuple(base + (1 if i < extra else 0) for i in range(K))


def fit_fN(spec: ChainSpec, result: StationaryResult) -> dict:
    """Discrete potential implied by a stationary measure.

    ``f_N(c) = eta * (log mu(c) - log multinomial(N; c))``, shifted so the
    most even state scores zero.
    """
    pos = result.probs > 0
    if not pos.all():
        warnings.warn(f"{int((~pos).sum())} zero-probability states excluded", stacklevel=2)
    states = result.states[pos]
    vals = spec.eta * (np.log(result.probs[pos]) - log_multinomial(states))
    out = {tuple(s): float(v) for s, v in zip(states.tolist(), vals)}
    ref = out[pin_state(spec.K, spec.N)]
    return {s: v - ref for s, v in out.items()}


def eta_free_potential(spec: ChainSpec, fN: dict) -> dict:
    """``f_N(c) - eta * log Z(c / N)`` with ``Z = sum_j exp(pi_j / eta)``.

    On two-zone chains this combination does not depend on ``eta`` at all;
    ``f_N`` alone carries an ``O(eta)`` normalisation term.
    """
    N = spec.N
    out = {
        s: v - spec.eta * float(logsumexp(spec.model.payoff(np.asarray(s) / N) / spec.eta))
        for s, v in fN.items()
    }
    ref = out[pin_state(spec.K, N)]
    return {s: v - ref for s, v in out.items()}


def fN_error(spec: ChainSpec, fN: dict | None = None) -> float:
    """Sup-norm gap between ``f_N / N`` and ``f`` on the grid (both pinned)."""
    if fN is None:
        fN = fit_fN(spec, stationary_exact(spec))
    N = spec.N
    ref = spec.model.potential(np.asarray(pin_state(spec.K, N)) / N).f
    return max(
        abs(v / N - (spec.model.potential(np.asarray(s) / N).f - ref)) for s, v in fN.items()
    )


# -- simulation ----------------------------------------------------------------


@dataclass
class SimulationResult:
    occupation: StationaryResult
    jumps: int
    seed: int
    physical_time: float  # jumps arrive at rate N
    distinct_states: int
    tv_to_exact: float | None = None
    extra: dict = field(default_factory=dict)

    def summary(self, top: int = 5) -> dict:
        order = np.argsort(-self.occupation.probs, kind="stable")[:top]
        out = {
            "jumps": self.jumps,
            "seed": self.seed,
            "physical_time": self.physical_time,
            "distinct_states": self.distinct_states,
            "occupation_top_states": [
                {"counts": self.occupation.states[k].tolist(),
                 "frequency": float(self.occupation.probs[k])}
                for k in order
            ],
        }
        if self.tv_to_exact is not None:
            out["tv_to_exact"] = self.tv_to_exact
        out.update(self.extra)
        return out

    def summary_json(self) -> str:
        return json.dumps(self.summary(), indent=1, sort_keys=True)


def simulate(spec: ChainSpec, jumps: int, seed: int = 0, start=None,
             chunk: int = 65536) -> SimulationResult:
    """Run the jump chain and return its empirical occupation measure."""
    if jumps < 1:
        raise ValueError("jumps must be positive")
    rng = np.random.default_rng(seed)
    state = tuple(pin_state(spec.K, spec.N) if start is None else start)
    if sum(state) != spec.N or len(state) != spec.K:
        raise ValueError("start must be a count vector summing to N")
    rows = {}
    visits = {}
    done = 0
    while done < jumps:
        u = rng.random(min(chunk, jumps - done))
        for r in u:
            row = rows.get(state)
            if row is None:
                d = _row(spec, state)
                targets = list(d)
                cum = np.cumsum([d[t] for t in targets])
                row = rows[state] = (targets, cum / cum[-1])
            targets, cum = row
            k = int(np.searchsorted(cum, r, side="right"))
            state = targets[min(k, len(targets) - 1)]
            visits[state] = visits.get(state, 0) + 1
        done += len(u)
    keys = sorted(visits, key=lambda s: tuple(reversed(s)))
    states = np.array(keys, dtype=np.int64)
    probs = np.array([visits[k] for k in keys], dtype=float) / jumps
    return SimulationResult(StationaryResult(states, probs, "empirical"), jumps, seed,
                            jumps / spec.N, len(keys))


# -- measure comparisons -----------------------------------------------------


def quotient(result: StationaryResult, group=None) -> dict:
    """Merge states related by a zone permutation group (rows of ``group.elements``)."""
    out = {}
    for s, p in zip(result.states.tolist(), result.probs):
        if group is None:
            key = tuple(s)
        else:
            s = np.asarray(s)
            key = max(tuple(s[g]) for g in group.elements)
        out[key] = out.get(key, 0.0) + float(p)
    return out


def tv_distance(a, b, group=None) -> float:
    """Total variation distance; inputs are results or state->prob dicts."""
    if isinstance(a, StationaryResult):
        a = quotient(a, group)
    if isinstance(b, StationaryResult):
        b = quotient(b, group)
    keys = set(a) | set(b)
    return 0.5 * sum(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in keys)


def neighbourhood_mass(result: StationaryResult, centres, radius: float = 0.1) -> float:
    """Probability of states within max-norm ``radius`` of any centre."""
    x = result.states / result.states.sum(axis=1, keepdims=True)
    near = np.zeros(len(x), dtype=bool)
    for c in centres:
        near |= np.max(np.abs(x - np.asarray(c, dtype=float)), axis=1) <= radius + 1e-12
    return float(result.probs[near].sum())
