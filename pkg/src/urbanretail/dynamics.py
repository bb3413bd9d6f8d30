"""Deterministic entry/exit dynamics ``dx_i/dt = x_i * pi_i(x)``.

The field is a replicator dynamic with zero average payoff; faces of the
orthant are invariant and the simplex ``sum(x) = Q / kappa`` attracts
every trajectory. Integration uses an embedded Dormand-Prince 5(4) pair.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_state, child_seeds
from .errors import DegenerateStateError, StiffnessError, UnsupportedGeographyError
from .model import RetailModel

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

SNAP = 1e-14


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    terminal_residual: float
    converged: bool
    min_raw: float = 0.0  # smallest entry seen before clamping
    n_steps: int = 0
    n_rejected: int = 0

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self, path) -> None:
        K = self.states.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t"] + [f"x_{i + 1}" for i in range(K)])
            for t, x in zip(self.times, self.states):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in x])


def rhs(model: RetailModel, x) -> np.ndarray:
    """Velocity field of the entry/exit dynamics."""
    return model.replicator_field(x)


def integrate(model: RetailModel, x0, *, tol=1e-9, t_max=1e6, rtol=1e-10, atol=1e-12,
              h0=1e-2, max_steps=1_000_000, clamp_eps=1e-10, record_every=1) -> Trajectory:
    """Integrate from ``x0`` until the equilibrium residual stays below ``tol``.

    Convergence needs two consecutive accepted steps under ``tol``. Entries
    below ``1e-14`` are snapped to zero after every accepted step.

    Raises
    ------
    StiffnessError
        If the step size underflows; the last accepted state is attached.
    """
    y = check_state(x0, model.K).copy()
    if not np.any(y > 0):
        raise DegenerateStateError("initial state has no populated zone")
    f = model.replicator_field
    t, h = 0.0, float(h0)
    times, states = [t], [y.copy()]
    k1 = f(y)
    below = 0
    res = model.equilibrium_residual(y)
    min_raw = float(y.min())
    steps = rejected = 0
    while t < t_max and steps < max_steps:
        if res <= tol:
            below += 1
            if below >= 2:
                break
        else:
            below = 0
        h = min(h, t_max - t)
        ks = [k1]
        for s in range(1, 7):
            ys = y + h * sum(a * k for a, k in zip(_A[s], ks))
            ks.append(f(np.clip(ys, 0.0, None)))
        y5 = y + h * sum(b * k for b, k in zip(_B5, ks) if b)
        err = h * sum(e * k for e, k in zip(_E, ks))
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y5))
        en = float(np.max(np.abs(err) / scale))
        if en <= 1.0 and np.all(y5 > -clamp_eps):
            t += h
            min_raw = min(min_raw, float(y5.min()))
            y = np.where(y5 < SNAP, 0.0, y5)
            if not np.any(y > 0):
                raise StiffnessError("all zones went extinct", state=y, t=t)
            k1 = ks[6] if np.array_equal(y, y5) else f(y)
            steps += 1
            if steps % record_every == 0:
                times.append(t)
                states.append(y.copy())
            res = model.equilibrium_residual(y)
            fac = 5.0 if en == 0 else min(5.0, max(0.2, 0.9 * en ** -0.2))
            h *= fac
        else:
            rejected += 1
            h *= 0.5 if en <= 1.0 else max(0.1, 0.9 * en ** -0.2)
            if h < 1e-14 * max(1.0, t):
                raise StiffnessError(f"step size underflow at t={t:g}", state=y, t=t)
    if times[-1] != t:
        times.append(t)
        states.append(y.copy())
    converged = below >= 2 or (res <= tol and below >= 1)
    return Trajectory(np.array(times), np.array(states), res, converged,
                      min_raw, steps, rejected)


@dataclass
class Cluster:
    state: np.ndarray
    count: int


@dataclass
class BasinResult:
    clusters: list = field(default_factory=list)
    failures: int = 0
    unconverged: int = 0

    @property
    def total(self) -> int:
        return sum(c.count for c in self.clusters)

    def to_dict(self) -> dict:
        return {
            "clusters": [
                {"count": c.count, "state": [float(v) for v in c.state]}
                for c in self.clusters
            ],
            "failures": self.failures,
            "unconverged": self.unconverged,
        }


def _run_one(args):
    model, seed, concentration, opts = args
    rng = np.random.default_rng(seed)
    x0 = rng.dirichlet(np.full(model.K, concentration))
    try:
        traj = integrate(model, x0, **opts)
    except StiffnessError:
        return None, False
    return traj.final, traj.converged


def basin_sample(model: RetailModel, n_samples: int, seed: int = 0, *, group=None,
                 radius=1e-4, concentration=1.0, workers: int = 1, **opts) -> BasinResult:
    """Integrate from random starts and cluster the attractors.

    Starts are Dirichlet(concentration, ..., concentration) draws; the
    default of one is uniform on the simplex, smaller values favour sparse
    starts near the faces. Terminal states are put in canonical form under
    ``group`` (the lattice group by default) before clustering in the
    max-norm.
    """
    from .symmetry import canonicalize_state, lattice_group, trivial_group

    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if group is None:
        try:
            group = lattice_group(model.geo)
        except UnsupportedGeographyError:
            group = trivial_group(model.K)
    jobs = [(model, s, concentration, opts) for s in child_seeds(seed, n_samples)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    out = BasinResult()
    for final, converged in results:
        if final is None:
            out.failures += 1
            continue
        if not converged:
            out.unconverged += 1
        x = canonicalize_state(final, group)
        for c in out.clusters:
            if np.max(np.abs(c.state - x)) <= radius:
                c.count += 1
                break
        else:
            out.clusters.append(Cluster(x, 1))
    out.clusters.sort(key=lambda c: (-c.count, tuple(-c.state)))
    return out
