"""Input validation helpers."""

from __future__ import annotations

import numpy as np

from .errors import DegenerateStateError


def check_state(x, K: int, allow_negative: bool = False) -> np.ndarray:
    """Return ``x`` as a float vector of length ``K``; reject bad entries."""
    x = np.asarray(x, dtype=float)
    if x.shape != (K,):
        raise ValueError(f"state must have shape ({K},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DegenerateStateError("state has non-finite entries")
    if not allow_negative and np.any(x < 0):
        raise DegenerateStateError("state has negative entries")
    return x


def check_on_simplex(x, K: int, tol: float = 1e-9) -> np.ndarray:
    x = check_state(x, K)
    if abs(x.sum() - 1.0) > tol:
        raise DegenerateStateError(f"state sums to {x.sum()!r}, expected 1")
    return x


def check_grid(values, name: str, low=None, high=None, open_bounds=True) -> np.ndarray:
    """Strictly increasing 1-d grid, optionally inside ``(low, high)``."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"{name} grid must be a nonempty 1-d sequence")
    if v.size > 1 and np.any(np.diff(v) <= 0):
        raise ValueError(f"{name} grid must be strictly increasing")
    if low is not None and (v[0] <= low if open_bounds else v[0] < low):
        raise ValueError(f"{name} grid must lie above {low}")
    if high is not None and (v[-1] >= high if open_bounds else v[-1] > high):
        raise ValueError(f"{name} grid must lie below {high}")
    return v


def parse_range(text: str) -> np.ndarray:
    """``"a:b:step"`` into an inclusive grid, rounded to kill float drift."""
    try:
        a, b, step = (float(t) for t in text.split(":"))
    except ValueError:
        raise ValueError(f"expected a:b:step, got {text!r}") from None
    if step <= 0 or b < a:
        raise ValueError(f"bad range {text!r}")
    count = int(np.floor((b - a) / step + 1e-9)) + 1
    return np.round(a + step * np.arange(count), 12)


def child_seeds(seed: int, count: int) -> list[np.random.SeedSequence]:
    """Deterministic per-task seeds derived from one master seed."""
    return np.random.SeedSequence(seed).spawn(count)
