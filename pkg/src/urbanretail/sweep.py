"""Parameter sweeps: two-zone bifurcations, (phi, alpha) partitions, stability ranges."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_grid, parse_range
from .equilibria import (
    STABLE, classify_stability, invariant_potentials, make_state,
)
from .geometry import Geography, build_ring
from .model import RetailModel
from .svg import Axes, Canvas, colour

DEFAULT_PHI = "0.01:0.99:0.01"
DEFAULT_ALPHA = "1.0:3.0:0.05"


@dataclass(frozen=True)
class SweepGrid:
    phi_values: np.ndarray
    alpha_values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "phi_values", check_grid(self.phi_values, "phi", 0.0, 1.0))
        object.__setattr__(self, "alpha_values", check_grid(self.alpha_values, "alpha", 0.0, None))

    @classmethod
    def from_ranges(cls, phi: str = DEFAULT_PHI, alpha: str = DEFAULT_ALPHA) -> "SweepGrid":
        return cls(parse_range(phi), parse_range(alpha))

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.phi_values), len(self.alpha_values)


def _side(v) -> bool:
    return bool(v) if isinstance(v, (bool, np.bool_)) else v > 0


def bisect(fn, lo: float, hi: float, tol: float = 1e-13, max_iter: int = 200) -> float:
    """Root of ``fn`` in ``[lo, hi]`` given a sign change (booleans allowed)."""
    flo = fn(lo)
    if _side(flo) == _side(fn(hi)):
        raise ValueError(f"no sign change on [{lo}, {hi}]")
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if _side(fm) == _side(flo):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


# -- two zones -------------------------------------------------------------------


def phi_star_closed(alpha: float) -> float:
    """Freeness of travel where dispersion loses local stability."""
    ab = math.sqrt((alpha - 1.0) / alpha)
    return (1.0 - ab) / (1.0 + ab)


def phi_2star_closed(alpha: float) -> float:
    """Root of ``(1 + phi)**2 / phi = 4**alpha`` in (0, 1]."""
    q = 4.0**alpha
    return 0.5 * (q - 2.0 - math.sqrt(q * (q - 4.0)))


def phi_2star_printed(alpha: float) -> float:
    """Variant with ``4**alpha - 1`` under the root; negative near ``alpha = 1``."""
    q = 4.0**alpha
    return 0.5 * (q - 2.0 - math.sqrt(q * (q - 1.0)))


_DISP = np.array([0.5, 0.5])
_CORNER = np.array([1.0, 0.0])


def _two_zone(alpha, phi, geo):
    m = RetailModel.from_phi(geo, alpha, phi)
    eig = float(np.linalg.eigvalsh(m.tangent_hessian(_DISP))[-1])
    return m, eig


def _asymmetric_branch(m: RetailModel, n: int = 400) -> list[float]:
    """Interior equilibria ``(s, 1-s)`` with ``s > 1/2``."""
    def gap(s):
        return float(np.diff(m.payoff(np.array([s, 1.0 - s])))[0])

    s = np.linspace(0.5 + 1e-6, 1.0 - 1e-9, n)
    d = np.array([gap(v) for v in s])
    out = []
    for k in np.flatnonzero(np.sign(d[:-1]) * np.sign(d[1:]) < 0):
        out.append(bisect(gap, s[k], s[k + 1], tol=1e-12))
    return out


@dataclass
class BifurcationResult:
    alpha: float
    rows: list
    phi_star: float | None
    phi_2star: float | None
    phi_star_closed: float
    phi_2star_closed: float
    phi_2star_printed: float
    note: str = ""

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["phi", "dispersion_eig", "dispersion_verdict", "corner_margin",
                        "corner_verdict", "f_dispersion", "f_corner", "winner", "asymmetric"])
            for r in self.rows:
                w.writerow([repr(r["phi"]), repr(r["dispersion_eig"]), r["dispersion_verdict"],
                            repr(r["corner_margin"]), r["corner_verdict"],
                            repr(r["f_dispersion"]), repr(r["f_corner"]), r["winner"],
                            ";".join(repr(s) for s in r["asymmetric"])])

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "phi_star": self.phi_star,
            "phi_star_closed": self.phi_star_closed,
            "phi_2star": self.phi_2star,
            "phi_2star_closed": self.phi_2star_closed,
            "phi_2star_printed": self.phi_2star_printed,
            "note": self.note,
            "rows": self.rows,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BifurcationResult":
        return cls(d["alpha"], d["rows"], d["phi_star"], d["phi_2star"], d["phi_star_closed"],
                   d["phi_2star_closed"], d["phi_2star_printed"], d.get("note", ""))


def bifurcation_2zone(alpha: float, phi_grid, geo: Geography | None = None,
                      tol: float = 1e-9, root_tol: float = 1e-13) -> BifurcationResult:
    """Dispersion vs agglomeration on two symmetric zones along ``phi``.

    ``phi_star`` is where the dispersion's tangent eigenvalue changes sign,
    ``phi_2star`` where ``f(dispersion) - f(corner)`` does; both are found
    on the grid and refined by bisection.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    geo = build_ring(2) if geo is None else geo
    if geo.K != 2:
        raise ValueError("two-zone bifurcation needs K=2")
    phis = check_grid(phi_grid, "phi", 0.0, 1.0)
    rows = []
    eigs, gaps = [], []
    for phi in phis:
        m, eig = _two_zone(alpha, float(phi), geo)
        fd, fc = m.potential(_DISP).f, m.potential(_CORNER).f
        corner = classify_stability(_CORNER, m, tol)
        disp = classify_stability(_DISP, m, tol)
        gap = fd - fc
        winner = "tie" if abs(gap) <= 1e-10 else ("dispersion" if gap > 0 else "corner")
        rows.append({
            "phi": float(phi), "dispersion_eig": eig, "dispersion_verdict": disp.verdict,
            "corner_margin": corner.boundary_margin, "corner_verdict": corner.verdict,
            "f_dispersion": fd, "f_corner": fc, "winner": winner,
            "asymmetric": _asymmetric_branch(m) if alpha > 1 else [],
        })
        eigs.append(eig)
        gaps.append(gap)

    def refine(vals, fn):
        v = np.asarray(vals)
        idx = np.flatnonzero(np.sign(v[:-1]) * np.sign(v[1:]) < 0)
        exact = np.flatnonzero(v == 0)
        if idx.size:
            return bisect(fn, float(phis[idx[0]]), float(phis[idx[0] + 1]), root_tol)
        if exact.size:
            return float(phis[exact[0]])
        return None

    ps = refine(eigs, lambda p: _two_zone(alpha, p, geo)[1])

    def fgap(p):
        m = RetailModel.from_phi(geo, alpha, p)
        return m.potential(_DISP).f - m.potential(_CORNER).f

    p2 = refine(gaps, fgap)
    printed = phi_2star_printed(alpha) if alpha >= 1 else float("nan")
    closed2 = phi_2star_closed(alpha) if alpha >= 1 else float("nan")
    note = ""
    if alpha >= 1:
        note = (
            "phi_2star solves f(dispersion) = f(corner), i.e. (1+phi)^2/phi = 4^alpha, "
            f"giving {closed2:.10f}; the variant 0.5*(4^a - 2 - sqrt(4^a (4^a - 1))) "
            f"gives {printed:.10f} and is not a root"
        )
    return BifurcationResult(float(alpha), rows, ps, p2,
                             phi_star_closed(alpha) if alpha >= 1 else float("nan"),
                             closed2, printed, note)


# -- partitions ------------------------------------------------------------------


@dataclass(frozen=True)
class PartitionCell:
    phi: float
    alpha: float
    winner_ids: tuple
    winner_M: int
    f_max: float


def _winners(fvals, Ms, ids, tie_tol):
    best = fvals.max()
    tied = np.flatnonzero(fvals >= best - tie_tol)
    Mt = Ms[tied]
    top = tied[Mt == Mt.max()]
    primary = int(ids[top].min())
    return tuple(int(ids[t]) for t in tied), int(Mt.max()), float(best), primary


@dataclass
class PartitionResult:
    """Global maximizer over a grid; arrays are indexed ``[i_phi, k_alpha]``."""

    grid: SweepGrid
    winner_M: np.ndarray
    primary: np.ndarray
    f_max: np.ndarray
    winner_ids: list  # nested [i_phi][k_alpha] tuples

    @property
    def cells(self) -> list[PartitionCell]:
        out = []
        for k, a in enumerate(self.grid.alpha_values):
            for i, p in enumerate(self.grid.phi_values):
                out.append(PartitionCell(float(p), float(a), self.winner_ids[i][k],
                                         int(self.winner_M[i, k]), float(self.f_max[i, k])))
        return out

    def distinct_winners(self) -> list[int]:
        """Pattern IDs that win (alone or tied) somewhere on the grid."""
        return sorted({w for col in self.winner_ids for ids in col for w in ids})

    def distinct_M(self) -> list[int]:
        return sorted(set(int(v) for v in self.winner_M.ravel()), reverse=True)

    def row_sequence(self, k_alpha: int) -> list[int]:
        """Winner M along increasing phi with repeats collapsed."""
        seq = []
        for i in range(self.winner_M.shape[0]):
            key = int(self.primary[i, k_alpha])
            if not seq or seq[-1][0] != key:
                seq.append((key, int(self.winner_M[i, k_alpha])))
        return [m for _, m in seq]

    def monotonicity_violations(self) -> list[tuple]:
        """Cells where winner M increases along a phi row or an alpha column."""
        W = self.winner_M
        out = []
        for i, k in zip(*np.nonzero(np.diff(W, axis=0) > 0)):
            out.append(("phi", float(self.grid.phi_values[i + 1]), float(self.grid.alpha_values[k])))
        for i, k in zip(*np.nonzero(np.diff(W, axis=1) > 0)):
            out.append(("alpha", float(self.grid.phi_values[i]), float(self.grid.alpha_values[k + 1])))
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["phi", "alpha", "winner_ids", "winner_M", "f_max"])
            for c in self.cells:
                w.writerow([repr(c.phi), repr(c.alpha), ";".join(map(str, c.winner_ids)),
                            c.winner_M, repr(c.f_max)])

    @classmethod
    def from_csv(cls, path) -> "PartitionResult":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ValueError(f"{path}: empty partition table")
        phis = sorted({float(r["phi"]) for r in rows})
        alphas = sorted({float(r["alpha"]) for r in rows})
        pi = {p: i for i, p in enumerate(phis)}
        ak = {a: k for k, a in enumerate(alphas)}
        W = np.zeros((len(phis), len(alphas)), dtype=int)
        F = np.zeros(W.shape)
        ids = [[() for _ in alphas] for _ in phis]
        for r in rows:
            i, k = pi[float(r["phi"])], ak[float(r["alpha"])]
            W[i, k] = int(r["winner_M"])
            F[i, k] = float(r["f_max"])
            ids[i][k] = tuple(int(t) for t in r["winner_ids"].split(";"))
        P = np.array([[min(t) for t in row] for row in ids])
        return cls(SweepGrid(np.array(phis), np.array(alphas)), W, P, F, ids)


def partition(geo: Geography, grid: SweepGrid, candidates, tie_tol: float = 1e-10) -> PartitionResult:
    """Global potential maximizer among ``candidates`` at every grid cell.

    Ties within ``tie_tol`` are all listed; ``winner_M`` is the largest M
    among tied winners.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("no candidates")
    f = invariant_potentials(geo, candidates, grid.phi_values, grid.alpha_values)
    Ms = np.array([p.M for p in candidates])
    ids = np.array([p.id for p in candidates])
    nphi, nalpha = grid.shape
    W = np.zeros((nphi, nalpha), dtype=int)
    P = np.zeros((nphi, nalpha), dtype=int)
    F = np.zeros((nphi, nalpha))
    wid = [[None] * nalpha for _ in range(nphi)]
    for i in range(nphi):
        for k in range(nalpha):
            wid[i][k], W[i, k], F[i, k], P[i, k] = _winners(f[:, i, k], Ms, ids, tie_tol)
    return PartitionResult(grid, W, P, F, wid)


@dataclass(frozen=True)
class Regime:
    pattern_id: int
    M: int
    phi_lo: float
    phi_hi: float


def row_regimes(geo: Geography, alpha: float, phi_grid, candidates,
                tie_tol: float = 1e-10, root_tol: float = 1e-12) -> list[Regime]:
    """Winner regimes along ``phi`` at fixed ``alpha`` with bisected boundaries."""
    candidates = list(candidates)
    by_id = {p.id: p for p in candidates}
    grid = SweepGrid(phi_grid, [alpha])
    part = partition(geo, grid, candidates, tie_tol)
    phis = grid.phi_values
    prim = part.primary[:, 0]
    out = []
    lo = float(phis[0])
    for i in range(1, len(phis) + 1):
        if i < len(phis) and prim[i] == prim[i - 1]:
            continue
        a = int(prim[i - 1])
        if i == len(phis):
            hi = float(phis[-1])
        else:
            pa, pb = by_id[a], by_id[int(prim[i])]

            def gap(p, pa=pa, pb=pb):
                v = invariant_potentials(geo, [pa, pb], [p], [alpha])[:, 0, 0]
                return v[0] - v[1]

            hi = bisect(gap, float(phis[i - 1]), float(phis[i]), root_tol)
        out.append(Regime(a, by_id[a].M, lo, hi))
        lo = hi
    return out


# -- local stability ranges -------------------------------------------------------


@dataclass
class PatternRange:
    pattern_id: int
    M: int
    stable: list = field(default_factory=list)  # (lo, hi) phi intervals
    winner: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"pattern_id": self.pattern_id, "M": self.M,
                "locally_stable": [list(t) for t in self.stable],
                "global_winner": [list(t) for t in self.winner]}


def _is_stable(geo, pattern, alpha, phi, tol):
    m = RetailModel.from_phi(geo, alpha, phi)
    return classify_stability(make_state(pattern, geo.K).state, m, tol).verdict == STABLE


def _pattern_ranges(args):
    geo, pattern, alpha, phis, tol, bisect_tol = args
    flags = [_is_stable(geo, pattern, alpha, float(p), tol) for p in phis]
    intervals = []
    start = None
    for i, ok in enumerate(flags):
        if ok and start is None:
            start = float(phis[0]) if i == 0 else bisect(
                lambda p: _is_stable(geo, pattern, alpha, p, tol),
                float(phis[i - 1]), float(phis[i]), bisect_tol)
        if start is not None and (not ok or i == len(flags) - 1):
            if ok:
                end = float(phis[-1])
            else:
                end = bisect(lambda p: _is_stable(geo, pattern, alpha, p, tol),
                             float(phis[i - 1]), float(phis[i]), bisect_tol)
            intervals.append((start, end))
            start = None
    return flags, intervals


def stability_ranges(geo: Geography, alpha: float, phi_grid, candidates, *,
                     tol: float = 1e-9, bisect_tol: float = 1e-6, workers: int = 1,
                     return_flags: bool = False):
    """Per-pattern phi-intervals of local stability and of global selection.

    Interval endpoints between grid points are located by bisection; ends
    at the grid boundary are reported as the grid boundary.
    """
    candidates = list(candidates)
    phis = check_grid(phi_grid, "phi", 0.0, 1.0)
    jobs = [(geo, p, float(alpha), phis, tol, bisect_tol) for p in candidates]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            res = list(ex.map(_pattern_ranges, jobs))
    else:
        res = [_pattern_ranges(j) for j in jobs]
    regimes = row_regimes(geo, alpha, phis, candidates)
    out = []
    for p, (flags, iv) in zip(candidates, res):
        win = [(r.phi_lo, r.phi_hi) for r in regimes if r.pattern_id == p.id]
        out.append(PatternRange(p.id, p.M, iv, win))
    if return_flags:
        return out, np.array([f for f, _ in res])
    return out


# -- figures ------------------------------------------------------------------


def _ticks(lo, hi, n=5):
    """Round multiples of 1, 2 or 5 times a power of ten inside ``[lo, hi]``."""
    raw = (hi - lo) / n
    mag = 10.0 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 5, 10) if m * mag >= raw)
    first = math.ceil(lo / step - 1e-9)
    return [round(k * step, 10) for k in range(first, int(math.floor(hi / step + 1e-9)) + 1)]


def _bifurcation_svg(res: BifurcationResult) -> Canvas:
    c = Canvas(640, 420)
    ax = Axes(c, (70, 30, 420, 320), (0.0, 1.0), (0.0, 1.0))
    ax.frame("phi", "share of zone 1", _ticks(0, 1), _ticks(0, 1))
    c.text(280, 20, f"two zones, alpha = {res.alpha:g}", anchor="middle", size=13)
    rows = res.rows
    # dispersion branch, split by stability
    seg = []
    for r in rows:
        st = r["dispersion_verdict"] == STABLE
        pt = (ax.X(r["phi"]), ax.Y(0.5))
        if not seg or seg[-1][0] != st:
            seg.append((st, [seg[-1][1][-1]] if seg else []))
        seg[-1][1].append(pt)
    for st, pts in seg:
        c.polyline(pts, stroke="#1f77b4", width=2.0, dash=None if st else "6,4")
    for y in (0.0, 1.0):
        pts = [(ax.X(r["phi"]), ax.Y(y)) for r in rows if r["corner_verdict"] == STABLE]
        c.polyline(pts, stroke="#d62728", width=2.0)
    for r in rows:
        for s in r["asymmetric"]:
            for y in (s, 1.0 - s):
                c.circle(ax.X(r["phi"]), ax.Y(y), 1.5, fill="#7f7f7f")
    marks = ((res.phi_star, "phi*", "#1f77b4"), (res.phi_2star, "phi**", "#2ca02c"))
    for k, (val, label, col) in enumerate(marks):
        if val is not None:
            c.line(ax.X(val), ax.y0, ax.X(val), ax.y0 + ax.h, stroke=col, dash="2,3")
            c.text(ax.X(val) + 3, ax.y0 + 14 + 14 * k, f"{label} = {val:.6f}", size=10)
    ax.legend([
        ("dispersion (stable)", "#1f77b4", None),
        ("dispersion (unstable)", "#1f77b4", "6,4"),
        ("agglomeration", "#d62728", None),
        ("asymmetric interior", "#7f7f7f", "1,3"),
        ("stability switch (phi*)", "#1f77b4", "2,3"),
        ("selection switch (phi**)", "#2ca02c", "2,3"),
    ], 500, 50, swatch="line")
    return c


def _partition_svg(part: PartitionResult, title: str = "") -> Canvas:
    phis, alphas = part.grid.phi_values, part.grid.alpha_values
    c = Canvas(640, 440)
    dp = (phis[-1] - phis[0]) / max(len(phis) - 1, 1) or 0.01
    da = (alphas[-1] - alphas[0]) / max(len(alphas) - 1, 1) or 0.05
    xlim = (phis[0] - dp / 2, phis[-1] + dp / 2)
    ylim = (alphas[0] - da / 2, alphas[-1] + da / 2)
    ax = Axes(c, (70, 30, 440, 340), xlim, ylim)
    Ms = part.distinct_M()
    col = {m: colour(k) for k, m in enumerate(Ms)}
    cw = ax.X(xlim[0] + dp) - ax.X(xlim[0])
    ch = ax.Y(ylim[0]) - ax.Y(ylim[0] + da)
    for k, a in enumerate(alphas):
        for i, p in enumerate(phis):
            c.rect(ax.X(p - dp / 2), ax.Y(a + da / 2), cw, ch, fill=col[int(part.winner_M[i, k])])
    ax.frame("phi", "alpha", _ticks(float(phis[0]), float(phis[-1])),
             _ticks(float(alphas[0]), float(alphas[-1])))
    if title:
        c.text(290, 20, title, anchor="middle", size=13)
    ax.legend([(f"M = {m}", col[m], None) for m in Ms], 525, 45)
    return c


def _range_svg(ranges: list, alpha: float | None = None, phi_lim=(0.0, 1.0)) -> Canvas:
    n = len(ranges)
    h = max(120, 14 * n)
    c = Canvas(640, h + 90)
    ax = Axes(c, (90, 30, 500, h), phi_lim, (0, n))
    for k, r in enumerate(ranges):
        y = ax.Y(n - k - 0.5)
        for lo, hi in r.stable:
            c.line(ax.X(lo), y, ax.X(hi), y, stroke="#7f7f7f", width=2.0)
        for lo, hi in r.winner:
            c.line(ax.X(lo), y, ax.X(hi), y, stroke="#d62728", width=6.0)
    yt = [n - k - 0.5 for k in range(n)]
    ax.frame("phi", "pattern", _ticks(*phi_lim), yt,
             ytick_labels=[f"{r.pattern_id} (M={r.M})" for r in ranges], ylabel_offset=80)
    if alpha is not None:
        c.text(340, 20, f"alpha = {alpha:g}", anchor="middle", size=13)
    ax.legend([("locally stable", "#7f7f7f", None), ("global maximizer", "#d62728", None)],
              420, h + 70, swatch="line")
    return c


def emit_figure(data, kind: str, path, **kw) -> None:
    """Write an SVG for a bifurcation result, a partition, or stability ranges."""
    if kind == "bifurcation":
        if not data.rows:
            raise ValueError("empty bifurcation table")
        canvas = _bifurcation_svg(data)
    elif kind == "partition_heatmap":
        canvas = _partition_svg(data, kw.get("title", ""))
    elif kind == "range_chart":
        if not data:
            raise ValueError("no ranges to draw")
        canvas = _range_svg(data, kw.get("alpha"), kw.get("phi_lim", (0.0, 1.0)))
    else:
        raise ValueError(f"unknown figure kind {kind!r}")
    canvas.save(path)


def ranges_to_json(ranges, alpha: float) -> str:
    return json.dumps({"alpha": alpha, "patterns": [r.to_dict() for r in ranges]},
                      indent=1, sort_keys=True)


def ranges_from_json(text: str):
    obj = json.loads(text)
    out = [PatternRange(d["pattern_id"], d["M"], [tuple(t) for t in d["locally_stable"]],
                        [tuple(t) for t in d["global_winner"]]) for d in obj["patterns"]]
    return out, obj.get("alpha")
