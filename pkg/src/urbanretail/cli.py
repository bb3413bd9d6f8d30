"""Command-line interface: ``urbanretail <command> [options]``.

Data files are deterministic for a fixed configuration and seed. Each run
also writes ``<command>.provenance.json`` next to them with the resolved
configuration, library versions and wall time.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._validation import parse_range
from .errors import ResourceLimitError, UnsupportedGeographyError
from .geometry import ModelParams, parse_geo, save_geography

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _dump(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(v):
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not serialisable: {type(v).__name__}")


def _params(args) -> ModelParams:
    if args.alpha is None:
        raise UsageError("--alpha is required")
    if (args.phi is None) == (args.beta is None):
        raise UsageError("give exactly one of --phi and --beta")
    if args.phi is not None:
        return ModelParams.from_phi(args.alpha, args.phi)
    return ModelParams(args.alpha, args.beta)


def _model(args):
    from .model import RetailModel

    return RetailModel(parse_geo(args.geo), _params(args))


def _patterns(geo, args):
    from .symmetry import invariant_supports, lattice_group

    G = lattice_group(geo)
    return invariant_supports(geo, G, cap=args.group_cap), G


def _out(args, name) -> Path:
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    return d / name


# -- commands -------------------------------------------------------------------


def cmd_geom(args):
    from .symmetry import lattice_group

    geo = parse_geo(args.geo)
    info = {"label": geo.label, "kind": geo.kind, "K": geo.K, "kappa": geo.kappa,
            "total_demand": geo.total_demand, "diameter": float(np.max(geo.dist))}
    try:
        info["group_order"] = lattice_group(geo).order
    except UnsupportedGeographyError:
        info["group_order"] = None
    for k, v in info.items():
        print(f"{k}: {v}")
    save_geography(geo, _out(args, "geography.json"), full=True)
    return info


def cmd_enumerate(args):
    from .symmetry import enumerate_subgroups

    geo = parse_geo(args.geo)
    pats, G = _patterns(geo, args)
    print(len(pats))
    Ms = {}
    for p in pats:
        Ms[p.M] = Ms.get(p.M, 0) + 1
    catalog = {
        "geography": geo.label,
        "group_order": G.order,
        "n_subgroups": len(enumerate_subgroups(G, cap=args.group_cap)),
        "count": len(pats),
        "M_counts": {str(k): v for k, v in sorted(Ms.items())},
        "patterns": [p.to_dict() for p in pats],
    }
    if args.format == "csv":
        with open(_out(args, "patterns.csv"), "w") as fh:
            fh.write("id,M,support\n")
            for p in pats:
                fh.write(f"{p.id},{p.M},{' '.join(str(i + 1) for i in p.support)}\n")
    else:
        _dump(catalog, _out(args, "patterns.json"))
    return {"count": len(pats)}


def cmd_stability(args):
    from .equilibria import classify_stability, make_state, write_stability_csv
    from .sweep import emit_figure, ranges_to_json, stability_ranges

    model = _model(args)
    geo = model.geo
    pats, _ = _patterns(geo, args)
    if args.pattern is not None:
        pats = [p for p in pats if p.id == args.pattern]
        if not pats:
            raise UsageError(f"no pattern with id {args.pattern}")
    rows = []
    counts = {}
    for p in pats:
        eq = make_state(p, geo.K)
        rep = classify_stability(eq, model, args.tol)
        rows.append((p.id, p.M, model.params.phi, model.alpha, rep, model.potential(eq.state).f))
        counts[rep.verdict] = counts.get(rep.verdict, 0) + 1
    write_stability_csv(rows, _out(args, "stability.csv"))
    for k in sorted(counts):
        print(f"{k}: {counts[k]}")
    if args.grid_phi:
        phis = parse_range(args.grid_phi)
        ranges = stability_ranges(geo, model.alpha, phis, pats, tol=args.tol, workers=args.workers)
        _out(args, "ranges.json").write_text(ranges_to_json(ranges, model.alpha) + "\n")
        emit_figure(ranges, "range_chart", _out(args, "ranges.svg"), alpha=model.alpha,
                    phi_lim=(float(phis[0]), float(phis[-1])))
    return counts


def cmd_select(args):
    from .equilibria import make_state, select_global

    model = _model(args)
    pats, _ = _patterns(model.geo, args)
    sel = select_global([make_state(p, model.K) for p in pats], model)
    Mof = {p.id: p.M for p in pats}
    print("winners: " + " ".join(f"{i}(M={Mof[i]})" for i in sel.winner_ids))
    print(f"f_max: {sel.f_max!r}")
    out = {
        "alpha": model.alpha, "phi": model.params.phi, "geography": model.geo.label,
        "winner_ids": list(sel.winner_ids), "f_max": sel.f_max,
        "candidates": [{"id": p.id, "M": p.M, "f": sel.f[p.id], "g": sel.g[p.id]} for p in pats],
    }
    _dump(out, _out(args, "select.json"))
    return {"winner_ids": list(sel.winner_ids)}


def cmd_dynamics(args):
    from .dynamics import basin_sample, integrate

    model = _model(args)
    if args.samples:
        res = basin_sample(model, args.samples, args.seed, workers=args.workers, tol=args.tol,
                           concentration=args.concentration)
        _dump(res.to_dict(), _out(args, "basin.json"))
        for c in res.clusters:
            print(f"{c.count:6d}  support={int(np.sum(c.state > 0))}")
        return {"clusters": len(res.clusters)}
    if args.x0:
        x0 = np.array([float(t) for t in args.x0.split(",")])
    else:
        x0 = np.random.default_rng(args.seed).dirichlet(np.ones(model.K))
    traj = integrate(model, x0, tol=args.tol)
    traj.to_csv(_out(args, "trajectory.csv"))
    summary = {"converged": traj.converged, "terminal_residual": traj.terminal_residual,
               "t_final": float(traj.times[-1]), "final": traj.final.tolist(),
               "steps": traj.n_steps, "rejected": traj.n_rejected}
    _dump(summary, _out(args, "dynamics.json"))
    print(f"converged: {traj.converged}  residual: {traj.terminal_residual:.3e}")
    if not traj.converged:
        raise ArithmeticError(f"no convergence by t={traj.times[-1]:g}")
    return summary


def cmd_chain(args):
    from . import stochastic as st
    from .symmetry import lattice_group, trivial_group

    model = _model(args)
    spec = st.ChainSpec(model, args.N, args.eta)
    if args.mode == "exact":
        res = st.stationary_exact(spec)
        res.to_csv(_out(args, "stationary.csv"))
        k = int(np.argmax(res.probs))
        print(f"states: {len(res.probs)}  mode: {res.states[k].tolist()} ({res.probs[k]:.6g})")
        return {"states": len(res.probs)}
    if args.mode == "fit":
        res = st.stationary_exact(spec)
        fN = st.fit_fN(spec, res)
        free = st.eta_free_potential(spec, fN)
        ref = model.potential(np.asarray(st.pin_state(spec.K, spec.N)) / spec.N).f
        with open(_out(args, "fN.csv"), "w") as fh:
            fh.write(",".join(f"n_{i + 1}" for i in range(spec.K)) + ",fN,fN_eta_free,N_f\n")
            for s in sorted(fN, key=lambda c: tuple(reversed(c))):
                Nf = spec.N * (model.potential(np.asarray(s) / spec.N).f - ref)
                fh.write(",".join(map(str, s)) + f",{fN[s]!r},{free[s]!r},{Nf!r}\n")
        err = st.fN_error(spec, fN)
        print(f"sup |fN/N - f| = {err:.6g}")
        return {"error": err}
    sim = st.simulate(spec, args.jumps, args.seed)
    if spec.n_states <= 20_000:
        try:
            G = lattice_group(model.geo)
        except UnsupportedGeographyError:
            G = trivial_group(model.K)
        # states related by a symmetry are merged: metastable runs stay in one copy
        sim.tv_to_exact = st.tv_distance(st.stationary_exact(spec), sim.occupation, G)
        sim.extra["tv_quotient_group_order"] = G.order
    _out(args, "path_summary.json").write_text(sim.summary_json() + "\n")
    sim.occupation.to_csv(_out(args, "occupation.csv"))
    msg = f"jumps: {sim.jumps}  distinct states: {sim.distinct_states}"
    if sim.tv_to_exact is not None:
        msg += f"  tv_to_exact (up to symmetry): {sim.tv_to_exact:.4g}"
    print(msg)
    return sim.summary()


def cmd_bifurcate(args):
    from .sweep import bifurcation_2zone, emit_figure

    if args.alpha is None:
        raise UsageError("--alpha is required")
    res = bifurcation_2zone(args.alpha, parse_range(args.grid_phi or "0.001:0.999:0.001"),
                            tol=args.tol)
    res.to_csv(_out(args, "bifurcation.csv"))
    _dump(res.to_dict(), _out(args, "bifurcation.json"))
    emit_figure(res, "bifurcation", _out(args, "bifurcation.svg"))
    print(f"phi_star: {res.phi_star!r} (closed form {res.phi_star_closed!r})")
    print(f"phi_2star: {res.phi_2star!r} (closed form {res.phi_2star_closed!r})")
    print(f"note: {res.note}")
    return {"phi_star": res.phi_star, "phi_2star": res.phi_2star}


def cmd_partition(args):
    from .sweep import SweepGrid, emit_figure, partition

    geo = parse_geo(args.geo)
    pats, _ = _patterns(geo, args)
    grid = SweepGrid.from_ranges(args.grid_phi or "0.01:0.99:0.01",
                                 args.grid_alpha or "1.0:3.0:0.05")
    part = partition(geo, grid, pats)
    part.to_csv(_out(args, "partition.csv"))
    emit_figure(part, "partition_heatmap", _out(args, "partition.svg"), title=geo.label)
    Mof = {p.id: p.M for p in pats}
    wins = part.distinct_winners()
    print(f"distinct winners: {len(wins)}  " + " ".join(f"{i}(M={Mof[i]})" for i in wins))
    bad = part.monotonicity_violations()
    print(f"monotonicity violations: {len(bad)}")
    return {"distinct_winners": wins}


def cmd_plot(args):
    from .sweep import BifurcationResult, PartitionResult, emit_figure, ranges_from_json

    if not args.input:
        raise UsageError("--input is required")
    src = Path(args.input)
    if args.output:
        target = Path(args.output)
        args.out = str(target.parent)  # provenance goes next to the figure
    else:
        target = _out(args, f"{args.kind}.svg")
    if args.kind == "bifurcation":
        emit_figure(BifurcationResult.from_dict(json.loads(src.read_text())), args.kind, target)
    elif args.kind == "partition_heatmap":
        emit_figure(PartitionResult.from_csv(src), args.kind, target, title=args.title or "")
    else:
        ranges, alpha = ranges_from_json(src.read_text())
        emit_figure(ranges, args.kind, target, alpha=alpha)
    print(target)
    return {"figure": str(target)}


COMMANDS = {
    "geom": (cmd_geom, "build or inspect a geography"),
    "enumerate": (cmd_enumerate, "invariant patterns and their count"),
    "stability": (cmd_stability, "classify local stability of invariant patterns"),
    "select": (cmd_select, "global potential maximizer at one parameter point"),
    "dynamics": (cmd_dynamics, "integrate the entry/exit dynamics or sample basins"),
    "chain": (cmd_chain, "finite-population logit chain"),
    "bifurcate": (cmd_bifurcate, "two-zone bifurcation diagram"),
    "partition": (cmd_partition, "(phi, alpha) partition by global maximizer"),
    "plot": (cmd_plot, "SVG from a saved CSV/JSON result"),
}


def build_parser(defaults: dict | None = None) -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of option defaults (flags win)")
    common.add_argument("--geo", default="ring:2", help="kind:n (ring, square, tri) or a JSON path")
    common.add_argument("--alpha", type=float)
    g = common.add_mutually_exclusive_group()
    g.add_argument("--phi", type=float)
    g.add_argument("--beta", type=float)
    common.add_argument("--grid-phi", help="a:b:step")
    common.add_argument("--grid-alpha", help="a:b:step")
    common.add_argument("--N", type=int, default=8)
    common.add_argument("--eta", type=float, default=0.1)
    common.add_argument("--jumps", type=int, default=1_000_000)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float, default=1e-9)
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    common.add_argument("--format", choices=("csv", "json"), default="json")
    common.add_argument("--group-cap", type=int, default=1000)

    p = argparse.ArgumentParser(prog="urbanretail", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    subs = {}
    for name, (_, help_) in COMMANDS.items():
        subs[name] = sub.add_parser(name, parents=[common], help=help_)
    subs["stability"].add_argument("--pattern", type=int, help="pattern id (default: all)")
    subs["dynamics"].add_argument("--x0", help="comma-separated initial state")
    subs["dynamics"].add_argument("--samples", type=int, default=0, help="basin-sample this many starts")
    subs["dynamics"].add_argument("--concentration", type=float, default=1.0)
    subs["chain"].add_argument("--mode", choices=("exact", "simulate", "fit"), default="exact")
    subs["plot"].add_argument("--kind", choices=("bifurcation", "partition_heatmap", "range_chart"),
                              required=True)
    subs["plot"].add_argument("--input")
    subs["plot"].add_argument("--output", help="figure path (default: <out>/<kind>.svg)")
    subs["plot"].add_argument("--title", help="heatmap title (partition_heatmap only)")
    if defaults:
        for sp in subs.values():
            sp.set_defaults(**defaults)
    return p


def _parse(argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return build_parser().parse_args(argv)
    parser = build_parser()
    try:
        cfg = json.loads(Path(known.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"cannot read config {known.config}: {exc}")
    if not isinstance(cfg, dict):
        parser.error("config must be a JSON object")
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    dests = set(vars(build_parser().parse_args(["plot", "--kind", "bifurcation"])))
    dests |= {"pattern", "x0", "samples", "concentration", "mode", "title"}
    unknown = sorted(set(cfg) - dests - {"command"})
    if unknown:
        parser.error(f"unknown config keys: {', '.join(unknown)}")
    cfg.pop("command", None)
    if any(a.split("=")[0] in ("--phi", "--beta") for a in argv):
        cfg.pop("phi", None)
        cfg.pop("beta", None)
    return build_parser(cfg).parse_args(argv)


def _provenance(args, argv, wall, result):
    import scipy

    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("workers",)}
    return {
        "command": args.command,
        "argv": list(argv),
        "config": cfg,
        "seed": args.seed,
        "versions": {"urbanretail": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__, "python": platform.python_version()},
        "result": result,
        "wall_time_s": wall,
    }


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = _parse(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    fn = COMMANDS[args.command][0]
    t0 = time.perf_counter()
    try:
        result = fn(args)
    except (UsageError, ValueError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, ResourceLimitError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    wall = time.perf_counter() - t0
    _dump(_provenance(args, argv, wall, result), _out(args, f"{args.command}.provenance.json"))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
