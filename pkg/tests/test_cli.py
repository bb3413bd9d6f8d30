import json

import pytest

from urbanretail.cli import EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main
from urbanretail.geometry import parse_geo
from urbanretail.symmetry import invariant_supports, lattice_group


def run(tmp_path, *argv):
    return main(list(argv) + ["--out", str(tmp_path)])


def test_enumerate_prints_count(tmp_path, capsys):
    assert run(tmp_path, "enumerate", "--geo", "square:3") == EXIT_OK
    geo = parse_geo("square:3")
    assert capsys.readouterr().out.strip() == str(len(invariant_supports(geo, lattice_group(geo))))
    cat = json.loads((tmp_path / "patterns.json").read_text())
    assert cat["count"] == len(cat["patterns"])
    assert run(tmp_path, "enumerate", "--geo", "square:3", "--format", "csv") == EXIT_OK
    assert (tmp_path / "patterns.csv").read_text().startswith("id,M,support\n1,1,")


def test_geom_and_provenance(tmp_path, capsys):
    assert run(tmp_path, "geom", "--geo", "tri:3") == EXIT_OK
    assert "K: 9" in capsys.readouterr().out
    prov = json.loads((tmp_path / "geom.provenance.json").read_text())
    assert prov["command"] == "geom" and prov["seed"] == 0
    assert {"numpy", "scipy", "urbanretail", "python"} <= set(prov["versions"])
    assert prov["wall_time_s"] >= 0


@pytest.mark.parametrize("argv", [
    ["select", "--phi", "0.5"],                            # no alpha
    ["select", "--alpha", "1.2"],                          # no phi/beta
    ["select", "--alpha", "1.2", "--phi", "0.5", "--beta", "1"],
    ["select", "--alpha", "1.2", "--phi", "1.5"],
    ["select", "--alpha", "1.2", "--phi", "0.5", "--geo", "hex:4"],
    ["stability", "--alpha", "1.2", "--phi", "0.5", "--pattern", "99"],
    ["plot", "--kind", "bifurcation"],
    ["frobnicate"],
])
def test_usage_errors(tmp_path, argv):
    assert run(tmp_path, *argv) == EXIT_USAGE


def test_resource_limit_is_numeric_failure(tmp_path, capsys):
    rc = run(tmp_path, "chain", "--geo", "ring:8", "--alpha", "1.2", "--phi", "0.5", "--N", "200")
    assert rc == EXIT_NUMERIC
    assert "simulate" in capsys.readouterr().err


def test_config_defaults_and_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"alpha": 1.2, "phi": 0.2, "geo": "ring:2"}))
    assert run(tmp_path, "select", "--config", str(cfg)) == EXIT_OK
    sel = json.loads((tmp_path / "select.json").read_text())
    assert sel["phi"] == 0.2 and sel["winner_ids"] == [2]
    assert run(tmp_path, "select", "--config", str(cfg), "--phi", "0.9") == EXIT_OK
    sel = json.loads((tmp_path / "select.json").read_text())
    assert sel["phi"] == 0.9 and sel["winner_ids"] == [1]
    # a command-line beta replaces the configured phi instead of clashing with it
    assert run(tmp_path, "select", "--config", str(cfg), "--beta", "3.0") == EXIT_OK
    cfg.write_text(json.dumps({"alpha": 1.2, "colour": "red"}))
    assert run(tmp_path, "select", "--config", str(cfg), "--phi", "0.5") == EXIT_USAGE


def _snapshot(d):
    out = {}
    for p in sorted(d.iterdir()):
        if p.name.endswith(".provenance.json"):
            prov = json.loads(p.read_text())
            prov.pop("wall_time_s")
            out[p.name] = prov
        else:
            out[p.name] = p.read_bytes()
    return out


@pytest.mark.parametrize("argv", [
    ["select", "--geo", "square:3", "--alpha", "1.5", "--phi", "0.3"],
    ["stability", "--geo", "square:3", "--alpha", "1.5", "--phi", "0.3", "--grid-phi", "0.1:0.9:0.2"],
    ["dynamics", "--geo", "ring:4", "--alpha", "1.2", "--phi", "0.3", "--samples", "8"],
    ["chain", "--mode", "simulate", "--alpha", "1.2", "--phi", "0.5", "--jumps", "20000", "--seed", "7"],
    ["chain", "--mode", "fit", "--alpha", "1.2", "--phi", "0.5", "--N", "12"],
    ["bifurcate", "--alpha", "1.2", "--grid-phi", "0.05:0.95:0.05"],
    ["partition", "--geo", "square:3", "--grid-phi", "0.1:0.9:0.1", "--grid-alpha", "1.0:2.0:0.25"],
])
def test_repeat_runs_identical(tmp_path, argv):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(argv + ["--out", str(a), "--workers", "1"]) == EXIT_OK
    first = _snapshot(a)
    assert main(argv + ["--out", str(a), "--workers", "1"]) == EXIT_OK
    assert _snapshot(a) == first
    # a different output directory changes only the recorded paths
    assert main(argv + ["--out", str(b), "--workers", "1"]) == EXIT_OK
    other = _snapshot(b)
    assert {k: v for k, v in other.items() if not k.endswith(".provenance.json")} == \
        {k: v for k, v in first.items() if not k.endswith(".provenance.json")}


def test_plot_reproduces_figures(tmp_path):
    assert run(tmp_path, "bifurcate", "--alpha", "1.2", "--grid-phi", "0.1:0.9:0.1") == EXIT_OK
    out = tmp_path / "re.svg"
    assert run(tmp_path, "plot", "--kind", "bifurcation", "--input",
               str(tmp_path / "bifurcation.json"), "--output", str(out)) == EXIT_OK
    assert out.read_bytes() == (tmp_path / "bifurcation.svg").read_bytes()
    assert run(tmp_path, "partition", "--geo", "ring:4", "--grid-phi", "0.1:0.9:0.2",
               "--grid-alpha", "1.0:2.0:0.5") == EXIT_OK
    assert run(tmp_path, "plot", "--kind", "partition_heatmap", "--input",
               str(tmp_path / "partition.csv"), "--output", str(out), "--title", "ring:4") == EXIT_OK
    assert out.read_bytes() == (tmp_path / "partition.svg").read_bytes()


def test_dynamics_trajectory(tmp_path, capsys):
    rc = run(tmp_path, "dynamics", "--alpha", "1.2", "--phi", "0.5", "--x0", "0.6,0.4")
    assert rc == EXIT_OK
    summary = json.loads((tmp_path / "dynamics.json").read_text())
    assert summary["converged"] and summary["final"] == pytest.approx([1.0, 0.0], abs=1e-8)
    assert (tmp_path / "trajectory.csv").exists()


def test_bifurcate_reports_printed_formula(tmp_path, capsys):
    assert run(tmp_path, "bifurcate", "--alpha", "1.2", "--grid-phi", "0.1:0.9:0.1") == EXIT_OK
    out = capsys.readouterr().out
    assert "0.42020410" in out and "0.34041162" in out and "not a root" in out


def test_plot_provenance_next_to_figure(tmp_path):
    assert run(tmp_path, "bifurcate", "--alpha", "1.2", "--grid-phi", "0.1:0.9:0.1") == EXIT_OK
    fig = tmp_path / "figs" / "b.svg"
    fig.parent.mkdir()
    assert main(["plot", "--kind", "bifurcation", "--input", str(tmp_path / "bifurcation.json"),
                 "--output", str(fig)]) == EXIT_OK
    assert (fig.parent / "plot.provenance.json").exists()
