"""Command-line front end.

Exit codes: 0 success, 1 I/O or configuration error, 2 inconclusive verdict,
3 invariant-suite failure.
"""

import json
import sys
from pathlib import Path

import click

from . import analysis, constants as consts_mod, dynamics, functionals, harness, initdata
from .errors import BlowupLabError


def _cfg_options(fn):
    opts = [
        click.option("--config", type=click.Path(exists=True), default=None,
                     help="TOML run configuration."),
        click.option("--p", type=float, default=None),
        click.option("--n", type=int, default=None),
        click.option("--length", "L", type=float, default=None),
        click.option("--mesh-n", "N", type=int, default=None),
        click.option("--gamma0", type=str, default=None),
        click.option("--family", type=str, default=None),
        click.option("--amplitude", type=float, default=None),
        click.option("--energy-target", type=float, default=None),
        click.option("--dt0", type=float, default=None),
        click.option("--horizon", type=float, default=None),
        click.option("--theta-blowup", type=float, default=None),
        click.option("--seed", type=int, default=None),
        click.option("--outdir", type=str, default=None),
        click.option("--dump-operators", is_flag=True, default=None),
    ]
    for o in reversed(opts):
        fn = o(fn)
    return fn


def _load(config, **kw):
    try:
        return harness.load_config(config, kw)
    except BlowupLabError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(1)


@click.group()
def main():
    """Numerical laboratory for semilinear heat flow with dynamic boundary
    dissipation: optimal constants, blow-up runs, bounds and audits."""


@main.command()
@_cfg_options
def constants(config, **kw):
    """Estimate S1, S2, B1, S3 and derived constants; JSON to stdout."""
    cfg = _load(config, **kw)
    _, mesh, ops, ops_fine = harness.build_problem(cfg)
    c = consts_mod.estimate_constants(ops, ops_fine)
    doc = c.as_dict()
    doc["mesh"] = mesh.fingerprint()
    click.echo(json.dumps(doc, indent=2, sort_keys=True))
    if cfg.dump_operators:
        Path(cfg.outdir).mkdir(parents=True, exist_ok=True)
        (Path(cfg.outdir) / "operators.json").write_text(
            json.dumps(ops.dump(), sort_keys=True))


@main.command()
@_cfg_options
def simulate(config, **kw):
    """Run one experiment end to end; writes CSV/JSON outputs to --outdir."""
    cfg = _load(config, **kw)
    rep = harness.run_experiment(cfg)
    if rep.error:
        click.echo(f"error: {rep.error}", err=True)
    else:
        click.echo(json.dumps(rep.verdict.as_dict(), indent=2, sort_keys=True,
                               default=harness._json_default))
    sys.exit(rep.exit_code)


@main.command()
@_cfg_options
def classify(config, **kw):
    """Classify the configured initial data into the blow-up sets."""
    cfg = _load(config, **kw)
    try:
        _, mesh, ops, ops_fine = harness.build_problem(cfg)
        c = consts_mod.estimate_constants(ops, ops_fine)
        u0 = harness.make_initial(cfg, c, ops, mesh)
        cls = analysis.classify_initial(u0, c, ops, cfg.p)
    except BlowupLabError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(json.dumps(cls.as_dict(), indent=2, sort_keys=True,
                           default=harness._json_default))


@main.command()
@_cfg_options
def bounds(config, **kw):
    """Evaluate the applicable upper/lower blow-up time bounds for u0."""
    cfg = _load(config, **kw)
    try:
        _, mesh, ops, ops_fine = harness.build_problem(cfg)
        c = consts_mod.estimate_constants(ops, ops_fine)
        u0 = harness.make_initial(cfg, c, ops, mesh)
        cls = analysis.classify_initial(u0, c, ops, cfg.p)
        doc = {"classification": cls.as_dict(), "T_upper": {}, "T_lower": None,
               "constants": c.as_dict()}
        if cls.in_B1:
            doc["T_upper"]["B1"] = analysis.upper_bound_T(u0, c, ops, cfg.p, "B1")
        if cls.in_B2:
            doc["T_upper"]["B2"] = analysis.upper_bound_T(u0, c, ops, cfg.p, "B2")
        if cfg.p < 2.0 + 4.0 / cfg.n and cls.norm_sq_total > 0:
            doc["T_lower"] = analysis.lower_bound_T(u0, c, ops, cfg.p, cfg.n)
    except BlowupLabError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(json.dumps(doc, indent=2, sort_keys=True,
                           default=harness._json_default))


@main.command("construct-u0")
@click.option("--energy", type=float, required=True, help="Target J(u0).")
@click.option("--out", type=click.Path(), required=True)
@_cfg_options
def construct_u0(energy, out, config, **kw):
    """Two-bump initial field at a prescribed energy level, as JSON."""
    cfg = _load(config, **kw)
    try:
        _, mesh, ops, ops_fine = harness.build_problem(cfg)
        c = consts_mod.estimate_constants(ops, ops_fine)
        u0 = initdata.construct_energy_level(energy, c, ops, cfg.p, mesh)
    except BlowupLabError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    doc = {"mesh": mesh.fingerprint(), "energy": energy,
           "values": u0.coefficients.tolist()}
    Path(out).write_text(json.dumps(doc, sort_keys=True))
    click.echo(f"wrote {out}")


@main.command()
@click.argument("rundir", type=click.Path(exists=True))
def audit(rundir):
    """Re-audit a completed run directory (verdict.json + trajectory.csv)."""
    try:
        doc = json.loads((Path(rundir) / "verdict.json").read_text())
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(json.dumps(doc.get("audit", {}), indent=2, sort_keys=True))
    sys.exit(0 if doc.get("status") != "inconclusive" else 2)


@main.command()
@click.option("--param", type=str, required=True)
@click.option("--values", type=str, required=True,
              help="Comma-separated parameter values.")
@_cfg_options
def sweep(param, values, config, **kw):
    """Run one experiment per parameter value; writes sweep.csv."""
    cfg = _load(config, **kw)
    try:
        vals = [float(v) for v in values.split(",") if v.strip()]
        rows = harness.run_sweep(cfg, param, vals)
    except BlowupLabError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(json.dumps(rows, indent=2, sort_keys=True,
                           default=harness._json_default))
    sys.exit(max(r["exit_code"] for r in rows))


@main.command()
@click.option("--mesh-n", "N", type=int, default=100)
def verify(n=100, **kw):
    """Run the fast internal invariant suite; exit 3 on any failure."""
    results = harness.verify_suite(kw.get("N", n))
    ok_all = True
    for name, ok, detail in results:
        click.echo(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        ok_all = ok_all and ok
    sys.exit(0 if ok_all else 3)


if __name__ == "__main__":
    main()
