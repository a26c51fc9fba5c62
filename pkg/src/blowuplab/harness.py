"""Experiment orchestration: configuration, the single-run pipeline,
parameter sweeps and result persistence."""

import csv
import dataclasses
import json
import math
import os
try:
    import tomllib
except ModuleNotFoundError:          # Python < 3.11
    import tomli as tomllib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dfield, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import analysis, constants as consts_mod, dynamics, functionals, initdata
from .errors import BlowupLabError, ConfigError
from .fields import Field
from .mesh import build_interval_mesh, build_rectangle_mesh
from .operators import assemble_operators
from .problem import ProblemSpec

DEFAULT_SEED = 12345


@dataclass(frozen=True)
class RunConfig:
    p: float = 4.0
    n: int = 1
    L: float = 1.0
    Ly: float = 1.0
    N: int = 200
    Ny: int = 20
    gamma0: str = "left"
    family: str = "ramp"
    amplitude: float = 3.0
    frequency: int = 1
    energy_target: Optional[float] = None   # use the two-bump construction
    dt0: float = 1e-4
    dt_min: float = 1e-30
    dt_max: float = math.inf
    safety: float = 0.9
    step_target: float = 0.05
    theta_blowup: float = 1e8
    horizon: float = 10.0
    record_every: int = 1
    extrapolation_window: int = 8
    blowup_norm: str = "sup"
    outdir: str = "runs/out"
    seed: int = DEFAULT_SEED
    run_audits: bool = True
    run_bounds: bool = True
    dump_operators: bool = False

    def integrator(self) -> dynamics.IntegratorConfig:
        return dynamics.IntegratorConfig(
            dt0=self.dt0, dt_min=self.dt_min, dt_max=self.dt_max,
            safety=self.safety,
            step_target=self.step_target, theta_blowup=self.theta_blowup,
            horizon=self.horizon, record_every=self.record_every,
            extrapolation_window=self.extrapolation_window,
            blowup_norm=self.blowup_norm)


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> RunConfig:
    """TOML file plus CLI overrides; precedence overrides > file > defaults."""
    data = {}
    if path:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    names = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(**data)


def build_problem(cfg: RunConfig):
    if cfg.n == 1:
        spec = ProblemSpec(n=1, p=cfg.p, geometry=(cfg.L,), gamma0_tag=cfg.gamma0)
        mesh = build_interval_mesh(cfg.L, cfg.N, cfg.gamma0)
        mesh_fine = build_interval_mesh(cfg.L, 2 * cfg.N, cfg.gamma0)
    else:
        spec = ProblemSpec(n=2, p=cfg.p, geometry=(cfg.L, cfg.Ly), gamma0_tag=cfg.gamma0)
        edges = spec.gamma0_edges
        mesh = build_rectangle_mesh(cfg.L, cfg.Ly, cfg.N, cfg.Ny, edges)
        mesh_fine = build_rectangle_mesh(cfg.L, cfg.Ly, 2 * cfg.N, 2 * cfg.Ny, edges)
    ops = assemble_operators(mesh, spec)
    ops_fine = assemble_operators(mesh_fine, spec)
    return spec, mesh, ops, ops_fine


def make_initial(cfg: RunConfig, consts, ops, mesh) -> Field:
    if cfg.energy_target is not None:
        return initdata.construct_energy_level(cfg.energy_target, consts, ops,
                                               cfg.p, mesh)
    spec = initdata.InitialDataSpec(family=cfg.family, amplitude=cfg.amplitude,
                                    frequency=cfg.frequency)
    return initdata.make_field(spec, mesh)


def _json_default(o):
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _json_dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True,
                               default=_json_default) + "\n")


def write_trajectory_csv(traj, resid, path: Path) -> None:
    rows = []
    er = [float("nan")] + list(np.abs(resid.energy)) if resid is not None else None
    for i, r in enumerate(traj.reports):
        rows.append(r.csv_row(er[i] if er is not None else float("nan")))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(functionals.CSV_COLUMNS)
        for row in rows:
            w.writerow([repr(x) for x in row])


PLOT_SCRIPT = """\
#!/usr/bin/env python3
# Renders the monitored quantities of one run from trajectory.csv.
# Usage: python plot_run.py [trajectory.csv]
import csv, json, sys
import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "trajectory.csv"
with open(path) as fh:
    rows = list(csv.DictReader(fh))
t = [float(r["t"]) for r in rows]
fig, axes = plt.subplots(2, 2, figsize=(10, 7))
for ax, key in zip(axes.ravel(), ["J", "K", "rho", "l2_norm_sq"]):
    ax.plot(t, [float(r[key]) for r in rows])
    ax.set_xlabel("t"); ax.set_ylabel(key)
try:
    v = json.load(open("verdict.json"))
    for ax in axes.ravel():
        for key, color in (("T_est", "r"),):
            if v.get(key) is not None:
                ax.axvline(v[key], color=color, ls="--", lw=0.8)
        for name, val in (v.get("T_upper") or {}).items():
            ax.axvline(val, color="k", ls=":", lw=0.8)
        if v.get("T_lower") is not None:
            ax.axvline(v["T_lower"], color="g", ls=":", lw=0.8)
except FileNotFoundError:
    pass
fig.tight_layout()
fig.savefig("run.png", dpi=150)
print("wrote run.png")
"""


@dataclass
class ExperimentReport:
    outdir: str
    classification: analysis.Classification
    verdict: dynamics.BlowupVerdict
    constants: consts_mod.SobolevConstants
    sandwich_ok: Optional[bool] = None
    exit_code: int = 0
    error: str = ""

    def summary(self) -> dict:
        return {
            "outdir": self.outdir,
            "classification": self.classification.as_dict() if self.classification else None,
            "verdict": self.verdict.as_dict() if self.verdict else None,
            "constants": self.constants.as_dict() if self.constants else None,
            "sandwich_ok": self.sandwich_ok,
            "exit_code": self.exit_code,
            "error": self.error,
        }


def run_experiment(cfg: RunConfig) -> ExperimentReport:
    """constants -> u0 -> classify -> simulate -> audits -> bounds -> files."""
    out = Path(cfg.outdir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        return ExperimentReport(cfg.outdir, None, None, None,
                                exit_code=1, error=f"output directory unusable: {exc}")
    try:
        spec, mesh, ops, ops_fine = build_problem(cfg)
        consts = consts_mod.estimate_constants(ops, ops_fine)
        u0 = make_initial(cfg, consts, ops, mesh)
        cls = analysis.classify_initial(u0, consts, ops, cfg.p)
        traj, verdict = dynamics.simulate(u0, cfg.integrator(), ops, cfg.p)

        if cfg.p > 2.0:
            A = consts.A
            traj.reports = [replace_H(r, A) for r in traj.reports]
        resid = None
        if cfg.run_audits and len(traj.reports) >= 2 and cfg.record_every == 1:
            resid = functionals.identity_residuals(traj, ops, cfg.p)
            verdict.audit["max_energy_residual_rel"] = resid.max_energy_rel
            audit = analysis.invariance_audit(traj, consts, ops, cfg.p, verdict)
            verdict.audit.update(audit.as_dict())

        sandwich_ok = None
        if cfg.run_bounds:
            if cls.in_B1:
                verdict.T_upper["B1"] = analysis.upper_bound_T(u0, consts, ops, cfg.p, "B1")
            if cls.in_B2:
                verdict.T_upper["B2"] = analysis.upper_bound_T(u0, consts, ops, cfg.p, "B2")
            if (cfg.p > 2.0 and cfg.p < 2.0 + 4.0 / cfg.n
                    and consts.C_tilde is not None and cls.norm_sq_total > 0):
                verdict.T_lower = analysis.lower_bound_T(u0, consts, ops, cfg.p, cfg.n)
            if verdict.status == "blown_up" and verdict.T_upper:
                ub = min(verdict.T_upper.values())
                sandwich_ok = verdict.T_est <= 1.05 * ub
                if verdict.T_lower is not None:
                    sandwich_ok = sandwich_ok and verdict.T_est >= 0.95 * verdict.T_lower
                verdict.audit["sandwich_ok"] = sandwich_ok

        write_trajectory_csv(traj, resid, out / "trajectory.csv")
        _json_dump(verdict.as_dict(), out / "verdict.json")
        _json_dump(consts.as_dict(), out / "constants.json")
        _json_dump(cls.as_dict(), out / "classification.json")
        _json_dump({"mesh": mesh.fingerprint(),
                    "values": u0.coefficients.tolist()}, out / "u0.json")
        (out / "plot_run.py").write_text(PLOT_SCRIPT)
        if cfg.dump_operators:
            _json_dump(ops.dump(), out / "operators.json")
        code = 0 if verdict.status != "inconclusive" else 2
        return ExperimentReport(cfg.outdir, cls, verdict, consts,
                                sandwich_ok=sandwich_ok, exit_code=code)
    except BlowupLabError as exc:
        rep = ExperimentReport(cfg.outdir, None, None, None, exit_code=1,
                               error=str(exc))
        _json_dump(rep.summary(), out / "error.json")
        return rep


def replace_H(r: functionals.EnergyReport, A: float) -> functionals.EnergyReport:
    return dataclasses.replace(r, H=r.rho - A * r.J)


SWEEP_COLUMNS = ["param", "J0", "K0", "in_B1", "in_B2", "status", "T_est",
                 "T_upper", "T_lower", "sandwich_ok", "exit_code"]


def run_sweep(base: RunConfig, param: str, values) -> list:
    """One experiment per value of `param`, in parallel, deterministic order.

    Worker count is capped by BLOWUPLAB_THREADS (default 4)."""
    values = list(values)
    if not values:
        raise ConfigError("sweep axis must be nonempty")
    if param not in {f.name for f in dataclasses.fields(RunConfig)}:
        raise ConfigError(f"unknown sweep parameter {param!r}")
    workers = int(os.environ.get("BLOWUPLAB_THREADS", "4")) or 1

    def one(iv):
        i, v = iv
        cfg = replace(base, **{param: v,
                               "outdir": str(Path(base.outdir) / f"{param}_{i:03d}"),
                               "seed": base.seed + i})
        return run_experiment(cfg)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as ex:
        reports = list(ex.map(one, enumerate(values)))

    rows = []
    for v, rep in zip(values, reports):
        cls, vd = rep.classification, rep.verdict
        ub = min(vd.T_upper.values()) if vd and vd.T_upper else None
        rows.append({
            "param": v,
            "J0": cls.J0 if cls else None, "K0": cls.K0 if cls else None,
            "in_B1": cls.in_B1 if cls else None, "in_B2": cls.in_B2 if cls else None,
            "status": vd.status if vd else "error",
            "T_est": vd.T_est if vd else None,
            "T_upper": ub, "T_lower": vd.T_lower if vd else None,
            "sandwich_ok": rep.sandwich_ok, "exit_code": rep.exit_code,
        })
    out = Path(base.outdir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v)
                        for k, v in row.items()})
    return rows


def verify_suite(N: int = 100) -> list:
    """Fast internal invariant suite for the `verify` subcommand.

    Returns (name, ok, detail) triples; any failure maps to exit code 3.
    """
    import numpy as np
    results = []
    spec = ProblemSpec(n=1, p=4.0, geometry=(1.0,), gamma0_tag="left")
    mesh = build_interval_mesh(1.0, N, "left")
    ops = assemble_operators(mesh, spec)

    s2 = consts_mod.estimate_S2(ops)
    results.append(("S2_interval_oracle", abs(s2 - 4 / np.pi ** 2) < 5e-3,
                    f"S2={s2:.7f} vs 4/pi^2={4 / np.pi ** 2:.7f}"))
    s1 = consts_mod.estimate_S1(ops)
    results.append(("S1_interval_oracle", abs(s1 - 1.0) < 1e-8, f"S1={s1:.12f}"))
    b1 = consts_mod.estimate_B1(ops, 4.0)
    results.append(("B1_ramp_lower_bound", b1 >= 0.2 ** 0.25 - 1e-9, f"B1={b1:.7f}"))

    sob = consts_mod.SobolevConstants(p=4.0, n=1, S1=s1, S2=s2, B1=b1)
    rng = np.random.default_rng(2024)
    worst = np.inf
    from .fields import make_constrained as mk
    from .functionals import nehari_scale
    for _ in range(25):
        w = mk(rng.standard_normal(mesh.n_nodes), mesh)
        lam = nehari_scale(w, ops, 4.0)
        v = 1.1 * lam * w.coefficients
        lp = ops.lp_norm_p(v, 4.0)
        worst = min(worst, lp - (2 * 4.0 / 2.0) * sob.d)
    results.append(("nehari_lp_lower_bound", worst > 0.0, f"min margin {worst:.3e}"))

    u0 = initdata.make_field(initdata.InitialDataSpec("ramp", 3.0), mesh)
    traj, vd = dynamics.simulate(u0, dynamics.IntegratorConfig(dt0=1e-4, horizon=5.0),
                                 ops, 4.0)
    results.append(("ramp3_blows_up", vd.status == "blown_up", f"status={vd.status}"))
    if vd.status == "blown_up":
        ub = analysis.upper_bound_T(u0, sob, ops, 4.0, "B1")
        results.append(("ramp3_upper_bound", vd.T_est <= 1.05 * ub,
                        f"T_est={vd.T_est:.5f}, T_upper={ub:.5f}"))
    return results
