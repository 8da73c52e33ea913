"""Execute an :class:`ExperimentConfig` and write its CSV artifacts.

Each run writes its tables plus ``manifest.json`` (configuration echo,
library version, wall time and the list of files) into the output
directory.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import dnwr_error_bound, nnwr_error_bound, optimal_relaxation
from .config import ConfigError, ExperimentConfig
from .csvout import Table, emit_csv
from .dnwr import DNWRSolver, sweep_theta_dnwr
from .experiments import coupled_for, dnwr_bound_run, nnwr_bound_run
from .nnwr import NNWRSolver, sweep_theta_nnwr
from .problem import ControlProblem, TabulatedTarget
from .spectral import decompose
from .subdomain import Partition, monodomain_solve
from .timeop import CoupledOperator
from .verify import report_table, verify_suite

__all__ = ["RunResult", "run_experiment", "write_outputs", "build_problem"]

log = logging.getLogger(__name__)


@dataclass
class RunResult:
    tables: dict[str, Table]
    failed: bool = False
    summary: dict = field(default_factory=dict)


def build_problem(cfg: ExperimentConfig, base_dir: Path | None = None) -> ControlProblem:
    p = cfg.problem
    pb = ControlProblem(alpha=p.alpha, sigma=p.sigma, horizon=p.horizon, space_domain=tuple(p.domain))
    if isinstance(p.target, dict):
        path = Path(p.target["file"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        try:
            pb = pb.with_target(TabulatedTarget.from_csv(path))
        except (OSError, ValueError) as exc:
            raise ConfigError("problem.target.file", str(exc)) from None
    return pb


def _operator(cfg: ExperimentConfig) -> CoupledOperator:
    p, d = cfg.problem, cfg.discretization
    try:
        return coupled_for(p.alpha, d.mesh, d.intervals, p.sigma, p.horizon)
    except ValueError as exc:
        raise ConfigError("discretization.intervals", str(exc)) from None


def _partition(cfg: ExperimentConfig) -> Partition:
    dec = cfg.decomposition
    return Partition(tuple(dec.breakpoints), tuple(dec.kappas))


def _scalar_relaxation(value, default: float, key: str) -> float:
    if value == "auto":
        return default
    if isinstance(value, list):
        if len(value) != 1:
            raise ConfigError(key, "DNWR takes a single value")
        return float(value[0])
    return float(value)


def _need_subdomains(cfg: ExperimentConfig, part: Partition, exactly: int | None = None, least: int = 2):
    n = part.N
    if (exactly is not None and n != exactly) or n < least:
        want = exactly if exactly is not None else f"at least {least}"
        raise ConfigError("decomposition.breakpoints", f"{cfg.algorithm} needs {want} subdomains, got {n}")


def _monodomain(cfg, pb, op, **_) -> RunResult:
    mono = monodomain_solve(pb, cfg.discretization.dx, op)
    rows = [(float(mono.x[i]), float(mono.t[j]), float(mono.y[i, j]), float(mono.p[i, j]), float(mono.u[i, j]))
            for i in range(mono.x.size) for j in range(mono.t.size)]
    return RunResult({"monodomain.csv": Table(["x", "t", "y", "p", "u"], rows)}, summary={"cost": mono.cost})


def _dnwr(cfg, pb, op, **_) -> RunResult:
    part = _partition(cfg)
    _need_subdomains(cfg, part, exactly=2)
    theta = _scalar_relaxation(cfg.relaxation.theta, optimal_relaxation(part.kappas, "dnwr"), "relaxation.theta")
    phi = _scalar_relaxation(cfg.relaxation.phi, theta, "relaxation.phi")
    solver = DNWRSolver(pb, part, cfg.discretization.dx, op)
    rep, _ = solver.run(theta, phi, tol=cfg.control.tol, max_iter=cfg.control.max_iter)
    sd = decompose(op)
    a, b = part.scaled_lengths
    k1, k2 = part.kappas
    curve = dnwr_error_bound(sd, a, b, k1, k2, rep.iterations, rep.errors[0])
    rows = [(k, e, float(curve.values[k])) for k, e in enumerate(rep.errors)]
    return RunResult({"dnwr.csv": Table(["iteration", "error", "bound"], rows)},
                     summary=_report_summary(rep))


def _nnwr(cfg, pb, op, threads: int = 1, **_) -> RunResult:
    part = _partition(cfg)
    r = cfg.relaxation
    solver = NNWRSolver(pb, part, cfg.discretization.dx, op, threads=threads)
    phis = None if r.phi == "auto" and r.theta != "auto" else r.phi
    try:
        rep, _ = solver.run(r.theta, phis, tol=cfg.control.tol, max_iter=cfg.control.max_iter)
    except ValueError as exc:
        raise ConfigError("relaxation", str(exc)) from None
    curve = nnwr_error_bound(decompose(op), part, rep.iterations, rep.errors[0])
    n_if = part.N - 1
    header = ["iteration"] + [f"error_interface{i + 1}" for i in range(n_if)] + ["max_error", "bound"]
    rows = [(k, *map(float, rep.interface_errors[k]), e, float(curve.values[k]))
            for k, e in enumerate(rep.errors)]
    return RunResult({"nnwr.csv": Table(header, rows)}, summary=_report_summary(rep))


def _bounds(cfg, pb, op, **_) -> RunResult:
    part = _partition(cfg)
    p, d = cfg.problem, cfg.discretization
    sd = decompose(op)
    common = dict(kind=d.mesh, intervals=d.intervals, sigma=p.sigma, horizon=p.horizon, dx=d.dx, op=op, sd=sd)
    if part.N == 2:
        h1, h2 = part.lengths
        run = dnwr_bound_run(p.alpha, h1, h2, part.kappas, iterations=cfg.control.max_iter, **common)
    else:
        run = nnwr_bound_run(p.alpha, part.breakpoints, part.kappas, tol=cfg.control.tol,
                             max_iter=cfg.control.max_iter, **common)
    table = Table(["k", "measured", "bound", "rho", "lambda", "cond_inf"], run.rows())
    return RunResult({"bounds.csv": table}, summary={"dominated": bool(np.all(run.dominated()))})


def _verify(cfg, pb, op, seed: int = 0, **_) -> RunResult:
    results = verify_suite(seed)
    failed = any(r.failed for r in results)
    return RunResult({"verify.csv": report_table(results)}, failed=failed,
                     summary={"failed": [r.name for r in results if r.failed]})


def _sweep(cfg, pb, op, **_) -> RunResult:
    part = _partition(cfg)
    s, dx = cfg.sweep, cfg.discretization.dx
    try:
        if part.N == 2:
            tab = sweep_theta_dnwr(pb, part, s.grid, dx, op.mesh, s.fixed_iterations,
                                   solver=DNWRSolver(pb, part, dx, op))
            header = ["theta", "error_after_K"]
        else:
            grids = [s.grid] * (part.N - 1)
            tab = sweep_theta_nnwr(pb, part, grids, dx, op.mesh, s.fixed_iterations,
                                   solver=NNWRSolver(pb, part, dx, op))
            header = [f"theta{i + 1}" for i in range(part.N - 1)] + ["error_after_K"]
    except ValueError as exc:
        raise ConfigError("sweep.grid", str(exc)) from None
    return RunResult({"sweep.csv": Table(header, tab.rows())}, summary={"argmin": list(tab.argmin)})


def _report_summary(rep) -> dict:
    return {"iterations": rep.iterations, "converged": rep.converged, "diverged": rep.diverged,
            "final_error": rep.final_error, "rate": rep.rate}


_PIPELINES = {
    "monodomain": _monodomain,
    "dnwr": _dnwr,
    "nnwr": _nnwr,
    "bounds": _bounds,
    "verify": _verify,
    "sweep": _sweep,
}


def operator_tables(op: CoupledOperator) -> dict[str, Table]:
    """Dense time operators for debugging."""
    out = {}
    for name, M in (("L_fwd", op.L_fwd.entries), ("L_bwd", op.L_bwd.entries), ("coupled", op.matrix)):
        header = [f"c{j}" for j in range(M.shape[1])]
        out[f"operators/{name}.csv"] = Table(header, [tuple(map(float, r)) for r in M])
    return out


def run_experiment(cfg: ExperimentConfig, threads: int = 1, seed: int = 0,
                   base_dir: Path | None = None, dump_operators: bool = False) -> RunResult:
    """Run the configured pipeline; nothing is written to disk."""
    cfg.validate()
    pb = build_problem(cfg, base_dir)
    op = None if cfg.algorithm == "verify" else _operator(cfg)
    res = _PIPELINES[cfg.algorithm](cfg, pb, op, threads=threads, seed=seed)
    if dump_operators and op is not None:
        res.tables.update(operator_tables(op))
    return res


def write_outputs(tables: dict[str, Table], out_dir: str | Path, manifest: dict) -> list[Path]:
    """Write every table plus ``manifest.json``; returns the written paths."""
    out_dir = Path(out_dir)
    paths = [emit_csv(t, out_dir / name) for name, t in tables.items()]
    man = dict(manifest, version=__version__, files=sorted(tables))
    mpath = out_dir / "manifest.json"
    try:
        mpath.write_text(json.dumps(man, indent=2, sort_keys=True, default=_json_default) + "\n",
                         encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {mpath}: {exc.strerror}") from None
    return paths + [mpath]


def _json_default(v):
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return str(v)


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0
