"""Named pipelines that regenerate each figure's data table at desk scale.

Every preset returns ``{file name: Table}``; independent runs inside a
preset may be spread over worker threads, results are collected in a fixed
order so the output does not depend on the thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

from .bounds import convergence_factor_rho, estimate_numerical_rate
from .csvout import Table
from .dnwr import DNWRSolver, sweep_theta_dnwr
from .experiments import coupled_for, dnwr_bound_run, nnwr_bound_run, subdomain_size_sweep
from .nnwr import NNWRSolver, sweep_theta_nnwr
from .problem import ControlProblem
from .spectral import decompose
from .subdomain import Partition, monodomain_solve
from .timegrid import MeshKind

__all__ = ["PRESETS", "run_preset", "UnknownPreset", "nnwr_mirrored_kappas"]

MESHES = tuple(k.value for k in MeshKind)
THETA_GRID = tuple(round(0.05 * k, 10) for k in range(1, 20))
NNWR_GRID = tuple(round(0.02 * k, 10) for k in range(1, 25))
DX = 0.05
INTERVALS = 100


class UnknownPreset(KeyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self) -> str:
        return f"unknown preset {self.name!r}; available: {', '.join(PRESETS)}"


def _fan_out(fn: Callable, items, threads: int) -> list:
    items = list(items)
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def fig00(threads: int = 1) -> dict[str, Table]:
    """Monodomain state, control and target on the space-time grid."""
    alpha = 0.5
    pb = ControlProblem(alpha=alpha)
    op = coupled_for(alpha)
    mono = monodomain_solve(pb, DX, op)
    X, T = np.meshgrid(mono.x, mono.t, indexing="ij")
    yq = pb.target(X, T)
    rows = [(float(mono.x[i]), float(mono.t[j]), float(mono.y[i, j]), float(mono.u[i, j]), float(yq[i, j]))
            for i in range(mono.x.size) for j in range(mono.t.size)]
    return {"fig00_monodomain.csv": Table(["x", "t", "y", "u", "yq"], rows)}


def _dnwr_theta(alpha: float, threads: int, K: int = 5) -> Table:
    def one(kind: str):
        op = coupled_for(alpha, kind)
        pb = ControlProblem(alpha=alpha, space_domain=(-0.5, 1.5))
        part = Partition((-0.5, 0.0, 1.5), (1.0, 1.0))
        solver = DNWRSolver(pb, part, DX, op)
        tab = sweep_theta_dnwr(pb, part, THETA_GRID, DX, op.mesh, K, solver=solver)
        # the initial guess does not depend on theta
        e0 = solver.run(0.5, tol=0.0, max_iter=1, detect_divergence=False)[0].errors[0]
        return [(kind, g[0], e, (e / e0) ** (1.0 / K)) for g, e in zip(tab.grid, tab.errors)]

    rows = [r for block in _fan_out(one, MESHES, threads) for r in block]
    return Table(["mesh", "theta", "error_after_K", "rate"], rows)


def fig01(threads: int = 1) -> dict[str, Table]:
    """DNWR error after five iterations against theta, alpha = 0.3."""
    return {"fig01_dnwr_theta_alpha0.3.csv": _dnwr_theta(0.3, threads)}


def fig02(threads: int = 1) -> dict[str, Table]:
    """DNWR error after five iterations against theta, alpha = 0.8."""
    return {"fig02_dnwr_theta_alpha0.8.csv": _dnwr_theta(0.8, threads)}


def fig04(threads: int = 1) -> dict[str, Table]:
    """Convergence factor against the number of time intervals."""
    cases = [(a, kind, n) for a in (0.3, 0.8) for kind in MESHES for n in range(20, 201, 20)]

    def one(c):
        a, kind, n = c
        sd = decompose(coupled_for(a, kind, n))
        return (a, kind, n, convergence_factor_rho(sd, 0.5, 1.5, 1.0, 1.0), sd.lambda_min)

    return {"fig04_rho_vs_nodes.csv": Table(["alpha", "mesh", "intervals", "rho", "lambda"],
                                            _fan_out(one, cases, threads))}


def fig05(threads: int = 1) -> dict[str, Table]:
    """Convergence factor against the regularization parameter."""
    cases = [(a, kind, 10.0 ** -p) for a in (0.3, 0.8) for kind in MESHES for p in range(1, 9)]

    def one(c):
        a, kind, s = c
        sd = decompose(coupled_for(a, kind, sigma=s))
        return (a, kind, s, convergence_factor_rho(sd, 0.5, 1.5, 1.0, 1.0), sd.lambda_min)

    return {"fig05_rho_vs_sigma.csv": Table(["alpha", "mesh", "sigma", "rho", "lambda"],
                                            _fan_out(one, cases, threads))}


def fig06(threads: int = 1) -> dict[str, Table]:
    """Convergence factor and driver verdict against the first subdomain length."""
    hs = [round(0.1 * k, 10) for k in range(1, 20)]
    sweeps = _fan_out(lambda a: subdomain_size_sweep(a, hs), (0.3, 0.7, 1.0), threads)
    rows = [r for s in sweeps for r in s.rows()]
    return {"fig06_rho_vs_h1.csv": Table(["alpha", "h1", "rho", "diverged_flag", "rate", "iterations"], rows)}


def fig07(threads: int = 1) -> dict[str, Table]:
    """DNWR measured error, bound and convergence factor per iteration."""
    runs = _fan_out(lambda a: (a, dnwr_bound_run(a)), (0.3, 0.7, 1.0), threads)
    rows = [(a, *r) for a, run in runs for r in run.rows()]
    return {"fig07_dnwr_bound.csv": Table(["alpha", "k", "measured", "bound", "rho", "lambda", "cond_inf"], rows)}


def fig3(threads: int = 1, dx: float = 0.025) -> dict[str, Table]:
    """NNWR error after five iterations over a tensor grid of relaxations."""
    part = Partition((-4.0, -3.0, 1.0, 4.0), (0.25, 1.0, 0.25))

    def one(a):
        op = coupled_for(a)
        pb = ControlProblem(alpha=a, space_domain=(-4.0, 4.0))
        tab = sweep_theta_nnwr(pb, part, [NNWR_GRID, NNWR_GRID], dx, op.mesh, 5,
                               solver=NNWRSolver(pb, part, dx, op))
        return [(a, t1, t2, e) for t1, t2, e in tab.rows()]

    rows = [r for block in _fan_out(one, (0.3, 0.7, 1.0), threads) for r in block]
    return {"fig3_nnwr_theta_grid.csv": Table(["alpha", "theta1", "theta2", "error_after_K"], rows)}


FIVE_EQUAL = Partition.equal(-4.0, 4.0, 5)
FIVE_UNEQUAL = Partition((-4.0, -3.0, -1.5, 1.0, 2.5, 4.0), (0.25, 1.0, 0.25, 4.0, 1.0))
RATE_ALPHAS = (0.3, 0.5, 0.7, 0.9, 1.0)


def _nnwr_rates(horizon: float, threads: int) -> Table:
    cases = [(name, part, a) for name, part in (("equal", FIVE_EQUAL), ("unequal", FIVE_UNEQUAL))
             for a in RATE_ALPHAS]

    def one(c):
        name, part, a = c
        op = coupled_for(a, horizon=horizon)
        pb = ControlProblem(alpha=a, horizon=horizon, space_domain=(-4.0, 4.0))
        rep, _ = NNWRSolver(pb, part, DX, op).run(tol=1e-10, max_iter=50)
        rate = estimate_numerical_rate(rep)[0]
        return [(name, a, k, e, rate) for k, e in enumerate(rep.errors)]

    rows = [r for block in _fan_out(one, cases, threads) for r in block]
    return Table(["case", "alpha", "k", "error", "rate"], rows)


def fig4(threads: int = 1) -> dict[str, Table]:
    """NNWR error histories on five subdomains for several orders, T = 1."""
    return {"fig4_nnwr_rates_T1.csv": _nnwr_rates(1.0, threads)}


def fig5(threads: int = 1) -> dict[str, Table]:
    """As ``fig4`` with T = 10."""
    return {"fig5_nnwr_rates_T10.csv": _nnwr_rates(10.0, threads)}


def _nnwr_bounds(horizon: float, counts, kappas_for, threads: int) -> Table:
    cases = [(N, a) for N in counts for a in (0.3, 0.7, 1.0)]

    def one(c):
        N, a = c
        part = Partition.equal(-4.0, 4.0, N)
        run = nnwr_bound_run(a, part.breakpoints, kappas_for(N), horizon=horizon)
        return [(N, a, *r[:3], r[4], r[5]) for r in run.rows()]

    rows = [r for block in _fan_out(one, cases, threads) for r in block]
    return Table(["subdomains", "alpha", "k", "measured", "bound", "lambda", "cond_inf"], rows)


def nnwr_mirrored_kappas(N: int) -> tuple[float, ...]:
    """``kappa_i = kappa_{N+1-i} = 4**(2-i)`` for an even subdomain count."""
    if N % 2:
        raise ValueError("mirrored coefficients need an even subdomain count")
    half = [4.0 ** (2 - i) for i in range(1, N // 2 + 1)]
    return tuple(half + half[::-1])


def fig6(threads: int = 1) -> dict[str, Table]:
    """NNWR measured error against the bound, 4/8/16 subdomains, T = 1."""
    return {"fig6_nnwr_bound_T1.csv": _nnwr_bounds(1.0, (4, 8, 16), lambda N: (1.0,) * N, threads)}


def fig7(threads: int = 1) -> dict[str, Table]:
    """As ``fig6`` with T = 10."""
    return {"fig7_nnwr_bound_T10.csv": _nnwr_bounds(10.0, (4, 8, 16), lambda N: (1.0,) * N, threads)}


def fig8(threads: int = 1) -> dict[str, Table]:
    """NNWR bound with mirrored coefficients, 4/8/10 subdomains, T = 1."""
    return {"fig8_nnwr_bound_kappa.csv": _nnwr_bounds(1.0, (4, 8, 10), nnwr_mirrored_kappas, threads)}


PRESETS: dict[str, Callable[..., dict[str, Table]]] = {
    "fig00": fig00,
    "fig01": fig01,
    "fig02": fig02,
    "fig04": fig04,
    "fig05": fig05,
    "fig06": fig06,
    "fig07": fig07,
    "fig3": fig3,
    "fig4": fig4,
    "fig5": fig5,
    "fig6": fig6,
    "fig7": fig7,
    "fig8": fig8,
}


def run_preset(name: str, threads: int = 1) -> dict[str, Table]:
    try:
        fn = PRESETS[name]
    except KeyError:
        raise UnknownPreset(name) from None
    return fn(threads=threads)
