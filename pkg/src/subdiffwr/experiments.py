"""Experiment pipelines shared by the CLI presets and the acceptance checks.

Bound comparisons run the error equations (all data zero, monodomain trace
zero) so that measured errors keep contracting instead of stalling at the
rounding level of the full problem.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .bounds import (
    BoundCurve,
    convergence_factor_rho,
    dnwr_error_bound,
    estimate_numerical_rate,
    nnwr_error_bound,
)
from .dnwr import DNWRSolver
from .iteration import IterationReport
from .nnwr import NNWRSolver
from .problem import ControlProblem
from .spectral import SpectralData, decompose
from .subdomain import Partition
from .timegrid import build_mesh
from .timeop import CoupledOperator, build_coupled

__all__ = [
    "BoundRun",
    "SizeSweep",
    "coupled_for",
    "dnwr_bound_run",
    "nnwr_bound_run",
    "subdomain_size_sweep",
]

DEFAULT_INTERVALS = 100


def coupled_for(alpha: float, kind: str = "both_sided", intervals: int = DEFAULT_INTERVALS,
                sigma: float = 1e-6, horizon: float = 1.0) -> CoupledOperator:
    """Coupled time operator on a mesh with ``intervals`` time steps."""
    mesh = build_mesh(kind, alpha, horizon, intervals - 1)
    return build_coupled(mesh, sigma)


@dataclass
class BoundRun:
    """Measured error history next to the theoretical bound curve."""

    report: IterationReport
    bound: BoundCurve
    rho: float | None
    sd: SpectralData = field(repr=False)

    @property
    def measured(self) -> NDArray:
        return np.asarray(self.report.errors)

    def dominated(self, until: float = 0.0) -> NDArray:
        """Per-iteration ``measured <= bound`` up to the first error below ``until``."""
        m = self.measured
        ok = m <= self.bound.values[: m.size]
        if until > 0:
            below = np.nonzero(m <= until)[0]
            if below.size:
                ok = ok[: below[0] + 1]
        return ok

    def rows(self) -> list[tuple]:
        b = self.bound
        return [
            (k, float(e), float(b.values[k]), np.nan if self.rho is None else self.rho, b.lam, b.cond_inf)
            for k, e in enumerate(self.measured)
        ]


def dnwr_bound_run(
    alpha: float,
    h1: float = 0.5,
    h2: float = 1.5,
    kappas: tuple[float, float] = (1.0, 1.0),
    kind: str = "both_sided",
    intervals: int = DEFAULT_INTERVALS,
    sigma: float = 1e-6,
    horizon: float = 1.0,
    dx: float = 0.05,
    iterations: int = 10,
    theta: float | None = None,
    op: CoupledOperator | None = None,
    sd: SpectralData | None = None,
) -> BoundRun:
    """DNWR error history from a constant initial trace, against its bound."""
    op = op or coupled_for(alpha, kind, intervals, sigma, horizon)
    sd = sd or decompose(op)
    k1, k2 = kappas
    problem = ControlProblem(alpha=alpha, sigma=sigma, horizon=horizon,
                             space_domain=(-h1, h2), kappa=1.0).homogeneous()
    part = Partition((-h1, 0.0, h2), (k1, k2))
    n = 2 * op.order
    solver = DNWRSolver(problem, part, dx, op, reference=np.zeros(n))
    if theta is None:
        theta = 1.0 / (1.0 + np.sqrt(k1 / k2))
    rep, _ = solver.run(theta, theta, tol=0.0, max_iter=iterations,
                        init_trace=np.ones(n), detect_divergence=False)
    a, b = h1 / np.sqrt(k1), h2 / np.sqrt(k2)
    curve = dnwr_error_bound(sd, a, b, k1, k2, iterations, rep.errors[0])
    return BoundRun(rep, curve, convergence_factor_rho(sd, a, b, k1, k2), sd)


def nnwr_bound_run(
    alpha: float,
    breakpoints,
    kappas,
    kind: str = "both_sided",
    intervals: int = DEFAULT_INTERVALS,
    sigma: float = 1e-6,
    horizon: float = 1.0,
    dx: float = 0.05,
    tol: float = 1e-10,
    max_iter: int = 10,
    op: CoupledOperator | None = None,
    sd: SpectralData | None = None,
) -> BoundRun:
    """NNWR error history at the default relaxation, against its bound.

    The run uses the driver's stopping rule, so it ends once the relative
    trace update drops below ``tol``.
    """
    op = op or coupled_for(alpha, kind, intervals, sigma, horizon)
    sd = sd or decompose(op)
    part = Partition(tuple(breakpoints), tuple(kappas))
    problem = ControlProblem(alpha=alpha, sigma=sigma, horizon=horizon,
                             space_domain=part.interval).homogeneous()
    shape = (part.N - 1, 2 * op.order)
    solver = NNWRSolver(problem, part, dx, op, reference=np.zeros(shape))
    rep, _ = solver.run(tol=tol, max_iter=max_iter, init_traces=np.ones(shape),
                        detect_divergence=False)
    curve = nnwr_error_bound(sd, part, rep.iterations, rep.errors[0])
    return BoundRun(rep, curve, None, sd)


@dataclass
class SizeSweep:
    """Convergence factor and driver verdict per first-subdomain length."""

    alpha: float
    h1: NDArray
    rho: NDArray
    diverged: NDArray
    rate: NDArray
    iterations: NDArray

    def consistent(self) -> bool:
        """``rho > 1`` exactly where the driver flags divergence."""
        return bool(np.all((self.rho > 1.0) == self.diverged))

    def crossing_cells(self) -> tuple[int | None, int | None]:
        """First index with ``rho < 1`` and first index the driver converges."""
        r = np.nonzero(self.rho < 1.0)[0]
        d = np.nonzero(~self.diverged)[0]
        return (int(r[0]) if r.size else None, int(d[0]) if d.size else None)

    def rows(self) -> list[tuple]:
        return [(self.alpha, float(h), float(r), int(dv), float(rt), int(it))
                for h, r, dv, rt, it in zip(self.h1, self.rho, self.diverged, self.rate, self.iterations)]


def subdomain_size_sweep(
    alpha: float,
    h1_values,
    total: float = 2.0,
    dx: float = 0.05,
    theta: float = 0.5,
    tol: float = 1e-10,
    max_iter: int = 60,
    op: CoupledOperator | None = None,
    sd: SpectralData | None = None,
) -> SizeSweep:
    """DNWR on a domain of length ``total`` split at varying positions.

    At the equal split ``rho`` is 0 (finite termination).
    """
    op = op or coupled_for(alpha)
    sd = sd or decompose(op)
    left = -total / 2
    problem = ControlProblem(alpha=alpha, sigma=op.sigma, horizon=op.mesh.horizon,
                             space_domain=(left, left + total))
    hs = np.asarray(h1_values, dtype=float)
    rho = np.empty(hs.size)
    div = np.zeros(hs.size, dtype=bool)
    rate = np.full(hs.size, np.nan)
    iters = np.zeros(hs.size, dtype=int)
    for i, h in enumerate(hs):
        rho[i] = convergence_factor_rho(sd, h, total - h, 1.0, 1.0)
        part = Partition((left, left + h, left + total), (1.0, 1.0))
        solver = DNWRSolver(problem, part, dx, op)
        rep, _ = solver.run(theta, theta, tol=tol, max_iter=max_iter)
        div[i] = rep.diverged
        rate[i] = estimate_numerical_rate(rep)[0]
        iters[i] = rep.iterations
    return SizeSweep(alpha, hs, rho, div, rate, iters)
