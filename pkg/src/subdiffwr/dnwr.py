"""Dirichlet-Neumann waveform relaxation on two subdomains.

Each iteration solves the coupled state/adjoint system on the left subdomain
with the current interface trace as Dirichlet data, passes its flux to a
Neumann solve on the right subdomain, and relaxes the interface trace
towards the right solution's interface values.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .iteration import ErrorTracker, IterationReport, initial_trace
from .problem import ControlProblem
from .subdomain import (
    Partition,
    SubdomainSolution,
    TraceSet,
    coupled_system,
    monodomain_solve,
    outer_dirichlet,
    problem_forcing,
    with_partition_kappa,
)
from .timegrid import TimeMesh
from .timeop import CoupledOperator, build_coupled

__all__ = ["DNWRSolver", "SweepTable", "run_dnwr", "sweep_theta_dnwr"]

log = logging.getLogger(__name__)


def _check_relaxation(theta: float, phi: float) -> None:
    for name, v in (("theta", theta), ("phi", phi)):
        if not (0.0 < v < 1.0):
            raise ValueError(f"{name} must lie in (0, 1), got {v!r}")


class DNWRSolver:
    """Factorised two-subdomain DNWR setup reusable across relaxation values."""

    def __init__(
        self,
        problem: ControlProblem,
        partition: Partition,
        dx: float,
        op: CoupledOperator,
        reference: NDArray | None = None,
    ):
        if partition.N != 2:
            raise ValueError("DNWR needs exactly two subdomains")
        if tuple(partition.interval) != tuple(problem.space_domain):
            raise ValueError("partition does not cover the problem domain")
        self.problem, self.partition, self.dx, self.op = problem, partition, dx, op
        x0, x1, x2 = partition.breakpoints
        k1, k2 = partition.kappas
        self.sys1 = coupled_system(op, k1, (x0, x1), dx, "dirichlet", "dirichlet")
        self.sys2 = coupled_system(op, k2, (x1, x2), dx, "neumann", "dirichlet")
        self.F1 = problem_forcing(problem, op, self.sys1.x)
        self.F2 = problem_forcing(problem, op, self.sys2.x)
        self.g_left = outer_dirichlet(problem, op, x0)
        self.g_right = outer_dirichlet(problem, op, x2)
        n1 = op.order
        self.relax_mask = np.concatenate([np.ones(n1, bool), np.zeros(n1, bool)])
        if reference is None:
            reference = monodomain_solve(with_partition_kappa(problem, partition), dx, op).trace_at(x1)
        self.reference = np.asarray(reference)

    def step(self, pi: NDArray, theta: float, phi: float):
        """One DNWR iteration; returns ``(new trace, left solution, right solution)``."""
        X1 = self.sys1.solve(self.F1, left_value=self.g_left, right_value=pi)
        s1 = SubdomainSolution(self.sys1.x, X1, self.F1, self.op.matrix,
                               self.partition.kappas[0], self.partition.kappas[0])
        # kappa_2 d_{n2} y_2 = -kappa_1 d_{n1} y_1 with n1 = +x, n2 = -x:
        # the +x flux carries over unchanged
        g = s1.flux("right", "consistent")
        X2 = self.sys2.solve(self.F2, left_flux=g, right_value=self.g_right)
        s2 = SubdomainSolution(self.sys2.x, X2, self.F2, self.op.matrix,
                               self.partition.kappas[1], self.partition.kappas[1])
        w = np.where(self.relax_mask, theta, phi)
        return w * X2[0] + (1.0 - w) * pi, s1, s2

    def initial(self) -> NDArray:
        return initial_trace(self.reference, self.op.order)

    def run(
        self,
        theta: float,
        phi: float | None = None,
        tol: float = 1e-10,
        max_iter: int = 50,
        init_trace: NDArray | TraceSet | None = None,
        detect_divergence: bool = True,
    ):
        phi = theta if phi is None else phi
        _check_relaxation(theta, phi)
        pi = self.initial() if init_trace is None else np.array(
            init_trace.pi if isinstance(init_trace, TraceSet) else init_trace, dtype=float)
        tracker = ErrorTracker(self.reference, tol, max_iter, detect_divergence)
        tracker.record_initial(pi)
        sols = (None, None)
        while True:
            new, s1, s2 = self.step(pi, theta, phi)
            sols = (s1, s2)
            stop = tracker.record(pi, new)
            pi = new
            if stop:
                break
        rep = tracker.finish()
        rep.config.update(
            algorithm="dnwr", theta=theta, phi=phi, tol=tol, max_iter=max_iter, dx=self.dx,
            breakpoints=list(self.partition.breakpoints), kappas=list(self.partition.kappas),
            mesh=self.op.mesh.describe(), sigma=self.op.sigma,
        )
        if rep.diverged:
            log.info("DNWR flagged divergent after %d iterations", rep.iterations)
        return rep, {"trace": TraceSet(pi), "solutions": sols}


def run_dnwr(
    problem: ControlProblem,
    partition: Partition,
    theta: float,
    phi: float | None,
    dx: float,
    mesh: TimeMesh,
    tol: float = 1e-10,
    max_iter: int = 50,
    init_trace=None,
) -> tuple[IterationReport, dict]:
    """Run DNWR to tolerance; errors are measured against the monodomain trace."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    op = build_coupled(mesh, problem.sigma)
    solver = DNWRSolver(problem, partition, dx, op)
    return solver.run(theta, phi, tol, max_iter, init_trace)


@dataclass
class SweepTable:
    """Errors after a fixed iteration count over a relaxation grid."""

    grid: list[tuple[float, ...]]
    errors: list[float]

    @property
    def argmin(self) -> tuple[float, ...]:
        return self.grid[int(np.nanargmin(self.errors))]

    def rows(self) -> list[tuple]:
        return [(*g, e) for g, e in zip(self.grid, self.errors)]


def sweep_theta_dnwr(
    problem: ControlProblem,
    partition: Partition,
    theta_grid: Sequence[float],
    dx: float,
    mesh: TimeMesh,
    fixed_iterations: int,
    threads: int = 1,
    solver: DNWRSolver | None = None,
) -> SweepTable:
    """Error after ``fixed_iterations`` DNWR iterations for each ``theta = phi``."""
    grid = [float(t) for t in theta_grid]
    for t in grid:
        _check_relaxation(t, t)
    if solver is None:
        solver = DNWRSolver(problem, partition, dx, build_coupled(mesh, problem.sigma))

    def one(theta: float) -> float:
        rep, _ = solver.run(theta, theta, tol=0.0, max_iter=fixed_iterations,
                            detect_divergence=False)
        return rep.errors[-1]

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            errors = list(pool.map(one, grid))
    else:
        errors = [one(t) for t in grid]
    return SweepTable([(t,) for t in grid], errors)
