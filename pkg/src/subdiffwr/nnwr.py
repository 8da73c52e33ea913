"""Neumann-Neumann waveform relaxation on N non-overlapping subdomains.

Each iteration solves Dirichlet problems on every subdomain with the current
interface traces, then auxiliary Neumann problems driven by the interface
flux jumps, and corrects each trace by the sum of the two neighbouring
auxiliary values at that interface.
"""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .bounds import optimal_relaxation
from .dnwr import SweepTable
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

__all__ = ["NNWRSolver", "run_nnwr", "sweep_theta_nnwr"]

log = logging.getLogger(__name__)

MAX_TENSOR_INTERFACES = 2


def _relaxations(values, partition: Partition, name: str) -> NDArray:
    n_if = partition.N - 1
    if values is None or (isinstance(values, str) and values == "auto"):
        return np.asarray(optimal_relaxation(partition.kappas, "nnwr"))
    v = np.atleast_1d(np.asarray(values, dtype=float))
    if v.size == 1:
        v = np.full(n_if, v[0])
    if v.size != n_if:
        raise ValueError(f"need {n_if} {name} values, got {v.size}")
    if np.any(v <= 0.0) or np.any(v >= 1.0):
        raise ValueError(f"{name} values must lie in (0, 1)")
    return v


def _weights(mask: NDArray, thetas: NDArray, phis: NDArray, ndim: int) -> NDArray:
    """Per-entry relaxation weights shaped like a stack of traces."""
    ext = (1,) * (ndim - 2)
    th = thetas.reshape((thetas.shape[0], 1) + thetas.shape[1:])
    ph = phis.reshape((phis.shape[0], 1) + phis.shape[1:])
    return np.where(mask.reshape((1, -1) + ext), th, ph)


class NNWRSolver:
    """Factorised NNWR setup for a fixed partition, reusable across relaxations."""

    def __init__(
        self,
        problem: ControlProblem,
        partition: Partition,
        dx: float,
        op: CoupledOperator,
        reference: NDArray | None = None,
        threads: int = 1,
    ):
        if partition.N < 2:
            raise ValueError("NNWR needs at least two subdomains")
        if tuple(partition.interval) != tuple(problem.space_domain):
            raise ValueError("partition does not cover the problem domain")
        self.problem, self.partition, self.dx, self.op = problem, partition, dx, op
        self.threads = max(1, int(threads))
        N = partition.N
        bp = partition.breakpoints
        self.dir_sys, self.neu_sys, self.F = [], [], []
        for i in range(N):
            iv = (bp[i], bp[i + 1])
            kap = partition.kappas[i]
            self.dir_sys.append(coupled_system(op, kap, iv, dx, "dirichlet", "dirichlet"))
            left = "dirichlet" if i == 0 else "neumann"
            right = "dirichlet" if i == N - 1 else "neumann"
            self.neu_sys.append(coupled_system(op, kap, iv, dx, left, right))
            self.F.append(problem_forcing(problem, op, self.dir_sys[i].x))
        self.g_left = outer_dirichlet(problem, op, bp[0])
        self.g_right = outer_dirichlet(problem, op, bp[-1])
        n1 = op.order
        self.state_mask = np.concatenate([np.ones(n1, bool), np.zeros(n1, bool)])
        if reference is None:
            mono = monodomain_solve(with_partition_kappa(problem, partition), dx, op)
            reference = np.stack([mono.trace_at(xi) for xi in bp[1:-1]])
        self.reference = np.asarray(reference)

    def _map(self, fn, items):
        if self.threads > 1:
            with ThreadPoolExecutor(self.threads) as pool:
                return list(pool.map(fn, items))
        return [fn(i) for i in items]

    def dirichlet_sweep(self, pis: NDArray) -> list[SubdomainSolution]:
        N = self.partition.N

        def one(i: int) -> SubdomainSolution:
            sys_ = self.dir_sys[i]
            lv = self.g_left if i == 0 else pis[i - 1]
            rv = self.g_right if i == N - 1 else pis[i]
            X = sys_.solve(self.F[i], left_value=lv, right_value=rv)
            k = self.partition.kappas[i]
            return SubdomainSolution(sys_.x, X, self.F[i], self.op.matrix, k, k)

        return self._map(one, range(N))

    @staticmethod
    def flux_jumps(sols: Sequence[SubdomainSolution]) -> NDArray:
        """``kappa_i d_n X_i + kappa_{i+1} d_n X_{i+1}`` at each interface.

        Outward normals: +x for the left neighbour at its right end, -x for
        the right neighbour at its left end, so the jump is the +x flux from
        the left minus the +x flux from the right.
        """
        return np.stack([
            sols[i].flux("right", "consistent") - sols[i + 1].flux("left", "consistent")
            for i in range(len(sols) - 1)
        ])

    def neumann_sweep(self, jumps: NDArray) -> list[SubdomainSolution]:
        N = self.partition.N

        def one(i: int) -> SubdomainSolution:
            sys_ = self.neu_sys[i]
            # outward flux equals the jump on both sides of an interface:
            # +x flux = jump at a right end, -jump at a left end
            lf = None if i == 0 else -jumps[i - 1]
            rf = None if i == N - 1 else jumps[i]
            X = sys_.solve(None, left_flux=lf, right_flux=rf)
            k = self.partition.kappas[i]
            return SubdomainSolution(sys_.x, X, None, self.op.matrix, k, k)

        return self._map(one, range(N))

    def step(self, pis: NDArray, thetas: NDArray, phis: NDArray):
        """One NNWR iteration; returns ``(new traces, Dirichlet sols, Neumann sols)``."""
        sols = self.dirichlet_sweep(pis)
        jumps = self.flux_jumps(sols)
        aux = self.neumann_sweep(jumps)
        corr = np.stack([aux[i].X[-1] + aux[i + 1].X[0] for i in range(self.partition.N - 1)])
        return pis - _weights(self.state_mask, thetas, phis, pis.ndim) * corr, sols, aux

    def batch_errors(self, thetas: NDArray, phis: NDArray, iterations: int, chunk: int = 64) -> NDArray:
        """Errors of many relaxation choices advanced together.

        ``thetas``, ``phis`` have shape ``(B, N-1)``; returns ``(iterations+1, B)``
        errors measured as in :meth:`run`.
        """
        thetas = np.atleast_2d(np.asarray(thetas, float))
        phis = np.atleast_2d(np.asarray(phis, float))
        B = thetas.shape[0]
        tracker = ErrorTracker(self.reference, 0.0, iterations)
        ref = self.reference[..., None]
        out = np.empty((iterations + 1, B))
        for lo in range(0, B, chunk):
            th, ph = thetas[lo : lo + chunk].T, phis[lo : lo + chunk].T
            pis = np.repeat(self.initial()[..., None], th.shape[1], axis=-1)
            for k in range(iterations + 1):
                if k:
                    pis = self.step(pis, th, ph)[0]
                out[k, lo : lo + chunk] = np.max(np.abs(pis - ref), axis=(0, 1)) / tracker.scale
        return out

    def initial(self) -> NDArray:
        base = initial_trace(self.reference, self.op.order)
        return np.tile(base, (self.partition.N - 1, 1))

    def run(
        self,
        thetas=None,
        phis=None,
        tol: float = 1e-10,
        max_iter: int = 50,
        init_traces=None,
        detect_divergence: bool = True,
    ):
        th = _relaxations(thetas, self.partition, "theta")
        ph = th.copy() if phis is None else _relaxations(phis, self.partition, "phi")
        if init_traces is None:
            pis = self.initial()
        else:
            pis = np.stack([np.asarray(t.pi if isinstance(t, TraceSet) else t, dtype=float)
                            for t in init_traces])
            if pis.shape != self.reference.shape:
                raise ValueError(f"initial traces have shape {pis.shape}, need {self.reference.shape}")
        tracker = ErrorTracker(self.reference, tol, max_iter, detect_divergence)
        tracker.record_initial(pis)
        sols, aux = None, None
        while True:
            new, sols, aux = self.step(pis, th, ph)
            stop = tracker.record(pis, new)
            pis = new
            if stop:
                break
        rep = tracker.finish()
        rep.config.update(
            algorithm="nnwr", thetas=th.tolist(), phis=ph.tolist(), tol=tol, max_iter=max_iter,
            dx=self.dx, breakpoints=list(self.partition.breakpoints),
            kappas=list(self.partition.kappas), mesh=self.op.mesh.describe(), sigma=self.op.sigma,
        )
        if rep.diverged:
            log.info("NNWR flagged divergent after %d iterations (interface %s)",
                     rep.iterations, rep.divergent_interface)
        return rep, {"traces": [TraceSet(p) for p in pis], "solutions": sols, "auxiliary": aux}


def run_nnwr(
    problem: ControlProblem,
    partition: Partition,
    thetas=None,
    phis=None,
    dx: float = 0.05,
    mesh: TimeMesh | None = None,
    tol: float = 1e-10,
    max_iter: int = 50,
    init_traces=None,
    threads: int = 1,
) -> tuple[IterationReport, dict]:
    """Run NNWR to tolerance; errors are measured against monodomain traces."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    if mesh is None:
        raise ValueError("a time mesh is required")
    op = build_coupled(mesh, problem.sigma)
    solver = NNWRSolver(problem, partition, dx, op, threads=threads)
    return solver.run(thetas, phis, tol, max_iter, init_traces)


def sweep_theta_nnwr(
    problem: ControlProblem,
    partition: Partition,
    theta_grids: Sequence[Sequence[float]],
    dx: float,
    mesh: TimeMesh,
    fixed_iterations: int,
    solver: NNWRSolver | None = None,
) -> SweepTable:
    """Tensor sweep of per-interface ``theta = phi`` values.

    Returns the error after ``fixed_iterations`` at every grid point.
    """
    n_if = partition.N - 1
    if n_if > MAX_TENSOR_INTERFACES:
        raise ValueError(
            f"tensor sweep over {n_if} interfaces rejected; sweep one interface at a time")
    if len(theta_grids) != n_if:
        raise ValueError(f"need {n_if} theta grids, got {len(theta_grids)}")
    grids = [[float(t) for t in g] for g in theta_grids]
    for g in grids:
        for t in g:
            if not 0.0 < t < 0.5:
                raise ValueError(f"sweep values must lie in (0, 0.5), got {t!r}")
    if solver is None:
        solver = NNWRSolver(problem, partition, dx, build_coupled(mesh, problem.sigma))
    points = list(itertools.product(*grids))
    pts = np.asarray(points, dtype=float)
    errors = solver.batch_errors(pts, pts, fixed_iterations)[-1]
    return SweepTable(points, errors.tolist())
