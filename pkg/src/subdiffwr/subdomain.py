"""Fully discrete coupled state/adjoint solves on space intervals.

Space is discretised by second-order central differences on a uniform grid
in flux form, so piecewise constant diffusion with jumps at grid nodes is
handled conservatively.  At every unknown space node the time block is the
coupled operator, which gives a block tridiagonal system

    a_r X_{r-1} + (K + b_r I) X_r + c_r X_{r+1} = F_r

with scalar couplings ``a_r, b_r, c_r``.  It is factorised once by block
elimination (Schur complements inverted densely) and then reused for every
right-hand side, which is all the waveform iterations ever change.

Neumann ends use ghost-point elimination.  Fluxes handed between subdomains
are computed with the matching half-cell balance

    g_right = kappa (X_M - X_{M-1}) / dx + dx/2 (K X_M - F_M)

(and its mirror image on the left).  This is the unique flux for which a
Dirichlet solve followed by a ghost-point Neumann solve reproduces the
undecomposed discrete equation at the interface node, so converged
decompositions agree with the monodomain solve to rounding error.  The plain
three-point one-sided stencil is also available.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field, replace
from typing import Literal, Sequence

import numpy as np
from numpy.typing import NDArray

from .problem import ControlProblem, evaluate_cost
from .timeop import CoupledOperator

__all__ = [
    "Partition",
    "TraceSet",
    "SubdomainSystem",
    "SubdomainSolution",
    "MonodomainResult",
    "space_grid",
    "problem_forcing",
    "outer_dirichlet",
    "solve_coupled_dirichlet",
    "solve_coupled_neumann",
    "extract_flux",
    "monodomain_solve",
    "with_partition_kappa",
    "ReducedCost",
]

BC = Literal["dirichlet", "neumann"]
_GRID_TOL = 1e-12


@dataclass(frozen=True)
class Partition:
    """Non-overlapping decomposition ``x_0 < x_1 < ... < x_N``."""

    breakpoints: tuple[float, ...]
    kappas: tuple[float, ...]

    def __post_init__(self) -> None:
        br = tuple(float(b) for b in self.breakpoints)
        ks = tuple(float(k) for k in self.kappas)
        object.__setattr__(self, "breakpoints", br)
        object.__setattr__(self, "kappas", ks)
        if len(br) < 2 or len(ks) != len(br) - 1:
            raise ValueError("need N+1 breakpoints and N kappas")
        if any(b1 <= b0 for b0, b1 in zip(br, br[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if any(k <= 0 for k in ks):
            raise ValueError("kappas must be positive")

    @classmethod
    def from_lengths(cls, start: float, lengths: Sequence[float], kappas: Sequence[float]):
        br = np.concatenate([[start], start + np.cumsum(lengths)])
        return cls(tuple(br), tuple(kappas))

    @classmethod
    def equal(cls, xl: float, xr: float, N: int, kappa: float = 1.0) -> "Partition":
        return cls(tuple(np.linspace(xl, xr, N + 1)), (kappa,) * N)

    @property
    def N(self) -> int:
        return len(self.kappas)

    @property
    def lengths(self) -> NDArray:
        return np.diff(self.breakpoints)

    @property
    def scaled_lengths(self) -> NDArray:
        return self.lengths / np.sqrt(self.kappas)

    @property
    def h(self) -> float:
        return float(np.min(self.scaled_lengths))

    @property
    def interval(self) -> tuple[float, float]:
        return self.breakpoints[0], self.breakpoints[-1]


@dataclass
class TraceSet:
    """Stacked interface trace ``[Omega; Upsilon]`` of length ``2(n+1)``."""

    pi: NDArray

    def __post_init__(self) -> None:
        self.pi = np.asarray(self.pi)
        if self.pi.ndim != 1 or self.pi.size % 2:
            raise ValueError("trace must be a vector of even length")

    @classmethod
    def from_parts(cls, omega: NDArray, upsilon: NDArray) -> "TraceSet":
        if np.size(omega) != np.size(upsilon):
            raise ValueError("state and adjoint traces differ in length")
        return cls(np.concatenate([omega, upsilon]))

    @property
    def order(self) -> int:
        return self.pi.size // 2

    @property
    def omega(self) -> NDArray:
        return self.pi[: self.order]

    @property
    def upsilon(self) -> NDArray:
        return self.pi[self.order :]


def _as_vector(tr, size: int) -> NDArray:
    """Trace data as ``(size,)`` or, for batched solves, ``(size, B)``."""
    if tr is None:
        return np.zeros(size)
    v = tr.pi if isinstance(tr, TraceSet) else np.asarray(tr)
    if v.ndim not in (1, 2) or v.shape[0] != size:
        raise ValueError(f"trace length {v.shape} does not match operator size {size}")
    return v


def space_grid(interval: tuple[float, float], dx: float) -> NDArray:
    """Uniform grid on ``interval``; its length must be a multiple of ``dx``."""
    xl, xr = interval
    cells = (xr - xl) / dx
    M = int(round(cells))
    if M < 1 or abs(cells - M) > _GRID_TOL * max(1.0, cells):
        raise ValueError(f"interval length {xr - xl!r} is not a multiple of dx={dx!r}")
    return xl + dx * np.arange(M + 1)


class SubdomainSystem:
    """Factorised block tridiagonal system on one space interval.

    Parameters
    ----------
    K
        Time block (square).  For coupled solves this is the adjoint-rescaled
        coupled matrix; ``scaling`` maps solution variables back.
    kappa_cells
        Scalar or one value per grid cell.
    interval, dx
        Space interval and grid step.
    left, right
        ``"dirichlet"`` or ``"neumann"`` at each end.
    scaling
        Optional diagonal ``D`` with physical ``X = D * X_scaled``.
    """

    def __init__(
        self,
        K: NDArray,
        kappa_cells,
        interval: tuple[float, float],
        dx: float,
        left: BC = "dirichlet",
        right: BC = "dirichlet",
        scaling: NDArray | None = None,
        K_phys: NDArray | None = None,
    ):
        if left not in ("dirichlet", "neumann") or right not in ("dirichlet", "neumann"):
            raise ValueError("boundary types must be 'dirichlet' or 'neumann'")
        self.K = np.asarray(K)
        self.K_phys = self.K if K_phys is None else np.asarray(K_phys)
        self.size = self.K.shape[0]
        self.x = space_grid(interval, dx)
        self.dx = float(dx)
        self.left, self.right = left, right
        M = self.x.size - 1
        kc = np.broadcast_to(np.asarray(kappa_cells, dtype=float), (M,)).copy()
        self.kappa_cells = kc
        self.D = np.ones(self.size) if scaling is None else np.asarray(scaling, dtype=float)
        self.first = 0 if left == "neumann" else 1
        self.last = M if right == "neumann" else M - 1
        if self.last < self.first:
            raise ValueError("subdomain has no unknown nodes")
        self._assemble_couplings()
        self._factor()

    def _assemble_couplings(self) -> None:
        kc, h2 = self.kappa_cells, self.dx**2
        M = self.x.size - 1
        nodes = np.arange(self.first, self.last + 1)
        a = np.zeros(nodes.size)
        b = np.zeros(nodes.size)
        c = np.zeros(nodes.size)
        for r, m in enumerate(nodes):
            kl = kc[m - 1] if m > 0 else 0.0
            kr = kc[m] if m < M else 0.0
            if m == 0:
                b[r], c[r] = 2 * kr / h2, -2 * kr / h2
            elif m == M:
                a[r], b[r] = -2 * kl / h2, 2 * kl / h2
            else:
                a[r], b[r], c[r] = -kl / h2, (kl + kr) / h2, -kr / h2
        self.nodes = nodes
        self.a, self.b, self.c = a, b, c

    def _factor(self) -> None:
        n = self.nodes.size
        I = np.eye(self.size)
        G = np.empty((n, self.size, self.size), dtype=self.K.dtype)
        S = self.K + self.b[0] * I
        G[0] = np.linalg.inv(S)
        for r in range(1, n):
            S = self.K + self.b[r] * I - (self.a[r] * self.c[r - 1]) * G[r - 1]
            G[r] = np.linalg.inv(S)
        self.G = G

    def _block_solve(self, F: NDArray) -> NDArray:
        G, a, c = self.G, self.a, self.c
        n = self.nodes.size
        y = np.empty_like(F)
        y[0] = G[0] @ F[0]
        for r in range(1, n):
            y[r] = G[r] @ (F[r] - a[r] * y[r - 1])
        for r in range(n - 2, -1, -1):
            y[r] = y[r] - c[r] * (G[r] @ y[r + 1])
        return y

    def solve(
        self,
        forcing: NDArray | None = None,
        left_value: NDArray | None = None,
        right_value: NDArray | None = None,
        left_flux: NDArray | None = None,
        right_flux: NDArray | None = None,
    ) -> NDArray:
        """Solve for the field at every grid node, shape ``(M+1, size)``.

        Values apply at Dirichlet ends, fluxes (``kappa * d/dx`` in the +x
        direction) at Neumann ends; missing data are zero.  ``forcing`` is
        given in physical variables at every node.  Boundary data of shape
        ``(size, B)`` solve ``B`` problems at once, giving ``(M+1, size, B)``.
        """
        M = self.x.size - 1
        size, D, h, h2 = self.size, self.D, self.dx, self.dx**2
        kc = self.kappa_cells
        data = {k: None if v is None else _as_vector(v, size) for k, v in
                (("lv", left_value), ("rv", right_value), ("lf", left_flux), ("rf", right_flux))}
        batch = ()
        for v in data.values():
            if v is not None and v.ndim == 2:
                if batch and batch != v.shape[1:]:
                    raise ValueError("inconsistent batch sizes")
                batch = v.shape[1:]
        dtype = np.result_type(self.K, forcing if forcing is not None else 0.0,
                               *(v for v in data.values() if v is not None))
        shape = (M + 1, size) + batch
        X = np.zeros(shape, dtype=dtype)
        F = np.zeros(shape, dtype=dtype)
        if forcing is not None:
            f = np.asarray(forcing)
            if f.shape != (M + 1, size):
                raise ValueError(f"forcing shape {f.shape} != {(M + 1, size)}")
            F += f.reshape(f.shape + (1,) * len(batch))

        def fit(key: str) -> NDArray:
            v = _as_vector(data[key], size)
            return v.reshape(v.shape + (1,) * (len(shape) - 1 - v.ndim))

        if self.left == "dirichlet":
            X[0] = fit("lv")
            F[1] += kc[0] / h2 * X[0]
        else:
            F[0] -= 2.0 / h * fit("lf")
        if self.right == "dirichlet":
            X[M] = fit("rv")
            F[M - 1] += kc[M - 1] / h2 * X[M]
        else:
            F[M] += 2.0 / h * fit("rf")
        Dv = D.reshape((size,) + (1,) * len(batch))
        rhs = F[self.first : self.last + 1] / Dv
        X[self.first : self.last + 1] = self._block_solve(rhs) * Dv
        return X

    def residual(self, X: NDArray, forcing: NDArray | None = None) -> float:
        """Relative residual of the discrete equations at unknown nodes."""
        M = self.x.size - 1
        K, kc, h2 = self.K_phys, self.kappa_cells, self.dx**2
        F = np.zeros_like(X) if forcing is None else forcing
        worst, scale = 0.0, 0.0
        for m in range(self.first, self.last + 1):
            if m == 0:
                continue  # Neumann rows carry flux data not stored here
            if m == M:
                continue
            lap = (kc[m] * (X[m + 1] - X[m]) - kc[m - 1] * (X[m] - X[m - 1])) / h2
            r = K @ X[m] - lap - F[m]
            worst = max(worst, float(np.max(np.abs(r))))
            scale = max(scale, float(np.max(np.abs(K @ X[m]))), float(np.max(np.abs(lap))),
                        float(np.max(np.abs(F[m]))))
        return worst / scale if scale > 0 else worst


@dataclass
class SubdomainSolution:
    """Solution on one subdomain grid; ``X[m] = [Y(x_m); P(x_m)]``."""

    x: NDArray
    X: NDArray = field(repr=False)
    forcing: NDArray | None = field(repr=False, default=None)
    K: NDArray | None = field(repr=False, default=None)
    kappa_left: float = 1.0
    kappa_right: float = 1.0

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def order(self) -> int:
        return self.X.shape[1] // 2

    @property
    def Y(self) -> NDArray:
        return self.X[:, : self.order]

    @property
    def P(self) -> NDArray:
        return self.X[:, self.order :]

    # auxiliary Neumann fields reuse the same storage layout
    PSI = Y
    CHI = P

    def trace(self, side: str) -> NDArray:
        return self.X[0] if side == "left" else self.X[-1]

    def flux(self, side: str, method: str = "consistent") -> NDArray:
        return extract_flux(self, side, method)


def extract_flux(sol: SubdomainSolution, side: str, method: str = "one_sided") -> NDArray:
    """Stacked ``kappa * d/dx`` (global +x direction) at one end.

    ``method="one_sided"`` uses the second-order three-point stencil.
    ``method="consistent"`` uses the half-cell balance matching the
    ghost-point Neumann rows (requires the solution's time block and
    forcing); this is what the decomposition drivers exchange.
    """
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    X, h = sol.X, sol.dx
    if method == "one_sided":
        if X.shape[0] < 3:
            raise ValueError("three-point flux needs at least 3 space nodes")
        if side == "left":
            return sol.kappa_left * (-3 * X[0] + 4 * X[1] - X[2]) / (2 * h)
        return sol.kappa_right * (3 * X[-1] - 4 * X[-2] + X[-3]) / (2 * h)
    if method == "consistent":
        if sol.K is None:
            raise ValueError("consistent flux needs the time operator")
        F = np.zeros(X.shape[:2]) if sol.forcing is None else sol.forcing
        F = F.reshape(F.shape + (1,) * (X.ndim - 2))
        if side == "left":
            bal = sol.K @ X[0] - F[0]
            return sol.kappa_left * (X[1] - X[0]) / h - 0.5 * h * bal
        bal = sol.K @ X[-1] - F[-1]
        return sol.kappa_right * (X[-1] - X[-2]) / h + 0.5 * h * bal
    raise ValueError(f"unknown flux method {method!r}")


# ---------------------------------------------------------------------------
# problem data on grids


def problem_forcing(problem: ControlProblem, op: CoupledOperator, x: NDArray) -> NDArray:
    """Right-hand side of the coupled system at grid nodes ``x``.

    State rows carry ``f`` at ``t_1..t_{n+1}`` (plus the initial-value term);
    adjoint rows carry ``-y_Q`` at ``t_n..t_0`` and ``y_0`` at ``t_0``, the
    part of ``y - y_Q`` the exchange coupling does not supply.
    """
    t = op.mesh.nodes
    n1 = op.order
    X, Tf = np.meshgrid(x, t[1:], indexing="ij")
    F = np.zeros((x.size, 2 * n1))
    if problem.forcing is not None:
        F[:, :n1] += problem.forcing(X, Tf)
    _, Tr = np.meshgrid(x, t[-2::-1], indexing="ij")
    F[:, n1:] -= problem.target(X, Tr)
    if problem.y0 is not None:
        y0 = np.asarray(problem.y0(x), dtype=float)
        d = op.L_fwd.scaled_coeffs()
        F[:, :n1] += np.outer(y0, d[np.arange(n1), np.arange(n1)])
        F[:, -1] += y0
    return F


def outer_dirichlet(problem: ControlProblem, op: CoupledOperator, xb: float) -> NDArray:
    """Boundary trace at an outer end: state from ``g``, adjoint zero."""
    n1 = op.order
    v = np.zeros(2 * n1)
    if problem.boundary is not None:
        t = op.mesh.nodes[1:]
        v[:n1] = problem.boundary(np.full(t.shape, xb), t)
    return v


_CACHE: "OrderedDict[tuple, SubdomainSystem]" = OrderedDict()
_CACHE_SIZE = 16


def coupled_system(
    op: CoupledOperator,
    kappa,
    interval: tuple[float, float],
    dx: float,
    left: BC,
    right: BC,
) -> SubdomainSystem:
    """Factorised coupled system, cached per operator and geometry."""
    kap = tuple(np.atleast_1d(np.asarray(kappa, float)).tolist())
    key = (id(op), kap, float(interval[0]), float(interval[1]), float(dx), left, right)
    sys_ = _CACHE.get(key)
    if sys_ is not None and sys_.op is op:
        _CACHE.move_to_end(key)
        return sys_
    n1 = op.order
    D = np.concatenate([np.ones(n1), np.full(n1, np.sqrt(op.sigma))])
    sys_ = SubdomainSystem(
        op.balanced(), kap if len(kap) > 1 else kap[0], interval, dx, left, right,
        scaling=D, K_phys=op.matrix,
    )
    sys_.op = op
    _CACHE[key] = sys_
    while len(_CACHE) > _CACHE_SIZE:
        _CACHE.popitem(last=False)
    return sys_


def _solution(sys_: SubdomainSystem, X: NDArray, forcing: NDArray | None) -> SubdomainSolution:
    return SubdomainSolution(
        x=sys_.x,
        X=X,
        forcing=forcing,
        K=sys_.K_phys,
        kappa_left=float(sys_.kappa_cells[0]),
        kappa_right=float(sys_.kappa_cells[-1]),
    )


def solve_coupled_dirichlet(
    op: CoupledOperator,
    kappa,
    interval: tuple[float, float],
    dx: float,
    left_trace=None,
    right_trace=None,
    forcing: NDArray | None = None,
) -> SubdomainSolution:
    """Coupled solve with Dirichlet traces at both ends (``None`` = zero)."""
    sys_ = coupled_system(op, kappa, interval, dx, "dirichlet", "dirichlet")
    X = sys_.solve(forcing, left_value=left_trace, right_value=right_trace)
    return _solution(sys_, X, forcing)


def solve_coupled_neumann(
    op: CoupledOperator,
    kappa,
    interval: tuple[float, float],
    dx: float,
    flux_left=None,
    flux_right=None,
    dirichlet_other_end=None,
    forcing: NDArray | None = None,
) -> SubdomainSolution:
    """Coupled solve with Neumann data at one or both ends.

    Ends whose flux is ``None`` are Dirichlet with value
    ``dirichlet_other_end`` (zero when omitted).  Fluxes are ``kappa d/dx`` in
    the +x direction, stacked state/adjoint.
    """
    if flux_left is None and flux_right is None:
        raise ValueError("at least one Neumann datum is required")
    left: BC = "neumann" if flux_left is not None else "dirichlet"
    right: BC = "neumann" if flux_right is not None else "dirichlet"
    sys_ = coupled_system(op, kappa, interval, dx, left, right)
    size = sys_.size
    fl = None if flux_left is None else _as_vector(flux_left, size)
    fr = None if flux_right is None else _as_vector(flux_right, size)
    X = sys_.solve(
        forcing,
        left_value=dirichlet_other_end if left == "dirichlet" else None,
        right_value=dirichlet_other_end if right == "dirichlet" else None,
        left_flux=fl,
        right_flux=fr,
    )
    return _solution(sys_, X, forcing)


# ---------------------------------------------------------------------------
# monodomain reference


@dataclass
class MonodomainResult:
    """Fields on the full grid at every time node ``t_0..t_{n+1}``."""

    x: NDArray
    t: NDArray
    y: NDArray = field(repr=False)
    p: NDArray = field(repr=False)
    u: NDArray = field(repr=False)
    cost: float
    X: NDArray = field(repr=False)

    def trace_at(self, xi: float) -> NDArray:
        """Stacked coupled-system trace at grid node ``xi``."""
        k = int(np.argmin(np.abs(self.x - xi)))
        if abs(self.x[k] - xi) > 1e-9 * max(1.0, abs(xi)):
            raise ValueError(f"{xi!r} is not a grid node")
        return self.X[k]


def _cell_kappas(problem: ControlProblem, x: NDArray) -> NDArray:
    mid = 0.5 * (x[1:] + x[:-1])
    return problem.kappa_at(mid)


def with_partition_kappa(problem: ControlProblem, partition: Partition) -> ControlProblem:
    """Problem whose piecewise diffusion coefficient follows ``partition``."""
    return replace(problem, kappa=tuple(float(k) for k in partition.kappas),
                   kappa_breaks=tuple(float(b) for b in partition.breakpoints))


def monodomain_solve(problem: ControlProblem, dx: float, op: CoupledOperator) -> MonodomainResult:
    """Solve the undecomposed optimality system on the whole domain.

    ``op`` carries the time mesh and ``sigma`` (it must match the problem's).
    """
    if not np.isclose(op.sigma, problem.sigma, rtol=1e-14, atol=0):
        raise ValueError("operator sigma differs from problem sigma")
    interval = tuple(problem.space_domain)
    x = space_grid(interval, dx)
    kc = _cell_kappas(problem, x)
    sys_ = coupled_system(op, kc, interval, dx, "dirichlet", "dirichlet")
    F = problem_forcing(problem, op, x)
    X = sys_.solve(
        F,
        left_value=outer_dirichlet(problem, op, interval[0]),
        right_value=outer_dirichlet(problem, op, interval[1]),
    )
    return assemble_fields(problem, op, x, X)


def assemble_fields(problem: ControlProblem, op: CoupledOperator, x: NDArray, X: NDArray) -> MonodomainResult:
    """Unpack stacked solutions into full-time ``y, p, u`` and the cost."""
    n1 = op.order
    t = op.mesh.nodes
    y = np.zeros((x.size, n1 + 1))
    y[:, 1:] = X[:, :n1]
    if problem.y0 is not None:
        y[:, 0] = problem.y0(x)
    p = np.zeros((x.size, n1 + 1))
    p[:, :n1] = X[:, n1:][:, ::-1]  # reversed storage t_n..t_0 -> t_0..t_n; p(T) = 0
    u = -p / problem.sigma
    return MonodomainResult(x=x, t=t, y=y, p=p, u=u, cost=evaluate_cost(y, u, problem, x, t), X=X)


class ReducedCost:
    """Reduced cost ``J(u)`` of the fully discrete state equation and its gradient.

    The control lives on the full space-time grid.  The state solves
    ``L Y = kappa Y_xx + u + f`` at interior nodes and ``t_1..t_{n+1}``; the
    gradient is obtained from the discrete adjoint (the transposed state
    system), so it is exact for the discrete ``J`` up to rounding.
    """

    def __init__(self, problem: ControlProblem, dx: float, op: CoupledOperator):
        self.problem = problem
        self.op = op
        interval = tuple(problem.space_domain)
        self.x = space_grid(interval, dx)
        self.t = op.mesh.nodes
        kc = _cell_kappas(problem, self.x)
        L = op.L_fwd.entries
        n1 = L.shape[0]
        E = np.eye(n1)[::-1]
        self.state = SubdomainSystem(L, kc, interval, dx)
        # transposed time operator, reversed so it is again lower triangular
        self.adjoint = SubdomainSystem(E @ L.T @ E, kc, interval, dx)
        from .problem import trapezoid_weights

        self.W = np.outer(trapezoid_weights(self.x), trapezoid_weights(self.t))

    def _source(self) -> NDArray:
        F = np.zeros((self.x.size, self.t.size - 1))
        if self.problem.forcing is not None:
            Xg, Tg = np.meshgrid(self.x, self.t[1:], indexing="ij")
            F += self.problem.forcing(Xg, Tg)
        return F

    def state_of(self, u: NDArray) -> NDArray:
        Y = self.state.solve(self._source() + u[:, 1:])
        y = np.zeros_like(u)
        y[:, 1:] = Y
        return y

    def cost(self, u: NDArray) -> float:
        return evaluate_cost(self.state_of(u), u, self.problem, self.x, self.t)

    def gradient(self, u: NDArray) -> tuple[NDArray, NDArray]:
        """Return ``(grad, p)`` with ``grad = W * (sigma u + p)``."""
        y = self.state_of(u)
        Xg, Tg = np.meshgrid(self.x, self.t, indexing="ij")
        resid = self.W * (y - self.problem.target(Xg, Tg))
        rhs = resid[:, 1:][:, ::-1]
        rhs[0] = rhs[-1] = 0.0
        Z = np.zeros_like(u)
        Z[:, 1:] = self.adjoint.solve(rhs)[:, ::-1]
        Z[0] = Z[-1] = 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            p = np.where(self.W > 0, Z / self.W, 0.0)
        return self.W * (self.problem.sigma * u + p), p
