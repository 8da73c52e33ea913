"""L1 discretisation of the Caputo derivative and the coupled time operator.

The L1 scheme approximates the Caputo derivative of order ``alpha`` at node
``t_m`` by

    D u(t_m) ~ 1/Gamma(2-alpha) * [ d_{m,1} u^m
                                    + sum_{j=1}^{m-1} (d_{m,j+1} - d_{m,j}) u^{m-j}
                                    - d_{m,m} u^0 ]

with coefficients

    d_{m,j} = [(t_m - t_{m-j})^{1-alpha} - (t_m - t_{m-j+1})^{1-alpha}]
              / (t_{m-j+1} - t_{m-j}).

With ``u^0 = 0`` this is a lower triangular matrix acting on ``u^1..u^{n+1}``.

The optimality system couples a forward state equation and a backward
adjoint equation.  The state is stored forward in time (``t_1..t_{n+1}``)
and the adjoint in reverse (``t_n..t_0``), so that the backward derivative
becomes an ordinary L1 matrix on the reflected mesh and the coupling terms
are exchange matrices:

    LL = [[L_fwd,  Jbar / sigma],
          [-Jbar,  L_bwd       ]]
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gamma

import numpy as np
from numpy.typing import NDArray

from .timegrid import MeshKind, TimeMesh, reflect_mesh

__all__ = [
    "L1Operator",
    "ExchangeMatrix",
    "CoupledOperator",
    "l1_coefficients",
    "assemble_l1",
    "exchange_matrix",
    "assemble_coupled",
    "build_coupled",
]


def _readonly(a: NDArray) -> NDArray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def l1_coefficients(nodes: NDArray[np.float64], alpha: float) -> NDArray[np.float64]:
    """Unscaled coefficient table ``d[m-1, j-1] = d_{m,j}`` (zero above ``j > m``).

    For ``alpha = 1`` only ``d_{m,1} = 1/dt_m`` is nonzero (backward Euler).
    """
    t = np.asarray(nodes, dtype=float)
    N = t.size - 1
    dt = np.diff(t)
    if np.any(dt <= 0.0):
        raise ValueError("degenerate mesh: node spacings must be positive")
    d = np.zeros((N, N))
    if alpha == 1.0:
        d[:, 0] = 1.0 / dt
        return d
    beta = 1.0 - alpha
    for m in range(1, N + 1):
        j = np.arange(1, m + 1)
        step = t[m - j + 1] - t[m - j]
        near = t[m] - t[m - j + 1]
        # far^beta - near^beta without cancellation when step << near
        diff = np.empty(m)
        diff[0] = step[0] ** beta
        diff[1:] = near[1:] ** beta * np.expm1(beta * np.log1p(step[1:] / near[1:]))
        d[m - 1, :m] = diff / step
    return d


@dataclass(frozen=True)
class L1Operator:
    """Lower triangular L1 matrix of order ``n + 1`` (prefactor folded in)."""

    mesh: TimeMesh
    entries: NDArray[np.float64] = field(repr=False)
    coeff_table: NDArray[np.float64] = field(repr=False)
    scale: float

    @property
    def order(self) -> int:
        return self.entries.shape[0]

    def scaled_coeffs(self) -> NDArray[np.float64]:
        """Coefficient table including the ``1/Gamma(2-alpha)`` prefactor."""
        return self.scale * self.coeff_table


def assemble_l1(mesh: TimeMesh) -> L1Operator:
    """Assemble the L1 matrix on ``mesh`` with homogeneous initial value."""
    alpha = mesh.alpha
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
    d = l1_coefficients(mesh.nodes, alpha)
    N = d.shape[0]
    A = np.zeros((N, N))
    for m in range(1, N + 1):
        A[m - 1, m - 1] = d[m - 1, 0]
        if m > 1:
            # entry (m, m-j) = d_{m,j+1} - d_{m,j}, j = 1..m-1
            band = d[m - 1, 1:m] - d[m - 1, : m - 1]
            A[m - 1, m - 2 :: -1] = band
    scale = 1.0 / gamma(2.0 - alpha)
    return L1Operator(
        mesh=mesh,
        entries=_readonly(scale * A),
        coeff_table=_readonly(d),
        scale=scale,
    )


@dataclass(frozen=True)
class ExchangeMatrix:
    """Order ``n + 1`` anti-diagonal block with a zero last row and column."""

    order: int
    entries: NDArray[np.float64] = field(repr=False)


def exchange_matrix(order: int) -> ExchangeMatrix:
    if int(order) != order or order < 2:
        raise ValueError(f"exchange matrix order must be >= 2, got {order!r}")
    order = int(order)
    J = np.zeros((order, order))
    n = order - 1
    J[np.arange(n), np.arange(n)[::-1]] = 1.0
    return ExchangeMatrix(order=order, entries=_readonly(J))


@dataclass(frozen=True)
class CoupledOperator:
    """State/adjoint time operator ``[[L_fwd, Jbar/sigma], [-Jbar, L_bwd]]``."""

    L_fwd: L1Operator
    L_bwd: L1Operator
    Jbar: ExchangeMatrix
    sigma: float
    matrix: NDArray[np.float64] = field(repr=False)

    @property
    def order(self) -> int:
        """Size of one block, ``n + 1``."""
        return self.L_fwd.order

    @property
    def mesh(self) -> TimeMesh:
        return self.L_fwd.mesh

    @property
    def symmetric_mesh(self) -> bool:
        return bool(np.array_equal(self.L_fwd.entries, self.L_bwd.entries))

    def balanced(self) -> NDArray[np.float64]:
        """Similar matrix with the adjoint rescaled by ``1/sqrt(sigma)``.

        ``D^{-1} LL D`` with ``D = diag(I, sqrt(sigma) I)`` has coupling blocks
        of equal size ``1/sqrt(sigma)``, which is far better scaled for
        factorisation than ``LL`` itself.
        """
        s = np.sqrt(self.sigma)
        n1 = self.order
        J = self.Jbar.entries
        B = np.array(self.matrix, copy=True)
        B[:n1, n1:] = J / s
        B[n1:, :n1] = -J / s
        return B


def assemble_coupled(
    L_fwd: L1Operator, L_bwd: L1Operator, Jbar: ExchangeMatrix, sigma: float
) -> CoupledOperator:
    if not sigma > 0.0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    n1 = L_fwd.order
    if L_bwd.order != n1 or Jbar.order != n1:
        raise ValueError(
            f"order mismatch: L_fwd {n1}, L_bwd {L_bwd.order}, Jbar {Jbar.order}"
        )
    M = np.zeros((2 * n1, 2 * n1))
    M[:n1, :n1] = L_fwd.entries
    M[:n1, n1:] = Jbar.entries / sigma
    M[n1:, :n1] = -Jbar.entries
    M[n1:, n1:] = L_bwd.entries
    return CoupledOperator(
        L_fwd=L_fwd, L_bwd=L_bwd, Jbar=Jbar, sigma=float(sigma), matrix=_readonly(M)
    )


def build_coupled(mesh: TimeMesh, sigma: float) -> CoupledOperator:
    """Assemble the coupled operator for ``mesh`` in one call."""
    L_fwd = assemble_l1(mesh)
    if mesh.kind is MeshKind.ONE_SIDED and mesh.alpha < 1.0:
        L_bwd = assemble_l1(reflect_mesh(mesh))
    else:
        # reflection leaves these meshes unchanged; reuse keeps the blocks bitwise equal
        L_bwd = L_fwd
    return assemble_coupled(L_fwd, L_bwd, exchange_matrix(L_fwd.order), sigma)
