"""Spectral toolkit for the coupled time operator.

Provides the eigendecomposition used by the semi-discrete trace propagation
and the error bounds, together with constructive checks of the structural
facts behind them: the half-size similarity reduction on symmetric meshes,
positivity of real parts, and Gershgorin localisation in the eigenbasis of
the exchange matrix.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from numpy.typing import NDArray

from .timeop import CoupledOperator

__all__ = [
    "SpectralData",
    "GershgorinReport",
    "PositivityCheck",
    "SpectralError",
    "similarity_reduce",
    "decompose",
    "lambda_min",
    "verify_positive_real",
    "exchange_basis",
    "gershgorin_symmetrized",
    "corollary_radius_bounds",
    "block_reduction_check",
    "match_spectra",
]

log = logging.getLogger(__name__)

COND_FLAG = 1e12


class SpectralError(ArithmeticError):
    """Raised when a spectral property the theory relies on is violated."""


@dataclass(frozen=True)
class SpectralData:
    eigenvalues: NDArray[np.complex128] = field(repr=False)
    eigvec: NDArray[np.complex128] = field(repr=False)
    eigvec_inv: NDArray[np.complex128] = field(repr=False)
    lambda_min: float
    cond_inf: float
    max_residual: float
    near_defective: bool = False

    @property
    def sqrt_eigenvalues(self) -> NDArray[np.complex128]:
        return np.sqrt(self.eigenvalues)

    def reconstruct(self) -> NDArray[np.complex128]:
        return (self.eigvec * self.eigenvalues) @ self.eigvec_inv

    def apply(self, weights: NDArray, vec: NDArray) -> NDArray:
        """Apply ``P diag(weights) P^{-1}`` to ``vec`` (last axis is time)."""
        return (self.eigvec @ (weights[:, None] * (self.eigvec_inv @ np.asarray(vec).T))).T


def similarity_reduce(op: CoupledOperator) -> tuple[NDArray, NDArray]:
    """Return the diagonal blocks ``L + iJ/sqrt(sigma)`` and ``L - iJ/sqrt(sigma)``.

    With ``X = [[I, I], [i sqrt(sigma) I, -i sqrt(sigma) I]]`` one has
    ``LL X = X diag(B_plus, B_minus)``.
    """
    if not op.symmetric_mesh:
        raise ValueError("reduction requires symmetric mesh")
    L = op.L_fwd.entries
    J = op.Jbar.entries
    c = 1.0 / np.sqrt(op.sigma)
    return L + 1j * c * J, L - 1j * c * J


def similarity_transform(op: CoupledOperator) -> NDArray[np.complex128]:
    n1 = op.order
    s = np.sqrt(op.sigma)
    I = np.eye(n1)
    return np.block([[I, I], [1j * s * I, -1j * s * I]])


def _normalize_columns(P: NDArray) -> NDArray:
    return P / np.linalg.norm(P, axis=0)


def decompose(op: CoupledOperator) -> SpectralData:
    """Eigendecomposition ``LL = P diag(lam) P^{-1}``.

    On symmetric meshes only the block ``B_plus`` is decomposed; the other
    half follows by complex conjugation because ``B_minus = conj(B_plus)``.
    Otherwise the adjoint-rescaled matrix is decomposed directly and mapped
    back.  Eigenvectors are normalised to unit 2-norm columns.
    """
    M = op.matrix
    n1 = op.order
    if op.symmetric_mesh:
        B_plus, _ = similarity_reduce(op)
        mu, V = sla.eig(B_plus)
        lam = np.concatenate([mu, mu.conj()])
        zero = np.zeros((n1, n1))
        blocks = np.block([[V, zero], [zero, V.conj()]])
        P = similarity_transform(op) @ blocks
    else:
        lam, Pt = sla.eig(op.balanced())
        D = np.concatenate([np.ones(n1), np.full(n1, np.sqrt(op.sigma))])
        P = D[:, None] * Pt
    P = _normalize_columns(P)
    order = np.lexsort((lam.imag, lam.real))
    lam = lam[order]
    P = P[:, order]
    Pinv = np.linalg.inv(P)

    norm_M = np.linalg.norm(M, np.inf)
    resid = np.max(np.abs(M @ P - P * lam), axis=0) / np.max(np.abs(P), axis=0)
    max_resid = float(np.max(resid) / norm_M)
    if max_resid > 1e-8:
        raise SpectralError(f"eigen-residual {max_resid:.3e} exceeds 1e-8 relative")
    if np.any(lam.real <= 0.0):
        raise SpectralError("positivity violated: eigenvalue with nonpositive real part")

    cond = float(np.linalg.norm(P, np.inf) * np.linalg.norm(Pinv, np.inf))
    flagged = cond > COND_FLAG
    if flagged:
        log.warning("eigenvector matrix nearly defective: cond_inf = %.3e", cond)
    return SpectralData(
        eigenvalues=lam,
        eigvec=P,
        eigvec_inv=Pinv,
        lambda_min=float(np.min(np.sqrt(lam).real)),
        cond_inf=cond,
        max_residual=max_resid,
        near_defective=flagged,
    )


def lambda_min(sd: SpectralData | NDArray) -> float:
    """Minimum real part of the principal square roots of the eigenvalues."""
    lam = sd.eigenvalues if isinstance(sd, SpectralData) else np.asarray(sd, dtype=complex)
    if np.any(lam.real <= 0.0):
        raise SpectralError("positivity violated: eigenvalue with nonpositive real part")
    return float(np.min(np.sqrt(lam).real))


@dataclass(frozen=True)
class PositivityCheck:
    ok: bool
    sym_min_eig: float
    min_real_part: float | None

    def __bool__(self) -> bool:
        return self.ok


def verify_positive_real(A: NDArray, B: NDArray) -> PositivityCheck:
    """Check ``A + A^T`` positive definite and hence ``Re eig(A + iB) > 0``.

    ``B`` must be real symmetric.  Truthiness of the result is the definiteness
    test; when it holds, the eigenvalue conclusion is asserted and its margin
    (smallest real part) recorded.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape != B.shape:
        raise ValueError("A and B must be square matrices of equal order")
    if not np.allclose(B, B.T, rtol=0.0, atol=0.0):
        raise ValueError("B must be symmetric")
    sym_min = float(np.linalg.eigvalsh(A + A.T)[0])
    if sym_min <= 0.0:
        return PositivityCheck(False, sym_min, None)
    ev = sla.eigvals(A + 1j * B)
    margin = float(np.min(ev.real))
    if margin <= 0.0:
        raise SpectralError(
            f"definite symmetric part but eigenvalue real part {margin:.3e} <= 0"
        )
    return PositivityCheck(True, sym_min, margin)


def exchange_basis(order: int) -> tuple[NDArray, NDArray]:
    """Orthogonal eigenbasis ``X`` of the order-``n`` exchange matrix ``J``.

    Returns ``(X, signs)`` with ``X^T J X = diag(signs)``.
    """
    n = int(order)
    if n < 1:
        raise ValueError("order must be positive")
    m = n // 2
    I = np.eye(m)
    J = np.eye(m)[::-1]
    r = 1.0 / np.sqrt(2.0)
    if n % 2 == 0:
        X = r * np.block([[I, J], [J, -I]])
        signs = np.concatenate([np.ones(m), -np.ones(m)])
    else:
        X = np.zeros((n, n))
        X[:m, :m] = r * I
        X[:m, m + 1 :] = r * J
        X[m, m] = 1.0
        X[m + 1 :, :m] = r * J
        X[m + 1 :, m + 1 :] = -r * I
        signs = np.concatenate([np.ones(m + 1), -np.ones(m)])
    return X, signs


@dataclass(frozen=True)
class GershgorinReport:
    centers: NDArray[np.complex128]
    radii: NDArray[np.float64]
    bound_ok: NDArray[np.bool_] | None = None
    corollary_radii: NDArray[np.float64] | None = None
    eigenvalues: NDArray[np.complex128] | None = field(default=None, repr=False)

    def contains(self, z: complex, slack: float = 0.0) -> bool:
        return bool(np.any(np.abs(z - self.centers) <= self.radii + slack))

    def coverage(self, slack_rel: float = 1e-12) -> bool:
        """True when every stored eigenvalue lies in the disc union."""
        if self.eigenvalues is None:
            raise ValueError("report carries no eigenvalues")
        scale = max(1.0, float(np.max(np.abs(self.centers) + self.radii)))
        return all(self.contains(z, slack_rel * scale) for z in self.eigenvalues)


def corollary_radius_bounds(d: NDArray) -> tuple[NDArray, NDArray]:
    """Closed-form Gershgorin radii and their stated upper bounds (odd order).

    ``d`` is the coefficient table ``d[m-1, j-1] = d_{m,j}`` of a lower
    triangular L1 matrix of odd order ``n``.  Returns ``(radii, bounds)``
    where the radii are the row formulas for ``X^T S X`` written out in closed
    form (middle row as ``(d_{m+1,1} - d_{m+1,m+1})/sqrt(2)``) and the bounds
    are ``1.5 (d_{i,1} + d_{n+1-i,1})`` off the middle and ``d_{m+1,1}/sqrt(2)``
    in the middle.
    """
    n = d.shape[0]
    if n % 2 == 0:
        raise ValueError("closed-form radius bounds need odd order")
    m = n // 2
    S = _matrix_from_coeffs(d)
    X, _ = exchange_basis(n)
    T = X.T @ S @ X
    radii = np.sum(np.abs(T), axis=1) - np.abs(np.diag(T))
    first = d[:, 0]
    bounds = 1.5 * (first + first[::-1])
    mid_closed = (d[m, 0] - d[m, m]) / np.sqrt(2.0)
    radii = radii.copy()
    radii[m] = mid_closed
    bounds[m] = d[m, 0] / np.sqrt(2.0)
    return radii, bounds


def _matrix_from_coeffs(d: NDArray) -> NDArray:
    n = d.shape[0]
    S = np.zeros((n, n))
    for m in range(1, n + 1):
        S[m - 1, m - 1] = d[m - 1, 0]
        if m > 1:
            S[m - 1, m - 2 :: -1] = d[m - 1, 1:m] - d[m - 1, : m - 1]
    return S


def gershgorin_symmetrized(
    S: NDArray, beta: float, coeffs: NDArray | None = None
) -> GershgorinReport:
    """Gershgorin discs of ``S + i beta J`` in the exchange eigenbasis.

    Since ``X^T (S + i beta J) X = X^T S X + i beta diag(signs)``, the discs
    have centres ``diag(X^T S X) + i beta signs`` and radii equal to the
    off-diagonal absolute row sums of ``X^T S X``.  When the L1 coefficient
    table ``coeffs`` of an odd-order ``S`` is supplied, the closed-form radius
    bounds are evaluated into ``bound_ok``.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("S must be square")
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    n = S.shape[0]
    X, signs = exchange_basis(n)
    T = X.T @ S @ X
    diag = np.diag(T).copy()
    radii = np.sum(np.abs(T), axis=1) - np.abs(diag)
    centers = diag + 1j * beta * signs
    J = np.eye(n)[::-1]
    ev = sla.eigvals(S + 1j * beta * J)
    bound_ok = None
    closed = None
    if coeffs is not None and n % 2 == 1:
        closed, bounds = corollary_radius_bounds(np.asarray(coeffs)[:n, :n])
        bound_ok = closed <= bounds * (1 + 1e-12)
    return GershgorinReport(
        centers=centers,
        radii=np.maximum(radii, 0.0),
        bound_ok=bound_ok,
        corollary_radii=closed,
        eigenvalues=ev,
    )


def block_reduction_check(S: NDArray, beta: float) -> tuple[float, float]:
    """Spectrum check for ``[[S1, 0], [S2, s]] + i beta [[J, 0], [0, 0]]``.

    ``S`` is lower triangular; ``S1`` its leading block and ``s`` its last
    diagonal entry.  Returns ``(spectrum_mismatch, min_singular)`` where the
    mismatch compares the full spectrum against ``eig(S1 + i beta J) U {s}``
    (relative to the matrix norm) and ``min_singular`` is the smallest
    singular value of ``S1 - s I + i beta J``.
    """
    S = np.asarray(S, dtype=float)
    n = S.shape[0] - 1
    J = np.eye(n)[::-1]
    Jbar = np.zeros_like(S)
    Jbar[:n, :n] = J
    full = S + 1j * beta * Jbar
    S1 = S[:n, :n]
    s = S[n, n]
    part = np.concatenate([sla.eigvals(S1 + 1j * beta * J), [s]])
    scale = np.linalg.norm(full, np.inf)
    mismatch = match_spectra(sla.eigvals(full), part) / scale
    smin = float(np.linalg.svd(S1 - s * np.eye(n) + 1j * beta * J, compute_uv=False)[-1])
    return mismatch, smin


def match_spectra(a: NDArray, b: NDArray) -> float:
    """Greedy nearest-pair matching; returns the largest pairing distance."""
    a = list(np.asarray(a, dtype=complex))
    b = np.asarray(b, dtype=complex).copy()
    if len(a) != b.size:
        return float("inf")
    used = np.zeros(b.size, dtype=bool)
    worst = 0.0
    for z in sorted(a, key=lambda w: (w.real, w.imag)):
        dist = np.where(used, np.inf, np.abs(b - z))
        k = int(np.argmin(dist))
        used[k] = True
        worst = max(worst, float(dist[k]))
    return worst
