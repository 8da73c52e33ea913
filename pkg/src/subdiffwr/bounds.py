"""Relaxation parameters, convergence factors and theoretical error bounds."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .spectral import SpectralData, lambda_min
from .subdomain import Partition
from .traceprop import stable_ratio

__all__ = [
    "BoundCurve",
    "optimal_relaxation",
    "convergence_factor_rho",
    "dnwr_bound_factor",
    "dnwr_error_bound",
    "nnwr_d_table",
    "nnwr_error_bound",
    "nnwr_weight_bounds",
    "estimate_numerical_rate",
]


@dataclass(frozen=True)
class BoundCurve:
    """Geometric bound ``values[k] = factor**k * cond_inf * initial_error``."""

    values: NDArray = field(repr=False)
    factor: float
    lam: float
    cond_inf: float
    initial_error: float
    h: float | None = None
    d: tuple[float, ...] | None = None
    dbar: float | None = None

    def __call__(self, k: int) -> float:
        return float(self.values[k])


def _positive_kappas(kappas: Sequence[float]) -> NDArray:
    k = np.asarray(kappas, dtype=float)
    if np.any(k <= 0):
        raise ValueError("kappas must be positive")
    return k


def optimal_relaxation(kappas: Sequence[float], algorithm: str = "dnwr"):
    """Relaxation that removes the linear error terms.

    DNWR: ``1 / (1 + sqrt(k1/k2))``.  NNWR: per interface
    ``1 / (2 + sqrt(k_i/k_{i+1}) + sqrt(k_{i+1}/k_i))``.
    """
    k = _positive_kappas(kappas)
    if algorithm == "dnwr":
        if k.size != 2:
            raise ValueError("DNWR takes exactly two kappas")
        return float(1.0 / (1.0 + np.sqrt(k[0] / k[1])))
    if algorithm == "nnwr":
        if k.size < 2:
            raise ValueError("NNWR needs at least two kappas")
        r = np.sqrt(k[:-1] / k[1:])
        return [float(v) for v in 1.0 / (2.0 + r + 1.0 / r)]
    raise ValueError(f"unknown algorithm {algorithm!r}")


def convergence_factor_rho(sd: SpectralData, a: float, b: float, kappa1: float, kappa2: float) -> float:
    """``sqrt(k1)/(sqrt(k1)+sqrt(k2)) * max_i |W(sqrt(lam_i))|``."""
    if a == b:
        return 0.0
    W = stable_ratio("dnwr_weight", (a, b), sd.sqrt_eigenvalues)
    s1, s2 = np.sqrt(kappa1), np.sqrt(kappa2)
    return float(s1 / (s1 + s2) * np.max(np.abs(W)))


def dnwr_bound_factor(lam: float, a: float, b: float, kappa1: float, kappa2: float) -> float:
    """Per-iteration factor ``c * cosh((b-a)lam) / (sinh(a lam) sinh(b lam))``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    d = abs(b - a) * lam
    # 2 e^{d - (a+b) lam} (1 + e^{-2d}) / ((1 - e^{-2a lam})(1 - e^{-2b lam}))
    hyp = 2.0 * np.exp(d - (a + b) * lam) * (1.0 + np.exp(-2 * d)) / (
        -np.expm1(-2 * a * lam) * -np.expm1(-2 * b * lam)
    )
    s1, s2 = np.sqrt(kappa1), np.sqrt(kappa2)
    return float(s1 / (s1 + s2) * hyp)


def dnwr_error_bound(
    sd: SpectralData, a: float, b: float, kappa1: float, kappa2: float, k: int, initial_error: float
) -> BoundCurve:
    """Bound curve for ``k = 0..k`` DNWR iterations."""
    lam = lambda_min(sd)
    f = dnwr_bound_factor(lam, a, b, kappa1, kappa2)
    vals = f ** np.arange(k + 1) * sd.cond_inf * initial_error
    return BoundCurve(vals, f, lam, sd.cond_inf, initial_error)


def nnwr_d_table(kappas: Sequence[float]) -> NDArray:
    """Weight sums ``d_i`` per interface (absent neighbours dropped)."""
    k = _positive_kappas(kappas)
    N = k.size
    if N < 2:
        raise ValueError("NNWR needs at least two subdomains")
    s = np.sqrt(k)
    d = np.zeros(N - 1)
    for i in range(N - 1):  # interface between subdomains i and i+1 (0-based)
        total = s[i] / s[i + 1] + s[i + 1] / s[i]
        if i + 2 < N:
            total += s[i + 2] / s[i + 1]
        if i - 1 >= 0:
            total += s[i - 1] / s[i]
        d[i] = total / 2
    return d


def nnwr_error_bound(sd: SpectralData, partition: Partition, k: int, initial_error: float) -> BoundCurve:
    """Bound ``dbar^k cosech^{2k}(h lam / 2) cond_inf e0`` for NNWR."""
    lam = lambda_min(sd)
    d = nnwr_d_table(partition.kappas)
    thetas = np.asarray(optimal_relaxation(partition.kappas, "nnwr"))
    dbar = float(np.max(thetas * d))
    h = partition.h
    x = 0.5 * h * lam
    cosech2 = (2.0 * np.exp(-x) / -np.expm1(-2 * x)) ** 2
    f = float(dbar * cosech2)
    vals = f ** np.arange(k + 1) * sd.cond_inf * initial_error
    return BoundCurve(vals, f, lam, sd.cond_inf, initial_error, h=h, d=tuple(d), dbar=dbar)


def nnwr_weight_bounds(partition: Partition, lam: float) -> NDArray:
    """Upper bounds ``w_ij`` for the NNWR interface weights at ``Re z >= lam``.

    Each subdomain length enters through ``h_i * lam``.
    """
    N = partition.N
    h = partition.scaled_lengths
    s = np.sqrt(np.asarray(partition.kappas, float))
    z = complex(lam)
    W = np.zeros((N - 1, N - 1))

    for i in range(N - 1):
        L, R = i, i + 1
        W[i, i] = (s[L] / s[R] + s[R] / s[L]) * stable_ratio("coth_coth_m1", (h[L], h[R]), z).real
        if i + 1 < N - 1:
            W[i, i + 1] = stable_ratio(
                "cosech_coth_pair", (h[R], h[R + 1], h[L]), z, rho=(s[R + 1] / s[R], s[R] / s[L])
            ).real
        if i + 2 < N - 1:
            W[i, i + 2] = s[R + 1] / s[R] * stable_ratio("cosech_cosech", (h[R], h[R + 1]), z).real
        if i - 1 >= 0:
            W[i, i - 1] = stable_ratio(
                "cosech_coth_pair", (h[L], h[L - 1], h[R]), z, rho=(s[L - 1] / s[L], s[L] / s[R])
            ).real
        if i - 2 >= 0:
            W[i, i - 2] = s[L - 1] / s[L] * stable_ratio("cosech_cosech", (h[L - 1], h[L]), z).real
    return W


def estimate_numerical_rate(report_or_errors) -> tuple[float, bool]:
    """Geometric mean of the last three error ratios.

    Returns ``(rate, flag)``; ``flag`` marks a best-effort value (fewer than
    four recorded errors) or finite termination (rate reported as 0).
    """
    errors = getattr(report_or_errors, "errors", report_or_errors)
    e = np.asarray(errors, dtype=float)
    flag = e.size < 4
    if e.size < 2:
        return float("nan"), True
    with np.errstate(divide="ignore", invalid="ignore"):
        steps = e[1:] / e[:-1]
    # finite termination: one step collapses the error to rounding level
    if np.any((steps <= 1e-12) | (e[1:] == 0.0)):
        return 0.0, True
    tail = e[-4:] if e.size >= 4 else e
    ratios = tail[1:] / tail[:-1]
    return float(np.exp(np.mean(np.log(ratios)))), flag
