"""Semi-discrete interface trace propagation.

When only time is discretised, every subdomain problem is a linear ODE
system in ``x`` with matrix coefficient ``LL / kappa``.  Diagonalising
``LL = P diag(lam) P^{-1}`` decouples it into scalar problems whose
solutions are hyperbolic functions of ``length * sqrt(lam / kappa)``.  One
waveform relaxation step then maps interface traces through
``P diag(w(lam)) P^{-1}`` with explicit scalar weights ``w``.

All hyperbolic quantities are evaluated from ``q = exp(-2 w)`` so that
arguments far beyond the overflow threshold of ``cosh`` are harmless.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .spectral import SpectralData
from .subdomain import Partition, TraceSet

__all__ = [
    "HyperbolicFactors",
    "stable_ratio",
    "stable_log_ratio",
    "naive_ratio",
    "dnwr_trace_step",
    "nnwr_weights",
    "nnwr_trace_step",
]

RATIO_KINDS = ("dnwr_weight", "coth_coth_m1", "cosech_cosech", "cosech_coth_pair")


def _check_z(z) -> NDArray:
    z = np.asarray(z, dtype=complex)
    if np.any(z.real <= 0.0):
        raise ValueError("stable ratios need Re(z) > 0")
    return z


def _one_minus_exp(x):
    """``1 - exp(x)`` without cancellation for small ``x``."""
    return -np.expm1(x)


def stable_ratio(kind: str, lengths: Sequence[float], z, rho: Sequence[float] | None = None):
    """Hyperbolic ratios from ``exp(-2 * length * z)`` building blocks.

    Kinds
    -----
    ``dnwr_weight``      ``sinh((b-a)z) / (sinh(az) cosh(bz))`` with ``lengths = (a, b)``
    ``coth_coth_m1``     ``coth(az) coth(bz) - 1``
    ``cosech_cosech``    ``cosech(az) cosech(bz)``
    ``cosech_coth_pair`` ``cosech(l0 z) (rho1 coth(l1 z) + rho2 coth(l2 z))``
    """
    z = _check_z(z)
    if any(l <= 0 for l in lengths):
        raise ValueError("lengths must be positive")
    if kind == "dnwr_weight":
        a, b = lengths
        # 2 (e^{-2az} - e^{-2bz}) / ((1 - e^{-2az}) (1 + e^{-2bz}))
        num = 2.0 * np.exp(-2 * a * z) * _one_minus_exp(-2 * (b - a) * z)
        return num / (_one_minus_exp(-2 * a * z) * (1.0 + np.exp(-2 * b * z)))
    if kind == "coth_coth_m1":
        a, b = lengths
        qa, qb = np.exp(-2 * a * z), np.exp(-2 * b * z)
        return 2.0 * (qa + qb) / (_one_minus_exp(-2 * a * z) * _one_minus_exp(-2 * b * z))
    if kind == "cosech_cosech":
        a, b = lengths
        return 4.0 * np.exp(-(a + b) * z) / (
            _one_minus_exp(-2 * a * z) * _one_minus_exp(-2 * b * z)
        )
    if kind == "cosech_coth_pair":
        if rho is None:
            raise ValueError("cosech_coth_pair needs rho = (rho1, rho2)")
        l0, l1, l2 = lengths
        r1, r2 = rho
        cs = 2.0 * np.exp(-l0 * z) / _one_minus_exp(-2 * l0 * z)
        return cs * (r1 * _coth(l1 * z) + r2 * _coth(l2 * z))
    raise ValueError(f"unknown ratio kind {kind!r}; expected one of {RATIO_KINDS}")


def stable_log_ratio(kind: str, lengths: Sequence[float], z):
    """Complex logarithm of :func:`stable_ratio` (for results below underflow)."""
    z = _check_z(z)
    if kind == "dnwr_weight":
        a, b = lengths
        return (
            np.log(2.0) - 2 * a * z
            + np.log(_one_minus_exp(-2 * (b - a) * z) + 0j)
            - np.log(_one_minus_exp(-2 * a * z) + 0j)
            - np.log(1.0 + np.exp(-2 * b * z))
        )
    if kind == "cosech_cosech":
        a, b = lengths
        return (
            np.log(4.0) - (a + b) * z
            - np.log(_one_minus_exp(-2 * a * z) + 0j)
            - np.log(_one_minus_exp(-2 * b * z) + 0j)
        )
    if kind == "coth_coth_m1":
        a, b = lengths
        lo = min(a, b)
        # 2 e^{-2 lo z} (1 + e^{-2 |a-b| z}) / ((1-q_a)(1-q_b))
        return (
            np.log(2.0) - 2 * lo * z
            + np.log(1.0 + np.exp(-2 * abs(a - b) * z))
            - np.log(_one_minus_exp(-2 * a * z) + 0j)
            - np.log(_one_minus_exp(-2 * b * z) + 0j)
        )
    return np.log(stable_ratio(kind, lengths, z) + 0j)


def naive_ratio(kind: str, lengths: Sequence[float], z, rho: Sequence[float] | None = None):
    """Direct hyperbolic evaluation; reference for moderate arguments only."""
    z = np.asarray(z, dtype=complex)
    if kind == "dnwr_weight":
        a, b = lengths
        return np.sinh((b - a) * z) / (np.sinh(a * z) * np.cosh(b * z))
    if kind == "coth_coth_m1":
        a, b = lengths
        return np.cosh(a * z) * np.cosh(b * z) / (np.sinh(a * z) * np.sinh(b * z)) - 1.0
    if kind == "cosech_cosech":
        a, b = lengths
        return 1.0 / (np.sinh(a * z) * np.sinh(b * z))
    if kind == "cosech_coth_pair":
        l0, l1, l2 = lengths
        r1, r2 = rho
        return (r1 / np.tanh(l1 * z) + r2 / np.tanh(l2 * z)) / np.sinh(l0 * z)
    raise ValueError(f"unknown ratio kind {kind!r}")


def _coth(w):
    q = np.exp(-2 * w)
    return (1.0 + q) / _one_minus_exp(-2 * w)


@dataclass
class HyperbolicFactors:
    """``sinh``/``cosh`` of ``w_i = length_i * z`` in scaled exponential form.

    ``sinh(w) = exp(w) * (1 - q) / 2`` and ``cosh(w) = exp(w) * (1 + q) / 2``
    with ``q = exp(-2 w)``; only the exponent ``w`` and the mantissas are
    stored.  Rows index subdomains, columns eigenvalues.
    """

    w: NDArray = field(repr=False)

    def __post_init__(self) -> None:
        self.w = np.asarray(self.w, dtype=complex)
        if np.any(self.w.real <= 0):
            raise ValueError("hyperbolic arguments need positive real part")
        self.q = np.exp(-2 * self.w)
        self.one_minus_q = _one_minus_exp(-2 * self.w)

    @classmethod
    def build(cls, scaled_lengths: Sequence[float], z) -> "HyperbolicFactors":
        z = _check_z(z)
        return cls(np.outer(np.asarray(scaled_lengths, dtype=float), z))

    @property
    def mant_sinh(self) -> NDArray:
        return 0.5 * self.one_minus_q

    @property
    def mant_cosh(self) -> NDArray:
        return 0.5 * (1.0 + self.q)

    @property
    def coth(self) -> NDArray:
        return (1.0 + self.q) / self.one_minus_q

    @property
    def tanh(self) -> NDArray:
        return self.one_minus_q / (1.0 + self.q)

    @property
    def cosech(self) -> NDArray:
        return 2.0 * np.exp(-self.w) / self.one_minus_q

    def log_sinh(self) -> NDArray:
        return self.w + np.log(self.mant_sinh)

    def log_cosh(self) -> NDArray:
        return self.w + np.log(self.mant_cosh)

    def identity_residual(self) -> float:
        """``max |cosh^2 - sinh^2 - 1|`` from the scaled factors.

        Dividing by ``sinh^2`` gives ``coth^2 - cosech^2 = 1``, which only
        involves bounded quantities and so stays finite for any ``w``.  The
        residual is relative to ``max(1, |coth|^2)``.
        """
        c2 = self.coth**2
        return float(np.max(np.abs(c2 - self.cosech**2 - 1.0) / np.maximum(1.0, np.abs(c2))))


def _relax_vector(theta: float, phi: float, order: int) -> NDArray:
    return np.concatenate([np.full(order, theta), np.full(order, phi)])


def _trace_array(Pi) -> NDArray:
    return Pi.pi if isinstance(Pi, TraceSet) else np.asarray(Pi)


def dnwr_trace_step(
    sd: SpectralData,
    a: float,
    b: float,
    kappa1: float,
    kappa2: float,
    theta: float,
    phi: float,
    Pi,
) -> TraceSet:
    """One semi-discrete DNWR step on the interface trace.

    ``Pi' = -D r P tanh(b sqrt(L)) coth(a sqrt(L)) P^{-1} Pi + (I - D) Pi``
    with ``D = diag(theta I, phi I)`` and ``r = sqrt(kappa1/kappa2)``,
    evaluated as ``(I - (1 + r) D) Pi - D r P W P^{-1} Pi`` where
    ``W = tanh coth - 1`` is the stable weight.  ``a`` and ``b`` are the
    scaled lengths ``h/sqrt(kappa)``.
    """
    for name, v in (("theta", theta), ("phi", phi)):
        if not (0.0 < v < 1.0):
            raise ValueError(f"{name} must lie in (0, 1), got {v!r}")
    pi = _trace_array(Pi)
    n1 = pi.size // 2
    r = np.sqrt(kappa1 / kappa2)
    D = _relax_vector(theta, phi, n1)
    W = stable_ratio("dnwr_weight", (a, b), sd.sqrt_eigenvalues)
    corr = sd.eigvec @ (W * (sd.eigvec_inv @ pi))
    out = (1.0 - (1.0 + r) * D) * pi - D * r * corr
    return TraceSet(out.real if np.isrealobj(pi) else out)


def _subdomain_factors(partition: Partition, z: NDArray):
    hf = HyperbolicFactors.build(partition.scaled_lengths, z)
    return hf.coth, hf.tanh, hf.cosech, hf


def nnwr_weights(partition: Partition, z) -> tuple[NDArray, NDArray]:
    """Per-eigenvalue interface weights of one NNWR step.

    Returns ``(linear, R)`` where ``linear[i] = 2 + r_i + 1/r_i`` with
    ``r_i = sqrt(kappa_i/kappa_{i+1})`` and ``R[i, j, :]`` are the remaining
    weights, so the correction at interface ``i`` is
    ``linear[i] * Pi_i + sum_j P R[i, j] P^{-1} Pi_j``.  Only the five
    central diagonals of ``R`` are nonzero.

    The weights come from solving the scalar Dirichlet and Neumann
    subproblems exactly: inner subdomains respond with ``coth``, the two
    outer ones (Dirichlet at the far end of the Neumann step) with ``tanh``.
    """
    N = partition.N
    if N < 2:
        raise ValueError("NNWR needs at least two subdomains")
    z = _check_z(np.atleast_1d(z))
    q = np.sqrt(np.asarray(partition.kappas, dtype=float))
    ct, th, cs, hf = _subdomain_factors(partition, z)
    h = partition.scaled_lengths
    nI = N - 1
    R = np.zeros((nI, nI, z.size), dtype=complex)
    linear = np.array([2.0 + q[i] / q[i + 1] + q[i + 1] / q[i] for i in range(nI)])

    def neumann_factor(k: int) -> NDArray:
        return th[k] if k in (0, N - 1) else ct[k]

    def nf_times_coth_m1(k: int, j: int) -> NDArray:
        # neumann_factor(k) * coth(w_j) - 1 without cancellation
        if k in (0, N - 1):
            return stable_ratio("dnwr_weight", (h[j], h[k]), z)
        return stable_ratio("coth_coth_m1", (h[k], h[j]), z)

    for i in range(nI):
        L, Rt = i, i + 1  # subdomain indices left/right of interface i (0-based)
        R[i, i] = (q[Rt] / q[L]) * nf_times_coth_m1(L, Rt) + (q[L] / q[Rt]) * nf_times_coth_m1(Rt, L)
        if i + 1 < nI:
            R[i, i + 1] = cs[Rt] * ((q[Rt + 1] / q[Rt]) * ct[Rt + 1] - (q[Rt] / q[L]) * neumann_factor(L))
        if i + 2 < nI:
            R[i, i + 2] = -(q[Rt + 1] / q[Rt]) * cs[Rt] * cs[Rt + 1]
        if i - 1 >= 0:
            R[i, i - 1] = cs[L] * ((q[L - 1] / q[L]) * ct[L - 1] - (q[L] / q[Rt]) * neumann_factor(Rt))
        if i - 2 >= 0:
            R[i, i - 2] = -(q[L - 1] / q[L]) * cs[L - 1] * cs[L]
    return linear, R


def nnwr_trace_step(
    sd: SpectralData,
    partition: Partition,
    thetas: Sequence[float],
    phis: Sequence[float] | None,
    Pis: Sequence,
) -> list[TraceSet]:
    """One semi-discrete NNWR step on all interface traces.

    ``Pi_i' = Pi_i - D_i sum_j P T_ij P^{-1} Pi_j`` with
    ``T_ii = linear_i + R_ii``; the linear part is applied exactly so that
    ``theta_i = 1 / linear_i`` removes it without rounding.
    """
    N = partition.N
    if N < 2:
        raise ValueError("NNWR needs at least two subdomains")
    phis = thetas if phis is None else phis
    if len(thetas) != N - 1 or len(phis) != N - 1 or len(Pis) != N - 1:
        raise ValueError("need one trace and one relaxation pair per interface")
    traces = [_trace_array(p) for p in Pis]
    n1 = traces[0].size // 2
    linear, R = nnwr_weights(partition, sd.sqrt_eigenvalues)
    modal = [sd.eigvec_inv @ p for p in traces]
    out = []
    for i in range(N - 1):
        acc = np.zeros_like(modal[i])
        for j in range(max(0, i - 2), min(N - 1, i + 3)):
            acc = acc + R[i, j] * modal[j]
        corr = sd.eigvec @ acc
        D = _relax_vector(thetas[i], phis[i], n1)
        new = (1.0 - D * linear[i]) * traces[i] - D * corr
        out.append(TraceSet(new.real if np.isrealobj(traces[i]) else new))
    return out
