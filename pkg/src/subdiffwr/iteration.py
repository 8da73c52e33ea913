"""Bookkeeping shared by the waveform relaxation drivers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import NDArray

__all__ = ["IterationReport", "ErrorTracker", "initial_trace", "sup_norm"]

ABS_FALLBACK = 1e-14
GROWTH_FACTOR = 10.0
GROWTH_WINDOW = 5


def sup_norm(v: NDArray) -> float:
    return float(np.max(np.abs(v))) if np.size(v) else 0.0


def initial_trace(reference: NDArray | None, order: int) -> NDArray:
    """Constant initial trace, state and adjoint parts scaled separately.

    Each part is the constant 1 times the sup norm of the corresponding part
    of ``reference`` when that is above the absolute-error fallback level.
    """
    pi = np.ones(2 * order)
    if reference is not None:
        for part in (slice(0, order), slice(order, 2 * order)):
            s = sup_norm(reference[..., part])
            if s >= ABS_FALLBACK:
                pi[part] = s
    return pi


@dataclass
class IterationReport:
    """Per-iteration history of a waveform relaxation run.

    ``errors[k]`` is the interface error after ``k`` iterations (``k = 0`` is
    the initial guess); ``increments[k-1]`` the relative trace change of
    iteration ``k``.
    """

    errors: list[float] = field(default_factory=list)
    increments: list[float] = field(default_factory=list)
    interface_errors: list[list[float]] = field(default_factory=list)
    converged: bool = False
    diverged: bool = False
    divergent_interface: int | None = None
    config: dict[str, Any] = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return len(self.increments)

    @property
    def final_error(self) -> float:
        return self.errors[-1]

    @property
    def rate(self) -> float:
        from .bounds import estimate_numerical_rate

        return estimate_numerical_rate(self)[0]


class ErrorTracker:
    """Measures errors against a reference trace and applies stopping rules."""

    def __init__(self, reference: NDArray, tol: float, max_iter: int, detect_divergence: bool = True):
        self.reference = np.asarray(reference)
        ref_norm = sup_norm(self.reference)
        self.scale = ref_norm if ref_norm >= ABS_FALLBACK else 1.0
        self.tol = tol
        self.max_iter = max_iter
        self.detect = detect_divergence
        self.report = IterationReport()
        self._first_norm: float | None = None

    def error(self, pi: NDArray) -> float:
        return sup_norm(pi - self.reference) / self.scale

    def record_initial(self, pi: NDArray) -> None:
        self._first_norm = sup_norm(pi)
        self._push(pi)

    def _push(self, pi: NDArray) -> None:
        self.report.errors.append(self.error(pi))
        if pi.ndim == 2:
            self.report.interface_errors.append(
                [sup_norm(p - r) / self.scale for p, r in zip(pi, self.reference)]
            )

    def record(self, pi_old: NDArray, pi_new: NDArray) -> bool:
        """Record one iteration; return True when the loop should stop."""
        denom = max(sup_norm(pi_new), self._first_norm or 0.0)
        inc = sup_norm(pi_new - pi_old) / denom if denom > 0 else 0.0
        self.report.increments.append(inc)
        self._push(pi_new)
        rep = self.report
        if not np.isfinite(rep.errors[-1]):
            rep.diverged = True
            return True
        if self.tol > 0 and inc <= self.tol:
            rep.converged = True
            return True
        k = rep.iterations
        if self.detect and k >= GROWTH_WINDOW:
            if rep.errors[k] > GROWTH_FACTOR * rep.errors[k - GROWTH_WINDOW]:
                rep.diverged = True
                if rep.interface_errors:
                    now = np.asarray(rep.interface_errors[k])
                    then = np.asarray(rep.interface_errors[k - GROWTH_WINDOW])
                    with np.errstate(divide="ignore", invalid="ignore"):
                        rep.divergent_interface = int(np.nanargmax(now - then))
                return True
        return k >= self.max_iter

    def finish(self) -> IterationReport:
        rep = self.report
        if self.detect and not rep.converged and not rep.diverged and rep.iterations >= 4:
            # slow growth that the x10 window cannot see within max_iter
            if rep.rate > 1.0 and rep.errors[-1] > rep.errors[0]:
                rep.diverged = True
        return rep
