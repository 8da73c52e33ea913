"""Optimal control problem instance: target, data hooks and cost functional."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.interpolate import RegularGridInterpolator

__all__ = [
    "ControlProblem",
    "TabulatedTarget",
    "target_yq",
    "zero_field",
    "trapezoid_weights",
    "evaluate_cost",
]

SpaceTimeFn = Callable[[NDArray, NDArray], NDArray]


def target_yq(x, t):
    """Default tracking target, a bump pair modulated by ``(1 + t) sin(pi x)``."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    bumps = (
        np.exp(-8.0 * (x - 1.0) ** 2)
        + np.exp(-8.0 * (x + 1.0) ** 2)
        - np.exp(-8.0)
        - np.exp(-72.0)
    )
    return (1.0 + t) * np.sin(np.pi * x) * bumps


def zero_field(x, t):
    return np.zeros(np.broadcast(np.asarray(x), np.asarray(t)).shape)


class TabulatedTarget:
    """Target sampled on a tensor grid, linearly interpolated.

    Reads CSV files with columns ``x, t, value`` (any row order).
    """

    def __init__(self, x: NDArray, t: NDArray, values: NDArray):
        self.x = np.asarray(x, dtype=float)
        self.t = np.asarray(t, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.values.shape != (self.x.size, self.t.size):
            raise ValueError("tabulated values must have shape (len(x), len(t))")
        self._interp = RegularGridInterpolator(
            (self.x, self.t), self.values, bounds_error=False, fill_value=None
        )

    @classmethod
    def from_csv(cls, path: str | Path) -> "TabulatedTarget":
        rows = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = {"x", "t", "value"} - set(reader.fieldnames or ())
            if missing:
                raise ValueError(f"{path}: missing columns {sorted(missing)}")
            for row in reader:
                rows.append((float(row["x"]), float(row["t"]), float(row["value"])))
        data = np.array(rows)
        xs = np.unique(data[:, 0])
        ts = np.unique(data[:, 1])
        grid = np.full((xs.size, ts.size), np.nan)
        grid[np.searchsorted(xs, data[:, 0]), np.searchsorted(ts, data[:, 1])] = data[:, 2]
        if np.isnan(grid).any():
            raise ValueError(f"{path}: samples do not fill a tensor grid")
        return cls(xs, ts, grid)

    def __call__(self, x, t):
        x, t = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
        pts = np.stack([x.ravel(), t.ravel()], axis=-1)
        return self._interp(pts).reshape(x.shape)


@dataclass(frozen=True)
class ControlProblem:
    """Distributed tracking problem on a 1D interval.

    ``kappa`` is piecewise constant: either a scalar or one value per cell of
    ``kappa_breaks`` (which must start at ``x_L`` and end at ``x_R``).
    ``forcing`` and ``boundary`` take ``(x, t)``; ``y0`` is an initial value
    function of ``x``.  All default to zero.
    """

    alpha: float
    sigma: float = 1e-6
    horizon: float = 1.0
    space_domain: tuple[float, float] = (-1.0, 1.0)
    kappa: float | Sequence[float] = 1.0
    kappa_breaks: Sequence[float] | None = None
    target: SpaceTimeFn = field(default=target_yq, repr=False)
    forcing: SpaceTimeFn | None = field(default=None, repr=False)
    boundary: SpaceTimeFn | None = field(default=None, repr=False)
    y0: Callable[[NDArray], NDArray] | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if not self.sigma > 0.0:
            raise ValueError("sigma must be positive")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError("alpha must lie in (0, 1]")
        xL, xR = self.space_domain
        if not xL < xR:
            raise ValueError("space domain must satisfy x_L < x_R")
        if self.kappa_breaks is not None:
            br = np.asarray(self.kappa_breaks, float)
            k = np.atleast_1d(np.asarray(self.kappa, float))
            if br.size != k.size + 1 or br[0] != xL or br[-1] != xR or np.any(np.diff(br) <= 0):
                raise ValueError("kappa_breaks must partition the space domain, one kappa per cell")
        if np.any(np.atleast_1d(np.asarray(self.kappa, float)) <= 0):
            raise ValueError("kappa must be positive")

    def kappa_at(self, x: NDArray) -> NDArray:
        """Diffusion coefficient at positions ``x`` (right-continuous)."""
        x = np.asarray(x, dtype=float)
        k = np.atleast_1d(np.asarray(self.kappa, float))
        if self.kappa_breaks is None:
            return np.full(x.shape, float(k[0]))
        br = np.asarray(self.kappa_breaks, float)
        idx = np.clip(np.searchsorted(br, x, side="right") - 1, 0, k.size - 1)
        return k[idx]

    def with_target(self, target: SpaceTimeFn) -> "ControlProblem":
        from dataclasses import replace

        return replace(self, target=target)

    def homogeneous(self) -> "ControlProblem":
        """Same problem with all data set to zero (error equations)."""
        from dataclasses import replace

        return replace(self, target=zero_field, forcing=None, boundary=None, y0=None)


def trapezoid_weights(nodes: NDArray) -> NDArray:
    """Composite trapezoidal weights on arbitrary ordered nodes."""
    h = np.diff(np.asarray(nodes, dtype=float))
    w = np.zeros(h.size + 1)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


def evaluate_cost(
    y: NDArray,
    u: NDArray,
    problem: ControlProblem,
    x: NDArray,
    t: NDArray,
) -> float:
    """Tracking cost ``1/2 ||y - y_Q||^2 + sigma/2 ||u||^2``.

    Fields are arrays of shape ``(len(x), len(t))`` including every time
    node ``t_0 .. t_{n+1}``.  Norms use tensor trapezoidal quadrature with the
    actual (possibly graded) time spacings.
    """
    y = np.asarray(y, dtype=float)
    u = np.asarray(u, dtype=float)
    shape = (np.size(x), np.size(t))
    if y.shape != shape or u.shape != shape:
        raise ValueError(f"grid mismatch: fields {y.shape}, {u.shape}; grid {shape}")
    W = np.outer(trapezoid_weights(x), trapezoid_weights(t))
    X, Tt = np.meshgrid(x, t, indexing="ij")
    err = y - problem.target(X, Tt)
    return float(0.5 * np.sum(W * err**2) + 0.5 * problem.sigma * np.sum(W * u**2))
