"""Time meshes for the L1 discretisation of the Caputo derivative.

Three kinds are supported:

* ``uniform``: equispaced nodes.
* ``one_sided_graded``: nodes clustered at ``t = 0`` with the usual grading
  exponent ``(2 - alpha) / alpha``.
* ``both_sided_graded``: the same grading applied from both ends of
  ``[0, T]`` so the mesh is symmetric under ``t -> T - t``.  This symmetry
  makes the forward and backward L1 matrices coincide.

A mesh with ``n`` interior nodes has ``n + 1`` intervals and nodes
``t_0 = 0 < t_1 < ... < t_{n+1} = T``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.typing import NDArray

__all__ = ["MeshKind", "TimeMesh", "build_mesh", "reflect_mesh"]

_REL_TOL = 1e-13


class MeshKind(str, Enum):
    UNIFORM = "uniform"
    ONE_SIDED = "one_sided_graded"
    BOTH_SIDED = "both_sided_graded"

    @classmethod
    def parse(cls, value: "MeshKind | str") -> "MeshKind":
        if isinstance(value, cls):
            return value
        aliases = {
            "uniform": cls.UNIFORM,
            "one_sided": cls.ONE_SIDED,
            "one_sided_graded": cls.ONE_SIDED,
            "graded": cls.ONE_SIDED,
            "both_sided": cls.BOTH_SIDED,
            "both_sided_graded": cls.BOTH_SIDED,
        }
        try:
            return aliases[str(value).strip().lower()]
        except KeyError:
            raise ValueError(
                f"unknown mesh kind {value!r}; expected one of {sorted(set(aliases))}"
            ) from None


@dataclass(frozen=True)
class TimeMesh:
    """Ordered time nodes ``t_0 .. t_{n+1}`` on ``[0, horizon]``."""

    kind: MeshKind
    alpha: float
    horizon: float
    nodes: NDArray[np.float64] = field(repr=False)

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def n(self) -> int:
        """Number of interior nodes."""
        return self.nodes.size - 2

    @property
    def intervals(self) -> int:
        return self.nodes.size - 1

    @property
    def steps(self) -> NDArray[np.float64]:
        return np.diff(self.nodes)

    def validate(self) -> None:
        """Raise ``ValueError`` if any mesh invariant is violated."""
        t = self.nodes
        T = self.horizon
        if t.ndim != 1 or t.size < 3:
            raise ValueError("mesh needs at least one interior node")
        if t[0] != 0.0 or abs(t[-1] - T) > _REL_TOL * T:
            raise ValueError("mesh must start at 0 and end at the horizon")
        if np.any(np.diff(t) <= 0.0):
            raise ValueError("mesh nodes must be strictly increasing")
        if self.kind is MeshKind.BOTH_SIDED:
            if self.n % 2 == 0:
                raise ValueError("both-sided graded mesh needs an odd interior count")
            if np.max(np.abs(t - (T - t[::-1]))) > _REL_TOL * T:
                raise ValueError("both-sided graded mesh is not reflection symmetric")
        if self.kind is MeshKind.UNIFORM:
            if np.max(np.abs(np.diff(t) - T / self.intervals)) > _REL_TOL * T:
                raise ValueError("uniform mesh has unequal spacings")

    def describe(self) -> str:
        return f"{self.kind.value},{self.alpha!r},{self.horizon!r},{self.n}"


def _check_alpha(alpha: float) -> None:
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")


def build_mesh(kind: MeshKind | str, alpha: float, horizon: float, n: int) -> TimeMesh:
    """Build a time mesh with ``n`` interior nodes.

    Parameters
    ----------
    kind
        ``uniform``, ``one_sided_graded`` or ``both_sided_graded``.
    alpha
        Fractional order in ``(0, 1]``; sets the grading exponent
        ``(2 - alpha) / alpha``.
    horizon
        Final time ``T > 0``.
    n
        Interior node count; must be odd for the both-sided mesh.
    """
    kind = MeshKind.parse(kind)
    _check_alpha(alpha)
    if not horizon > 0.0:
        raise ValueError(f"horizon must be positive, got {horizon!r}")
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    T = float(horizon)
    r = (2.0 - alpha) / alpha

    if kind is MeshKind.UNIFORM:
        t = np.arange(n + 2) / (n + 1) * T
    elif kind is MeshKind.ONE_SIDED:
        t = (np.arange(n + 2) / (n + 1)) ** r * T
    else:
        if n % 2 == 0:
            raise ValueError("both-sided graded mesh requires odd n")
        half = (n + 1) // 2
        left = (np.arange(half + 1) / half) ** r * (T / 2)
        t = np.empty(n + 2)
        t[: half + 1] = left
        # mirror image of the left half; the midpoint is shared
        t[half:] = T - left[::-1]
    t[0] = 0.0
    t[-1] = T
    if np.any(np.diff(t) <= 0.0):
        raise ValueError(
            f"grading exponent {r:.3g} with n={n} collapses nodes in double precision; "
            "use a larger alpha or fewer nodes")
    mesh = TimeMesh(kind=kind, alpha=float(alpha), horizon=T, nodes=t)
    mesh.validate()
    return mesh


def reflect_mesh(mesh: TimeMesh) -> TimeMesh:
    """Return the mesh with nodes ``T - t_{n+1-j}`` (kind kept as metadata)."""
    T = mesh.horizon
    t = T - mesh.nodes[::-1]
    t[0] = 0.0
    t[-1] = T
    return TimeMesh(kind=mesh.kind, alpha=mesh.alpha, horizon=T, nodes=t)
