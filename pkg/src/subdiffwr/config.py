"""Experiment configuration: a TOML file with one table per concern.

Example::

    algorithm = "dnwr"

    [problem]
    alpha = 0.5
    sigma = 1e-06
    horizon = 1.0
    domain = [-1.0, 1.0]
    target = "builtin"

    [discretization]
    mesh = "both_sided"
    intervals = 100
    dx = 0.05

    [decomposition]
    breakpoints = [-1.0, -0.5, 1.0]
    kappas = [1.0, 1.0]

    [relaxation]
    theta = "auto"
    phi = "auto"

    [control]
    tol = 1e-10
    max_iter = 50

    [sweep]
    grid = [0.05, 0.1]
    fixed_iterations = 5

    [output]
    dir = "out"

Every table except the top-level ``algorithm`` key is optional and falls
back to the defaults below.  ``target`` is ``"builtin"`` (the built-in closed
form) or an inline table ``{file = "target.csv"}`` naming a CSV file with
``x,t,value`` columns.
"""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .timegrid import MeshKind

__all__ = ["ConfigError", "ExperimentConfig", "ALGORITHMS", "load_config", "parse_config"]

ALGORITHMS = ("monodomain", "dnwr", "nnwr", "bounds", "verify", "sweep")
REQUIRED = ("algorithm",)


class ConfigError(ValueError):
    """Invalid configuration; ``key`` is the dotted path of the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class ProblemSection:
    alpha: float = 0.5
    sigma: float = 1e-6
    horizon: float = 1.0
    domain: list[float] = field(default_factory=lambda: [-1.0, 1.0])
    target: Any = "builtin"


@dataclass
class DiscretizationSection:
    mesh: str = "both_sided"
    intervals: int = 100
    dx: float = 0.05


@dataclass
class DecompositionSection:
    breakpoints: list[float] = field(default_factory=lambda: [-1.0, -0.5, 1.0])
    kappas: list[float] = field(default_factory=lambda: [1.0, 1.0])


@dataclass
class RelaxationSection:
    theta: Any = "auto"
    phi: Any = "auto"


@dataclass
class ControlSection:
    tol: float = 1e-10
    max_iter: int = 50


@dataclass
class SweepSection:
    grid: list[float] = field(default_factory=lambda: [round(0.05 * k, 10) for k in range(1, 20)])
    fixed_iterations: int = 5


@dataclass
class OutputSection:
    dir: str = "out"


_SECTIONS = {
    "problem": ProblemSection,
    "discretization": DiscretizationSection,
    "decomposition": DecompositionSection,
    "relaxation": RelaxationSection,
    "control": ControlSection,
    "sweep": SweepSection,
    "output": OutputSection,
}


@dataclass
class ExperimentConfig:
    algorithm: str
    problem: ProblemSection = field(default_factory=ProblemSection)
    discretization: DiscretizationSection = field(default_factory=DiscretizationSection)
    decomposition: DecompositionSection = field(default_factory=DecompositionSection)
    relaxation: RelaxationSection = field(default_factory=RelaxationSection)
    control: ControlSection = field(default_factory=ControlSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    output: OutputSection = field(default_factory=OutputSection)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        return _build(data)

    def validate(self) -> "ExperimentConfig":
        _validate(self)
        return self


def _coerce(key: str, value: Any, default: Any) -> Any:
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(key, f"expected a boolean, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, f"expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"expected a number, got {value!r}")
        return float(value)
    if isinstance(default, list):
        if not isinstance(value, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        ):
            raise ConfigError(key, f"expected a list of numbers, got {value!r}")
        return [float(v) for v in value]
    # relaxation values and the target accept non-string forms, checked later
    if isinstance(default, str) and key.split(".")[0] != "relaxation" and key != "problem.target":
        if not isinstance(value, str):
            raise ConfigError(key, f"expected a string, got {value!r}")
        return value
    return value


def _build(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict) or not data:
        raise ConfigError("<root>", "empty configuration; required keys: " + ", ".join(REQUIRED))
    missing = [k for k in REQUIRED if k not in data]
    if missing:
        raise ConfigError(missing[0], "required key missing; required keys: " + ", ".join(REQUIRED))
    unknown = set(data) - set(_SECTIONS) - set(REQUIRED)
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown key")
    algo = data["algorithm"]
    if algo not in ALGORITHMS:
        raise ConfigError("algorithm", f"must be one of {', '.join(ALGORITHMS)}, got {algo!r}")
    sections = {}
    for name, cls in _SECTIONS.items():
        raw = data.get(name, {})
        if not isinstance(raw, dict):
            raise ConfigError(name, "expected a table")
        defaults = cls()
        known = {f.name for f in fields(cls)}
        for k in raw:
            if k not in known:
                raise ConfigError(f"{name}.{k}", "unknown key")
        values = {k: _coerce(f"{name}.{k}", raw[k], getattr(defaults, k)) for k in raw}
        sections[name] = cls(**values)
    return ExperimentConfig(algorithm=algo, **sections).validate()


def _relaxation_ok(key: str, v: Any) -> None:
    if v == "auto":
        return
    vals = v if isinstance(v, list) else [v]
    for x in vals:
        if isinstance(x, bool) or not isinstance(x, (int, float)) or not 0.0 < x < 1.0:
            raise ConfigError(key, f"expected 'auto' or values in (0, 1), got {v!r}")


def _target_ok(t: Any) -> None:
    if t == "builtin":
        return
    if isinstance(t, dict):
        extra = sorted(set(t) - {"file"})
        if extra:
            raise ConfigError(f"problem.target.{extra[0]}", "unknown key")
        if isinstance(t.get("file"), str) and t["file"]:
            return
        raise ConfigError("problem.target.file", "expected a file path")
    raise ConfigError("problem.target", f'expected "builtin" or {{file = "..."}}, got {t!r}')


def _validate(cfg: ExperimentConfig) -> None:
    p, d, dec = cfg.problem, cfg.discretization, cfg.decomposition
    if not 0.0 < p.alpha <= 1.0:
        raise ConfigError("problem.alpha", f"must lie in (0, 1], got {p.alpha!r}")
    if not p.sigma > 0:
        raise ConfigError("problem.sigma", "must be positive")
    if not p.horizon > 0:
        raise ConfigError("problem.horizon", "must be positive")
    _target_ok(p.target)
    if len(p.domain) != 2 or not p.domain[0] < p.domain[1]:
        raise ConfigError("problem.domain", "must be [left, right] with left < right")
    try:
        MeshKind.parse(d.mesh)
    except ValueError as exc:
        raise ConfigError("discretization.mesh", str(exc)) from None
    if d.intervals < 2:
        raise ConfigError("discretization.intervals", "need at least 2 time intervals")
    if not d.dx > 0:
        raise ConfigError("discretization.dx", "must be positive")
    bp = dec.breakpoints
    if len(bp) < 3 or any(b >= c for b, c in zip(bp, bp[1:])):
        raise ConfigError("decomposition.breakpoints", "need at least 3 increasing values")
    if len(dec.kappas) != len(bp) - 1:
        raise ConfigError("decomposition.kappas", "need one value per subdomain")
    if any(k <= 0 for k in dec.kappas):
        raise ConfigError("decomposition.kappas", "must be positive")
    if cfg.algorithm in ("dnwr", "nnwr", "bounds", "sweep") and (
        bp[0] != p.domain[0] or bp[-1] != p.domain[1]
    ):
        raise ConfigError("decomposition.breakpoints", "must start and end at the problem domain ends")
    _relaxation_ok("relaxation.theta", cfg.relaxation.theta)
    _relaxation_ok("relaxation.phi", cfg.relaxation.phi)
    if not cfg.control.tol > 0:
        raise ConfigError("control.tol", "must be positive")
    if cfg.control.max_iter < 1:
        raise ConfigError("control.max_iter", "must be at least 1")
    if cfg.sweep.fixed_iterations < 1:
        raise ConfigError("sweep.fixed_iterations", "must be at least 1")
    if not cfg.sweep.grid:
        raise ConfigError("sweep.grid", "must not be empty")


def parse_config(text: str) -> ExperimentConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<toml>", str(exc)) from None
    return _build(data)


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)
