"""Command line front end.

Exit codes: 0 success, 1 failed checks, 2 invalid configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from .config import ConfigError, ExperimentConfig, load_config
from .presets import PRESETS, UnknownPreset, run_preset
from .runner import RunResult, run_experiment, write_outputs
from .timegrid import MeshKind

__all__ = ["main", "build_parser"]

log = logging.getLogger("subdiffwr")

EXIT_OK, EXIT_FAILED, EXIT_INVALID = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _relaxation(text: str):
    if text == "auto":
        return "auto"
    vals = _floats(text)
    return vals[0] if len(vals) == 1 else vals


def _problem_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("problem and discretization")
    g.add_argument("--alpha", type=float, help="fractional order in (0, 1]")
    g.add_argument("--sigma", type=float, help="regularization parameter")
    g.add_argument("--horizon", type=float, help="final time T")
    g.add_argument("--mesh", choices=[k.value for k in MeshKind] + ["one_sided", "both_sided"])
    g.add_argument("--nt", type=int, help="number of time intervals")
    g.add_argument("--dx", type=float, help="spatial step")
    g.add_argument("--target", help="CSV file with x,t,value columns (default: built-in target)")


def _control_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int)


def _two_domain_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--h1", type=float, help="length of the left subdomain (default 0.5)")
    p.add_argument("--h2", type=float, help="length of the right subdomain (default 1.5)")
    p.add_argument("--kappa1", type=float)
    p.add_argument("--kappa2", type=float)


def _global_flags(p: argparse.ArgumentParser, top: bool) -> None:
    # on subparsers the defaults are suppressed so the top-level values survive
    d = (lambda v: v) if top else (lambda v: argparse.SUPPRESS)
    p.add_argument("--out", default=d(None), help="output directory")
    p.add_argument("--seed", type=int, default=d(0), help="seed for randomized checks")
    p.add_argument("--threads", type=int, default=d(1), help="worker threads for independent runs")
    p.add_argument("--dump-operators", action="store_true", default=d(False),
                   help="also write the dense time operators as CSV")
    p.add_argument("-v", "--verbose", action="store_true", default=d(False))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="subdiffwr", description=__doc__.splitlines()[0])
    _global_flags(parser, top=True)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("monodomain", help="solve the undecomposed optimality system")
    _problem_flags(p)
    p.add_argument("--domain", type=_floats, help="left,right")

    p = sub.add_parser("dnwr", help="Dirichlet-Neumann waveform relaxation")
    _problem_flags(p)
    _two_domain_flags(p)
    p.add_argument("--theta", type=_relaxation, help="auto or a value in (0, 1)")
    p.add_argument("--phi", type=_relaxation)
    _control_flags(p)

    p = sub.add_parser("nnwr", help="Neumann-Neumann waveform relaxation")
    _problem_flags(p)
    p.add_argument("--subdomains", type=_floats, help="breakpoints x0,x1,...,xN")
    p.add_argument("--kappas", type=_floats, help="k1,...,kN")
    p.add_argument("--theta", type=_relaxation, help="auto or a list, one value per interface")
    p.add_argument("--phi", type=_relaxation)
    _control_flags(p)

    p = sub.add_parser("bounds", help="measured error against the theoretical bound")
    _problem_flags(p)
    _two_domain_flags(p)
    p.add_argument("--subdomains", type=_floats, help="NNWR breakpoints (overrides --h1/--h2)")
    p.add_argument("--kappas", type=_floats)
    p.add_argument("--iterations", type=int, help="iterations to run (default 10)")
    p.add_argument("--tol", type=float)

    p = sub.add_parser("sweep", help="error after K iterations over a relaxation grid")
    _problem_flags(p)
    _two_domain_flags(p)
    p.add_argument("--subdomains", type=_floats, help="NNWR breakpoints (overrides --h1/--h2)")
    p.add_argument("--kappas", type=_floats)
    p.add_argument("--grid", type=_floats, help="relaxation values")
    p.add_argument("--iterations", type=int, help="fixed iteration count K (default 5)")

    sub.add_parser("verify", help="run the property checks and print a pass/fail table")

    p = sub.add_parser("run", help="run an experiment described by a TOML file")
    p.add_argument("config", type=Path)

    p = sub.add_parser("preset", help="regenerate a figure's data table")
    p.add_argument("name", nargs="?", help="one of: " + ", ".join(PRESETS))
    p.add_argument("--list", action="store_true", help="list the presets")

    for sp in sub.choices.values():
        _global_flags(sp, top=False)
    return parser


def _set(d: dict, section: str, key: str, value) -> None:
    if value is not None:
        d.setdefault(section, {})[key] = value


def _config_from_args(args) -> dict:
    cmd = args.command
    data: dict = {"algorithm": cmd}
    _set(data, "problem", "alpha", args.alpha)
    _set(data, "problem", "sigma", args.sigma)
    _set(data, "problem", "horizon", args.horizon)
    if args.target:
        _set(data, "problem", "target", {"file": args.target})
    _set(data, "discretization", "mesh", args.mesh)
    _set(data, "discretization", "intervals", args.nt)
    _set(data, "discretization", "dx", args.dx)
    if cmd == "monodomain":
        _set(data, "problem", "domain", args.domain)
        return data
    subdomains = getattr(args, "subdomains", None)
    if cmd == "nnwr" and subdomains is None:
        subdomains = [-4.0, -3.0, 1.0, 4.0]
        if args.kappas is None:
            args.kappas = [0.25, 1.0, 0.25]
    if subdomains is not None:
        bp = subdomains
        kappas = args.kappas if args.kappas is not None else [1.0] * max(len(bp) - 1, 0)
    else:
        h1 = 0.5 if args.h1 is None else args.h1
        h2 = 1.5 if args.h2 is None else args.h2
        bp = [-h1, 0.0, h2]
        kappas = [1.0 if args.kappa1 is None else args.kappa1, 1.0 if args.kappa2 is None else args.kappa2]
    _set(data, "decomposition", "breakpoints", bp)
    _set(data, "decomposition", "kappas", kappas)
    if bp:
        _set(data, "problem", "domain", [bp[0], bp[-1]])
    _set(data, "relaxation", "theta", getattr(args, "theta", None))
    _set(data, "relaxation", "phi", getattr(args, "phi", None))
    _set(data, "control", "tol", getattr(args, "tol", None))
    _set(data, "control", "max_iter", getattr(args, "max_iter", None))
    if cmd == "bounds":
        data.setdefault("control", {}).setdefault("max_iter", 10 if args.iterations is None else args.iterations)
    if cmd == "sweep":
        _set(data, "sweep", "grid", args.grid)
        _set(data, "sweep", "fixed_iterations", args.iterations)
        if args.grid is None and len(bp) > 3:
            data.setdefault("sweep", {})["grid"] = [round(0.02 * k, 10) for k in range(1, 25)]
    return data


def _print_result(res: RunResult, paths, out=None) -> None:
    out = sys.stdout if out is None else out
    for name, table in res.tables.items():
        if name == "verify.csv":
            for row in table.rows:
                print(f"{row[1]:5s}  {row[0]:55s}  margin={row[2]:.3g}  {row[3]}", file=out)
    if res.summary:
        print(json.dumps(res.summary, sort_keys=True, default=str), file=out)
    for p in paths:
        print(f"wrote {p}", file=out)


def _run(args) -> int:
    t0 = time.perf_counter()
    base_dir = None
    if args.command == "run":
        cfg = load_config(args.config)
        base_dir = args.config.parent
    elif args.command == "verify":
        cfg = ExperimentConfig("verify")
    else:
        cfg = ExperimentConfig.from_dict(_config_from_args(args))
    if args.out is not None:
        cfg.output.dir = str(args.out)
    res = run_experiment(cfg, threads=args.threads, seed=args.seed, base_dir=base_dir,
                         dump_operators=args.dump_operators)
    manifest = {"command": args.command, "config": cfg.to_dict(), "seed": args.seed,
                "threads": args.threads, "summary": res.summary,
                "wall_time_s": round(time.perf_counter() - t0, 3)}
    paths = write_outputs(res.tables, cfg.output.dir, manifest)
    _print_result(res, paths)
    return EXIT_FAILED if res.failed else EXIT_OK


def _preset(args) -> int:
    if args.list or not args.name:
        for name, fn in PRESETS.items():
            print(f"{name:6s}  {fn.__doc__.splitlines()[0]}")
        return EXIT_OK
    t0 = time.perf_counter()
    tables = run_preset(args.name, threads=args.threads)
    out = args.out if args.out is not None else f"out/{args.name}"
    manifest = {"command": "preset", "preset": args.name, "threads": args.threads,
                "wall_time_s": round(time.perf_counter() - t0, 3)}
    for p in write_outputs(tables, out, manifest):
        print(f"wrote {p}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # usage errors exit with EXIT_INVALID, --help with 0
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        return _preset(args) if args.command == "preset" else _run(args)
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except UnknownPreset as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
