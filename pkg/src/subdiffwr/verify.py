"""Desk-scale property checks of every module, as a pass/fail table.

The table is deterministic for a given seed: it holds no timings, and all
randomized checks draw from one seeded generator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .bounds import convergence_factor_rho, estimate_numerical_rate, optimal_relaxation
from .csvout import Table
from .dnwr import DNWRSolver
from .nnwr import NNWRSolver
from .problem import ControlProblem
from .spectral import (
    SpectralError,
    block_reduction_check,
    decompose,
    exchange_basis,
    gershgorin_symmetrized,
    match_spectra,
    verify_positive_real,
)
from .subdomain import Partition, ReducedCost, monodomain_solve, problem_forcing, coupled_system
from .timegrid import MeshKind, build_mesh, reflect_mesh
from .timeop import L1Operator, assemble_l1, build_coupled, exchange_matrix
from .traceprop import HyperbolicFactors, naive_ratio, stable_ratio

__all__ = ["CheckResult", "verify_suite", "report_table", "MESH_KINDS"]

MESH_KINDS = tuple(k.value for k in MeshKind)
ALPHAS = (0.3, 0.5, 0.8)

PASS, FAIL, XFAIL = "PASS", "FAIL", "XFAIL"


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str
    margin: float
    detail: str = ""

    @property
    def failed(self) -> bool:
        return self.status == FAIL


def _status(ok: bool) -> str:
    return PASS if ok else FAIL


def check_mesh_symmetry(**_) -> CheckResult:
    worst = 0.0
    for a in ALPHAS + (1.0,):
        m = build_mesh("both_sided", a, 1.0, 99)
        worst = max(worst, float(np.max(np.abs(reflect_mesh(m).nodes - m.nodes))))
    return CheckResult("mesh.both_sided_reflection", _status(worst <= 1e-14), worst,
                       "max |reflect(t) - t|")


def check_l1_monotone(l1: Callable[..., L1Operator], **_) -> CheckResult:
    worst = np.inf
    for kind in MESH_KINDS:
        for a in ALPHAS:
            for n1 in (20, 100):
                d = l1(build_mesh(kind, a, 1.0, n1 - 1)).coeff_table
                for m in range(n1):
                    row = d[m, : m + 1]
                    if row[0] <= 0:
                        worst = min(worst, -1.0)
                        continue
                    if m > 0:
                        gaps = (row[:-1] - row[1:]) / row[0]
                        worst = min(worst, float(np.min(gaps)))
                    worst = min(worst, float(row[-1] / row[0]))
    return CheckResult("timeop.l1_coefficients_decreasing", _status(worst > 0), worst,
                       "min relative gap d_j - d_{j+1} and min d_m/d_1")


def check_l1_consistency(l1: Callable[..., L1Operator], **_) -> CheckResult:
    from math import gamma

    errs = []
    for n1 in (25, 50, 100):
        mesh = build_mesh("uniform", 0.5, 1.0, n1 - 1)
        t = mesh.nodes[1:]
        L = l1(mesh).entries
        errs.append(float(np.max(np.abs(L @ t**2 - 2 * t**1.5 / gamma(2.5)))))
    ok = errs[0] > errs[1] > errs[2]
    return CheckResult("timeop.l1_caputo_consistency", _status(ok), errs[-1],
                       "error on t^2 decreases with n")


def check_sym_part(l1: Callable[..., L1Operator], **_) -> list[CheckResult]:
    out = []
    for kind in MESH_KINDS:
        worst = np.inf
        for a in ALPHAS:
            for n1 in (20, 100):
                A = l1(build_mesh(kind, a, 1.0, n1 - 1)).entries
                worst = min(worst, float(np.linalg.eigvalsh(A + A.T)[0]))
        status = _status(worst > 0)
        detail = "min eig(A + A^T)"
        if kind == MeshKind.BOTH_SIDED.value and worst <= 0:
            # column sums exceed the diagonal where the steps shrink towards T
            status, detail = XFAIL, detail + "; indefinite on both-sided grading (known)"
        out.append(CheckResult(f"timeop.l1_symmetric_part_pd[{kind}]", status, worst, detail))
    return out


def check_backward_euler(**_) -> CheckResult:
    n1 = 50
    mesh = build_mesh("uniform", 1.0, 1.0, n1 - 1)
    A = assemble_l1(mesh).entries
    dt = 1.0 / n1
    j = np.arange(1, n1 + 1)
    closed = 4.0 / dt * np.sin(np.pi * j / (2 * (n1 + 1))) ** 2
    ev = np.linalg.eigvalsh(A + A.T)
    err = float(np.max(np.abs(ev - closed) / closed))
    return CheckResult("timeop.backward_euler_symmetric_spectrum", _status(err <= 1e-10), err,
                       "relative error vs (4/dt) sin^2")


def check_exchange(**_) -> CheckResult:
    worst = 0.0
    for n in (4, 5, 11):
        X, signs = exchange_basis(n)
        J = np.eye(n)[::-1]
        worst = max(worst, float(np.max(np.abs(X.T @ X - np.eye(n)))),
                    float(np.max(np.abs(X.T @ J @ X - np.diag(signs)))))
    Jb = exchange_matrix(6).entries
    ok_bar = np.all(Jb[-1] == 0) and np.all(Jb[:, -1] == 0) and np.array_equal(Jb, Jb.T)
    return CheckResult("spectral.exchange_basis", _status(worst <= 1e-14 and bool(ok_bar)), worst,
                       "orthogonality and diagonalisation of J")


def check_coupled_spectrum(**_) -> list[CheckResult]:
    pos, red, res = np.inf, 0.0, 0.0
    for kind in MESH_KINDS:
        for a in ALPHAS + (1.0,):
            for s in (1e-2, 1e-6):
                for n1 in (20, 100):
                    op = build_coupled(build_mesh(kind, a, 1.0, n1 - 1), s)
                    try:
                        sd = decompose(op)
                    except SpectralError:
                        pos = min(pos, -1.0)
                        continue
                    pos = min(pos, float(np.min(sd.eigenvalues.real)))
                    res = max(res, sd.max_residual)
                    if op.symmetric_mesh:
                        full = sla.eigvals(op.matrix)
                        red = max(red, match_spectra(full, sd.eigenvalues) / np.max(np.abs(full)))
    return [
        CheckResult("spectral.positive_real_parts", _status(pos > 0), pos, "min Re eig of coupled operator"),
        CheckResult("spectral.reduction_matches_full", _status(red <= 1e-8), red,
                    "symmetric meshes; relative matching distance"),
        CheckResult("spectral.eigen_residual", _status(res <= 1e-8), res, "max relative residual"),
    ]


def check_lyapunov(rng: np.random.Generator, **_) -> CheckResult:
    margin = np.inf
    for _ in range(20):
        n = 8
        A = np.tril(rng.standard_normal((n, n)), -1) * 0.1 + np.diag(rng.uniform(1, 2, n))
        B = rng.standard_normal((n, n))
        B = B + B.T
        chk = verify_positive_real(A, B)
        if chk:
            margin = min(margin, chk.min_real_part)
    return CheckResult("spectral.positive_definite_implies_positive_real", _status(margin > 0), margin,
                       "min Re eig(A + iB) over random definite cases")


def check_gershgorin(rng: np.random.Generator, **_) -> list[CheckResult]:
    cover = True
    for _ in range(50):
        n = int(rng.integers(3, 12))
        d = np.sort(rng.uniform(0.1, 2.0, n))[::-1]
        S = np.zeros((n, n))
        for m in range(n):
            S[m, m] = d[0] * rng.uniform(1, 2)
            S[m, :m] = -rng.uniform(0, 1, m) * d[0] / max(m, 1)
        beta = float(rng.uniform(0, 100))
        cover &= gershgorin_symmetrized(S, beta).coverage()
    bound_margin = np.inf
    for n in (5, 11, 51):
        for a in (0.3, 0.5, 0.8):
            op = assemble_l1(build_mesh("uniform", a, 1.0, n - 1))
            rep = gershgorin_symmetrized(op.entries, 1e3, op.scaled_coeffs())
            cover &= rep.coverage()
            bound_margin = min(bound_margin, float(np.min(rep.bound_ok.astype(float))))
    mis, smin = 0.0, np.inf
    for a in (0.3, 0.8):
        S = assemble_l1(build_mesh("both_sided", a, 1.0, 21)).entries
        m, s = block_reduction_check(S, 1e3)
        mis, smin = max(mis, m), min(smin, s)
    return [
        CheckResult("spectral.gershgorin_coverage", _status(bool(cover)), 0.0,
                    "every eigenvalue in the disc union (random and L1 cases)"),
        CheckResult("spectral.gershgorin_closed_form_bounds", _status(bound_margin > 0), bound_margin,
                    "closed-form radii within stated bounds, orders 5, 11, 51"),
        CheckResult("spectral.block_reduction", _status(mis <= 1e-8 and smin > 0), mis,
                    "spectrum = eig(S1 + i beta J) U {s}, S1 - sI + i beta J nonsingular"),
    ]


def check_hyperbolic(rng: np.random.Generator, **_) -> list[CheckResult]:
    z = rng.uniform(0.2, 3.0, 40) + 1j * rng.uniform(-3.0, 3.0, 40)
    worst = 0.0
    for kind, lengths, rho in (
        ("dnwr_weight", (0.5, 1.5), None),
        ("coth_coth_m1", (0.7, 1.1), None),
        ("cosech_cosech", (0.4, 0.9), None),
        ("cosech_coth_pair", (0.6, 0.8, 1.2), (0.5, 2.0)),
    ):
        s = stable_ratio(kind, lengths, z, rho)
        n = naive_ratio(kind, lengths, z, rho)
        worst = max(worst, float(np.max(np.abs(s - n) / np.maximum(np.abs(n), 1e-300))))
    big = HyperbolicFactors.build([1.0, 50.0], np.array([800.0 + 10j, 2.0 + 0.5j, 1e-3 + 1e-3j]))
    ident = big.identity_residual()
    return [
        CheckResult("traceprop.stable_vs_naive", _status(worst <= 1e-10), worst,
                    "relative difference for moderate arguments"),
        CheckResult("traceprop.hyperbolic_identity", _status(ident <= 1e-12), ident,
                    "cosh^2 - sinh^2 = 1 beyond overflow"),
    ]


def check_relaxation(**_) -> CheckResult:
    d = abs(optimal_relaxation((1.0, 1.0), "dnwr") - 0.5)
    n = max(abs(v - 1 / 4.5) for v in optimal_relaxation((0.25, 1.0, 0.25), "nnwr"))
    err = max(d, n)
    return CheckResult("bounds.optimal_relaxation", _status(err <= 1e-15), err,
                       "dnwr (1,1) -> 1/2; nnwr (1/4,1,1/4) -> 1/4.5")


def check_rho_sigma(**_) -> CheckResult:
    worst = -np.inf
    for a in (0.3, 0.8):
        rhos = []
        for s in (1e-2, 1e-4, 1e-6):
            sd = decompose(build_coupled(build_mesh("both_sided", a, 1.0, 99), s))
            rhos.append(convergence_factor_rho(sd, 0.5, 1.5, 1.0, 1.0))
        worst = max(worst, float(np.max(np.diff(rhos))))
    return CheckResult("bounds.rho_nonincreasing_in_sigma", _status(worst <= 0), worst,
                       "both-sided mesh, sigma 1e-2 -> 1e-6")


def _desk_op(alpha: float = 0.5, n1: int = 40, sigma: float = 1e-6):
    return build_coupled(build_mesh("both_sided", alpha, 1.0, n1 - 1), sigma)


def check_monodomain(**_) -> list[CheckResult]:
    op = _desk_op()
    pb = ControlProblem(alpha=0.5)
    mono = monodomain_solve(pb, 0.05, op)
    sys_ = coupled_system(op, 1.0, pb.space_domain, 0.05, "dirichlet", "dirichlet")
    res = sys_.residual(mono.X, problem_forcing(pb, op, mono.x))
    opt = float(np.max(np.abs(pb.sigma * mono.u + mono.p)) / np.max(np.abs(mono.p)))
    return [
        CheckResult("subdomain.monodomain_residual", _status(res <= 1e-10), res, "relative residual"),
        CheckResult("subdomain.optimality_sigma_u_plus_p", _status(opt <= 1e-12), opt, "relative"),
    ]


def check_gradient(rng: np.random.Generator, **_) -> CheckResult:
    op = _desk_op()
    rc = ReducedCost(ControlProblem(alpha=0.5), 0.05, op)
    u = rng.standard_normal((rc.x.size, rc.t.size))
    u[[0, -1]] = 0.0
    g, _ = rc.gradient(u)
    worst = 0.0
    for _ in range(5):
        v = rng.standard_normal(u.shape)
        v[[0, -1]] = 0.0
        h = 1e-4 * np.linalg.norm(u) / np.linalg.norm(v)
        fd = (rc.cost(u + h * v) - rc.cost(u - h * v)) / (2 * h)
        ad = float(np.sum(g * v))
        worst = max(worst, abs(fd - ad) / abs(ad))
    return CheckResult("subdomain.adjoint_gradient", _status(worst <= 1e-4), worst,
                       "relative error vs central differences")


def check_drivers(**_) -> list[CheckResult]:
    op = _desk_op()
    pb = ControlProblem(alpha=0.5)
    dn = DNWRSolver(pb, Partition((-1.0, -0.5, 1.0), (1.0, 1.0)), 0.05, op)
    rep, _ = dn.run(0.5, tol=1e-10)
    dn_err = rep.final_error
    sym = DNWRSolver(pb, Partition((-1.0, 0.0, 1.0), (1.0, 1.0)), 0.05, op)
    rep_s, _ = sym.run(0.5, tol=0.0, max_iter=2, detect_divergence=False)
    pb4 = ControlProblem(alpha=0.5, space_domain=(-4.0, 4.0))
    nn = NNWRSolver(pb4, Partition((-4.0, -3.0, 1.0, 4.0), (0.25, 1.0, 0.25)), 0.05, op)
    rep_n, _ = nn.run(tol=1e-10, max_iter=60)
    rep_f, _ = nn.run(tol=1e-10, max_iter=1, init_traces=list(nn.reference))
    rate, _ = estimate_numerical_rate(rep_n)
    return [
        CheckResult("dnwr.matches_monodomain", _status(rep.converged and dn_err <= 1e-9), dn_err,
                    "relative interface error after convergence"),
        CheckResult("dnwr.symmetric_two_step_termination", _status(rep_s.errors[2] <= 1e-12),
                    rep_s.errors[2], "error after 2 iterations at h1 = h2"),
        CheckResult("nnwr.matches_monodomain", _status(rep_n.converged and rep_n.final_error <= 1e-9),
                    rep_n.final_error, f"heterogeneous kappa; rate {rate:.3g}"),
        CheckResult("nnwr.fixed_point", _status(rep_f.increments[0] <= 1e-10), rep_f.increments[0],
                    "update increment from exact traces"),
    ]


CHECKS = (
    check_mesh_symmetry,
    check_l1_monotone,
    check_l1_consistency,
    check_sym_part,
    check_backward_euler,
    check_exchange,
    check_coupled_spectrum,
    check_lyapunov,
    check_gershgorin,
    check_hyperbolic,
    check_relaxation,
    check_rho_sigma,
    check_monodomain,
    check_gradient,
    check_drivers,
)


def verify_suite(seed: int = 0, l1: Callable[..., L1Operator] = assemble_l1) -> list[CheckResult]:
    """Run every check; ``l1`` swaps the L1 assembler (mutation testing)."""
    rng = np.random.default_rng(seed)
    out: list[CheckResult] = []
    for check in CHECKS:
        r = check(rng=rng, l1=l1)
        out.extend(r if isinstance(r, list) else [r])
    return out


def report_table(results: list[CheckResult]) -> Table:
    return Table(["check", "status", "margin", "detail"],
                 [(r.name, r.status, float(r.margin), r.detail) for r in results])
