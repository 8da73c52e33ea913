from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subdiffwr.bounds import convergence_factor_rho, nnwr_weight_bounds, optimal_relaxation
from subdiffwr.spectral import SpectralData
from subdiffwr.subdomain import Partition, TraceSet
from subdiffwr.traceprop import (
    HyperbolicFactors,
    dnwr_trace_step,
    naive_ratio,
    nnwr_trace_step,
    nnwr_weights,
    stable_log_ratio,
    stable_ratio,
)

# frozen with mpmath at 30 digits
INV_COSH_2 = 0.26580222883407969212086273982
LOG_WEIGHT_1_2_Z700 = -1399.30685281944005469058276788


def _diag_sd(lam):
    lam = np.asarray(lam, dtype=complex)
    I = np.eye(lam.size, dtype=complex)
    return SpectralData(lam, I, I, float(np.min(np.sqrt(lam).real)), 1.0, 0.0)


def test_weight_equal_lengths_is_zero():
    z = np.array([0.3 + 0.1j, 5.0, 40 - 20j])
    np.testing.assert_array_equal(stable_ratio("dnwr_weight", (0.7, 0.7), z), 0.0)


def test_weight_scalar_example():
    assert stable_ratio("dnwr_weight", (1.0, 2.0), 1.0) == pytest.approx(INV_COSH_2, rel=1e-15)


def test_weight_no_overflow_far_out():
    with np.errstate(over="raise", invalid="raise"):
        v = stable_ratio("dnwr_weight", (1.0, 2.0), 700.0)
    # 2 e^{-1400} underflows to zero; the log form keeps the leading behaviour
    assert np.isfinite(v)
    assert stable_log_ratio("dnwr_weight", (1.0, 2.0), 700.0).real == pytest.approx(
        LOG_WEIGHT_1_2_Z700, rel=1e-15)
    with np.errstate(over="ignore", invalid="ignore"):
        assert not np.isfinite(naive_ratio("dnwr_weight", (1.0, 2.0), 700.0))


@pytest.mark.parametrize("z", [0.0, -1.0, 1j])
def test_rejects_nonpositive_real_part(z):
    with pytest.raises(ValueError, match="Re"):
        stable_ratio("dnwr_weight", (1.0, 2.0), z)


def test_unknown_kind():
    with pytest.raises(ValueError, match="unknown ratio kind"):
        stable_ratio("nope", (1.0, 2.0), 1.0)


@settings(max_examples=100, deadline=None)
@given(
    kind=st.sampled_from(["dnwr_weight", "coth_coth_m1", "cosech_cosech", "cosech_coth_pair"]),
    a=st.floats(0.05, 3.0),
    b=st.floats(0.05, 3.0),
    c=st.floats(0.05, 3.0),
    re=st.floats(0.05, 50.0),
    im=st.floats(-50.0, 50.0),
)
def test_stable_matches_naive(kind, a, b, c, re, im):
    z = complex(re, im)
    lengths = (a, b, c) if kind == "cosech_coth_pair" else (a, b)
    rho = (0.7, 1.3) if kind == "cosech_coth_pair" else None
    naive = naive_ratio(kind, lengths, z, rho)
    stable = stable_ratio(kind, lengths, z, rho)
    assert np.isfinite(stable)
    tol = 1e-12 * max(1.0, abs(naive)) if kind != "dnwr_weight" else 1e-11 * max(1.0, abs(naive))
    # naive sinh near a zero of cosh loses digits; compare where it is well conditioned
    if abs(np.cosh(b * z)) > 1e-3 and abs(np.sinh(a * z)) > 1e-3:
        assert abs(stable - naive) <= tol * 10


@settings(max_examples=60, deadline=None)
@given(re=st.floats(1e-3, 1e3), im=st.floats(-1e3, 1e3), length=st.floats(0.01, 1.0))
def test_hyperbolic_identity(re, im, length):
    hf = HyperbolicFactors.build([length], [complex(re, im)])
    assert hf.identity_residual() <= 1e-10


def test_hyperbolic_log_forms():
    hf = HyperbolicFactors.build([1.0], [2.0])
    assert hf.log_sinh()[0, 0].real == pytest.approx(np.log(np.sinh(2.0)), rel=1e-15)
    assert hf.log_cosh()[0, 0].real == pytest.approx(np.log(np.cosh(2.0)), rel=1e-15)
    hf = HyperbolicFactors.build([1.0], [800.0])
    assert np.isfinite(hf.log_cosh()).all() and hf.coth[0, 0] == 1.0


def test_dnwr_symmetric_annihilates(small_sd, rng):
    n = small_sd.eigenvalues.size
    for _ in range(100):
        pi = rng.standard_normal(n)
        out = dnwr_trace_step(small_sd, 0.8, 0.8, 1.0, 1.0, 0.5, 0.5, TraceSet(pi))
        assert np.linalg.norm(out.pi) <= 1e-12 * np.linalg.norm(pi)


def test_dnwr_step_rejects_bad_relaxation(small_sd):
    pi = np.zeros(small_sd.eigenvalues.size)
    for th in (0.0, 1.0, 1.5):
        with pytest.raises(ValueError):
            dnwr_trace_step(small_sd, 0.5, 1.5, 1.0, 1.0, th, 0.5, pi)


def test_dnwr_contraction_matches_rho(small_sd):
    sd = small_sd
    a, b = 0.5, 1.5
    rho = convergence_factor_rho(sd, a, b, 1.0, 1.0)
    # on eigenvectors the step is multiplication by -W/2
    W = stable_ratio("dnwr_weight", (a, b), sd.sqrt_eigenvalues)
    k = int(np.argmax(np.abs(W)))
    v = sd.eigvec[:, k]
    out = dnwr_trace_step(sd, a, b, 1.0, 1.0, 0.5, 0.5, v).pi
    np.testing.assert_allclose(out, -0.5 * W[k] * v, atol=1e-10 * np.abs(W[k]) + 1e-15)
    assert np.max(np.abs(W)) / 2 == pytest.approx(rho, rel=1e-14)


def test_dnwr_step_on_diagonal_spectrum():
    lam = np.array([2.0 + 1j, 2.0 - 1j, 5.0, 0.5])
    sd = _diag_sd(lam)
    a, b, k1, k2, th, ph = 0.4, 1.1, 1.0, 4.0, 0.3, 0.6
    # complex trace: the identity basis is not a real similarity
    pi = np.array([1.0, -2.0j, 0.5, 3.0 + 1j])
    z = np.sqrt(lam)
    r = np.sqrt(k1 / k2)
    D = np.array([th, th, ph, ph])
    expected = -D * r * np.tanh(b * z) / np.tanh(a * z) * pi + (1 - D) * pi
    got = dnwr_trace_step(sd, a, b, k1, k2, th, ph, pi).pi
    np.testing.assert_allclose(got, expected, rtol=1e-13)


def test_nnwr_two_subdomain_reduction():
    # scalar reduction: Dirichlet solves respond with coth, Neumann solves with tanh
    lam = np.array([1.5 + 0.5j, 1.5 - 0.5j, 3.0, 0.2])
    z = np.sqrt(lam)
    part = Partition((-0.7, 0.0, 1.2), (1.0, 1.0))
    a, b = part.scaled_lengths
    T11 = (1 / np.tanh(a * z) + 1 / np.tanh(b * z)) * (np.tanh(a * z) + np.tanh(b * z))
    linear, R = nnwr_weights(part, z)
    np.testing.assert_allclose(linear[0] + R[0, 0], T11, rtol=1e-13)
    theta = 0.3
    pi = np.array([1.0, 2.0j, -1.0, 0.5])
    got = nnwr_trace_step(_diag_sd(lam), part, [theta], None, [pi])[0].pi
    np.testing.assert_allclose(got, (1 - theta * T11) * pi, rtol=1e-13)


def test_nnwr_two_equal_subdomains_one_step(small_sd, rng):
    part = Partition((-1.0, 0.0, 1.0), (1.0, 1.0))
    theta = optimal_relaxation(part.kappas, "nnwr")
    assert theta == [0.25]
    pi = rng.standard_normal(small_sd.eigenvalues.size)
    out = nnwr_trace_step(small_sd, part, theta, None, [pi])[0].pi
    assert np.linalg.norm(out) <= 1e-12 * np.linalg.norm(pi)


def test_nnwr_heterogeneous_equal_scaled_lengths_one_step(small_sd, rng):
    # lengths proportional to sqrt(kappa) make the two sides look alike
    part = Partition((-1.0, 0.0, 2.0), (1.0, 4.0))
    theta = optimal_relaxation(part.kappas, "nnwr")
    pi = rng.standard_normal(small_sd.eigenvalues.size)
    out = nnwr_trace_step(small_sd, part, theta, None, [pi])[0].pi
    assert np.linalg.norm(out) <= 1e-12 * np.linalg.norm(pi)


def test_nnwr_zero_traces(small_sd):
    part = Partition((-4.0, -3.0, 1.0, 4.0), (0.25, 1.0, 0.25))
    n = small_sd.eigenvalues.size
    out = nnwr_trace_step(small_sd, part, [0.2, 0.2], None, [np.zeros(n), np.zeros(n)])
    assert all(np.all(o.pi == 0) for o in out)


def test_nnwr_step_shape_errors(small_sd):
    n = small_sd.eigenvalues.size
    with pytest.raises(ValueError):
        nnwr_trace_step(small_sd, Partition((0.0, 1.0), (1.0,)), [], None, [])
    part = Partition.equal(0.0, 3.0, 3)
    with pytest.raises(ValueError, match="one trace"):
        nnwr_trace_step(small_sd, part, [0.25], None, [np.zeros(n)])


def test_nnwr_weights_bounded(small_sd):
    for part in (Partition.equal(-4.0, 4.0, 4), Partition((-4.0, -3.0, 1.0, 4.0), (0.25, 1.0, 0.25)),
                 Partition.equal(-4.0, 4.0, 6, 2.0)):
        z = small_sd.sqrt_eigenvalues
        _, R = nnwr_weights(part, z)
        W = nnwr_weight_bounds(part, small_sd.lambda_min)
        worst = np.max(np.abs(R), axis=2)
        assert np.all(worst <= W * (1 + 1e-12) + 1e-300)
        # five central diagonals only
        for i in range(part.N - 1):
            for j in range(part.N - 1):
                if abs(i - j) > 2:
                    assert np.all(R[i, j] == 0)
