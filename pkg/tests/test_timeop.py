from __future__ import annotations

from math import gamma

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subdiffwr.timegrid import TimeMesh, build_mesh
from subdiffwr.timeop import (
    assemble_coupled,
    assemble_l1,
    build_coupled,
    exchange_matrix,
    l1_coefficients,
)

# frozen with mpmath at 30 digits
SQRT2_M1 = 0.41421356237309504880
SQRT3_M_SQRT2 = 0.317837245195782244725
INV_GAMMA_15 = 1.12837916709551257389615890312


def test_unit_spacing_coefficients():
    d = l1_coefficients(np.arange(5.0), 0.5)
    for m in range(3, 5):
        np.testing.assert_allclose(d[m - 1, :3], [1.0, SQRT2_M1, SQRT3_M_SQRT2], rtol=1e-15)
    assert np.all(np.triu(d, 1) == 0.0)


def test_alpha_one_is_backward_euler():
    m = TimeMesh(kind="uniform", alpha=1.0, horizon=1.0,
                 nodes=np.array([0.0, 0.1, 0.25, 0.3, 0.6, 0.8, 0.95, 1.0]))
    A = assemble_l1(m).entries
    dt = np.diff(m.nodes)
    expected = np.diag(1.0 / dt) - np.diag(1.0 / dt[1:], -1)
    np.testing.assert_allclose(A, expected, rtol=1e-14)


def test_row_offdiagonal_sum_identity():
    # rows of the L1 matrix: |off-diagonal| sum equals d_{m,1} - d_{m,m}
    mesh = build_mesh("uniform", 0.5, 1.0, 3)
    L = assemble_l1(mesh)
    d = L.coeff_table
    A = L.entries / L.scale
    off = np.sum(np.abs(A[1, :1]))
    assert off == pytest.approx(d[1, 0] - d[1, 1], rel=1e-14)


def test_prefactor_is_folded_in():
    L = assemble_l1(build_mesh("uniform", 0.5, 2.0, 1))
    assert L.scale == pytest.approx(INV_GAMMA_15, rel=1e-15)
    assert L.entries[0, 0] == pytest.approx(INV_GAMMA_15, rel=1e-15)


def test_degenerate_mesh_rejected():
    with pytest.raises(ValueError):
        l1_coefficients(np.array([0.0, 0.5, 0.5, 1.0]), 0.5)


def test_exchange_order_four():
    J = exchange_matrix(4).entries
    expected = np.zeros((4, 4))
    expected[0, 2] = expected[1, 1] = expected[2, 0] = 1.0
    np.testing.assert_array_equal(J, expected)
    np.testing.assert_array_equal((J @ J)[:3, :3], np.eye(3))


def test_exchange_order_two():
    np.testing.assert_array_equal(exchange_matrix(2).entries, [[1.0, 0.0], [0.0, 0.0]])


@pytest.mark.parametrize("order", [1, 0, 2.5])
def test_exchange_bad_order(order):
    with pytest.raises(ValueError):
        exchange_matrix(order)


def test_coupled_n1_example():
    op = build_coupled(build_mesh("uniform", 0.5, 2.0, 1), 1.0)
    M = op.matrix.copy()
    g = INV_GAMMA_15
    # the exchange blocks are not Gamma-scaled
    M[:2, :2] /= g
    M[2:, 2:] /= g
    expected = np.array([
        [1, 0, 1, 0],
        [SQRT2_M1 - 1, 1, 0, 0],
        [-1, 0, 1, 0],
        [0, 0, SQRT2_M1 - 1, 1],
    ])
    np.testing.assert_allclose(M, expected, rtol=1e-14, atol=1e-15)


def test_coupled_block_placement():
    op = build_coupled(build_mesh("both_sided", 0.6, 1.0, 9), 1e-6)
    n1 = op.order
    np.testing.assert_array_equal(op.matrix[:n1, n1:], op.Jbar.entries / 1e-6)
    np.testing.assert_array_equal(op.matrix[n1:, :n1], -op.Jbar.entries)
    assert op.symmetric_mesh


def test_uniform_blocks_equal():
    op = build_coupled(build_mesh("uniform", 0.4, 1.0, 9), 1e-2)
    np.testing.assert_array_equal(op.L_fwd.entries, op.L_bwd.entries)


def test_one_sided_blocks_differ():
    op = build_coupled(build_mesh("one_sided", 0.4, 1.0, 9), 1e-2)
    assert not op.symmetric_mesh


def test_coupled_order_mismatch():
    a = assemble_l1(build_mesh("uniform", 0.5, 1.0, 3))
    b = assemble_l1(build_mesh("uniform", 0.5, 1.0, 4))
    with pytest.raises(ValueError, match="order mismatch"):
        assemble_coupled(a, b, exchange_matrix(4), 1.0)
    with pytest.raises(ValueError):
        assemble_coupled(a, a, exchange_matrix(4), 0.0)


def test_alpha_one_symmetric_part_closed_form():
    n1 = 30
    dt = 1.0 / n1
    mesh = build_mesh("uniform", 1.0, 1.0, n1 - 1)
    A = assemble_l1(mesh).entries
    got = np.linalg.eigvalsh(A + A.T)
    # eigenvalues of the backward-difference symmetric part, scaled by 1/dt
    j = np.arange(1, n1 + 1)
    closed = np.sort((4.0 / dt) * np.sin(np.pi * j / (2 * (n1 + 1))) ** 2)
    np.testing.assert_allclose(got, closed, rtol=1e-10)


@pytest.mark.parametrize("kind", ["uniform", "one_sided", "both_sided"])
def test_caputo_consistency_linear(kind):
    alpha = 0.6
    errs = []
    for n in (19, 79, 319):
        m = build_mesh(kind, alpha, 1.0, n)
        t = m.nodes[1:]
        approx = assemble_l1(m).entries @ t
        exact = t ** (1 - alpha) / gamma(2 - alpha)
        errs.append(np.max(np.abs(approx - exact)))
    # L1 is exact for piecewise-linear functions
    assert max(errs) < 1e-10


@settings(max_examples=40, deadline=None)
@given(
    kind=st.sampled_from(["uniform", "one_sided", "both_sided"]),
    alpha=st.floats(0.2, 0.99),
    k=st.integers(2, 60),
)
def test_coefficient_monotonicity(kind, alpha, k):
    m = build_mesh(kind, alpha, 1.0, 2 * k - 1)
    d = l1_coefficients(m.nodes, alpha)
    for row in range(d.shape[0]):
        r = d[row, : row + 1]
        assert np.all(r > 0.0)
        assert np.all(np.diff(r) < 0.0)


@settings(max_examples=30, deadline=None)
@given(alpha=st.floats(0.1, 1.0), k=st.integers(1, 40), sigma=st.floats(1e-8, 1e2))
def test_coupled_structure_property(alpha, k, sigma):
    op = build_coupled(build_mesh("uniform", alpha, 1.0, k), sigma)
    n1 = op.order
    J = op.Jbar.entries
    assert np.all(J[-1, :] == 0.0) and np.all(J[:, -1] == 0.0)
    np.testing.assert_array_equal(J, J.T)
    np.testing.assert_allclose(op.matrix[:n1, n1:] * sigma, J, rtol=1e-15)
    assert np.all(np.triu(op.L_fwd.entries, 1) == 0.0)
