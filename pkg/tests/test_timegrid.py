from __future__ import annotations

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from subdiffwr.timegrid import MeshKind, build_mesh, reflect_mesh

# nodes below were evaluated by hand from the grading formulas


def test_both_sided_alpha_half_n3():
    m = build_mesh("both_sided", 0.5, 1.0, 3)
    np.testing.assert_allclose(m.nodes, [0, 0.0625, 0.5, 0.9375, 1], atol=1e-15)


def test_both_sided_alpha_one_is_uniform():
    m = build_mesh("both_sided", 1.0, 1.0, 3)
    np.testing.assert_allclose(m.nodes, [0, 0.25, 0.5, 0.75, 1], atol=1e-15)


def test_uniform_n3():
    m = build_mesh("uniform", 0.5, 1.0, 3)
    np.testing.assert_allclose(m.nodes, [0, 0.25, 0.5, 0.75, 1], atol=1e-15)


def test_one_sided_nodes_and_reflection():
    m = build_mesh("one_sided", 0.5, 1.0, 3)
    np.testing.assert_allclose(m.nodes, [0, 0.015625, 0.125, 0.421875, 1], atol=1e-15)
    r = reflect_mesh(m)
    np.testing.assert_allclose(r.nodes, [0, 0.578125, 0.875, 0.984375, 1], atol=1e-15)
    assert r.kind == m.kind


def test_reflection_fixes_symmetric_kinds():
    for kind in ("uniform", "both_sided"):
        m = build_mesh(kind, 0.4, 2.0, 9)
        np.testing.assert_allclose(reflect_mesh(m).nodes, m.nodes, atol=1e-13 * 2.0)


def test_even_n_rejected_for_both_sided():
    with pytest.raises(ValueError, match="odd"):
        build_mesh("both_sided", 0.5, 1.0, 4)


@pytest.mark.parametrize("alpha", [0.0, -0.1, 1.2])
def test_alpha_out_of_range(alpha):
    with pytest.raises(ValueError):
        build_mesh("uniform", alpha, 1.0, 3)


def test_bad_horizon_and_n():
    with pytest.raises(ValueError):
        build_mesh("uniform", 0.5, 0.0, 3)
    with pytest.raises(ValueError):
        build_mesh("uniform", 0.5, 1.0, 0)


def test_collapsing_grading_rejected():
    with pytest.raises(ValueError, match="collapses"):
        build_mesh("both_sided", 0.0625, 1.0, 7)


def _representable(kind, alpha, T, n):
    try:
        build_mesh(kind, alpha, T, n)
    except ValueError as exc:
        assert "collapses" in str(exc)
        return False
    return True


def test_unknown_kind():
    with pytest.raises(ValueError):
        build_mesh("logarithmic", 0.5, 1.0, 3)


def test_kind_aliases():
    assert MeshKind.parse("one_sided") is MeshKind.ONE_SIDED
    assert MeshKind.parse("both_sided_graded") is MeshKind.BOTH_SIDED


kinds = st.sampled_from(["uniform", "one_sided", "both_sided"])
alphas = st.floats(0.05, 1.0)
horizons = st.floats(0.1, 20.0)
half = st.integers(1, 60)


@settings(max_examples=80, deadline=None)
@given(kind=kinds, alpha=alphas, T=horizons, k=half)
def test_mesh_invariants(kind, alpha, T, k):
    n = 2 * k - 1  # odd, admissible for every kind
    assume(_representable(kind, alpha, T, n))
    m = build_mesh(kind, alpha, T, n)
    t = m.nodes
    assert t.size == n + 2
    assert t[0] == 0.0 and t[-1] == pytest.approx(T, abs=1e-13 * T)
    assert np.all(np.diff(t) > 0)
    if kind == "uniform":
        np.testing.assert_allclose(np.diff(t), T / (n + 1), atol=1e-13 * T)
    if kind == "both_sided":
        np.testing.assert_allclose(t, T - t[::-1], atol=1e-13 * T)


@settings(max_examples=60, deadline=None)
@given(kind=kinds, alpha=alphas, T=horizons, k=half)
def test_reflection_is_involution(kind, alpha, T, k):
    assume(_representable(kind, alpha, T, 2 * k - 1))
    m = build_mesh(kind, alpha, T, 2 * k - 1)
    np.testing.assert_allclose(reflect_mesh(reflect_mesh(m)).nodes, m.nodes, atol=1e-13 * T)


@settings(max_examples=40, deadline=None)
@given(kind=st.sampled_from(["one_sided", "both_sided"]), T=horizons, k=half)
def test_alpha_one_graded_equals_uniform(kind, T, k):
    n = 2 * k - 1
    np.testing.assert_allclose(build_mesh(kind, 1.0, T, n).nodes,
                               build_mesh("uniform", 1.0, T, n).nodes, atol=1e-13 * T)


@settings(max_examples=40, deadline=None)
@given(alpha=st.floats(0.05, 0.95), k=st.integers(1, 40))
def test_one_sided_reflection_differs(alpha, k):
    m = build_mesh("one_sided", alpha, 1.0, 2 * k)
    assert np.max(np.abs(reflect_mesh(m).nodes - m.nodes)) > 1e-12
