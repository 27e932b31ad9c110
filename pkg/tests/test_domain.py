import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from aggrekit.domain import (
    BoundaryLayout,
    PoissonError,
    build_grid,
    divergence,
    dual_norm,
    face_inner,
    field_reduce,
    gradient,
    holder_seminorm,
    lp_norm,
    neumann_laplacian,
    neumann_poisson,
    weak_lp_norm,
)


def test_grid_spacing():
    g = build_grid(1, 1.0, 8)
    assert g.spacing == (0.125,)
    assert g.cell_volume == 0.125
    g2 = build_grid(2, (2.0, 1.0), (16, 8))
    assert g2.spacing == (0.125, 0.125)
    assert g2.volume == pytest.approx(2.0)


def test_dirichlet_patch_is_recorded():
    g = build_grid(2, (1, 1), (64, 64), BoundaryLayout.with_dirichlet(["left"]))
    assert g.layout.has_dirichlet(2)
    assert g.layout.dirichlet_faces(2) == ("left",)


def test_all_dirichlet_rejected():
    with pytest.raises(ValueError, match="Neumann"):
        build_grid(2, (1, 1), (64, 64), BoundaryLayout.with_dirichlet(["left", "right", "bottom", "top"]))


@pytest.mark.parametrize("d,ext,res", [(3, (1, 1, 1), (8, 8, 8)), (1, 1.0, 3), (1, -1.0, 8)])
def test_bad_grids_rejected(d, ext, res):
    with pytest.raises(ValueError):
        build_grid(d, ext, res)


def test_reductions_on_simple_fields():
    g = build_grid(1, 1.0, 16)
    assert field_reduce(g, np.full(16, 2.0), "mean") == pytest.approx(2.0)
    assert field_reduce(g, np.full(16, 2.0), "mass") == pytest.approx(2.0)
    assert field_reduce(g, np.full(16, 3.0), "holder_seminorm", 0.5) == 0.0
    assert field_reduce(g, np.arange(16.0), "Linf") == 15.0
    with pytest.raises(ValueError):
        field_reduce(g, np.full(16, np.nan), "mean")


def test_weak_lp_of_unit_indicator():
    g = build_grid(1, 2.0, 16)
    u = np.zeros(16)
    u[:8] = 1.0  # the set {u > a} has measure 1 for every a < 1
    for p in (1.0, 2.0, 3.5):
        assert weak_lp_norm(g, u, p) == pytest.approx(1.0)


def test_weak_lp_bounded_by_strong_lp(rng):
    g = build_grid(1, 1.0, 64)
    u = rng.exponential(size=64)
    for p in (1.0, 2.0, 4.0):
        assert weak_lp_norm(g, u, p) <= lp_norm(g, u, p) * (1 + 1e-12)


def test_holder_of_linear_field():
    g = build_grid(1, 1.0, 32)
    x = g.centers(0)
    assert holder_seminorm(g, 3.0 * x, 1.0) == pytest.approx(3.0)


def test_gradient_of_constant_vanishes():
    g = build_grid(2, (1, 1), (8, 8))
    for comp in gradient(g, np.full(g.shape, 5.0)):
        assert np.all(comp == 0)


@pytest.mark.parametrize("d", [1, 2])
def test_summation_by_parts(d, rng):
    g = build_grid(d, [1.0] * d, [12] * d)
    v = rng.normal(size=g.shape)
    fluxes = []
    for axis in range(d):
        shape = list(g.shape)
        shape[axis] += 1
        F = rng.normal(size=shape)
        idx = [slice(None)] * d
        idx[axis] = 0
        F[tuple(idx)] = 0
        idx[axis] = -1
        F[tuple(idx)] = 0
        fluxes.append(F)
    lhs = float(np.sum(v * divergence(g, fluxes))) * g.cell_volume
    rhs = -face_inner(g, gradient(g, v), fluxes)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("d", [1, 2])
def test_neumann_poisson_discrete_eigenfunction(d):
    g = build_grid(d, [1.0] * d, [32] * d)
    x = g.centers(0)
    h = g.spacing[0]
    mode = np.cos(np.pi * x)
    lam = -(2 - 2 * np.cos(np.pi / 32)) / h**2
    if d == 2:
        mode = np.outer(mode, np.ones(32))
    phi = neumann_poisson(g, lam * mode)
    np.testing.assert_allclose(phi, mode, atol=1e-11)


def test_neumann_poisson_residual(rng):
    g = build_grid(2, (1.0, 2.0), (24, 40))
    rhs = rng.normal(size=g.shape)
    phi = neumann_poisson(g, rhs)
    np.testing.assert_allclose(neumann_laplacian(g, phi), rhs - rhs.mean(), atol=1e-9)
    assert abs(phi.mean()) < 1e-12


def test_poisson_error_is_runtime_error():
    assert issubclass(PoissonError, RuntimeError)


def test_dual_norm_of_constant():
    g = build_grid(1, 1.0, 16)
    assert dual_norm(g, np.full(16, -2.5)) == 2.5


def test_dual_norm_of_cosine_mode():
    g = build_grid(1, 1.0, 64)
    x = g.centers(0)
    u = np.cos(2 * np.pi * x)
    # ||grad phi||^2 = -<phi, u> for lap(phi) = u, and phi = u / lambda_k
    h = g.spacing[0]
    lam = -(2 - 2 * np.cos(2 * np.pi / 64)) / h**2
    expected = np.sqrt(-np.sum(u * u / lam) * h)
    assert dual_norm(g, u) == pytest.approx(expected, rel=1e-10)


fields = arrays(np.float64, 16, elements=st.floats(-10, 10, allow_nan=False))


@settings(max_examples=50, deadline=None)
@given(fields, fields, st.floats(-5, 5))
def test_dual_norm_is_a_norm(a, b, s):
    g = build_grid(1, 1.0, 16)
    na, nb = dual_norm(g, a), dual_norm(g, b)
    assert dual_norm(g, a + b) <= na + nb + 1e-9
    assert dual_norm(g, s * a) == pytest.approx(abs(s) * na, rel=1e-9, abs=1e-12)
