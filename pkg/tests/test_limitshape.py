import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nibridge.limitshape import (BoundaryError, HeightGrid, ShapeGrid, SolverError,
                                 burgers_residual, coefficients, complex_slope,
                                 height_from_shape, height_grid_from_function,
                                 maximum_principle_check, residual_G, residual_H, scale_height,
                                 scale_shape, semicircle_kappa, semicircle_shape_G,
                                 semicircle_shape_density, shape_from_height,
                                 shape_grid_from_function, shear_height, shear_shape,
                                 solve_G_dirichlet, watermelon_G, watermelon_H,
                                 watermelon_density)


def solve_from(fn, tr, yr, n, **kw):
    return solve_G_dirichlet(lambda y: fn(tr[0], y), lambda y: fn(tr[1], y),
                             lambda t: fn(t, yr[0]), lambda t: fn(t, yr[1]), tr, yr, (n, n), **kw)


def sup_error(grid, fn):
    return np.max(np.abs(grid.values - fn(grid.t[:, None], grid.y[None, :])))


# ---------------------------------------------------------------- coefficients

def test_coefficients():
    c = coefficients(0.3, -0.5)
    assert c.b_matrix() == pytest.approx(np.array([[0.25, 0.15], [0.15, 0.09 + np.pi ** 2 * 0.0625]]))
    assert c.d_matrix()[1, 1] == pytest.approx(np.pi ** 2 / 0.0625)
    with pytest.raises(ValueError):
        coefficients(1.0, 0.0)


@settings(max_examples=100, deadline=None)
@given(u=st.floats(-10, 10), v=st.floats(0.05, 10).map(lambda s: -s))
def test_equations_are_elliptic_for_negative_slope(u, v):
    c = coefficients(u, v)
    B = c.b_matrix()
    assert np.linalg.det(B) == pytest.approx(np.pi ** 2 * v ** 6, rel=1e-8)
    assert B[0, 0] > 0 and np.all(np.diag(c.d_matrix()) > 0)


def test_kappa_closed_form():
    assert semicircle_kappa(0, 10, 2, 2) == pytest.approx(np.sqrt(26) - 4, abs=1e-14)
    assert semicircle_kappa(0, 10, 2, 2) == pytest.approx(1.09902, abs=1e-5)


# ---------------------------------------------------------------- residuals

def test_watermelon_G_residual_is_second_order():
    res = []
    for n in (129, 257):
        g = shape_grid_from_function(watermelon_G, (0.2, 0.8), (0.2, 0.8), (n, n), eps=0.05)
        r = residual_G(g)
        assert not r.flagged.any()
        res.append(r.sup)
    assert res[1] < 0.01 and res[0] / res[1] > 3.5


def test_semicircle_shape_residual_is_second_order():
    fn = lambda t, y: semicircle_shape_G(t, y, 0, 10, 2, 2)
    res = [residual_G(shape_grid_from_function(fn, (1, 9), (0.2, 1.8), (n, n))).sup for n in (129, 257)]
    assert res[0] / res[1] > 3.5


def test_watermelon_H_residual_is_second_order():
    res = []
    for n in (33, 65):
        h = height_grid_from_function(watermelon_H, (0.3, 0.7), (-0.4, 0.4), (n, n))
        res.append(residual_H(h).sup)
    assert res[0] / res[1] > 3.5


def test_residual_flags_wrong_monotonicity():
    g = shape_grid_from_function(lambda t, y: y + 0 * t, (0, 1), (0, 1), (5, 5))
    assert residual_G(g).flagged.all()
    assert np.isnan(residual_G(g).sup)


# ---------------------------------------------------------------- Dirichlet solver

def test_solver_reproduces_watermelon():
    errs = [sup_error(solve_from(watermelon_G, (0.2, 0.8), (0.2, 0.8), n), watermelon_G)
            for n in (17, 33)]
    assert errs[1] < 1e-3 and errs[0] / errs[1] >= 3


def test_solver_reproduces_semicircle_shape():
    fn = lambda t, y: semicircle_shape_G(t, y, 0, 10, 2, 2)
    g = solve_from(fn, (1, 9), (0.2, 1.8), 33)
    assert sup_error(g, fn) < 1e-3
    assert g.residual_norm <= 1e-8 and g.admissible()


def test_linear_data_is_solved_exactly():
    fn = lambda t, y: 0.3 * t - 2.0 * y
    g = solve_from(fn, (0, 1), (0, 1), 9, eps=0.1)
    assert sup_error(g, fn) < 1e-12


def test_boundary_errors():
    fn = watermelon_G
    with pytest.raises(BoundaryError):
        solve_G_dirichlet(lambda y: fn(0.2, y) + 0.1, lambda y: fn(0.8, y),
                          lambda t: fn(t, 0.2), lambda t: fn(t, 0.8), (0.2, 0.8), (0.2, 0.8), (9, 9))
    with pytest.raises(BoundaryError):
        solve_G_dirichlet(np.zeros(4), np.zeros(9), np.zeros(9), np.zeros(9), (0, 1), (0, 1), (9, 9))
    up = lambda t, y: y + 0 * t
    with pytest.raises(BoundaryError):
        solve_from(up, (0, 1), (0, 1), 9)


def test_non_convergence_is_reported():
    with pytest.raises(SolverError) as info:
        solve_from(watermelon_G, (0.2, 0.8), (0.2, 0.8), 17, max_iters=0)
    assert info.value.residual > 1e-8
    assert isinstance(info.value.grid, ShapeGrid)


def test_grid_validation():
    with pytest.raises(ValueError):
        ShapeGrid((0, 1), (0, 1), np.zeros((2, 5)))
    with pytest.raises(ValueError):
        ShapeGrid((0, 1), (0, 1), np.full((3, 3), np.nan))
    with pytest.raises(ValueError):
        HeightGrid((0, 1), (0, 1), np.zeros(5))


# ---------------------------------------------------------------- shape <-> height

def test_height_from_shape_matches_closed_form():
    g = shape_grid_from_function(watermelon_G, (0.3, 0.7), (0.01, 0.99), (9, 2001))
    h = height_from_shape(g, nx=101, x_range=(-0.3, 0.3))
    ref = watermelon_H(h.t[:, None], h.x[None, :])
    assert np.max(np.abs(h.values - ref)) < 1e-5
    rho = -np.gradient(h.values, h.hx, axis=1)
    dens = watermelon_density(h.t[:, None], h.x[None, :])
    assert np.max(np.abs(rho - dens)[:, 1:-1]) < 5e-3


def test_shape_height_round_trip():
    h = height_grid_from_function(watermelon_H, (0.3, 0.7), (-1.1, 1.1), (5, 8001))
    g = shape_from_height(h, ny=41, y_range=(0.1, 0.9))
    ref = watermelon_G(g.t[:, None], g.y[None, :])
    assert np.max(np.abs(g.values - ref)) < 1e-5
    with pytest.raises(ValueError):
        shape_from_height(HeightGrid((0, 1), (0, 1), np.tile(np.linspace(0, 1, 5), (3, 1))))
    with pytest.raises(ValueError):
        height_from_shape(ShapeGrid((0, 1), (0, 1), np.tile(np.linspace(0, 1, 5), (3, 1))))


# ---------------------------------------------------------------- complex slope

def test_complex_slope_of_watermelon():
    errs = []
    for n in (101, 201):
        h = height_grid_from_function(watermelon_H, (0.3, 0.7), (-0.45, 0.45), (n, n))
        s = complex_slope(h)
        assert np.all(s.f.imag[s.mask] >= 0)
        dens = watermelon_density(s.t[:, None], s.x[None, :])
        assert np.allclose(s.f.imag[s.mask], np.pi * dens[s.mask], atol=0.05)
        errs.append(burgers_residual(s).sup)
    assert errs[1] < errs[0]
    with pytest.raises(ValueError):
        complex_slope(HeightGrid((0, 1), (0, 1), np.ones((5, 5))))


# ---------------------------------------------------------------- comparison

def test_maximum_principle_on_solved_pair():
    fn1 = watermelon_G
    fn2 = lambda t, y: watermelon_G(t, y) + 0.01 * (1 + t)
    a = solve_from(fn1, (0.2, 0.8), (0.2, 0.8), 17)
    b = solve_from(fn2, (0.2, 0.8), (0.2, 0.8), 17)
    rep = maximum_principle_check(a, b)
    assert rep.boundary_dominated and rep.interior_violations == 0 and rep.bound_holds
    with pytest.raises(ValueError):
        maximum_principle_check(a, solve_from(fn1, (0.2, 0.8), (0.2, 0.8), 9))


# ---------------------------------------------------------------- invariances

def test_scaling_and_shear_keep_solutions():
    g = shape_grid_from_function(watermelon_G, (0.2, 0.8), (0.2, 0.8), (41, 41))
    base = residual_G(g).values
    for alpha, beta in ((2.0, 0.5), (0.7, 3.0)):
        s = scale_shape(g, alpha, beta)
        # residual scales by a constant factor, so it stays at truncation level
        assert np.allclose(residual_G(s).values, alpha ** 1.5 * beta ** -0.5 * base, rtol=1e-6)
    sh = shear_shape(g, 0.7)
    assert np.allclose(residual_G(sh).values, base, atol=1e-9)


def test_scaled_closed_form_is_another_watermelon():
    g = shape_grid_from_function(watermelon_G, (0.2, 0.8), (0.2, 0.8), (9, 9))
    s = scale_shape(g, 2.0, 1.0)
    # (1/2)^{1/2} G(2t, y) is the watermelon on [0, 1/2] with mass 1
    ref = watermelon_G(s.t[:, None], s.y[None, :], a=0.0, b=0.5)
    assert np.allclose(s.values, ref, atol=1e-12)


def test_height_invariances():
    h = height_grid_from_function(watermelon_H, (0.3, 0.7), (-0.4, 0.4), (41, 41))
    base = residual_H(h).values
    s = scale_height(h, 2.0, 1.5)
    factor = (2.0 / 1.5 ** 2) ** 3 * 2.0 ** 2 * 1.5 ** 2
    assert np.allclose(residual_H(s).values, factor * base, rtol=1e-6, atol=1e-10)
    wide = height_grid_from_function(watermelon_H, (0.3, 0.7), (-1.5, 1.5), (41, 601))
    sh = shear_height(wide, 0.5)
    ref = watermelon_H(sh.t[:, None], sh.x[None, :] - 0.5 * sh.t[:, None])
    assert np.max(np.abs(sh.values - ref)) < 1e-4
