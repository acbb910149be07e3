from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from nibridge.densitymatch import (DensityMatchError, PerturbedDensity, check_bounds,
                                   construct_matching_density, contour_stieltjes_derivatives,
                                   linear_window, real_stieltjes_derivatives, step_derivatives)
from nibridge.freeconv import GriddedMeasure


def base_density():
    x = np.linspace(-1, 1, 401)
    v = 0.5 + 0.1 * x + 0.4 * np.maximum(0, np.abs(x) - 0.3) ** 2
    g = GriddedMeasure.from_density(-1, x[1] - x[0], v)
    return g.scaled(1 / g.mass)


def pv_re_m0(density, nodes, breaks=()):
    """Principal value of int rho(x)/x dx: Cauchy-weighted quadrature on the cell holding 0,
    Gauss-Legendre on every other smooth piece."""
    pts = np.unique(np.concatenate([nodes, breaks]))
    pts = pts[np.abs(pts) > 1e-9]  # 0 must sit strictly inside a cell
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        if a < 0 < b:
            total += integrate.quad(density, a, b, weight="cauchy", wvar=0.0)[0]
        else:
            total += integrate.fixed_quad(lambda x: density(x) / x, a, b, n=12)[0]
    return total


def test_linear_window():
    delta, alpha, beta = linear_window(base_density())
    assert delta == pytest.approx(0.3, abs=0.006)
    g = base_density()
    assert alpha == pytest.approx(g.density(0.0))
    with pytest.raises(ValueError):
        linear_window(GriddedMeasure.from_density(1.0, 0.5, [0.0, 1.0, 0.0]))


def test_closed_form_derivatives_match_contour_route():
    g = base_density()
    closed = real_stieltjes_derivatives(g, 4)
    contour = contour_stieltjes_derivatives(g, 4, 0.15)
    assert np.allclose(contour.real, closed, rtol=1e-9, atol=1e-9)
    # imaginary part at 0 is pi rho(0), its derivatives pi rho^(k)(0)
    _, alpha, beta = linear_window(g)
    assert contour.imag[:2] == pytest.approx([np.pi * alpha, np.pi * beta], abs=1e-9)
    assert np.allclose(contour.imag[2:], 0, atol=1e-8)
    assert closed[0] == pytest.approx(pv_re_m0(g.density, g.nodes), abs=1e-8)


def test_step_derivatives_against_quadrature():
    d = step_derivatives(0.4, 0.9, 0.3, 3)
    for k in range(4):
        ref = integrate.quad(lambda x: 0.3 * factorial(k) / x ** (k + 1), 0.4, 0.9)[0]
        assert d[k] == pytest.approx(ref, rel=1e-10)


def test_met_targets_need_no_perturbation():
    g = base_density()
    r = real_stieltjes_derivatives(g, 3)
    match = construct_matching_density(g, r, 0.3, 1.0, 1.0)
    assert np.allclose(match.c, 0.0, atol=1e-10)
    assert match.theta == pytest.approx(0.0, abs=1e-14)
    x = np.linspace(-1, 1, 1001)
    assert np.max(np.abs(match.density.density(x) - g.density(x))) < 1e-10


@pytest.mark.parametrize("variant", ["balanced", "literal"])
@pytest.mark.parametrize("theta", [0.02, -0.015])
def test_offset_only_shifts_real_part_by_theta(variant, theta):
    g = base_density()
    r0 = real_stieltjes_derivatives(g, 0)[0]
    match = construct_matching_density(g, [r0 + theta], 0.3, 1.0, 1.0, prestep=variant)
    assert len(match.prestep) == 2
    assert all(abs(h) == pytest.approx(0.3 / 4) for _, _, h in match.prestep)
    breaks = [e for lo, hi, _ in match.prestep for e in (lo, hi)]
    shifted = pv_re_m0(match.density.density, g.nodes, breaks)
    assert shifted - r0 == pytest.approx(theta, abs=1e-8)
    if variant == "balanced":
        assert match.density.mass == pytest.approx(1.0, abs=1e-12)


def test_rejects_bad_inputs():
    g = base_density()
    with pytest.raises(ValueError):
        construct_matching_density(g.scaled(2.0), [0.0], 0.3, 1.0, 1.0)
    with pytest.raises(ValueError):
        construct_matching_density(g, [], 0.3, 1.0, 1.0)
    with pytest.raises(ValueError):
        construct_matching_density(g, [0.0, 1.0], 0.3, 1.0, 1.0, height_cap="tall")
    with pytest.raises(ValueError):
        construct_matching_density(g, [0.5], 0.3, 1.0, 1.0, prestep="other")


def test_huge_targets_fail_cleanly():
    g = base_density()
    r = real_stieltjes_derivatives(g, 2)
    with pytest.raises(DensityMatchError):
        construct_matching_density(g, r + np.array([0, 0, 1e300]), 0.3, 1.0, 1.0)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), m=st.integers(1, 3),
       cap=st.sampled_from(["stacked", "uniform"]))
def test_solved_match_properties(seed, m, cap):
    g = base_density()
    rng = np.random.default_rng(seed)
    an = real_stieltjes_derivatives(g, m)
    r = an * (1 + 0.01 * rng.standard_normal(m + 1)) + 0.01 * rng.standard_normal(m + 1)
    match = construct_matching_density(g, r, 0.3, 1.0, 1.0, height_cap=cap)
    dens = match.density
    assert abs(dens.mass - 1.0) <= 1e-8
    assert abs(np.sum(match.c)) <= 1e-10 * max(1.0, np.max(np.abs(match.c)))
    lo, hi = check_bounds(match)
    assert 0.3 / 2 <= lo and hi <= 2 * 1.0
    R = match.untouched_radius
    x = np.linspace(-0.99 * R, 0.99 * R, 301)
    assert np.max(np.abs(dens.density(x) - g.density(x))) == 0.0
    err = np.abs(real_stieltjes_derivatives(dens, m) - r)
    assert np.all(err <= 1e-6 * max(1.0, np.max(np.abs(r))))


def test_perturbed_transform_matches_quadrature():
    dens = PerturbedDensity(base_density(), ((0.5, 0.7, 0.05), (-0.9, -0.6, -0.02)))
    z = 0.1 + 0.2j
    pts = dens.breakpoints()
    f = lambda x, part: part(dens.density(x) / (x - z))
    ref = 0j
    for a, b in zip(pts[:-1], pts[1:]):
        ref += integrate.quad(f, a, b, args=(np.real,))[0] + 1j * integrate.quad(f, a, b, args=(np.imag,))[0]
    assert abs(dens.stieltjes(z) - ref) < 1e-10
