import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from nibridge.jets import JetProfile, consistent_extension, equation_polynomial, jet_v
from nibridge.limitshape import watermelon_H

M = 4
_t, _x = sp.symbols("t x")


def watermelon_symbolic():
    xi = _x / sp.sqrt(_t * (1 - _t))
    return (sp.pi - xi * sp.sqrt(4 - xi ** 2) / 2 - 2 * sp.asin(xi / 2)) / (2 * sp.pi)


@pytest.fixture(scope="module")
def derivs():
    H = watermelon_symbolic()
    out = {}
    for k in range(1, M + 1):
        for j in range(k + 1):
            out[(j, k - j)] = sp.lambdify((_t, _x), sp.diff(H, _t, j, _x, k - j) if j else sp.diff(H, _x, k))
    return out


def point_jet(derivs, t, x, m=M):
    return JetProfile.from_derivatives(lambda i, j: float(derivs[(i, j)](t, x)), m)


def test_symbolic_form_is_the_height_function():
    H = sp.lambdify((_t, _x), watermelon_symbolic())
    for t, x in ((0.3, 0.1), (0.5, -0.7), (0.8, 0.2)):
        assert H(t, x) == pytest.approx(float(watermelon_H(t, x)), abs=1e-13)


def test_jet_validation():
    with pytest.raises(ValueError):
        JetProfile(([1.0, 2.0], [1.0, 2.0]))
    Q = JetProfile(([-1.0, 0.5],))
    assert Q.m == 1 and Q.admissible and Q.entry(1, 1) == 0.5
    with pytest.raises(ValueError):
        jet_v(0, 0, Q)


def test_flat_second_order_gives_zero_relation():
    Q = JetProfile(([-0.7, 0.4], [0.0, 0.0, 0.0]))
    assert jet_v(0, 0, Q) == 0.0


def test_v00_is_the_equation_itself():
    q1, q2 = np.array([-0.8, 0.3]), np.array([0.5, -0.2, 0.9])
    Q = JetProfile((q1, q2))
    hx, ht = q1
    hxx, htx, htt = q2
    ref = hx ** 2 * htt - 2 * ht * hx * htx + (ht ** 2 + np.pi ** 2 * hx ** 4) * hxx
    assert jet_v(0, 0, Q) == pytest.approx(ref, rel=1e-14)


def test_watermelon_jets_are_consistent(derivs):
    rng = np.random.default_rng(0)
    for _ in range(5):
        t = rng.uniform(0.2, 0.8)
        x = rng.uniform(-0.5, 0.5) * np.sqrt(t * (1 - t))
        Q = point_jet(derivs, t, x)
        for i in range(M - 1):
            for j in range(M - 1 - i):
                assert abs(jet_v(i, j, Q)) <= 1e-8


def test_extension_reproduces_watermelon_jets(derivs):
    for t, x in ((0.4, 0.05), (0.65, -0.2)):
        Q = point_jet(derivs, t, x)
        E = consistent_extension(Q.pairs())
        for a, b in zip(E.q, Q.q):
            assert np.allclose(a, b, rtol=1e-9, atol=1e-9)


def test_hand_solved_second_order_extension():
    E = consistent_extension([(-1.0, 0.0), (1.0, 0.0)])
    assert E.entry(2, 2) == pytest.approx(-np.pi ** 2, rel=1e-14)


def test_affine_pairs_extend_by_zero():
    E = consistent_extension([(-0.6, 0.3), (0, 0), (0, 0), (0, 0)])
    assert all(np.all(v == 0) for v in E.q[1:])


def test_inadmissible_pairs_are_rejected():
    with pytest.raises(ValueError):
        consistent_extension([(0.0, 1.0), (1.0, 0.0)])
    with pytest.raises(ValueError):
        consistent_extension([(-0.01, 1.0)], eps=0.1)
    with pytest.raises(ValueError):
        consistent_extension([])


@settings(max_examples=40, deadline=None)
@given(pairs=st.lists(st.tuples(st.floats(-2, 2), st.floats(-2, 2)), min_size=1, max_size=4),
       q0=st.floats(-2, -0.1))
def test_extension_is_consistent_and_keeps_pairs(pairs, q0):
    pairs = [(q0, pairs[0][1])] + pairs[1:]
    E = consistent_extension(pairs)
    assert E.pairs() == [tuple(map(float, p)) for p in pairs]
    scale = max(1.0, max(np.max(np.abs(v)) for v in E.q)) ** 3
    for i in range(E.m - 1):
        for j in range(E.m - 1 - i):
            assert abs(jet_v(i, j, E)) <= 1e-9 * scale


def test_equation_polynomial_of_polynomial_solution():
    # F = -x solves the equation, so every relation vanishes
    Q = JetProfile(([-1.0, 0.0], [0.0, 0.0, 0.0], [0.0] * 4))
    assert np.all(equation_polynomial(Q, 1) == 0)
