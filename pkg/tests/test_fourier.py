import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from nhcircles.errors import ConvergenceError, InvalidInputError, NotAContractionError
from nhcircles.fourier import (TWO_PI, CircleMap, PeriodicFn, eval_periodic, fit_periodic,
                               grid_points, invert_circle_map, shift_periodic)


def samples(func, n):
    return func(grid_points(n))


def test_constant_fit():
    f = fit_periodic(np.full(10, 2.5))
    assert f.coeff(0) == pytest.approx(2.5)
    assert np.abs(f.half_coeffs[1:]).max() < 1e-15


def test_cos_on_16_nodes():
    f = fit_periodic(np.cos(TWO_PI * np.arange(16) / 16))
    c = f.coeffs
    mid = c.size // 2
    assert abs(f.coeff(1) - 0.5) < 1e-14 and abs(f.coeff(-1) - 0.5) < 1e-14
    mask = np.ones(c.size, bool)
    mask[[mid - 1, mid + 1]] = False
    assert np.abs(c[mask]).max() < 1e-14


def test_sin3():
    f = PeriodicFn.from_function(lambda t: np.sin(3 * t), 8)
    assert f.grid_size == 18
    assert abs(f.coeff(3) - (-0.5j)) < 1e-14
    assert abs(f.coeff(-3) - 0.5j) < 1e-14


@pytest.mark.parametrize("m", [3, 7, 2])
def test_fit_rejects_bad_counts(m):
    with pytest.raises(InvalidInputError):
        fit_periodic(np.zeros(m))


def test_eval_derivatives():
    f = PeriodicFn.from_function(np.cos, 8)
    assert eval_periodic(f, 0.0) == pytest.approx(1.0, abs=1e-14)
    assert eval_periodic(f, 0.0, 1) == pytest.approx(0.0, abs=1e-14)
    assert eval_periodic(f, 0.0, 2) == pytest.approx(-1.0, abs=1e-14)
    g = PeriodicFn.from_function(lambda t: np.sin(2 * t), 8)
    assert eval_periodic(g, np.pi / 4, 1) == pytest.approx(0.0, abs=1e-13)
    with pytest.raises(InvalidInputError):
        eval_periodic(g, 0.0, 5)


def test_shift_sin_to_cos():
    f = PeriodicFn.from_function(np.sin, 16)
    th = np.linspace(0, TWO_PI, 101)
    assert np.abs(shift_periodic(f, np.pi / 2)(th) - np.cos(th)).max() < 1e-14


def test_invert_trivial():
    assert np.abs(invert_circle_map(CircleMap(PeriodicFn.zero(8))).displacement.values).max() == 0
    v = invert_circle_map(CircleMap(PeriodicFn.constant(0.7, 8))).displacement
    assert np.allclose(v.values, -0.7, atol=1e-15)


def test_invert_against_brute_force():
    u = PeriodicFn.from_function(lambda t: 0.2 * np.sin(t), 32)
    m = CircleMap(u)
    v = invert_circle_map(m, tol=1e-14)
    th = u.grid
    assert np.abs(m(th + v.displacement.values) - th).max() <= 1e-12
    # monotone inversion of dense forward samples
    x = np.linspace(-1.0, TWO_PI + 1.0, 100_001)
    y = x + 0.2 * np.sin(x)
    assert np.abs(np.interp(th, y, x) - (th + v.displacement.values)).max() < 1e-8


def test_invert_errors():
    with pytest.raises(NotAContractionError):
        invert_circle_map(CircleMap(PeriodicFn.from_function(lambda t: 1.2 * np.sin(t), 16)))
    with pytest.raises(ConvergenceError):
        invert_circle_map(CircleMap(PeriodicFn.from_function(lambda t: 0.9 * np.sin(t), 16)),
                          max_iter=3)


def test_norms():
    f = PeriodicFn.from_function(lambda t: np.cos(t) + 0.25 * np.sin(7 * t), 16)
    assert f.sup_norm_estimate() >= f.max_abs() - 1e-15
    assert f.sup_norm_estimate() == pytest.approx(1.25)
    assert f.weighted_norm(0.1) > f.sup_norm_estimate()


coeffs = st.lists(st.floats(-1, 1), min_size=6, max_size=6)


@settings(max_examples=40, deadline=None)
@given(coeffs, st.floats(-7, 7), st.floats(-7, 7))
def test_shift_composes(c, d1, d2):
    f = PeriodicFn.from_function(lambda t: sum(a * np.cos(k * t + k) for k, a in enumerate(c)), 8)
    a = f.shift(d1).shift(d2).half_coeffs
    b = f.shift(d1 + d2).half_coeffs
    assert np.abs(a - b).max() < 1e-14


@settings(max_examples=40, deadline=None)
@given(coeffs, st.floats(-7, 7), st.floats(0, 6.3))
def test_derivative_commutes_with_shift(c, d, th):
    f = PeriodicFn.from_function(lambda t: sum(a * np.sin(k * t - 0.3) for k, a in enumerate(c)), 8)
    assert abs(eval_periodic(f.shift(d), th, 1) - eval_periodic(f, th + d, 1)) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=18, max_size=18))
def test_fit_eval_roundtrip(vals):
    f = fit_periodic(np.array(vals))
    assert np.abs(f(f.grid) - np.array(vals)).max() <= 1e-12 * max(1.0, f.max_abs())


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 0.45), st.integers(1, 4), st.floats(0, 6))
def test_double_inverse(amp, k, ph):
    u = PeriodicFn.from_function(lambda t: amp / k * np.sin(k * t + ph), 128)
    m = CircleMap(u)
    tol = 1e-13
    inv = invert_circle_map(m, tol=tol)
    # only meaningful when the inverse is resolved by the grid
    assume(inv.displacement.tail_mass() < 1e-15)
    back = invert_circle_map(inv, tol=tol)
    assert np.abs(back.displacement.values - u.values).max() <= 10 * tol
