"""Quintic and cubic Hermite interpolation."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from regime_rkf.errors import OutOfSpan
from regime_rkf.hermite import (cubic_hermite, cubic_hermite_slope, cubic_shift_resample,
                                quintic_eval012, quintic_fit, quintic_interpolate)

coeff = st.floats(-3, 3)


@settings(max_examples=50, deadline=None)
@given(st.lists(coeff, min_size=6, max_size=6), st.floats(-1, 1), st.floats(0.05, 0.5),
       st.floats(0, 1))
def test_quintic_reproduces_degree_five(c, x0, h, t):
    p = np.polynomial.Polynomial(c)
    nodes = x0 + h * np.arange(3)
    patch = quintic_fit(x0, h, p(nodes), p.deriv()(nodes))
    x = x0 + 2 * h * t
    got = quintic_eval012(patch, x)
    want = (p(x), p.deriv()(x), p.deriv(2)(x))
    scale = 1.0 + np.abs(c).sum() * (1 + abs(x0) + 2 * h) ** 5
    for g, w, k in zip(got, want, (0, 1, 2)):
        assert g == pytest.approx(w, abs=1e-9 * scale / h ** k)


def test_quintic_rejects_points_outside_its_stencil():
    patch = quintic_fit(0.0, 0.1, [0, 0, 0], [0, 0, 0])
    with pytest.raises(OutOfSpan):
        quintic_eval012(patch, 0.25)


def test_quintic_interpolate_stencils_and_clamping():
    h = 0.1
    x = np.arange(11) * h
    p = np.polynomial.Polynomial([1, -2, 0.5, 0.3, -0.1, 0.05])
    for stencil in ("floor", "centered"):
        for xq in (0.0, 0.37, 0.95, 1.0):
            v, d1, d2 = quintic_interpolate(p(x), p.deriv()(x), h, xq, stencil)
            assert v == pytest.approx(p(xq), abs=1e-12)
            assert d2 == pytest.approx(p.deriv(2)(xq), abs=1e-9)
    with pytest.raises(ValueError):
        quintic_interpolate(p(x), p.deriv()(x), h, 0.5, "nearest")


@settings(max_examples=50, deadline=None)
@given(st.lists(coeff, min_size=4, max_size=4), st.floats(0.01, 1.0), st.floats(0, 1))
def test_cubic_reproduces_cubics(c, h, t):
    p = np.polynomial.Polynomial(c)
    args = (p(0.0), p(h), p.deriv()(0.0), p.deriv()(h), h, t)
    assert cubic_hermite(*args) == pytest.approx(p(t * h), abs=1e-10)
    assert cubic_hermite_slope(*args) == pytest.approx(p.deriv()(t * h), abs=1e-8 / h)


def _closure(x):
    return 5.0 - np.exp(x)


@settings(max_examples=40, deadline=None)
@given(st.lists(coeff, min_size=4, max_size=4), st.floats(-0.35, 0.35))
def test_cubic_resample_is_exact_on_cubics(c, shift):
    h, m = 0.05, 40
    x = np.arange(m + 1) * h
    p = np.polynomial.Polynomial(c)
    out = cubic_shift_resample(p(x), p.deriv()(x), h, shift, _closure, right_closure=-7.0)
    pos = x + shift
    inside = (pos >= 0) & (pos <= x[-1])
    np.testing.assert_allclose(out[inside], p(pos[inside]), atol=1e-10)
    np.testing.assert_allclose(out[pos < 0], _closure(pos[pos < 0]))
    assert np.all(out[pos > x[-1]] == -7.0)


def test_zero_shift_is_the_identity():
    rng = np.random.default_rng(3)
    v, s = rng.standard_normal(30), rng.standard_normal(30)
    assert np.array_equal(cubic_shift_resample(v, s, 0.1, 0.0, _closure), v)


def test_whole_cell_shift_moves_nodes():
    v = np.arange(21.0)
    out = cubic_shift_resample(v, np.ones(21), 0.1, 0.3, _closure, right_closure=0.0)
    np.testing.assert_array_equal(out[:18], v[3:])
    np.testing.assert_array_equal(out[18:], 0.0)
