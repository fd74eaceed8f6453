import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from septracer.contour import integrate_1d, integrate_nd, make_contour, rotate
from septracer.errors import EvaluationError, InvalidArgument, UnsupportedDimension


def test_rejects_bad_parameters():
    with pytest.raises(InvalidArgument):
        make_contour(0.0, 16)
    with pytest.raises(InvalidArgument):
        make_contour(1.0, 4)
    with pytest.raises(InvalidArgument):
        make_contour(float("nan"), 16)


def test_axis_nodes_are_exact():
    c = make_contour(0.5, 16)
    assert c.nodes[4] == 0.5j
    assert c.nodes[8] == -0.5


@pytest.mark.parametrize("k,expected", [(-1, 1.0), (0, 0.0), (2, 0.0), (-3, 0.0)])
def test_monomials(k, expected):
    r = integrate_1d(lambda z: z ** k, make_contour(0.7, 16))
    assert r.converged
    assert abs(r.value - expected) < 1e-14


def test_residue_of_exponential():
    # (1/2 pi i) oint e^z / z^3 dz = 1/2
    r = integrate_1d(lambda z: np.exp(z) / z ** 3, make_contour(1.0, 16))
    assert abs(r.value - 0.5) < 1e-13


def test_shifted_center():
    c = make_contour(0.3, 32, center=-1.0)
    r = integrate_1d(lambda z: 1.0 / (z + 1.0) + 1.0 / (z - 2.0), c)
    assert abs(r.value - 1.0) < 1e-13


def test_non_convergence_flag():
    # pole just outside the circle: geometric convergence is far too slow
    r = integrate_1d(lambda z: 1.0 / (z - 1.0001), make_contour(1.0, 16), cap=64)
    assert not r.converged and math.isinf(r.est_error)


def test_nonfinite_integrand():
    with pytest.raises(EvaluationError), np.errstate(divide="ignore", invalid="ignore"):
        integrate_1d(lambda z: 1.0 / (z - 1.0), make_contour(1.0, 8))


def test_scalar_callable():
    r = integrate_1d(lambda z: complex(1.0 / z), make_contour(1.0, 8))
    assert abs(r.value - 1.0) < 1e-14


def test_nd():
    c = make_contour(0.5, 8)
    r = integrate_nd(lambda a, b: np.exp(a * b) / (a * b) ** 2, c, 2)
    # coefficient of (ab)^1 in exp(ab): 1
    assert abs(r.value - 1.0) < 1e-12
    r3 = integrate_nd(lambda a, b, e: 1.0 / (a * b * e), c, 3)
    assert abs(r3.value - 1.0) < 1e-13
    with pytest.raises(UnsupportedDimension):
        integrate_nd(lambda *z: 1.0, c, 5)


def test_rotation_invariance():
    c = make_contour(0.4, 32)
    f = lambda z: np.exp(z) / z ** 2
    a = np.sum(c.weights * f(c.nodes))
    rc = rotate(c, 7)
    b = np.sum(rc.weights * f(rc.nodes))
    assert abs(a - b) < 1e-15


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=10), st.integers(0, 9))
def test_polynomial_coefficients(coeffs, k):
    # (1/2 pi i) oint p(z) / z^(k+1) dz picks out the k-th coefficient
    p = np.polynomial.Polynomial(coeffs)
    r = integrate_1d(lambda z: p(z) / z ** (k + 1), make_contour(1.0, 16))
    expected = coeffs[k] if k < len(coeffs) else 0.0
    assert abs(r.value - expected) < 1e-12 * max(1.0, sum(map(abs, coeffs)))
