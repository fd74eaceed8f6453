import math

import numpy as np
import pytest
from scipy import integrate, special

from septracer import kernel as ker
from septracer.errors import InvalidArgument, PoleProximityError
from septracer.kernel import DensityPair


def binomial_gf(x, lam, rho):
    return (1.0 - rho + rho * math.exp(lam)) ** x


def i1_oracle(x, t):
    # trace of exp(-s-s') I_|x|(2 sqrt(s s')) on [0, t], by adaptive quadrature
    return integrate.quad(lambda s: math.exp(-2 * s) * special.iv(abs(x), 2 * s), 0, t,
                          epsabs=1e-14, epsrel=1e-13)[0]


def test_density_pair():
    d = DensityPair(0.6, 0.2)
    assert d.r_plus == pytest.approx(0.2 * 0.4)
    assert d.r_minus == pytest.approx(0.6 * 0.8)
    assert d.swapped() == DensityPair(0.2, 0.6)
    assert d.holes() == DensityPair(0.4, 0.8)
    with pytest.raises(InvalidArgument):
        DensityPair(1.2, 0.5)


def test_radius_guard():
    with pytest.raises(PoleProximityError):
        ker.kernel_spec(0, 1.0, radius=0.5)
    with pytest.raises(InvalidArgument):
        ker.kernel_spec(0, -1.0)


def test_kernel_pole():
    with pytest.raises(PoleProximityError):
        ker.kernel_K(0, 1.0, 0.5, 1.0 / 1.5)


@pytest.mark.parametrize("x,t", [(0, 1.0), (2, 0.5), (-3, 2.0), (5, 10.0), (0, 50.0)])
def test_trace_matches_bessel_quadrature(x, t):
    val = ker.trace_power_In(ker.kernel_spec(x, t), 1)
    assert val == pytest.approx(i1_oracle(x, t), rel=1e-10, abs=1e-14)


def test_trace_closed_form_at_origin():
    # I_1(0, t) = t e^{-2t} (I_0(2t) + I_1(2t))
    t = 3.0
    exact = t * (special.ive(0, 2 * t) + special.ive(1, 2 * t))
    assert ker.trace_power_In(ker.kernel_spec(0, t), 1) == pytest.approx(exact, rel=1e-12)


@pytest.mark.parametrize("x,t,omega", [(1, 2.0, 0.3), (0, 1.0, -0.5), (3, 4.0, 2.0)])
def test_contour_and_bessel_routes_agree(x, t, omega):
    spec = ker.kernel_spec(x, t)
    a = ker.fredholm_det(spec, omega, "contour")
    b = ker.fredholm_det(spec, omega, "bessel")
    assert a.converged and b.converged
    assert abs(a.value - b.value) < 1e-10


def test_Jn_vanish_at_t0():
    spec = ker.kernel_spec(2, 0.0)
    for n in range(1, 5):
        assert abs(ker.multi_integral_Jn(spec, n)) < 1e-14


def test_J1_is_trace_and_J2_from_spectrum():
    spec = ker.kernel_spec(1, 1.5)
    sp = ker.spectrum(1, 1.5, "contour")
    e = sp.elementary(4)
    assert ker.multi_integral_Jn(spec, 1) == pytest.approx(ker.trace_power_In(spec, 1), rel=1e-12)
    # J_n / n! is the n-th elementary symmetric function of the eigenvalues
    for n in (2, 3, 4):
        assert ker.multi_integral_Jn(spec, n) / math.factorial(n) == pytest.approx(e[n].real, rel=1e-9, abs=1e-16)


def test_det_series():
    spec = ker.kernel_spec(0, 1.0)
    J = [ker.multi_integral_Jn(spec, n) for n in range(5)]
    z = 0.1
    trunc = sum(z ** n * J[n] / math.factorial(n) for n in range(5))
    assert abs(ker.fredholm_det(spec, z).value - trunc) < 1e-12


def test_trace_log_series():
    spec = ker.kernel_spec(0, 1.0)
    w = 0.2
    s = sum((-1) ** (n - 1) * w ** n * ker.trace_power_In(spec, n) / n for n in range(1, 30))
    assert ker.fredholm_det(spec, w).value == pytest.approx(math.exp(s), rel=1e-13)


@pytest.mark.parametrize("x", range(0, 7))
def test_gf_t0_binomial(x):
    d = DensityPair(0.55, 0.37)
    for lam in (-1.0, 0.3, 1.1):
        assert ker.gf_height(x, 0.0, lam, d) == pytest.approx(binomial_gf(x, lam, 0.37), rel=1e-12)


def test_gf_lambda_zero():
    assert ker.gf_height(3, 2.0, 0.0, DensityPair(0.2, 0.9)) == pytest.approx(1.0, abs=1e-14)


def test_gf_parity():
    d = DensityPair(0.7, 0.3)
    for x in (1, 2, 4):
        a = ker.gf_height(x, 1.5, 0.4, d)
        b = ker.gf_height(-x, 1.5, -0.4, d.swapped())
        assert abs(a - b) < 1e-12


def test_gf_frozen_values():
    # values cross-checked against 1e5-sample Monte Carlo (|z| < 1)
    d = DensityPair(0.7, 0.3)
    assert ker.gf_height(2, 5.0, 0.5, d).real == pytest.approx(1.333277261827223, rel=1e-10)
    assert ker.gf_height(2, 5.0, -0.5, d).real == pytest.approx(0.8890333378665599, rel=1e-10)


def test_gf_large_t_uses_real_operator():
    assert ker.choose_method(100.0) == "bessel"
    g = ker.gf_height(0, 100.0, 0.3, DensityPair(0.5, 0.5))
    assert 1.0 < g.real < 2.0 and abs(g.imag) < 1e-12


def test_pmf_normalised_and_mean():
    d = DensityPair(0.6, 0.2)
    ns, p = ker.height_pmf_table(1, 2.0, d)
    assert p.sum() == pytest.approx(1.0, abs=1e-10)
    from septracer.series import moment_N
    assert np.dot(ns, p) == pytest.approx(moment_N(1, 2.0, d, 1), abs=1e-10)
    assert ker.height_pmf(1, 2.0, d, 0) == pytest.approx(p[ns == 0][0])
    with pytest.raises(InvalidArgument):
        ker.height_pmf(1, 2.0, d, 100)


def test_pmf_t0_is_binomial():
    ns, p = ker.height_pmf_table(3, 0.0, DensityPair(0.5, 0.4))
    for k in range(4):
        assert p[ns == k][0] == pytest.approx(math.comb(3, k) * 0.4 ** k * 0.6 ** (3 - k), abs=1e-12)


def test_tagged_cdf_properties():
    d = DensityPair(0.5, 0.5)
    vals = [ker.tagged_cdf(x, 5.0, d) for x in range(-4, 5)]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
    ns, p = ker.height_pmf_table(0, 5.0, d)
    assert vals[4] == pytest.approx(p[ns >= 1].sum(), abs=1e-6)
    far = int(8 * math.sqrt(5.0) + 20)
    assert ker.tagged_cdf(far, 5.0, d) >= 1 - 1e-4


def _exact_tracer_mean(t, d):
    s = int(4 * math.sqrt(4 * t)) + 10
    xs = np.arange(-s, s)
    F = np.array([ker.tagged_cdf(int(x), t, d) for x in xs])
    assert F[0] < 1e-12 and F[-1] > 1 - 1e-12
    assert np.all(np.diff(F) >= -1e-6)
    return float(np.sum((xs >= 0) * (1 - F)) - np.sum((xs < 0) * F))


def test_tagged_cdf_large_t_stays_in_range():
    # radius^(-N) cancellation breaks every circle here; the pmf route must take over
    d = DensityPair(0.3, 0.7)
    ns, p = ker.height_pmf_table(-5, 100.0, d, n_max=ker._support_bound(-5, 100.0))
    assert ker.tagged_cdf(-5, 100.0, d) == pytest.approx(p[ns >= 1].sum(), abs=1e-6)


def test_tracer_mean_offset_is_order_one():
    # E[X0(t)] = -xi0 sqrt(4t) + c + o(1) with c close to 1.35; the O(1) shift
    # is what separates the t = 400 simulation from the limiting law
    d = DensityPair(0.3, 0.7)
    xi0 = 0.23837975431571118
    offs = [_exact_tracer_mean(t, d) + xi0 * math.sqrt(4 * t) for t in (25.0, 100.0)]
    assert offs[0] == pytest.approx(1.39835, abs=1e-3)
    assert offs[1] == pytest.approx(1.36352, abs=1e-3)


def test_tagged_cdf_t0():
    # X0(0) is the first particle at a site >= 1: geometric law
    rho = 0.3
    d = DensityPair(0.5, rho)
    for x in (1, 2, 4):
        assert ker.tagged_cdf(x, 0.0, d) == pytest.approx(1 - (1 - rho) ** x, abs=1e-8)
    assert ker.tagged_cdf(0, 0.0, d) == pytest.approx(0.0, abs=1e-8)
    with pytest.raises(InvalidArgument):
        ker.tagged_cdf(0, 1.0, DensityPair(0.5, 0.0))


@pytest.mark.parametrize("x,lam", [(2, 0.3), (0, -0.6), (-3, 0.5)])
def test_particle_hole(x, lam):
    d = DensityPair(0.7, 0.2)
    a = ker.gf_height(x, 1.3, lam, d).real
    b = math.exp(lam * x) * ker.gf_height(x, 1.3, -lam, d.holes()).real
    assert a == pytest.approx(b, abs=1e-8)
