import math

import mpmath as mp
import numpy as np
import pytest

from septracer import asymptotics as asy
from septracer.errors import DomainError, InvalidArgument
from septracer.kernel import DensityPair, kernel_spec, trace_power_In
from septracer.series import cumulant_N_finite

SQ = math.sqrt(math.pi)


def Xi_oracle(x):
    with mp.workdps(50):
        x = mp.mpf(x)
        return float(mp.exp(-x * x) / mp.sqrt(mp.pi) - x * mp.erfc(x))


@pytest.mark.parametrize("x", [-3.0, -0.7, 0.0, 0.4, 2.5, 6.0, 15.0, 24.0])
def test_Xi_against_quadrature(x):
    assert float(asy.Xi_func(x)) == pytest.approx(Xi_oracle(x), rel=1e-12, abs=1e-300)


def test_special_values():
    assert float(asy.A_func(0.0)) == pytest.approx(1 / SQ, rel=1e-15)
    assert float(asy.Xi_func(0.0)) == pytest.approx(1 / SQ, rel=1e-15)
    xs = np.linspace(-2, 2, 9)
    assert np.allclose(asy.A_func(xs), asy.A_func(-xs), rtol=1e-15)
    assert float(asy.Xi_n(4, 0.3)) == pytest.approx(float(asy.Xi_func(0.6)) / 2)
    with pytest.raises(InvalidArgument):
        asy.Xi_n(0, 0.1)


def test_mu_methods_agree():
    d = DensityPair(0.7, 0.3)
    for xi, lam in [(0.2, 0.3), (-0.4, -0.5), (0.0, 0.6)]:
        s = asy.mu_series(xi, lam, d).value
        i = asy.mu_integral(xi, lam, d).value
        assert s == pytest.approx(i, abs=1e-11)


def test_mu_extrapolation_agrees():
    d = DensityPair(0.3, 0.7)
    r = asy.mu_extrapolation(0.5, 1.0, d)
    assert r.value == pytest.approx(asy.mu_integral(0.5, 1.0, d).value, abs=1e-6)


def test_mu_parity_and_zero():
    d = DensityPair(0.7, 0.3)
    assert asy.mu(0.3, 0.5, d).value == pytest.approx(asy.mu(-0.3, -0.5, d.swapped()).value, abs=1e-14)
    assert asy.mu(0.3, 0.0, d).value == 0.0
    with pytest.raises(DomainError):
        asy.mu_series(0.0, 3.0, d)
    with pytest.raises(InvalidArgument):
        asy.mu(0.0, 0.1, d, method="bogus")


def test_mu_is_limit_of_finite_t():
    # -log <e^{lam N}> / sqrt(t) converges to mu at rate 1/sqrt(t)
    d = DensityPair(0.5, 0.5)
    from septracer.kernel import gf_height
    t = 1600.0
    val = -math.log(gf_height(0, t, 0.4, d).real) / math.sqrt(t)
    assert val == pytest.approx(asy.mu(0.0, 0.4, d).value, abs=5e-3)


def xi0_oracle(rm, rp):
    f = lambda x: 2 * x * rm - (rp - rm) * mp.quad(mp.erfc, [x, mp.inf])
    return float(mp.findroot(f, 0.2))


def test_xi0():
    d = DensityPair(0.3, 0.7)
    x0 = asy.xi0_solve(d)
    assert x0 == pytest.approx(xi0_oracle(0.3, 0.7), abs=1e-12)
    assert x0 == pytest.approx(0.23837975431571118, abs=1e-12)
    assert asy.xi0_solve(DensityPair(0.4, 0.4)) == 0.0
    assert abs(asy.phi_rate(x0, d)) < 1e-6


def test_phi_nonnegative_and_minimum():
    d = DensityPair(0.3, 0.7)
    x0 = asy.xi0_solve(d)
    for xi in (-1.0, 0.0, x0 - 0.1, x0 + 0.1, 1.0):
        assert asy.phi_rate(xi, d) > 0


def test_phi_linear_growth():
    # slopes -2 log(1 - rho-) for xi -> +inf and -2 log(1 - rho+) for xi -> -inf
    d = DensityPair(0.3, 0.7)
    assert asy.phi_rate(8.0, d) - asy.phi_rate(6.0, d) == pytest.approx(-4 * math.log(0.7), rel=1e-3)
    assert asy.phi_rate(-6.0, d) - asy.phi_rate(-4.0, d) == pytest.approx(-4 * math.log(0.3), rel=1e-3)


def test_phi_requires_interior_densities():
    with pytest.raises(DomainError):
        asy.Phi(0.0, 0.0, DensityPair(0.0, 0.5))


def test_fluctuation_symmetry():
    d = DensityPair(0.7, 0.3)
    for xi in np.linspace(-1, 1, 11):
        assert abs(asy.fluctuation_residual(float(xi), d)) < 1e-10


def test_C_of_s():
    d = DensityPair(0.3, 0.7)
    assert abs(asy.C_of_s(0.0, d).value) < 1e-8
    lo, hi = asy.admissible_s_range(d)
    assert lo == pytest.approx(math.log(0.7)) and hi == pytest.approx(-math.log(0.3))
    with pytest.raises(DomainError):
        asy.C_of_s(-0.5, d)
    # C'(0) = 2 xi0 gives the mean -xi0
    c = [asy.C_of_s(s, d).value for s in (-0.01, 0.01)]
    assert -(c[1] - c[0]) / 0.02 / 2 == pytest.approx(-asy.xi0_solve(d), abs=1e-4)


def test_equilibrium_tracer_cumulants():
    d = DensityPair(0.5, 0.5)
    assert asy.tracer_cumulant(2, d) == pytest.approx(1 / SQ, rel=1e-6)
    p = 0.5
    fourth = (1 - p) / (SQ * p ** 3) * (1 - (4 - (8 - 3 * math.sqrt(2)) * p) * (1 - p)
                                        + 12 / math.pi * (1 - p) ** 2)
    assert asy.equilibrium_fourth_cumulant(0.5) == pytest.approx(fourth, rel=1e-14)
    assert asy.tracer_cumulant(4, d) == pytest.approx(fourth, rel=1e-5)


def test_variance_other_density():
    d = DensityPair(0.3, 0.3)
    assert asy.tracer_cumulant(2, d) == pytest.approx(asy.equilibrium_variance(0.3), rel=1e-5)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_limiting_cumulants_of_height(n):
    d = DensityPair(0.7, 0.3)
    t, x = 1600.0, 24
    xi = -x / math.sqrt(4 * t)
    finite = cumulant_N_finite(x, t, d, n) / math.sqrt(t)
    assert finite == pytest.approx(asy.limiting_cumulant_N(n, xi, d), abs=0.05 * max(1, n))


def test_mean_height_is_hydrodynamic():
    d = DensityPair(0.7, 0.3)
    for xi in (-0.6, -0.1, 0.3):
        assert asy.limiting_cumulant_N(1, xi, d) == pytest.approx(asy.hydrodynamic_height(xi, d), abs=1e-14)


def test_hydrodynamic_density_limits():
    d = DensityPair(0.8, 0.1)
    assert asy.hydrodynamic_density(-20.0, d) == pytest.approx(0.8)
    assert asy.hydrodynamic_density(20.0, d) == pytest.approx(0.1)


def test_iasym():
    r = asy.iasym_check(1, -0.5, [100.0, 400.0, 1600.0])
    devs = [abs(v - 1) for v in r.ratios]
    assert devs[0] > devs[1] > devs[2] and devs[2] < 0.01
    i0 = trace_power_In(kernel_spec(0, 1600.0), 1) / 40.0
    assert i0 == pytest.approx(1 / SQ, rel=0.002)
    with pytest.raises(InvalidArgument):
        asy.iasym_check(1, 0.5, [100.0])


def test_Phi_convex_in_q_and_C_concave():
    d = DensityPair(0.3, 0.7)
    phi = [asy.Phi(0.2, q, d).value for q in np.linspace(-0.2, 0.2, 5)]
    assert np.all(np.diff(phi, 2) > 0)
    # C is an infimum of affine functions of s
    c = [asy.C_of_s(s, d).value for s in np.linspace(-0.3, 0.3, 5)]
    assert np.all(np.diff(c, 2) < 0)
