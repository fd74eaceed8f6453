"""tau-moments of the ASEP height at orders one and two.

Rates: ``p`` to the right, ``q`` to the left, ``tau = p/q < 1``.  The
observable is ``tau**N(x, t)`` with the same height ``N`` as for the SEP.
Contour integrals run counterclockwise around ``z = -1`` on a circle that
keeps ``-tau``, ``theta-`` and the ``theta+``-type poles outside.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ive

from .contour import make_contour
from .errors import DomainError, InvalidArgument, PoleProximityError
from .kernel import DensityPair
from .series import moment_N


@dataclass(frozen=True)
class AsepParams:
    """Hop rates and step densities; ``0 < p < q`` and ``rho+- < 1``."""

    p: float
    q: float
    d: DensityPair

    def __post_init__(self):
        if not (self.q > 0 and 0 < self.p < self.q):
            raise InvalidArgument("need 0 < p < q (tau in (0, 1))")
        if self.d.rho_minus >= 1 or self.d.rho_plus >= 1:
            raise InvalidArgument("densities must be < 1")
        if self.d.rho_plus <= 0:
            raise InvalidArgument("rho_plus must be > 0")

    @property
    def tau(self) -> float:
        return self.p / self.q

    @property
    def c1(self) -> float:
        return 1.0 - self.d.r_minus / (self.tau * self.d.r_plus)

    @property
    def c2(self) -> float:
        return 1.0 - self.d.r_minus / (self.tau ** 2 * self.d.r_plus)


def symmetric_params(eps: float, d: DensityPair) -> AsepParams:
    """``q = 1``, ``p = 1 - eps`` so that ``eps -> 0`` gives the SEP with unit rates."""
    return AsepParams(1.0 - eps, 1.0, d)


def gamma_z(z, a: AsepParams):
    """ASEP dispersion ``-q (1 - tau)**2 z / ((1 + z)(tau + z))``."""
    z = np.asarray(z, dtype=complex)
    tau = a.tau
    if np.any(np.abs(1.0 + z) < 1e-14) or np.any(np.abs(tau + z) < 1e-14):
        raise PoleProximityError("gamma has poles at -1 and -tau")
    out = -a.q * (1.0 - tau) ** 2 * z / ((1.0 + z) * (tau + z))
    return out[()] if out.ndim == 0 else out


def gamma_z_alt(z, a: AsepParams):
    """Equivalent form ``p(1+z/tau)/(1+z) + q(1+z)/(1+z/tau) - (p+q)``."""
    z = np.asarray(z, dtype=complex)
    tau = a.tau
    out = a.p * (1 + z / tau) / (1 + z) + a.q * (1 + z) / (1 + z / tau) - (a.p + a.q)
    return out[()] if out.ndim == 0 else out


def Lambda(i: int, x: int, t: float, a: AsepParams) -> float:
    """``Lambda_i(x)``: ``x log((1+tau^i th)/(1+tau^(i-1) th)) + gamma(tau^i th) t``."""
    th = a.d.theta_plus
    tau = a.tau
    z = tau ** i * th
    return x * math.log((1.0 + z) / (1.0 + tau ** (i - 1) * th)) + float(gamma_z(z, a).real) * t


def contour_radius(a: AsepParams) -> float:
    """Radius of the circle around ``-1``: ``min(1 - tau, |1 + tau theta+|)/4``."""
    tau = a.tau
    r = min(1.0 - tau, abs(1.0 + tau * a.d.theta_plus)) / 4.0
    # remaining poles: theta-, theta+, tau**2 theta+ (all >= 0) and -tau
    far = min(1.0 + a.d.theta_minus, 1.0 + tau ** 2 * a.d.theta_plus, 1.0 - tau)
    if not r < far or r <= 0:
        raise DomainError("contour around -1 cannot separate the poles")
    return r


def _g(x: int, z, t: float, a: AsepParams):
    return ((1.0 + z) / (1.0 + z / a.tau)) ** x * np.exp(gamma_z(z, a) * t)


def _F(x: int, z, t: float, a: AsepParams):
    tau = a.tau
    return _g(x, z, t, a) / ((1.0 - z / (tau * a.d.theta_plus)) * (z - a.d.theta_minus))


def _circle_sum(fun, a: AsepParams, dim: int = 1, n0: int = 64, tol: float = 1e-13,
                cap: int = 2048) -> complex:
    r = contour_radius(a)
    n = n0
    prev = None
    while n <= cap:
        c = make_contour(r, n, -1.0)
        if dim == 1:
            val = complex(np.sum(c.weights * fun(c.nodes)))
        else:
            z1 = c.nodes[:, None]
            z2 = c.nodes[None, :]
            val = complex(np.sum(c.weights[:, None] * c.weights[None, :] * fun(z1, z2)))
        if prev is not None and abs(val - prev) <= tol * max(1.0, abs(val)):
            return val
        prev = val
        n *= 2
    raise DomainError("contour integral around -1 did not converge")


def _real(val: complex) -> float:
    if abs(val.imag) > 1e-9 * max(1.0, abs(val.real)):
        raise DomainError(f"tau-moment has imaginary part {val.imag:.2e}")
    return float(val.real)


def tau_moment1(x: int, t: float, a: AsepParams) -> float:
    """``<tau**N(x, t)>``."""
    integral = _circle_sum(lambda z: _F(x, z, t, a), a)
    return _real(math.exp(Lambda(1, x, t, a)) - a.c1 * integral)


def tau_correlation2(x1: int, x2: int, t: float, a: AsepParams) -> float:
    """``<tau**(N(x1, t) + N(x2, t))>`` for any pair of sites."""
    if x1 > x2:
        x1, x2 = x2, x1
    tau = a.tau
    th, tm = a.d.theta_plus, a.d.theta_minus
    L1x1 = Lambda(1, x1, t, a)
    L1x2 = Lambda(1, x2, t, a)
    term_a = math.exp(L1x2 + Lambda(2, x1, t, a))
    i1 = _circle_sum(lambda z: _g(x1, z, t, a) / ((1.0 - z / (tau ** 2 * th)) * (z - tm)), a)
    i2 = _circle_sum(lambda z: _g(x2, z, t, a) / ((1.0 - z / th) * (z - tm)), a)
    term_b = -a.c2 * (math.exp(L1x2) * i1 + tau * math.exp(L1x1) * i2)
    i3 = _circle_sum(lambda z1, z2: (z1 - z2) / (z1 - tau * z2) * _F(x1, z1, t, a) * _F(x2, z2, t, a),
                     a, dim=2)
    term_c = a.c1 * a.c2 * tau * i3
    return _real(term_a + term_b + term_c)


def tau_moment(n: int, x: int, t: float, a: AsepParams) -> float:
    """``<tau**(n N(x, t))>`` for ``n`` in {1, 2}."""
    if n == 1:
        return tau_moment1(x, t, a)
    if n == 2:
        return tau_correlation2(x, x, t, a)
    raise InvalidArgument("only n = 1, 2 are implemented")


def initial_tau_correlation(xs: Sequence[int], a: AsepParams) -> float:
    """``<tau**sum_i N(x_i, 0)>`` under the product Bernoulli measure.

    Sites ``1..x`` contribute ``+eta`` to ``N(x, 0)`` for ``x > 0``; sites
    ``x+1..0`` contribute ``-eta`` for ``x < 0``.
    """
    tau = a.tau
    lo = min(min(xs), 0)
    hi = max(max(xs), 0)
    out = 1.0
    for y in range(lo + 1, hi + 1):
        c = 0
        for x in xs:
            if x > 0 and 1 <= y <= x:
                c += 1
            elif x < 0 and x + 1 <= y <= 0:
                c -= 1
        rho = a.d.rho_plus if y >= 1 else a.d.rho_minus
        out *= 1.0 - rho + rho * tau ** c
    return out


def tau_moment1_walk(x: int, t: float, a: AsepParams, kmax: int | None = None) -> float:
    """Independent evaluation of ``<tau**N(x, t)>`` through single-particle duality.

    ``phi(x, t) = E phi(x + W_t, 0)`` where ``W`` jumps ``+1`` at rate ``q`` and
    ``-1`` at rate ``p``.
    """
    p, q = a.p, a.q
    s = 2.0 * t * math.sqrt(p * q)
    kmax = kmax or int(20 + 10 * math.sqrt(max(s, 1.0)) + (q - p) * t * 2)
    k = np.arange(-kmax, kmax + 1)
    if t == 0:
        return initial_tau_correlation([x], a)
    logp = -(p + q) * t + s + 0.5 * k * math.log(q / p)
    w = np.exp(logp) * ive(np.abs(k), s)
    vals = np.array([initial_tau_correlation([x + int(kk)], a) for kk in k])
    return float(np.sum(w * vals))


def evolution_coefficients(n: int, a: AsepParams) -> tuple[float, float, float, float]:
    """``(a_n, b_n, c_n, d_n)`` of the closed evolution equation for ``<tau**(n N)>``."""
    tau, p, q = a.tau, a.p, a.q
    pre = (1.0 - tau ** -n) / (1.0 - tau) ** 2
    return (q * pre * (-tau ** 3 + tau ** n), p * pre * (tau ** 2 - tau ** n),
            q * pre * (tau ** 2 - tau ** n), p * pre * (-tau + tau ** n))


def evolution_residual(n: int, x: int, t: float, a: AsepParams, h: float = 1e-4) -> float:
    """``|d/dt <tau**(nN(x))> - rhs|`` with a central difference of step ``h``.

    The right-hand side is assembled from :func:`tau_correlation2` and
    :func:`tau_moment1`; the residual is ``O(h**2)``.
    """
    ca, cb, cc, cd = evolution_coefficients(n, a)
    if n == 1:
        lhs = (tau_moment1(x, t + h, a) - tau_moment1(x, t - h, a)) / (2 * h)
        rhs = ca * tau_moment1(x, t, a) + cb * tau_moment1(x - 1, t, a) + cc * tau_moment1(x + 1, t, a)
    elif n == 2:
        lhs = (tau_correlation2(x, x, t + h, a) - tau_correlation2(x, x, t - h, a)) / (2 * h)
        rhs = (ca * tau_correlation2(x, x, t, a) + cb * tau_correlation2(x, x - 1, t, a)
               + cc * tau_correlation2(x, x + 1, t, a) + cd * tau_correlation2(x - 1, x + 1, t, a))
    else:
        raise InvalidArgument("n in {1, 2}")
    return abs(lhs - rhs)


@dataclass(frozen=True)
class SymmetricLimitReport:
    n: int
    x: int
    t: float
    eps: tuple
    scaled: tuple
    extrapolated: float
    sep_value: float

    @property
    def rel_error(self) -> float:
        return abs(self.extrapolated - self.sep_value) / max(abs(self.sep_value), 1e-300)


def scaled_tau_moment(n: int, x: int, t: float, d: DensityPair, eps: float) -> float:
    """``<(1 - tau**N)**n> / eps**n`` with ``tau = 1 - eps``."""
    a = symmetric_params(eps, d)
    if n == 1:
        val = 1.0 - tau_moment1(x, t, a)
    elif n == 2:
        val = 1.0 - 2.0 * tau_moment1(x, t, a) + tau_correlation2(x, x, t, a)
    else:
        raise InvalidArgument("n in {1, 2}")
    return val / eps ** n


def symmetric_limit_check(n: int, x: int, t: float, d: DensityPair,
                          eps_list: Sequence[float] = (0.2, 0.1, 0.05)) -> SymmetricLimitReport:
    """Compare the ``eps -> 0`` limit of scaled tau-moments with the SEP moment.

    The last two points are extrapolated linearly in ``eps``.
    """
    if n not in (1, 2):
        raise InvalidArgument("n in {1, 2}")
    if any(not (0 < e <= 0.3) for e in eps_list) or len(eps_list) < 2:
        raise InvalidArgument("need at least two eps values in (0, 0.3]")
    eps = tuple(sorted(eps_list, reverse=True))
    vals = tuple(scaled_tau_moment(n, x, t, d, e) for e in eps)
    e1, e2 = eps[-2], eps[-1]
    v1, v2 = vals[-2], vals[-1]
    extrap = v2 + (v2 - v1) * (0.0 - e2) / (e2 - e1)
    return SymmetricLimitReport(n, x, t, eps, vals, extrap, moment_N(x, t, d, n))
