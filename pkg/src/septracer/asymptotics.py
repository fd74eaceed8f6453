"""Long-time asymptotics: error-function integrals, the scaled cumulant
generating function of the height, rate functions and tracer cumulants.

Conventions
-----------
``xi = -x / sqrt(4 t)`` is the scaled position.  The height obeys
``<exp(lam N(x, t))> ~ exp(-sqrt(t) mu(xi, lam))`` and the tracer
``<exp(s X_0(t))> ~ exp(-sqrt(t) C(s))``.

The series for ``mu`` converges for ``|omega| < 1`` only.  For larger
``|omega|`` the same function is obtained from the resummed form

    sum_n (-w)**n / n * Xi_n(eta) = -(1/pi) int_0^1 F(w exp(-eta**2/u**2)) du,
    F(a) = int_R log(1 + a exp(-k**2)) dk,

which is analytic for ``w > -1`` and is evaluated by Gauss-Legendre in ``u``
and the trapezoid rule in ``k``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import erf, erfc, erfcx

from .errors import DomainError, InvalidArgument
from .kernel import DensityPair, gf_height, kernel_spec, omega_of_lambda, trace_power_In
from .numdiff import derivative
from .series import alpha

SQRT_PI = math.sqrt(math.pi)
SERIES_RADIUS = 0.5
_GL_U = np.polynomial.legendre.leggauss(80)
_U = 0.5 * (_GL_U[0] + 1.0)
_WU = 0.5 * _GL_U[1]


def A_func(xi):
    """``exp(-xi**2)/sqrt(pi) + xi*erf(xi)``, an even function."""
    xi = np.asarray(xi, dtype=float)
    out = Xi_func(np.abs(xi)) + np.abs(xi)
    return out[()] if out.ndim == 0 else out


def Xi_func(xi):
    """``int_xi^inf erfc(u) du``.

    Evaluated as ``exp(-xi**2) (1/sqrt(pi) - xi*erfcx(xi))`` for ``xi >= 0`` and
    through ``Xi(xi) = Xi(-xi) - 2 xi`` otherwise, avoiding cancellation.
    """
    xi = np.asarray(xi, dtype=float)
    a = np.abs(xi)
    # exp(-a^2) (1/sqrt(pi) - a erfcx(a)); the bracket cancels like 1/(2a^2)
    with np.errstate(divide="ignore", invalid="ignore"):
        br = 1.0 / SQRT_PI - a * erfcx(a)
        u = 1.0 / (2.0 * a * a)
        tail = u * (1.0 - u * (3.0 - u * (15.0 - u * (105.0 - u * 945.0)))) / SQRT_PI
    pos = np.exp(-a * a) * np.where(a > 100.0, tail, br)
    out = np.where(xi >= 0, pos, pos + 2.0 * a)
    return out[()] if out.ndim == 0 else out


def Xi_n(n: int, xi):
    """``Xi(sqrt(n) xi) / sqrt(n)``."""
    if n < 1:
        raise InvalidArgument("n must be >= 1")
    r = math.sqrt(n)
    return Xi_func(r * np.asarray(xi, dtype=float)) / r


def _log_gauss_integral(a: np.ndarray, w: float) -> np.ndarray:
    """``int_R log(1 + a exp(-k**2)) dk`` for ``a`` between 0 and ``w``."""
    if w > 0:
        dist = abs(np.sqrt(complex(math.log(w), math.pi)).imag)
    else:
        dist = math.sqrt(-math.log(-w))
    h = min(0.1, dist / 6.0)
    kmax = math.sqrt(max(math.log(abs(w)), 0.0) + 42.0)
    k = np.arange(0.0, kmax + h, h)
    wt = np.full(k.shape, 2.0 * h)
    wt[0] = h
    return np.log1p(np.multiply.outer(a, np.exp(-k * k))) @ wt


def resummed_log_series(eta: float, w: float) -> float:
    """``sum_n (-w)**n / n * Xi_n(eta)`` for ``eta >= 0`` and ``w > -1``."""
    if w <= -1:
        raise DomainError("resummation needs omega > -1")
    if w == 0:
        return 0.0
    a = w * np.exp(-(eta * eta) / (_U * _U))
    return float(-np.dot(_WU, _log_gauss_integral(a, w)) / math.pi)


@dataclass(frozen=True)
class MuResult:
    value: float
    method: str
    terms: int = 0
    low_confidence: bool = False


def _drift(xi: float, lam: float, d: DensityPair) -> float:
    return xi * (math.log1p(d.rho_plus * math.expm1(lam)) - math.log1p(d.rho_minus * math.expm1(-lam)))


def mu_series(xi: float, lam: float, d: DensityPair, tol: float = 1e-16,
              max_terms: int = 200000) -> MuResult:
    """Direct sum ``sum_n (-w)**n n**-1.5 A(sqrt(n) xi)`` plus drift, ``|w| < 0.999``."""
    w = float(omega_of_lambda(lam, d))
    if abs(w) >= 0.999:
        raise DomainError(f"series needs |omega| < 0.999, got {w:.4f}")
    total = 0.0
    aw = abs(w)
    bound = 1.0 / SQRT_PI + abs(xi)
    n = 0
    for n in range(1, max_terms + 1):
        total += (-w) ** n / n ** 1.5 * float(A_func(math.sqrt(n) * xi))
        if aw == 0 or bound * aw ** (n + 1) / (1.0 - aw) < tol:
            break
    return MuResult(total + _drift(xi, lam, d), "series", n)


def mu_integral(xi: float, lam: float, d: DensityPair) -> MuResult:
    """Resummed evaluation, valid for every real ``lam``."""
    w = float(omega_of_lambda(lam, d))
    eta = abs(xi)
    val = resummed_log_series(eta, w) - eta * math.log1p(w) + _drift(xi, lam, d)
    return MuResult(val, "integral")


def mu_extrapolation(xi: float, lam: float, d: DensityPair,
                     t_values: Sequence[float] = (400.0, 1600.0, 6400.0)) -> MuResult:
    """``-log <exp(lam N)> / sqrt(t)`` at finite ``t``, extrapolated in ``1/sqrt(t)``."""
    s = []
    y = []
    for t in t_values:
        x = int(round(-2.0 * xi * math.sqrt(t)))
        g = gf_height(x, t, lam, d).real
        if not g > 0:
            raise DomainError("generating function not positive")
        s.append(1.0 / math.sqrt(t))
        y.append(-math.log(g) / math.sqrt(t))
    coef = np.polyfit(s, y, len(s) - 1)
    diffs = np.diff(y)
    mono = bool(np.all(diffs >= 0) or np.all(diffs <= 0))
    return MuResult(float(coef[-1]), "extrapolation", len(s), not mono)


def mu(xi: float, lam: float, d: DensityPair, tol: float = 1e-16,
       method: str = "auto") -> MuResult:
    """Scaled cumulant generating function of the height.

    Parameters
    ----------
    method : {"auto", "series", "integral", "extrapolation"}
        ``auto`` sums the series for ``|omega| < 0.5`` and uses the resummed
        integral otherwise.
    """
    if lam == 0:
        return MuResult(0.0, "exact")
    if method == "auto":
        w = float(omega_of_lambda(lam, d))
        method = "series" if abs(w) < SERIES_RADIUS else "integral"
    if method == "series":
        return mu_series(xi, lam, d, tol)
    if method == "integral":
        return mu_integral(xi, lam, d)
    if method == "extrapolation":
        return mu_extrapolation(xi, lam, d)
    raise InvalidArgument(f"unknown method {method!r}")


def mu_value(xi: float, lam: float, d: DensityPair) -> float:
    return mu(xi, lam, d).value


@dataclass(frozen=True)
class LegendreResult:
    value: float
    argmax: float


def Phi(xi: float, q_height: float, d: DensityPair, window: float = 8.0,
        max_window: float = 60.0, xatol: float = 1e-10) -> LegendreResult:
    """``max_lam (mu(xi, lam) + lam q)`` by bounded Brent search.

    The window ``[-window, window]`` is doubled while the maximiser sits on
    its edge.
    """
    if d.rho_minus in (0.0, 1.0) or d.rho_plus in (0.0, 1.0):
        raise DomainError("rate functions need densities strictly inside (0, 1)")
    W = window
    while True:
        res = minimize_scalar(lambda l: -(mu_value(xi, l, d) + l * q_height),
                              bounds=(-W, W), method="bounded",
                              options={"xatol": xatol, "maxiter": 500})
        if abs(res.x) < W * (1.0 - 1e-6):
            return LegendreResult(float(-res.fun), float(res.x))
        W *= 2.0
        if W > max_window:
            raise DomainError(f"maximiser escapes |lambda| <= {max_window} at xi={xi}, q={q_height}")


def phi_rate(xi: float, d: DensityPair) -> float:
    """Tracer rate function ``phi(xi) = Phi(xi, 0)``."""
    if d.rho_minus == d.rho_plus and xi == 0:
        return 0.0
    return Phi(xi, 0.0, d).value


def xi0_solve(d: DensityPair, tol: float = 1e-12) -> float:
    """Root of ``2 xi rho- = (rho+ - rho-) Xi(xi)``."""
    if d.rho_minus == 0 and d.rho_plus == 0:
        raise DomainError("no particles")
    if d.rho_minus == d.rho_plus:
        return 0.0

    def g(x):
        return 2.0 * x * d.rho_minus - (d.rho_plus - d.rho_minus) * float(Xi_func(x))

    lo, hi = -1.0, 1.0
    for _ in range(60):
        if g(lo) * g(hi) <= 0:
            return float(brentq(g, lo, hi, xtol=tol, rtol=1e-15))
        lo, hi = 2 * lo, 2 * hi
    raise DomainError("no sign change found for xi0")


def admissible_s_range(d: DensityPair) -> tuple[float, float]:
    """Open interval of ``s`` on which ``C(s)`` is finite.

    ``phi`` grows linearly, with slope ``-2 log(1 - rho-)`` as ``xi -> +inf``
    and ``-2 log(1 - rho+)`` as ``xi -> -inf``, so ``2 s xi + phi`` is bounded
    below only between the two slopes.
    """
    return math.log1p(-d.rho_minus), -math.log1p(-d.rho_plus)


def C_of_s(s: float, d: DensityPair, window: float = 1.0, xatol: float = 1e-10) -> LegendreResult:
    """``inf_xi (2 s xi + phi(xi))`` with minimiser.

    Searches ``xi0 +- window`` and widens while the minimiser is on the edge.

    Raises
    ------
    DomainError
        If ``s`` lies outside :func:`admissible_s_range` or the minimiser
        escapes ``|xi - xi0| <= 8``.
    """
    lo_s, hi_s = admissible_s_range(d)
    if not lo_s < s < hi_s:
        raise DomainError(f"C(s) = -inf for s={s}: admissible range is ({lo_s:.6g}, {hi_s:.6g})")
    x0 = xi0_solve(d)
    W = window
    while True:
        lo, hi = x0 - W, x0 + W
        res = minimize_scalar(lambda x: 2.0 * s * x + phi_rate(x, d), bounds=(lo, hi),
                              method="bounded", options={"xatol": xatol, "maxiter": 500})
        edge = min(res.x - lo, hi - res.x)
        if edge > 1e-6 * W:
            return LegendreResult(float(res.fun), float(res.x))
        W *= 2.0
        if W > 8.0:
            raise DomainError(f"C(s) unbounded or out of range at s={s}")


def tracer_cumulant(n: int, d: DensityPair, h: float = 0.1, levels: int = 3) -> float:
    """Limit of ``<X_0(t)**n>_c / sqrt(4 t)``, i.e. ``-C^(n)(0) / 2``."""
    if n < 1:
        raise InvalidArgument("n >= 1")
    return -0.5 * derivative(lambda s: C_of_s(s, d).value, 0.0, n, h, levels)


def equilibrium_variance(rho: float) -> float:
    """Closed form ``(1 - rho) / (rho sqrt(pi))`` of the scaled tracer variance."""
    return (1.0 - rho) / (rho * SQRT_PI)


def equilibrium_fourth_cumulant(rho: float) -> float:
    """Closed-form scaled fourth tracer cumulant at equilibrium."""
    p = rho
    br = 1.0 - (4.0 - (8.0 - 3.0 * math.sqrt(2.0)) * p) * (1.0 - p) + 12.0 / math.pi * (1.0 - p) ** 2
    return (1.0 - p) / (SQRT_PI * p ** 3) * br


def limiting_cumulant_N(n: int, xi: float, d: DensityPair) -> float:
    """``lim <N(x,t)**n>_c / sqrt(t)`` at fixed ``xi = -x/sqrt(4t)``.

    ``sum_l (-1)**(l-1) (l-1)! (alpha_{n,l}(r+, r-) Xi_l(-xi) - 2 alpha_{n,l}(1,0) xi rho+**l)``.
    """
    if not 1 <= n <= 8:
        raise InvalidArgument("1 <= n <= 8")
    total = 0.0
    for l in range(1, n + 1):
        sgn = (-1) ** (l - 1) * math.factorial(l - 1)
        total += sgn * (float(alpha(n, l, d.r_plus, d.r_minus)) * float(Xi_n(l, -xi))
                        - 2.0 * float(alpha(n, l, 1, 0)) * xi * d.rho_plus ** l)
    return total


def hydrodynamic_density(y, d: DensityPair):
    """Scaled density profile ``rho- + (rho+ - rho-) erfc(-y)/2`` at ``y = x/sqrt(4t)``."""
    return d.rho_minus + 0.5 * (d.rho_plus - d.rho_minus) * erfc(-np.asarray(y))


def hydrodynamic_height(xi: float, d: DensityPair) -> float:
    """Typical value of ``N(x, t)/sqrt(t)``, from particle conservation of the profile."""
    return (d.rho_plus - d.rho_minus) * float(Xi_func(-xi)) - 2.0 * xi * d.rho_plus


def fluctuation_residual(xi: float, d: DensityPair) -> float:
    """``phi(xi) - phi(-xi) - 2 xi log((1 - rho+)/(1 - rho-))``."""
    return phi_rate(xi, d) - phi_rate(-xi, d) - 2.0 * xi * math.log((1.0 - d.rho_plus) / (1.0 - d.rho_minus))


@dataclass(frozen=True)
class IasymReport:
    n: int
    xi: float
    t_values: tuple
    x_values: tuple
    ratios: tuple


def iasym_check(n: int, xi: float, t_values: Sequence[float]) -> IasymReport:
    """Ratios ``I_n(x, t) / (sqrt(t) Xi_n(-xi))`` with ``x = round(-2 xi sqrt(t))``."""
    if not 1 <= n <= 3:
        raise InvalidArgument("1 <= n <= 3")
    if xi > 0:
        raise InvalidArgument("xi <= 0 (x >= 0)")
    xs, rs = [], []
    for t in t_values:
        x = int(round(-2.0 * xi * math.sqrt(t)))
        val = trace_power_In(kernel_spec(x, t), n)
        xs.append(x)
        rs.append(val / (math.sqrt(t) * float(Xi_n(n, -xi))))
    return IasymReport(n, xi, tuple(t_values), tuple(xs), tuple(rs))


__all__ = ["admissible_s_range", "A_func", "Xi_func", "Xi_n", "MuResult", "mu", "mu_value", "mu_series",
           "mu_integral", "mu_extrapolation", "resummed_log_series", "LegendreResult",
           "Phi", "phi_rate", "xi0_solve", "C_of_s", "tracer_cumulant",
           "equilibrium_variance", "equilibrium_fourth_cumulant", "limiting_cumulant_N",
           "hydrodynamic_density", "hydrodynamic_height", "fluctuation_residual",
           "IasymReport", "iasym_check"]
