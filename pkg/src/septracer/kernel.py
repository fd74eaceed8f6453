"""Fredholm determinant generating function of the SEP height N(x, t).

The kernel ``K(xi1, xi2) = xi1**|x| exp(t*eps(xi1)) / (xi1*xi2 + 1 - 2*xi2)``
with ``eps(xi) = xi + 1/xi - 2`` acts on a small circle around the origin.
Two discretisations of the same operator are provided:

``"contour"``
    Nystrom matrix ``D[j, k] = w_k K(xi_j, xi_k)`` on the circle.  Exact in
    exact arithmetic but the integrand reaches ``exp(t*(r + 1/r - 2))`` on
    the circle, so relative accuracy degrades for large ``t``.
``"bessel"``
    Expanding the geometric series of the denominator and integrating the
    circle variables by residues gives the equivalent real symmetric
    operator ``k(s, s') = exp(-s-s') I_|x|(2 sqrt(s s'))`` on ``L^2[0, t]``
    with the same nonzero spectrum.  It is discretised with Gauss-Legendre
    nodes in ``v = sqrt(s)`` and stays well conditioned for any ``t``.

``method="auto"`` uses the circle for ``t*(r + 1/r - 2) <= 6`` and the real
operator otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import ive

from .contour import Contour, make_contour
from .errors import (ConsistencyError, EvaluationError, InvalidArgument,
                     PoleProximityError)

DEFAULT_RADIUS = 0.25
DEFAULT_NODES = 64
AUTO_EXPONENT = 6.0
IMAG_TOL = 1e-9


@dataclass(frozen=True)
class DensityPair:
    """Left and right Bernoulli densities of the step initial condition."""

    rho_minus: float
    rho_plus: float

    def __post_init__(self):
        for name in ("rho_minus", "rho_plus"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise InvalidArgument(f"{name} must lie in [0, 1], got {v!r}")

    @property
    def theta_minus(self) -> float:
        return math.inf if self.rho_minus == 1.0 else self.rho_minus / (1.0 - self.rho_minus)

    @property
    def theta_plus(self) -> float:
        return math.inf if self.rho_plus == 1.0 else self.rho_plus / (1.0 - self.rho_plus)

    @property
    def r_plus(self) -> float:
        return self.rho_plus * (1.0 - self.rho_minus)

    @property
    def r_minus(self) -> float:
        return self.rho_minus * (1.0 - self.rho_plus)

    def swapped(self) -> "DensityPair":
        """Mirror image under x -> -x."""
        return DensityPair(self.rho_plus, self.rho_minus)

    def holes(self) -> "DensityPair":
        """Particle-hole conjugate."""
        return DensityPair(1.0 - self.rho_minus, 1.0 - self.rho_plus)


def check_radius(radius: float) -> None:
    """Raise if a circle of this radius can reach the kernel pole.

    The denominator vanishes at ``xi2 = 1/(2 - xi1)``, whose modulus is at
    least ``1/(2 + radius)`` when ``|xi1| = radius``.
    """
    if not radius < 1.0 / (2.0 + radius):
        raise PoleProximityError(
            f"contour radius {radius} reaches the kernel pole; need radius < {math.sqrt(2) - 1:.4f}")


@dataclass(frozen=True)
class KernelSpec:
    """Lattice site ``x``, time ``t`` and the circle carrying the kernel."""

    x: int
    t: float
    contour: Contour = field(default_factory=lambda: make_contour(DEFAULT_RADIUS, DEFAULT_NODES))

    def __post_init__(self):
        if self.t < 0 or not np.isfinite(self.t):
            raise InvalidArgument(f"t must be finite and >= 0, got {self.t!r}")
        if int(self.x) != self.x:
            raise InvalidArgument("x must be an integer")
        check_radius(self.contour.radius)

    @property
    def ax(self) -> int:
        return abs(int(self.x))


def kernel_spec(x: int, t: float, radius: float = DEFAULT_RADIUS,
                n_nodes: int = DEFAULT_NODES) -> KernelSpec:
    return KernelSpec(int(x), float(t), make_contour(radius, n_nodes))


def eps(xi):
    """SEP dispersion ``xi + 1/xi - 2``."""
    return xi + 1.0 / xi - 2.0


def kernel_K(x: int, t: float, xi1, xi2):
    """Evaluate the kernel at (arrays of) points ``xi1, xi2``.

    Raises
    ------
    PoleProximityError
        If ``|xi1*xi2 + 1 - 2*xi2| < 1e-12``.
    """
    xi1 = np.asarray(xi1, dtype=complex)
    xi2 = np.asarray(xi2, dtype=complex)
    if np.any(xi1 == 0):
        raise EvaluationError("kernel undefined at xi1 = 0")
    den = xi1 * xi2 + 1.0 - 2.0 * xi2
    if np.any(np.abs(den) < 1e-12):
        raise PoleProximityError("kernel denominator vanishes")
    val = xi1 ** abs(int(x)) * np.exp(eps(xi1) * t) / den
    return val[()] if val.ndim == 0 else val


def nystrom_matrix(spec: KernelSpec) -> np.ndarray:
    """Nystrom matrix ``D[j, k] = w_k K(xi_j, xi_k)`` on the circle of ``spec``."""
    z = spec.contour.nodes
    w = spec.contour.weights
    num = z ** spec.ax * np.exp(eps(z) * spec.t)
    den = np.multiply.outer(z, z) + 1.0 - 2.0 * z[None, :]
    return num[:, None] / den * w[None, :]


def bessel_operator(x: int, t: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric discretisation of the real Bessel-kernel operator.

    Returns
    -------
    S : ndarray, shape (n, n)
        Symmetric matrix ``sqrt(W) k sqrt(W)`` whose eigenvalues approximate
        those of the kernel.
    v : ndarray
        Gauss-Legendre nodes in ``v = sqrt(s)``.
    """
    ax = abs(int(x))
    if t == 0:
        return np.zeros((n, n)), np.zeros(n)
    g, a = np.polynomial.legendre.leggauss(n)
    half = 0.5 * math.sqrt(t)
    v = half * (g + 1.0)
    a = half * a
    vv = np.multiply.outer(v, v)
    kern = ive(ax, 2.0 * vv) * np.exp(-np.subtract.outer(v, v) ** 2)
    sw = np.sqrt(2.0 * v * a)
    return sw[:, None] * kern * sw[None, :], v


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of a converged discretisation of the kernel."""

    eigvals: np.ndarray
    method: str
    n_nodes: int
    est_error: float
    converged: bool

    def trace_power(self, n: int) -> complex:
        return complex(np.sum(self.eigvals ** n))

    def det(self, omega) -> np.ndarray:
        """``prod(1 + omega*mu)`` for scalar or array ``omega``."""
        om = np.asarray(omega, dtype=complex)
        out = np.prod(1.0 + np.multiply.outer(om, self.eigvals), axis=-1)
        return out[()] if out.ndim == 0 else out

    def elementary(self, n_max: int, absolute: bool = False) -> np.ndarray:
        """Elementary symmetric polynomials ``e_0..e_n_max`` of the spectrum."""
        mu = np.abs(self.eigvals) if absolute else self.eigvals
        e = np.zeros(n_max + 1, dtype=complex)
        e[0] = 1.0
        for m in mu:
            e[1:] = e[1:] + m * e[:-1]
        return e


def choose_method(t: float, radius: float = DEFAULT_RADIUS) -> str:
    return "contour" if t * (radius + 1.0 / radius - 2.0) <= AUTO_EXPONENT else "bessel"


def _probe(eigs: np.ndarray) -> np.ndarray:
    return np.array([np.sum(eigs), np.sum(eigs ** 2), np.prod(1.0 + eigs)])


@lru_cache(maxsize=256)
def _spectrum_cached(ax: int, t: float, method: str, radius: float, n0: int,
                     tol: float, cap: int) -> Spectrum:
    if t == 0:
        return Spectrum(np.zeros(0, dtype=complex), method, 0, 0.0, True)
    if method == "contour":
        def eigs_at(n):
            m = nystrom_matrix(KernelSpec(ax, t, make_contour(radius, n)))
            return np.linalg.eigvals(m)
        n = n0
    else:
        def eigs_at(n):
            s, _ = bessel_operator(ax, t, n)
            return np.linalg.eigvalsh(s).astype(complex)
        n = max(16, int(5.0 * math.sqrt(t)) + 20)
    eig = eigs_at(n)
    prev = _probe(eig)
    while True:
        n2 = 2 * n
        if n2 > cap:
            return Spectrum(eig, method, n, float("inf"), False)
        eig2 = eigs_at(n2)
        cur = _probe(eig2)
        err = float(np.max(np.abs(cur - prev) / np.maximum(1.0, np.abs(cur))))
        if err < tol:
            return Spectrum(eig2, method, n2, err, True)
        eig, prev, n = eig2, cur, n2


def spectrum(x: int, t: float, method: str = "auto", radius: float = DEFAULT_RADIUS,
             n_nodes: int = 32, tol: float = 1e-12, cap: int = 4096) -> Spectrum:
    """Converged spectrum of ``K_{x,t}`` (nonzero eigenvalues).

    Parameters
    ----------
    method : {"auto", "contour", "bessel"}
    tol : float
        Relative change of ``tr K``, ``tr K^2`` and ``det(1+K)`` between
        successive node doublings at which refinement stops.
    """
    if t < 0:
        raise InvalidArgument("t must be >= 0")
    if method == "auto":
        method = choose_method(t, radius)
    if method not in ("contour", "bessel"):
        raise InvalidArgument(f"unknown method {method!r}")
    check_radius(radius)
    return _spectrum_cached(abs(int(x)), float(t), method, float(radius), int(n_nodes),
                            float(tol), int(cap))


def _real_checked(val: complex, what: str) -> float:
    scale = max(1.0, abs(val.real))
    if abs(val.imag) > IMAG_TOL * scale:
        raise ConsistencyError(f"{what} has imaginary part {val.imag:.3e}; check the contour")
    return float(val.real)


def trace_power_In(spec: KernelSpec, n: int, method: str = "auto") -> float:
    """``I_n(x, t) = tr K^n``.

    Raises
    ------
    ConsistencyError
        If the imaginary part exceeds ``1e-9`` (relative to the value when it
        is larger than one).
    """
    if int(n) != n or n < 1:
        raise InvalidArgument("n must be an integer >= 1")
    sp = spectrum(spec.x, spec.t, method, spec.contour.radius, spec.contour.n_nodes)
    return _real_checked(sp.trace_power(int(n)), f"I_{n}")


def I1_bessel(x: int, t: float) -> float:
    """``I_1(x, t) = int_0^t exp(-2s) I_|x|(2s) ds`` by adaptive quadrature."""
    from scipy.integrate import quad
    if t == 0:
        return 0.0
    val, _ = quad(lambda s: ive(abs(int(x)), 2.0 * s), 0.0, t, limit=400,
                  epsabs=1e-14, epsrel=1e-13)
    return float(val)


def _pair_matrix(z: np.ndarray) -> np.ndarray:
    zi = z[:, None]
    zj = z[None, :]
    return (zi - zj) / (1.0 + zi * zj - 2.0 * zj)


def _jn_sum(ax: int, t: float, c: Contour, n: int) -> complex:
    z = c.nodes
    g = c.weights * z ** ax * np.exp(eps(z) * t) / (1.0 - z) ** 2
    if n == 1:
        return complex(np.sum(g))
    P = _pair_matrix(z)
    if n == 2:
        return complex(g @ P @ g)
    if n == 3:
        # sum_abc g_a g_b g_c P_ab P_ac P_bc
        inner = (P * g[None, :]) @ P.T        # [a, b] = sum_c P_ac g_c P_bc
        return complex(np.sum(g[:, None] * g[None, :] * P * inner))
    # n == 4: sum_abcd g_a g_b g_c g_d P_ab P_ac P_ad P_bc P_bd P_cd
    T = g[None, None, :] * P[:, None, :] * P[None, :, :]   # [a, b, d]
    U = np.einsum("abd,cd->abc", T, P)                    # sum_d T P_cd
    V = np.einsum("abc,abc->ab", T, U)                    # reuse T for c-factors
    return complex(np.sum(g[:, None] * g[None, :] * P * V))


def multi_integral_Jn(spec: KernelSpec, n: int, tol: float = 1e-12,
                      cap: int = 512) -> float:
    """n-fold contour integral ``J_n(x, t)`` for ``n <= 4``.

    Evaluated by tensor-product trapezoid quadrature of the symmetric
    integrand, with the pair factors contracted one axis at a time.  The
    per-axis node count starts at the contour size of ``spec`` and is doubled until
    two values agree to ``tol`` (relative to ``max(1, |J|)``).
    """
    if int(n) != n or n < 0 or n > 4:
        raise InvalidArgument("multi_integral_Jn supports 0 <= n <= 4")
    if n == 0:
        return 1.0
    c = spec.contour
    prev = _jn_sum(spec.ax, spec.t, c, n)
    m = c.n_nodes
    while True:
        m2 = 2 * m
        if m2 > cap:
            raise ConsistencyError(f"J_{n} did not converge with {m} nodes per axis")
        cur = _jn_sum(spec.ax, spec.t, c.refined(m2), n)
        if abs(cur - prev) < tol * max(1.0, abs(cur)):
            return _real_checked(cur, f"J_{n}")
        prev, m = cur, m2


@dataclass(frozen=True)
class DetResult:
    value: complex
    est_error: float
    n_nodes: int
    method: str
    converged: bool


def fredholm_det(spec: KernelSpec, omega, method: str = "auto",
                 tol: float = 1e-10, cap: int = 4096) -> DetResult:
    """``det(1 + omega K_{x,t})``.

    On the circle the determinant of ``I + omega D`` is computed by LU and the
    node count doubled until the relative change is below ``tol``.  With the
    real operator the converged spectrum is reused.
    """
    omega = complex(omega)
    if omega == 0 or spec.t == 0:
        return DetResult(1.0 + 0j, 0.0, 0, "exact", True)
    if method == "auto":
        method = choose_method(spec.t, spec.contour.radius)
    if method == "bessel":
        sp = spectrum(spec.x, spec.t, "bessel", tol=min(tol, 1e-12), cap=cap)
        return DetResult(complex(sp.det(omega)), sp.est_error, sp.n_nodes, "bessel", sp.converged)
    if method != "contour":
        raise InvalidArgument(f"unknown method {method!r}")
    n = spec.contour.n_nodes

    def det_at(n):
        d = nystrom_matrix(KernelSpec(spec.x, spec.t, spec.contour.refined(n)))
        val = np.linalg.det(np.eye(n) + omega * d)
        if not np.isfinite(val):
            raise EvaluationError("LU breakdown in Fredholm determinant")
        return complex(val)

    prev = det_at(n)
    while True:
        n2 = 2 * n
        if n2 > cap:
            return DetResult(prev, float("inf"), n, "contour", False)
        cur = det_at(n2)
        err = abs(cur - prev)
        if err <= tol * max(abs(cur), 1e-300):
            return DetResult(cur, err, n2, "contour", True)
        prev, n = cur, n2


def omega_of_lambda(lam, d: DensityPair):
    """``omega = rho+ (e^l - 1) + rho- (e^-l - 1) + rho+ rho- (e^l - 1)(e^-l - 1)``."""
    lam = np.asarray(lam)
    a = np.expm1(lam)
    b = np.expm1(-lam)
    out = d.rho_plus * a + d.rho_minus * b + d.rho_plus * d.rho_minus * a * b
    return out[()] if out.ndim == 0 else out


def M0(x: int, lam, d: DensityPair):
    """Generating function of the initial height ``N(x, 0)``."""
    lam = np.asarray(lam)
    if x >= 0:
        out = (1.0 + d.rho_plus * np.expm1(lam)) ** x
    else:
        out = (1.0 + d.rho_minus * np.expm1(-lam)) ** (-x)
    return out[()] if np.ndim(out) == 0 else out


def gf_height(x: int, t: float, lam, d: DensityPair, method: str = "auto") -> complex:
    """``<exp(lam N(x, t))>`` for the two-sided Bernoulli initial condition.

    Parameters
    ----------
    x : int
        Lattice site.
    t : float
        Time, ``t >= 0``.
    lam : complex
        Conjugate variable.
    d : DensityPair
    method : {"auto", "contour", "bessel"}

    Returns
    -------
    complex
        Real and positive for real ``lam`` up to rounding.
    """
    res = gf_height_result(x, t, lam, d, method)
    return res[0]


def gf_height_result(x: int, t: float, lam, d: DensityPair,
                     method: str = "auto") -> tuple[complex, DetResult]:
    """Like :func:`gf_height` but also returns determinant diagnostics."""
    lam = complex(lam)
    om = complex(omega_of_lambda(lam, d))
    det = fredholm_det(kernel_spec(x, t), om, method)
    return complex(det.value * M0(int(x), lam, d)), det


def _gf_on_z_circle(x: int, t: float, d: DensityPair, radius: float, m: int) -> tuple[np.ndarray, np.ndarray]:
    theta = 2.0 * np.pi * np.arange(m) / m
    z = radius * np.exp(1j * theta)
    lam = -np.log(z)
    om = omega_of_lambda(lam, d)
    if t == 0:
        det = np.ones(m, dtype=complex)
    elif choose_method(t) == "bessel":
        det = spectrum(x, t, "bessel").det(om)
    else:
        det = np.array([fredholm_det(kernel_spec(x, t), o, "contour").value for o in om])
    return z, det * M0(int(x), lam, d)


@lru_cache(maxsize=64)
def _pmf_table(x: int, t: float, rm: float, rp: float, m: int, radius: float) -> np.ndarray:
    d = DensityPair(rm, rp)
    z, g = _gf_on_z_circle(x, t, d, radius, m)
    # P[N = n] = (1/m) sum_j G(z_j) z_j^n, evaluated for n = -m/2 .. m/2 - 1
    ns = np.arange(-(m // 2), m // 2)
    p = (np.exp(1j * np.outer(ns, 2.0 * np.pi * np.arange(m) / m)) @ g) / m
    p = p * radius ** ns
    return p


def height_pmf_table(x: int, t: float, d: DensityPair, n_max: int = 64,
                     radius: float = 1.0, n_theta: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """``P[N(x, t) = n]`` for ``n = -n_max..n_max``.

    Characteristic-function inversion on the circle ``|z| = radius`` with
    ``n_theta`` equispaced nodes (default ``max(256, 4*n_max)``).

    Returns
    -------
    n : ndarray of int
    p : ndarray of float
    """
    m = n_theta or max(256, 4 * int(n_max))
    p = _pmf_table(int(x), float(t), d.rho_minus, d.rho_plus, int(m), float(radius))
    ns = np.arange(-(m // 2), m // 2)
    sel = np.abs(ns) <= n_max
    vals = p[sel]
    if np.max(np.abs(vals.imag)) > 1e-8:
        raise ConsistencyError("probability mass function has a non-negligible imaginary part")
    re = vals.real
    if re.min() < -1e-8 or re.max() > 1 + 1e-8:
        raise ConsistencyError("probability outside [0, 1] beyond tolerance")
    return ns[sel], np.clip(re, 0.0, 1.0)


def height_pmf(x: int, t: float, d: DensityPair, n: int, n_max: int = 64,
               radius: float = 1.0) -> float:
    """``P[N(x, t) = n]`` by contour inversion of :func:`gf_height`."""
    if abs(n) > n_max:
        raise InvalidArgument(f"|n| must be <= n_max = {n_max}")
    ns, p = height_pmf_table(x, t, d, n_max, radius)
    return float(p[n + n_max])


def _support_bound(x: int, t: float) -> int:
    # |N(x, t)| <= |x| initially; the current through a bond spreads like t^(1/4)
    return int(max(64, abs(x) + 12.0 * (4.0 * t) ** 0.25 + 16))


def tagged_cdf(x: int, t: float, d: DensityPair, radius: float = 0.5,
               n_theta: int = 256, check: bool = True) -> float:
    """``P[X_0(t) <= x]`` for the tracer initially first to the right of the origin.

    Integrates ``G(z)/(1 - z)`` with ``G(z) = <z^(-N(x,t))>`` on ``|z| = radius``.
    The answer is cross-checked against ``sum_{n>=1} P[N(x,t) = n]``; on a
    mismatch above ``1e-6`` the radius is retried at 0.7 and 0.3.  At large
    ``t`` the factor ``radius^(-N)`` can swamp every circle with cancellation;
    the pmf sum (inverted on ``|z| = 1``) is then returned, provided its total
    mass is 1 to within ``1e-9``.
    """
    if d.rho_plus <= 0:
        raise InvalidArgument("a tracer needs rho_plus > 0")
    radii = [radius] + [r for r in (0.7, 0.3) if r != radius]
    ref = None
    mass_ok = False
    if check:
        ns, p = height_pmf_table(x, t, d, n_max=_support_bound(x, t))
        ref = float(np.sum(p[ns >= 1]))
        mass_ok = abs(float(np.sum(p)) - 1.0) <= 1e-9
    last = None
    for r in radii:
        z, g = _gf_on_z_circle(int(x), float(t), d, r, n_theta)
        val = complex(np.sum(z / n_theta * g / (1.0 - z)))
        if abs(val.imag) > 1e-8 or val.real < -1e-8 or val.real > 1 + 1e-8:
            last = ConsistencyError(f"tagged CDF {val} outside [0, 1] at radius {r}")
            continue
        v = float(np.clip(val.real, 0.0, 1.0))
        if ref is None or abs(v - ref) <= 1e-6:
            return v
        last = ConsistencyError(f"tagged CDF {v} disagrees with pmf sum {ref} at radius {r}")
    if mass_ok:
        return float(np.clip(ref, 0.0, 1.0))
    raise last


__all__ = ["DensityPair", "KernelSpec", "kernel_spec", "kernel_K", "nystrom_matrix",
           "bessel_operator", "Spectrum", "spectrum", "trace_power_In", "I1_bessel",
           "multi_integral_Jn", "DetResult", "fredholm_det", "omega_of_lambda", "M0",
           "gf_height", "gf_height_result", "height_pmf", "height_pmf_table",
           "tagged_cdf", "check_radius", "eps", "DEFAULT_RADIUS"]
