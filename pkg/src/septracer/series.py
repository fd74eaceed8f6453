"""Truncated exponential power series and moment/cumulant combinatorics.

Coefficients are stored in the exponential convention: ``coeffs[n]`` is the
coefficient of ``lam**n / n!``.  Products are binomial convolutions.  All
arithmetic runs in a private mpmath context at 50 significant digits so that
mixed-sign partition sums up to order 12 do not lose accuracy.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

import mpmath
import numpy as np

from .errors import InvalidArgument
from .kernel import DensityPair, kernel_spec, multi_integral_Jn, trace_power_In

ctx = mpmath.MPContext()
ctx.dps = 50

ORDER_CAP = 12


def _mpf(v):
    return ctx.mpf(v) if not isinstance(v, ctx.mpf) else v


@lru_cache(maxsize=None)
def _binom(n: int, k: int) -> int:
    return math.comb(n, k)


@dataclass(frozen=True)
class SeriesPoly:
    """Truncated series ``sum_n coeffs[n] lam**n / n!``."""

    coeffs: tuple

    @classmethod
    def from_list(cls, vals: Sequence) -> "SeriesPoly":
        return cls(tuple(_mpf(v) for v in vals))

    @classmethod
    def constant(cls, c, order: int) -> "SeriesPoly":
        return cls.from_list([c] + [0] * order)

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def __getitem__(self, n: int):
        return self.coeffs[n]

    def _check(self, other: "SeriesPoly") -> int:
        if other.order != self.order:
            raise InvalidArgument("series orders differ")
        return self.order

    def __add__(self, other):
        if not isinstance(other, SeriesPoly):
            other = SeriesPoly.constant(other, self.order)
        self._check(other)
        return SeriesPoly(tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    __radd__ = __add__

    def __neg__(self):
        return SeriesPoly(tuple(-a for a in self.coeffs))

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, SeriesPoly):
            c = _mpf(other)
            return SeriesPoly(tuple(c * a for a in self.coeffs))
        N = self._check(other)
        a, b = self.coeffs, other.coeffs
        out = []
        for n in range(N + 1):
            s = ctx.mpf(0)
            for k in range(n + 1):
                s += _binom(n, k) * a[k] * b[n - k]
            out.append(s)
        return SeriesPoly(tuple(out))

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if int(k) != k or k < 0:
            raise InvalidArgument("only non-negative integer powers")
        out = SeriesPoly.constant(1, self.order)
        base = self
        k = int(k)
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def exp(self) -> "SeriesPoly":
        """``exp`` of the series via ``f' = g' f`` in the exponential basis."""
        N = self.order
        g = self.coeffs
        f = [ctx.exp(g[0])] + [ctx.mpf(0)] * N
        for n in range(N):
            # f_{n+1} = sum_k C(n, k) g_{k+1} f_{n-k}
            f[n + 1] = ctx.fsum(_binom(n, k) * g[k + 1] * f[n - k] for k in range(n + 1))
        return SeriesPoly(tuple(f))

    def log(self) -> "SeriesPoly":
        """``log`` of a series with positive constant term."""
        N = self.order
        f = self.coeffs
        if f[0] <= 0:
            raise InvalidArgument("log needs a positive constant term")
        g = [ctx.log(f[0])] + [ctx.mpf(0)] * N
        for n in range(N):
            # f_{n+1} = sum_k C(n, k) g_{k+1} f_{n-k}, solve for g_{n+1}
            s = ctx.fsum(_binom(n, k) * g[k + 1] * f[n - k] for k in range(n))
            g[n + 1] = (f[n + 1] - s) / f[0]
        return SeriesPoly(tuple(g))

    def as_floats(self) -> np.ndarray:
        return np.array([float(c) for c in self.coeffs])


def exp_lambda_series(order: int, scale=1) -> SeriesPoly:
    """``exp(scale*lam)``."""
    s = _mpf(scale)
    return SeriesPoly(tuple(s ** n for n in range(order + 1)))


def omega_series(d: DensityPair, order: int) -> SeriesPoly:
    """Series of ``omega(lam) = r+ (e^l - 1) + r- (e^-l - 1)``."""
    rp, rm = _mpf(d.r_plus), _mpf(d.r_minus)
    co = [ctx.mpf(0)] + [rp + (-1) ** n * rm for n in range(1, order + 1)]
    return SeriesPoly(tuple(co))


def M0_series(x: int, d: DensityPair, order: int) -> SeriesPoly:
    """Series of ``(1 + rho+ (e^lam - 1))**x`` for ``x >= 0``."""
    if x < 0:
        raise InvalidArgument("M0_series takes x >= 0; map negative x by parity")
    rp = _mpf(d.rho_plus)
    base = SeriesPoly(tuple([ctx.mpf(1)] + [rp] * order))
    return base ** int(x)


def series_from_function(kind: str, params: dict, order: int) -> SeriesPoly:
    """Series of one of the elementary functions.

    Parameters
    ----------
    kind : {"omega", "M0", "exp_lambda"}
    params : dict
        ``{"d": DensityPair}`` for ``omega``; ``{"x": int, "d": DensityPair}``
        for ``M0``; optional ``{"scale": float}`` for ``exp_lambda``.
    order : int
        Truncation order, at most 12.
    """
    if order < 0 or order > ORDER_CAP:
        raise InvalidArgument(f"order must be in [0, {ORDER_CAP}]")
    if kind == "omega":
        return omega_series(params["d"], order)
    if kind == "M0":
        return M0_series(int(params["x"]), params["d"], order)
    if kind == "exp_lambda":
        return exp_lambda_series(order, params.get("scale", 1))
    raise InvalidArgument(f"unsupported series kind {kind!r}")


def m_coeff(n: int, k: int, x: int, d: DensityPair):
    """Coefficient of ``lam**n/n!`` in ``omega**k/k! * M0``.

    Returns an mpmath number; wrap with ``float`` for double precision.
    """
    if not (0 <= k <= n <= ORDER_CAP):
        raise InvalidArgument("need 0 <= k <= n <= 12")
    s = (omega_series(d, n) ** k) * M0_series(x, d, n)
    return s[n] / math.factorial(k)


def moment_N(x: int, t: float, d: DensityPair, n: int) -> float:
    """``<N(x, t)**n>`` as ``sum_k m_{n,k} J_k(x, t)``, ``n <= 4``.

    Negative ``x`` is mapped through ``N(x; rho-, rho+) = -N(-x; rho+, rho-)``
    in distribution.
    """
    if int(n) != n or n < 0 or n > 4:
        raise InvalidArgument("moment_N needs 0 <= n <= 4 (J_k limited to k <= 4)")
    if x < 0:
        return (-1) ** n * moment_N(-x, t, d.swapped(), n)
    spec = kernel_spec(x, t)
    total = ctx.mpf(0)
    for k in range(n + 1):
        mk = m_coeff(n, k, x, d)
        if mk == 0:
            continue
        jk = 1.0 if k == 0 else (0.0 if t == 0 else multi_integral_Jn(spec, k))
        total += mk * ctx.mpf(jk)
    return float(total)


def partitions(n: int) -> Iterator[tuple[int, ...]]:
    """Partitions of ``n`` as multiplicity tuples ``(l_1, ..., l_n)``."""
    if n == 0:
        yield ()
        return

    def parts(rem, maxpart):
        if rem == 0:
            yield []
            return
        for p in range(min(rem, maxpart), 0, -1):
            for rest in parts(rem - p, p):
                yield [p] + rest

    for ps in parts(n, n):
        mult = [0] * n
        for p in ps:
            mult[p - 1] += 1
        yield tuple(mult)


def n_parts(mult: Sequence[int]) -> int:
    return sum(mult)


def a_nu(mult: Sequence[int]) -> int:
    """``n! / prod_j (l_j! (j!)**l_j)``: number of set partitions of type ``nu``."""
    n = sum((j + 1) * l for j, l in enumerate(mult))
    den = 1
    for j, l in enumerate(mult):
        den *= math.factorial(l) * math.factorial(j + 1) ** l
    return math.factorial(n) // den


def alpha(n: int, l: int, a, b):
    """Partition sum ``alpha_{n,l}(a, b)``.

    ``sum over nu |- n with l parts of n!/prod(l_j!) prod_j ((a + (-1)**j b)/j!)**l_j``.
    """
    if not (1 <= l <= n <= ORDER_CAP):
        raise InvalidArgument("need 1 <= l <= n <= 12")
    a, b = _mpf(a), _mpf(b)
    total = ctx.mpf(0)
    for mult in partitions(n):
        if n_parts(mult) != l:
            continue
        term = ctx.mpf(math.factorial(n))
        for j, lj in enumerate(mult, start=1):
            if lj:
                term *= ((a + (-1) ** j * b) / math.factorial(j)) ** lj / math.factorial(lj)
        total += term
    return total


def cumulant_N_finite(x: int, t: float, d: DensityPair, n: int) -> float:
    """``n``-th cumulant of ``N(x, t)`` from the traces ``I_l = tr K^l``.

    ``sum_l (-1)**(l-1) (l-1)! (alpha_{n,l}(r+, r-) I_l + alpha_{n,l}(1, 0) x rho+**l)``.
    """
    if int(n) != n or n < 1 or n > 8:
        raise InvalidArgument("cumulant_N_finite needs 1 <= n <= 8")
    if x < 0:
        return (-1) ** n * cumulant_N_finite(-x, t, d.swapped(), n)
    spec = kernel_spec(x, t)
    total = ctx.mpf(0)
    rp = _mpf(d.rho_plus)
    for l in range(1, n + 1):
        il = 0.0 if t == 0 else trace_power_In(spec, l)
        sgn = (-1) ** (l - 1) * math.factorial(l - 1)
        total += sgn * (alpha(n, l, d.r_plus, d.r_minus) * ctx.mpf(il)
                        + alpha(n, l, 1, 0) * x * rp ** l)
    return float(total)


def moments_from_cumulants(c: Sequence) -> list:
    """Raw moments ``m_1..m_n`` from cumulants ``c_1..c_n`` (partition sum)."""
    c = [_mpf(v) for v in c]
    if len(c) > ORDER_CAP:
        raise InvalidArgument("at most 12 terms")
    out = []
    for n in range(1, len(c) + 1):
        s = ctx.mpf(0)
        for mult in partitions(n):
            term = ctx.mpf(a_nu(mult))
            for j, lj in enumerate(mult):
                if lj:
                    term *= c[j] ** lj
            s += term
        out.append(s)
    return out


def cumulants_from_moments(m: Sequence) -> list:
    """Cumulants ``c_1..c_n`` from raw moments ``m_1..m_n`` (``m_0 = 1``)."""
    m = [_mpf(v) for v in m]
    if len(m) > ORDER_CAP:
        raise InvalidArgument("at most 12 terms")
    out = []
    for n in range(1, len(m) + 1):
        s = ctx.mpf(0)
        for mult in partitions(n):
            l = n_parts(mult)
            term = ctx.mpf((-1) ** (l - 1) * math.factorial(l - 1) * a_nu(mult))
            for j, lj in enumerate(mult):
                if lj:
                    term *= m[j] ** lj
            s += term
        out.append(s)
    return out


def moment_table_entry(n: int) -> dict:
    """Monomials of ``m_n`` in cumulants, keyed by multiplicity tuples."""
    return {mult: a_nu(mult) for mult in partitions(n)}


def q_binomial(n: int, k: int, tau: float) -> float:
    """Gaussian binomial ``[n choose k]_tau`` via the q-Pascal recursion."""
    if not (0 <= k <= n <= 20):
        raise InvalidArgument("need 0 <= k <= n <= 20")
    row = [1.0]
    for m in range(1, n + 1):
        new = [1.0] * (m + 1)
        for j in range(1, m):
            new[j] = row[j - 1] + tau ** j * row[j]
        row = new
    return row[k]


def q_binomial_product(n: int, k: int, tau: float) -> float:
    """Product form ``prod_i (1 - tau**(n-k+i)) / (1 - tau**i)``; needs ``tau != 1``."""
    out = 1.0
    for i in range(1, k + 1):
        out *= (1.0 - tau ** (n - k + i)) / (1.0 - tau ** i)
    return out


def q_subset_sum(n: int, k: int, tau: float) -> float:
    """``sum over k-subsets P of {1..n} of tau**(sum(P) - k)`` by enumeration."""
    return math.fsum(tau ** (sum(p) - k) for p in itertools.combinations(range(1, n + 1), k))


def q_subset_identity_check(n: int, k: int, tau: float, tol: float = 1e-12) -> bool:
    lhs = q_subset_sum(n, k, tau)
    rhs = q_binomial(n, k, tau) * tau ** (k * (k - 1) // 2)
    return abs(lhs - rhs) <= tol * max(1.0, abs(rhs))


def _perm_sign(p: Sequence[int]) -> int:
    sgn = 1
    seen = [False] * len(p)
    for i in range(len(p)):
        if seen[i]:
            continue
        j, cyc = i, 0
        while not seen[j]:
            seen[j] = True
            j = p[j]
            cyc += 1
        if cyc % 2 == 0:
            sgn = -sgn
    return sgn


def b4_sides(t_values: Sequence, a) -> tuple:
    """Both sides of ``sum_s sgn(s) prod_{i<j} (a + t_s(i) - t_s(j)) = n! prod_{i<j} (t_i - t_j)``."""
    t = list(t_values)
    n = len(t)
    lhs = 0
    for p in itertools.permutations(range(n)):
        prod = 1
        for i in range(n):
            for j in range(i + 1, n):
                prod *= a + t[p[i]] - t[p[j]]
        lhs += _perm_sign(p) * prod
    rhs = math.factorial(n)
    for i in range(n):
        for j in range(i + 1, n):
            rhs *= t[i] - t[j]
    return lhs, rhs


def b4_xi_sides(xi_values: Sequence) -> tuple:
    """Both sides of the same identity written in the circle variables."""
    xi = list(xi_values)
    n = len(xi)
    lhs = 0
    for p in itertools.permutations(range(n)):
        prod = 1
        for i in range(n):
            for j in range(i + 1, n):
                prod *= xi[p[i]] * xi[p[j]] + 1 - 2 * xi[p[i]]
        lhs += _perm_sign(p) * prod
    rhs = math.factorial(n)
    for i in range(n):
        for j in range(i + 1, n):
            rhs *= xi[j] - xi[i]
    return lhs, rhs


def identity_b4_check(n: int, t_values: Sequence | None = None, a=None,
                      rng: np.random.Generator | None = None, tol: float = 1e-10) -> bool:
    """Check the antisymmetrisation identity at ``n`` points.

    Missing ``t_values`` or ``a`` are drawn from ``rng``.  The comparison is
    relative to ``max(1, |rhs|)``.
    """
    if n > 6:
        raise InvalidArgument("n <= 6 (n! permutations)")
    rng = rng or np.random.default_rng(0)
    if t_values is None:
        t_values = rng.uniform(-2, 2, n)
    if len(t_values) != n or len(set(np.round(t_values, 14))) != n:
        raise InvalidArgument("need n distinct t values")
    if a is None:
        a = rng.uniform(-2, 2)
    lhs, rhs = b4_sides(t_values, a)
    return abs(lhs - rhs) <= tol * max(1.0, abs(rhs))


def b5_sides(xi_values: Sequence) -> tuple:
    """Product form and determinant form of the Cauchy-type identity."""
    xi = np.asarray(xi_values, dtype=complex)
    n = len(xi)
    lhs = np.prod(1.0 / (1.0 - xi) ** 2)
    for i in range(n):
        for j in range(n):
            if i != j:
                lhs *= (xi[i] - xi[j]) / (xi[i] * xi[j] + 1.0 - 2.0 * xi[j])
    mat = 1.0 / (np.multiply.outer(xi, xi) + 1.0 - 2.0 * xi[:, None])
    return complex(lhs), complex(np.linalg.det(mat))


def identity_b5_check(n: int, xi_values: Sequence | None = None,
                      rng: np.random.Generator | None = None, tol: float = 1e-10) -> bool:
    """Check the product/determinant identity at ``n`` points in ``|xi| < 0.3``."""
    if n > 5:
        raise InvalidArgument("n <= 5")
    rng = rng or np.random.default_rng(0)
    if xi_values is None:
        r = 0.3 * np.sqrt(rng.uniform(0, 1, n))
        xi_values = r * np.exp(2j * np.pi * rng.uniform(0, 1, n))
    xi = np.asarray(xi_values, dtype=complex)
    if len(xi) != n:
        raise InvalidArgument("need n points")
    if n > 1 and np.min(np.abs(np.subtract.outer(xi, xi))[~np.eye(n, dtype=bool)]) < 1e-12:
        raise InvalidArgument("coincident points")
    lhs, rhs = b5_sides(xi)
    return abs(lhs - rhs) <= tol * max(1.0, abs(rhs))


__all__ = ["SeriesPoly", "series_from_function", "omega_series", "M0_series",
           "exp_lambda_series", "m_coeff", "moment_N", "partitions", "a_nu", "alpha",
           "cumulant_N_finite", "moments_from_cumulants", "cumulants_from_moments",
           "moment_table_entry", "q_binomial", "q_binomial_product", "q_subset_sum",
           "q_subset_identity_check", "identity_b4_check", "identity_b5_check",
           "b4_sides", "b4_xi_sides", "b5_sides", "ctx"]
