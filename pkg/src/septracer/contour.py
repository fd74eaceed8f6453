"""Trapezoidal quadrature on circles in the complex plane.

All weights carry the ``1/(2*pi*i)`` factor, so ``sum(w * f(nodes))``
approximates ``(1/(2*pi*i)) * \\oint f(z) dz`` taken counterclockwise.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import EvaluationError, InvalidArgument, UnsupportedDimension

NODE_CAP = 4096


@dataclass(frozen=True)
class Contour:
    """Discretised circle ``center + radius * exp(2*pi*i*j/n)``.

    Attributes
    ----------
    radius : float
    n_nodes : int
    center : complex
    nodes : ndarray of complex
        Counterclockwise nodes.
    weights : ndarray of complex
        ``(nodes - center) / n_nodes``.
    """

    radius: float
    n_nodes: int
    center: complex = 0j
    nodes: np.ndarray = field(repr=False, default=None)
    weights: np.ndarray = field(repr=False, default=None)

    def refined(self, n_nodes: int) -> "Contour":
        return make_contour(self.radius, n_nodes, self.center)


@dataclass(frozen=True)
class QuadResult:
    """Value of a contour integral with a node-doubling error estimate."""

    value: complex
    est_error: float
    n_nodes_used: int
    converged: bool = True


def make_contour(radius: float, n_nodes: int, center: complex = 0j) -> Contour:
    """Build a trapezoidal contour.

    Parameters
    ----------
    radius : float
        Circle radius, must be positive.
    n_nodes : int
        Number of nodes, at least 8.
    center : complex, optional
        Circle centre, zero by default.

    Returns
    -------
    Contour
    """
    if not np.isfinite(radius) or radius <= 0:
        raise InvalidArgument(f"radius must be positive, got {radius!r}")
    if int(n_nodes) != n_nodes or n_nodes < 8:
        raise InvalidArgument(f"n_nodes must be an integer >= 8, got {n_nodes!r}")
    n_nodes = int(n_nodes)
    phase = np.exp(2j * np.pi * np.arange(n_nodes) / n_nodes)
    # exact values on the axes keep the roots of unity clean
    phase.real[np.abs(phase.real) < 1e-15] = 0.0
    phase.imag[np.abs(phase.imag) < 1e-15] = 0.0
    offset = radius * phase
    nodes = complex(center) + offset
    weights = offset / n_nodes
    return Contour(float(radius), n_nodes, complex(center), nodes, weights)


def _eval(f: Callable, z: np.ndarray) -> np.ndarray:
    try:
        vals = np.asarray(f(z), dtype=complex)
    except (TypeError, ValueError):
        vals = np.array([complex(f(zz)) for zz in z.ravel()]).reshape(z.shape)
    if vals.shape != z.shape:
        vals = np.broadcast_to(vals, z.shape)
    if not np.all(np.isfinite(vals)):
        raise EvaluationError("integrand is not finite at a quadrature node")
    return vals


def integrate_1d(f: Callable, c: Contour, tol: float = 1e-12,
                 cap: int = NODE_CAP) -> QuadResult:
    """Integrate ``f`` on ``c`` with node doubling.

    ``f`` is called with an array of nodes; scalar-only callables are
    evaluated node by node.  Doubling stops when two successive sums differ by
    less than ``tol`` (absolute) or when ``cap`` nodes are reached, in which
    case the result is flagged as non-converged.
    """
    n = c.n_nodes
    cur = c
    prev = complex(np.sum(cur.weights * _eval(f, cur.nodes)))
    while True:
        n2 = 2 * n
        if n2 > cap:
            return QuadResult(prev, float("inf"), n, False)
        cur = c.refined(n2)
        val = complex(np.sum(cur.weights * _eval(f, cur.nodes)))
        err = abs(val - prev)
        if err < tol:
            return QuadResult(val, err, n2, True)
        prev, n = val, n2


def _tensor_sum(f: Callable, c: Contour, d: int) -> complex:
    grids = np.meshgrid(*([c.nodes] * d), indexing="ij")
    w = c.weights
    wt = w
    for _ in range(d - 1):
        wt = np.multiply.outer(wt, w)
    vals = _eval(lambda _: f(*grids), grids[0])
    return complex(np.sum(wt * vals))


def integrate_nd(f: Callable, c: Contour, d: int, tol: float = 1e-10,
                 cap: int = 256) -> QuadResult:
    """Tensor-product trapezoid integral of ``f(z_1, ..., z_d)`` on ``c**d``.

    ``f`` receives ``d`` broadcastable arrays.  The per-axis node count is
    doubled until successive sums agree to ``tol``; ``cap`` bounds it since
    the cost grows as ``n**d``.
    """
    if int(d) != d or d < 1:
        raise InvalidArgument("d must be a positive integer")
    if d > 4:
        raise UnsupportedDimension(f"tensor quadrature limited to d <= 4, got {d}")
    if d == 1:
        return integrate_1d(lambda z: f(z), c, tol, cap)
    n = c.n_nodes
    prev = _tensor_sum(f, c, d)
    while True:
        n2 = 2 * n
        if n2 > cap:
            return QuadResult(prev, float("inf"), n, False)
        val = _tensor_sum(f, c.refined(n2), d)
        err = abs(val - prev)
        if err < tol:
            return QuadResult(val, err, n2, True)
        prev, n = val, n2


def rotate(c: Contour, k: int = 1) -> Contour:
    """Contour with its node ordering cyclically shifted by ``k``."""
    return Contour(c.radius, c.n_nodes, c.center,
                   np.roll(c.nodes, k), np.roll(c.weights, k))


__all__ = ["Contour", "QuadResult", "make_contour", "integrate_1d",
           "integrate_nd", "rotate", "NODE_CAP"]
