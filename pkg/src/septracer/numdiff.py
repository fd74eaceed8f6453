"""Central finite differences with Richardson extrapolation."""
from __future__ import annotations

import math
from functools import lru_cache
from typing import Callable

import numpy as np


@lru_cache(maxsize=None)
def central_weights(order: int, half_width: int) -> tuple:
    """Weights ``w_k`` with ``sum_k w_k f(x + k h) / h**order ~ f^(order)(x)``.

    Offsets run over ``-half_width..half_width``.
    """
    ks = np.arange(-half_width, half_width + 1, dtype=float)
    m = len(ks)
    V = np.array([ks ** j / math.factorial(j) for j in range(m)])
    rhs = np.zeros(m)
    rhs[order] = 1.0
    return tuple(np.linalg.solve(V, rhs))


def derivative(f: Callable[[float], float], x0: float, order: int, h: float,
               levels: int = 3) -> float:
    """``order``-th derivative of ``f`` at ``x0``.

    Uses the minimal symmetric stencil (error ``O(h**2)``) at steps
    ``h, h/2, ...`` and removes the ``h**2, h**4, ...`` terms by Richardson
    extrapolation across ``levels`` steps.
    """
    half = (order + 1) // 2
    w = central_weights(order, half)
    cache: dict[float, float] = {}

    def fv(x):
        if x not in cache:
            cache[x] = float(f(x))
        return cache[x]

    est = []
    for i in range(levels):
        hi = h / 2 ** i
        est.append(sum(wk * fv(x0 + k * hi) for wk, k in zip(w, range(-half, half + 1))) / hi ** order)
    # Richardson table in h**2
    for j in range(1, levels):
        fac = 4.0 ** j
        est = [(fac * est[i + 1] - est[i]) / (fac - 1.0) for i in range(len(est) - 1)]
    return est[0]
