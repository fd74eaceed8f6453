"""Continuous-time kinetic Monte Carlo for the exclusion process on a window.

Particles hop right at rate ``p`` and left at rate ``q`` onto empty
neighbours; hops across the window edges are suppressed.  Sites ``x <= 0`` start
occupied with probability ``rho-``, sites ``x >= 1`` with ``rho+``.  The
tracer ``X_0`` is the leftmost particle on a site ``>= 1``; labels grow to
the left, so ``X_1`` is the rightmost particle on a site ``<= 0``.

Observables recorded at each record time ``t`` and record site ``x``:

``Q``
    Net number of right-to-left crossings of the bond ``(x, x+1)``.
``N``
    ``Q(0, t) + sum_{1..x} eta(t)`` for ``x > 0``, ``Q(0, t) - sum_{x+1..0} eta(t)``
    for ``x < 0``.
``S0``
    Initial partial sums ``sum_{1..x} eta(0)`` or ``-sum_{x+1..0} eta(0)``, so
    that ``N = Q + S0`` must hold on every path.

Each sample has its own seed drawn from ``numpy.random.SeedSequence`` so
results do not depend on how samples are split across workers.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

from .errors import InvalidArgument

WORKERS_ENV = "SEPTRACER_WORKERS"


@dataclass(frozen=True)
class SimConfig:
    """Parameters of a batch of independent runs.

    ``L = None`` picks the smallest half-width allowed by the light-cone rule.
    """

    rho_minus: float
    rho_plus: float
    t_max: float
    p: float = 1.0
    q: float = 1.0
    L: int | None = None
    seed: int = 0
    record_sites: tuple = (0,)
    record_times: tuple = ()
    tag_labels: tuple = (0,)
    max_events: int = 10 ** 9

    def __post_init__(self):
        for v in (self.rho_minus, self.rho_plus):
            if not 0.0 <= v <= 1.0:
                raise InvalidArgument("densities must lie in [0, 1]")
        if self.p < 0 or self.q < 0 or self.p + self.q <= 0:
            raise InvalidArgument("need p, q >= 0 with p + q > 0")
        if self.t_max < 0:
            raise InvalidArgument("t_max must be >= 0")
        times = self.record_times or (self.t_max,)
        if any(b < a for a, b in zip(times, times[1:])) or max(times) > self.t_max or min(times) < 0:
            raise InvalidArgument("record_times must be sorted and within [0, t_max]")
        object.__setattr__(self, "record_times", tuple(float(t) for t in times))
        object.__setattr__(self, "record_sites", tuple(int(x) for x in self.record_sites))
        object.__setattr__(self, "tag_labels", tuple(int(m) for m in self.tag_labels))
        need = self.min_half_width()
        if self.L is None:
            object.__setattr__(self, "L", need)
        elif self.L < need:
            raise InvalidArgument(f"L = {self.L} violates the light-cone margin, need L >= {need}")

    def min_half_width(self) -> int:
        reach = max([abs(x) for x in self.record_sites] + [0])
        return reach + int(math.ceil(6.0 * math.sqrt(self.t_max * max(self.p, self.q)))) + 10


@numba.njit(cache=True)
def _set_flags(s, occ, nsite, posR, listR, nR, posL, listL, nL):
    # right-movable: occupied, right neighbour inside and empty
    want = occ[s] >= 0 and s + 1 < nsite and occ[s + 1] < 0
    if want and posR[s] < 0:
        posR[s] = nR[0]
        listR[nR[0]] = s
        nR[0] += 1
    elif (not want) and posR[s] >= 0:
        k = posR[s]
        last = listR[nR[0] - 1]
        listR[k] = last
        posR[last] = k
        posR[s] = -1
        nR[0] -= 1
    want = occ[s] >= 0 and s - 1 >= 0 and occ[s - 1] < 0
    if want and posL[s] < 0:
        posL[s] = nL[0]
        listL[nL[0]] = s
        nL[0] += 1
    elif (not want) and posL[s] >= 0:
        k = posL[s]
        last = listL[nL[0] - 1]
        listL[k] = last
        posL[last] = k
        posL[s] = -1
        nL[0] -= 1


@numba.njit(cache=True)
def _run_one(seed, rho_m, rho_p, p, q, L, times, sites, tags, max_events, init_occ,
             Q_out, N_out, S0_out, X_out, info):
    np.random.seed(seed)
    nsite = 2 * L + 1
    occ = np.empty(nsite, np.int64)
    rejections = 0
    # sample the initial configuration, rejecting if a tag is missing
    while True:
        npart = 0
        if init_occ.shape[0] == nsite:
            for s in range(nsite):
                if init_occ[s] > 0:
                    occ[s] = npart
                    npart += 1
                else:
                    occ[s] = -1
        else:
            for s in range(nsite):
                x = s - L
                rho = rho_m if x <= 0 else rho_p
                if np.random.random() < rho:
                    occ[s] = npart
                    npart += 1
                else:
                    occ[s] = -1
        id0 = -1
        for s in range(L + 1, nsite):
            if occ[s] >= 0:
                id0 = occ[s]
                break
        ok = id0 >= 0
        if ok:
            for m in tags:
                if id0 - m < 0 or id0 - m >= npart:
                    ok = False
        if ok or init_occ.shape[0] == nsite:
            break
        rejections += 1
        if rejections > 100000:
            info[0] = -1
            return
    pos = np.empty(max(npart, 1), np.int64)
    eta0 = np.zeros(nsite, np.int64)
    for s in range(nsite):
        if occ[s] >= 0:
            pos[occ[s]] = s
            eta0[s] = 1
    # initial partial sums per record site
    for j in range(sites.shape[0]):
        x = sites[j]
        acc = 0
        if x > 0:
            for y in range(1, x + 1):
                acc += eta0[y + L]
        elif x < 0:
            for y in range(x + 1, 1):
                acc -= eta0[y + L]
        S0_out[j] = acc
    posR = -np.ones(nsite, np.int64)
    posL = -np.ones(nsite, np.int64)
    listR = np.empty(nsite, np.int64)
    listL = np.empty(nsite, np.int64)
    nR = np.zeros(1, np.int64)
    nL = np.zeros(1, np.int64)
    for s in range(nsite):
        _set_flags(s, occ, nsite, posR, listR, nR, posL, listL, nL)
    Qb = np.zeros(nsite, np.int64)  # Qb[s]: bond (s, s+1)
    b_left0 = occ[0] >= 0
    b_right0 = occ[nsite - 1] >= 0
    t = 0.0
    k = 0
    nt = times.shape[0]
    events = 0
    while k < nt:
        R = p * nR[0] + q * nL[0]
        if R > 0:
            dt = np.random.exponential(1.0 / R)
        else:
            dt = np.inf
        tn = t + dt
        while k < nt and times[k] < tn:
            # record current state
            for j in range(sites.shape[0]):
                x = sites[j]
                Q_out[k, j] = Qb[x + L]
                acc = Qb[L]
                if x > 0:
                    for y in range(1, x + 1):
                        acc += 1 if occ[y + L] >= 0 else 0
                elif x < 0:
                    for y in range(x + 1, 1):
                        acc -= 1 if occ[y + L] >= 0 else 0
                N_out[k, j] = acc
            for j in range(tags.shape[0]):
                X_out[k, j] = pos[id0 - tags[j]] - L
            k += 1
        if k >= nt:
            break
        t = tn
        events += 1
        if events > max_events:
            info[1] = 1
            break
        # one uniform picks both the direction and the bond
        u = np.random.random() * R
        if u < p * nR[0]:
            s = listR[min(int(u / p), nR[0] - 1)]
            d = s + 1
            Qb[s] -= 1
        else:
            s = listL[min(int((u - p * nR[0]) / q), nL[0] - 1)]
            d = s - 1
            Qb[d] += 1
        pid = occ[s]
        occ[d] = pid
        occ[s] = -1
        pos[pid] = d
        lo = min(s, d) - 1
        hi = max(s, d) + 1
        for r in range(max(lo, 0), min(hi, nsite - 1) + 1):
            _set_flags(r, occ, nsite, posR, listR, nR, posL, listL, nL)
    cnt = 0
    for s in range(nsite):
        if occ[s] >= 0:
            cnt += 1
    info[0] = rejections
    info[2] = npart
    info[3] = cnt
    info[4] = 1 if ((occ[0] >= 0) != b_left0 or (occ[nsite - 1] >= 0) != b_right0) else 0
    info[5] = events


@numba.njit(cache=True)
def _run_batch(seeds, rho_m, rho_p, p, q, L, times, sites, tags, max_events, init_occ,
               Q, N, S0, X, info):
    for i in range(seeds.shape[0]):
        _run_one(seeds[i], rho_m, rho_p, p, q, L, times, sites, tags, max_events, init_occ,
                 Q[i], N[i], S0[i], X[i], info[i])


@dataclass
class BatchResult:
    """Observables of ``n`` independent runs.

    Attributes
    ----------
    Q, N : ndarray, shape (n, n_times, n_sites)
    S0 : ndarray, shape (n, n_sites)
    X : ndarray, shape (n, n_times, n_tags)
    rejections, n_particles, n_final, boundary_moved, events, truncated : ndarray, shape (n,)
    """

    config: SimConfig
    Q: np.ndarray
    N: np.ndarray
    S0: np.ndarray
    X: np.ndarray
    rejections: np.ndarray
    n_particles: np.ndarray
    n_final: np.ndarray
    boundary_moved: np.ndarray
    events: np.ndarray
    truncated: np.ndarray
    seeds: np.ndarray = field(repr=False, default=None)

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    def site_index(self, x: int) -> int:
        return self.config.record_sites.index(int(x))

    def time_index(self, t: float) -> int:
        return self.config.record_times.index(float(t))

    def tag_index(self, m: int) -> int:
        return self.config.tag_labels.index(int(m))


def sample_seeds(seed: int, n: int) -> np.ndarray:
    """Independent 32-bit per-sample seeds from one master seed."""
    return np.random.SeedSequence(int(seed)).generate_state(n, dtype=np.uint32).astype(np.int64)


def _chunk(args):
    cfg, seeds, init_occ = args
    nt = len(cfg.record_times)
    ns = len(cfg.record_sites)
    nm = len(cfg.tag_labels)
    n = len(seeds)
    Q = np.zeros((n, nt, ns), np.int64)
    N = np.zeros((n, nt, ns), np.int64)
    S0 = np.zeros((n, ns), np.int64)
    X = np.zeros((n, nt, nm), np.int64)
    info = np.zeros((n, 6), np.int64)
    _run_batch(seeds, float(cfg.rho_minus), float(cfg.rho_plus), float(cfg.p), float(cfg.q),
               int(cfg.L), np.asarray(cfg.record_times, float), np.asarray(cfg.record_sites, np.int64),
               np.asarray(cfg.tag_labels, np.int64), int(cfg.max_events), init_occ,
               Q, N, S0, X, info)
    return Q, N, S0, X, info


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def simulate(cfg: SimConfig, n_samples: int, workers: int | None = None,
             init_occ: np.ndarray | None = None) -> BatchResult:
    """Run ``n_samples`` independent trajectories.

    Parameters
    ----------
    workers : int, optional
        Number of processes; defaults to the ``SEPTRACER_WORKERS`` environment
        variable or 1.  Results are identical for any worker count.
    init_occ : ndarray of int, optional
        Fixed initial occupation of the ``2L + 1`` sites instead of Bernoulli sampling.
    """
    if n_samples < 1:
        raise InvalidArgument("n_samples must be positive")
    if cfg.rho_minus == 0 and cfg.rho_plus == 0 and init_occ is None:
        raise InvalidArgument("empty lattice: no tracer exists")
    if cfg.rho_plus == 0 and init_occ is None:
        raise InvalidArgument("rho_plus = 0: no particle to the right of the origin")
    occ = np.zeros(0, np.int64) if init_occ is None else np.asarray(init_occ, np.int64)
    if init_occ is not None and occ.shape[0] != 2 * cfg.L + 1:
        raise InvalidArgument("init_occ must have 2L + 1 entries")
    seeds = sample_seeds(cfg.seed, n_samples)
    workers = workers or default_workers()
    parts = np.array_split(seeds, max(1, min(workers * 4, n_samples))) if workers > 1 else [seeds]
    jobs = [(cfg, s, occ) for s in parts if len(s)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            outs = list(ex.map(_chunk, jobs))
    else:
        outs = [_chunk(j) for j in jobs]
    Q, N, S0, X, info = (np.concatenate([o[i] for o in outs]) for i in range(5))
    if np.any(info[:, 0] < 0):
        raise InvalidArgument("could not sample an initial configuration with the requested tags")
    return BatchResult(cfg, Q, N, S0, X, info[:, 0], info[:, 2], info[:, 3],
                       info[:, 4].astype(bool), info[:, 5], info[:, 1].astype(bool), seeds)


class Welford:
    """Streaming mean and variance; ``merge`` is associative."""

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0

    def push(self, x: float) -> None:
        self.n += 1
        d = x - self.mean
        self.mean += d / self.n
        self.m2 += d * (x - self.mean)

    def extend(self, xs) -> "Welford":
        for x in np.asarray(xs, float).ravel():
            self.push(float(x))
        return self

    def merge(self, other: "Welford") -> "Welford":
        out = Welford()
        n = self.n + other.n
        if n == 0:
            return out
        d = other.mean - self.mean
        out.n = n
        out.mean = self.mean + d * other.n / n
        out.m2 = self.m2 + other.m2 + d * d * self.n * other.n / n
        return out

    @property
    def var(self) -> float:
        return self.m2 / (self.n - 1) if self.n > 1 else 0.0

    @property
    def stderr(self) -> float:
        return math.sqrt(self.var / self.n) if self.n > 0 else float("nan")


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    n: int

    def as_dict(self) -> dict:
        return {"mean": self.mean, "n": self.n, "stderr": self.stderr}


def estimate(values) -> Estimate:
    w = Welford().extend(values)
    return Estimate(w.mean, w.stderr, w.n)


def estimate_gf(cfg: SimConfig, x: int, lam: float, n_samples: int,
                t: float | None = None, workers: int | None = None,
                batch: BatchResult | None = None) -> Estimate:
    """Sample mean and standard error of ``exp(lam N(x, t))``."""
    if n_samples < 100:
        raise InvalidArgument("n_samples must be >= 100")
    if lam == 0:
        return Estimate(1.0, 0.0, n_samples)
    b = batch if batch is not None else simulate(cfg, n_samples, workers)
    ti = b.time_index(t if t is not None else cfg.record_times[-1])
    return estimate(np.exp(lam * b.N[:, ti, b.site_index(x)]))


@dataclass(frozen=True)
class TaggedReport:
    m: int
    t: float
    sites: tuple
    cdf: tuple
    cdf_stderr: tuple
    mean: Estimate
    var: float
    var_stderr: float
    identity_violations: int


def estimate_tagged(cfg: SimConfig, m: int, n_samples: int, t: float | None = None,
                    workers: int | None = None, batch: BatchResult | None = None) -> TaggedReport:
    """Empirical CDF over the record sites and moments of ``X_m(t)``.

    Also counts samples violating ``X_m(t) <= x  <=>  N(x, t) >= 1 - m``.
    """
    b = batch if batch is not None else simulate(cfg, n_samples, workers)
    ti = b.time_index(t if t is not None else cfg.record_times[-1])
    Xm = b.X[:, ti, b.tag_index(m)]
    cdf, se = [], []
    viol = 0
    for j, x in enumerate(cfg.record_sites):
        ind = Xm <= x
        viol += int(np.sum(ind != (b.N[:, ti, j] >= 1 - m)))
        pr = float(np.mean(ind))
        cdf.append(pr)
        se.append(math.sqrt(max(pr * (1 - pr), 1e-300) / b.n))
    var = float(np.var(Xm, ddof=1))
    # standard error of the sample variance from the fourth central moment
    c = Xm - Xm.mean()
    m4 = float(np.mean(c ** 4))
    var_se = math.sqrt(max(m4 - var ** 2, 0.0) / b.n)
    return TaggedReport(m, cfg.record_times[ti], cfg.record_sites, tuple(cdf), tuple(se),
                        estimate(Xm), var, var_se, viol)


@dataclass(frozen=True)
class IdentityReport:
    n_samples: int
    height_current: int
    origin: int
    tracer: int
    labelled: int
    ordering: int
    conservation: int

    @property
    def total(self) -> int:
        return (self.height_current + self.origin + self.tracer + self.labelled
                + self.ordering + self.conservation)


def check_identities(b: BatchResult) -> IdentityReport:
    """Count pathwise violations of the structural identities on a batch.

    Checks ``N = Q + S0`` at every record point, ``N(0,t) = Q(0,t)``,
    ``X_0 <= x  <=>  N(x,t) > 0``, ``X_m <= x  <=>  N(x,t) >= 1 - m``, strict
    ordering of labelled positions and particle conservation.
    """
    cfg = b.config
    hq = int(np.sum(b.N != b.Q + b.S0[:, None, :]))
    origin = 0
    if 0 in cfg.record_sites:
        j = cfg.record_sites.index(0)
        origin = int(np.sum(b.N[:, :, j] != b.Q[:, :, j]))
    tracer = lab = 0
    sites = np.asarray(cfg.record_sites)
    for mi, m in enumerate(cfg.tag_labels):
        ind = b.X[:, :, mi][:, :, None] <= sites[None, None, :]
        viol = int(np.sum(ind != (b.N >= 1 - m)))
        lab += viol
        if m == 0:
            tracer += int(np.sum(ind != (b.N > 0)))
    order = 0
    tags = np.asarray(cfg.tag_labels)
    srt = np.argsort(tags)
    if len(tags) > 1:
        Xs = b.X[:, :, srt]
        order = int(np.sum(np.diff(Xs, axis=2) >= 0))
    cons = int(np.sum(b.n_particles != b.n_final))
    return IdentityReport(b.n, hq, origin, tracer, lab, order, cons)


__all__ = ["SimConfig", "BatchResult", "simulate", "sample_seeds", "Welford", "Estimate",
           "estimate", "estimate_gf", "estimate_tagged", "TaggedReport", "check_identities",
           "IdentityReport", "default_workers", "WORKERS_ENV"]
