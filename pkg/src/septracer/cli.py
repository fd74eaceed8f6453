"""Command-line entry point.

Parameters come from an optional JSON config file (``--config``) and are
overridden by explicit flags.  Tables are written as CSV whose first line is a
``# schema:`` comment; reports are JSON with sorted keys.  Floats carry 17
significant digits so that runs can be diffed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from typing import Any, Sequence

import numpy as np

from . import __version__
from . import asep, asymptotics as asy, kernel as ker, series as ser, simulation as sim
from . import validate as val
from .errors import SepTracerError
from .kernel import DensityPair

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


def fmt(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def parse_grid(text: str | Sequence, kind=float) -> list:
    """Parse ``"a,b,c"`` or ``"start:stop:num"`` (inclusive linspace) into a sorted list."""
    if isinstance(text, (list, tuple)):
        vals = [kind(v) for v in text]
    elif isinstance(text, (int, float)):
        vals = [kind(text)]
    else:
        s = str(text).strip()
        if s.count(":") == 2:
            a, b, n = s.split(":")
            pts = np.linspace(float(a), float(b), int(n))
            vals = [kind(round(v)) if kind is int else kind(v) for v in pts]
        else:
            vals = [kind(v) for v in s.split(",") if v.strip()]
    if not vals:
        raise argparse.ArgumentTypeError(f"empty grid: {text!r}")
    if kind is float and not all(math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError(f"non-finite grid value in {text!r}")
    return sorted(set(vals))


class Output:
    """Collects CSV tables or a JSON document and writes them to a path or stdout."""

    def __init__(self, path: str | None):
        self.path = path

    def write_text(self, text: str, suffix: str = "") -> None:
        if self.path in (None, "-"):
            sys.stdout.write(text)
            return
        path = self.path
        if suffix:
            root, ext = os.path.splitext(path)
            path = f"{root}{suffix}{ext or '.csv'}"
        with open(path, "w", newline="") as fh:
            fh.write(text)

    def csv(self, schema: str, header: list[str], rows: list[list], suffix: str = "") -> None:
        buf = io.StringIO()
        buf.write(f"# schema: septracer.{schema}/v{SCHEMA_VERSION}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])
        self.write_text(buf.getvalue(), suffix)

    def json(self, obj: Any) -> None:
        self.write_text(json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n")


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (float, np.floating)):
        f = float(o)
        return f if math.isfinite(f) else repr(f)
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    return o


# --- config handling -----------------------------------------------------------------

def merged(args: argparse.Namespace, defaults: dict) -> dict:
    """Config-file values overridden by flags that were given explicitly."""
    cfg = dict(defaults)
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
        cfg.update({k.replace("-", "_"): v for k, v in data.items()})
    for k, v in vars(args).items():
        if v is not None and k not in ("config", "func", "out"):
            cfg[k] = v
    return cfg


def densities(c: dict) -> DensityPair:
    return DensityPair(float(c["rho_minus"]), float(c["rho_plus"]))


# --- subcommands ---------------------------------------------------------------------

def cmd_gf(args) -> int:
    c = merged(args, {"rho_minus": 0.5, "rho_plus": 0.5, "x": "0", "t": "1", "lam": "0"})
    d = densities(c)
    rows, bad = [], False
    for x in parse_grid(c["x"], int):
        for t in parse_grid(c["t"]):
            for lam in parse_grid(c["lam"]):
                g, det = ker.gf_height_result(x, t, lam, d)
                bad |= not det.converged
                err = det.est_error * abs(g) / max(abs(det.value), 1e-300)
                rows.append([x, t, lam, g.real, err, det.converged])
    Output(args.out).csv("gf", ["x", "t", "lambda", "re_gf", "est_error", "converged"], rows)
    return EXIT_FAIL if bad else EXIT_OK


def cmd_moments(args) -> int:
    c = merged(args, {"rho_minus": 0.5, "rho_plus": 0.5, "x": "0", "t": "1", "n_max": 4})
    d = densities(c)
    rows = []
    for x in parse_grid(c["x"], int):
        for t in parse_grid(c["t"]):
            for n in range(1, int(c["n_max"]) + 1):
                rows.append([x, t, n, ser.moment_N(x, t, d, n)])
    Output(args.out).csv("moments", ["x", "t", "n", "moment"], rows)
    return EXIT_OK


def cmd_cumulants(args) -> int:
    c = merged(args, {"rho_minus": 0.5, "rho_plus": 0.5, "x": "0", "t": "1", "n_max": 4})
    d = densities(c)
    rows = []
    for x in parse_grid(c["x"], int):
        for t in parse_grid(c["t"]):
            xi = -x / math.sqrt(4 * t) if t > 0 else float("nan")
            for n in range(1, int(c["n_max"]) + 1):
                k = ser.cumulant_N_finite(x, t, d, n)
                lim = asy.limiting_cumulant_N(n, xi, d) if t > 0 and n <= 4 else float("nan")
                rows.append([x, t, n, k, k / math.sqrt(t) if t > 0 else float("nan"), lim])
    Output(args.out).csv("cumulants", ["x", "t", "n", "cumulant", "cumulant_over_sqrt_t",
                                       "limit_over_sqrt_t"], rows)
    return EXIT_OK


def cmd_rate_fn(args) -> int:
    c = merged(args, {"rho_minus": 0.3, "rho_plus": 0.7, "xi": "-1:1:21", "s": "-0.3:0.3:7"})
    d = densities(c)
    rows_phi = []
    for xi in parse_grid(c["xi"]):
        lr = asy.Phi(xi, 0.0, d)
        m = asy.mu(xi, lr.argmax, d)
        rows_phi.append([xi, lr.value, m.method, abs(asy.fluctuation_residual(xi, d))])
    rows_c = []
    for s in parse_grid(c["s"]):
        r = asy.C_of_s(s, d)
        rows_c.append([s, r.value, r.argmax])
    out = Output(args.out)
    out.csv("rate_phi", ["xi", "phi", "method", "ft_residual"], rows_phi, "_phi" if args.out else "")
    out.csv("rate_C", ["s", "C", "argmin_xi"], rows_c, "_C" if args.out else "")
    return EXIT_OK


def cmd_xi0(args) -> int:
    c = merged(args, {"rho_minus": 0.3, "rho_plus": 0.7})
    d = densities(c)
    x0 = asy.xi0_solve(d)
    Output(args.out).csv("xi0", ["rho_minus", "rho_plus", "xi0", "phi_at_xi0"],
                         [[d.rho_minus, d.rho_plus, x0, asy.phi_rate(x0, d)]])
    return EXIT_OK


def cmd_tagged(args) -> int:
    c = merged(args, {"rho_minus": 0.5, "rho_plus": 0.5, "x": "-3:3:7", "t": "5"})
    d = densities(c)
    rows = []
    for t in parse_grid(c["t"]):
        for x in parse_grid(c["x"], int):
            rows.append([x, t, ker.tagged_cdf(x, t, d)])
    Output(args.out).csv("tagged_cdf", ["x", "t", "cdf"], rows)
    return EXIT_OK


def cmd_simulate(args) -> int:
    c = merged(args, {"rho_minus": 0.5, "rho_plus": 0.5, "t": 5.0, "samples": 10000, "seed": 0,
                      "sites": "0", "tags": "0", "lam": None, "p": 1.0, "q": 1.0, "L": None,
                      "workers": None, "samples_csv": None})
    t = float(parse_grid(c["t"])[-1])
    sites = tuple(parse_grid(c["sites"], int))
    tags = tuple(parse_grid(c["tags"], int))
    cfg = sim.SimConfig(float(c["rho_minus"]), float(c["rho_plus"]), t, p=float(c["p"]),
                        q=float(c["q"]), L=c["L"], seed=int(c["seed"]), record_sites=sites,
                        tag_labels=tags)
    n = int(c["samples"])
    b = sim.simulate(cfg, n, c["workers"])
    report: dict = {"config": {"rho_minus": cfg.rho_minus, "rho_plus": cfg.rho_plus, "t": t, "p": cfg.p,
                               "q": cfg.q, "L": cfg.L, "seed": cfg.seed, "samples": n},
                    "height": {}, "tracer": {}}
    for j, x in enumerate(sites):
        report["height"][str(x)] = sim.estimate(b.N[:, -1, j]).as_dict()
    for m in tags:
        r = sim.estimate_tagged(cfg, m, n, batch=b)
        report["tracer"][str(m)] = {"mean": r.mean.as_dict(), "var": r.var, "var_stderr": r.var_stderr,
                                    "cdf": dict(zip(map(str, sites), r.cdf)),
                                    "cdf_stderr": dict(zip(map(str, sites), r.cdf_stderr))}
    ident = sim.check_identities(b)
    report["identities"] = {**ident.__dict__, "total": ident.total}
    report["truncated"] = int(np.sum(b.truncated))
    report["boundary_moved"] = int(np.sum(b.boundary_moved))
    ok = ident.total == 0 and report["truncated"] == 0
    if c["lam"] is not None and cfg.p == cfg.q:
        d = DensityPair(cfg.rho_minus, cfg.rho_plus)
        rows = []
        for lam in parse_grid(c["lam"]):
            for x in sites:
                e = sim.estimate_gf(cfg, x, lam, n, batch=b)
                g = float(np.real(ker.gf_height(x, t, lam, d)))
                z = abs(e.mean - g) / e.stderr if e.stderr > 0 else 0.0
                rows.append({"x": x, "lambda": lam, "formula": g, **e.as_dict(), "z": z})
        report["gf_cross_check"] = rows
    if c["samples_csv"]:
        hdr = ["sample", "seed"] + [f"N_{x}" for x in sites] + [f"Q_{x}" for x in sites] \
            + [f"X_{m}" for m in tags]
        rows = [[i, int(b.seeds[i])] + list(b.N[i, -1]) + list(b.Q[i, -1]) + list(b.X[i, -1])
                for i in range(b.n)]
        Output(c["samples_csv"]).csv("samples", hdr, rows)
    Output(args.out).json(report)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_duality(args) -> int:
    c = merged(args, {"rho_minus": 0.4, "rho_plus": 0.3, "x": "1", "t": "2", "p": 0.7, "q": 1.0,
                      "h": 1e-3})
    a = asep.AsepParams(float(c["p"]), float(c["q"]), densities(c))
    rows = []
    for x in parse_grid(c["x"], int):
        for t in parse_grid(c["t"]):
            for n in (1, 2):
                rows.append([x, t, n, a.tau, asep.tau_moment(n, x, t, a),
                             asep.evolution_residual(n, x, t, a, float(c["h"]))])
    Output(args.out).csv("duality", ["x", "t", "n", "tau", "tau_moment", "evolution_residual"], rows)
    return EXIT_OK


def cmd_validate(args) -> int:
    only = parse_grid(args.only, int) if args.only else None
    opt = val.RunOptions(quick=args.quick, tol_scale=args.tol_scale, seed=args.seed,
                         workers=args.workers)
    manifest = val.run_all(opt, only)
    for r in manifest["criteria"]:
        cr = val.CriterionResult(**r)
        print(cr.line(), file=sys.stderr)
    Output(args.out).json(manifest)
    return EXIT_OK if manifest["passed"] else EXIT_FAIL


# --- parser --------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, dens: bool = True) -> None:
    p.add_argument("--config", help="JSON file with parameters (flags override)")
    p.add_argument("--out", help="output path (default stdout)")
    if dens:
        p.add_argument("--rho-minus", type=float, dest="rho_minus")
        p.add_argument("--rho-plus", type=float, dest="rho_plus")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="septracer", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gf", help="generating function of the height")
    _common(p)
    p.add_argument("--x")
    p.add_argument("--t")
    p.add_argument("--lambda", dest="lam")
    p.set_defaults(func=cmd_gf)

    for name, fn, cap in (("moments", cmd_moments, 4), ("cumulants", cmd_cumulants, 8)):
        p = sub.add_parser(name, help=f"finite-time {name} of the height (n <= {cap})")
        _common(p)
        p.add_argument("--x")
        p.add_argument("--t")
        p.add_argument("--n-max", type=int, dest="n_max", choices=range(1, cap + 1))
        p.set_defaults(func=fn)

    p = sub.add_parser("rate-fn", help="tracer rate function phi and C(s)")
    _common(p)
    p.add_argument("--xi")
    p.add_argument("--s")
    p.set_defaults(func=cmd_rate_fn)

    p = sub.add_parser("xi0", help="asymptotic tracer mean position")
    _common(p)
    p.set_defaults(func=cmd_xi0)

    p = sub.add_parser("tagged-dist", help="tracer CDF by contour integration")
    _common(p)
    p.add_argument("--x")
    p.add_argument("--t")
    p.set_defaults(func=cmd_tagged)

    p = sub.add_parser("simulate", help="Monte Carlo estimates")
    _common(p)
    p.add_argument("--t")
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--sites")
    p.add_argument("--tags")
    p.add_argument("--lambda", dest="lam")
    p.add_argument("--p", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--L", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--samples-csv", dest="samples_csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("duality-check", help="ASEP tau-moments and evolution residuals")
    _common(p)
    p.add_argument("--x")
    p.add_argument("--t")
    p.add_argument("--p", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--h", type=float)
    p.set_defaults(func=cmd_duality)

    p = sub.add_parser("validate", help="run the acceptance suite and emit a manifest")
    p.add_argument("--out", help="manifest path (default stdout)")
    p.add_argument("--quick", action="store_true", help="reduced sample counts")
    p.add_argument("--tol-scale", type=float, default=1.0, dest="tol_scale",
                   help="multiply every tolerance (values < 1 tighten)")
    p.add_argument("--seed", type=int, default=val.RunOptions.seed)
    p.add_argument("--only", help="comma-separated criterion ids")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_validate, config=None)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SepTracerError, ValueError, ArithmeticError) as exc:
        print(f"septracer {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
