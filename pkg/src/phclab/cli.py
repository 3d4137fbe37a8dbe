"""Command line front end: ``phclab <command> [options]``.

Exit status is 0 when every contract of the command holds, 1 when one fails
(diagnostics as JSON on stdout) and 2 on usage errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import cone_dynamics as cone
from . import energetics, geometry, limits, local_graphs, surfaces, vertex
from .errors import PhcError


@dataclass
class RunConfig:
    quad_tol: float = 1e-13
    ode_tol: float = 1e-11
    residual_tol: float = 1e-8
    period_tol: float = 1e-6
    identity_tol: float = 1e-12
    grid: int = 64
    n_points: int = 10_000
    L: Optional[float] = None
    out_dir: str = "."
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        for name in ("quad_tol", "ode_tol", "residual_tol", "period_tol", "identity_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.grid < 4:
            raise ValueError("grid must be at least 4")

    @classmethod
    def from_file(cls, path) -> dict:
        """Flat key=value lines; '#' starts a comment."""
        known = {f.name: f.type for f in fields(cls)}
        out = {}
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in known:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = _coerce(val)
        return out


def _coerce(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return str(x)


def write_csv(path: Path, header: Sequence[str], rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


class Outcome:
    """Collects named checks and report values for one command."""

    def __init__(self, command: str):
        self.command = command
        self.checks: dict = {}
        self.values: dict = {}
        self.files: list = []

    def check(self, name: str, ok: bool, **detail):
        self.checks[name] = {"ok": bool(ok), **detail}

    @property
    def ok(self) -> bool:
        return all(c["ok"] for c in self.checks.values())

    def as_dict(self):
        return _jsonable({"command": self.command, "ok": self.ok, "checks": self.checks,
                          "values": self.values, "files": [str(f) for f in self.files]})

    def emit(self, as_json: bool, stream=None):
        stream = stream or sys.stdout
        if as_json or not self.ok:
            print(json.dumps(self.as_dict(), indent=2, sort_keys=True), file=stream)
            return
        for k, v in self.values.items():
            shown = json.dumps(_jsonable(v)) if isinstance(v, (dict, list)) else _jsonable(v)
            print(f"{k} {shown}", file=stream)
        for k, c in self.checks.items():
            print(f"check {k}: {'ok' if c['ok'] else 'FAIL'}", file=stream)
        for f in self.files:
            print(f"wrote {f}", file=stream)


# -- commands ------------------------------------------------------------------

def _family_kwargs(args, cfg: RunConfig) -> dict:
    kw = {}
    for item in args.param or []:
        if "=" not in item:
            raise UsageError(f"--param expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        kw[k.strip()] = _coerce(v.strip())
    if cfg.L is not None:
        kw["L"] = float(cfg.L)
    return kw


class UsageError(Exception):
    pass


def cmd_period(args, cfg: RunConfig, out: Outcome):
    if args.c is not None:
        c = args.c
        tq = cone.half_period_quad(c).T
        to = cone.period_from_ode(c, rtol=cfg.ode_tol).T
        alpha = cone.C_MAX - c
        ts = cone.period_series(alpha).T
        out.values.update(c=c, alpha=alpha, T_quad=tq, T_ode=to, T_series=tq if alpha == 0 else ts,
                          series_gap=abs(tq - ts), alpha_3_2=alpha**1.5)
        out.check("quad_vs_ode", abs(tq - to) < cfg.period_tol, gap=abs(tq - to))
    elif args.scan is not None:
        rows = cone.scan_periods(args.scan, threads=cfg.threads)
        path = write_csv(Path(cfg.out_dir) / "periods.csv", ("c", "T_quad", "T_ode", "err"), rows)
        out.files.append(path)
        worst = max(r[3] for r in rows)
        out.values.update(points=len(rows), max_err=worst,
                          T_min=min(r[1] for r in rows), T_max=max(r[1] for r in rows))
        out.check("quad_vs_ode", worst < cfg.period_tol, gap=worst)
    else:
        a, b = args.rational
        cp = cone.find_c_for_period(a, b)
        to = cone.period_from_ode(cp.c, rtol=cfg.ode_tol).T
        target = 2 * math.pi * a / b
        out.values.update(a=a, b=b, c=cp.c, T_target=target, T_ode=to, err=abs(to - target))
        out.check("round_trip", abs(to - target) < cfg.period_tol, gap=abs(to - target))


def cmd_surface(args, cfg: RunConfig, out: Outcome):
    surf = surfaces.make_family(args.family, **_family_kwargs(args, cfg))
    s1, s2 = surf.grid(cfg.grid, cfg.grid)
    pts = surf.sample(s1, s2)[0]
    path = Path(args.out) if args.out else Path(cfg.out_dir) / f"surface_{args.family}.csv"
    write_csv(path, ("s1", "s2", "t", "x", "y", "z"),
              (tuple(r) for r in np.column_stack([s1, s2, pts])))
    out.files.append(path)
    out.values.update(family=args.family, points=len(s1))
    out.check("finite", bool(np.all(np.isfinite(pts))))


def cmd_verify(args, cfg: RunConfig, out: Outcome):
    surf = surfaces.make_family(args.family, **_family_kwargs(args, cfg))
    rep = surfaces.holomorphy_residual(surf, n=cfg.grid)
    out.values.update(family=args.family, residual_max=rep.max, residual_mean=rep.mean,
                      worst=list(rep.worst))
    out.check("holomorphy", rep.max < cfg.residual_tol, max=rep.max, tol=cfg.residual_tol)


def cmd_energy(args, cfg: RunConfig, out: Outcome):
    surf = surfaces.make_family(args.family, **_family_kwargs(args, cfg))
    s_grid = np.linspace(args.smax / args.points, args.smax, args.points)
    rep = energetics.sigma_profile(surf, args.center, s_grid,
                                   cutoff="smooth" if args.smooth else "sharp", with_area=False)
    mu, mu_sup = energetics.mu_profile(surf, s_grid)
    rep.mu = np.asarray(mu)
    path = write_csv(Path(cfg.out_dir) / f"energy_{args.family}.csv",
                     ("s", "sigma", "sigma_s3", "mu", "mu_s3", "err"), rep.rows())
    out.files.append(path)
    out.values.update(family=args.family, center=args.center, cutoff="smooth" if args.smooth else "sharp",
                      sup_sigma_s3=rep.zeta_sigma, sup_mu_s3=mu_sup)
    out.check("monotone", rep.monotone)


def cmd_limit(args, cfg: RunConfig, out: Outcome):
    surf = surfaces.make_family(args.family, **_family_kwargs(args, cfg))
    data = limits.classify_limit(surf, args.t0, s=args.s, n=cfg.grid)
    out.values.update(family=args.family, t0=args.t0, limit=data.to_dict(),
                      tuple=list(data.as_tuple()))
    out.check("stable", data.stable)
    out.check("linking", data.consistent, p=data.p, q=data.q_plus + data.q_minus,
              linking=data.linking)


GRAPH_DEFAULTS = {
    "e13": ({}, (0.2, 0.8), (0.005, 0.3), None),
    "e17": ({}, (0.5, 1.5), (0.005, 0.2), None),
    "e15": ({"a": 7, "b": 9, "t0": 0.5}, (0.45, 0.55), (0.15, 0.35), None),
}


def cmd_graph(args, cfg: RunConfig, out: Outcome):
    fam = args.family.lower()
    extra, tw, uw, sheets = GRAPH_DEFAULTS.get(fam, ({}, (0.2, 0.8), (0.005, 0.2), None))
    kw = {**extra, **_family_kwargs(args, cfg)}
    surf = surfaces.make_family(fam, **kw)
    sizes = (args.n // 4, args.n // 2, args.n)
    grids = {}

    def make(n):
        if n not in grids:
            grids[n] = local_graphs.extract_graph(surf, tw, uw, n, n, sheets)
        return grids[n]

    for name, fn in local_graphs.RESIDUALS.items():
        r = local_graphs.refinement_order(make, fn, sizes, min_order=None)
        out.values[f"residual_{name}"] = r.residuals[-1]
        out.check(f"order_{name}", r.ok, order=r.order, exact=r.exact, residuals=list(r.residuals))
    g = make(args.n)
    out.values.update(family=fam, sheets=g.sheets, nu_bound=g.nu_bound())
    if g.u[0] <= 0.01:
        tr = local_graphs.taylor_fit(g)
        out.values.update(taylor_selects=tr.selects, err_first=tr.err_first,
                          err_second=tr.err_second, err_c_phi=tr.err_cphi)
    T, U = np.meshgrid(g.t, g.u, indexing="ij")
    rows = ((j, t, u, p, n) for j in range(g.sheets)
            for t, u, p, n in zip(T.ravel(), U.ravel(), g.phi[j].ravel(), g.nu[j].ravel()))
    out.files.append(write_csv(Path(cfg.out_dir) / f"graph_{fam}.csv",
                               ("sheet", "t", "u", "phi", "nu"), rows))


def cmd_vertex(args, cfg: RunConfig, out: Outcome):
    sol = vertex.vertex_mode(args.N)
    path = write_csv(Path(cfg.out_dir) / f"vertex_N{args.N}.csv", ("theta", "f", "g"), sol.rows())
    out.files.append(path)
    d0, dpi = sol.endpoint_slopes()
    out.values.update(N=args.N, residual=sol.residual, method=sol.method,
                      collocation_gap=sol.collocation_gap, zeros=sol.zero_count())
    out.check("equation", sol.residual < cfg.residual_tol, residual=sol.residual)
    out.check("boundary", max(abs(d0), abs(dpi)) < 1e-8, slopes=[d0, dpi])
    out.check("collocation", sol.collocation_gap < 1e-7, gap=sol.collocation_gap)


def cmd_identities(args, cfg: RunConfig, out: Outcome):
    res = geometry.identity_suite(cfg.n_points, cfg.seed, cfg.L or 1.0)
    for k, v in res.items():
        out.values[k] = v
        out.check(k, v < cfg.identity_tol, value=v)


COMMANDS = {"period": cmd_period, "surface": cmd_surface, "verify": cmd_verify,
            "energy": cmd_energy, "limit": cmd_limit, "graph": cmd_graph,
            "vertex": cmd_vertex, "identities": cmd_identities}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="print the report as JSON")
    common.add_argument("--config", help="key=value file with RunConfig defaults")
    common.add_argument("--out-dir", dest="out_dir")
    common.add_argument("--seed", type=int)
    common.add_argument("--L", type=float, help="circle length")
    common.add_argument("--grid", type=int, help="samples per parameter direction")

    ap = argparse.ArgumentParser(prog="phclab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("period", parents=[common], help="cone oscillator periods")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--c", type=float)
    g.add_argument("--scan", type=int, metavar="N")
    g.add_argument("--rational", type=int, nargs=2, metavar=("A", "B"))

    fam = argparse.ArgumentParser(add_help=False)
    fam.add_argument("--family", required=True, choices=surfaces.FAMILIES)
    fam.add_argument("--param", action="append", metavar="KEY=VALUE",
                     help="family parameter, repeatable")

    p = sub.add_parser("surface", parents=[common, fam], help="sample a surface to CSV")
    p.add_argument("--out")
    sub.add_parser("verify", parents=[common, fam], help="J-invariance residual")
    p = sub.add_parser("energy", parents=[common, fam], help="local energy profiles")
    p.add_argument("--center", type=float, default=0.0)
    p.add_argument("--smooth", action="store_true")
    p.add_argument("--smax", type=float, default=0.4)
    p.add_argument("--points", type=int, default=6)
    p = sub.add_parser("limit", parents=[common, fam], help="dilation limit data")
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--s", type=float, default=0.05)
    p = sub.add_parser("graph", parents=[common, fam], help="graph equations near the circle")
    p.add_argument("--n", type=int, default=64)
    p = sub.add_parser("vertex", parents=[common], help="angular vertex mode")
    p.add_argument("--N", type=int, required=True)
    sub.add_parser("identities", parents=[common], help="pointwise geometry identities")
    return ap


def make_config(args) -> RunConfig:
    base = RunConfig.from_file(args.config) if args.config else {}
    env = os.environ.get("PHC_LAB_THREADS")
    if env:
        base["threads"] = max(1, int(env))
    for name in ("out_dir", "seed", "L", "grid"):
        v = getattr(args, name, None)
        if v is not None:
            base[name] = v
    return RunConfig(**base)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        cfg = make_config(args)
    except (OSError, ValueError) as e:
        print(f"phclab: {e}", file=sys.stderr)
        return 2
    if args.command == "vertex" and args.N < 0:
        print("phclab: --N must be non-negative", file=sys.stderr)
        return 2
    out = Outcome(args.command)
    start = time.perf_counter()
    try:
        COMMANDS[args.command](args, cfg, out)
    except UsageError as e:
        print(f"phclab: {e}", file=sys.stderr)
        return 2
    except (PhcError, ValueError) as e:
        out.check("run", False, error=type(e).__name__, message=str(e))
    out.values["seconds"] = round(time.perf_counter() - start, 3)
    out.emit(args.json)
    return 0 if out.ok else 1


if __name__ == "__main__":
    sys.exit(main())
