"""Integrals of omega, dt^df and dphi^dh over pieces of the example surfaces.

Regions are described by a level function F on S^1 x B^3 with F <= 0 inside.
Integration runs in parameter space: an adaptive outer quadrature over s1 and,
for each s1, an exact split of the s2 line at the roots of F followed by
Gauss-Legendre on every sub-interval lying inside the region.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from . import geometry as geo
from .cone_dynamics import ConeSolution
from .errors import RegionClipFailure
from .surfaces import ParamSurface, form_matrix

N_GL = 24
N_SCAN = 256
MAX_CROSSINGS = 64


def wrap(dt, L):
    """Signed circle difference in [-L/2, L/2)."""
    return (np.asarray(dt, dtype=float) + 0.5 * L) % L - 0.5 * L


@dataclass(frozen=True)
class Region:
    """Inside is ``level(points) <= 0``; ``cuts`` are extra kink locations."""

    name: str
    level: Callable
    cuts: tuple = ()
    weight: Optional[Callable] = None


def ball(t0: float, r: float, L: float = 1.0) -> Region:
    """The 4-ball of radius r about (t0, 0, 0, 0)."""
    def level(p):
        return wrap(p[..., 0] - t0, L) ** 2 + np.sum(p[..., 1:] ** 2, axis=-1) - r * r

    return Region(f"ball({t0},{r})", level)


def tube(r: float) -> Region:
    """S^1 x (3-ball of radius r)."""
    def level(p):
        return np.sum(p[..., 1:] ** 2, axis=-1) - r * r

    return Region(f"tube({r})", level)


def omega_region(delta: float, s: float) -> Region:
    """{|h| <= s^3, rho <= sqrt(delta), |z| <= delta}."""
    def level(p):
        x, y, z = p[..., 1], p[..., 2], p[..., 3]
        rho2 = x * x + y * y
        return np.maximum.reduce([np.abs(z * rho2) - s**3, np.sqrt(rho2) - math.sqrt(delta),
                                  np.abs(z) - delta])

    return Region(f"omega({delta},{s})", level)


def smoothstep_cutoff(x):
    """1 on [0,1], 0 on [2, inf), cubic smoothstep in between."""
    y = np.clip(np.asarray(x, dtype=float) - 1.0, 0.0, 1.0)
    return 1.0 - y * y * (3.0 - 2.0 * y)


def smooth_ball(t0: float, s: float, L: float = 1.0) -> Region:
    """Ball of radius 2s weighted by chi(r/s); r = s is a kink of the weight."""
    def radius(p):
        return np.sqrt(wrap(p[..., 0] - t0, L) ** 2 + np.sum(p[..., 1:] ** 2, axis=-1))

    return Region(f"smooth({t0},{s})", lambda p: radius(p) - 2.0 * s,
                  cuts=(lambda p: radius(p) - s,),
                  weight=lambda p: smoothstep_cutoff(radius(p) / s))


def everywhere() -> Region:
    return Region("all", lambda p: -np.ones(p.shape[:-1]))


def _density(surface: ParamSurface, form: str):
    if form == "area":
        def dens(s1, s2):
            _, t1, t2 = surface.sample(s1, s2)
            g11 = np.einsum("...i,...i->...", t1, t1)
            g22 = np.einsum("...i,...i->...", t2, t2)
            g12 = np.einsum("...i,...i->...", t1, t2)
            return np.sqrt(np.maximum(g11 * g22 - g12 * g12, 0.0))
        return dens
    form_matrix(form, np.zeros(4))  # validates the tag

    def dens(s1, s2):
        return surface.pullback(form, s1, s2)

    return dens


@dataclass
class _Inner:
    surface: ParamSurface
    density: Callable
    region: Region
    a2: float
    b2: float
    n_gl: int = N_GL
    n_scan: int = N_SCAN
    nodes: np.ndarray = field(init=False)
    wts: np.ndarray = field(init=False)

    def __post_init__(self):
        self.nodes, self.wts = np.polynomial.legendre.leggauss(self.n_gl)

    def _roots(self, fn, s1, xs, vals):
        out = []
        idx = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
        if idx.size > MAX_CROSSINGS:
            raise RegionClipFailure(f"{idx.size} boundary crossings on one parameter line")
        scalar = lambda x: float(fn(self.surface.sample(s1, x)[0]))
        for i in idx:
            try:
                out.append(brentq(scalar, xs[i], xs[i + 1], xtol=1e-15, rtol=1e-14))
            except ValueError as exc:
                raise RegionClipFailure(str(exc)) from exc
        return out

    def __call__(self, s1: float) -> float:
        xs = np.linspace(self.a2, self.b2, self.n_scan)
        pts = self.surface.sample(s1, xs)[0]
        knots = [self.a2, self.b2]
        for fn in (self.region.level,) + tuple(self.region.cuts):
            knots += self._roots(fn, s1, xs, fn(pts))
        knots = np.unique(knots)
        total = 0.0
        for lo, hi in zip(knots[:-1], knots[1:]):
            if hi - lo <= 0:
                continue
            mid = 0.5 * (lo + hi)
            if self.region.level(self.surface.sample(s1, mid)[0]) > 0:
                continue
            x = 0.5 * (hi - lo) * self.nodes + mid
            vals = self.density(s1, x)
            if self.region.weight is not None:
                vals = vals * self.region.weight(self.surface.sample(s1, x)[0])
            total += 0.5 * (hi - lo) * float(np.dot(self.wts, vals))
        return total


def _support(surface, region, domain, n=N_SCAN):
    """s1-intervals (padded by one cell) on which the region meets the surface."""
    (a1, b1), (a2, b2) = domain
    s1 = np.linspace(a1, b1, n)
    s2 = np.linspace(a2, b2, n)
    S1, S2 = np.meshgrid(s1, s2, indexing="ij")
    pts = surface.sample(S1, S2)[0]
    hit = np.any(region.level(pts) <= 0, axis=1)
    if not hit.any():
        return []
    hit = hit | np.roll(hit, 1) | np.roll(hit, -1)
    hit[0] |= hit[1]
    hit[-1] |= hit[-2]
    out = []
    i = 0
    while i < n:
        if hit[i]:
            j = i
            while j + 1 < n and hit[j + 1]:
                j += 1
            out.append((s1[max(i - 1, 0)], s1[min(j + 1, n - 1)]))
            i = j + 1
        else:
            i += 1
    return out


@dataclass(frozen=True)
class IntegralResult:
    value: float
    error: float


def integrate_form(surface: ParamSurface, form: str = "omega", region: Optional[Region] = None,
                   epsrel: float = 1e-11, epsabs: float = 1e-13, n_gl: int = N_GL,
                   with_error: bool = False):
    """Integral of the pulled-back form (or 'area') over surface ∩ region.

    The density is oriented so that omega integrates non-negatively.
    """
    region = region or everywhere()
    dom = surface.closure_domain
    dens = _density(surface, form)
    inner = _Inner(surface, dens, region, dom[1][0], dom[1][1], n_gl=n_gl)
    coarse = _Inner(surface, dens, region, dom[1][0], dom[1][1], n_gl=max(n_gl // 2, 4))
    total, err = 0.0, 0.0
    for lo, hi in _support(surface, region, dom):
        val, e = quad(inner, lo, hi, epsabs=epsabs, epsrel=epsrel, limit=400)
        total += val
        err += e
        # mesh refinement estimate from a few representative lines
        probe = np.linspace(lo, hi, 5)[1:-1]
        err += (hi - lo) * max(abs(inner(x) - coarse(x)) for x in probe)
    if with_error:
        return IntegralResult(total, err)
    return total


# -- cone energy -------------------------------------------------------------

@dataclass(frozen=True)
class DeltaC:
    delta: float
    dtdf_part: float
    dphidh_part: float
    error: float = 0.0


def delta_c(cone: ConeSolution, n: int = 4096) -> DeltaC:
    """omega-energy per unit r^3 of the cone, split into its two pieces.

    The dt^df piece is the boundary term of ``-f dt`` on the unit sphere,
    ``(3/4) int (2u^2 - c/u) |u''| dtau = int (1/6) u^-1 (2u^2 - c/u)^2 dtau``
    over one closed loop (periodic trapezoid rule); the dphi^dh piece is
    ``2 pi c`` times the number of turns in phi.
    """
    c = cone.c
    dphidh = 2.0 * math.pi * cone.winding * c

    def trap(m):
        tau = np.linspace(0.0, cone.tau_max, m * cone.winding, endpoint=False)
        u, _ = cone.u_and_du(tau)
        vals = (2.0 * u * u - c / u) ** 2 / (6.0 * u)
        return float(vals.mean() * cone.tau_max)

    a, b = trap(n // 2), trap(n)
    return DeltaC(delta=b + dphidh, dtdf_part=b, dphidh_part=dphidh, error=abs(a - b))


def dtdf_lower_bounds(c: float) -> dict:
    """The two lower bounds for the dt^df piece at small c (None when not applicable)."""
    s3 = math.sqrt(3.0)
    return {
        "uniform": 1.0 / (576.0 * s3) if c < s3 / 24.0 else None,
        "graded": (1.0 - 12.0 * s3 * c) ** 2 / (144.0 * s3) if c < s3 / 12.0 else None,
    }


# -- profiles ----------------------------------------------------------------

@dataclass
class EnergyReport:
    s: np.ndarray
    sigma: np.ndarray
    err: np.ndarray
    monotone: bool
    zeta_sigma: float
    zeta_area: float
    area: Optional[np.ndarray] = None
    mu: Optional[np.ndarray] = None
    delta: Optional[DeltaC] = None

    @property
    def scaled(self) -> np.ndarray:
        return self.sigma / self.s**3

    @property
    def mu_scaled(self):
        return None if self.mu is None else self.mu / self.s**3

    def rows(self):
        mu = self.mu if self.mu is not None else np.full_like(self.s, np.nan)
        for i, s in enumerate(self.s):
            yield (s, self.sigma[i], self.sigma[i] / s**3, mu[i], mu[i] / s**3, self.err[i])


def monotone_within(values, errors, slack: float = 1e-12) -> bool:
    v = np.asarray(values, dtype=float)
    e = np.asarray(errors, dtype=float)
    return bool(np.all(np.diff(v) >= -(e[:-1] + e[1:]) - slack * np.abs(v[1:])))


def sigma_profile(surface: ParamSurface, t0: float, s_grid: Sequence[float],
                  cutoff: str = "sharp", with_area: bool = True,
                  epsrel: float = 1e-11) -> EnergyReport:
    s = np.asarray(s_grid, dtype=float)
    if np.any(np.diff(s) <= 0):
        raise ValueError("s grid must be increasing")
    # beyond half the circle the wrapped ball stops being a ball
    if s[-1] >= 0.5 * surface.L:
        raise ValueError("radii must stay below L/2")
    sig, err, area = [], [], []
    for si in s:
        reg = ball(t0, si, surface.L) if cutoff == "sharp" else smooth_ball(t0, si, surface.L)
        res = integrate_form(surface, "omega", reg, epsrel=epsrel, with_error=True)
        sig.append(res.value)
        err.append(res.error)
        if with_area:
            area.append(integrate_form(surface, "area", ball(t0, si, surface.L), epsrel=epsrel))
    sig = np.array(sig)
    err = np.array(err)
    area_arr = np.array(area) if with_area else None
    scaled_err = err / s**3
    return EnergyReport(
        s=s, sigma=sig, err=err,
        monotone=monotone_within(sig / s**3, scaled_err, slack=1e-9),
        zeta_sigma=float(np.max(sig / s**3)),
        zeta_area=float(np.max(area_arr / s**2)) if with_area else float("nan"),
        area=area_arr,
    )


def mu_profile(surface: ParamSurface, s_grid: Sequence[float], delta: float = 0.125):
    """mu(s) = integral of dphi^dh over the surface inside omega_region(delta, s)."""
    if not 1.0 / 16.0 <= delta <= 1.0 / 8.0:
        raise ValueError("delta must lie in [1/16, 1/8]")
    s = np.asarray(s_grid, dtype=float)
    mu = np.array([integrate_form(surface, "dphi_dh", omega_region(delta, si)) for si in s])
    return mu, float(np.max(mu / s**3))


def e15_mu_range(c: float, delta: float = 0.125) -> float:
    """Largest s for which {|h| <= s^3} on the cone sits inside the region."""
    return delta * c ** (1.0 / 3.0)


def omega_nonnegative(surface: ParamSurface, n: int = 64) -> float:
    """Smallest oriented omega density relative to g * area (should be ~1)."""
    s1, s2 = surface.grid(n, n)
    pts, t1, t2 = surface.sample(s1, s2)
    w = surface.pullback("omega", s1, s2)
    g11 = np.einsum("ni,ni->n", t1, t1)
    g22 = np.einsum("ni,ni->n", t2, t2)
    g12 = np.einsum("ni,ni->n", t1, t2)
    da = np.sqrt(g11 * g22 - g12 * g12)
    return float(np.min(w / (geo.norm_g(pts) * da)))
