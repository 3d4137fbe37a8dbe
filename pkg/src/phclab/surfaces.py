"""Explicit pseudo-holomorphic surface families and J-invariance residuals.

Each family is a :class:`ParamSurface`: a map from a rectangle in
parameter space into S^1 x B^3 that returns points together with the exact
partial derivatives ``T1 = dX/ds1`` and ``T2 = dX/ds2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from . import geometry as geo
from .cone_dynamics import C_MAX, ConeSolution, accel
from .errors import DegenerateFrame, EmptyLevel, NonPeriodic, OutOfRange

S_MIN = 1e-3
SPLINE_NODES = 4096
FAMILIES = ("e13", "e14", "e15", "e16a", "e16b", "e16c", "e17")


@dataclass(frozen=True)
class ResidualReport:
    max: float
    mean: float
    worst: tuple
    count: int = 0

    def __post_init__(self):
        if self.max < 0 or self.mean < 0:
            raise ValueError("residuals are non-negative")


@dataclass(frozen=True)
class ParamSurface:
    family: str
    params: dict
    fn: Callable = field(repr=False)
    domain: tuple
    L: float = 1.0
    t0: float = 0.0
    orientation: float = 1.0
    periodic: bool = True  # s1 is an angle-like parameter that closes up
    is_cone: bool = False
    s2_floor: Optional[float] = None  # smallest s2 where the sampler is still finite

    @property
    def closure_domain(self):
        """Parameter rectangle used for integration; may reach Z when harmless."""
        if self.s2_floor is None:
            return self.domain
        return (self.domain[0], (self.s2_floor, self.domain[1][1]))

    def sample(self, s1, s2):
        """Points and frames at the (broadcast) parameter arrays."""
        s1, s2 = np.broadcast_arrays(np.asarray(s1, float), np.asarray(s2, float))
        pts, t1, t2 = self.fn(s1, s2)
        return pts, t1, t2

    def grid(self, n1: int = 64, n2: int = 64):
        (a1, b1), (a2, b2) = self.domain
        s1 = np.linspace(a1, b1, n1, endpoint=not self.periodic)
        s2 = np.linspace(a2, b2, n2)
        S1, S2 = np.meshgrid(s1, s2, indexing="ij")
        return S1.ravel(), S2.ravel()

    def pullback(self, form: str, s1, s2):
        """Oriented density of the pulled-back 2-form in ds1 ds2."""
        pts, t1, t2 = self.sample(s1, s2)
        mat = form_matrix(form, pts)
        val = np.einsum("...i,...ij,...j->...", t1, mat, t2)
        return self.orientation * val

    def with_domain(self, domain) -> "ParamSurface":
        out = ParamSurface(self.family, self.params, self.fn, tuple(domain), self.L,
                           self.t0, self.orientation, self.periodic, self.is_cone, self.s2_floor)
        for extra in ("cone", "profile"):
            if hasattr(self, extra):
                object.__setattr__(out, extra, getattr(self, extra))
        return out


def form_matrix(form: str, pts) -> np.ndarray:
    if form == "omega":
        return geo.omega_matrix(pts)
    if form == "dphi_dh":
        return geo.dphi_dh_matrix(pts)
    if form == "dt_df":
        return geo.dt_df_matrix(pts)
    raise ValueError(f"unknown form {form!r}")


def _stack(*cols):
    return np.stack(np.broadcast_arrays(*cols), axis=-1)


def _orient(fn, domain) -> float:
    (a1, b1), (a2, b2) = domain
    s1 = np.linspace(a1, b1, 7)[1:-1]
    s2 = np.linspace(a2, b2, 7)[1:-1]
    S1, S2 = np.meshgrid(s1, s2)
    pts, t1, t2 = fn(S1.ravel(), S2.ravel())
    w = np.einsum("ni,nij,nj->n", t1, geo.omega_matrix(pts), t2)
    return 1.0 if np.median(w) >= 0 else -1.0


def _build(family, params, fn, domain, L=1.0, t0=0.0, periodic=True, is_cone=False,
           s2_floor=None):
    return ParamSurface(family, dict(params), fn, tuple(domain), L, t0,
                        _orient(fn, domain), periodic, is_cone, s2_floor)


def make_e13(nu_angle: float = 0.0, L: float = 1.0, s_max: float = 1.0) -> ParamSurface:
    """The flat cylinder (t, s cos nu, s sin nu, 0)."""
    cn, sn = math.cos(nu_angle), math.sin(nu_angle)

    def fn(t, s):
        zero = np.zeros_like(s)
        pts = _stack(np.mod(t, L), s * cn, s * sn, zero)
        return pts, _stack(1.0 + zero, zero, zero, zero), _stack(zero, cn + zero, sn + zero, zero)

    return _build("e13", {"nu": nu_angle}, fn, ((0.0, L), (S_MIN, s_max * (1 - 1e-12))), L,
                  is_cone=True, s2_floor=0.0)


def make_e14(sign: int = 1, L: float = 1.0, s_max: float = 1.0) -> ParamSurface:
    """Half of the axis cylinder (t, 0, 0, sign*s)."""
    if sign not in (1, -1):
        raise OutOfRange("sign must be +1 or -1")

    def fn(t, s):
        zero = np.zeros_like(s)
        pts = _stack(np.mod(t, L), zero, zero, sign * s)
        return pts, _stack(1.0 + zero, zero, zero, zero), _stack(zero, zero, zero, sign + zero)

    return _build("e14", {"sign": sign}, fn, ((0.0, L), (S_MIN, s_max * (1 - 1e-12))), L,
                  is_cone=True, s2_floor=0.0)


def make_e15(cone: ConeSolution, sign: int = 1, t0: float = 0.0, L: float = 1.0,
             s_max: float = 1.0, check: bool = True) -> ParamSurface:
    """Cone over a closed orbit of the oscillator, vertex at (t0, 0).

    Parameters are (tau, s) with tau in [0, 2 pi * winding] and s the
    distance to the vertex.
    """
    if sign not in (1, -1):
        raise OutOfRange("sign must be +1 or -1")
    if check and cone.closure_error() > 1e-6:
        raise NonPeriodic("cone trajectory does not close")
    c = cone.c
    sc = math.sqrt(c)

    def fn(tau, s):
        u, du = cone.u_and_du(tau)
        ddu = accel(c, u)
        rho_hat = sc / np.sqrt(u)
        drho_hat = -0.5 * sc * du * u ** -1.5
        ct, st = np.cos(tau), np.sin(tau)
        t = np.mod(t0 + sign * s * 1.5 * du, L)
        pts = _stack(t, s * rho_hat * ct, s * rho_hat * st, sign * s * u)
        d_tau = _stack(sign * s * 1.5 * ddu,
                       s * (drho_hat * ct - rho_hat * st),
                       s * (drho_hat * st + rho_hat * ct),
                       sign * s * du)
        d_s = _stack(sign * 1.5 * du, rho_hat * ct, rho_hat * st, sign * u)
        return pts, d_tau, d_s

    params = {"c": c, "sign": sign, "t0": t0, "a": cone.a, "b": cone.b, "winding": cone.winding}
    surf = _build("e15", params, fn, ((0.0, cone.tau_max), (S_MIN, s_max * (1 - 1e-9))), L, t0,
                  is_cone=True, s2_floor=0.0)
    object.__setattr__(surf, "cone", cone)
    return surf


def _interval(fun, lo, hi, n=2000):
    """Largest sub-interval of [lo, hi] on which fun < 0, by scan + brentq."""
    xs = np.linspace(lo, hi, n)
    v = fun(xs)
    ok = np.nonzero(v < 0)[0]
    if not ok.size:
        return None
    i0, i1 = ok[0], ok[-1]
    a = xs[i0] if i0 == 0 else brentq(fun, xs[i0 - 1], xs[i0])
    b = xs[i1] if i1 == n - 1 else brentq(fun, xs[i1], xs[i1 + 1])
    return a, b


def make_e16(variant: str, cst: float, cst2: float, sign: int = 1, L: float = 1.0,
             margin: float = 1e-6) -> ParamSurface:
    """Leaves of the two orthogonal foliations.

    ``a``: {phi = cst, h = cst2}, parameters (t, rho).
    ``b``: {t = cst, f = cst2 > 0}, parameters (phi, z).
    ``c``: {t = cst, f = cst2 <= 0, sign*z > 0}, parameters (phi, rho).
    """
    variant = variant.lower().removeprefix("e16")
    if variant == "a":
        hc = float(cst2)
        if abs(hc) >= 2.0 / 3.0**1.5:
            raise EmptyLevel(f"h = {hc!r} does not meet the unit ball")
        cp, sp = math.cos(cst), math.sin(cst)
        if hc == 0.0:
            rng = (S_MIN, 1.0 - margin)
        else:
            rng = _interval(lambda r: r * r + hc * hc / r**4 - 1.0, 1e-3, 1.0)
            if rng is None:
                raise EmptyLevel("level set misses the ball")
            rng = (rng[0] + margin, rng[1] - margin)

        def fn(t, r):
            zero = np.zeros_like(r)
            pts = _stack(np.mod(t, L), r * cp, r * sp, hc / r**2)
            return (pts, _stack(1.0 + zero, zero, zero, zero),
                    _stack(zero, cp + zero, sp + zero, -2.0 * hc / r**3))

        return _build("e16a", {"phi": cst, "h": hc}, fn, ((0.0, L), rng), L)

    if variant == "b":
        fc = float(cst2)
        if not 0.0 < fc < 0.5:
            raise EmptyLevel("variant b needs 0 < f < 1/2")
        zmax = math.sqrt((1.0 - 2.0 * fc) / 3.0) - margin
        tc = float(cst) % L

        def fn(ph, z):
            rho = np.sqrt(2.0 * fc + 2.0 * z * z)
            c, s = np.cos(ph), np.sin(ph)
            zero = np.zeros_like(z)
            pts = _stack(tc + zero, rho * c, rho * s, z)
            drho = 2.0 * z / rho
            return pts, _stack(zero, -rho * s, rho * c, zero), _stack(zero, drho * c, drho * s, 1.0 + zero)

        return _build("e16b", {"t": tc, "f": fc}, fn, ((0.0, 2 * math.pi), (-zmax, zmax)), L)

    if variant == "c":
        fc = float(cst2)
        if not -1.0 < fc <= 0.0:
            raise EmptyLevel("variant c needs -1 < f <= 0")
        if sign not in (1, -1):
            raise OutOfRange("sign must be +1 or -1")
        rmax = math.sqrt((2.0 + 2.0 * fc) / 3.0) - margin
        tc = float(cst) % L

        def fn(ph, r):
            z = sign * np.sqrt(0.5 * r * r - fc)
            c, s = np.cos(ph), np.sin(ph)
            zero = np.zeros_like(r)
            pts = _stack(tc + zero, r * c, r * s, z)
            return pts, _stack(zero, -r * s, r * c, zero), _stack(zero, c, s, 0.5 * r / z)

        return _build("e16c", {"t": tc, "f": fc, "sign": sign}, fn,
                      ((0.0, 2 * math.pi), (S_MIN, rmax)), L)

    raise ValueError(f"unknown variant {variant!r}")


@dataclass(frozen=True)
class SpiralProfile:
    """z(s) for the spiral family, from (1 + 2kz) s z' + 2z = k s^2."""

    k: float
    s0: float
    s_max: float
    sol: object = field(repr=False)
    spline: object = field(default=None, repr=False)

    def series(self, s):
        k = self.k
        return 0.25 * k * s**2 - k**3 / 24.0 * s**4

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = np.where(s <= self.s0, self.series(s), 0.0)
        big = s > self.s0
        if np.any(big):
            out[big] = self.spline(s[big])
        return out

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        k = self.k
        z = self(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            from_ode = (k * s * s - 2.0 * z) / ((1.0 + 2.0 * k * z) * s)
        return np.where(s <= self.s0, 0.5 * k * s - k**3 / 6.0 * s**3, from_ode)

    def ode_residual(self, s, h: float = 1e-3):
        """Residual of the profile ODE with z' from a 5-point stencil of z."""
        s = np.asarray(s, dtype=float)
        z = self(s)
        dz = (self(s - 2 * h) - 8 * self(s - h) + 8 * self(s + h) - self(s + 2 * h)) / (12 * h)
        return (1.0 + 2.0 * self.k * z) * s * dz + 2.0 * z - self.k * s * s


def spiral_profile(k: float, s0: float = 1e-3, s_max: float = 0.9) -> SpiralProfile:
    def rhs(s, y):
        z = y[0]
        return [(k * s * s - 2.0 * z) / ((1.0 + 2.0 * k * z) * s)]

    z0 = 0.25 * k * s0**2 - k**3 / 24.0 * s0**4
    sol = solve_ivp(rhs, (s0, s_max), [z0], method="DOP853", rtol=1e-13, atol=1e-15,
                    dense_output=True)
    if not sol.success:
        raise RuntimeError(sol.message)
    # the dense output is slow to call point by point; a Hermite spline through
    # it (values and exact slopes) is accurate to rounding and vectorizes in C
    nodes = np.linspace(s0, s_max, SPLINE_NODES)
    z = sol.sol(nodes)[0]
    spline = CubicHermiteSpline(nodes, z, rhs(nodes, [z])[0], extrapolate=True)
    return SpiralProfile(k=k, s0=s0, s_max=s_max, sol=sol, spline=spline)


def make_e17(q: int, p: int, alpha: float = 0.0, L: float = 2 * math.pi,
             s_max: float = 0.9) -> ParamSurface:
    """Spiral family: t = q psi L/(2 pi), polar angle p psi + alpha, z = z(s).

    The height profile solves ``(1 + 2kz) s z' + 2z = k s^2`` with
    ``k = 2 pi p / (q L)``; for ``L = 2 pi`` this is ``(q + 2pz) s z' + 2qz = p s^2``.
    """
    if q <= 0:
        raise OutOfRange("q must be positive")
    if math.gcd(p, q) != 1:
        raise OutOfRange("p and q must be coprime")
    k = 2.0 * math.pi * p / (q * L)
    prof = spiral_profile(k, s_max=s_max) if p != 0 else None
    if prof is not None and s_max**2 + float(prof(np.array([s_max]))[0]) ** 2 >= 1.0:
        raise OutOfRange("s_max leaves the unit ball")
    dt = q * L / (2.0 * math.pi)

    def fn(psi, s):
        ang = p * psi + alpha
        c, sn = np.cos(ang), np.sin(ang)
        zero = np.zeros_like(s)
        if prof is None:
            z, dz = zero, zero
        else:
            z, dz = prof(s), prof.derivative(s)
        pts = _stack(np.mod(dt * psi, L), s * c, s * sn, z)
        return pts, _stack(dt + zero, -p * s * sn, p * s * c, zero), _stack(zero, c, sn, dz)

    surf = _build("e17", {"q": q, "p": p, "alpha": alpha, "k": k}, fn,
                  ((0.0, 2 * math.pi), (S_MIN, s_max)), L, is_cone=(p == 0), s2_floor=0.0)
    object.__setattr__(surf, "profile", prof)
    return surf


def make_perturbed_e13(eps: float = 0.1, nu_angle: float = 0.0, L: float = 1.0) -> ParamSurface:
    """E13 tilted out of z = 0; not J-invariant (negative control)."""
    cn, sn = math.cos(nu_angle), math.sin(nu_angle)

    def fn(t, s):
        zero = np.zeros_like(s)
        pts = _stack(np.mod(t, L), s * cn, s * sn, eps * s)
        return pts, _stack(1.0 + zero, zero, zero, zero), _stack(zero, cn + zero, sn + zero, eps + zero)

    return _build("e13_perturbed", {"eps": eps}, fn, ((0.0, L), (S_MIN, 0.99)), L)


def frame_residual(t1, t2, jt1) -> np.ndarray:
    """Distance of J T1 from span(T1, T2), relative to |J T1|."""
    g11 = np.einsum("ni,ni->n", t1, t1)
    g12 = np.einsum("ni,ni->n", t1, t2)
    g22 = np.einsum("ni,ni->n", t2, t2)
    det = g11 * g22 - g12 * g12
    scale = g11 * g22
    if np.any(det <= 1e-20 * np.maximum(scale, 1e-300)):
        raise DegenerateFrame("tangent vectors are (nearly) parallel")
    b1 = np.einsum("ni,ni->n", jt1, t1)
    b2 = np.einsum("ni,ni->n", jt1, t2)
    a1 = (g22 * b1 - g12 * b2) / det
    a2 = (g11 * b2 - g12 * b1) / det
    resid = jt1 - a1[:, None] * t1 - a2[:, None] * t2
    nrm = np.linalg.norm(jt1, axis=1)
    return np.linalg.norm(resid, axis=1) / nrm


def holomorphy_residual(surface: ParamSurface, samples=None, n: int = 64) -> ResidualReport:
    s1, s2 = samples if samples is not None else surface.grid(n, n)
    pts, t1, t2 = surface.sample(np.ravel(s1), np.ravel(s2))
    jt1 = geo.apply_jay(pts, t1)
    r = frame_residual(t1, t2, jt1)
    i = int(np.argmax(r))
    return ResidualReport(float(r.max()), float(r.mean()),
                          (float(np.ravel(s1)[i]), float(np.ravel(s2)[i])), r.size)


def frame_consistency(surface: ParamSurface, n: int = 16, h: float = 1e-5) -> float:
    """Largest mismatch between the frames and centered differences of the points."""
    (a1, b1), (a2, b2) = surface.domain
    s1 = np.linspace(a1 + 2 * h, b1 - 2 * h, n)
    s2 = np.linspace(a2 + 2 * h, b2 - 2 * h, n)
    S1, S2 = (a.ravel() for a in np.meshgrid(s1, s2))
    _, t1, t2 = surface.sample(S1, S2)

    def diff(p, m):
        d = p - m
        d[:, 0] = (d[:, 0] + 0.5 * surface.L) % surface.L - 0.5 * surface.L
        return d / (2 * h)

    fd1 = diff(surface.sample(S1 + h, S2)[0], surface.sample(S1 - h, S2)[0])
    fd2 = diff(surface.sample(S1, S2 + h)[0], surface.sample(S1, S2 - h)[0])
    scale = max(np.abs(t1).max(), np.abs(t2).max(), 1.0)
    return float(max(np.abs(fd1 - t1).max(), np.abs(fd2 - t2).max()) / scale)


def make_family(name: str, **kw) -> ParamSurface:
    """Factory used by the CLI; ``name`` is one of FAMILIES."""
    name = name.lower()
    if name == "e13":
        return make_e13(kw.get("nu", 0.0), L=kw.get("L", 1.0))
    if name == "e14":
        return make_e14(int(kw.get("sign", 1)), L=kw.get("L", 1.0))
    if name == "e15":
        if "c" in kw and kw["c"] is not None and float(kw["c"]) >= C_MAX:
            cone = ConeSolution.fixed_point()
        else:
            cone = ConeSolution.from_period(int(kw.get("a", 6)), int(kw.get("b", 7)))
        return make_e15(cone, int(kw.get("sign", 1)), kw.get("t0", 0.0), L=kw.get("L", 1.0))
    if name in ("e16a", "e16b", "e16c"):
        defaults = {"e16a": (0.3, 0.05), "e16b": (0.2, 0.1), "e16c": (0.2, -0.1)}[name]
        return make_e16(name, kw.get("cst", defaults[0]), kw.get("cst2", defaults[1]),
                        int(kw.get("sign", 1)), L=kw.get("L", 1.0))
    if name == "e17":
        return make_e17(int(kw.get("q", 2)), int(kw.get("p", 1)), kw.get("alpha", 0.0),
                        L=kw.get("L", 2 * math.pi))
    raise ValueError(f"unknown family {name!r}")
