"""The cone-generating oscillator u'' + (4/9) u - (2/9) c u^-2 = 0.

Solutions are normalized by the conserved energy

    E(u, p) = (9/4) p^2 + u^2 + c/u = 1,      p = u',

which admits positive periodic solutions for ``0 < c <= C_MAX = 2/3^(3/2)``.
The period is computed two independent ways: by Gauss-Chebyshev quadrature
of the turning-point integral and by integrating the ODE around one loop.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import BlowUp, EndpointDegenerate, NonPeriodic, OutOfRange, TargetOutOfRange

C_MAX = 2.0 / 3.0**1.5
U_FIXED = 1.0 / math.sqrt(3.0)
T_LIMIT = math.sqrt(3.0) * math.pi  # period as c -> C_MAX

ODE_TOL = 1e-11
QUAD_TOL = 1e-13
SCAN_LO = 1e-4
SCAN_HI = C_MAX - 1e-6
SCAN_POINTS = 200


@dataclass(frozen=True)
class ConeParam:
    c: float

    def __post_init__(self):
        c = float(self.c)
        if not (0.0 < c <= C_MAX * (1 + 1e-15)):
            raise OutOfRange(f"c = {c!r} outside (0, 2/3^(3/2)]")
        object.__setattr__(self, "c", min(c, C_MAX))

    @property
    def alpha(self) -> float:
        return C_MAX - self.c

    @property
    def is_endpoint(self) -> bool:
        return self.c >= C_MAX


def _param(c) -> ConeParam:
    return c if isinstance(c, ConeParam) else ConeParam(c)


@dataclass(frozen=True)
class CubicRoots:
    """Roots of x^3 - x + c: two positive ones and a negative one."""

    u_min: float
    u_max: float
    u_neg: float

    @property
    def center(self) -> float:
        return 0.5 * (self.u_min + self.u_max)

    @property
    def half_width(self) -> float:
        return 0.5 * (self.u_max - self.u_min)


@dataclass(frozen=True)
class Trajectory:
    c: float
    tau: np.ndarray
    u: np.ndarray
    p: np.ndarray
    sol: object = field(default=None, repr=False, compare=False)

    def energy(self) -> np.ndarray:
        return energy(self.c, self.u, self.p)

    def energy_drift(self) -> float:
        e = self.energy()
        return float(np.max(np.abs(e - e[0])))

    def __call__(self, tau):
        """(u, u') at arbitrary tau via the dense output."""
        tau = np.asarray(tau, dtype=float)
        y = self.sol.sol(tau.ravel())
        return y[0].reshape(tau.shape), y[1].reshape(tau.shape)


@dataclass(frozen=True)
class PeriodResult:
    T: float
    method: str
    error: float
    degenerate: bool = False

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("a period is positive")

    @property
    def half_period(self) -> float:
        return 0.5 * self.T


def energy(c, u, p):
    u = np.asarray(u, dtype=float)
    p = np.asarray(p, dtype=float)
    return 2.25 * p * p + u * u + c / u


def accel(c, u):
    """u'' from the equation of motion."""
    return -4.0 / 9.0 * u + 2.0 / 9.0 * c / (u * u)


def cubic_roots(c) -> CubicRoots:
    c = _param(c).c
    # trigonometric form for the depressed cubic, then Newton polish
    arg = np.clip(-1.5 * math.sqrt(3.0) * c, -1.0, 1.0)
    a = math.acos(arg) / 3.0
    k = 2.0 / math.sqrt(3.0)
    roots = [k * math.cos(a - 2.0 * math.pi * j / 3.0) for j in range(3)]
    polished = []
    for r in roots:
        for _ in range(3):
            d = 3 * r * r - 1
            if abs(d) < 1e-6:
                break
            r -= (r**3 - r + c) / d
        polished.append(r)
    u_max, u_min, u_neg = polished[0], polished[1], polished[2]
    if c >= C_MAX:
        u_min = u_max = U_FIXED
    return CubicRoots(u_min=min(u_min, u_max), u_max=max(u_min, u_max), u_neg=u_neg)


def _half_period_nodes(ratio: float, n: int) -> float:
    k = np.arange(1, n + 1)
    y = np.cos((2 * k - 1) * np.pi / (2 * n))
    vals = np.sqrt((1.0 + ratio * y) / (1.0 + ratio * y / 3.0))
    return math.sqrt(3.0) / 2.0 * np.pi / n * float(vals.sum())


def half_period_quad(c, tol: float = QUAD_TOL, n_max: int = 1 << 18) -> PeriodResult:
    """Half period by quadrature; ``.T`` of the result is the full period.

    After the substitution ``x = lambda + delta y`` the half period is

        (sqrt(3)/2) int_{-1}^{1} (1-y^2)^(-1/2) sqrt((1 + r y)/(1 + r y/3)) dy

    with ``r = delta/lambda``; Gauss-Chebyshev nodes integrate the weight
    exactly and the node count doubles until successive values agree.
    """
    cp = _param(c)
    if cp.is_endpoint:
        return PeriodResult(T=T_LIMIT, method="quadrature", error=0.0, degenerate=True)
    roots = cubic_roots(cp)
    ratio = roots.half_width / roots.center
    n = 16
    prev = _half_period_nodes(ratio, n)
    while True:
        n *= 2
        cur = _half_period_nodes(ratio, n)
        err = abs(cur - prev)
        if err <= tol * cur or n >= n_max:
            break
        prev = cur
    return PeriodResult(T=2.0 * cur, method="quadrature", error=2.0 * err)


def _rhs(c):
    def f(_, y):
        return [y[1], accel(c, y[0])]

    return f


def integrate(c, u0: float, p0: float, tau_span, *, level: Optional[float] = 1.0,
              rtol: float = ODE_TOL, atol: float = ODE_TOL, t_eval=None) -> Trajectory:
    """Adaptive DOP853 integration of the oscillator, no energy projection."""
    cp = _param(c)
    if u0 <= 0:
        raise BlowUp("initial u must be positive")
    if level is not None and abs(energy(cp.c, u0, p0) - level) > 1e-9:
        raise ValueError("initial condition is not on the requested energy level")

    def hit_zero(_, y):
        return y[0] - 1e-8

    hit_zero.terminal = True
    sol = solve_ivp(_rhs(cp.c), tau_span, [u0, p0], method="DOP853", rtol=rtol, atol=atol,
                    dense_output=True, events=hit_zero, t_eval=t_eval)
    if sol.status == 1:
        raise BlowUp("trajectory reached u = 0")
    if not sol.success:
        raise BlowUp(sol.message)
    return Trajectory(c=cp.c, tau=sol.t, u=sol.y[0], p=sol.y[1], sol=sol)


def period_from_ode(c, rtol: float = ODE_TOL) -> PeriodResult:
    """Return time to the section {u = u_min, p = 0}, located on p(tau) = 0."""
    cp = _param(c)
    if cp.is_endpoint:
        raise EndpointDegenerate("the constant solution has no return map")
    roots = cubic_roots(cp)
    guess = half_period_quad(cp).T

    def back(_, y):
        return y[1]

    back.direction = 1.0
    sol = solve_ivp(_rhs(cp.c), (0.0, 1.5 * guess), [roots.u_min, 0.0], method="DOP853",
                    rtol=rtol, atol=rtol, events=back, dense_output=True)
    hits = sol.t_events[0][sol.t_events[0] > 0.25 * guess]
    if not hits.size:
        raise BlowUp("no return to the section within 1.5 quadrature periods")
    t_ev = float(hits[0])
    # polish the event time with a bracketed solve on the dense output
    p_of = lambda s: sol.sol(s)[1]
    a, b = t_ev - 1e-3 * guess, min(t_ev + 1e-3 * guess, sol.t[-1])
    if p_of(a) < 0 < p_of(b):
        t_ev = brentq(p_of, a, b, xtol=1e-15, rtol=1e-15)
    u_back = float(sol.sol(t_ev)[0])
    return PeriodResult(T=t_ev, method="ode", error=abs(u_back - roots.u_min) + rtol * t_ev)


def period_series(alpha: float) -> PeriodResult:
    """Small-alpha expansion about the fixed point, alpha = C_MAX - c."""
    if alpha < 0:
        raise OutOfRange("alpha must be non-negative")
    T = T_LIMIT * (1.0 - alpha / (4.0 * math.sqrt(3.0)))
    return PeriodResult(T=T, method="series", error=alpha**1.5)


@lru_cache(maxsize=4)
def period_table(n: int = SCAN_POINTS, lo: float = SCAN_LO, hi: float = SCAN_HI):
    cs = np.linspace(lo, hi, n)
    Ts = np.array([half_period_quad(c).T for c in cs])
    return cs, Ts


def find_c_for_target(T_target: float, table=None) -> ConeParam:
    cs, Ts = table if table is not None else period_table()
    lo, hi = float(Ts.min()), float(Ts.max())
    if not (lo < T_target < hi):
        raise TargetOutOfRange(
            f"target period {T_target!r} outside scanned range [{lo!r}, {hi!r}]", lo, hi)
    d = Ts - T_target
    idx = np.nonzero(np.sign(d[:-1]) != np.sign(d[1:]))[0]
    if not idx.size:
        raise TargetOutOfRange("no sign change of T(c) - target in the table", lo, hi)
    i = int(idx[0])
    fn = lambda c: half_period_quad(c).T - T_target
    c = brentq(fn, cs[i], cs[i + 1], xtol=1e-15, rtol=8.9e-16, maxiter=200)
    return ConeParam(c)


def find_c_for_period(a: int, b: int) -> ConeParam:
    """c whose solution has period 2 pi a / b."""
    if a <= 0 or b <= 0:
        raise OutOfRange("a and b must be positive")
    if math.gcd(a, b) != 1:
        raise OutOfRange("a and b must be coprime")
    return find_c_for_target(2.0 * math.pi * a / b)


@dataclass(frozen=True)
class ConeSolution:
    """A closing solution of the oscillator together with its integers.

    The period is ``2 pi a / b``; phi = tau closes up after ``winding`` full
    turns, during which u runs through ``b`` oscillations.  For the fixed
    point (c = C_MAX) the solution is constant and ``winding`` is 1.
    """

    c: float
    a: int
    b: int
    trajectory: Optional[Trajectory] = field(default=None, repr=False, compare=False)
    period: Optional[PeriodResult] = None

    @property
    def winding(self) -> int:
        return 1 if self.c >= C_MAX else self.a

    @property
    def tau_max(self) -> float:
        return 2.0 * math.pi * self.winding

    @property
    def is_constant(self) -> bool:
        return self.c >= C_MAX

    def u_and_du(self, tau):
        tau = np.asarray(tau, dtype=float)
        if self.is_constant:
            return np.full_like(tau, U_FIXED), np.zeros_like(tau)
        return self.trajectory(np.mod(tau, self.tau_max))

    def closure_error(self) -> float:
        if self.is_constant:
            return 0.0
        u0, p0 = self.u_and_du(0.0)
        u1, p1 = self.trajectory(self.tau_max)
        return float(abs(u1 - u0) + abs(p1 - p0))

    @classmethod
    def from_period(cls, a: int, b: int) -> "ConeSolution":
        cp = find_c_for_period(a, b)
        return cls.build(cp.c, a, b)

    @classmethod
    def fixed_point(cls) -> "ConeSolution":
        return cls(c=C_MAX, a=1, b=1, trajectory=None,
                   period=PeriodResult(T=T_LIMIT, method="quadrature", error=0.0, degenerate=True))

    @classmethod
    def build(cls, c: float, a: int, b: int, check: bool = True) -> "ConeSolution":
        cp = _param(c)
        if cp.is_endpoint:
            return cls.fixed_point()
        roots = cubic_roots(cp)
        tau_max = 2.0 * math.pi * a
        traj = integrate(cp.c, roots.u_min, 0.0, (0.0, tau_max * (1 + 1e-9)),
                         rtol=1e-13, atol=1e-14)
        sol = cls(c=cp.c, a=a, b=b, trajectory=traj, period=half_period_quad(cp))
        if check and sol.closure_error() > 1e-6:
            raise NonPeriodic(f"trajectory does not close after tau = 2 pi {a} "
                              f"(mismatch {sol.closure_error():.3g})")
        return sol


def rational_period(c: float, max_den: int = 64, tol: float = 1e-6):
    """(a, b) with T(c) = 2 pi a/b, if a small-denominator fraction fits."""
    T = half_period_quad(c).T
    frac = Fraction(T / (2.0 * math.pi)).limit_denominator(max_den)
    if abs(2.0 * math.pi * frac - T) > tol:
        return None
    return frac.numerator, frac.denominator


def scan_periods(n: int = 50, lo: float = SCAN_LO, hi: float = SCAN_HI, threads: int = 1):
    """Rows (c, T_quad, T_ode, |T_quad - T_ode|) over an even grid of c."""
    cs = np.linspace(lo, hi, n)

    def row(c):
        tq = half_period_quad(c).T
        to = period_from_ode(c).T
        return (float(c), tq, to, abs(tq - to))

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(row, cs))
    return [row(c) for c in cs]
