"""Angular modes at a boundary critical point.

The mode ``f`` on ``[0, pi]`` solves

    sin^-3(theta) (sin^3(theta) f')' + (N+1)(N+4) f = 0,   f'(0) = f'(pi) = 0,

and the companion is ``g = f' / (N + 4)``.  In ``x = cos(theta)`` this is
``(1 - x^2) F'' - 4 x F' + lam F = 0``, whose regular solutions are the
Gegenbauer polynomials of index 3/2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.integrate import solve_ivp

from .errors import NoSolution

EPS = 1e-6
RTOL = 1e-13
ATOL = 1e-15
N_COLLOC = 128
N_GRID = 401
MATCH_TOL = 1e-8


def eigenvalue(N: int) -> float:
    return float((N + 1) * (N + 4))


@dataclass
class VertexModeSolution:
    N: int
    theta: np.ndarray
    f: np.ndarray
    f_theta: np.ndarray
    g: np.ndarray
    residual: float
    method: str
    collocation_gap: float
    lam: float

    def f_at(self, theta):
        return _mode_poly(self.N, self.lam)(np.cos(theta))

    def endpoint_slopes(self) -> tuple:
        return float(self.f_theta[0]), float(self.f_theta[-1])

    def zero_count(self) -> int:
        return zero_count(self)

    def rows(self):
        return zip(self.theta, self.f, self.g)


def _rhs(lam):
    def rhs(th, y):
        return [y[1], -3.0 * math.cos(th) / math.sin(th) * y[1] - lam * y[0]]
    return rhs


def _start(lam, eps, sign=1.0):
    """Two-term regular series f = 1 + a2 e^2 + a4 e^4 about a pole."""
    a2 = -lam / 8.0
    a4 = a2 * (2.0 - lam) / 24.0
    f = 1.0 + a2 * eps**2 + a4 * eps**4
    df = 2 * a2 * eps + 4 * a4 * eps**3
    return [f, sign * df]


def _shoot(lam: float, theta: np.ndarray):
    mid = 0.5 * math.pi
    left = solve_ivp(_rhs(lam), (EPS, mid), _start(lam, EPS), method="DOP853",
                     rtol=RTOL, atol=ATOL, dense_output=True)
    right = solve_ivp(_rhs(lam), (math.pi - EPS, mid), _start(lam, EPS, -1.0), method="DOP853",
                      rtol=RTOL, atol=ATOL, dense_output=True)
    if left.status != 0 or right.status != 0:
        return None
    yl, yr = left.y[:, -1], right.y[:, -1]
    scale = math.hypot(*yl) * math.hypot(*yr)
    wronskian = (yl[0] * yr[1] - yl[1] * yr[0]) / scale
    if abs(wronskian) > MATCH_TOL:
        raise NoSolution(f"shooting mismatch {wronskian:.3g}; lam = {lam} is not an eigenvalue")
    k = yl[0] / yr[0] if abs(yr[0]) > abs(yr[1]) else yl[1] / yr[1]
    f = np.empty_like(theta)
    df = np.empty_like(theta)
    lo = theta <= mid
    for mask, sol, fac in ((lo, left, 1.0), (~lo, right, k)):
        th = np.clip(theta[mask], EPS, math.pi - EPS)
        y = sol.sol(np.clip(th, min(sol.t[0], sol.t[-1]), max(sol.t[0], sol.t[-1])))
        f[mask], df[mask] = fac * y[0], fac * y[1]
    # the poles themselves: regular series value, zero slope
    at0, atpi = theta < EPS, theta > math.pi - EPS
    f[at0] = 1.0
    df[at0] = 0.0
    f[atpi] = k
    df[atpi] = 0.0
    return f, df


@lru_cache(maxsize=None)
def _collocation_coeffs(lam: float, n: int = N_COLLOC) -> np.ndarray:
    """Null vector of the x-form operator acting on Chebyshev coefficients."""
    M = np.zeros((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        d1 = C.chebder(e)
        d2 = C.chebder(e, 2)
        col = C.chebsub(d2, C.chebmulx(C.chebmulx(d2)))
        col = C.chebsub(col, 4 * C.chebmulx(d1))
        col = C.chebadd(col, lam * e)
        M[: len(col), j] = col[:n]
    _, sv, vt = np.linalg.svd(M)
    if sv[-1] > 1e-8 * sv[0]:
        raise NoSolution(f"no polynomial mode for lam = {lam}")
    v = vt[-1]
    return v / C.chebval(1.0, v)


def _mode_poly(N: int, lam: Optional[float] = None):
    return C.Chebyshev(_collocation_coeffs(eigenvalue(N) if lam is None else lam))


def vertex_mode_collocation(N: int, theta=None, lam: Optional[float] = None):
    """(theta, f, f_theta) from the spectral solve, f(0) = 1."""
    theta = np.linspace(0, math.pi, N_GRID) if theta is None else np.asarray(theta, float)
    F = _mode_poly(N, lam)
    x = np.cos(theta)
    return theta, F(x), -np.sin(theta) * F.deriv()(x)


def _equation_residual(theta, f, lam, deg=40) -> float:
    """Refit f as a polynomial in cos(theta) and evaluate the x-form equation."""
    x = np.cos(theta)
    F = C.Chebyshev.fit(x, f, deg, domain=[-1, 1])
    xs = np.cos(np.linspace(0, math.pi, 2001))
    res = (1 - xs**2) * F.deriv(2)(xs) - 4 * xs * F.deriv()(xs) + lam * F(xs)
    return float(np.max(np.abs(res)))


def vertex_mode(N: int, n_theta: int = N_GRID, lam: Optional[float] = None) -> VertexModeSolution:
    """Mode for integer N by shooting from both poles; spectral solve as cross-check."""
    if N < 0 or int(N) != N:
        raise ValueError("N must be a non-negative integer")
    N = int(N)
    lam = eigenvalue(N) if lam is None else float(lam)
    theta = np.linspace(0, math.pi, n_theta)
    shot = _shoot(lam, theta)
    _, fc, dfc = vertex_mode_collocation(N, theta, lam)
    if shot is None:
        f, df, method = fc, dfc, "collocation"
        gap = 0.0
    else:
        f, df = shot
        method = "shooting"
        gap = float(max(np.abs(f - fc).max(), np.abs(df - dfc).max()))
    return VertexModeSolution(N, theta, f, df, df / (N + 4), _equation_residual(theta, f, lam),
                              method, gap, lam)


# -- integrals ---------------------------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(200)
_GL_TH = 0.5 * math.pi * (_GL_X + 1)
_GL_W = 0.5 * math.pi * _GL_W


@lru_cache(maxsize=32)
def _ftheta_nodes(N: int) -> np.ndarray:
    sol = vertex_mode(N)
    # shooting values interpolated through the spectral fit of the shooting data
    F = C.Chebyshev.fit(np.cos(sol.theta), sol.f, 40, domain=[-1, 1])
    return -np.sin(_GL_TH) * F.deriv()(np.cos(_GL_TH))


def mode_orthogonality(N: int, N2: int, normalize: bool = True) -> float:
    """Integral of f_theta f2_theta sin^3 over [0, pi]."""
    a, b = _ftheta_nodes(N), _ftheta_nodes(N2)
    w = _GL_W * np.sin(_GL_TH) ** 3
    val = float(np.sum(w * a * b))
    if normalize:
        val /= math.sqrt(np.sum(w * a * a) * np.sum(w * b * b))
    return val


def orthogonality_matrix(n_max: int) -> np.ndarray:
    return np.array([[mode_orthogonality(i, j) for j in range(n_max + 1)]
                     for i in range(n_max + 1)])


def sin4_moment(N: int) -> float:
    """Integral of f_theta sin^4 over [0, pi], relative to the L2 size of f_theta."""
    a = _ftheta_nodes(N)
    s = np.sin(_GL_TH)
    return float(np.sum(_GL_W * a * s**4) / math.sqrt(np.sum(_GL_W * a * a * s**3)))


def zero_count(sol: VertexModeSolution, tol: float = 1e-8) -> int:
    """Zeros of f_theta on [0, pi], the two poles included."""
    d = sol.f_theta
    scale = np.abs(d).max()
    inner = d[1:-1]
    inner = np.where(np.abs(inner) < tol * scale, 0.0, inner)
    nz = inner[inner != 0]
    changes = int(np.count_nonzero(np.sign(nz[1:]) != np.sign(nz[:-1])))
    ends = int(abs(d[0]) < tol * scale) + int(abs(d[-1]) < tol * scale)
    return changes + ends
