"""Surfaces near Z as multi-sheeted graphs over the (t, u) half plane.

Here ``u = (2f)^(1/2) = (rho^2 - 2 z^2)^(1/2)`` and each sheet carries the
angle ``phi`` and ``nu = h / u^3``.  With ``w = z/u`` one has exactly

    nu = w (1 + 2 w^2),   rho^2 = u^2 (1 + 2 w^2),   g^2 = u^2 (1 + 6 w^2),

so ``kappa1 = rho^2/u^2 - 1 = 2 w^2`` and
``kappa2 = g^2 rho^2 / u^4 - 1 = 8 w^2 + 12 w^4``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import chebyshev as C

from .energetics import wrap
from .errors import (FitIllConditioned, FoldDetected, GridTooCoarse, OutOfRadius,
                     SheetCountMismatch)
from .limits import TestSurfaceSpec, count_intersections
from .surfaces import ParamSurface, ResidualReport

NU_MAX = 0.25


def w_of_nu(nu, nu_max: float = NU_MAX):
    """Invert nu = w + 2 w^3 by Newton (the cubic is strictly increasing)."""
    nu = np.asarray(nu, dtype=float)
    if np.any(np.abs(nu) >= nu_max):
        raise OutOfRadius(f"|nu| = {np.abs(nu).max():.3g} beyond {nu_max}")
    w = nu.copy()
    for _ in range(60):
        step = (w + 2 * w**3 - nu) / (1 + 6 * w * w)
        w = w - step
        if np.all(np.abs(step) <= 1e-16 * np.maximum(1.0, np.abs(w))):
            break
    return w


def kappas(nu, nu_max: float = NU_MAX):
    w = w_of_nu(nu, nu_max)
    w2 = w * w
    return 2.0 * w2, 8.0 * w2 + 12.0 * w2 * w2


@dataclass
class GraphGrid:
    t: np.ndarray
    u: np.ndarray
    phi: np.ndarray  # (sheets, nt, nu)
    nu: np.ndarray
    params: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def sheets(self) -> int:
        return self.phi.shape[0]

    @property
    def ht(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def hu(self) -> float:
        return float(self.u[1] - self.u[0])

    def nu_bound(self) -> float:
        """Smallest c with |nu| <= c u on the grid."""
        return float(np.max(np.abs(self.nu) / self.u[None, None, :]))

    @classmethod
    def from_functions(cls, phi_fn, nu_fn, t, u):
        T, U = np.meshgrid(t, u, indexing="ij")
        return cls(np.asarray(t, float), np.asarray(u, float),
                   np.asarray(phi_fn(T, U), float)[None], np.asarray(nu_fn(T, U), float)[None])


# -- extraction ----------------------------------------------------------------

def _tu_and_jac(surface, s1, s2):
    pts, t1, t2 = surface.sample(s1, s2)
    x, y, z = pts[..., 1], pts[..., 2], pts[..., 3]
    u = np.sqrt(np.maximum(x * x + y * y - 2 * z * z, 0.0))

    def du(tv):
        return (x * tv[..., 1] + y * tv[..., 2] - 2 * z * tv[..., 3]) / u

    return pts, u, np.stack([np.stack([t1[..., 0], t2[..., 0]], -1),
                             np.stack([du(t1), du(t2)], -1)], -2)


def _solve_tu(surface, s1, s2, t_target, u_target, L, iters=30, fold_tol=1e-9):
    for _ in range(iters):
        pts, u, J = _tu_and_jac(surface, s1, s2)
        r1 = wrap(pts[..., 0] - t_target, L)
        r2 = u - u_target
        det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        scale = np.linalg.norm(J.reshape(J.shape[:-2] + (4,)), axis=-1) ** 2
        if np.any(np.abs(det) < fold_tol * scale):
            raise FoldDetected("(t, u) fail to be coordinates on the surface here")
        d1 = (J[..., 1, 1] * r1 - J[..., 0, 1] * r2) / det
        d2 = (J[..., 0, 0] * r2 - J[..., 1, 0] * r1) / det
        s1, s2 = s1 - d1, s2 - d2
        if max(np.abs(r1).max(), np.abs(r2).max()) < 1e-14:
            break
    pts, u, _ = _tu_and_jac(surface, s1, s2)
    err = max(np.abs(wrap(pts[..., 0] - t_target, L)).max(), np.abs(u - u_target).max())
    if err > 1e-10:
        raise FoldDetected(f"graph inversion failed (residual {err:.2g})")
    return s1, s2, pts


def extract_graph(surface: ParamSurface, t_window, u_window, n_t: int = 64, n_u: int = 64,
                  sheets: Optional[int] = None, seed_grid: int = 256) -> GraphGrid:
    """Sample every sheet over a (t, u) rectangle by continuation from its corner."""
    probe = surface.sample(*surface.grid(16, 16))[1:]
    if np.all(np.abs(probe[0][:, 0]) < 1e-14) and np.all(np.abs(probe[1][:, 0]) < 1e-14):
        raise FoldDetected("t is constant on this surface; it is not a graph over (t, u)")
    t = np.linspace(*t_window, n_t)
    u = np.linspace(*u_window, n_u)
    L = surface.L
    seed_test = TestSurfaceSpec("cylinder", 0.5 * u[0] ** 2, t[0], delta=np.inf, window=np.inf, L=L)
    seeds = count_intersections(surface, seed_test, n=seed_grid, refine=False)
    if sheets is not None and seeds.count != sheets:
        raise SheetCountMismatch(f"found {seeds.count} sheets, expected {sheets}")
    if seeds.count == 0:
        raise SheetCountMismatch("no sheet over the window corner")
    order = np.argsort(np.arctan2(seeds.points[:, 2], seeds.points[:, 1]))
    phis, nus, pars = [], [], []
    for k in order:
        a, b = seeds.roots[k]
        # march up the first column in u, then along t for all u at once
        col1, col2 = np.empty(n_u), np.empty(n_u)
        for j in range(n_u):
            a, b, _ = _solve_tu(surface, np.array(a), np.array(b), t[0], u[j], L)
            col1[j], col2[j] = a, b
        S1 = np.empty((n_t, n_u))
        S2 = np.empty((n_t, n_u))
        S1[0], S2[0] = col1, col2
        for i in range(1, n_t):
            guess1 = S1[i - 1] + (S1[i - 1] - S1[i - 2] if i > 1 else 0.0)
            guess2 = S2[i - 1] + (S2[i - 1] - S2[i - 2] if i > 1 else 0.0)
            S1[i], S2[i], _ = _solve_tu(surface, guess1, guess2, t[i], u, L)
        pts = surface.sample(S1, S2)[0]
        raw = np.arctan2(pts[..., 2], pts[..., 1])
        for axis in (0, 1):
            jumps = np.abs(wrap(np.diff(raw, axis=axis), 2 * math.pi))
            if jumps.size and jumps.max() > 0.5 * math.pi:
                raise GridTooCoarse("phi jumps by more than pi/2 between neighbours")
        ph = np.unwrap(np.unwrap(raw, axis=1), axis=0)
        ph -= 2 * math.pi * np.round((ph[0, 0] - raw[0, 0]) / (2 * math.pi))
        h = pts[..., 3] * (pts[..., 1] ** 2 + pts[..., 2] ** 2)
        phis.append(ph)
        nus.append(h / u[None, :] ** 3)
        pars.append(np.stack([S1, S2], -1))
    return GraphGrid(t, u, np.array(phis), np.array(nus), np.array(pars))


# -- residuals -------------------------------------------------------------------

def _report(res: np.ndarray, h: float) -> ResidualReport:
    a = np.abs(res)
    idx = np.unravel_index(int(np.argmax(a)), a.shape)
    return ResidualReport(float(a.max()), float(a.mean()), tuple(int(i) for i in idx), a.size)


def _d(f, h, axis):
    return (np.take(f, range(2, f.shape[axis]), axis=axis)
            - np.take(f, range(0, f.shape[axis] - 2), axis=axis)) / (2 * h)


def _inner(f):
    return f[..., 1:-1, 1:-1]


def residuals_8_1(grid: GraphGrid):
    """h_u - rho^2 u phi_t and h_t + g^2 rho^2 phi_u / u at interior nodes."""
    U = grid.u[None, None, :]
    h = grid.nu * U**3
    k1, k2 = kappas(grid.nu)
    rho2 = U**2 * (1 + k1)
    g2rho2 = U**4 * (1 + k2)
    h_u = _d(h, grid.hu, 2)[..., 1:-1, :]
    h_t = _d(h, grid.ht, 1)[..., :, 1:-1]
    phi_t = _d(grid.phi, grid.ht, 1)[..., :, 1:-1]
    phi_u = _d(grid.phi, grid.hu, 2)[..., 1:-1, :]
    Ui = grid.u[None, None, 1:-1]
    return (h_u - _inner(rho2) * Ui * phi_t, h_t + _inner(g2rho2) * phi_u / Ui)


def residuals_8_3(grid: GraphGrid):
    U = grid.u[None, None, :]
    k1, k2 = kappas(grid.nu)
    nu_u = _d(grid.nu, grid.hu, 2)[..., 1:-1, :]
    nu_t = _d(grid.nu, grid.ht, 1)[..., :, 1:-1]
    phi_t = _d(grid.phi, grid.ht, 1)[..., :, 1:-1]
    phi_u = _d(grid.phi, grid.hu, 2)[..., 1:-1, :]
    r1 = nu_u + 3 * _inner(grid.nu) / grid.u[None, None, 1:-1] - (1 + _inner(k1)) * phi_t
    r2 = nu_t + (1 + _inner(k2)) * phi_u
    return r1, r2


def _half(f, axis):
    """Averages at half nodes along an axis."""
    n = f.shape[axis]
    return 0.5 * (np.take(f, range(1, n), axis=axis) + np.take(f, range(0, n - 1), axis=axis))


def _diff(f, h, axis):
    return np.diff(f, axis=axis) / h


def residual_8_5_field(grid: GraphGrid):
    """((1+k1)^-1 (nu_u + 3nu/u))_u + ((1+k2)^-1 nu_t)_t with half-node fluxes."""
    nu = grid.nu
    uh = _half(grid.u, 0)[None, None, :]
    nuh_u = _half(nu, 2)
    k1u, _ = kappas(nuh_u)
    flux_u = (_diff(nu, grid.hu, 2) + 3 * nuh_u / uh) / (1 + k1u)
    nuh_t = _half(nu, 1)
    _, k2t = kappas(nuh_t)
    flux_t = _diff(nu, grid.ht, 1) / (1 + k2t)
    return _diff(flux_u, grid.hu, 2)[..., 1:-1, :] + _diff(flux_t, grid.ht, 1)[..., :, 1:-1]


def residual_8_26_field(grid: GraphGrid):
    """u^-3 ((1+k2) u^3 phi_u)_u + ((1+k1) phi_t)_t with half-node fluxes."""
    phi = grid.phi
    uh = _half(grid.u, 0)[None, None, :]
    _, k2u = kappas(_half(grid.nu, 2))
    flux_u = (1 + k2u) * uh**3 * _diff(phi, grid.hu, 2)
    k1t, _ = kappas(_half(grid.nu, 1))
    flux_t = (1 + k1t) * _diff(phi, grid.ht, 1)
    Ui = grid.u[None, None, 1:-1]
    return _diff(flux_u, grid.hu, 2)[..., 1:-1, :] / Ui**3 + _diff(flux_t, grid.ht, 1)[..., :, 1:-1]


def residual_8_1(grid: GraphGrid) -> ResidualReport:
    a, b = residuals_8_1(grid)
    return _report(np.maximum(np.abs(a), np.abs(b)), grid.hu)


def residual_8_3(grid: GraphGrid) -> ResidualReport:
    a, b = residuals_8_3(grid)
    return _report(np.maximum(np.abs(a), np.abs(b)), grid.hu)


def residual_8_5(grid: GraphGrid) -> ResidualReport:
    return _report(residual_8_5_field(grid), grid.hu)


def residual_8_26(grid: GraphGrid) -> ResidualReport:
    return _report(residual_8_26_field(grid), grid.hu)


RESIDUALS = {"8.1": residual_8_1, "8.3": residual_8_3, "8.5": residual_8_5, "8.26": residual_8_26}
# highest derivative appearing in each system; sets how rounding noise is amplified
DERIV_ORDER = {residual_8_1: 1, residual_8_3: 1, residual_8_5: 2, residual_8_26: 2}


def rounding_floor(grid: GraphGrid, k: int, safety: float = 64.0) -> float:
    """Size of a k-th difference quotient made of pure rounding noise."""
    scale = max(float(np.abs(grid.phi).max()), float(np.abs(grid.nu).max()), 1.0)
    h = min(grid.ht, grid.hu)
    return safety * np.finfo(float).eps * scale / h**k


@dataclass(frozen=True)
class RefinementResult:
    sizes: tuple
    residuals: tuple
    order: float
    exact: bool  # residual at rounding level on every grid

    @property
    def ok(self) -> bool:
        return self.exact or 1.7 <= self.order <= 2.3


def refinement_order(make_grid, residual, sizes: Sequence[int] = (32, 64, 128),
                     min_order: Optional[float] = 1.5) -> RefinementResult:
    """Fitted order p in max|residual| ~ h^p over a sequence of grids.

    A residual that never rises above the rounding floor means the discrete
    equation holds exactly for this input; no order is fitted then.
    """
    k = DERIV_ORDER.get(residual, 2)
    res, floors = [], []
    for n in sizes:
        g = make_grid(n)
        res.append(residual(g).max)
        floors.append(rounding_floor(g, k))
    if all(r <= f for r, f in zip(res, floors)):
        return RefinementResult(tuple(sizes), tuple(res), float("nan"), True)
    hs = 1.0 / np.asarray(sizes, float)
    order = float(np.polyfit(np.log(hs), np.log(res), 1)[0])
    if min_order is not None and order < min_order:
        raise GridTooCoarse(f"residual decays like h^{order:.2f}, not h^2")
    return RefinementResult(tuple(sizes), tuple(res), order, False)


# -- Taylor coefficients -----------------------------------------------------------

@dataclass
class TaylorReport:
    t: np.ndarray
    phi0: np.ndarray
    c_phi: np.ndarray
    c_nu: np.ndarray
    dphi0: np.ndarray
    ddphi0: np.ndarray
    err_cphi: float  # max |c_phi + phi0''/8|
    err_first: float  # max |4 c_nu - phi0'|
    err_second: float  # max |4 c_nu - phi0''|
    selects: str

    @property
    def ratio(self) -> float:
        return self.err_first / self.err_second if self.err_second > 0 else float("inf")


def taylor_fit(grid: GraphGrid, sheet: int = 0, u_fit_max: Optional[float] = None,
               cheb_deg: int = 16) -> TaylorReport:
    """Fit phi = phi0 + c_phi u^2 + O(u^4) and nu = c_nu u + O(u^3) column by column."""
    if grid.u[0] > 0.01:
        raise FitIllConditioned("the grid must reach u <= 0.01")
    u = grid.u if u_fit_max is None else grid.u[grid.u <= u_fit_max]
    m = len(u)
    A_phi = np.stack([np.ones(m), u**2, u**4, u**6], 1)
    A_nu = np.stack([u, u**3, u**5], 1)
    if np.linalg.cond(A_phi) > 1e12 or np.linalg.cond(A_nu) > 1e12:
        raise FitIllConditioned("design matrix is ill conditioned")
    cphi = np.linalg.lstsq(A_phi, grid.phi[sheet][:, :m].T, rcond=None)[0]
    cnu = np.linalg.lstsq(A_nu, grid.nu[sheet][:, :m].T, rcond=None)[0]
    phi0, c_phi, c_nu = cphi[0], cphi[1], cnu[0]
    t = grid.t
    deg = min(cheb_deg, len(t) - 1)
    ser = C.Chebyshev.fit(t, phi0, deg)
    d1, d2 = ser.deriv(1)(t), ser.deriv(2)(t)
    # stay away from the ends where polynomial derivatives are least reliable
    core = slice(len(t) // 8, len(t) - len(t) // 8)
    e_c = float(np.max(np.abs(c_phi + d2 / 8)[core]))
    e1 = float(np.max(np.abs(4 * c_nu - d1)[core]))
    e2 = float(np.max(np.abs(4 * c_nu - d2)[core]))
    return TaylorReport(t, phi0, c_phi, c_nu, d1, d2, e_c, e1, e2,
                        "first" if e1 < e2 else "second")


def leading_order_grid(phi0, dphi0, ddphi0, t, u) -> GraphGrid:
    """phi = phi0 - phi0'' u^2 / 8,  nu = phi0' u / 4."""
    return GraphGrid.from_functions(lambda T, U: phi0(T) - ddphi0(T) * U**2 / 8,
                                    lambda T, U: dphi0(T) * U / 4, t, u)


from .vertex import (VertexModeSolution, mode_orthogonality, sin4_moment,  # noqa: E402
                     vertex_mode, vertex_mode_collocation)

__all__ = [
    "GraphGrid", "kappas", "w_of_nu", "extract_graph", "residual_8_1", "residual_8_3",
    "residual_8_5", "residual_8_26", "refinement_order", "taylor_fit", "leading_order_grid",
    "vertex_mode", "vertex_mode_collocation", "mode_orthogonality", "sin4_moment",
    "VertexModeSolution",
]
