"""Dilation about points of Z, set distances, intersection counts, limit data.

Intersections are found in the parameter space of the sampled surface: the
test surface is a common level set ``G = (G1, G2) = 0`` of two functions on
S^1 x B^3, and Newton's method is run on ``G(X(s1, s2)) = 0`` with the exact
Jacobian ``dG . (T1, T2)``, seeded from a grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from scipy.spatial import cKDTree

from . import geometry as geo
from .cone_dynamics import C_MAX, half_period_quad
from .energetics import wrap
from .errors import EmptyIntersection, NonTransverse
from .surfaces import ParamSurface, ResidualReport


# -- dilation ---------------------------------------------------------------

def dilate(surface: ParamSurface, s: float, t0: float = 0.0) -> ParamSurface:
    """Image under (t, x, y, z) -> ((t - t0)/s, x/s, y/s, z/s), t - t0 taken mod L."""
    if s <= 0:
        raise ValueError("scale must be positive")
    L = surface.L
    base = surface.fn

    def fn(s1, s2):
        pts, t1, t2 = base(s1, s2)
        out = pts / s
        out[..., 0] = wrap(pts[..., 0] - t0, L) / s
        return out, t1 / s, t2 / s

    out = ParamSurface(f"dilated:{surface.family}", {**surface.params, "scale": s, "center": t0},
                       fn, surface.domain, L / s, 0.0, surface.orientation, surface.periodic,
                       surface.is_cone, surface.s2_floor)
    object.__setattr__(out, "base", surface)
    return out


@dataclass(frozen=True)
class PointCloud:
    pts: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    params: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.pts)

    @staticmethod
    def concat(*clouds: "PointCloud") -> "PointCloud":
        return PointCloud(np.concatenate([c.pts for c in clouds]),
                          np.concatenate([c.t1 for c in clouds]),
                          np.concatenate([c.t2 for c in clouds]))


def _radius4(pts, t0, L):
    return np.sqrt(wrap(pts[..., 0] - t0, L) ** 2 + np.sum(pts[..., 1:] ** 2, axis=-1))


def sample_ball(surface: ParamSurface, R: float, n: int = 200, t0: float = 0.0,
                coarse=(1024, 256)) -> PointCloud:
    """Dense samples of the surface inside the 4-ball of radius R about (t0, 0).

    A coarse scan locates the parameter boxes that meet a slightly larger
    ball; each box is then resampled on an n x n grid.
    """
    (a1, b1), (a2, b2) = surface.domain
    s1 = np.linspace(a1, b1, coarse[0])
    s2 = np.linspace(a2, b2, coarse[1])
    S1, S2 = np.meshgrid(s1, s2, indexing="ij")
    pts, ct1, ct2 = surface.sample(S1, S2)
    hit = _radius4(pts, t0, surface.L) <= 1.5 * R
    if not hit.any():
        raise EmptyIntersection("surface does not meet the ball")
    rows = np.nonzero(hit.any(axis=1))[0]
    # split rows into contiguous runs
    runs, start = [], rows[0]
    for prev, cur in zip(rows[:-1], rows[1:]):
        if cur != prev + 1:
            runs.append((start, prev))
            start = cur
    runs.append((start, rows[-1]))
    clouds = []
    for i, j in runs:
        cols = np.nonzero(hit[i:j + 1].any(axis=0))[0]
        lo1, hi1 = s1[max(i - 1, 0)], s1[min(j + 1, len(s1) - 1)]
        lo2, hi2 = s2[max(cols[0] - 1, 0)], s2[min(cols[-1] + 1, len(s2) - 1)]
        # split n^2 nodes so that the physical spacing is about equal both ways
        box = hit[i:j + 1]
        len1 = (hi1 - lo1) * np.linalg.norm(ct1[i:j + 1][box], axis=-1).mean()
        len2 = (hi2 - lo2) * np.linalg.norm(ct2[i:j + 1][box], axis=-1).mean()
        ratio = math.sqrt(max(len1, 1e-12) / max(len2, 1e-12))
        n1 = int(np.clip(round(n * ratio), 8, 16 * n))
        n2 = int(np.clip(round(n / ratio), 8, 16 * n))
        F1, F2 = np.meshgrid(np.linspace(lo1, hi1, n1), np.linspace(lo2, hi2, n2), indexing="ij")
        P, T1, T2 = surface.sample(F1.ravel(), F2.ravel())
        keep = _radius4(P, t0, surface.L) <= R
        clouds.append(PointCloud(P[keep], T1[keep], T2[keep],
                                 np.stack([F1.ravel()[keep], F2.ravel()[keep]], axis=1)))
    return PointCloud.concat(*clouds)


def plane_cloud(nu: float, R: float = 2.0, n: int = 400) -> PointCloud:
    """Samples of the half-plane {(t, s cos nu, s sin nu, 0): s >= 0} in B(R)."""
    t = np.linspace(-R, R, n)
    s = np.linspace(0.0, R, n // 2)
    T, S = (a.ravel() for a in np.meshgrid(t, s))
    pts = np.stack([T, S * math.cos(nu), S * math.sin(nu), 0 * S], axis=1)
    keep = np.linalg.norm(pts, axis=1) <= R
    one = np.tile([1.0, 0, 0, 0], (keep.sum(), 1))
    rad = np.tile([0.0, math.cos(nu), math.sin(nu), 0], (keep.sum(), 1))
    return PointCloud(pts[keep], one, rad)


def in_annulus(pts, inner: float = 0.25, outer: float = 1.0, R: float = 2.0):
    r3 = np.sum(pts[:, 1:] ** 2, axis=1)
    return (r3 >= inner) & (r3 <= outer) & (np.sum(pts**2, axis=1) <= R * R)


def _one_sided(a: np.ndarray, b: PointCloud) -> float:
    tree = cKDTree(b.pts)
    d, idx = tree.query(a, k=1)
    spacing = float(np.median(tree.query(b.pts[: min(len(b.pts), 2000)], k=2)[0][:, 1]))
    diff = a - b.pts[idx]
    # project onto the tangent plane at the nearest sample
    t1, t2 = b.t1[idx], b.t2[idx]
    g11 = np.einsum("ni,ni->n", t1, t1)
    g12 = np.einsum("ni,ni->n", t1, t2)
    g22 = np.einsum("ni,ni->n", t2, t2)
    r1 = np.einsum("ni,ni->n", diff, t1)
    r2 = np.einsum("ni,ni->n", diff, t2)
    det = g11 * g22 - g12 * g12
    c1 = (g22 * r1 - g12 * r2) / det
    c2 = (g11 * r2 - g12 * r1) / det
    tang = c1[:, None] * t1 + c2[:, None] * t2
    d_plane = np.linalg.norm(diff - tang, axis=1)
    local = np.linalg.norm(tang, axis=1) <= 2.0 * spacing
    return float(np.max(np.where(local, d_plane, d)))


def geometric_distance(a: PointCloud, b: PointCloud, region=in_annulus) -> float:
    """sup_{x in A∩K} dist(x, B) + sup_{y in B∩K} dist(y, A)."""
    ka, kb = region(a.pts), region(b.pts)
    if not ka.any() or not kb.any():
        raise EmptyIntersection("a sampler has no points in K")
    return _one_sided(a.pts[ka], b) + _one_sided(b.pts[kb], a)


def rotate_phi(cloud: PointCloud, angle: float) -> PointCloud:
    c, s = math.cos(angle), math.sin(angle)
    m = np.array([[1, 0, 0, 0], [0, c, -s, 0], [0, s, c, 0], [0, 0, 0, 1.0]])
    return PointCloud(cloud.pts @ m.T, cloud.t1 @ m.T, cloud.t2 @ m.T)


# -- test surfaces ------------------------------------------------------------

@dataclass(frozen=True)
class TestSurfaceSpec:
    """A level set {G1 = 0, G2 = 0} with side conditions, in base coordinates.

    variants: ``cylinder`` {t = t0, f = level, |z| < delta},
    ``disk`` {t = t0, f = level, rho < delta, sign*z > 0},
    ``hslice`` {phi = 0, h = level}, ``sphere`` {t = t0, rho^2 + z^2 = level}.
    ``window`` is the radius of the 4-ball about (t0, 0) in which points count.
    """

    variant: str
    level: float
    t0: float = 0.0
    delta: float = 0.02
    sign: int = 1
    window: float = 1.0
    L: float = 1.0

    __test__ = False  # not a pytest class

    def G(self, p):
        t, x, y, z = (p[..., k] for k in range(4))
        if self.variant in ("cylinder", "disk"):
            return np.stack([wrap(t - self.t0, self.L), 0.5 * (x * x + y * y) - z * z - self.level], -1)
        if self.variant == "sphere":
            return np.stack([wrap(t - self.t0, self.L), x * x + y * y + z * z - self.level], -1)
        if self.variant == "hslice":
            return np.stack([np.arctan2(y, x), z * (x * x + y * y) - self.level], -1)
        raise ValueError(self.variant)

    def grad(self, p):
        t, x, y, z = (p[..., k] for k in range(4))
        zero, one = np.zeros_like(x), np.ones_like(x)
        if self.variant in ("cylinder", "disk", "sphere"):
            g1 = np.stack([one, zero, zero, zero], -1)
            if self.variant == "sphere":
                g2 = np.stack([zero, 2 * x, 2 * y, 2 * z], -1)
            else:
                g2 = np.stack([zero, x, y, -2 * z], -1)
        else:
            r2 = x * x + y * y
            g1 = np.stack([zero, -y / r2, x / r2, zero], -1)
            g2 = np.stack([zero, 2 * x * z, 2 * y * z, r2], -1)
        return np.stack([g1, g2], axis=-2)

    def branch_cut(self, p):
        """|G1| where G1 may jump (angle or circle wrap); seeds straddling it are dropped."""
        g1 = self.G(p)[..., 0]
        half = math.pi if self.variant == "hslice" else 0.5 * self.L
        return np.abs(g1) > 0.5 * half

    def admissible(self, p):
        t, x, y, z = (p[..., k] for k in range(4))
        rho = np.sqrt(x * x + y * y)
        ok = _radius4(p, self.t0, self.L) < self.window
        if self.variant == "cylinder":
            ok &= np.abs(z) < self.delta
        elif self.variant == "disk":
            ok &= (rho < self.delta) & (self.sign * z > 0)
        elif self.variant == "hslice":
            ok &= x > 0
        return ok

    def frame(self, p):
        """Oriented tangent frame of the test surface at the points p."""
        grads = self.grad(p)
        n = len(p)
        s1 = np.empty((n, 4))
        s2 = np.empty((n, 4))
        for i in range(n):
            _, _, vt = np.linalg.svd(grads[i])
            s1[i], s2[i] = vt[2], vt[3]
        if self.variant == "sphere":
            # (outward normal, S1, S2) positively oriented in the xyz-space
            nrm = p[:, 1:]
            det = np.linalg.det(np.stack([nrm, s1[:, 1:], s2[:, 1:]], axis=1))
        else:
            det = np.einsum("ni,nij,nj->n", s1, geo.omega_matrix(p), s2)
        s2 = np.where((det < 0)[:, None], -s2, s2)
        return s1, s2


def cylinder_test(t0, s, delta=0.02, L=1.0):
    return TestSurfaceSpec("cylinder", s * s / 100.0, t0, delta * s, 1, s, L)


def disk_test(t0, s, sign=1, delta=0.02, L=1.0):
    return TestSurfaceSpec("disk", -s * s / 100.0, t0, delta * s, sign, s, L)


def hslice_test(t0, s, c, sign=1, L=1.0):
    return TestSurfaceSpec("hslice", sign * c * s**3, t0, 0.0, sign, s, L)


def sphere_test(t0, s, L=1.0):
    return TestSurfaceSpec("sphere", 0.5 * s * s, t0, 0.0, 1, 10.0, L)


@dataclass
class CountResult:
    count: int
    signed: int
    roots: np.ndarray
    points: np.ndarray
    signs: np.ndarray
    stable: bool = True
    history: tuple = ()

    @property
    def all_positive(self) -> bool:
        return bool(np.all(self.signs > 0))


def _newton(surface, test, x1, x2, iters=40, tol=1e-13):
    (a1, b1), (a2, b2) = surface.domain
    per = b1 - a1
    alive = np.ones(x1.shape, bool)
    for _ in range(iters):
        pts, t1, t2 = surface.sample(x1, x2)
        g = test.G(pts)
        gr = test.grad(pts)
        j11 = np.einsum("ni,ni->n", gr[:, 0], t1)
        j12 = np.einsum("ni,ni->n", gr[:, 0], t2)
        j21 = np.einsum("ni,ni->n", gr[:, 1], t1)
        j22 = np.einsum("ni,ni->n", gr[:, 1], t2)
        det = j11 * j22 - j12 * j21
        with np.errstate(divide="ignore", invalid="ignore"):
            d1 = (j22 * g[:, 0] - j12 * g[:, 1]) / det
            d2 = (j11 * g[:, 1] - j21 * g[:, 0]) / det
        d1 = np.where(np.isfinite(d1), d1, 0.0)
        d2 = np.where(np.isfinite(d2), d2, 0.0)
        # damp long steps
        scale = np.maximum(1.0, np.hypot(d1 / per, d2 / (b2 - a2)) / 0.1)
        x1 = x1 - d1 / scale
        x2 = x2 - d2 / scale
        if surface.periodic:
            x1 = a1 + np.mod(x1 - a1, per)
        alive &= (x2 > a2) & (x2 < b2) & (x1 >= a1 - 1e-12) & (x1 <= b1 + 1e-12)
        x2 = np.clip(x2, a2, b2)
        if np.all(np.abs(g[alive]).max(initial=0.0) < tol):
            break
    pts = surface.sample(x1, x2)[0]
    res = np.abs(test.G(pts)).max(axis=1)
    return x1, x2, alive & (res < 1e-10)


def _dedup(x1, x2, period, periodic, tol=1e-7):
    keep = []
    for i in range(len(x1)):
        for j in keep:
            d1 = abs(x1[i] - x1[j])
            if periodic:
                d1 = min(d1, period - d1)
            if d1 < tol and abs(x2[i] - x2[j]) < tol:
                break
        else:
            keep.append(i)
    return np.array(keep, dtype=int)


def _count_once(surface, test, n, det_tol):
    (a1, b1), (a2, b2) = surface.domain
    # long angular domains (cones winding several times) get proportionally more seeds
    turns = max(1, int(math.ceil((b1 - a1) / (2 * math.pi) - 1e-9)))
    s1 = np.linspace(a1, b1, n * turns + 1)
    s2 = np.linspace(a2, b2, n + 1)
    S1, S2 = np.meshgrid(s1, s2, indexing="ij")
    pts = surface.sample(S1, S2)[0]
    G = test.G(pts)
    cut = test.branch_cut(pts)
    # cells in which both components change sign (or come close to it)
    def changes(g):
        c = np.stack([g[:-1, :-1], g[1:, :-1], g[:-1, 1:], g[1:, 1:]])
        return (c.min(axis=0) <= 0) & (c.max(axis=0) >= 0)

    cc = np.stack([cut[:-1, :-1], cut[1:, :-1], cut[:-1, 1:], cut[1:, 1:]]).any(axis=0)
    cells = changes(G[..., 0]) & changes(G[..., 1]) & ~cc
    i, j = np.nonzero(cells)
    if not i.size:
        return [], np.empty((0, 2)), np.empty((0, 4)), np.empty(0)
    x1 = 0.5 * (s1[i] + s1[i + 1])
    x2 = 0.5 * (s2[j] + s2[j + 1])
    x1, x2, ok = _newton(surface, test, x1, x2)
    x1, x2 = x1[ok], x2[ok]
    keep = _dedup(x1, x2, b1 - a1, surface.periodic)
    if not keep.size:
        return [], np.empty((0, 2)), np.empty((0, 4)), np.empty(0)
    x1, x2 = x1[keep], x2[keep]
    pts, t1, t2 = surface.sample(x1, x2)
    adm = test.admissible(pts)
    x1, x2, pts, t1, t2 = x1[adm], x2[adm], pts[adm], t1[adm], t2[adm]
    if not len(x1):
        return [], np.empty((0, 2)), np.empty((0, 4)), np.empty(0)
    t1o = surface.orientation * t1
    u1, u2 = test.frame(pts)
    mats = np.stack([t1o, t2, u1, u2], axis=1)
    norms = (np.linalg.norm(t1, axis=1) * np.linalg.norm(t2, axis=1))
    dets = np.linalg.det(mats) / norms
    if np.any(np.abs(dets) < det_tol):
        raise NonTransverse(f"intersection with |det| = {np.abs(dets).min():.3g}")
    return list(zip(x1, x2)), np.stack([x1, x2], 1), pts, np.sign(dets)


def count_intersections(surface: ParamSurface, test: TestSurfaceSpec, n: int = 64,
                        refine: bool = True, det_tol: float = 1e-8) -> CountResult:
    """Transverse intersections of the surface with the test surface.

    With ``refine`` the seed grid is repeated at 2n and 4n; ``stable`` is
    False when the count changes (incomplete search).
    """
    sizes = (n, 2 * n, 4 * n) if refine else (n,)
    history = []
    best = None
    for m in sizes:
        _, roots, pts, signs = _count_once(surface, test, m, det_tol)
        history.append(len(roots))
        best = (roots, pts, signs)
    roots, pts, signs = best
    return CountResult(count=len(roots), signed=int(np.sum(signs)), roots=roots, points=pts,
                       signs=signs, stable=len(set(history)) == 1, history=tuple(history))


# -- limit data ---------------------------------------------------------------

@dataclass
class LimitData:
    p: int
    q_plus: int
    q_minus: int
    n_plus: int
    n_minus: int
    cone_constants: dict = field(default_factory=dict)
    linking: int = 0
    s_used: float = 0.0
    stable: bool = True
    dK_sequence: tuple = ()

    def as_tuple(self):
        return (self.p, self.q_plus, self.q_minus, self.n_plus, self.n_minus)

    @property
    def consistent(self) -> bool:
        return self.p - (self.q_plus + self.q_minus) == self.linking

    def to_dict(self):
        return {"p": self.p, "q_plus": self.q_plus, "q_minus": self.q_minus,
                "n_plus": self.n_plus, "n_minus": self.n_minus,
                "cone_constants": {k: list(v) for k, v in self.cone_constants.items()},
                "linking": self.linking, "s_used": self.s_used, "stable": self.stable,
                "dK_sequence": list(self.dK_sequence)}


def winding_of(c: float, max_den: int = 64) -> Optional[int]:
    """Number of phi-turns for the cone with constant c (None if no small fraction fits)."""
    if c >= C_MAX * (1 - 1e-12):
        return 1
    T = half_period_quad(c).T
    fr = Fraction(T / (2 * math.pi)).limit_denominator(max_den)
    if abs(float(fr) * 2 * math.pi - T) > 1e-7:
        return None
    return fr.numerator


def _hcount(surface, t0, s, c, sign, n):
    return count_intersections(surface, hslice_test(t0, s, c, sign, surface.L), n=n,
                               refine=False).count


def cone_jumps(surface, t0, s, sign=1, n=64, grid=None, tol=1e-10):
    """Locations and sizes of the jumps of c -> #(surface ∩ {phi=0, h=±c s^3} ∩ B(s))."""
    cs = np.asarray(grid if grid is not None else np.linspace(0.02, C_MAX * (1 - 1e-9), 25))
    counts = [_hcount(surface, t0, s, c, sign, n) for c in cs]
    out = []
    for k in range(len(cs) - 1):
        if counts[k] == counts[k + 1]:
            continue
        lo, hi = cs[k], cs[k + 1]
        n_lo, n_hi = counts[k], counts[k + 1]
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if _hcount(surface, t0, s, mid, sign, n) == n_lo:
                lo = mid
            else:
                hi = mid
        out.append((0.5 * (lo + hi), n_lo - n_hi))
    if counts[-1] != 0:
        out.append((C_MAX, counts[-1]))
    return out, counts


def classify_limit(surface: ParamSurface, t0: float = 0.0, s: float = 0.05,
                   delta: float = 0.02, n: int = 64, check_scale: Optional[float] = None
                   ) -> LimitData:
    """(p, q+, q-, n+, n-) and cone constants of the dilation limit at (t0, 0).

    Cone constants are accepted only if the same jump appears at a second
    scale (``check_scale``, default s/3): constants of the limit cones do
    not move under dilation, transient features of a non-conical surface do.
    """
    L = surface.L
    p_res = count_intersections(surface, cylinder_test(t0, s, delta, L), n=n)
    qp = count_intersections(surface, disk_test(t0, s, 1, delta, L), n=n)
    qm = count_intersections(surface, disk_test(t0, s, -1, delta, L), n=n)
    link = count_intersections(surface, sphere_test(t0, s, L), n=n)
    s_chk = check_scale if check_scale is not None else s / 3.0
    consts, ns = {}, {}
    for sign, key in ((1, "+"), (-1, "-")):
        jumps, _ = cone_jumps(surface, t0, s, sign, n)
        jumps2, _ = cone_jumps(surface, t0, s_chk, sign, n)
        found, total = [], 0
        for c, size in jumps:
            if size <= 0 or not any(abs(c - c2) < 1e-6 and size == z2 for c2, z2 in jumps2):
                continue
            w = winding_of(c) or size
            mult = max(size // w, 1)
            found += [c] * mult
            total += mult
        consts[key] = found
        ns[key] = total
    stable = p_res.stable and qp.stable and qm.stable and link.stable
    return LimitData(p=p_res.count, q_plus=qp.count, q_minus=qm.count, n_plus=ns["+"],
                     n_minus=ns["-"], cone_constants=consts, linking=link.signed, s_used=s,
                     stable=stable)


def cone_constant_from_samples(surface: ParamSurface, t0: float, n: int = 64):
    """h / r^3 over the samples (constant on a cone of the oscillator family)."""
    s1, s2 = surface.grid(n, n)
    pts = surface.sample(s1, s2)[0]
    r = _radius4(pts, t0, surface.L)
    val = geo.h_of(pts) / r**3
    return float(np.median(val)), float(np.ptp(val))


def cone_field_residual(surface: ParamSurface, t0: Optional[float] = None, n: int = 64
                        ) -> ResidualReport:
    """Relative distance of the radial field about (t0, 0) from the tangent planes."""
    t0 = surface.t0 if t0 is None else t0
    s1, s2 = surface.grid(n, n)
    pts, t1, t2 = surface.sample(s1, s2)
    v = pts.copy()
    v[:, 0] = wrap(pts[:, 0] - t0, surface.L)
    g11 = np.einsum("ni,ni->n", t1, t1)
    g12 = np.einsum("ni,ni->n", t1, t2)
    g22 = np.einsum("ni,ni->n", t2, t2)
    b1 = np.einsum("ni,ni->n", v, t1)
    b2 = np.einsum("ni,ni->n", v, t2)
    det = g11 * g22 - g12 * g12
    a1 = (g22 * b1 - g12 * b2) / det
    a2 = (g11 * b2 - g12 * b1) / det
    r = np.linalg.norm(v - a1[:, None] * t1 - a2[:, None] * t2, axis=1) / np.linalg.norm(v, axis=1)
    i = int(np.argmax(r))
    return ResidualReport(float(r.max()), float(r.mean()), (float(s1[i]), float(s2[i])), r.size)


def e17_limit_angles(surface: ParamSurface, t0: float = 0.0):
    q, p, alpha = surface.params["q"], surface.params["p"], surface.params["alpha"]
    return [alpha + 2 * math.pi * p * t0 / (q * surface.L) + 2 * math.pi * p * j / q
            for j in range(q)]


def dK_sequence(surface: ParamSurface, limit: PointCloud, scales, t0: float = 0.0,
                n: int = 200):
    out = []
    for s in scales:
        a = sample_ball(dilate(surface, s, t0), 2.2, n=n)
        out.append(geometric_distance(a, limit))
    return out
