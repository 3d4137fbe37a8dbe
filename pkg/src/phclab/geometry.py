"""Model 2-form, flat metric and almost complex structure on S^1 x B^3.

Coordinates are ordered ``(t, x, y, z)`` everywhere; arrays of points have
shape ``(..., 4)``.  The 2-form is

    omega = dt ^ (x dx + y dy - 2z dz) + x dy^dz - y dx^dz - 2z dx^dy,

its pointwise size is ``g = (x^2 + y^2 + 4 z^2)^(1/2)`` and ``J`` is the
compatible almost complex structure, singular on the circle x = y = z = 0.
Everything here is closed-form polynomial or rational arithmetic.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import OutOfRange, SingularPoint

# index pairs (i < j) of the six independent 2-form components
PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))


@dataclass(frozen=True)
class CartesianPoint4:
    """A point of S^1 x B^3 with circle circumference ``L``."""

    t: float
    x: float
    y: float
    z: float
    L: float = 1.0

    def __post_init__(self):
        if self.L <= 0:
            raise OutOfRange("circle length must be positive")
        if self.x**2 + self.y**2 + self.z**2 >= 1.0:
            raise OutOfRange("(x, y, z) must lie in the open unit ball")
        object.__setattr__(self, "t", float(self.t) % self.L)

    def as_array(self) -> np.ndarray:
        return np.array([self.t, self.x, self.y, self.z])


@dataclass(frozen=True)
class TangentVector4:
    components: tuple

    def __post_init__(self):
        c = tuple(float(v) for v in self.components)
        if len(c) != 4 or not np.all(np.isfinite(c)):
            raise ValueError("a tangent vector has four finite components")
        object.__setattr__(self, "components", c)

    def as_array(self) -> np.ndarray:
        return np.array(self.components)


@dataclass(frozen=True)
class TwoFormValue:
    """A 2-form at a point, stored by its upper-triangle coefficients.

    ``upper[k]`` is the coefficient of ``dx_i ^ dx_j`` for ``(i, j) = PAIRS[k]``.
    """

    upper: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        return _upper_to_matrix(self.upper)

    def __call__(self, v, w) -> np.ndarray:
        return np.einsum("...i,...ij,...j->...", np.asarray(v), self.matrix, np.asarray(w))

    def wedge_self(self) -> np.ndarray:
        """Coefficient of dt^dx^dy^dz in the wedge square."""
        c = self.upper
        return 2.0 * (c[..., 0] * c[..., 5] - c[..., 1] * c[..., 4] + c[..., 2] * c[..., 3])


@dataclass(frozen=True)
class ActionCoords:
    """The coordinates (t, f, h, phi) together with rho and g.

    ``phi`` is ``None`` and ``on_axis`` is set when rho = 0.
    """

    t: float
    f: float
    h: float
    phi: Optional[float]
    rho: float
    g: float
    on_axis: bool = False


def _as_points(p) -> np.ndarray:
    if isinstance(p, CartesianPoint4):
        return p.as_array()
    return np.asarray(p, dtype=float)


def _upper_to_matrix(upper) -> np.ndarray:
    upper = np.asarray(upper, dtype=float)
    m = np.zeros(upper.shape[:-1] + (4, 4))
    for k, (i, j) in enumerate(PAIRS):
        m[..., i, j] = upper[..., k]
        m[..., j, i] = -upper[..., k]
    return m


def wedge(a, b) -> np.ndarray:
    """Antisymmetric matrix of the 2-form ``a ^ b`` for covectors ``a``, ``b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return a[..., :, None] * b[..., None, :] - a[..., None, :] * b[..., :, None]


def norm_g(p) -> np.ndarray:
    p = _as_points(p)
    x, y, z = p[..., 1], p[..., 2], p[..., 3]
    return np.sqrt(x * x + y * y + 4.0 * z * z)


def omega_at(p) -> TwoFormValue:
    p = _as_points(p)
    x, y, z = p[..., 1], p[..., 2], p[..., 3]
    upper = np.stack([x, y, -2.0 * z, -2.0 * z, -y, x], axis=-1)
    return TwoFormValue(upper)


def omega_matrix(p) -> np.ndarray:
    return omega_at(p).matrix


def jay_at(p) -> np.ndarray:
    """Matrix of J at ``p``; column k is the image of the k-th basis vector."""
    p = _as_points(p)
    x, y, z = p[..., 1], p[..., 2], p[..., 3]
    g = norm_g(p)
    if np.any(g == 0.0):
        raise SingularPoint("J is undefined on the circle x = y = z = 0")
    zero = np.zeros_like(x)
    cols = [
        np.stack([zero, -x, -y, 2.0 * z], axis=-1),
        np.stack([x, zero, 2.0 * z, y], axis=-1),
        np.stack([y, -2.0 * z, zero, -x], axis=-1),
        np.stack([-2.0 * z, -y, x, zero], axis=-1),
    ]
    return np.stack(cols, axis=-1) / g[..., None, None]


def apply_jay(p, v) -> np.ndarray:
    return np.einsum("...ij,...j->...i", jay_at(p), np.asarray(v, dtype=float))


def compatibility_residual(p, v, w) -> np.ndarray:
    """|omega(Jv, w)/g - <v, w>| for the flat product metric.

    With the orientation conventions of the 2-form above, ``omega(Jv, w)``
    (equivalently ``-omega(v, Jw)``) is the positive pairing, and the
    pointwise form norm is ``sqrt(2) g``.
    """
    p = _as_points(p)
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    jv = apply_jay(p, v)
    val = omega_at(p)(jv, w) / norm_g(p)
    return np.abs(val - np.einsum("...i,...i->...", v, w))


# -- action coordinates ------------------------------------------------------

def f_of(p) -> np.ndarray:
    p = _as_points(p)
    return 0.5 * (p[..., 1] ** 2 + p[..., 2] ** 2 - 2.0 * p[..., 3] ** 2)


def h_of(p) -> np.ndarray:
    p = _as_points(p)
    return p[..., 3] * (p[..., 1] ** 2 + p[..., 2] ** 2)


def phi_of(p) -> np.ndarray:
    p = _as_points(p)
    return np.mod(np.arctan2(p[..., 2], p[..., 1]), 2.0 * np.pi)


def rho_of(p) -> np.ndarray:
    p = _as_points(p)
    return np.hypot(p[..., 1], p[..., 2])


def to_action_coords(p) -> ActionCoords:
    arr = _as_points(p)
    if arr.shape != (4,):
        raise ValueError("to_action_coords takes a single point")
    rho = float(rho_of(arr))
    on_axis = rho == 0.0
    return ActionCoords(
        t=float(arr[0]),
        f=float(f_of(arr)),
        h=float(h_of(arr)),
        phi=None if on_axis else float(phi_of(arr)),
        rho=rho,
        g=float(norm_g(arr)),
        on_axis=on_axis,
    )


def from_action_coords(t: float, f: float, h: float, phi: float) -> np.ndarray:
    """Inverse of :func:`to_action_coords` off the z-axis.

    Solves ``2 z^3 + 2 f z - h = 0`` on the branch with ``z^2 >= -f`` (where
    it is strictly increasing) and sets ``rho^2 = 2 f + 2 z^2``.
    """
    if h == 0.0:
        if f <= 0.0:
            raise ValueError("h = 0 with f <= 0 lies on the z-axis; phi is meaningless")
        z = 0.0
    else:
        lo = np.sqrt(max(-f, 0.0))
        hi = lo + 1.0
        poly = lambda zz: 2.0 * zz**3 + 2.0 * f * zz - abs(h)
        while poly(hi) < 0.0:
            hi *= 2.0
        from scipy.optimize import brentq

        z = np.copysign(brentq(poly, lo, hi, xtol=1e-16, rtol=1e-15), h)
    rho = np.sqrt(2.0 * f + 2.0 * z * z)
    return np.array([t, rho * np.cos(phi), rho * np.sin(phi), z])


def action_differentials(p):
    """Cartesian components of dt, df, dh and dphi (dphi needs rho > 0)."""
    p = _as_points(p)
    t, x, y, z = (p[..., k] for k in range(4))
    zero = np.zeros_like(x)
    one = np.ones_like(x)
    rho2 = x * x + y * y
    dt = np.stack([one, zero, zero, zero], axis=-1)
    df = np.stack([zero, x, y, -2.0 * z], axis=-1)
    dh = np.stack([zero, 2.0 * x * z, 2.0 * y * z, rho2], axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        dphi = np.stack([zero, -y / rho2, x / rho2, zero], axis=-1)
    return dt, df, dh, dphi


def dt_df_matrix(p) -> np.ndarray:
    dt, df, _, _ = action_differentials(p)
    return wedge(dt, df)


def dphi_dh_matrix(p) -> np.ndarray:
    """dphi ^ dh, written in its polynomial (axis-regular) form."""
    p = _as_points(p)
    x, y, z = p[..., 1], p[..., 2], p[..., 3]
    zero = np.zeros_like(x)
    return _upper_to_matrix(np.stack([zero, zero, zero, -2.0 * z, -y, x], axis=-1))


def action_form_residual(p) -> np.ndarray:
    """max |dt^df + dphi^dh - omega| using the chain-rule differentials."""
    dt, df, dh, dphi = action_differentials(p)
    diff = wedge(dt, df) + wedge(dphi, dh) - omega_matrix(p)
    return np.max(np.abs(diff), axis=(-2, -1))


# -- the primitive theta -----------------------------------------------------

class _Poly:
    """Sparse polynomial in (t, x, y, z): {exponent tuple: coefficient}."""

    def __init__(self, terms=None):
        self.terms = {k: v for k, v in (terms or {}).items() if v != 0}

    def __add__(self, other):
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0) + v
        return _Poly(out)

    def __sub__(self, other):
        return self + other.scale(-1)

    def scale(self, a):
        return _Poly({k: a * v for k, v in self.terms.items()})

    def diff(self, i: int):
        out = {}
        for k, v in self.terms.items():
            if k[i]:
                e = list(k)
                e[i] -= 1
                out[tuple(e)] = out.get(tuple(e), 0) + v * k[i]
        return _Poly(out)

    def __call__(self, p):
        p = _as_points(p)
        acc = np.zeros(p.shape[:-1])
        for k, v in self.terms.items():
            acc = acc + v * np.prod(p ** np.array(k), axis=-1)
        return acc


def _mono(t=0, x=0, y=0, z=0, c=1):
    return _Poly({(t, x, y, z): c})


# theta = (t df - 2 f dt - 3 h dphi)/3; with h dphi = z (x dy - y dx) every
# component is a polynomial, integer coefficients scaled by 1/3.
_THETA = (
    _mono(x=2, c=-1) + _mono(y=2, c=-1) + _mono(z=2, c=2),
    _mono(t=1, x=1) + _mono(y=1, z=1, c=3),
    _mono(t=1, y=1) + _mono(x=1, z=1, c=-3),
    _mono(t=1, z=1, c=-2),
)
_THETA = tuple(c.scale(1.0 / 3.0) for c in _THETA)
_OMEGA_POLY = {
    (0, 1): _mono(x=1), (0, 2): _mono(y=1), (0, 3): _mono(z=1, c=-2),
    (1, 2): _mono(z=1, c=-2), (1, 3): _mono(y=1, c=-1), (2, 3): _mono(x=1),
}


def theta_at(p) -> np.ndarray:
    """Cartesian components of the primitive theta (d theta = omega)."""
    return np.stack([c(p) for c in _THETA], axis=-1)


def dtheta_polynomials():
    """Exact coefficients of d theta - omega, one polynomial per index pair."""
    out = {}
    for i, j in PAIRS:
        out[(i, j)] = _THETA[j].diff(i) - _THETA[i].diff(j) - _OMEGA_POLY[(i, j)]
    return out


def dtheta_check(p=None) -> float:
    """max |d theta - omega|; zero polynomials give exactly 0."""
    polys = dtheta_polynomials()
    if p is None:
        return float(sum(len(q.terms) for q in polys.values()))
    return float(max(np.max(np.abs(q(p))) for q in polys.values()))


def theta_norm_identity_residual(p) -> np.ndarray:
    """|t^2|df|^2 + 4f^2|dt|^2 + 9h^2|dphi|^2 - (t^2+rho^2+z^2) g^2| (rho > 0)."""
    p = _as_points(p)
    t, z = p[..., 0], p[..., 3]
    rho2 = p[..., 1] ** 2 + p[..., 2] ** 2
    g2 = rho2 + 4.0 * z * z
    f = f_of(p)
    h = h_of(p)
    lhs = t * t * g2 + 4.0 * f * f + 9.0 * h * h / rho2
    return np.abs(lhs - (t * t + rho2 + z * z) * g2)


def random_points(n: int, rng=None, L: float = 1.0, radius: float = 1.0) -> np.ndarray:
    """Uniform samples of S^1 x (ball of given radius)."""
    rng = np.random.default_rng(rng)
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    r = radius * rng.random(n) ** (1.0 / 3.0)
    t = L * rng.random(n)
    return np.column_stack([t, v * r[:, None]])


def identity_suite(n: int = 10_000, seed: int = 0, L: float = 1.0) -> dict:
    """Largest violation of each pointwise identity over ``n`` random points."""
    rng = np.random.default_rng(seed)
    p = random_points(n, rng, L)
    v = rng.normal(size=(n, 4))
    w = rng.normal(size=(n, 4))
    g = norm_g(p)
    jm = jay_at(p)
    eye = np.eye(4)
    return {
        "omega_wedge_omega": float(np.max(np.abs(omega_at(p).wedge_self() - 2.0 * g * g))),
        "j_squared": float(np.max(np.abs(jm @ jm + eye))),
        "compatibility": float(np.max(compatibility_residual(p, v, w)
                                      / (np.linalg.norm(v, axis=1) * np.linalg.norm(w, axis=1)))),
        "theta_norm": float(np.max(theta_norm_identity_residual(p))),
        "dtheta_omega": dtheta_check(p),
        "action_form": float(np.max(np.abs(action_form_residual(p)))),
    }
