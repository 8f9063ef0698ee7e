"""Global (macroscopic) spectral density of the Hermitised product.

After the scaling ``x -> sqrt(2) x / n^(M + 1/2)`` the eigenvalue density
tends to the two-sided Fuss--Catalan law ``rho(x) = |x| rho_FC(x^2)`` with
Fuss--Catalan parameter ``p = 2M + 1``.  Two independent evaluations are
provided:

* an elementary parametrisation by an angle ``phi in (0, pi/(2M+2))``;
* the boundary value of the Stieltjes transform, from the algebraic equation
  ``z^2 (w - 1) = w^(2M+2)`` for ``w = z G(z)``, with the physical root
  followed by continuation from ``|z|`` large where ``w ~ 1``.

The Laguerre-side equation ``w^(p+1) - z w + z = 0`` for the one-sided
Fuss--Catalan law is solved the same way and serves as a third check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import elementwise

from .errors import BranchTrackingError, OriginSingularityError
from .sampling import EnsembleParams

__all__ = [
    "GlobalDensityModel",
    "fuss_catalan_moment",
    "support_edge",
    "phi_max",
    "x0_of_phi",
    "phi_of_x0",
    "global_density_parametric",
    "global_cdf",
    "global_moment",
    "global_normalisation",
    "stieltjes_density",
    "fuss_catalan_density",
    "global_scaling_map",
    "STIELTJES_EPS",
]

STIELTJES_EPS = 1e-8


def fuss_catalan_moment(p: int, k: int) -> Fraction:
    """Fuss--Catalan number ``binom((p+1)k, k) / (pk + 1)`` as an exact rational."""
    if p < 1 or k < 0:
        raise ValueError("need p >= 1 and k >= 0")
    return Fraction(math.comb((p + 1) * k, k), p * k + 1)


def support_edge(M: int) -> float:
    """Right end of the support, ``sqrt((2M+2)^(2M+2) / (2M+1)^(2M+1))`` (the ``phi -> 0`` limit)."""
    return math.sqrt((2 * M + 2) ** (2 * M + 2) / (2 * M + 1) ** (2 * M + 1))


def phi_max(M: int) -> float:
    return math.pi / (2 * M + 2)


def _log_x0(M: int, phi):
    phi = np.asarray(phi, dtype=float)
    return ((M + 1) * np.log(np.sin((2 * M + 2) * phi))
            - 0.5 * np.log(np.sin(phi))
            - (M + 0.5) * np.log(np.sin((2 * M + 1) * phi)))


def x0_of_phi(M: int, phi):
    """Positive abscissa ``x0(phi)``; decreases from the support edge to 0."""
    return np.exp(_log_x0(M, phi))


def _rho_of_phi(M: int, phi):
    s1 = np.sin(phi)
    sp = np.sin((2 * M + 1) * phi)
    sq = np.sin((2 * M + 2) * phi)
    return np.sqrt(s1 / sp) * (sp / sq) ** M * s1 / math.pi


def _jacobian_density(M: int, phi):
    """``rho(x0(phi)) |dx0/dphi|``, written so that it stays bounded at both ends."""
    s1 = np.sin(phi)
    sp = np.sin((2 * M + 1) * phi)
    sq = np.sin((2 * M + 2) * phi)
    cq = np.cos((2 * M + 2) * phi)
    dlog = ((M + 1) * (2 * M + 2) * cq
            - sq * (0.5 * np.cos(phi) / s1 + (M + 0.5) * (2 * M + 1) * np.cos((2 * M + 1) * phi) / sp))
    return s1 / sp * np.abs(dlog) / math.pi


def phi_of_x0(M: int, x):
    """Angle with ``x0(phi) = |x|``, by bracketed root finding on ``log x0``."""
    ax = np.abs(np.asarray(x, dtype=float))
    lo = np.full(ax.shape, 1e-300)
    hi = np.full(ax.shape, phi_max(M))
    target = np.log(ax)
    res = elementwise.find_root(
        lambda p, t: _log_x0(M, np.clip(p, 1e-300, phi_max(M) * (1 - 1e-16))) - t,
        (lo, hi), args=(target,),
        tolerances=dict(xatol=0.0, xrtol=4 * np.finfo(float).eps),
    )
    if not np.all(res.success):
        raise BranchTrackingError("root bracketing in the angle variable failed")
    return res.x


def global_density_parametric(M: int, x):
    """Two-sided Fuss--Catalan density via the angle parametrisation.

    Returns 0 outside ``(-edge, edge)``; ``x = 0`` is a singular point.
    """
    xs = np.asarray(x, dtype=float)
    if np.any(xs == 0):
        raise OriginSingularityError("the global density diverges at the origin")
    out = np.zeros(xs.shape)
    inside = np.abs(xs) < support_edge(M)
    if np.any(inside):
        out[inside] = _rho_of_phi(M, phi_of_x0(M, xs[inside]))
    return out if xs.ndim else float(out)


def _phi_rule(M: int, panels: int = 16, order: int = 32):
    t, w = leggauss(order)
    edges = np.linspace(0.0, phi_max(M), panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    return (mid[:, None] + half[:, None] * t).ravel(), (half[:, None] * w).ravel()


def global_moment(M: int, k: int) -> float:
    """``int x^k rho(x) dx`` by quadrature in the angle variable (odd ``k`` vanish)."""
    if k % 2:
        return 0.0
    phi, w = _phi_rule(M)
    return float(2.0 * np.sum(w * x0_of_phi(M, phi) ** k * _jacobian_density(M, phi)))


def global_normalisation(M: int) -> float:
    return global_moment(M, 0)


def global_cdf(M: int, x):
    """Distribution function of the two-sided law, by Gauss--Legendre in the angle."""
    xs = np.asarray(x, dtype=float)
    ax = np.minimum(np.abs(xs), support_edge(M))
    phi0 = np.zeros(ax.shape)
    pos = ax > 0
    inner = pos & (ax < support_edge(M))
    if np.any(inner):
        phi0[inner] = phi_of_x0(M, ax[inner])
    t, w = leggauss(48)
    b = phi_max(M)
    half = 0.5 * (b - phi0)
    nodes = (0.5 * (b + phi0))[..., None] + half[..., None] * t
    mass = np.sum(_jacobian_density(M, nodes) * w, axis=-1) * half
    mass = np.where(pos, mass, 0.0)
    out = np.clip(0.5 + np.sign(xs) * mass, 0.0, 1.0)
    # exact values outside the support
    out = np.where(np.abs(xs) >= support_edge(M), (xs > 0).astype(float), out)
    return out if xs.ndim else float(out)


# ---------------------------------------------------------------------------
# Stieltjes-transform route


def _track_physical_root(coeffs_of, z_end: complex, z_start: complex, w_start: complex,
                         max_steps: int = 100_000) -> complex:
    """Follow the root of ``poly(z)`` from ``z_start`` to ``z_end`` along a straight path.

    Steps are adapted so that the tracked root moves by less than 10% of the
    smallest distance between roots; the path is parametrised by
    ``log(Im z)`` so that approaching the real axis costs few steps.
    """
    def roots(z):
        return np.roots(coeffs_of(z))

    def nearest(r, w):
        return r[np.argmin(np.abs(r - w))]

    def gap(r):
        d = np.abs(r[:, None] - r[None, :])
        d[np.diag_indices_from(d)] = np.inf
        return float(np.min(d))

    r = roots(z_start)
    w = nearest(r, w_start)
    s0, s1 = math.log(z_start.imag), math.log(z_end.imag)
    s, ds = s0, (s1 - s0) / 64
    steps = 0
    while s > s1:
        step = max(ds, s1 - s)
        z = complex(z_end.real, math.exp(s + step))
        r = roots(z)
        g = gap(r)
        cand = nearest(r, w)
        if abs(cand - w) < 0.1 * g:
            w, s = cand, s + step
            ds = max(ds * 1.5, s1 - s0)
        else:
            ds *= 0.5
            if abs(ds) < 1e-12:
                raise BranchTrackingError(f"roots collide near z = {z}")
        steps += 1
        if steps > max_steps:
            raise BranchTrackingError("continuation did not reach the real axis")
    # consecutive roots must be well separated at the end point as well
    if gap(roots(z_end)) < 1e-10:
        raise BranchTrackingError(f"root collision at z = {z_end}")
    return w


def _hermite_side_coeffs(M: int):
    deg = 2 * M + 2

    def coeffs(z):
        c = np.zeros(deg + 1, dtype=complex)
        c[0] = 1.0
        c[deg - 1] = -z * z
        c[deg] = z * z
        return c

    return coeffs


def _laguerre_side_coeffs(p: int):
    deg = p + 1

    def coeffs(z):
        c = np.zeros(deg + 1, dtype=complex)
        c[0] = 1.0
        c[deg - 1] = -z
        c[deg] = z
        return c

    return coeffs


def _boundary_density(coeffs, x: float, edge: float, eps: float) -> float:
    z = complex(x, eps)
    start = complex(x, 10.0 * max(edge, abs(x)))
    w = _track_physical_root(coeffs, z, start, 1.0 + 0j)
    return max(-(w / z).imag / math.pi, 0.0)


def _with_fallback(fn, eps: float) -> float:
    try:
        return fn(eps)
    except BranchTrackingError:
        # Richardson extrapolation eps -> 0 from two larger offsets
        e1 = max(1e3 * eps, 1e-6)
        return 2.0 * fn(e1) - fn(2.0 * e1)


def stieltjes_density(M: int, x, eps: float = STIELTJES_EPS):
    """Density ``-Im G(x + i eps) / pi`` from the degree ``2M+2`` algebraic equation."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs == 0):
        raise OriginSingularityError("the Stieltjes route needs x != 0")
    coeffs = _hermite_side_coeffs(M)
    edge = support_edge(M)
    out = np.array([
        _with_fallback(lambda e, xv=xv: _boundary_density(coeffs, xv, edge, e), eps) for xv in xs
    ])
    return out if np.ndim(x) else float(out[0])


def fuss_catalan_density(p: int, t, eps: float = STIELTJES_EPS):
    """One-sided Fuss--Catalan density with parameter ``p`` from ``w^(p+1) - t w + t = 0``."""
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts <= 0):
        raise ValueError("the Fuss--Catalan density lives on t > 0")
    coeffs = _laguerre_side_coeffs(p)
    edge = (p + 1) ** (p + 1) / p ** p
    out = np.array([
        _with_fallback(lambda e, tv=tv: _boundary_density(coeffs, tv, edge, e), eps) for tv in ts
    ])
    return out if np.ndim(t) else float(out[0])


# ---------------------------------------------------------------------------


def global_scaling_map(params: EnsembleParams, raw_eigenvalues):
    """Map raw eigenvalues to the global scale, ``sqrt(2) x / n^(M + 1/2)``."""
    n, M = params.base_dim, params.depth
    return math.sqrt(2.0) * np.asarray(raw_eigenvalues, dtype=float) / n ** (M + 0.5)


@dataclass
class GlobalDensityModel:
    """Two-sided Fuss--Catalan law of a depth-``M`` product on a sample grid."""

    product_depth: int
    grid: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def fc_parameter(self) -> int:
        return 2 * self.product_depth + 1

    @property
    def support_edge(self) -> float:
        return support_edge(self.product_depth)

    def density(self, x=None, route: str = "parametric"):
        x = self.grid if x is None else x
        if route == "parametric":
            return global_density_parametric(self.product_depth, x)
        if route == "stieltjes":
            return stieltjes_density(self.product_depth, x)
        raise ValueError(f"unknown route {route!r}")

    def cdf(self, x):
        return global_cdf(self.product_depth, x)
