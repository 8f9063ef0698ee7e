"""Limiting correlation kernel at the origin (hard edge) and its reductions.

The limiting kernel of the Hermitised product ensemble is evaluated by three
independent routes:

``g-product-integral``
    A ``u in [0, 1]`` integral of a product of two Meijer G-functions, one a
    residue series and one a Mellin--Barnes line integral.
``double-contour``
    A direct quadrature of the double Mellin--Barnes integral, with the
    ``s`` contour wrapped around ``[0, inf)`` and the ``t`` line at
    ``Re t = -3/4``.
``unified``
    An integral over the right unit semicircle of the product of two
    G-functions of complex argument; this form treats both signs of ``x``
    at once.

The module also provides the Meijer G-kernel, the Muttalib--Borodin
(Wright--Bessel) hard-edge kernel and the closed forms used as oracles
(sine kernel, Bessel kernel).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

from .biortho_kernel import KernelValue
from .errors import NonConvergenceError, OriginSingularityError
from .sampling import EnsembleParams
from .special_functions import (
    GammaProductIntegrand,
    VerticalContour,
    _truncation,
    gauss_legendre_panels,
    meijer_g_integrand,
    meijer_g_m0,
    meijer_g_series,
    mellin_barnes,
    wright_bessel,
)

__all__ = [
    "HARD_EDGE_REPRESENTATIONS",
    "HardEdgeQuery",
    "hard_kernel",
    "meijer_g_kernel",
    "even_parameter_map",
    "odd_parameter_map",
    "mb_hard_kernel",
    "mb_parameters_from_theta",
    "mb_meijer_identity",
    "wright_bessel_kernel",
    "sine_kernel",
    "sine_kernel_parts",
    "bessel_kernel",
    "unified_kernel_bessel",
    "scaled_finite_kernel",
]

HARD_EDGE_REPRESENTATIONS = ("g-product-integral", "double-contour", "unified")

# t line of the double contour; needs -1 < c < -1/2 for every depth
_T_ABSCISSA = -0.75
# half height of the rectangle part of the s contour
_S_HEIGHT = 1.0
_LOG_DROP = 45.0


@dataclass(frozen=True)
class HardEdgeQuery:
    """Point ``(x, y)``, ensemble parameters and the representation to use."""

    x: float
    y: float
    params: EnsembleParams
    representation: str = "g-product-integral"

    def __post_init__(self):
        if self.x == 0 or self.y == 0:
            raise OriginSingularityError("the limiting kernel is defined for x, y != 0")
        if self.representation not in HARD_EDGE_REPRESENTATIONS:
            raise ValueError(
                f"unknown representation {self.representation!r}; "
                f"choose from {HARD_EDGE_REPRESENTATIONS}"
            )


# ---------------------------------------------------------------------------
# u-integrals on [0, 1]


def _unit_interval_rule(w_max: float = 80.0, order: int = 16):
    """Nodes and weights on ``(0, 1]`` that resolve algebraic endpoint singularities.

    Uses ``u = exp(-w)`` with Gauss--Legendre panels of unit width in ``w``,
    which is a geometric splitting of ``[0, 1]`` toward ``u = 0``.
    """
    w, wt = gauss_legendre_panels(0.0, w_max, int(math.ceil(w_max)), order)
    u = np.exp(-w)
    return u, wt * u


def _u_integral(f, w_max: float = 80.0, what: str = "u-integrand", order: int = 16):
    """``int_0^1 f(u) du`` for ``f`` vectorised over ``u``.

    A power-law singularity ``u^a`` at the origin makes the per-panel
    contributions geometric in ``w = -log u``; when the last panels show
    such a ratio the remaining tail is summed in closed form.  Otherwise a
    non-negligible tail triggers a warning.
    """
    u, wt = _unit_interval_rule(w_max, order)
    vals = wt * f(u)
    panels = vals.reshape(-1, order).sum(axis=1)
    total = float(np.sum(vals))
    scale = max(abs(total), float(np.sum(np.abs(vals))) * 1e-3)
    tail = abs(float(panels[-1]))
    if tail <= 1e-10 * scale:
        return total
    r1, r2 = panels[-1] / panels[-2], panels[-2] / panels[-3]
    if 0 < r1 < 1 and abs(r1 - r2) <= 1e-3 * r1:
        return total + float(panels[-1]) * r1 / (1 - r1)
    warnings.warn(
        f"{what} is not negligible near u = 0 (last panel {tail:.2e}); "
        "the endpoint singularity may not be resolved",
        RuntimeWarning,
        stacklevel=3,
    )
    return total


# ---------------------------------------------------------------------------
# Meijer G-kernel and the g-product route


def meijer_g_kernel(depth: int, nu, x: float, y: float) -> float:
    """Meijer G-kernel ``int_0^1 G^{1,0}_{0,M+1}(xu | -nu) G^{M,0}_{0,M+1}(yu | nu') du``.

    ``nu = (nu_1..nu_M)`` with ``nu_0 = 0`` implied; the first factor has
    parameters ``(0, -nu_1, .., -nu_M)`` and the second ``(nu_M, .., nu_1, 0)``.
    Requires ``x, y > 0``.
    """
    nu = [float(v) for v in nu]
    if len(nu) != depth:
        raise ValueError(f"expected {depth} nu entries, got {len(nu)}")
    if depth < 1:
        raise ValueError("the Meijer G-kernel needs depth >= 1")
    if not (x > 0 and y > 0):
        raise ValueError("meijer_g_kernel requires positive arguments")
    b_first = [0.0] + [-v for v in nu]
    b_second = nu[::-1] + [0.0]

    def f(u):
        return meijer_g_m0(1, b_first, x * u) * meijer_g_m0(depth, b_second, y * u)

    return _u_integral(f, what="Meijer G-kernel integrand")


def even_parameter_map(nu_full) -> list:
    """Indices ``nu'_1..nu'_{2M+1}`` of the even part: ``{nu/2, (nu-1)/2}`` minus ``nu'_0 = 0``."""
    out = []
    for v in nu_full:
        out += [v / 2.0, (v - 1) / 2.0]
    out.remove(0.0)
    return out


def odd_parameter_map(nu_full) -> list:
    """Indices ``nu'_1..nu'_{2M+1}`` of the odd part: ``{nu/2, (nu+1)/2}`` minus ``nu'_0 = 0``."""
    out = []
    for v in nu_full:
        out += [v / 2.0, (v + 1) / 2.0]
    out.remove(0.0)
    return out


def _g_product(params: EnsembleParams, ax: float, ay: float):
    """Even and odd parts at ``|x|, |y|`` from the Meijer G-kernel with ``2M+1`` factors."""
    M = params.depth
    scale = 4.0 ** M
    X, Y = ax * ax / scale, ay * ay / scale
    even = ay / scale * meijer_g_kernel(2 * M + 1, even_parameter_map(params.nu_full), X, Y)
    odd = ax / scale * meijer_g_kernel(2 * M + 1, odd_parameter_map(params.nu_full), X, Y)
    return even, odd


# ---------------------------------------------------------------------------
# double contour route


def _s_factor_log(odd: bool, nu, s):
    """``log`` of the ``s``-dependent Gamma ratio (poles at the enclosed integers)."""
    lg = special.loggamma
    if odd:
        out = lg((1 - s) / 2) - lg((s + 2) / 2)
    else:
        out = lg(-s / 2) - lg((s + 1) / 2)
    for v in nu:
        out = out - lg(v + s + 1)
    return out


def _t_integrand(odd: bool, nu, ay: float) -> GammaProductIntegrand:
    """``t``-dependent Gamma ratio times ``|y|^(-t-1)``."""
    num = [(1.0, 0.5) if odd else (0.5, 0.5)] + [(v + 1.0, 1.0) for v in nu]
    den = [(0.5, -0.5) if odd else (0.0, -0.5)]
    return GammaProductIntegrand(num, den, ay, -1.0, -1.0)


def _s_contour(odd: bool, nu, log_ax: float, c: float, height: float):
    """Nodes and weights of ``(2 pi i)^-1 oint ds`` on the contour around ``[0, inf)``.

    The contour comes in from ``+inf`` along ``Im s = -height``, runs up the
    segment ``Re s = c/2`` and returns to ``+inf`` along ``Im s = height``
    (negative orientation).
    """
    left = c / 2.0
    # ray length: scan until the integrand has dropped far below its peak
    v = left + 0.5 * np.arange(1, 2000)
    mag = _s_factor_log(odd, nu, v + 1j * height).real + v * log_ax
    peak = max(float(np.max(mag)), float(_s_factor_log(odd, nu, left + 0j).real
                                         + left * log_ax))
    small = np.nonzero(mag > peak - _LOG_DROP)[0]
    v_max = float(v[small[-1]]) + 2.0 if small.size else left + 2.0
    panels = int(math.ceil((v_max - left) / 0.5))
    rv, rw = gauss_legendre_panels(left, left + 0.5 * panels, panels)
    sv, sw = gauss_legendre_panels(-height, height, 8)
    s = np.concatenate([rv - 1j * height, left + 1j * sv, rv + 1j * height])
    ds = np.concatenate([-rw, 1j * sw, rw]).astype(complex)
    return s, ds / (2j * math.pi)


def _double_contour_part(odd: bool, params: EnsembleParams, ax: float, ay: float,
                         c: float = _T_ABSCISSA, height: float = _S_HEIGHT):
    if not -1.0 < c < -0.5:
        raise ValueError("the t line must satisfy -1 < c < -1/2")
    nu = params.nu
    if ax == 0.0:
        if odd:
            return 0.0, 0.0
        ax = 1e-300
    log_ax = math.log(ax)
    s, ws = _s_contour(odd, nu, log_ax, c, height)
    ls = _s_factor_log(odd, nu, s) + s * log_ax
    ls_shift = float(np.max(ls.real))
    a_s = ws * np.exp(ls - ls_shift)

    integrand = _t_integrand(odd, nu, ay)
    try:
        T, _ = _truncation(integrand, c, 0.0, t_max=2000.0)
    except NonConvergenceError as exc:
        raise NonConvergenceError(
            "double-contour integrand decays only algebraically along the t line "
            f"for depth {params.depth}; use the g-product or unified representation"
        ) from exc
    # nearest singularities: the Gamma pole at t = -1 and the s contour at Re s = c/2
    d = min(c + 1.0, c / 2.0 - c)
    h = 2 * math.pi * d / (_LOG_DROP + 5.0)
    n = int(math.ceil(2 * T / h))
    n += n % 2
    line = VerticalContour(c, T, max(n, 512))
    vals = []
    for coarse in (False, True):
        t, wt = line.quadrature(coarse=coarse)
        lt = integrand.log_value(t)
        lt_shift = float(np.max(lt.real))
        b_t = wt * np.exp(lt - lt_shift)
        mat = 1.0 / (s[:, None] - t[None, :])
        vals.append((a_s @ mat @ b_t) * math.exp(ls_shift + lt_shift))
        if not coarse:
            absint = (np.abs(a_s) @ np.abs(mat) @ np.abs(b_t)) * math.exp(ls_shift + lt_shift)
    value, err = 0.5 * vals[0].real, 0.5 * abs(vals[0] - vals[1])
    if err > 1e-9 * max(abs(value), 0.5 * absint):
        raise NonConvergenceError(f"double-contour quadrature error {err:.2e} too large")
    return value, err


def _double_contour(params: EnsembleParams, ax: float, ay: float):
    even, _ = _double_contour_part(False, params, ax, ay)
    odd, _ = _double_contour_part(True, params, ax, ay)
    return even, odd


# ---------------------------------------------------------------------------
# unified route over the right unit semicircle


def _semicircle_rule(nodes: int = 192):
    theta, wt = gauss_legendre_panels(-math.pi / 2, math.pi / 2, nodes // 16)
    v = np.exp(1j * theta)
    # dv / (2 pi i) = e^{i theta} d theta / (2 pi)
    return v, wt * v / (2 * math.pi)


def _unified_total(params: EnsembleParams, x: float, y: float, nodes: int = 192) -> float:
    """``2 * int_{C_R} dv/(2 pi i) G^{1,0}(-sgn(y) X v | 0, -nu) G^{M+1,0}(|Y| v | 0, nu)``
    with ``X, Y = 2x, 2y``."""
    M = params.depth
    X, Y = 2.0 * x, 2.0 * y
    b_first = [0.0] + [-float(v) for v in params.nu]
    b_second = [0.0] + [float(v) for v in params.nu]
    sg = 1.0 if Y >= 0 else -1.0

    def integral(n):
        v, wv = _semicircle_rule(n)
        first = meijer_g_series(b_first, -sg * X * v)
        if M == 0:
            second = meijer_g_series(b_second, abs(Y) * v)
        else:
            second = mellin_barnes(meijer_g_integrand(M + 1, b_second), abs(Y) * v)
        return complex(np.sum(wv * first * second))

    val = integral(nodes)
    coarse = integral(nodes // 2)
    if abs(val - coarse) > 1e-8 * max(abs(val), 1e-300) + 1e-13:
        raise NonConvergenceError(
            f"semicircle quadrature did not settle ({abs(val - coarse):.2e})"
        )
    return 2.0 * val.real


def _unified(params: EnsembleParams, x: float, y: float):
    plus = _unified_total(params, x, y)
    minus = _unified_total(params, -x, y)
    return 0.5 * (plus + minus), 0.5 * (plus - minus)


def unified_kernel_bessel(nu: float, x: float, y: float, nodes: int = 192) -> float:
    """Depth-one unified kernel through modified Bessel functions.

    ``K(x, y) = 2 k(2x, 2y)`` with
    ``k(x, y) = (1 / pi i) int_{C_R} z^(-nu/2) I_nu(2 sqrt z) w^(nu/2) K_nu(2 sqrt w) dv``,
    ``z = sgn(y) x v``, ``w = |y| v``.
    """
    X, Y = 2.0 * x, 2.0 * y
    sg = 1.0 if Y >= 0 else -1.0

    def integral(n):
        v, wv = _semicircle_rule(n)
        rz = np.sqrt((sg * X * v).astype(complex))
        rw = np.sqrt((abs(Y) * v).astype(complex))
        # z^(-nu/2) I_nu(2 sqrt z) is entire; take the series near z = 0
        with np.errstate(invalid="ignore", divide="ignore"):
            first = np.where(np.abs(rz) > 1e-8, rz ** (-nu) * special.iv(nu, 2 * rz),
                             1.0 / special.gamma(nu + 1.0))
        second = 2.0 * rw ** nu * special.kv(nu, 2 * rw)
        return complex(np.sum(wv * first * second))

    return 2.0 * integral(nodes).real


# ---------------------------------------------------------------------------
# public dispatcher


def hard_kernel(query: HardEdgeQuery) -> KernelValue:
    """Limiting kernel at ``(x, y)`` with its even/odd split.

    The double-contour route raises :class:`NonConvergenceError` at depth 0,
    where its ``t`` integrand decays only algebraically.
    """
    p, x, y = query.params, float(query.x), float(query.y)
    rep = query.representation
    if rep == "unified":
        even, odd = _unified(p, x, y)
        return KernelValue(x, y, even, odd)
    ax, ay = abs(x), abs(y)
    if rep == "g-product-integral":
        if p.depth == 0:
            # the 2M+1 = 1 kernel is elementary; keep the u-integral form
            even = ay * _u_integral(
                lambda u: meijer_g_series([0.0, 0.5], ax * ax * u)
                * meijer_g_series([-0.5, 0.0], ay * ay * u)
            )
            odd = ax * _u_integral(
                lambda u: meijer_g_series([0.0, -0.5], ax * ax * u)
                * meijer_g_series([0.5, 0.0], ay * ay * u)
            )
        else:
            even, odd = _g_product(p, ax, ay)
    else:
        even, odd = _double_contour(p, ax, ay)
    sg = float(np.sign(x) * np.sign(y))
    return KernelValue(x, y, even, sg * odd)


# ---------------------------------------------------------------------------
# Muttalib--Borodin hard-edge kernel


def wright_bessel_kernel(a: float, theta: float, X: float, Y: float) -> float:
    """Wright--Bessel kernel ``theta int_0^1 (Xu)^a J_{(a+1)/theta,1/theta}(Xu) J_{a+1,theta}((Yu)^theta) du``.

    ``J_{a,b}(z) = sum_k (-z)^k / (k! Gamma(a + b k))``; requires ``X, Y > 0``.
    """
    if not theta > 0:
        raise ValueError("theta must be positive")
    if not (X > 0 and Y > 0):
        raise ValueError("wright_bessel_kernel requires positive arguments")

    def f(u):
        return ((X * u) ** a * wright_bessel((a + 1) / theta, 1.0 / theta, X * u)
                * wright_bessel(a + 1.0, theta, (Y * u) ** theta))

    return theta * _u_integral(f, what="Wright-Bessel kernel integrand")


def mb_parameters_from_theta(alpha: float, theta: int) -> list:
    """Meijer G-kernel indices matching the Wright--Bessel kernel at integer ``theta``.

    ``nu_m = (alpha + m - theta) / theta`` for ``m = 1..theta`` (with
    ``nu_0 = 0``), so that

        X^(1/theta - 1) K^(alpha, theta)(theta X^(1/theta), theta Y^(1/theta))
            = K_Meijer^theta(Y, X).

    Both sides have Mellin transform ``prod_m Gamma(s + nu_m) / Gamma(1 - s)``
    in the first argument, by Gauss's multiplication formula.
    """
    theta = int(theta)
    if theta < 1:
        raise ValueError("theta must be a positive integer")
    return [(alpha + m - theta) / theta for m in range(1, theta + 1)]


def mb_meijer_identity(alpha: float, theta: int, X: float, Y: float) -> tuple[float, float]:
    """Both sides of the integer-``theta`` identity between the two hard-edge kernels."""
    lhs = X ** (1.0 / theta - 1.0) * wright_bessel_kernel(
        alpha, theta, theta * X ** (1.0 / theta), theta * Y ** (1.0 / theta)
    )
    rhs = meijer_g_kernel(theta, mb_parameters_from_theta(alpha, theta), Y, X)
    return lhs, rhs


def mb_hard_kernel(alpha: float, theta: float, x: float, y: float) -> KernelValue:
    """Hard-edge kernel of the Hermite Muttalib--Borodin ensemble ``|y|^alpha e^{-y^2}``.

    Even part ``K^((alpha-1)/2, theta)(x^2, y^2)``, odd part
    ``sgn(xy) |x|^theta |y| K^((alpha+theta)/2, theta)(x^2, y^2)``.
    """
    if x == 0 or y == 0:
        raise OriginSingularityError("the hard-edge kernel is evaluated off the origin")
    ax, ay = abs(x), abs(y)
    even = wright_bessel_kernel((alpha - 1) / 2, theta, ax * ax, ay * ay)
    odd = ax ** theta * ay * wright_bessel_kernel((alpha + theta) / 2, theta, ax * ax, ay * ay)
    return KernelValue(x, y, even, float(np.sign(x) * np.sign(y)) * odd)


# ---------------------------------------------------------------------------
# closed-form oracles


def sine_kernel(x, y):
    """``sin 2(x - y) / (pi (x - y))``, the depth-zero limiting kernel."""
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return 2.0 / math.pi * np.sinc(2.0 * d / math.pi)


def sine_kernel_parts(x: float, y: float) -> KernelValue:
    """Even and odd parts ``(1/pi)(S(x - y) +- S(x + y))`` with ``S(d) = sin(2d)/(2d)``."""
    ax, ay = abs(x), abs(y)

    def S(d):
        return float(np.sinc(2.0 * d / math.pi))

    even = (S(ax - ay) + S(ax + ay)) / math.pi
    odd = (S(ax - ay) - S(ax + ay)) / math.pi
    return KernelValue(x, y, even, float(np.sign(x) * np.sign(y)) * odd)


def bessel_kernel(nu: float, a: float, b: float) -> float:
    """``int_0^1 J_nu(a sqrt u) J_nu(b sqrt u) du`` in closed form (``a != b``)."""
    jv = special.jv
    return 2.0 * (a * jv(nu + 1, a) * jv(nu, b) - b * jv(nu, a) * jv(nu + 1, b)) / (a * a - b * b)


def scaled_finite_kernel(n: int, params: EnsembleParams, x: float, y: float,
                         route: str = "double-contour") -> float:
    """Finite kernel under the hard-edge scaling, ``n^-1/2 K_{2n}(x / sqrt n, y / sqrt n)``."""
    from .biortho_kernel import kernel_finite

    r = math.sqrt(n)
    return kernel_finite(2 * n, params, x / r, y / r, route=route).total / r
