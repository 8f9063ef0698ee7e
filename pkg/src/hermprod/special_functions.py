"""Gamma-function machinery, vertical-line Mellin--Barnes quadrature, Meijer G
evaluators for the classes ``G^{m,0}_{0,q}`` and Wright's Bessel function.

Meijer G convention::

    G^{m,0}_{0,q}(x | b_1..b_q) = 1/(2 pi i) \\int_L  prod_{j<=m} Gamma(b_j - s)
                                  / prod_{j>m} Gamma(1 - b_j + s) * x^s ds

with ``L`` a vertical line to the left of every pole of the numerator.

Every quadrature evaluator can return a ``(value, error)`` pair through
``full_output=True``; callers treat the error as a bound when making
tolerance decisions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import special

from .errors import ContourPlacementError, GammaPoleError, NonConvergenceError

__all__ = [
    "VerticalContour",
    "GammaProductIntegrand",
    "complex_log_gamma",
    "auto_contour",
    "saddle_abscissae",
    "meijer_g_integrand",
    "mellin_barnes",
    "meijer_g_m0",
    "meijer_g_series",
    "wright_bessel",
    "gauss_legendre_panels",
]

_EPS = np.finfo(float).eps
_ALLOWED_SCALES = (1.0, -1.0, 0.5, -0.5)
# the line is truncated once |integrand| drops this many e-folds below its peak
_LOG_DROP = 40.0
# minimum distance kept between an automatically placed line and a pole
_POLE_MARGIN = 0.125


def complex_log_gamma(z):
    """Principal branch of ``log Gamma(z)`` for complex ``z``.

    Accepts scalars or arrays. Raises :class:`GammaPoleError` at the poles
    ``z = 0, -1, -2, ...``.
    """
    arr = np.asarray(z, dtype=complex)
    re = arr.real
    poles = (arr.imag == 0) & (re <= 0) & (re == np.round(re))
    if np.any(poles):
        raise GammaPoleError(f"Gamma has a pole at {arr[poles].ravel()[0].real:g}")
    out = special.loggamma(arr)
    if np.ndim(z) == 0:
        return complex(out)
    return out


def gauss_legendre_panels(a: float, b: float, panels: int, order: int = 16):
    """Composite Gauss--Legendre nodes and weights on ``[a, b]``."""
    x, w = leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


@dataclass(frozen=True)
class VerticalContour:
    """Truncated vertical line ``Re s = abscissa``, ``|Im s| <= half_extent``."""

    abscissa: float
    half_extent: float = 40.0
    nodes: int = 2048
    rule: str = "trapezoid"

    def __post_init__(self):
        if not self.half_extent > 0:
            raise ValueError("half_extent must be positive")
        if self.nodes < 16:
            raise ValueError("at least 16 quadrature nodes are required")
        if self.rule not in ("trapezoid", "gauss-legendre-panels"):
            raise ValueError(f"unknown quadrature rule {self.rule!r}")

    def require_inside(self, lower: float = -math.inf, upper: float = math.inf):
        if not lower < self.abscissa < upper:
            raise ContourPlacementError(
                f"abscissa {self.abscissa:g} outside admissible strip ({lower:g}, {upper:g})"
            )
        return self

    def quadrature(self, coarse: bool = False):
        """Nodes ``s_k`` and weights ``w_k`` with ``sum w_k f(s_k) ~ (2 pi i)^-1 int f ds``.

        ``coarse=True`` returns the embedded rule with half the nodes, used
        for the discretisation error estimate.
        """
        T = self.half_extent
        if self.rule == "trapezoid":
            n = self.nodes if not coarse else self.nodes // 2
            t = np.linspace(-T, T, n + 1)
            w = np.full(t.shape, 2 * T / n)
            w[0] *= 0.5
            w[-1] *= 0.5
        else:
            panels = max(1, self.nodes // 16)
            if coarse:
                t, w = gauss_legendre_panels(-T, T, panels, 8)
            else:
                t, w = gauss_legendre_panels(-T, T, panels, 16)
        return self.abscissa + 1j * t, w / (2 * np.pi)

    def refined(self) -> "VerticalContour":
        return replace(self, nodes=2 * self.nodes)


def _as_pairs(shifts) -> tuple:
    pairs = tuple((float(o), float(k)) for o, k in shifts)
    for _, k in pairs:
        if k not in _ALLOWED_SCALES:
            raise ValueError(f"gamma argument scale {k} not in {_ALLOWED_SCALES}")
    return pairs


@dataclass(frozen=True)
class GammaProductIntegrand:
    """``prod Gamma(o + k s) / prod Gamma(o' + k' s) * base^(offset + scale*s)``.

    ``numerator_shifts`` and ``denominator_shifts`` hold ``(offset, scale)``
    pairs; scales are restricted to +-1 and +-1/2.
    """

    numerator_shifts: tuple = ()
    denominator_shifts: tuple = ()
    power_base: float = 1.0
    power_scale: float = 1.0
    power_offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "numerator_shifts", _as_pairs(self.numerator_shifts))
        object.__setattr__(self, "denominator_shifts", _as_pairs(self.denominator_shifts))
        if not self.power_base > 0:
            raise ValueError("power_base must be a positive real")

    def log_gamma_part(self, s):
        s = np.asarray(s, dtype=complex)
        out = np.zeros(s.shape, dtype=complex)
        for o, k in self.numerator_shifts:
            out += special.loggamma(o + k * s)
        for o, k in self.denominator_shifts:
            out -= special.loggamma(o + k * s)
        return out

    def log_value(self, s, log_base=None):
        if log_base is None:
            log_base = math.log(self.power_base)
        s = np.asarray(s, dtype=complex)
        return self.log_gamma_part(s) + (self.power_offset + self.power_scale * s) * log_base

    def __call__(self, s):
        return np.exp(self.log_value(s))

    def strip(self) -> tuple[float, float]:
        """Open strip ``(lo, hi)`` of Re s free of numerator poles."""
        lo, hi = -math.inf, math.inf
        for o, k in self.numerator_shifts:
            # poles where o + k s = -n, n >= 0
            edge = -o / k
            if k > 0:
                lo = max(lo, edge)
            else:
                hi = min(hi, edge)
        return lo, hi

    def with_base(self, base: float) -> "GammaProductIntegrand":
        return replace(self, power_base=base)


def _candidate_abscissae(lo: float, hi: float, start: float) -> np.ndarray:
    """Candidate line positions around ``start``: steps of 1/8 nearby, geometric further out."""
    offsets = np.concatenate([0.125 * np.arange(33), 4.0 * 1.02 ** np.arange(1, 650)])
    cand = np.concatenate([start - offsets, start + offsets[1:]])
    keep = np.ones(cand.shape, dtype=bool)
    if math.isfinite(lo):
        keep &= cand > lo + _POLE_MARGIN
    if math.isfinite(hi):
        keep &= cand < hi - _POLE_MARGIN
    keep[0] = True
    return cand[keep]


def saddle_abscissae(integrand: GammaProductIntegrand, x, start: float,
                     strip=None) -> np.ndarray:
    """Per-argument line positions at the real-axis minimum of ``|integrand|``.

    On a line through the minimum the integral suffers no cancellation
    against the integrand's size.  Positions come from a fixed candidate grid
    around ``start`` kept 1/8 away from the poles, so nearby arguments share
    lines.
    """
    lo, hi = integrand.strip() if strip is None else strip
    cand = _candidate_abscissae(lo, hi, start)
    lg = integrand.log_gamma_part(cand.astype(complex)).real
    log_x = np.log(np.abs(np.atleast_1d(np.asarray(x, dtype=float))))
    a, k = integrand.power_offset, integrand.power_scale
    mag = lg[None, :] + (a + k * cand[None, :]) * log_x[:, None]
    mag = np.where(np.isfinite(mag), mag, np.inf)
    return cand[np.argmin(mag, axis=1)]


def _truncation(integrand, c, log_x, imag_log_x=0.0, step=0.25, t_max=5000.0, factor=None):
    """Half-extent beyond which the integrand stays ``e^-40`` below its peak."""
    chunk = 512
    peak = -math.inf
    extents = []
    for sign in (1.0, -1.0):
        t0 = 0.0
        last_big = 0.0
        while True:
            t = sign * (t0 + step * np.arange(chunk))
            s = c + 1j * t
            mag = integrand.log_value(s, complex(log_x, imag_log_x)).real
            if factor is not None:
                with np.errstate(divide="ignore"):
                    mag = mag + np.log(np.abs(factor(s)))
            mag = np.where(np.isfinite(mag), mag, -np.inf)
            peak = max(peak, float(np.max(mag)))
            big = np.nonzero(mag > peak - _LOG_DROP)[0]
            if big.size:
                last_big = abs(t[big[-1]])
            t0 += step * chunk
            if t0 - last_big > 8.0 and t0 > 4.0:
                break
            if t0 > t_max:
                raise NonConvergenceError(
                    f"integrand does not decay along Re s = {c:g} within |Im s| <= {t_max:g}"
                )
        extents.append(last_big + 2.0)
    return max(extents), peak


def _default_abscissa(lo, hi, default):
    if default is None:
        if math.isfinite(hi):
            default = hi - 0.5
        elif math.isfinite(lo):
            default = lo + 0.5
        else:
            default = 0.0
    if not lo < default < hi:
        raise ContourPlacementError(f"abscissa {default:g} outside admissible strip ({lo:g}, {hi:g})")
    return default


def _line_for(integrand, c, lo, hi, log_x=0.0, imag=0.0, nodes=2048, rule="trapezoid",
              factor=None):
    T, _ = _truncation(integrand, c, log_x, imag, factor=factor)
    d = min(hi - c, c - lo)
    h = 2 * math.pi * d / (_LOG_DROP + 5.0)
    n = max(nodes, int(math.ceil(2 * T / h)))
    n += n % 2
    return VerticalContour(float(c), T, n, rule)


def auto_contour(integrand: GammaProductIntegrand, x=None, *, default=None, strip=None,
                 shift_to_saddle: bool = True, nodes: int = 2048,
                 rule: str = "trapezoid", factor=None) -> VerticalContour:
    """Choose abscissa, truncation and node count for ``integrand`` at base ``x``.

    The abscissa starts at ``default`` (or half a unit left of the first
    right-hand pole) and, with ``shift_to_saddle``, moves to the real-axis
    minimum of the integrand's magnitude.  Truncation keeps everything within
    ``e^-40`` of the peak; the node spacing resolves the distance to the
    nearest pole so the trapezoid rule converges geometrically.
    """
    lo, hi = integrand.strip() if strip is None else strip
    if x is None:
        x = integrand.power_base
    c = _default_abscissa(lo, hi, default)
    if isinstance(x, complex):
        return _line_for(integrand, c, lo, hi, math.log(abs(x)), math.atan2(x.imag, x.real),
                         nodes, rule, factor)
    if shift_to_saddle:
        c = float(saddle_abscissae(integrand, x, c, (lo, hi))[0])
    return _line_for(integrand, c, lo, hi, nodes=nodes, rule=rule, factor=factor)


def _sum_line(integrand, contour, log_x, factor=None):
    """Scaled line integral for an array of (possibly complex) ``log x``.

    Returns ``(mantissa, log_scale, error, int|f|)`` with value
    ``mantissa * exp(log_scale)``.
    """
    s, w = contour.quadrature()
    sc, wc = contour.quadrature(coarse=True)
    lg = integrand.log_gamma_part(s)
    lgc = integrand.log_gamma_part(sc)
    shift = float(np.max(lg.real))
    g = w * np.exp(lg - shift)
    gc = wc * np.exp(lgc - shift)
    if factor is not None:
        g = g * factor(s)
        gc = gc * factor(sc)
    log_x = np.atleast_1d(np.asarray(log_x, dtype=complex))
    a, k = integrand.power_offset, integrand.power_scale
    # x^(a + k s) = |x|^(a + k c) * exp(i arg(x)(a + k c)) * x^(k (s - c))
    c = contour.abscissa
    base_scale = (a + k * c) * log_x.real
    rot = np.exp(1j * log_x.imag * (a + k * c))[:, None]
    phase = rot * np.exp(np.outer(log_x, k * (s - c)))
    phase_c = rot * np.exp(np.outer(log_x, k * (sc - c)))
    mant = phase @ g
    mant_c = phase_c @ gc
    absint = np.abs(phase) @ np.abs(g)
    # integrand left beyond the truncation points, decay length taken as one unit
    ends = [0, -1]
    tail = np.abs(phase[:, ends]) @ (np.abs(g[ends]) / w[ends])
    err = np.abs(mant - mant_c) + tail + 16 * _EPS * absint
    return mant, shift + base_scale, err, absint


def mellin_barnes(integrand: GammaProductIntegrand, x=None, contour: VerticalContour | None = None,
                  *, default_abscissa=None, strip=None, shift_to_saddle: bool = True,
                  factor=None, rtol: float = 1e-9, full_output: bool = False,
                  log_output: bool = False):
    """``(2 pi i)^-1 int integrand(s) ds`` along a vertical line, vectorised in ``x``.

    ``x`` replaces ``integrand.power_base`` (array or scalar; complex values
    are allowed for a single argument).  Without an explicit ``contour``
    the line is placed by :func:`auto_contour`, per argument.  ``factor`` is
    an optional extra multiplier ``factor(s)`` (e.g. a rational function),
    whose poles must be accounted for in ``strip``.

    Raises :class:`NonConvergenceError` when the discretisation plus tail
    estimate exceeds ``rtol`` times the integral of ``|integrand|``.
    With ``log_output=True`` returns ``(mantissa, log_scale, error)`` with
    value ``mantissa * exp(log_scale)`` (error in mantissa units).
    """
    if x is None:
        x = integrand.power_base
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x))
    is_complex = np.iscomplexobj(xs)
    lo, hi = integrand.strip() if strip is None else strip
    if contour is not None:
        contour.require_inside(lo, hi)

    mant = np.empty(xs.shape, dtype=complex)
    logsc = np.empty(xs.shape)
    err = np.empty(xs.shape)
    if contour is not None:
        groups = {contour: np.arange(xs.size)}
    elif is_complex:
        groups = {}
        for i, xv in enumerate(xs):
            cont = auto_contour(integrand, complex(xv), default=default_abscissa,
                                strip=(lo, hi), factor=factor)
            groups.setdefault(cont, []).append(i)
    else:
        c0 = _default_abscissa(lo, hi, default_abscissa)
        if shift_to_saddle:
            cs = saddle_abscissae(integrand, xs.astype(float), c0, (lo, hi))
        else:
            cs = np.full(xs.shape, c0)
        groups = {}
        for c in np.unique(cs):
            cont = _line_for(integrand, c, lo, hi, factor=factor)
            groups[cont] = np.nonzero(cs == c)[0]
    for cont, idx in groups.items():
        idx = np.asarray(idx)
        log_x = np.log(xs[idx].astype(complex))
        m, ls, e, absint = _sum_line(integrand, cont, log_x, factor)
        bad = e - 16 * _EPS * absint > rtol * absint
        if np.any(bad):
            raise NonConvergenceError(
                f"vertical-line quadrature error {float(np.max(e / absint)):.2e} (relative to "
                f"int |f|) exceeds {rtol:g} on Re s = {cont.abscissa:g}, T = {cont.half_extent:g}"
            )
        mant[idx], logsc[idx], err[idx] = m, ls, e
    if log_output:
        out = (mant, logsc, err)
        return tuple(o[0] for o in out) if scalar else out
    scale = np.exp(logsc)
    value = mant * scale
    error = err * scale
    if not is_complex and factor is None:
        value = value.real
    if scalar:
        value, error = value[0], float(error[0])
    if full_output:
        return value, error
    return value


def _validate_mb(m: int, b: Sequence[float]):
    q = len(b)
    if not 1 <= m <= q:
        raise ValueError(f"need 1 <= m <= q, got m={m}, q={q}")
    return q


def meijer_g_integrand(m: int, b: Sequence[float], x: float = 1.0) -> GammaProductIntegrand:
    """Mellin--Barnes integrand of ``G^{m,0}_{0,q}(x | b)``."""
    _validate_mb(m, b)
    num = [(bj, -1.0) for bj in b[:m]]
    den = [(1.0 - bj, 1.0) for bj in b[m:]]
    return GammaProductIntegrand(num, den, power_base=x)


def meijer_g_series(b: Sequence[float], x, *, full_output: bool = False, max_terms: int = 10_000):
    """``G^{1,0}_{0,q}(x | b)`` from its residue series (a ``0F_{q-1}`` sum).

    ``x`` may be a real or complex scalar or array::

        G = sum_k (-1)^k x^(b1+k) / (k! prod_{j>=2} Gamma(1 - b_j + b_1 + k))
    """
    b = [float(v) for v in b]
    b1, rest = b[0], b[1:]
    scalar = np.ndim(x) == 0
    z = np.atleast_1d(np.asarray(x))
    zc = z.astype(complex)
    with np.errstate(divide="ignore"):
        logz = np.log(zc)
    total = np.zeros(z.shape, dtype=complex)
    absum = np.zeros(z.shape)
    term_log_prev = np.full(z.shape, np.inf)
    for k in range(max_terms):
        args = [1.0 - bj + b1 + k for bj in rest]
        rg = 1.0
        lg = -special.gammaln(k + 1.0)
        for a in args:
            r = special.rgamma(a)
            if r == 0.0:
                rg = 0.0
                break
            lg -= special.gammaln(a)
            rg *= np.sign(r)
        if rg != 0.0:
            with np.errstate(invalid="ignore", over="ignore"):
                tl = lg + (b1 + k) * logz
                term = ((-1) ** k) * rg * np.exp(tl)
            term = np.where(zc == 0, (1.0 if b1 + k == 0 else 0.0) * rg * (-1) ** k, term)
            total += term
            mag = np.abs(term)
            absum += mag
            if k > 2 and np.all((mag <= 1e-17 * np.abs(total)) | (mag == 0)) and np.all(
                tl.real <= term_log_prev
            ):
                break
            term_log_prev = tl.real
    else:
        raise NonConvergenceError("Meijer G series did not converge")
    if not np.iscomplexobj(z):
        total = total.real
    err = 4 * _EPS * absum
    if scalar:
        total, err = total[0], float(err[0])
    if full_output:
        return total, err
    return total


def meijer_g_m0(m: int, b: Sequence[float], x, contour: VerticalContour | None = None, *,
                method: str = "auto", full_output: bool = False, rtol: float = 1e-9):
    """``G^{m,0}_{0,q}(x | b_1..b_q)`` for positive real ``x``.

    ``method='auto'`` sums the residue series when ``m = 1`` and otherwise
    integrates along a vertical line, which requires ``m >= q - 1`` so the
    integrand decays.  An explicit ``contour`` must lie left of ``min(b[:m])``.
    """
    q = _validate_mb(m, b)
    xs = np.asarray(x, dtype=float)
    if np.any(xs <= 0):
        raise ValueError("meijer_g_m0 requires positive real arguments")
    if method == "auto":
        method = "series" if m == 1 else "contour"
    if method == "series":
        if m != 1:
            raise ValueError("series backend only covers m = 1")
        return meijer_g_series(b, x, full_output=full_output)
    if method != "contour":
        raise ValueError(f"unknown method {method!r}")
    if m < q - 1 or (m == q - 1 and q < 3):
        raise ValueError(f"contour quadrature needs a decaying integrand; m={m}, q={q}")
    integrand = meijer_g_integrand(m, b)
    if contour is not None:
        contour.require_inside(upper=min(b[:m]))
    return mellin_barnes(integrand, x, contour, full_output=full_output, rtol=rtol)


def wright_bessel(a: float, b: float, x, *, full_output: bool = False, max_terms: int = 10_000):
    """Wright's Bessel function ``sum_k (-x)^k / (k! Gamma(a + b k))``.

    Terms at poles of Gamma are exact zeros of ``1/Gamma`` and are skipped.
    Summation stops once a term falls below ``1e-16`` of the running sum.
    """
    if not b > 0:
        raise ValueError("b must be positive")
    scalar = np.ndim(x) == 0
    z = np.atleast_1d(np.asarray(x, dtype=float))
    total = np.zeros(z.shape)
    absum = np.zeros(z.shape)
    logabs = np.log(np.abs(z)) if np.all(z != 0) else np.where(z != 0, np.log(np.abs(z) + (z == 0)), -np.inf)
    sgn = np.sign(-z)
    prev = np.full(z.shape, np.inf)
    for k in range(max_terms):
        arg = a + b * k
        r = special.rgamma(arg)
        if r != 0.0:
            with np.errstate(invalid="ignore"):
                tl = k * logabs - special.gammaln(k + 1.0) - special.gammaln(arg)
            tl = np.where(np.isnan(tl), -np.inf, tl) if k else np.full(z.shape, -special.gammaln(arg))
            term = (sgn ** k) * np.sign(r) * np.exp(tl)
            total += term
            absum += np.abs(term)
            mag = np.abs(term)
            if k > 1 and np.all(mag <= 1e-16 * np.abs(total)) and np.all(tl <= prev):
                break
            prev = tl
    else:
        raise NonConvergenceError(f"Wright Bessel series did not converge in {max_terms} terms")
    err = 4 * _EPS * absum
    if scalar:
        total, err = float(total[0]), float(err[0])
    if full_output:
        return total, err
    return total
