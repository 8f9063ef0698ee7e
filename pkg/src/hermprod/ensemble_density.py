"""Exact joint eigenvalue densities and the product-ensemble weight functions.

Weight functions ``g_j^(M)`` have three independent evaluation routes:

``recursive-quadrature``
    ``g_j^(m)(x) = int_0^inf dy/y y^nu_m e^-y g_j^(m-1)(x/y)`` starting from
    ``g_j^(0)(x) = x^j e^{-x^2}``, nested adaptive quadrature.
``mellin-barnes``
    ``(sgn x)^j / 2 * (2 pi i)^-1 int |x|^s Gamma((j-s)/2) prod Gamma(nu_m - s) ds``.
``meijer-g``
    ``(sgn x)^j prod 2^(nu_m-1)/sqrt(pi) * G^{2M+1,0}_{0,2M+1}(x^2/4^M | nu_m/2, (nu_m+1)/2, ..., j/2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate, special

from .errors import NonConvergenceError, OrderingError, OriginSingularityError
from .sampling import EnsembleParams, SignedDiagonal
from .special_functions import GammaProductIntegrand, meijer_g_integrand, mellin_barnes

__all__ = [
    "BACKENDS",
    "WeightSpec",
    "weight_g",
    "log_weight_g",
    "theorem1_pdf",
    "log_normalisation",
    "product_jpdf",
    "log_product_jpdf",
    "mb_density_unnormalized",
    "log_mb_density_unnormalized",
    "mb_exponent",
    "to_product_variables",
]

BACKENDS = ("recursive-quadrature", "mellin-barnes", "meijer-g")
MB_DEFAULT_ABSCISSA = -0.25


@dataclass(frozen=True)
class WeightSpec:
    """Degree ``j`` weight of the ensemble ``params`` evaluated by ``backend``."""

    degree: int
    params: EnsembleParams
    backend: str = "mellin-barnes"

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError("degree must be non-negative")
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}; choose from {BACKENDS}")


def _origin_value(j: int, nu: Sequence[int]) -> float:
    if j > 0:
        return 0.0
    if nu and min(nu) == 0:
        raise OriginSingularityError("g_0 diverges at the origin when some nu_m = 0")
    return float(np.prod([math.gamma(v) for v in nu]))


def _level_cutoff(levels: int) -> float:
    """``X`` beyond which a weight with ``levels`` integrations is below ``e^-60``."""
    q = 2 * levels + 1
    return 2.0**levels * (60.0 / q) ** (q / 2.0)


def _recursive(j: int, nu: Sequence[int], ax: float, rtol: float) -> float:
    """Nested quadrature in ``u = log y`` for ``|x| = ax > 0``."""
    if not nu:
        return ax**j * math.exp(-ax * ax)
    inner_nu, v = nu[:-1], nu[-1]
    lower = math.log(ax / _level_cutoff(len(inner_nu)))
    upper = math.log(80.0 + 4.0 * v)
    lower = min(lower, upper - 1.0)

    def f(u):
        y = math.exp(u)
        return math.exp(v * u - y) * _recursive(j, inner_nu, ax / y, rtol)

    pts = [p for p in (0.0, math.log(ax)) if lower < p < upper]
    val, err = integrate.quad(f, lower, upper, points=pts or None, epsabs=0.0,
                              epsrel=rtol, limit=400)
    if err > 100 * rtol * abs(val) + 1e-300:
        raise NonConvergenceError(f"recursive weight quadrature error {err:.2e}")
    return val


def _mb_integrand(j: int, nu: Sequence[int]) -> GammaProductIntegrand:
    num = [(j / 2.0, -0.5)] + [(float(v), -1.0) for v in nu]
    return GammaProductIntegrand(num, (), power_base=1.0)


def _meijer_params(j: int, nu: Sequence[int]):
    b = []
    for v in nu:
        b += [v / 2.0, (v + 1) / 2.0]
    b.append(j / 2.0)
    pref = math.prod(2.0 ** (v - 1) / math.sqrt(math.pi) for v in nu)
    return b, pref


def log_weight_g(j: int, params: EnsembleParams, x, backend: str = "mellin-barnes"):
    """``(sign, log|g_j(x)|)`` for arrays of nonzero ``x``; safe far in the tails."""
    WeightSpec(j, params, backend)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x == 0):
        raise OriginSingularityError("log_weight_g needs nonzero arguments")
    nu = params.nu
    ax = np.abs(x)
    parity = np.where(x < 0, (-1.0) ** j, 1.0)
    if not nu:
        return parity, j * np.log(ax) - ax * ax
    if backend == "mellin-barnes":
        mant, logsc, _ = mellin_barnes(_mb_integrand(j, nu), ax, log_output=True,
                                       default_abscissa=MB_DEFAULT_ABSCISSA)
        logsc = logsc - math.log(2.0)
    elif backend == "meijer-g":
        b, pref = _meijer_params(j, nu)
        z = ax * ax / 4.0 ** len(nu)
        mant, logsc, _ = mellin_barnes(meijer_g_integrand(len(b), b), z, log_output=True)
        logsc = logsc + math.log(pref)
    else:
        vals = np.array([_recursive(j, nu, a, 1e-12) for a in ax])
        return parity * np.sign(vals), np.log(np.abs(vals))
    mant = np.real(mant)
    return parity * np.sign(mant), logsc + np.log(np.abs(mant))


def weight_g(spec_or_j, params: EnsembleParams | None = None, x=None, backend: str | None = None,
             *, full_output: bool = False):
    """Weight function ``g_j^(M)(x)``.

    Call as ``weight_g(WeightSpec(...), x=x)`` or ``weight_g(j, params, x, backend)``.
    Arrays of ``x`` are evaluated together.  At the origin ``g_j(0)`` is
    ``prod Gamma(nu_m)`` for ``j = 0``, zero for ``j > 0``, and raises
    :class:`OriginSingularityError` when it diverges.
    """
    if isinstance(spec_or_j, WeightSpec):
        spec = spec_or_j
        if backend is not None:
            spec = WeightSpec(spec.degree, spec.params, backend)
    else:
        spec = WeightSpec(int(spec_or_j), params, backend or "mellin-barnes")
    j, nu = spec.degree, spec.params.nu
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty(xs.shape)
    err = np.zeros(xs.shape)
    zero = xs == 0
    if np.any(zero):
        out[zero] = _origin_value(j, nu)
    nz = ~zero
    if np.any(nz):
        xv = xs[nz]
        ax = np.abs(xv)
        parity = np.where(xv < 0, (-1.0) ** j, 1.0)
        if not nu:
            vals, errs = ax**j * np.exp(-ax * ax), np.zeros(ax.shape)
        elif spec.backend == "recursive-quadrature":
            vals = np.array([_recursive(j, nu, a, 1e-12) for a in ax])
            errs = 1e-12 * np.abs(vals)
        elif spec.backend == "mellin-barnes":
            vals, errs = mellin_barnes(_mb_integrand(j, nu), ax, full_output=True,
                                       default_abscissa=MB_DEFAULT_ABSCISSA)
            vals, errs = vals / 2.0, errs / 2.0
        else:
            b, pref = _meijer_params(j, nu)
            z = ax * ax / 4.0 ** len(nu)
            vals, errs = mellin_barnes(meijer_g_integrand(len(b), b), z, full_output=True)
            vals, errs = pref * vals, pref * errs
        out[nz] = parity * vals
        err[nz] = errs
    if scalar:
        out, err = float(out[0]), float(err[0])
    return (out, err) if full_output else out


def _check_ascending(points: np.ndarray):
    if np.any(np.diff(points) <= 0):
        raise OrderingError("points must be strictly ascending")


def theorem1_pdf(diag: SignedDiagonal, points: Sequence[float], big_N: int) -> float:
    """Joint density of the nonzero eigenvalues of ``G^* A G`` with ``A = diag``.

    ``points`` must be strictly ascending.  Returns 0 when their sign
    pattern differs from that of ``diag``.  The exponential determinants
    are evaluated after removing each row's largest exponent.
    """
    a = diag.as_array()
    x = np.asarray(points, dtype=float)
    n = diag.n
    if x.shape != (n,):
        raise ValueError(f"expected {n} points")
    if n > big_N:
        raise ValueError("need n <= N")
    _check_ascending(x)
    n0 = diag.n0
    if np.any(x[:n0] >= 0) or np.any(x[n0:] <= 0):
        return 0.0
    log_p = 0.0
    for l in range(n):
        log_p += -math.log(abs(a[l])) + (big_N - n) * math.log(x[l] / a[l]) - math.lgamma(big_N - l)
    for jj in range(n):
        for k in range(jj + 1, n):
            log_p += math.log(x[k] - x[jj]) - math.log(a[k] - a[jj])
    for block in (slice(0, n0), slice(n0, n)):
        xb, ab = x[block], a[block]
        if xb.size == 0:
            continue
        expo = -xb[:, None] / ab[None, :]
        rmax = np.max(expo, axis=1, keepdims=True)
        sign, logdet = np.linalg.slogdet(np.exp(expo - rmax))
        if sign <= 0:
            return 0.0
        log_p += logdet + float(np.sum(rmax))
    return math.exp(log_p)


def log_normalisation(params: EnsembleParams) -> float:
    """``log Z_n^(M)`` with ``Z = 2^{-n(n-1)/2} pi^{n/2} prod_{m=0}^M prod_j Gamma(nu_m + j)``."""
    n = params.base_dim
    val = -0.5 * n * (n - 1) * math.log(2.0) + 0.5 * n * math.log(math.pi)
    for v in params.nu_full:
        val += sum(math.lgamma(v + j) for j in range(1, n + 1))
    return val


def _log_vandermonde(x: np.ndarray):
    d = x[None, :] - x[:, None]
    iu = np.triu_indices(len(x), 1)
    diffs = d[iu]
    return float(np.prod(np.sign(diffs))), float(np.sum(np.log(np.abs(diffs))))


def log_product_jpdf(params: EnsembleParams, points: Sequence[float],
                     backend: str = "mellin-barnes"):
    """``(sign, log P)`` of the product-ensemble joint density; usable far in the tails."""
    x = np.asarray(points, dtype=float)
    n = params.base_dim
    if x.shape != (n,):
        raise ValueError(f"expected {n} points")
    if len(np.unique(x)) != n:
        raise OrderingError("points must be distinct")
    vsign, vlog = _log_vandermonde(x)
    signs = np.empty((n, n))
    logs = np.empty((n, n))
    for j in range(n):
        signs[:, j], logs[:, j] = log_weight_g(j, params, x, backend)
    rmax = np.max(logs, axis=1, keepdims=True)
    dsign, dlog = np.linalg.slogdet(signs * np.exp(logs - rmax))
    return vsign * dsign, vlog + dlog + float(np.sum(rmax)) - log_normalisation(params)


def product_jpdf(params: EnsembleParams, points: Sequence[float],
                 backend: str = "mellin-barnes") -> float:
    """Joint density ``Z^-1 Delta(x) det[g_{j-1}(x_i)]`` of the nonzero eigenvalues.

    Normalised over the ordered domain ``x_1 < ... < x_n``; symmetric in the
    points, so unordered input is accepted.
    """
    x = np.asarray(points, dtype=float)
    n = params.base_dim
    if x.shape != (n,):
        raise ValueError(f"expected {n} points")
    if len(np.unique(x)) != n:
        raise OrderingError("points must be distinct")
    mat = np.column_stack([weight_g(j, params, x, backend) for j in range(n)])
    d = np.linalg.det(mat)
    vsign, vlog = _log_vandermonde(x)
    return vsign * d * math.exp(vlog - log_normalisation(params))


def mb_exponent(params: EnsembleParams) -> int:
    """``alpha = sum_m (2 nu_m + 1)`` of the approximating Muttalib--Borodin weight."""
    return sum(2 * v + 1 for v in params.nu)


def log_mb_density_unnormalized(alpha: float, M: int, points: Sequence[float]) -> float:
    y = np.asarray(points, dtype=float)
    theta = 2 * M + 1
    iu = np.triu_indices(len(y), 1)
    d1 = (y[None, :] - y[:, None])[iu]
    d2 = (y[None, :] ** theta - y[:, None] ** theta)[iu]
    prod = d1 * d2
    if np.any(prod <= 0):
        return -math.inf
    return float(np.sum(np.log(prod)) + np.sum(alpha * np.log(np.abs(y)) - y * y))


def mb_density_unnormalized(alpha: float, M: int, points: Sequence[float]) -> float:
    """``prod_{i<j} (y_j - y_i)(y_j^t - y_i^t) prod |y_k|^alpha e^{-y_k^2}``, ``t = 2M+1``."""
    y = np.asarray(points, dtype=float)
    theta = 2 * M + 1
    iu = np.triu_indices(len(y), 1)
    d1 = (y[None, :] - y[:, None])[iu]
    d2 = (y[None, :] ** theta - y[:, None] ** theta)[iu]
    return float(np.prod(d1 * d2) * np.prod(np.abs(y) ** alpha * np.exp(-y * y)))


def to_product_variables(M: int, y):
    """Map ``y -> x = 2^M (y / sqrt(2M+1))^(2M+1)`` and ``log|dx/dy|``."""
    y = np.asarray(y, dtype=float)
    t = 2 * M + 1
    s = y / math.sqrt(t)
    x = 2.0**M * s**t
    log_jac = M * math.log(2.0) + math.log(t) - 0.5 * math.log(t) + (t - 1) * np.log(np.abs(s))
    return x, log_jac
