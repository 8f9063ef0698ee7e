"""Bi-moments, bi-orthogonal functions and finite-n correlation kernels.

All bi-moments of the product ensemble are rational multiples of
``sqrt(pi)``; :class:`RootPi` carries such numbers exactly so the bi-moment
matrix can be inverted without rounding (the ABC oracle route).

Kernel orientation: ``K_n(x, y) = sum_k p_k(x) phi_k(y) / h_k``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import special

from .ensemble_density import log_weight_g, weight_g
from .errors import ContourPlacementError
from .sampling import EnsembleParams
from .special_functions import GammaProductIntegrand, gauss_legendre_panels, mellin_barnes

__all__ = [
    "RootPi",
    "KernelValue",
    "BimomentMatrix",
    "KERNEL_ROUTES",
    "bimoment",
    "bimoment_matrix",
    "h_norm",
    "h_norm_from_determinants",
    "p_coefficients",
    "phi_coefficients",
    "p_poly",
    "phi_func",
    "kernel_finite",
    "ode_check",
    "half_line_rule",
    "biorthogonality_defects",
    "kernel_trace",
]

KERNEL_ROUTES = ("sum", "double-contour", "abc-oracle")


@dataclass(frozen=True)
class RootPi:
    """Exact number ``coeff * pi^(power/2)`` with rational ``coeff``."""

    coeff: Fraction
    power: int = 0

    def __mul__(self, other):
        if isinstance(other, RootPi):
            return RootPi(self.coeff * other.coeff, self.power + other.power)
        return RootPi(self.coeff * Fraction(other), self.power)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, RootPi):
            return RootPi(self.coeff / other.coeff, self.power - other.power)
        return RootPi(self.coeff / Fraction(other), self.power)

    def __add__(self, other):
        if self.coeff == 0:
            return other
        if other.coeff == 0:
            return self
        if self.power != other.power:
            raise ValueError("cannot add RootPi numbers with different pi powers")
        return RootPi(self.coeff + other.coeff, self.power)

    def __float__(self):
        return float(self.coeff) * math.pi ** (self.power / 2)

    def __eq__(self, other):
        if not isinstance(other, RootPi):
            return NotImplemented
        if self.coeff == 0 or other.coeff == 0:
            return self.coeff == other.coeff
        return self.coeff == other.coeff and self.power == other.power

    def __hash__(self):
        return hash((self.coeff, self.power if self.coeff else 0))


def _gamma_half(m: int) -> Fraction:
    """``Gamma(m + 1/2) / sqrt(pi)`` for ``m >= 0``."""
    return Fraction(math.factorial(2 * m), 4**m * math.factorial(m))


def _gamma_int_product(nu: Sequence[int], k: int) -> int:
    """``prod_m Gamma(nu_m + k + 1)`` over the given ``nu``."""
    return math.prod(math.factorial(v + k) for v in nu)


def bimoment(k: int, l: int, params: EnsembleParams) -> RootPi:
    """``b_{k,l} = int x^k g_l(x) dx = Gamma((k+l+1)/2) prod_{m>=1} Gamma(nu_m + k + 1)``.

    Zero when ``k + l`` is odd.
    """
    if k < 0 or l < 0:
        raise ValueError("indices must be non-negative")
    if (k + l) % 2:
        return RootPi(Fraction(0), 1)
    return RootPi(_gamma_half((k + l) // 2) * _gamma_int_product(params.nu, k), 1)


def _det_fraction(mat: list[list[Fraction]]) -> Fraction:
    a = [row[:] for row in mat]
    n = len(a)
    det = Fraction(1)
    for i in range(n):
        piv = next((r for r in range(i, n) if a[r][i] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != i:
            a[i], a[piv] = a[piv], a[i]
            det = -det
        det *= a[i][i]
        for r in range(i + 1, n):
            f = a[r][i] / a[i][i]
            if f:
                for c in range(i, n):
                    a[r][c] -= f * a[i][c]
    return det


def _inverse_fraction(mat: list[list[Fraction]]) -> list[list[Fraction]]:
    n = len(mat)
    a = [row[:] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(mat)]
    for i in range(n):
        piv = next(r for r in range(i, n) if a[r][i] != 0)
        a[i], a[piv] = a[piv], a[i]
        p = a[i][i]
        a[i] = [v / p for v in a[i]]
        for r in range(n):
            if r != i and a[r][i] != 0:
                f = a[r][i]
                a[r] = [vr - f * vi for vr, vi in zip(a[r], a[i])]
    return [row[n:] for row in a]


@dataclass(frozen=True)
class BimomentMatrix:
    """Bi-moment matrix ``(b_{k,l})_{k,l < size}`` stored as ``sqrt(pi) * rational``."""

    size: int
    params: EnsembleParams
    rational: tuple

    def determinant(self) -> RootPi:
        return RootPi(_det_fraction([list(r) for r in self.rational]), self.size)

    def inverse(self) -> tuple[list[list[Fraction]], int]:
        """Exact inverse as ``(rational matrix, pi power)``: ``B^-1 = R^-1 / sqrt(pi)``."""
        return _inverse_fraction([list(r) for r in self.rational]), -1

    def inverse_float(self) -> np.ndarray:
        inv, power = self.inverse()
        return np.array([[float(v) for v in row] for row in inv]) * math.pi ** (power / 2)


@lru_cache(maxsize=64)
def bimoment_matrix(size: int, params: EnsembleParams) -> BimomentMatrix:
    rows = tuple(
        tuple(bimoment(k, l, params).coeff for l in range(size)) for k in range(size)
    )
    return BimomentMatrix(size, params, rows)


def h_norm(n: int, params: EnsembleParams) -> RootPi:
    """``h_n = 2^-n sqrt(pi) prod_{m=0}^M Gamma(nu_m + n + 1)``."""
    return RootPi(Fraction(_gamma_int_product(params.nu_full, n), 2**n), 1)


def h_norm_from_determinants(n: int, params: EnsembleParams) -> RootPi:
    """``D_n / D_{n-1}`` with ``D_n = det(b_{k,l})_{k,l=0..n}`` in exact arithmetic."""
    d_n = bimoment_matrix(n + 1, params).determinant()
    d_prev = bimoment_matrix(n, params).determinant() if n > 0 else RootPi(Fraction(1), 0)
    return d_n / d_prev


def p_coefficients(n: int, params: EnsembleParams) -> dict[int, Fraction]:
    """Exact coefficients ``{power: c}`` of the monic polynomial ``p_n``."""
    half, odd = divmod(n, 2)
    nf = params.nu_full
    out = {}
    for l in range(half + 1):
        num = math.prod(math.factorial(v + n) for v in nf)
        den = math.prod(math.factorial(v + 2 * l + odd) for v in nf)
        out[2 * l + odd] = Fraction(-1, 4) ** (half - l) / math.factorial(half - l) * Fraction(num, den)
    return out


def phi_coefficients(n: int) -> dict[int, Fraction]:
    """Exact coefficients ``{l: c}`` with ``phi_n = sum_l c_l g_l``."""
    half, odd = divmod(n, 2)
    return {
        2 * l + odd: Fraction(-1, 4) ** (half - l) / math.factorial(half - l)
        * Fraction(math.factorial(n), math.factorial(2 * l + odd))
        for l in range(half + 1)
    }


def p_poly(n: int, params: EnsembleParams, x):
    """Monic bi-orthogonal polynomial ``p_n(x)``."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for power, c in p_coefficients(n, params).items():
        out = out + float(c) * x**power
    return out if out.ndim else float(out)


def _phi_line_integrand(n: int, params: EnsembleParams) -> tuple[GammaProductIntegrand, float]:
    """Integrand in ``tau = 2t`` for ``phi_n(|x|)`` and its constant prefactor.

    Even ``n = 2k``::

        phi/h = (-1)^k 4^k / (sqrt(pi)(2k)!) (2 pi i)^-1 int dt |x|^(-2t-1)
                Gamma(k-t) Gamma(t+1/2) / Gamma(-t) prod Gamma(nu+2t+1)/Gamma(nu+2k+1)

    and analogously for odd ``n``.  The substitution keeps every gamma scale
    at +-1/2 or 1.
    """
    k, odd = divmod(n, 2)
    nu = params.nu
    num = [(0.5 + odd, 0.5)] + [(v + 1.0 + odd, 1.0) for v in nu]
    den = []
    if k > 0:
        # Gamma(k - tau/2) / Gamma(-tau/2) is a polynomial; keep both factors
        num.append((float(k), -0.5))
        den.append((0.0, -0.5))
    integrand = GammaProductIntegrand(num, den, power_scale=-1.0, power_offset=-1.0 - odd)
    pref = (-1) ** k * 2.0**n / (math.sqrt(math.pi) * math.factorial(n))
    pref /= math.prod(math.gamma(v + n + 1) for v in nu)
    pref *= float(h_norm(n, params)) * 0.5
    return integrand, pref


def phi_func(n: int, params: EnsembleParams, x, backend: str = "sum"):
    """Bi-orthogonal function ``phi_n(x)``.

    ``backend='sum'`` combines weight functions with the exact coefficients;
    ``backend='contour'`` integrates its single-line representation (``x != 0``).
    """
    x = np.asarray(x, dtype=float)
    if backend == "sum":
        out = np.zeros_like(x)
        for l, c in phi_coefficients(n).items():
            out = out + float(c) * weight_g(l, params, x)
        return out if out.ndim else float(out)
    if backend != "contour":
        raise ValueError(f"unknown backend {backend!r}")
    if np.any(x == 0):
        raise ContourPlacementError("contour representation of phi needs x != 0")
    integrand, pref = _phi_line_integrand(n, params)
    vals = pref * mellin_barnes(integrand, np.abs(x), default_abscissa=-0.5,
                                strip=(-1.0, 0.0), shift_to_saddle=False)
    out = np.where(x < 0, (-1.0) ** n, 1.0) * vals
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class KernelValue:
    """Correlation kernel evaluated at ``(x, y)`` with its parity split."""

    x: float
    y: float
    even: float
    odd: float

    @property
    def total(self) -> float:
        return self.even + self.odd


def _kernel_sum(n, params, x, y):
    even = odd = 0.0
    for k in range(n):
        term = p_poly(k, params, x) * phi_func(k, params, y) / float(h_norm(k, params))
        if k % 2:
            odd += term
        else:
            even += term
    return even, odd


def _kernel_abc(n, params, x, y):
    binv = bimoment_matrix(n, params).inverse_float()
    g = np.array([weight_g(l, params, y) for l in range(n)])
    xp = np.array([x**k for k in range(n)], dtype=float)
    even = odd = 0.0
    for k in range(n):
        for l in range(k % 2, n, 2):
            term = binv[l, k] * xp[k] * g[l]
            if k % 2:
                odd += term
            else:
                even += term
    return even, odd


def _kernel_double_contour(n, params, x, y, c=-0.5):
    """Residue sum over the enclosed ``s`` poles, vertical-line quadrature in ``t``."""
    if not -1.0 < c < 0.0:
        raise ContourPlacementError("t-line abscissa must lie in (-1, 0)")
    if y == 0:
        raise ContourPlacementError("double-contour kernel needs y != 0")
    N = n // 2
    nu = params.nu
    ax, ay = abs(x), abs(y)
    log_ax = math.log(ax) if ax > 0 else -math.inf
    parts = []
    for odd in (0, 1):
        ks = np.arange(N)
        # residue weights 2(-1)^k/k! |x|^(2k+odd) / (Gamma(k+1/2+odd) Gamma(N-k) prod Gamma(nu+2k+1+odd))
        logc = (math.log(2.0) - special.gammaln(ks + 1.0) - special.gammaln(ks + 0.5 + odd)
                - special.gammaln(N - ks))
        for v in nu:
            logc = logc - special.gammaln(v + 2 * ks + 1.0 + odd)
        with np.errstate(invalid="ignore"):
            logc = logc + np.where(ks * 2 + odd > 0, (2 * ks + odd) * log_ax, 0.0)
        coef = (-1.0) ** ks * np.exp(logc)
        poles = 2 * ks + odd

        def factor(t, coef=coef, poles=poles):
            return np.sum(coef[None, :] / (poles[None, :] - t[:, None]), axis=1)

        if odd:
            num = [(1.0, 0.5), (N + 0.5, -0.5)]
            den = [(0.5, -0.5)]
            strip = (-1.0, 1.0)
        else:
            num = [(0.5, 0.5), (float(N), -0.5)]
            den = [(0.0, -0.5)]
            strip = (-1.0, 0.0)
        num += [(v + 1.0, 1.0) for v in nu]
        integrand = GammaProductIntegrand(num, den, power_scale=-1.0, power_offset=-1.0)
        val = mellin_barnes(integrand, ay, default_abscissa=c, strip=strip,
                            shift_to_saddle=False, factor=factor)
        parts.append(0.5 * float(np.real(val)))
    even, odd_part = parts
    return even, math.copysign(1.0, x * y) * odd_part if x != 0 else 0.0


def kernel_finite(n: int, params: EnsembleParams, x: float, y: float,
                  route: str = "sum") -> KernelValue:
    """Finite-n kernel ``K_n(x, y)`` (``n`` even) by one of three routes.

    ``sum``: bi-orthogonal expansion; ``double-contour``: finite residue sum
    in ``s`` with a vertical ``t`` line at ``Re t = -1/2``; ``abc-oracle``:
    exact inverse of the bi-moment matrix contracted with monomials and weights.
    """
    if n < 2 or n % 2:
        raise ValueError("kernel_finite needs an even n >= 2")
    if route == "sum":
        even, odd = _kernel_sum(n, params, x, y)
    elif route == "abc-oracle":
        even, odd = _kernel_abc(n, params, x, y)
    elif route == "double-contour":
        even, odd = _kernel_double_contour(n, params, x, y)
    else:
        raise ValueError(f"unknown route {route!r}; choose from {KERNEL_ROUTES}")
    return KernelValue(float(x), float(y), float(even), float(odd))


def ode_check(N: int, params: EnsembleParams) -> bool:
    """Exact check that ``p_{2N}`` solves ``2z^2(zD - 2N)f = prod_m (zD+nu_m)(zD+nu_m-1) f``.

    ``zD`` maps ``c_k z^k`` to ``k c_k z^k``, so both sides are compared
    coefficient by coefficient in rational arithmetic.
    """
    if N < 1:
        raise ValueError("N must be positive")
    coeffs = p_coefficients(2 * N, params)
    return ode_residual(coeffs, N, params) == {}


def ode_residual(coeffs: dict[int, Fraction], N: int, params: EnsembleParams) -> dict[int, Fraction]:
    """Nonzero coefficients of ``LHS - RHS`` of the ODE for polynomial ``coeffs``."""
    lhs: dict[int, Fraction] = {}
    rhs: dict[int, Fraction] = {}
    for k, c in coeffs.items():
        lhs[k + 2] = lhs.get(k + 2, Fraction(0)) + 2 * (k - 2 * N) * c
        rhs[k] = rhs.get(k, Fraction(0)) + math.prod((k + v) * (k + v - 1) for v in params.nu_full) * c
    diff = {}
    for k in set(lhs) | set(rhs):
        d = lhs.get(k, Fraction(0)) - rhs.get(k, Fraction(0))
        if d != 0:
            diff[k] = d
    return diff


def _tail_cutoff(params: EnsembleParams, max_power: int, degree: int) -> float:
    """``X`` with ``X^(max_power+1) |g_j(X)|`` below ``1e-22`` for ``j <= degree``."""
    X = 4.0
    while True:
        logs = [log_weight_g(j, params, X)[1][0] for j in range(degree + 1)]
        if (max_power + 1) * math.log(X) + max(logs) < math.log(1e-22):
            return X
        X *= 1.25


def half_line_rule(params: EnsembleParams, max_power: int = 10, degree: int = 10,
                   panel_width: float = 0.5, u_min: float = -50.0):
    """Nodes and weights for ``int_0^X f(x) dx`` via ``x = e^u``.

    The substitution tames the integrable logarithmic cusp some weights have
    at the origin; ``X`` is chosen so the weight tail is negligible.
    """
    X = _tail_cutoff(params, max_power, degree)
    u_max = math.log(X)
    panels = int(math.ceil((u_max - u_min) / panel_width))
    u, w = gauss_legendre_panels(u_min, u_max, panels)
    x = np.exp(u)
    return x, w * x


def biorthogonality_defects(params: EnsembleParams, kmax: int = 5) -> np.ndarray:
    """``|int p_k phi_l - h_k delta_kl| / h_k`` for ``k, l <= kmax`` by quadrature."""
    x, w = half_line_rule(params, max_power=kmax, degree=kmax)
    p = np.array([p_poly(k, params, x) for k in range(kmax + 1)])
    phi = np.array([phi_func(l, params, x) for l in range(kmax + 1)])
    out = np.empty((kmax + 1, kmax + 1))
    for k in range(kmax + 1):
        hk = float(h_norm(k, params))
        for l in range(kmax + 1):
            # parity: the negative half-line repeats (k+l even) or cancels (odd)
            val = (1 + (-1) ** (k + l)) * np.dot(w, p[k] * phi[l])
            out[k, l] = abs(val - hk * (k == l)) / hk
    return out


def kernel_trace(n: int, params: EnsembleParams) -> float:
    """``int K_n(x, x) dx`` by quadrature of the bi-orthogonal expansion."""
    x, w = half_line_rule(params, max_power=n, degree=n)
    diag = np.zeros_like(x)
    for k in range(n):
        diag += p_poly(k, params, x) * phi_func(k, params, x) / float(h_norm(k, params))
    # K(x, x) is even in x
    return float(2 * np.dot(w, diag))
