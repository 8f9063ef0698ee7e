"""Run configuration, seeded Monte Carlo orchestration and verification suites.

Every stochastic computation draws from per-block streams
``SeedSequence(master, spawn_key=(block,))`` with a block size that depends
only on the ensemble, never on the number of repeats or workers.  Adding
repeats therefore appends draws without changing earlier ones, and results
are identical for any worker count.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, special, stats

from . import biortho_kernel as bk
from . import ensemble_density as ed
from . import global_density as gd
from . import hard_edge as he
from .sampling import (
    EnsembleParams,
    SignedDiagonal,
    interlaces,
    map_polynomial_ensemble_batch,
    product_spectrum,
    rank_one_chain_batch,
)
from .special_functions import meijer_g_m0

__all__ = [
    "COMMANDS",
    "SUITES",
    "GridSpec",
    "RunConfig",
    "Check",
    "SuiteReport",
    "ConfigError",
    "ks_distance",
    "blocked_draws",
    "sample_product_spectra",
    "histogram_zscores",
    "run_suite",
]

COMMANDS = ("sample", "density", "kernel", "moments", "verify")
SUITES = ("biortho", "kernels", "hard-edge", "global", "theorem1", "weights")
DENSITY_KINDS = ("global", "fc", "mb")


class ConfigError(ValueError):
    """Invalid or incomplete run configuration (exit code 2)."""


@dataclass(frozen=True)
class GridSpec:
    """Evenly spaced abscissae ``min .. max`` with ``points`` entries."""

    min: float
    max: float
    points: int

    def __post_init__(self):
        if self.points < 1:
            raise ConfigError("grid needs at least one point")
        if self.points > 1 and not self.max > self.min:
            raise ConfigError("grid max must exceed grid min")

    def values(self) -> np.ndarray:
        return np.linspace(self.min, self.max, self.points)


@dataclass
class RunConfig:
    """Everything a command needs; field names double as the JSON config schema."""

    command: str
    params: EnsembleParams = field(default_factory=lambda: EnsembleParams(0, 2, ()))
    seed: Optional[int] = None
    repeats: int = 1
    grid: Optional[GridSpec] = None
    output_path: Optional[str] = None
    output_format: str = "csv"
    route: Optional[str] = None
    suite: Optional[str] = None
    kind: str = "global"
    fc: Optional[int] = None
    k: Optional[int] = None
    y: Optional[float] = None
    workers: int = 1

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.output_format not in ("csv", "json"):
            raise ConfigError("output format must be csv or json")
        if self.repeats < 1:
            raise ConfigError("repeats must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be positive")
        if self.seed is not None and not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.command == "sample" and self.seed is None:
            raise ConfigError("sample is stochastic and needs an explicit --seed")
        if self.command == "verify":
            if self.suite not in SUITES:
                raise ConfigError(f"verify needs a suite from {SUITES}")
            if self.suite == "theorem1" and self.seed is None:
                raise ConfigError("verify theorem1 is stochastic and needs an explicit --seed")
        if self.command == "moments" and (self.fc is None or self.k is None):
            raise ConfigError("moments needs --fc and --k")
        if self.command == "moments" and (self.fc < 1 or self.k < 0):
            raise ConfigError("moments needs --fc >= 1 and --k >= 0")
        if self.command == "density" and self.kind not in DENSITY_KINDS:
            raise ConfigError(f"density kind must be one of {DENSITY_KINDS}")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = {"depth": self.params.depth, "base_dim": self.params.base_dim,
                       "nu": list(self.params.nu)}
        return d


@dataclass
class Check:
    name: str
    measured: float
    tolerance: float
    passed: bool
    detail: str = ""


@dataclass
class SuiteReport:
    suite: str
    checks: list = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, measured, tolerance, passed=None, detail: str = "") -> Check:
        measured = float(measured)
        if passed is None:
            passed = bool(measured <= tolerance)
        c = Check(name, measured, float(tolerance), bool(passed), detail)
        self.checks.append(c)
        return c

    def lines(self) -> list[str]:
        out = []
        for c in self.checks:
            tag = "PASS" if c.passed else "FAIL"
            extra = f"  ({c.detail})" if c.detail else ""
            out.append(f"[{tag}] {self.suite}: {c.name}: measured {c.measured:.3e}, "
                       f"tolerance {c.tolerance:.1e}{extra}")
        out.append(f"{self.suite}: {'PASS' if self.passed else 'FAIL'} "
                   f"({sum(c.passed for c in self.checks)}/{len(self.checks)} checks, "
                   f"{self.wall_time:.1f} s)")
        return out

    def to_dict(self) -> dict:
        return {"suite": self.suite, "passed": self.passed, "wall_time": self.wall_time,
                "checks": [asdict(c) for c in self.checks]}


# ---------------------------------------------------------------------------
# statistics and orchestration


def ks_distance(samples, cdf: Callable) -> float:
    """Sup-norm distance between the empirical CDF of ``samples`` and ``cdf``.

    Both sides are compared at every distinct sample value, just before and
    at the jump, so ties and discontinuous ``cdf`` are handled exactly.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise ValueError("ks_distance needs at least one sample")
    vals, counts = np.unique(x, return_counts=True)
    after = np.cumsum(counts) / x.size
    before = after - counts / x.size
    f_at = np.asarray(cdf(vals), dtype=float)
    f_before = np.asarray(cdf(np.nextafter(vals, -np.inf)), dtype=float)
    return float(max(np.max(np.abs(after - f_at)), np.max(np.abs(before - f_before))))


def blocked_draws(draw_block: Callable[[int, int], np.ndarray], total: int, block: int,
                  workers: int = 1) -> np.ndarray:
    """Concatenate ``draw_block(task_index, block)`` over enough blocks, truncated to ``total``.

    Blocks are evaluated on a thread pool and reduced in task-index order.
    """
    nblocks = -(-total // block)
    if workers == 1 or nblocks == 1:
        parts = [draw_block(i, block) for i in range(nblocks)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda i: draw_block(i, block), range(nblocks)))
    return np.concatenate(parts, axis=0)[:total]


def _product_block(params: EnsembleParams) -> int:
    return int(max(1, min(1000, 20000 // params.matrix_dim ** 2)))


def sample_product_spectra(params: EnsembleParams, seed: int, repeats: int,
                           workers: int = 1) -> np.ndarray:
    """Sorted nonzero eigenvalues of ``repeats`` product draws, shape ``(repeats, n)``."""
    return blocked_draws(lambda i, b: product_spectrum(params, seed, b, task_index=i),
                         repeats, _product_block(params), workers)


def histogram_zscores(points: np.ndarray, pdf: Callable, edges_x, edges_y, order: int = 6):
    """Bin-wise ``|observed - expected| / SE`` for a 2-D histogram against a density.

    Expected bin probabilities are integrals of ``pdf`` over each bin
    (tensor Gauss--Legendre); the standard error is the binomial one,
    ``sqrt(N p (1 - p))``.  Also returns the per-bin probability that an
    exact sampler exceeds 3 SE, from the normal approximation.
    """
    n = len(points)
    counts, _, _ = np.histogram2d(points[:, 0], points[:, 1], [edges_x, edges_y])
    g, w = leggauss(order)
    prob = np.zeros(counts.shape)
    for i in range(len(edges_x) - 1):
        hx = 0.5 * (edges_x[i + 1] - edges_x[i])
        u = 0.5 * (edges_x[i + 1] + edges_x[i]) + hx * g
        for j in range(len(edges_y) - 1):
            hy = 0.5 * (edges_y[j + 1] - edges_y[j])
            v = 0.5 * (edges_y[j + 1] + edges_y[j]) + hy * g
            vals = np.array([[pdf(uu, vv) for vv in v] for uu in u])
            prob[i, j] = hx * hy * (w @ vals @ w)
    se = np.sqrt(n * prob * (1 - prob))
    z = np.abs(counts - n * prob) / se
    return z, counts, prob


def _rel(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))


# ---------------------------------------------------------------------------
# suites

_BIORTHO_SETS = (
    EnsembleParams(0, 2, ()),
    EnsembleParams(1, 2, (0,)),
    EnsembleParams(1, 2, (2,)),
    EnsembleParams(2, 2, (1, 1)),
)
_WEIGHT_SETS = _BIORTHO_SETS[1:]
_WEIGHT_GRID = np.array([-5.0, -1.0, -0.1, 0.1, 1.0, 5.0])
_MIXED_POINTS = ((0.3, -0.7), (-1.1, 0.4), (0.8, 1.5), (-0.6, -0.2), (1.7, -1.3))


def _suite_weights(config: RunConfig, report: SuiteReport):
    sets = _WEIGHT_SETS if config.params.depth == 0 else (config.params,)
    for p in sets:
        worst = 0.0
        for j in range(4):
            vals = [ed.weight_g(j, p, _WEIGHT_GRID, b) for b in ed.BACKENDS]
            worst = max(worst, _rel(vals[0], vals[1]), _rel(vals[2], vals[1]))
        report.add(f"backends agree, nu={p.nu}, j<=3", worst, 1e-7)
    for q in (2, 3, 4):
        b = [k / q for k in range(q)]
        x = np.array([0.5, 1.0, 5.0])
        lhs = meijer_g_m0(q, b, x)
        rhs = (2 * math.pi) ** ((q - 1) / 2) / math.sqrt(q) * np.exp(-q * x ** (1.0 / q))
        report.add(f"G^{{{q},0}}_{{0,{q}}}(0,1/q,..) exact exponential", _rel(lhs, rhs), 1e-8)
    p = EnsembleParams(0, 2, ())
    x = np.array([-1.3, 0.4, 2.0])
    report.add("depth 0 weight is x^j e^-x^2",
               max(_rel(ed.weight_g(j, p, x, b), x ** j * np.exp(-x * x))
                   for j in range(4) for b in ed.BACKENDS), 1e-14)


def _suite_biortho(config: RunConfig, report: SuiteReport):
    sets = _BIORTHO_SETS if config.params.depth == 0 and not config.params.nu else (config.params,)
    for p in sets:
        report.add(f"bi-orthogonality defect, M={p.depth}, nu={p.nu}",
                   float(np.max(bk.biorthogonality_defects(p, 5))), 1e-7)
        exact = all(bk.h_norm(n, p) == bk.h_norm_from_determinants(n, p) for n in range(7))
        report.add(f"h_n equals determinant ratio exactly, n<=6, nu={p.nu}", 0.0 if exact else 1.0,
                   0.0, exact)
        ode = all(bk.ode_check(N, p) for N in range(1, 5))
        report.add(f"p_2N solves the characteristic-polynomial ODE, N<=4, nu={p.nu}",
                   0.0 if ode else 1.0, 0.0, ode)


def _hermite_monic(n: int) -> dict:
    """Monic orthogonal polynomials for ``e^{-x^2}``: ``P_{k+1} = x P_k - (k/2) P_{k-1}``."""
    prev, cur = {}, {0: Fraction(1)}
    for k in range(n):
        nxt = {p + 1: c for p, c in cur.items()}
        for p, c in prev.items():
            nxt[p] = nxt.get(p, Fraction(0)) - Fraction(k, 2) * c
        prev, cur = cur, {p: c for p, c in nxt.items() if c != 0}
    return cur


def _gue_kernel(n: int, x: float, y: float) -> float:
    """``sum_{k<n} p_k(x) p_k(y) e^{-y^2} / h_k`` with Hermite ``p_k``, ``h_k = sqrt(pi) k!/2^k``."""
    tot = 0.0
    for k in range(n):
        tot += (special.eval_hermite(k, x) * special.eval_hermite(k, y) / 4.0 ** k
                / (math.sqrt(math.pi) * math.factorial(k) / 2.0 ** k))
    return tot * math.exp(-y * y)


def _suite_kernels(config: RunConfig, report: SuiteReport):
    n = 4
    sets = (EnsembleParams(0, 2, ()), EnsembleParams(1, 2, (1,))) \
        if config.params.depth == 0 else (config.params,)
    for p in sets:
        worst = 0.0
        for x, y in _MIXED_POINTS:
            vals = [bk.kernel_finite(n, p, x, y, r).total for r in bk.KERNEL_ROUTES]
            worst = max(worst, _rel(vals[1], vals[0]), _rel(vals[2], vals[0]))
        report.add(f"sum / double-contour / ABC agree, n=4, M={p.depth}", worst, 1e-6)
        report.add(f"kernel trace equals n, M={p.depth}", abs(bk.kernel_trace(n, p) - n), 1e-5)
    p0 = EnsembleParams(0, 2, ())
    herm = all(bk.p_coefficients(k, p0) == _hermite_monic(k) for k in range(7))
    report.add("depth 0: p_n is the monic Hermite polynomial, n<=6", 0.0 if herm else 1.0, 0.0, herm)
    worst = max(abs(bk.kernel_finite(n, p0, x, y).total - _gue_kernel(n, x, y))
                for x, y in _MIXED_POINTS)
    report.add("depth 0: finite kernel equals the GUE kernel", worst, 1e-10)


def _convergence(params: EnsembleParams, x: float = 0.7, y: float = -0.5):
    limit = he.hard_kernel(he.HardEdgeQuery(x, y, params)).total
    errs = [abs(he.scaled_finite_kernel(n, params, x, y) - limit) for n in (10, 20, 40)]
    return errs, limit


def _suite_hard_edge(config: RunConfig, report: SuiteReport):
    p = config.params
    if p.depth == 0:
        pts = ((0.3, -0.4), (0.7, -0.5), (1.2, 0.9))
        worst = max(abs(he.hard_kernel(he.HardEdgeQuery(x, y, p)).total - float(he.sine_kernel(x, y)))
                    for x, y in pts)
        report.add("depth 0: limit equals the sine kernel", worst, 1e-8)
        worst = max(abs(he.hard_kernel(he.HardEdgeQuery(x, x, p)).total - 2 / math.pi)
                    for x in (0.1, 1.0, 3.0))
        report.add("depth 0: diagonal equals 2/pi", worst, 1e-8)
        worst = max(abs(he.hard_kernel(he.HardEdgeQuery(x, y, p, "unified")).total
                        - he.hard_kernel(he.HardEdgeQuery(x, y, p)).total) for x, y in pts)
        report.add("depth 0: g-product and unified agree", worst, 1e-6)
        worst = 0.0
        for x, y in pts:
            mb, s = he.mb_hard_kernel(0.0, 1, x, y), he.sine_kernel_parts(x, y)
            worst = max(worst, abs(mb.even - s.even / abs(x)), abs(mb.odd - abs(x) * s.odd))
        report.add("theta=1, alpha=0 Wright-Bessel kernel is the sine kernel up to gauge",
                   worst, 1e-4)
    else:
        grid = (-1.1, 0.4, 1.3)
        worst = 0.0
        for x in grid:
            for y in grid[::-1]:
                vals = [he.hard_kernel(he.HardEdgeQuery(x, y, p, r)).total
                        for r in he.HARD_EDGE_REPRESENTATIONS]
                scale = max(abs(v) for v in vals)
                worst = max(worst, (max(vals) - min(vals)) / scale)
        report.add(f"three limiting-kernel representations agree on a 3x3 grid, M={p.depth}",
                   worst, 1e-6)
        theta = 2 * p.depth + 1
        X, Y = 0.6 ** 2 / 4 ** p.depth, 0.9 ** 2 / 4 ** p.depth
        lhs, rhs = he.mb_meijer_identity(2.0, theta, X, Y)
        report.add(f"integer-theta identity, theta={theta}, alpha=2", abs(lhs - rhs), 1e-5)
    errs, _ = _convergence(p)
    mono = errs[0] > errs[1] > errs[2]
    report.add(f"finite-n kernel approaches the limit monotonically, M={p.depth}", errs[-1],
               errs[0], mono, detail=", ".join(f"{e:.2e}" for e in errs))


def _suite_global(config: RunConfig, report: SuiteReport):
    M = config.params.depth
    edge = gd.support_edge(M)
    xs = np.array([-0.9, -0.55, -0.15, -0.02, 0.02, 0.15, 0.55, 0.9]) * edge
    report.add(f"parametric and Stieltjes densities agree, M={M}",
               float(np.max(np.abs(gd.global_density_parametric(M, xs) - gd.stieltjes_density(M, xs)))),
               1e-6)
    xl = np.array([-0.7, -0.3, 0.3, 0.7]) * edge
    lag = np.abs(xl) * gd.fuss_catalan_density(2 * M + 1, xl ** 2)
    report.add(f"|x| rho_FC(x^2) from the one-sided equation, M={M}",
               float(np.max(np.abs(lag - gd.global_density_parametric(M, xl)))), 1e-6)
    report.add(f"normalisation, M={M}", abs(gd.global_normalisation(M) - 1), 1e-6)
    worst = max(abs(gd.global_moment(M, 2 * k) - float(gd.fuss_catalan_moment(2 * M + 1, k)))
                for k in range(4))
    report.add(f"even moments are Fuss-Catalan numbers, k<=3, p={2 * M + 1}", worst, 1e-6)
    report.add("density vanishes outside the support",
               float(gd.stieltjes_density(M, 1.05 * edge)), 1e-8)
    if config.seed is not None:
        p = config.params
        raw = sample_product_spectra(p, config.seed, config.repeats, config.workers)
        scaled = gd.global_scaling_map(p, raw).ravel()
        tol = 0.03 if M == 0 else 0.05
        report.add(f"scaled spectra vs analytic law, KS, n={p.base_dim}, repeats={config.repeats}",
                   ks_distance(scaled, lambda v: gd.global_cdf(M, v)), tol)


THEOREM1_DIAGONAL = (-1.0, 2.0)
THEOREM1_BOX = ((-5.0, 0.0), (0.0, 10.0))


def _suite_theorem1(config: RunConfig, report: SuiteReport):
    a = SignedDiagonal(THEOREM1_DIAGONAL)
    N = 2
    R = config.repeats
    draws = blocked_draws(lambda i, b: map_polynomial_ensemble_batch(a, N, config.seed, b, i),
                          R, 10_000, config.workers)
    signs = np.mean(np.sum(draws < 0, axis=1) == a.n0)
    report.add("sign count preserved in every draw", 1.0 - signs, 0.0, signs == 1.0)

    pdf = lambda u, v: ed.theorem1_pdf(a, [u, v], N)  # noqa: E731
    total, _ = integrate.dblquad(lambda v, u: pdf(u, v), -np.inf, 0.0, 0.0, np.inf,
                                 epsabs=1e-11, epsrel=1e-11)
    report.add("joint density integrates to one", abs(total - 1.0), 1e-4)

    ex = np.linspace(*THEOREM1_BOX[0], 21)
    ey = np.linspace(*THEOREM1_BOX[1], 21)
    z, counts, prob = histogram_zscores(draws, pdf, ex, ey)
    beyond = int(np.sum(z > 3))
    p_tail = special.erfc(3 / math.sqrt(2))
    report.add("20x20 histogram within 3 standard errors in every bin", float(np.max(z)), 3.0,
               detail=f"{beyond}/400 bins beyond 3 SE; {400 * p_tail:.2f} expected for an exact "
                      f"sampler; P(all bins pass | exact law) ~ {(1 - p_tail) ** 400:.2f}")
    chi2 = float(np.sum((counts - R * prob) ** 2 / (R * prob * (1 - prob))))
    report.add("histogram chi-square p-value (supplementary)", stats.chi2.sf(chi2, 400), 1e-3,
               passed=stats.chi2.sf(chi2, 400) > 1e-3, detail=f"chi2 = {chi2:.1f} on 400 bins")

    steps = blocked_draws(
        lambda i, b: np.stack(_chain_interlacing(a, N, config.seed, b, i), axis=1),
        R, 10_000, config.workers)
    frac = float(np.mean(steps))
    report.add("rank-one chain steps strictly interlace", 1.0 - frac, 0.0, frac == 1.0)

    chain = blocked_draws(lambda i, b: rank_one_chain_batch(a, N, config.seed, b, 1_000_000 + i),
                          R, 10_000, config.workers)
    ks = max(stats.ks_2samp(chain[:, c], draws[:, c]).statistic for c in range(a.n))
    report.add("rank-one chain vs direct sampler, two-sample KS per coordinate", ks, 0.01)


def _chain_interlacing(a: SignedDiagonal, N: int, seed: int, repeats: int, task: int):
    """Per-draw interlacing flag of every step of the chain, including the first."""
    steps = rank_one_chain_batch(a, N, seed, repeats, 2_000_000 + task, return_steps=True)
    prev = np.zeros((repeats, 0))
    flags = []
    for a_p, new in zip(a.entries, steps):
        flags.append(interlaces(prev, new, a_p))
        prev = new
    return flags


_SUITE_FUNCS = {
    "weights": _suite_weights,
    "biortho": _suite_biortho,
    "kernels": _suite_kernels,
    "hard-edge": _suite_hard_edge,
    "global": _suite_global,
    "theorem1": _suite_theorem1,
}


def run_suite(config: RunConfig) -> SuiteReport:
    """Run the verification suite named by ``config.suite``."""
    config.validate()
    report = SuiteReport(config.suite)
    t0 = time.perf_counter()
    _SUITE_FUNCS[config.suite](config, report)
    report.wall_time = time.perf_counter() - t0
    return report
