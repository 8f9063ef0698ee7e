"""Random matrix generation for the Hermitised product ensemble.

Covers Ginibre and GUE draws, the product ``W_M = G_M^* ... G_1^* H G_1 ... G_M``,
the polynomial-ensemble map ``X = G^* A G`` and the rank-one deformation
chain that reaches the same spectrum through secular equations alone.

GUE convention: density proportional to ``exp(-Tr H^2)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BracketingError, DimensionError

__all__ = [
    "EnsembleParams",
    "SpectrumSample",
    "SignedDiagonal",
    "task_rng",
    "sample_ginibre",
    "sample_gue",
    "build_hermitised_product",
    "product_spectrum",
    "map_polynomial_ensemble",
    "map_polynomial_ensemble_batch",
    "secular_roots",
    "secular_roots_batch",
    "rank_one_chain",
    "rank_one_chain_batch",
    "interlaces",
]

ZERO_THRESHOLD = 1e-10
COLLISION_THRESHOLD = 1e-12


@dataclass(frozen=True)
class EnsembleParams:
    """Depth ``M``, base dimension ``n`` and rectangularity indices ``nu_1..nu_M``."""

    depth: int
    base_dim: int
    nu: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "nu", tuple(int(v) for v in self.nu))
        if self.depth < 0:
            raise ValueError("depth must be non-negative")
        if self.base_dim < 1:
            raise ValueError("base_dim must be positive")
        if len(self.nu) != self.depth:
            raise ValueError(f"expected {self.depth} nu entries, got {len(self.nu)}")
        if any(v < 0 for v in self.nu):
            raise ValueError("nu entries must be non-negative")

    @property
    def nu_full(self) -> tuple:
        """``(nu_0, nu_1, ..., nu_M)`` with ``nu_0 = 0``."""
        return (0,) + self.nu

    def factor_shape(self, m: int) -> tuple[int, int]:
        """Shape of ``G_m`` for ``m = 1..M``."""
        nf = self.nu_full
        return nf[m - 1] + self.base_dim, nf[m] + self.base_dim

    @property
    def matrix_dim(self) -> int:
        return self.nu_full[-1] + self.base_dim


@dataclass
class SpectrumSample:
    """Nonzero eigenvalues (ascending) of one draw plus its provenance."""

    eigenvalues: np.ndarray
    zero_multiplicity: int
    seed: int
    sampler_id: str

    @property
    def negative_count(self) -> int:
        return int(np.count_nonzero(self.eigenvalues < 0))


@dataclass(frozen=True)
class SignedDiagonal:
    """Strictly ascending nonzero diagonal ``a_1 < ... < a_n0 < 0 < ... < a_n``."""

    entries: tuple
    n0: int = field(init=False)

    def __post_init__(self):
        a = tuple(float(v) for v in self.entries)
        if not a:
            raise ValueError("diagonal must be non-empty")
        if any(v == 0 for v in a):
            raise ValueError("diagonal entries must be nonzero")
        if any(a[i] >= a[i + 1] for i in range(len(a) - 1)):
            raise ValueError("diagonal entries must be strictly ascending")
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "n0", sum(v < 0 for v in a))

    @property
    def n(self) -> int:
        return len(self.entries)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.entries)


def task_rng(master_seed: int, task_index: int = 0) -> np.random.Generator:
    """Independent generator for task ``task_index`` of a run seeded by ``master_seed``.

    Counter-based: the stream for a task depends only on the pair, so adding
    tasks never changes earlier ones.
    """
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(task_index),))
    return np.random.default_rng(ss)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_ginibre(rows: int, cols: int, seed, size: int | None = None) -> np.ndarray:
    """Complex Gaussian matrix with ``E|g|^2 = 1`` (real and imaginary variance 1/2).

    ``size`` prepends a batch axis.
    """
    if rows < 1 or cols < 1:
        raise DimensionError("rows and cols must be positive")
    rng = _rng(seed)
    shape = (rows, cols) if size is None else (size, rows, cols)
    z = rng.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)


def sample_gue(dim: int, seed, size: int | None = None) -> np.ndarray:
    """GUE matrix with density proportional to ``exp(-Tr H^2)``.

    Diagonal entries are real normal with variance 1/2; off-diagonal entries
    have ``E|h|^2 = 1/2``.
    """
    if dim < 1:
        raise DimensionError("dim must be positive")
    a = sample_ginibre(dim, dim, seed, size)
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def build_hermitised_product(params: EnsembleParams, seed, size: int | None = None) -> np.ndarray:
    """``W_M = G_M^* ... G_1^* H G_1 ... G_M`` of dimension ``nu_M + n``."""
    rng = _rng(seed)
    w = sample_gue(params.base_dim, rng, size)
    for m in range(1, params.depth + 1):
        r, c = params.factor_shape(m)
        g = sample_ginibre(r, c, rng, size)
        gh = np.conj(np.swapaxes(g, -1, -2))
        w = gh @ w @ g
    # restore exact Hermiticity lost to rounding
    return 0.5 * (w + np.conj(np.swapaxes(w, -1, -2)))


def _split_zeros(eigs: np.ndarray, n_keep: int):
    """Drop the structurally zero eigenvalues, keeping the ``n_keep`` largest in modulus."""
    radius = np.max(np.abs(eigs), axis=-1, keepdims=True)
    order = np.argsort(np.abs(eigs), axis=-1)
    kept = np.take_along_axis(eigs, order[..., eigs.shape[-1] - n_keep:], axis=-1)
    dropped = np.take_along_axis(eigs, order[..., : eigs.shape[-1] - n_keep], axis=-1)
    if dropped.size and np.any(np.abs(dropped) >= ZERO_THRESHOLD * radius):
        raise DimensionError("expected zero eigenvalues above the numerical threshold")
    return np.sort(kept, axis=-1)


def _has_collision(eigs: np.ndarray) -> np.ndarray:
    if eigs.shape[-1] < 2:
        return np.zeros(eigs.shape[:-1], dtype=bool)
    gaps = np.diff(eigs, axis=-1)
    scale = np.max(np.abs(eigs), axis=-1, keepdims=True)
    return np.any(gaps <= COLLISION_THRESHOLD * scale, axis=-1)


def product_spectrum(params: EnsembleParams, seed: int, repeats: int = 1,
                     task_index: int = 0) -> np.ndarray:
    """Nonzero eigenvalues of ``repeats`` product draws, shape ``(repeats, n)``.

    Draws whose eigenvalues collide numerically are replaced by draws from
    an advanced stream (a probability-zero event).
    """
    out = np.empty((repeats, params.base_dim))
    rng = task_rng(seed, task_index)
    filled = 0
    while filled < repeats:
        w = build_hermitised_product(params, rng, repeats - filled)
        eigs = _split_zeros(np.linalg.eigvalsh(w), params.base_dim)
        good = eigs[~_has_collision(eigs)]
        out[filled: filled + len(good)] = good
        filled += len(good)
    return out


def map_polynomial_ensemble(a: SignedDiagonal, big_N: int, seed) -> SpectrumSample:
    """Eigenvalues of ``G^* A G`` with ``G`` an ``n x N`` Ginibre matrix."""
    n = a.n
    if n > big_N:
        raise DimensionError(f"need n <= N, got n={n}, N={big_N}")
    rng = _rng(seed)
    while True:
        g = sample_ginibre(n, big_N, rng)
        x = np.conj(g.T) @ (a.as_array()[:, None] * g)
        x = 0.5 * (x + np.conj(x.T))
        eigs = _split_zeros(np.linalg.eigvalsh(x), n)
        if not _has_collision(eigs):
            break
    return SpectrumSample(eigs, big_N - n, seed if isinstance(seed, int) else -1,
                          "polynomial-map")


def map_polynomial_ensemble_batch(a: SignedDiagonal, big_N: int, seed: int, repeats: int,
                                  task_index: int = 0) -> np.ndarray:
    """Vectorised :func:`map_polynomial_ensemble`, shape ``(repeats, n)``.

    Uses that the nonzero spectrum of ``G^* A G`` equals that of
    ``L^* A L`` with ``G G^* = L L^*`` (Cholesky), an ``n x n`` problem.
    """
    n = a.n
    if n > big_N:
        raise DimensionError(f"need n <= N, got n={n}, N={big_N}")
    rng = task_rng(seed, task_index)
    out = np.empty((repeats, n))
    filled = 0
    while filled < repeats:
        g = sample_ginibre(n, big_N, rng, repeats - filled)
        gram = g @ np.conj(np.swapaxes(g, -1, -2))
        chol = np.linalg.cholesky(gram)
        lh = np.conj(np.swapaxes(chol, -1, -2))
        x = lh @ (a.as_array()[:, None] * chol)
        x = 0.5 * (x + np.conj(np.swapaxes(x, -1, -2)))
        eigs = np.linalg.eigvalsh(x)
        good = eigs[~_has_collision(eigs)]
        out[filled: filled + len(good)] = good
        filled += len(good)
    return out


def _secular(lam, poles, weights):
    """``g(lam) = sum_j w_j / (lam - pole_j)`` and its derivative, batched."""
    d = lam[..., None] - poles
    return np.sum(weights / d, axis=-1), -np.sum(weights / d**2, axis=-1)


def secular_roots_batch(prev_eigs: np.ndarray, a_p: float, q_weights: np.ndarray,
                        q0: np.ndarray, iterations: int = 200) -> np.ndarray:
    """Roots of ``1 = a_p (q0/lam + sum_j q_j/(lam - lam_j))`` for a batch of chains.

    ``prev_eigs`` and ``q_weights`` have shape ``(B, p-1)``; ``q0`` shape ``(B,)``.
    Returns ``(B, p)`` ascending roots.  Between consecutive poles of
    ``{0} U prev`` the function ``a_p * g`` is monotone, so every root has a
    provable bracket; bisection then safeguarded Newton locates it.
    """
    prev = np.atleast_2d(np.asarray(prev_eigs, dtype=float))
    qw = np.atleast_2d(np.asarray(q_weights, dtype=float))
    q0 = np.atleast_1d(np.asarray(q0, dtype=float))
    B = q0.shape[0]
    if prev.shape[1] == 0:
        prev = np.zeros((B, 0))
        qw = np.zeros((B, 0))
    if np.any(qw <= 0) or np.any(q0 <= 0):
        raise BracketingError("secular weights must be positive")
    poles = np.concatenate([np.zeros((B, 1)), prev], axis=1)
    weights = np.concatenate([q0[:, None], qw], axis=1)
    order = np.argsort(poles, axis=1)
    poles = np.take_along_axis(poles, order, axis=1)
    weights = np.take_along_axis(weights, order, axis=1)
    if np.any(np.diff(poles, axis=1) <= 0):
        raise BracketingError("previous eigenvalues must be distinct and nonzero")
    total = np.sum(weights, axis=1)
    p = poles.shape[1]
    # target: g(lam) = 1/a_p with g strictly decreasing between poles
    target = 1.0 / a_p
    lo = np.empty((B, p))
    hi = np.empty((B, p))
    lo[:, : p - 1] = poles[:, :-1]
    hi[:, : p - 1] = poles[:, 1:]
    if a_p > 0:
        # outer root right of the largest pole: g falls from +inf to 0
        lo_out, hi_out = poles[:, -1], poles[:, -1] + 2.0 * a_p * total
        lo = np.concatenate([lo[:, : p - 1], lo_out[:, None]], axis=1)
        hi = np.concatenate([hi[:, : p - 1], hi_out[:, None]], axis=1)
    else:
        # outer root left of the smallest pole: g falls from 0 to -inf
        lo_out, hi_out = poles[:, 0] + 2.0 * a_p * total, poles[:, 0]
        lo = np.concatenate([lo_out[:, None], lo[:, : p - 1]], axis=1)
        hi = np.concatenate([hi_out[:, None], hi[:, : p - 1]], axis=1)
    a0, b0 = lo.copy(), hi.copy()
    lam = 0.5 * (lo + hi)
    for _ in range(iterations):
        val, der = _secular(lam, poles[:, None, :], weights[:, None, :])
        f = val - target
        # g decreasing: f > 0 means the root lies to the right
        right = f > 0
        lo = np.where(right, lam, lo)
        hi = np.where(right, hi, lam)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = lam - f / der
        mid = 0.5 * (lo + hi)
        ok = np.isfinite(newton) & (newton > lo) & (newton < hi)
        new = np.where(ok, newton, mid)
        width = hi - lo
        if np.all((np.abs(new - lam) <= 4 * np.finfo(float).eps * np.abs(new))
                  | (width <= 4 * np.finfo(float).eps * np.maximum(np.abs(lo), np.abs(hi)))):
            lam = new
            break
        lam = new
    if np.any((lam <= a0) | (lam >= b0)):
        raise BracketingError("secular root left its bracket")
    return np.sort(lam, axis=1)


def secular_roots(prev_eigs: Sequence[float], a_p: float, q_weights: Sequence[float],
                  q0: float) -> np.ndarray:
    """Roots of the rank-one secular equation for one chain step.

    ``prev_eigs`` are the ``p-1`` eigenvalues of the previous step.  The
    ``p`` returned roots interlace with ``{0} U prev_eigs``.
    """
    if a_p == 0:
        raise BracketingError("a_p must be nonzero")
    prev = np.asarray(prev_eigs, dtype=float)[None, :]
    qw = np.asarray(q_weights, dtype=float)[None, :]
    return secular_roots_batch(prev, a_p, qw, np.array([float(q0)]))[0]


def _chain_order(a: SignedDiagonal) -> list[float]:
    return list(a.entries)


def rank_one_chain_batch(a: SignedDiagonal, big_N: int, seed: int, repeats: int,
                         task_index: int = 0, return_steps: bool = False):
    """Rank-one deformation chain for ``repeats`` independent draws.

    Step ``p`` adds ``a_p |v><v|`` to the previous ``p-1`` nonzero eigenvalues;
    its eigenvalue weights are ``q0 ~ Gamma(N-p+1, 1)`` on the zero space and
    ``q_j ~ Exp(1)`` on the previous eigenvectors.  Returns the final
    spectra ``(repeats, n)`` or, with ``return_steps``, the list of all steps.
    """
    n = a.n
    if n > big_N:
        raise DimensionError(f"need n <= N, got n={n}, N={big_N}")
    rng = task_rng(seed, task_index)
    steps = []
    prev = np.zeros((repeats, 0))
    for p, a_p in enumerate(_chain_order(a), start=1):
        q0 = rng.gamma(big_N - p + 1, 1.0, size=repeats)
        qw = rng.exponential(1.0, size=(repeats, p - 1))
        prev = secular_roots_batch(prev, a_p, qw, q0)
        steps.append(prev)
    return steps if return_steps else prev


def rank_one_chain(a: SignedDiagonal, big_N: int, seed: int) -> list[SpectrumSample]:
    """Eigenvalues ``X^(1), ..., X^(n)`` of one rank-one chain (no diagonalisation)."""
    steps = rank_one_chain_batch(a, big_N, seed, 1, return_steps=True)
    return [
        SpectrumSample(s[0], big_N - (p + 1), seed, "rank-one-chain")
        for p, s in enumerate(steps)
    ]


def interlaces(prev: np.ndarray, new: np.ndarray, a_p: float) -> np.ndarray:
    """Strict interlacing of ``new`` (p roots) with ``{0} U prev`` (p values).

    For ``a_p > 0`` every pole sits strictly below its root; for ``a_p < 0``
    strictly above.
    """
    prev = np.atleast_2d(prev)
    new = np.atleast_2d(new)
    poles = np.sort(np.concatenate([np.zeros((new.shape[0], 1)), prev], axis=1), axis=1)
    if a_p > 0:
        ok = np.all(poles < new, axis=1) & np.all(new[:, :-1] < poles[:, 1:], axis=1)
    else:
        ok = np.all(new < poles, axis=1) & np.all(poles[:, :-1] < new[:, 1:], axis=1)
    return ok
