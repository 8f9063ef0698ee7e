import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special, stats

from hermprod.errors import BracketingError, DimensionError
from hermprod.sampling import (
    EnsembleParams,
    SignedDiagonal,
    build_hermitised_product,
    interlaces,
    map_polynomial_ensemble,
    map_polynomial_ensemble_batch,
    product_spectrum,
    rank_one_chain,
    rank_one_chain_batch,
    sample_ginibre,
    sample_gue,
    secular_roots,
    secular_roots_batch,
    task_rng,
)


class TestTypes:
    def test_factor_shapes(self):
        p = EnsembleParams(2, 3, (1, 4))
        assert p.factor_shape(1) == (3, 4)
        assert p.factor_shape(2) == (4, 7)
        assert p.matrix_dim == 7

    @pytest.mark.parametrize("args", [(-1, 2, ()), (1, 0, (0,)), (1, 2, ()), (1, 2, (-1,))])
    def test_invalid_params(self, args):
        with pytest.raises(ValueError):
            EnsembleParams(*args)

    @pytest.mark.parametrize("entries", [(), (1.0, 0.0), (2.0, 1.0)])
    def test_invalid_diagonal(self, entries):
        with pytest.raises(ValueError):
            SignedDiagonal(entries)

    def test_negative_count(self):
        assert SignedDiagonal((-3.0, -1.0, 2.0)).n0 == 2


class TestMatrices:
    def test_ginibre_shape_and_determinism(self):
        g = sample_ginibre(2, 3, 5)
        assert g.shape == (2, 3)
        np.testing.assert_array_equal(g, sample_ginibre(2, 3, 5))

    def test_ginibre_variance(self):
        g = sample_ginibre(1000, 1000, 11)
        assert np.mean(np.abs(g) ** 2) == pytest.approx(1.0, abs=0.01)

    def test_gue_hermitian(self):
        h = sample_gue(6, 3)
        np.testing.assert_array_equal(h, h.conj().T)

    def test_gue_scalar_law(self):
        x = sample_gue(1, 17, size=1_000_000)[:, 0, 0].real
        ks = stats.kstest(x, lambda t: 0.5 * (1 + special.erf(t))).statistic
        assert ks < 0.002

    def test_gue_semicircle(self):
        n = 50
        eig = np.linalg.eigvalsh(sample_gue(n, 23, size=1000)).ravel()
        y = math.sqrt(2) * eig / math.sqrt(n)

        def cdf(t):
            t = np.clip(t, -2, 2)
            return 0.5 + (t * np.sqrt(4 - t * t) / 2 + 2 * np.arcsin(t / 2)) / (2 * math.pi)

        assert stats.kstest(y, cdf).statistic < 0.02

    def test_depth_zero_is_gue(self):
        np.testing.assert_array_equal(build_hermitised_product(EnsembleParams(0, 3, ()), 4),
                                      sample_gue(3, 4))

    def test_structural_zero(self):
        w = build_hermitised_product(EnsembleParams(1, 2, (1,)), 9)
        eig = np.linalg.eigvalsh(w)
        assert w.shape == (3, 3)
        assert np.sum(np.abs(eig) < 1e-10 * np.max(np.abs(eig))) == 1

    def test_signature_preserved_by_product(self):
        # the product has as many negative eigenvalues as its GUE seed
        p = EnsembleParams(2, 3, (0, 0))
        rng = task_rng(31)
        size = 100_000
        h = sample_gue(3, rng, size)
        w = h
        for m in (1, 2):
            g = sample_ginibre(3, 3, rng, size)
            w = g.conj().swapaxes(-1, -2) @ w @ g
        w = 0.5 * (w + w.conj().swapaxes(-1, -2))
        neg_h = np.sum(np.linalg.eigvalsh(h) < 0, axis=1)
        neg_w = np.sum(np.linalg.eigvalsh(w) < 0, axis=1)
        assert np.all(neg_h == neg_w)
        assert p.matrix_dim == 3

    def test_product_spectrum_sorted_and_zero_free(self):
        eig = product_spectrum(EnsembleParams(1, 4, (2,)), 3, repeats=50)
        assert eig.shape == (50, 4)
        assert np.all(np.diff(eig, axis=1) > 0)
        assert np.all(eig != 0)

    def test_task_streams_independent_of_later_tasks(self):
        a = task_rng(7, 3).standard_normal(5)
        assert not np.allclose(a, task_rng(7, 4).standard_normal(5))
        np.testing.assert_array_equal(a, task_rng(7, 3).standard_normal(5))


class TestPolynomialMap:
    def test_scalar_case_is_exponential(self):
        x = map_polynomial_ensemble_batch(SignedDiagonal((2.0,)), 1, 5, 1_000_000)
        assert 1.99 <= x.mean() <= 2.01

    def test_sign_pattern(self):
        x = map_polynomial_ensemble_batch(SignedDiagonal((-1.0, 3.0)), 2, 8, 20_000)
        assert np.all(x[:, 0] < 0) and np.all(x[:, 1] > 0)

    def test_zero_multiplicity(self):
        s = map_polynomial_ensemble(SignedDiagonal((-1.0, 3.0)), 3, 8)
        assert s.zero_multiplicity == 1 and s.eigenvalues.shape == (2,)
        assert s.negative_count == 1

    def test_rank_bound(self):
        with pytest.raises(DimensionError):
            map_polynomial_ensemble(SignedDiagonal((-1.0, 1.0, 2.0)), 2, 0)

    def test_cholesky_batch_matches_direct_law(self):
        a = SignedDiagonal((-1.0, 0.5, 2.0))
        batch = map_polynomial_ensemble_batch(a, 4, 2, 4000)
        direct = np.array([map_polynomial_ensemble(a, 4, np.random.default_rng(1000 + i)).eigenvalues
                           for i in range(4000)])
        for c in range(3):
            assert stats.ks_2samp(batch[:, c], direct[:, c]).pvalue > 1e-3


class TestSecular:
    def test_single_pole(self):
        assert secular_roots([], 1.5, [], 0.7) == pytest.approx([1.05])

    def test_two_roots_bracketed(self):
        r = secular_roots([1.0], 2.0, [1.0], 1.0)
        assert 0 < r[0] < 1 < r[1]
        g = lambda lam: 1 - 2.0 * (1.0 / lam + 1.0 / (lam - 1.0))  # noqa: E731
        assert g(r[0]) == pytest.approx(0, abs=1e-12)
        assert g(r[1]) == pytest.approx(0, abs=1e-12)

    def test_zero_coupling_rejected(self):
        with pytest.raises(BracketingError):
            secular_roots([1.0], 0.0, [1.0], 1.0)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(-50, 50).filter(lambda v: abs(v) > 1e-3), min_size=0, max_size=6,
                    unique=True),
           st.floats(0.05, 10) | st.floats(-10, -0.05),
           st.floats(0.01, 10), st.integers(0, 2 ** 31))
    def test_roots_interlace_and_solve(self, prev, a_p, q0, seed):
        prev = sorted(prev)
        if len(prev) > 1 and np.min(np.diff(prev)) < 1e-3:
            return
        q = np.random.default_rng(seed).exponential(1.0, len(prev)) + 1e-3
        r = secular_roots(prev, a_p, q, q0)
        assert len(r) == len(prev) + 1
        assert interlaces(np.array([prev]), np.array([r]), a_p)[0]
        resid = 1 - a_p * (q0 / r + np.sum(q / (r[:, None] - np.array(prev)), axis=1))
        scale = 1 + abs(a_p) * (q0 / np.abs(r) + np.sum(q / np.abs(r[:, None] - np.array(prev)), axis=1))
        assert np.all(np.abs(resid) <= 1e-9 * scale)


class TestRankOneChain:
    def test_chain_length(self):
        steps = rank_one_chain(SignedDiagonal((-1.0, 0.5, 2.0)), 4, 3)
        assert [len(s.eigenvalues) for s in steps] == [1, 2, 3]
        assert steps[-1].zero_multiplicity == 1

    def test_interlacing_every_step(self):
        a = SignedDiagonal((-2.0, -0.5, 1.0, 3.0))
        steps = rank_one_chain_batch(a, 5, 13, 20_000, return_steps=True)
        prev = np.zeros((20_000, 0))
        for a_p, new in zip(a.entries, steps):
            assert np.all(interlaces(prev, new, a_p))
            prev = new

    def test_conditional_step_law(self):
        # one step from a fixed previous eigenvalue vs the closed-form conditional density
        lam1, a2, N, B = -0.8, 2.0, 2, 200_000
        rng = task_rng(99)
        q0 = rng.gamma(N - 1, 1.0, B)
        qw = rng.exponential(1.0, (B, 1))
        r = secular_roots_batch(np.full((B, 1), lam1), a2, qw, q0)

        def dens(u, v):
            return (math.exp(-(u + v) / a2) * (v - u)
                    / (abs(a2) ** N * abs(lam1) * math.exp(-lam1 / a2)))

        norm = integrate.dblquad(lambda v, u: dens(u, v), lam1, 0, 0, np.inf)[0]
        assert norm == pytest.approx(1.0, abs=1e-8)
        for col, cdf in (
            (1, lambda t: integrate.dblquad(lambda v, u: dens(u, v), lam1, 0, 0, t)[0]),
            (0, lambda t: integrate.dblquad(lambda v, u: dens(u, v), lam1, t, 0, np.inf)[0]),
        ):
            for t in np.quantile(r[:, col], [0.1, 0.3, 0.5, 0.7, 0.9]):
                F = cdf(t)
                assert abs(np.mean(r[:, col] <= t) - F) < 4.5 * math.sqrt(F * (1 - F) / B)

    def test_chain_matches_direct_sampler(self):
        a = SignedDiagonal((-1.0, 2.0))
        chain = rank_one_chain_batch(a, 2, 4, 100_000)
        direct = map_polynomial_ensemble_batch(a, 2, 5, 100_000)
        for c in range(2):
            assert stats.ks_2samp(chain[:, c], direct[:, c]).statistic < 0.01

    def test_interlaces_detects_violation(self):
        assert not interlaces(np.array([[1.0]]), np.array([[0.5, 0.8]]), 1.0)[0]
        assert interlaces(np.array([[1.0]]), np.array([[0.5, 1.8]]), 1.0)[0]
