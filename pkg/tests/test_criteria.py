import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import argmin_first, naive_bcf, naive_gic_fixed, naive_gic_large
from spikerank.criteria import (
    CriterionResult,
    PenaltySchedule,
    aic,
    bcf,
    bic,
    default_gamma,
    evaluate,
    gic_fixed,
    gic_large,
    loglik,
    loglik_tilde,
    parse_criterion,
    penalty_dim,
)
from spikerank.errors import DomainError
from spikerank.spectra import SampleSpectrum

ALL_IDS = [
    "gic-fixed:bic",
    "gic-fixed:aic",
    "gic-fixed:ilp",
    "gic-fixed:ilp-half",
    "gic-fixed:const:2",
    "gic-large:auto",
    "gic-large:0.83",
    "bcf",
    "aic",
    "bic",
]


def random_spectrum(rng, n, p):
    """Eigenvalues of a random spiked sample covariance, exactly zero past rank n."""
    d = np.sort(rng.gamma(2.0, 0.5, size=p))[::-1]
    spikes = rng.integers(0, 4)
    d[:spikes] += rng.uniform(1.0, 8.0, size=spikes)
    d = np.sort(d)[::-1]
    if p > n:
        d[n:] = 0.0
    return SampleSpectrum(d, n)


def ones(n, p):
    return SampleSpectrum(np.ones(p), n)


class TestLikelihoods:
    def test_loglik_examples(self):
        assert loglik(ones(50, 6), 3) == 0.0
        assert loglik(SampleSpectrum([4, 1, 1, 1], 100), 1) == pytest.approx(-50 * math.log(4))
        e = math.e
        assert loglik(SampleSpectrum([e * e, e, 1.0], 2), 2) == pytest.approx(-3.0)

    def test_loglik_range(self):
        with pytest.raises(ValueError):
            loglik(SampleSpectrum([3.0, 2.0, 1.0], 2), 3)

    def test_loglik_beyond_rank(self):
        with pytest.raises(DomainError):
            loglik(SampleSpectrum([3.0, 2.0, 0.0, 0.0], 2), 2)

    def test_loglik_tilde_examples(self):
        for k in range(5):
            assert loglik_tilde(ones(30, 5), k) == 0.0
        assert loglik_tilde(SampleSpectrum([4, 1, 1, 1], 100), 1) == pytest.approx(-50 * math.log(4))
        assert loglik_tilde(SampleSpectrum([4, 2, 1], 10), 1) == pytest.approx(-5 * math.log(4) - 5)

    def test_penalty_dim(self):
        assert penalty_dim(0, 12) == 0
        assert penalty_dim(1, 12) == 12
        assert penalty_dim(3, 12) == 33


class TestPenaltySchedule:
    def test_values(self):
        n = 500
        assert PenaltySchedule("aic").value(n) == 1.0
        assert PenaltySchedule("bic").value(n) == pytest.approx(math.log(n) / 2)
        assert PenaltySchedule("ilp").value(n) == pytest.approx(math.log(math.log(n)))
        assert PenaltySchedule("ilp_half").value(n) == pytest.approx(math.sqrt(math.log(math.log(n))))
        assert PenaltySchedule("constant", 2.0).value(n) == 2.0

    def test_ilp_small_n(self):
        with pytest.raises(DomainError):
            PenaltySchedule("ilp").value(2)

    def test_invalid(self):
        with pytest.raises(ValueError):
            PenaltySchedule("hannan")
        with pytest.raises(ValueError):
            PenaltySchedule("constant")


class TestZeroSignal:
    @pytest.mark.parametrize("cid", ALL_IDS)
    @pytest.mark.parametrize("n, p", [(100, 12), (500, 200), (200, 500), (200, 200)])
    def test_all_ones(self, cid, n, p):
        assert evaluate(cid, ones(n, p)).k_hat == 0


class TestOracleEquivalence:
    def _check(self, got, expected):
        expected = np.asarray(expected)
        np.testing.assert_allclose(got.scores, expected, rtol=1e-10, atol=1e-10 * np.abs(expected).max())
        assert got.k_hat == argmin_first(list(got.scores))

    def test_random_spectra(self):
        rng = np.random.default_rng(2024)
        for _ in range(200):
            n = int(rng.integers(8, 60))
            p = int(rng.integers(4, 40))
            spec = random_spectrum(rng, n, p)
            d = list(spec.eigenvalues)
            top = min(n, p) - 1
            cn = 2.0
            self._check(
                gic_fixed(spec, PenaltySchedule("constant", cn), top),
                naive_gic_fixed(d, n, cn, top),
            )
            self._check(gic_large(spec, 0.83, top), naive_gic_large(d, n, 0.83, top))
            kb = min(n - 2, p - 1) - 1
            if kb >= 0:
                self._check(bcf(spec, kb), naive_bcf(d, n, kb))

    def test_constant_two_khat(self):
        rng = np.random.default_rng(5)
        spec = random_spectrum(rng, 40, 10)
        scores = naive_gic_fixed(list(spec.eigenvalues), 40, 2.0, 9)
        res = gic_fixed(spec, PenaltySchedule("constant", 2.0))
        assert res.k_hat == argmin_first(scores)


class TestAicBicIdentity:
    def test_gic_large_special_cases(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            spec = random_spectrum(rng, 80, 30)
            a = aic(spec, 10)
            np.testing.assert_allclose(a.scores, gic_large(spec, 1.0, 10).scores, rtol=1e-12)
            b = bic(spec, 10)
            g = math.log(80) / 2
            np.testing.assert_allclose(b.scores, gic_large(spec, g, 10).scores, rtol=1e-12)


class TestMonotonicity:
    def test_khat_nonincreasing_in_cn(self):
        rng = np.random.default_rng(9)
        grid = np.geomspace(0.05, 50, 40)
        for _ in range(100):
            spec = random_spectrum(rng, 60, 15)
            khats = [gic_fixed(spec, PenaltySchedule("constant", c)).k_hat for c in grid]
            assert all(a >= b for a, b in zip(khats, khats[1:]))

    def test_khat_nonincreasing_in_gamma(self):
        rng = np.random.default_rng(10)
        grid = np.linspace(0.1, 3.0, 30)
        for _ in range(50):
            spec = random_spectrum(rng, 60, 40)
            khats = [gic_large(spec, g).k_hat for g in grid]
            assert all(a >= b for a, b in zip(khats, khats[1:]))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.1, 10), st.floats(0.1, 10))
    def test_pairwise_property(self, seed, c1, c2):
        spec = random_spectrum(np.random.default_rng(seed), 50, 12)
        lo, hi = sorted((c1, c2))
        k_lo = gic_fixed(spec, PenaltySchedule("constant", lo)).k_hat
        k_hi = gic_fixed(spec, PenaltySchedule("constant", hi)).k_hat
        assert k_hi <= k_lo


class TestGicLarge:
    def test_grid_invariance(self):
        rng = np.random.default_rng(12)
        spec = random_spectrum(rng, 100, 50)
        full = gic_large(spec, 0.9, 30)
        short = gic_large(spec, 0.9, full.k_hat + 2)
        np.testing.assert_array_equal(full.scores[: short.scores.size], short.scores)
        assert short.k_hat == full.k_hat

    def test_default_kmax(self):
        assert gic_large(ones(500, 200), 1.0).k_max == 15
        assert gic_large(ones(10, 6), 1.0).k_max == 5

    def test_rejects_bad_gamma(self):
        with pytest.raises(ValueError):
            gic_large(ones(10, 5), 0.0)

    def test_kmax_beyond_rank(self):
        spec = SampleSpectrum([5.0, 2.0, 0.0, 0.0], 2)
        with pytest.raises(ValueError):
            gic_large(spec, 1.0, 2)

    @pytest.mark.parametrize("n, p, gamma", [(500, 200, 0.94), (200, 500, 0.83), (300, 300, 0.89)])
    def test_default_gamma(self, n, p, gamma):
        assert default_gamma(n, p) == pytest.approx(gamma, abs=0.005)

    def test_default_gamma_capped(self):
        assert default_gamma(10_000, 1) == 1.0


class TestBcf:
    def test_branches(self):
        rng = np.random.default_rng(1)
        assert bcf(random_spectrum(rng, 100, 40)).params["branch"] == "l1"
        assert bcf(random_spectrum(rng, 40, 100)).params["branch"] == "l2"
        assert bcf(random_spectrum(rng, 50, 50)).params["branch"] == "l1"

    def test_l2_ignores_structural_zeros(self):
        rng = np.random.default_rng(2)
        spec = random_spectrum(rng, 30, 60)
        assert np.all(spec.eigenvalues[30:] == 0)
        assert np.all(np.isfinite(bcf(spec).scores))

    def test_default_kmax(self):
        assert bcf(ones(500, 200)).k_max == 15
        assert bcf(ones(10, 5)).k_max == 3


class TestIdentifiers:
    @pytest.mark.parametrize("cid", ALL_IDS)
    def test_round_trip_id(self, cid):
        res = evaluate(cid, ones(100, 20))
        assert isinstance(res, CriterionResult)
        assert res.criterion_id == cid

    @pytest.mark.parametrize(
        "cid", ["gic", "gic-fixed:foo", "gic-fixed:const:-1", "gic-large:x", "gic-large:0", "mdl"]
    )
    def test_unknown(self, cid):
        with pytest.raises(ValueError):
            parse_criterion(cid)

    def test_auto_gamma_recorded(self):
        res = evaluate("gic-large:auto", ones(500, 200))
        assert res.params["gamma"] == pytest.approx(0.94, abs=0.005)

    def test_result_equality_and_table(self):
        spec = random_spectrum(np.random.default_rng(0), 30, 10)
        a = evaluate("gic-fixed:ilp", spec)
        b = evaluate("gic-fixed:ilp", spec)
        assert a == b
        assert a.table()[0] == (0, float(a.scores[0]))
        with pytest.raises(ValueError):
            a.scores[0] = 1.0


def test_ties_go_to_smaller_kprime():
    # with zero penalty contributions equal, argmin must pick the first index
    res = gic_fixed(ones(20, 5), PenaltySchedule("constant", 1e-300), 3)
    assert res.k_hat == 0
