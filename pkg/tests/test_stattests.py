"""Unit-root tests, Ljung-Box and Benjamini-Hochberg control.

Brute-force oracles live here in the tests: the Ljung-Box Q is
recomputed from the definition of the sample autocorrelations, and the
BH examples are hand-executed step-up decisions.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causal_pulse.errors import DegenerateSeriesError, InsufficientDataError
from causal_pulse.stattests import (
    BhResult,
    PValueFamily,
    adf_test,
    bh_adjust,
    bh_fdr,
    kpss_test,
    ljung_box,
    retain_pair,
)

from conftest import daily


def white_noise(seed, n=500):
    return np.random.default_rng(seed).standard_normal(n)


def random_walk(seed, n=500):
    return np.cumsum(white_noise(seed, n))


class TestAdf:
    def test_white_noise_rejects_unit_root(self):
        res = adf_test(daily(white_noise(1)))
        assert res.p_value < 0.05 and res.decision_at_5pct

    def test_random_walk_fails_to_reject(self):
        res = adf_test(daily(random_walk(1)))
        assert res.p_value > 0.05 and not res.decision_at_5pct

    def test_constant_series_degenerate(self):
        with pytest.raises(DegenerateSeriesError):
            adf_test(daily([3.0] * 50))

    def test_short_series_rejected(self):
        with pytest.raises(InsufficientDataError):
            adf_test(daily(white_noise(1, 10)))

    def test_accepts_plain_arrays(self):
        assert adf_test(white_noise(2)).decision_at_5pct


class TestKpss:
    def test_white_noise_not_rejected(self):
        res = kpss_test(daily(white_noise(3)))
        assert res.p_value > 0.05 and not res.decision_at_5pct

    def test_random_walk_rejected(self):
        res = kpss_test(daily(random_walk(3)))
        assert res.p_value <= 0.01 and res.decision_at_5pct and res.p_clamped

    def test_short_series_rejected(self):
        with pytest.raises(InsufficientDataError):
            kpss_test(daily(white_noise(3, 10)))

    def test_p_clamped_to_table_range(self):
        for seed in range(8):
            res = kpss_test(daily(white_noise(seed)))
            assert 0.01 <= res.p_value <= 0.10


class TestRetainPair:
    def test_two_white_noise_series_retained(self):
        assert retain_pair(daily(white_noise(4)), daily(white_noise(5)))

    def test_random_walk_rejected(self):
        assert not retain_pair(daily(white_noise(4)), daily(random_walk(5)))
        assert not retain_pair(daily(random_walk(4)), daily(white_noise(5)))

    def test_symmetric_on_identical_series(self):
        series = daily(white_noise(6))
        single = adf_test(series).decision_at_5pct and not kpss_test(series).decision_at_5pct
        assert retain_pair(series, series) == single


def brute_force_ljung_box(x, lags):
    """Direct evaluation of Q = n(n+2) * sum rho_k^2/(n-k)."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    e = x - x.mean()
    denom = e @ e
    q = 0.0
    for k in range(1, lags + 1):
        rho = (e[k:] @ e[:-k]) / denom
        q += rho**2 / (n - k)
    return n * (n + 2) * q


class TestLjungBox:
    def test_white_noise_not_rejected(self):
        x = white_noise(7)
        res = ljung_box(x, lags=10)
        assert res.p_value > 0.05
        assert np.isclose(res.statistic, brute_force_ljung_box(x, 10), rtol=1e-12)

    def test_ar1_strongly_rejected(self):
        rng = np.random.default_rng(8)
        x = np.zeros(500)
        for t in range(1, 500):
            x[t] = 0.8 * x[t - 1] + rng.standard_normal()
        res = ljung_box(x, lags=10)
        assert res.p_value < 1e-3
        assert np.isclose(res.statistic, brute_force_ljung_box(x, 10), rtol=1e-12)

    def test_too_short_rejected(self):
        with pytest.raises(InsufficientDataError):
            ljung_box(np.ones(5) + np.arange(5), lags=10)

    def test_zero_lags_rejected(self):
        with pytest.raises(ValueError):
            ljung_box(white_noise(9), lags=0)

    def test_model_df_shifts_dof(self):
        x = white_noise(10)
        full = ljung_box(x, lags=10)
        adjusted = ljung_box(x, lags=10, model_df=3)
        assert adjusted.statistic == full.statistic
        assert adjusted.p_value != full.p_value


class TestBh:
    def test_hand_executed_example(self):
        family = PValueFamily(
            "demo",
            tuple(zip("abcde", (0.001, 0.01, 0.02, 0.03, 0.5))),
            q=0.05,
        )
        out = bh_fdr(family)
        # thresholds i*q/n = 0.01, 0.02, 0.03, 0.04, 0.05; ranks 1-4 pass
        assert out.rejected == frozenset("abcd")
        assert out.k_star == 4

    def test_all_ones_rejects_none(self):
        out = bh_fdr(PValueFamily("x", tuple((str(i), 1.0) for i in range(5))))
        assert out.rejected == frozenset()

    def test_single_small_p_rejected(self):
        out = bh_fdr(PValueFamily("x", (("only", 0.01),), q=0.05))
        assert out.rejected == frozenset({"only"})

    def test_empty_family_ok(self):
        out = bh_fdr(PValueFamily("x", ()))
        assert out == BhResult(frozenset(), {}, 0)

    @given(st.lists(st.floats(0, 1, allow_nan=False), min_size=1, max_size=60))
    def test_adjusted_monotone_and_rejections_prefix(self, ps):
        family = PValueFamily("f", tuple((str(i), p) for i, p in enumerate(ps)), q=0.05)
        out = bh_fdr(family)
        order = np.argsort(ps, kind="stable")
        adj_sorted = [out.adjusted[str(i)] for i in order]
        assert all(a <= b + 1e-15 for a, b in zip(adj_sorted, adj_sorted[1:]))
        assert all(0.0 <= a <= 1.0 for a in adj_sorted)
        # the rejection set is exactly a prefix of the sorted order
        flags = [str(i) in out.rejected for i in order]
        assert flags == sorted(flags, reverse=True)
        assert sum(flags) == out.k_star

    def test_adjusted_consistent_with_rejection(self):
        ps = [0.004, 0.009, 0.03, 0.041, 0.7, 0.2]
        family = PValueFamily("f", tuple((str(i), p) for i, p in enumerate(ps)), q=0.05)
        out = bh_fdr(family)
        for key, adj in out.adjusted.items():
            assert (adj <= family.q + 1e-15) == (key in out.rejected)

    def test_bh_adjust_matches_known_values(self):
        adj = bh_adjust([0.01, 0.04, 0.03, 0.005])
        # sorted: 0.005, 0.01, 0.03, 0.04 -> n*p/i = 0.02, 0.02, 0.04, 0.04
        assert np.allclose(adj, [0.02, 0.04, 0.04, 0.02])


class TestLjungBoxCalibration:
    def test_null_pvalues_approximately_uniform(self):
        from scipy import stats as sps

        ps = []
        for rep in range(500):
            x = np.random.default_rng(40000 + rep).standard_normal(300)
            ps.append(ljung_box(x, lags=10).p_value)
        assert sps.kstest(ps, "uniform").pvalue > 0.01
