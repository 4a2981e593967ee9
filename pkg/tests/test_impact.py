"""Counterfactual event analysis: design assembly, MLE fit, effects.

Oracles: index arithmetic on ramp series for the design columns, OLS on
the known design for coefficient recovery, and the closed form of the
cumulative relative effect for a flat counterfactual.
"""

from datetime import date, timedelta

import numpy as np
import pytest

from causal_pulse.errors import NonAnalysableError, UndefinedEffectError
from causal_pulse.impact import (
    RECENT_LAG_DAYS,
    YEAR_LAG_DAYS,
    analyse_event,
    assemble_design,
    fit_mle,
    forecast_and_effect,
    forecast_mean,
    placebo_run,
    sample_forecast_paths,
)
from causal_pulse.io import EventSpec
from causal_pulse.series import build_exogenous

from conftest import MONDAY, daily

START = date(2018, 1, 1)


def ramp_signal(n=1200, name="sig"):
    return daily(np.arange(n, dtype=float) + 10.0, start=START, name=name)


def llt_signal(rng, n=1200, level_sd=0.4, obs_sd=2.0, base=100.0):
    level = base + np.cumsum(rng.standard_normal(n) * level_sd)
    return level + rng.standard_normal(n) * obs_sd


class TestAssembleDesign:
    def test_window_shapes(self):
        event = EventSpec("e", START + timedelta(days=500))
        design = assemble_design(ramp_signal(), event, None)
        assert design.target_pre.shape == (77,)
        assert design.observed_post.shape == (7,)
        assert design.design_pre.shape == (77, 2)
        assert design.design_post.shape == (7, 2)

    def test_lagged_columns_are_shifted_signal(self):
        signal = ramp_signal()
        event = EventSpec("e", START + timedelta(days=600))
        design = assemble_design(signal, event, None)
        dates = design.dates()
        for k, day in enumerate(dates):
            base = signal.values[signal.index_of(day)]
            row = design.design_pre[k] if k < 77 else design.design_post[k - 77]
            assert row[0] == base - YEAR_LAG_DAYS  # ramp: value shifts by lag days
            assert row[1] == base - RECENT_LAG_DAYS

    def test_event_too_early_non_analysable(self):
        event = EventSpec("e", START + timedelta(days=77))  # only 11 weeks of history
        with pytest.raises(NonAnalysableError, match="year-ago"):
            assemble_design(ramp_signal(), event, None)

    def test_missing_values_non_analysable(self):
        values = np.arange(1200, dtype=float)
        values[590] = np.nan
        event = EventSpec("e", START + timedelta(days=600))
        with pytest.raises(NonAnalysableError, match="missing"):
            assemble_design(daily(values, start=START), event, None)

    def test_exogenous_columns_appended(self):
        vol = daily(np.full(1200, 50.0), start=START, name="news_volume")
        signal = ramp_signal()
        exo = build_exogenous((signal.start, signal.end), vol)
        event = EventSpec("e", START + timedelta(days=600))
        design = assemble_design(signal, event, exo)
        assert design.design_pre.shape == (77, 9)
        assert design.labels[:2] == ("lag_1y", "lag_23w")


class TestFitMle:
    def test_constant_target_degenerate_fit(self):
        model = fit_mle(np.full(77, 100.0), np.empty((77, 0)))
        assert abs(model.level - 100.0) < 1e-6
        assert abs(model.slope) < 1e-6
        obs_var = model.variances[0]
        assert obs_var <= 1e-6  # driven to the lower bound

    def test_beta_recovery_vs_ols_oracle(self):
        rng = np.random.default_rng(1)
        year_ago = 50 + 5 * np.sin(np.arange(77) / 5.0) + rng.standard_normal(77)
        target = 2.0 * year_ago + rng.standard_normal(77)
        X = year_ago[:, None]
        model = fit_mle(target, X)
        beta_hat = model.beta[0]
        # oracle: least squares on the known design (with intercept)
        Z = np.column_stack([np.ones(77), year_ago])
        ols = np.linalg.lstsq(Z, target, rcond=None)[0][1]
        assert abs(beta_hat - 2.0) < 0.15
        assert abs(ols - 2.0) < 0.15

    def test_optimum_at_least_every_restart_start(self):
        rng = np.random.default_rng(2)
        target = llt_signal(rng, 77)
        model = fit_mle(target, np.empty((77, 0)))
        assert all(model.loglik >= ll - 1e-6 for ll in model.restart_initial_logliks)

    def test_gapped_target_rejected(self):
        target = np.full(77, 1.0)
        target[10] = np.nan
        with pytest.raises(ValueError, match="gap-free"):
            fit_mle(target, np.empty((77, 0)))


class TestForecastAndEffect:
    def _flat_model(self):
        return fit_mle(np.full(77, 100.0), np.empty((77, 0)))

    def test_observed_equal_forecast_mean_gives_zero(self):
        model = self._flat_model()
        event = EventSpec("e", date(2020, 6, 1))
        base = forecast_and_effect(model, np.full(7, 100.0), np.empty((7, 0)), event, "s",
                                   n_draws=5000, seed=9)
        res = forecast_and_effect(model, base.forecast, np.empty((7, 0)), event, "s",
                                  n_draws=5000, seed=9)
        assert abs(res.relative_effect) < 1e-6
        assert not res.significant

    def test_thirty_over_onethirty_closed_form(self):
        model = self._flat_model()
        event = EventSpec("e", date(2020, 6, 1))
        res = forecast_and_effect(model, np.full(7, 130.0), np.empty((7, 0)), event, "s",
                                  n_draws=10000, seed=10)
        assert abs(res.relative_effect - 30.0 / 130.0) < 1e-3
        assert res.significant and res.tail_p < 0.001 and res.stars == "***"

    def test_zero_observed_total_undefined(self):
        model = self._flat_model()
        event = EventSpec("e", date(2020, 6, 1))
        with pytest.raises(UndefinedEffectError):
            forecast_and_effect(model, np.zeros(7), np.empty((7, 0)), event, "s", seed=1)

    def test_scale_invariance_given_fitted_model(self):
        rng = np.random.default_rng(3)
        target = llt_signal(rng, 77)
        model = fit_mle(target, np.empty((77, 0)))
        event = EventSpec("e", date(2020, 6, 1))
        observed = target[-7:] * 1.2
        a = forecast_and_effect(model, observed, np.empty((7, 0)), event, "s",
                                n_draws=4000, seed=4)
        # doubling observed values and the sampled counterfactual jointly
        paths = sample_forecast_paths(model, np.empty((7, 0)), 4000, np.random.default_rng(4))
        doubled = (2 * observed.sum() - 2 * paths.sum(axis=1)) / (2 * observed.sum())
        original = (observed.sum() - paths.sum(axis=1)) / observed.sum()
        assert np.allclose(doubled, original)
        assert abs(a.relative_effect - original.mean()) < 5e-3

    def test_scale_invariance_full_refit(self):
        rng = np.random.default_rng(5)
        target = llt_signal(rng, 77)
        observed = np.abs(target[-7:]) + 50.0
        event = EventSpec("e", date(2020, 6, 1))
        m1 = fit_mle(target, np.empty((77, 0)))
        m2 = fit_mle(2.0 * target, np.empty((77, 0)))
        r1 = forecast_and_effect(m1, observed, np.empty((7, 0)), event, "s", n_draws=8000, seed=6)
        r2 = forecast_and_effect(m2, 2.0 * observed, np.empty((7, 0)), event, "s",
                                 n_draws=8000, seed=6)
        assert abs(r1.relative_effect - r2.relative_effect) < 1e-3

    def test_monotonicity_in_observed(self):
        model = self._flat_model()
        event = EventSpec("e", date(2020, 6, 1))
        effects = []
        for bump in (0.0, 5.0, 10.0, 20.0):
            res = forecast_and_effect(model, np.full(7, 105.0 + bump), np.empty((7, 0)),
                                      event, "s", n_draws=4000, seed=7)
            effects.append(res.relative_effect)
        assert all(a < b for a, b in zip(effects, effects[1:]))

    def test_forecast_mean_matches_sample_mean(self):
        rng = np.random.default_rng(8)
        target = llt_signal(rng, 77)
        model = fit_mle(target, np.empty((77, 0)))
        event = EventSpec("e", date(2020, 6, 1))
        res = forecast_and_effect(model, target[-7:] + 1, np.empty((7, 0)), event, "s",
                                  n_draws=20000, seed=11)
        analytic = forecast_mean(model, np.empty((7, 0)))
        spread = np.sqrt(np.maximum(model.onestep_var[-1], 1e-12))
        assert np.all(np.abs(res.forecast - analytic) < 0.1 * spread + 0.5)


class TestCalibration:
    def test_standardized_onestep_residuals(self):
        rng = np.random.default_rng(12)
        target = llt_signal(rng, 400)
        model = fit_mle(target, np.empty((400, 0)))
        resid = (target - model.onestep_mean)[model.burn :]
        std = resid / np.sqrt(model.onestep_var[model.burn :])
        assert abs(std.mean()) < 0.2
        assert 0.6 <= std.var() <= 1.5

    def test_pointwise_interval_coverage_on_null_events(self):
        rng = np.random.default_rng(13)
        covered = total = 0
        for _ in range(200):
            series = llt_signal(rng, 84)
            model = fit_mle(series[:77], np.empty((77, 0)))
            event = EventSpec("e", date(2020, 6, 1))
            res = forecast_and_effect(model, series[77:], np.empty((7, 0)), event, "s",
                                      n_draws=2000, seed=int(rng.integers(1 << 31)))
            covered += int(np.sum((series[77:] >= res.forecast_low)
                                  & (series[77:] <= res.forecast_high)))
            total += 7
        assert covered / total >= 0.95


class TestAnalyseEvent:
    def test_end_to_end_lift_detected(self):
        rng = np.random.default_rng(14)
        n = 1200
        t = np.arange(n)
        base = 100 + 10 * np.sin(2 * np.pi * (t % 7) / 7.0) + rng.standard_normal(n) * 2.0
        event_idx = 900
        lifted = base.copy()
        lifted[event_idx : event_idx + 7] *= 1.3
        signal = daily(lifted, start=START, name="posters")
        event = EventSpec("lift", START + timedelta(days=event_idx))
        res, model, design = analyse_event(signal, event, None, n_draws=6000, seed=15)
        assert res.significant
        assert abs(res.relative_effect - 0.3 / 1.3) < 0.10


class TestPlacebo:
    def _noise_signal(self, seed, n=1500):
        rng = np.random.default_rng(seed)
        return daily(llt_signal(rng, n, level_sd=0.2), start=START, name="metric")

    def test_zero_shift_refused(self):
        with pytest.raises(ValueError, match="must not coincide"):
            placebo_run([], self._noise_signal(1), None, shift_days=0)

    def test_empty_analysable_set(self):
        events = [EventSpec("too-early", START + timedelta(days=30))]
        table = placebo_run(events, self._noise_signal(2), None, shift_days=-21, seed=3)
        assert table.n_analysable == 0
        assert len(table.dropped) == 1
        assert np.isnan(table.fpr_99)

    def test_null_fpr_within_binomial_bounds(self):
        signal = self._noise_signal(4)
        events = [
            EventSpec(f"pseudo-{k}", START + timedelta(days=500 + 31 * k)) for k in range(30)
        ]
        table = placebo_run(events, signal, None, shift_days=-21, n_draws=3000, seed=5)
        assert table.n_analysable == 30
        assert table.raw_fpr_99 <= 0.10
        assert table.fpr_99 <= table.raw_fpr_99 + 1e-12  # BH only tightens

    def test_drops_are_counted(self):
        signal = self._noise_signal(6)
        events = [
            EventSpec("ok", START + timedelta(days=600)),
            EventSpec("early", START + timedelta(days=450)),  # shifted under the lag floor
        ]
        table = placebo_run(events, signal, None, shift_days=-21, n_draws=2000, seed=7)
        assert table.n_events == 2
        assert table.n_analysable + len(table.dropped) == 2
