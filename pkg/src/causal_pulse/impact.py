"""Counterfactual event-impact estimation with a structural time-series model.

The observed pre-event series is decomposed into a local linear trend
(stochastic level and slope), a static regression on lagged copies of
the series itself (one year earlier and 23 weeks earlier) plus external
controls, and observation noise. Regression coefficients ride along in
the state vector with zero process noise, so Kalman filtering yields
their joint uncertainty for free. Variances are estimated by maximising
the prediction-error likelihood; the post-event forecast distribution
is then sampled to obtain the cumulative relative effect and its
interval.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, timedelta

import numpy as np
from scipy import optimize

from .errors import FitFailureError, NonAnalysableError, UndefinedEffectError
from .io import EventSpec
from .seeds import derive_seed
from .series import ExogenousBlock, TimeSeries
from .stattests import PValueFamily, bh_fdr

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional accelerator
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap(args[0]) if args and callable(args[0]) else wrap

#: Pre-intervention window length in weeks and forecast horizon in days.
PRE_WEEKS = 11
POST_DAYS = 7

#: Offsets of the lagged-history predictor columns, in days.
YEAR_LAG_DAYS = 365
RECENT_LAG_DAYS = 23 * 7

#: Diffuse prior variance = this factor times the target sample variance.
DIFFUSE_FACTOR = 1e6

_LOG2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class AssembledDesign:
    """Pre-period target plus the 12-week regression design around an event."""

    event: EventSpec
    signal_name: str
    start: date
    target_pre: np.ndarray
    observed_post: np.ndarray
    design_pre: np.ndarray
    design_post: np.ndarray
    labels: tuple[str, ...]

    @property
    def n_pre(self) -> int:
        return len(self.target_pre)

    @property
    def n_post(self) -> int:
        return len(self.observed_post)

    def dates(self) -> list[date]:
        n = self.n_pre + self.n_post
        return [self.start + timedelta(days=k) for k in range(n)]


@dataclass(frozen=True, eq=False)
class StructuralModel:
    """Fitted local-linear-trend plus static-regression state-space model.

    ``theta`` holds the log variances (observation, level, slope); the
    regression coefficients are the tail of ``filtered_state``.
    """

    labels: tuple[str, ...]
    theta: np.ndarray
    loglik: float
    converged: bool
    diffuse_scale: float
    n_obs: int
    burn: int
    filtered_state: np.ndarray
    filtered_cov: np.ndarray
    onestep_mean: np.ndarray
    onestep_var: np.ndarray
    restart_initial_logliks: tuple[float, ...]

    @property
    def variances(self) -> tuple[float, float, float]:
        obs, level, slope = np.exp(self.theta)
        return float(obs), float(level), float(slope)

    @property
    def n_regressors(self) -> int:
        return len(self.filtered_state) - 2

    @property
    def level(self) -> float:
        return float(self.filtered_state[0])

    @property
    def slope(self) -> float:
        return float(self.filtered_state[1])

    @property
    def beta(self) -> np.ndarray:
        return self.filtered_state[2:].copy()


@dataclass(frozen=True, eq=False)
class ImpactResult:
    """Counterfactual verdict for one event on one signal."""

    event: EventSpec
    signal_name: str
    observed: np.ndarray
    forecast: np.ndarray
    forecast_low: np.ndarray
    forecast_high: np.ndarray
    relative_effect: float
    effect_low: float
    effect_high: float
    effect_low_95: float
    effect_high_95: float
    tail_p: float
    significant: bool
    n_draws: int

    @property
    def significant_95(self) -> bool:
        return self.effect_low_95 > 0 or self.effect_high_95 < 0

    @property
    def stars(self) -> str:
        if self.tail_p < 0.001:
            return "***"
        if self.tail_p < 0.01:
            return "**"
        if self.tail_p < 0.05:
            return "*"
        return ""


def _require_window(signal: TimeSeries, first: date, last: date, what: str) -> np.ndarray:
    if not signal.covers(first, last):
        raise NonAnalysableError(
            f"{what} window {first}..{last} outside coverage of {signal.name!r}",
            missing_range=(first, last),
        )
    window = signal.window(first, last)
    if window.has_missing:
        gaps = [str(window.date_at(k)) for k in np.flatnonzero(np.isnan(window.values))]
        raise NonAnalysableError(
            f"{what} window has missing values on: {', '.join(gaps)}",
            missing_range=(first, last),
        )
    return window.values


def assemble_design(
    signal: TimeSeries,
    event: EventSpec,
    exo: ExogenousBlock | None,
    pre_weeks: int = PRE_WEEKS,
    post_days: int = POST_DAYS,
) -> AssembledDesign:
    """Slice the target and build the lagged-history regression design.

    The pre-period is ``pre_weeks`` full weeks ending the day before the
    event; the post-period is the ``post_days`` days from the event on.
    Regression columns are the series one year earlier and 23 weeks
    earlier, spanning the same 12-week window, plus any exogenous
    columns. Coverage gaps yield a non-analysable verdict carrying the
    missing range.
    """
    n_pre = 7 * pre_weeks
    first = event.date - timedelta(days=n_pre)
    last = event.date + timedelta(days=post_days - 1)
    target = _require_window(signal, first, event.date - timedelta(days=1), "pre-period")
    observed = _require_window(signal, event.date, last, "post-period")
    year_col = _require_window(
        signal,
        first - timedelta(days=YEAR_LAG_DAYS),
        last - timedelta(days=YEAR_LAG_DAYS),
        "year-ago",
    )
    recent_col = _require_window(
        signal,
        first - timedelta(days=RECENT_LAG_DAYS),
        last - timedelta(days=RECENT_LAG_DAYS),
        "23-weeks-ago",
    )
    columns = [year_col, recent_col]
    labels = ["lag_1y", "lag_23w"]
    if exo is not None:
        block = exo.window(first, last) if (exo.start, exo.end) != (first, last) else exo
        columns.append(block.matrix)
        labels.extend(block.labels)
    design = np.column_stack(columns)
    return AssembledDesign(
        event=event,
        signal_name=signal.name,
        start=first,
        target_pre=target,
        observed_post=observed,
        design_pre=design[:n_pre],
        design_post=design[n_pre:],
        labels=tuple(labels),
    )


def _transition(r: int) -> np.ndarray:
    T = np.eye(2 + r)
    T[0, 1] = 1.0
    return T


@njit(cache=True, nogil=True)
def _filter_core(y, X, obs_var, level_var, slope_var, diffuse_scale, burn):
    """Kalman filter loop over [level, slope, beta...] states.

    The observation row is [1, 0, x_t]; the transition adds the slope to
    the level and leaves the regression states fixed. Returns the
    log-likelihood from burn-in onwards, the final filtered state and
    covariance, and the one-step-ahead prediction means and variances.
    """
    n = y.shape[0]
    r = X.shape[1]
    dim = 2 + r
    a = np.zeros(dim)
    P = np.eye(dim) * diffuse_scale
    z = np.zeros(dim)
    z[0] = 1.0
    pred_mean = np.empty(n)
    pred_var = np.empty(n)
    loglik = 0.0
    log2pi = 1.8378770664093453
    for t in range(n):
        for j in range(r):
            z[2 + j] = X[t, j]
        pz = P @ z
        f = z @ pz + obs_var
        ya = z @ a
        v = y[t] - ya
        pred_mean[t] = ya
        pred_var[t] = f
        if f <= 0.0 or not np.isfinite(f):
            return -np.inf, a, P, pred_mean, pred_var
        if t >= burn:
            loglik += -0.5 * (log2pi + np.log(f) + v * v / f)
        for i in range(dim):
            a[i] += pz[i] * v / f
        # Optimal-gain update P - pz pz'/f, kept symmetric explicitly.
        for i in range(dim):
            for j in range(i, dim):
                val = P[i, j] - pz[i] * pz[j] / f
                P[i, j] = val
                P[j, i] = val
        if t < n - 1:
            # Transition: level += slope; add the trend process noise.
            a[0] += a[1]
            for j in range(dim):
                P[0, j] += P[1, j]
            for i in range(dim):
                P[i, 0] += P[i, 1]
            P[0, 0] += level_var
            P[1, 1] += slope_var
    return loglik, a, P, pred_mean, pred_var


def _filter(
    y: np.ndarray,
    X: np.ndarray,
    variances: tuple[float, float, float],
    diffuse_scale: float,
    burn: int,
):
    obs_var, level_var, slope_var = variances
    return _filter_core(
        np.ascontiguousarray(y, dtype=np.float64),
        np.ascontiguousarray(X, dtype=np.float64),
        float(obs_var),
        float(level_var),
        float(slope_var),
        float(diffuse_scale),
        int(burn),
    )


# Restart points for the variance search, as fractions of the target's
# sample variance: (observation, level, slope).
_RESTART_FRACTIONS = (
    (0.5, 0.1, 0.01),
    (1.0, 1e-4, 1e-6),
    (0.1, 0.5, 0.05),
    (1e-3, 1e-2, 1e-4),
    (1.0, 1.0, 0.5),
)


def fit_mle(target: np.ndarray, design: np.ndarray, labels: tuple[str, ...] = ()) -> StructuralModel:
    """Maximum-likelihood fit of the structural model on the pre-period.

    Optimises the three log variances with bounded L-BFGS-B from five
    fixed restart points and keeps the best optimum. The level, slope
    and regression coefficients use an approximately diffuse prior with
    variance ``DIFFUSE_FACTOR`` times the target's sample variance, and
    the first ``dim`` prediction errors are excluded from the
    likelihood.
    """
    y = np.asarray(target, dtype=float)
    X = np.asarray(design, dtype=float)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise ValueError("design rows must match the target length")
    if np.isnan(y).any() or np.isnan(X).any():
        raise ValueError("target and design must be gap-free")
    scale = float(np.var(y))
    if scale <= 0.0:
        # Constant target: fall back to a scale tied to its magnitude.
        scale = max(1.0, 1e-4 * float(np.mean(y)) ** 2)
    diffuse_scale = DIFFUSE_FACTOR * scale
    dim = 2 + X.shape[1]
    burn = dim
    if len(y) <= burn + 5:
        raise NonAnalysableError(
            f"pre-period of {len(y)} observations cannot identify {dim} states"
        )
    lo = np.log(1e-7 * scale)
    hi = np.log(1e2 * scale)
    bounds = [(lo, hi)] * 3

    def negloglik(theta):
        ll = _filter(y, X, tuple(np.exp(theta)), diffuse_scale, burn)[0]
        return -ll if np.isfinite(ll) else 1e12

    best_theta = None
    best_ll = -np.inf
    initial_lls = []
    converged = False
    for fractions in _RESTART_FRACTIONS:
        theta0 = np.clip(np.log(np.asarray(fractions) * scale), lo, hi)
        initial_lls.append(-negloglik(theta0))
        res = optimize.minimize(
            negloglik,
            theta0,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": 200},
        )
        if np.isfinite(res.fun) and -res.fun > best_ll:
            best_ll = -res.fun
            best_theta = res.x
            converged = converged or bool(res.success)
    if best_theta is None or not np.isfinite(best_ll) or best_ll <= -1e11:
        raise FitFailureError("no restart produced a finite likelihood")
    ll, a, P, pred_mean, pred_var = _filter(
        y, X, tuple(np.exp(best_theta)), diffuse_scale, burn
    )
    return StructuralModel(
        labels=tuple(labels) or tuple(f"x{i + 1}" for i in range(X.shape[1])),
        theta=np.asarray(best_theta, dtype=float),
        loglik=float(ll),
        converged=converged,
        diffuse_scale=diffuse_scale,
        n_obs=len(y),
        burn=burn,
        filtered_state=a,
        filtered_cov=P,
        onestep_mean=pred_mean,
        onestep_var=pred_var,
        restart_initial_logliks=tuple(initial_lls),
    )


def _safe_cholesky(P: np.ndarray) -> np.ndarray:
    jitter = 0.0
    base = max(np.trace(P) / len(P), 1e-300)
    for _ in range(6):
        try:
            return np.linalg.cholesky(P + jitter * np.eye(len(P)))
        except np.linalg.LinAlgError:
            jitter = base * 1e-10 if jitter == 0.0 else jitter * 100
    raise FitFailureError("filtered covariance is not positive semidefinite")


def sample_forecast_paths(
    model: StructuralModel, design_post: np.ndarray, n_draws: int, rng: np.random.Generator
) -> np.ndarray:
    """Joint sample paths of the post-period forecast distribution.

    Each path draws the final filtered state, propagates it through the
    transition with level/slope process noise, and adds observation
    noise, giving an (n_draws, horizon) matrix.
    """
    obs_var, level_var, slope_var = model.variances
    X = np.asarray(design_post, dtype=float)
    horizon = X.shape[0]
    dim = len(model.filtered_state)
    T = _transition(dim - 2)
    L = _safe_cholesky(model.filtered_cov)
    states = model.filtered_state + rng.standard_normal((n_draws, dim)) @ L.T
    paths = np.empty((n_draws, horizon))
    for t in range(horizon):
        states = states @ T.T
        states[:, 0] += np.sqrt(level_var) * rng.standard_normal(n_draws)
        states[:, 1] += np.sqrt(slope_var) * rng.standard_normal(n_draws)
        z = np.concatenate(([1.0, 0.0], X[t]))
        paths[:, t] = states @ z + np.sqrt(obs_var) * rng.standard_normal(n_draws)
    return paths


def forecast_mean(model: StructuralModel, design_post: np.ndarray) -> np.ndarray:
    """Deterministic forecast path (expected counterfactual)."""
    X = np.asarray(design_post, dtype=float)
    dim = len(model.filtered_state)
    T = _transition(dim - 2)
    a = model.filtered_state.copy()
    out = np.empty(X.shape[0])
    for t in range(X.shape[0]):
        a = T @ a
        out[t] = a[0] + X[t] @ a[2:]
    return out


def forecast_and_effect(
    model: StructuralModel,
    observed_post: np.ndarray,
    design_post: np.ndarray,
    event: EventSpec,
    signal_name: str,
    n_draws: int = 10000,
    seed: int = 0,
) -> ImpactResult:
    """Cumulative relative effect of the event over the post window.

    The effect is sum(observed - forecast) / sum(observed), evaluated on
    each sampled forecast path; the verdict is significant when the 99%
    empirical interval of that distribution excludes zero.
    """
    observed = np.asarray(observed_post, dtype=float)
    total = float(observed.sum())
    if total == 0.0:
        raise UndefinedEffectError(
            f"total observed activity is zero for {signal_name!r} after {event.name!r}"
        )
    rng = np.random.default_rng(seed)
    paths = sample_forecast_paths(model, design_post, n_draws, rng)
    effects = (total - paths.sum(axis=1)) / total
    lo99, hi99 = np.percentile(effects, [0.5, 99.5])
    lo95, hi95 = np.percentile(effects, [2.5, 97.5])
    p_le = float(np.mean(effects <= 0.0))
    p_ge = float(np.mean(effects >= 0.0))
    tail_p = min(1.0, 2.0 * min(p_le, p_ge))
    point_lo, point_hi = np.percentile(paths, [0.5, 99.5], axis=0)
    return ImpactResult(
        event=event,
        signal_name=signal_name,
        observed=observed,
        forecast=paths.mean(axis=0),
        forecast_low=point_lo,
        forecast_high=point_hi,
        relative_effect=float(effects.mean()),
        effect_low=float(lo99),
        effect_high=float(hi99),
        effect_low_95=float(lo95),
        effect_high_95=float(hi95),
        tail_p=tail_p,
        significant=bool(lo99 > 0.0 or hi99 < 0.0),
        n_draws=n_draws,
    )


def analyse_event(
    signal: TimeSeries,
    event: EventSpec,
    exo: ExogenousBlock | None,
    pre_weeks: int = PRE_WEEKS,
    post_days: int = POST_DAYS,
    n_draws: int = 10000,
    seed: int = 0,
) -> tuple[ImpactResult, StructuralModel, AssembledDesign]:
    """Assemble, fit and forecast for one event on one signal."""
    design = assemble_design(signal, event, exo, pre_weeks=pre_weeks, post_days=post_days)
    model = fit_mle(design.target_pre, design.design_pre, design.labels)
    result = forecast_and_effect(
        model,
        design.observed_post,
        design.design_post,
        event,
        design.signal_name,
        n_draws=n_draws,
        seed=seed,
    )
    return result, model, design


@dataclass(frozen=True)
class PlaceboRow:
    event: EventSpec
    pseudo_date: date
    tail_p: float
    adjusted_p: float
    significant_95: bool
    significant_99: bool
    raw_significant_95: bool
    raw_significant_99: bool


@dataclass(frozen=True, eq=False)
class PlaceboTable:
    """False-positive-rate summary over shifted pseudo-events."""

    signal_name: str
    shift_days: int
    n_events: int
    n_analysable: int
    dropped: tuple[tuple[str, str], ...]
    rows: tuple[PlaceboRow, ...]

    @property
    def fpr_95(self) -> float:
        return self._rate(lambda r: r.significant_95)

    @property
    def fpr_99(self) -> float:
        return self._rate(lambda r: r.significant_99)

    @property
    def raw_fpr_95(self) -> float:
        return self._rate(lambda r: r.raw_significant_95)

    @property
    def raw_fpr_99(self) -> float:
        return self._rate(lambda r: r.raw_significant_99)

    def _rate(self, pred) -> float:
        if not self.rows:
            return float("nan")
        return sum(1 for r in self.rows if pred(r)) / len(self.rows)


def placebo_run(
    events: list[EventSpec],
    signal: TimeSeries,
    exo: ExogenousBlock | None,
    shift_days: int = -21,
    pre_weeks: int = PRE_WEEKS,
    post_days: int = POST_DAYS,
    n_draws: int = 10000,
    seed: int = 0,
    q: float = 0.05,
) -> PlaceboTable:
    """Re-run the impact analysis on pseudo-events shifted off the real dates.

    Pseudo-events without the required lag history are dropped with a
    reason. Tail probabilities are corrected within this signal's family
    (Benjamini-Hochberg); significance at 95%/99% uses the adjusted
    probability against 0.05/0.01, with the raw interval verdicts also
    reported.
    """
    if shift_days == 0:
        raise ValueError("placebo must not coincide with real events (shift of 0 days)")
    analysed: list[tuple[EventSpec, date, ImpactResult]] = []
    dropped: list[tuple[str, str]] = []
    for event in events:
        pseudo = EventSpec(name=event.name, date=event.date + timedelta(days=shift_days))
        try:
            result, _, _ = analyse_event(
                signal,
                pseudo,
                exo,
                pre_weeks=pre_weeks,
                post_days=post_days,
                n_draws=n_draws,
                seed=derive_seed(seed, "placebo", event.name),
            )
        except (NonAnalysableError, FitFailureError, UndefinedEffectError) as exc:
            dropped.append((event.name, str(exc)))
            continue
        analysed.append((event, pseudo.date, result))

    family = PValueFamily(
        label=f"placebo:{signal.name}",
        entries=tuple((e.name, r.tail_p) for e, _, r in analysed),
        q=q,
    )
    adjusted = bh_fdr(family).adjusted if analysed else {}
    rows = tuple(
        PlaceboRow(
            event=e,
            pseudo_date=d,
            tail_p=r.tail_p,
            adjusted_p=adjusted[e.name],
            significant_95=adjusted[e.name] < 0.05,
            significant_99=adjusted[e.name] < 0.01,
            raw_significant_95=r.significant_95,
            raw_significant_99=r.significant,
        )
        for e, d, r in analysed
    )
    return PlaceboTable(
        signal_name=signal.name,
        shift_days=shift_days,
        n_events=len(events),
        n_analysable=len(analysed),
        dropped=tuple(dropped),
        rows=rows,
    )
