"""Univariate pretests, residual diagnostics and FDR control.

ADF and KPSS are implemented from their defining regressions: ADF with a
constant term and AIC-selected lag length, KPSS in its level-stationarity
form with a Bartlett-kernel long-run variance. Both follow the standard
textbook conventions so the statistics agree with reference
implementations to machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import stats as sps

from .errors import DegenerateSeriesError, InsufficientDataError
from .series import TimeSeries

#: Minimum series length accepted by the unit-root tests.
MIN_TEST_LENGTH = 20

# MacKinnon (1994) regression-surface coefficients for the ADF p-value,
# constant-only case, single variable. p = Phi(c0 + c1*tau + c2*tau^2 ...),
# with the small-p polynomial used below tau*=-1.61.
_ADF_TAU_STAR = -1.61
_ADF_TAU_MIN = -18.83
_ADF_TAU_MAX = 2.74
_ADF_SMALL_P = (2.1659, 1.4412, 0.038269)
_ADF_LARGE_P = (1.7339, 0.93202, -0.12745, -0.010368)

# KPSS critical values for the level-stationarity variant
# (Kwiatkowski et al. 1992, Table 1), and the p-values they anchor.
_KPSS_CRIT = np.array([0.347, 0.463, 0.574, 0.739])
_KPSS_P = np.array([0.10, 0.05, 0.025, 0.01])


@dataclass(frozen=True)
class TestResult:
    """Outcome of one hypothesis test."""

    statistic: float
    p_value: float
    lags_used: int
    decision_at_5pct: bool
    p_clamped: bool = False

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value {self.p_value} outside [0, 1]")


@dataclass(frozen=True)
class PValueFamily:
    """A family of raw p-values corrected together."""

    label: str
    entries: tuple[tuple[str, float], ...]
    q: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple((str(k), float(p)) for k, p in self.entries))
        if not 0.0 < self.q < 1.0:
            raise ValueError(f"FDR level q={self.q} outside (0, 1)")
        for key, p in self.entries:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"raw p-value {p} for {key!r} outside [0, 1]")

    @property
    def size(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class BhResult:
    """Benjamini-Hochberg outcome: rejections plus step-up adjusted p-values."""

    rejected: frozenset[str]
    adjusted: dict[str, float]
    k_star: int


def _as_values(series) -> np.ndarray:
    if isinstance(series, TimeSeries):
        return series.values
    return np.asarray(series, dtype=float)


def _check_testable(x: np.ndarray, what: str) -> None:
    if np.isnan(x).any():
        raise ValueError(f"{what} requires a gap-free series")
    if len(x) < MIN_TEST_LENGTH:
        raise InsufficientDataError(
            f"{what} needs at least {MIN_TEST_LENGTH} observations, got {len(x)}"
        )
    if np.ptp(x) == 0.0:
        raise DegenerateSeriesError(f"degenerate series: no variation for {what}")


def _ols(y: np.ndarray, X: np.ndarray) -> tuple[np.ndarray, float]:
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    return beta, float(resid @ resid)


def adf_maxlag(n: int) -> int:
    """Schwert-style lag bound floor(12 * (n/100)^0.25)."""
    return int(np.floor(12.0 * (n / 100.0) ** 0.25))


def kpss_bandwidth(n: int) -> int:
    """Bartlett bandwidth floor(4 * (n/100)^0.25)."""
    return int(np.floor(4.0 * (n / 100.0) ** 0.25))


def mackinnon_pvalue(stat: float) -> float:
    """ADF p-value from the MacKinnon response surface (constant case)."""
    if stat > _ADF_TAU_MAX:
        return 1.0
    if stat < _ADF_TAU_MIN:
        return 0.0
    coeffs = _ADF_SMALL_P if stat <= _ADF_TAU_STAR else _ADF_LARGE_P
    poly = sum(c * stat**i for i, c in enumerate(coeffs))
    return float(sps.norm.cdf(poly))


def adf_test(series: TimeSeries | Sequence[float]) -> TestResult:
    """Augmented Dickey-Fuller test with a constant term.

    The number of lagged differences is chosen by AIC over a common
    sample, up to :func:`adf_maxlag`; the reported statistic is the
    t-ratio on the lagged level in the final regression on the longest
    sample that lag order allows.
    """
    x = _as_values(series)
    _check_testable(x, "ADF test")
    n = len(x)
    maxlag = min(adf_maxlag(n), n // 2 - 2)
    d = np.diff(x)

    # Lag search holds the estimation sample fixed at the maxlag trim.
    nobs = len(d) - maxlag
    if nobs < 10:
        raise InsufficientDataError("series too short for the ADF lag search")
    level = x[-nobs - 1 : -1]
    target = d[-nobs:]
    dlags = (
        np.column_stack([d[maxlag - j - 1 : maxlag - j - 1 + nobs] for j in range(maxlag)])
        if maxlag
        else np.empty((nobs, 0))
    )
    best_aic, best_k = np.inf, 0
    base = [np.ones(nobs), level]
    for k in range(maxlag + 1):
        X = np.column_stack(base + ([dlags[:, :k]] if k else []))
        _, ssr = _ols(target, X)
        aic = nobs * np.log(ssr / nobs) + 2 * X.shape[1]
        if aic < best_aic:
            best_aic, best_k = aic, k
    usedlag = best_k

    # Final regression on the longest sample the chosen lag allows.
    nobs = len(d) - usedlag
    level = x[-nobs - 1 : -1]
    target = d[-nobs:]
    cols = [np.ones(nobs), level]
    for j in range(usedlag):
        cols.append(d[usedlag - j - 1 : usedlag - j - 1 + nobs])
    X = np.column_stack(cols)
    beta, ssr = _ols(target, X)
    q = X.shape[1]
    sigma2 = ssr / (nobs - q)
    xtx_inv = np.linalg.inv(X.T @ X)
    t_stat = float(beta[1] / np.sqrt(sigma2 * xtx_inv[1, 1]))
    p = mackinnon_pvalue(t_stat)
    return TestResult(statistic=t_stat, p_value=p, lags_used=usedlag, decision_at_5pct=p < 0.05)


def kpss_test(series: TimeSeries | Sequence[float]) -> TestResult:
    """KPSS level-stationarity test with Bartlett long-run variance.

    The p-value is interpolated from the standard critical-value table
    and clamped to [0.01, 0.10] at the table edges, with ``p_clamped``
    flagging when clamping occurred.
    """
    x = _as_values(series)
    _check_testable(x, "KPSS test")
    n = len(x)
    lags = kpss_bandwidth(n)
    e = x - x.mean()
    s = np.cumsum(e)
    eta = float(s @ s) / n**2
    lrv = float(e @ e)
    for j in range(1, lags + 1):
        w = 1.0 - j / (lags + 1.0)
        lrv += 2.0 * w * float(e[j:] @ e[:-j])
    lrv /= n
    if lrv <= 0:
        raise DegenerateSeriesError("degenerate series: non-positive long-run variance")
    stat = eta / lrv
    clamped = stat < _KPSS_CRIT[0] or stat > _KPSS_CRIT[-1]
    p = float(np.interp(stat, _KPSS_CRIT, _KPSS_P))
    return TestResult(
        statistic=float(stat),
        p_value=p,
        lags_used=lags,
        decision_at_5pct=p < 0.05,
        p_clamped=clamped,
    )


def retain_pair(stimulus: TimeSeries, response: TimeSeries) -> bool:
    """Pretest gate: both series must look stationary to both tests.

    True iff ADF rejects the unit root at 5% and KPSS does not reject
    stationarity at 5%, for the stimulus and the response alike.
    """
    for series in (stimulus, response):
        if not adf_test(series).decision_at_5pct:
            return False
        if kpss_test(series).decision_at_5pct:
            return False
    return True


def ljung_box(residuals: Sequence[float], lags: int, model_df: int = 0) -> TestResult:
    """Ljung-Box portmanteau test on a residual series.

    ``model_df`` is the number of fitted lags of the producing model; the
    chi-square reference then has ``lags - model_df`` degrees of freedom.
    """
    if lags < 1:
        raise ValueError("lags must be a positive integer")
    x = _as_values(residuals)
    n = len(x)
    if n <= lags + 1:
        raise InsufficientDataError(f"need more than lags+1={lags + 1} residuals, got {n}")
    if model_df < 0 or model_df >= lags:
        raise ValueError("model_df must satisfy 0 <= model_df < lags")
    e = x - x.mean()
    denom = float(e @ e)
    if denom == 0.0:
        raise DegenerateSeriesError("degenerate residuals: zero variance")
    q = 0.0
    for k in range(1, lags + 1):
        rho = float(e[k:] @ e[:-k]) / denom
        q += rho * rho / (n - k)
    q *= n * (n + 2)
    dof = lags - model_df
    p = float(sps.chi2.sf(q, dof))
    return TestResult(statistic=float(q), p_value=p, lags_used=lags, decision_at_5pct=p < 0.05)


def default_lb_lags(n: int, model_df: int = 0) -> int:
    """Default portmanteau horizon: min(10, n//5) lags beyond the model order."""
    return model_df + min(10, n // 5)


def bh_adjust(p_values: Sequence[float]) -> np.ndarray:
    """Step-up BH-adjusted p-values, monotone in the raw-p ranking."""
    p = np.asarray(p_values, dtype=float)
    n = len(p)
    if n == 0:
        return np.empty(0)
    order = np.argsort(p, kind="stable")
    ranked = p[order] * n / np.arange(1, n + 1)
    ranked = np.minimum.accumulate(ranked[::-1])[::-1]
    ranked = np.minimum(ranked, 1.0)
    out = np.empty(n)
    out[order] = ranked
    return out


def bh_fdr(family: PValueFamily) -> BhResult:
    """Benjamini-Hochberg step-up rejection over one family.

    Rejects the k* smallest p-values where k* is the largest rank i with
    p_(i) <= i*q/n; also returns the monotone adjusted p-values.
    """
    if family.size == 0:
        return BhResult(rejected=frozenset(), adjusted={}, k_star=0)
    keys = [k for k, _ in family.entries]
    p = np.array([v for _, v in family.entries])
    n = len(p)
    order = np.argsort(p, kind="stable")
    thresholds = np.arange(1, n + 1) * family.q / n
    passing = np.flatnonzero(p[order] <= thresholds)
    k_star = int(passing[-1] + 1) if len(passing) else 0
    rejected = frozenset(keys[i] for i in order[:k_star])
    adjusted = dict(zip(keys, bh_adjust(p).tolist()))
    return BhResult(rejected=rejected, adjusted=adjusted, k_star=k_star)
