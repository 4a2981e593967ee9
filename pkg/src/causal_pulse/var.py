"""Bivariate VAR-X estimation, lag selection and Granger causality.

The model is y_t = nu + A_1 y_{t-1} + ... + A_p y_{t-p} + B x_t + u_t
with two endogenous series and optional contemporaneous exogenous
columns. Estimation is per-equation OLS on a shared regressor matrix;
Granger tests compare the response equation with and without the
stimulus lags via the classical F statistic.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats as sps

from .errors import CollinearityError, InsufficientDataError
from .series import ExogenousBlock, TimeSeries
from .stattests import adf_test, default_lb_lags, kpss_test, ljung_box

K_ENDO = 2

#: Effective observations required beyond the parameter count before a
#: Granger test is attempted.
MIN_TEST_MARGIN = 30


@dataclass(frozen=True, eq=False)
class VarModel:
    """A fitted VAR-X(p) system for two endogenous series.

    ``params`` holds one column per equation over the shared regressor
    layout ``[const, L1.first, L1.second, ..., Lp.first, Lp.second,
    exogenous...]``; ``sigma`` is the maximum-likelihood residual
    covariance (divisor ``n_obs``).
    """

    names: tuple[str, str]
    p: int
    column_labels: tuple[str, ...]
    params: np.ndarray
    se: np.ndarray
    residuals: np.ndarray
    sigma: np.ndarray
    n_obs: int
    loglik: float
    n_exo: int
    design: np.ndarray
    targets: np.ndarray

    @property
    def nu(self) -> np.ndarray:
        """Intercept vector (one entry per equation)."""
        return self.params[0].copy()

    def lag_matrix(self, lag: int) -> np.ndarray:
        """A_lag with entry [i, j] = effect of series j at that lag on series i."""
        if not 1 <= lag <= self.p:
            raise ValueError(f"lag must be in 1..{self.p}")
        block = self.params[1 + K_ENDO * (lag - 1) : 1 + K_ENDO * lag]
        return block.T.copy()

    @property
    def exo_matrix(self) -> np.ndarray:
        """B with one row per equation and one column per exogenous regressor."""
        return self.params[1 + K_ENDO * self.p :].T.copy()

    @property
    def n_params_per_eq(self) -> int:
        return self.params.shape[0]


@dataclass(frozen=True)
class LagCoefficient:
    """One cross-lag coefficient of the response equation."""

    lag: int
    coefficient: float
    se: float
    t_value: float
    sign: str
    significant: bool


@dataclass(frozen=True)
class DiagnosticFlags:
    ljung_box_stimulus_pass: bool
    ljung_box_response_pass: bool
    resid_adf_pass: bool
    resid_kpss_pass: bool

    @property
    def daggers(self) -> str:
        """Table notation: one dagger per residual series failing Ljung-Box."""
        fails = (not self.ljung_box_stimulus_pass) + (not self.ljung_box_response_pass)
        return "†" * fails


@dataclass(frozen=True)
class GrangerResult:
    """One directed stimulus -> response Granger test."""

    stimulus: str
    response: str
    f_statistic: float
    p_value: float
    lag_order: int
    per_lag: tuple[LagCoefficient, ...]
    n_obs: int
    df_denom: int
    rss_restricted: float
    rss_unrestricted: float
    diagnostics: DiagnosticFlags | None = None


@dataclass(frozen=True)
class LagSelection:
    """Information-criterion lag choice over candidates 1..p_max."""

    p_max: int
    aic_lag: int
    bic_lag: int
    hqic_lag: int
    chosen: int
    rule: str
    criteria: dict[int, tuple[float, float, float]]
    n_obs: int


def _coerce_endo(endo) -> tuple[np.ndarray, tuple[str, str]]:
    if isinstance(endo, np.ndarray):
        y = np.asarray(endo, dtype=float)
        if y.ndim != 2 or y.shape[1] != K_ENDO:
            raise ValueError("endogenous array must have shape (T, 2)")
        return y, ("y1", "y2")
    first, second = endo
    if first.frequency is not second.frequency or first.start != second.start:
        raise ValueError("endogenous series must share frequency and start date")
    if len(first) != len(second):
        raise ValueError("endogenous series must have equal length")
    y = np.column_stack([first.values, second.values])
    return y, (first.name, second.name)


def _coerce_exo(exo, n_rows: int) -> tuple[np.ndarray, tuple[str, ...]]:
    if exo is None:
        return np.empty((n_rows, 0)), ()
    if isinstance(exo, ExogenousBlock):
        mat, labels = exo.matrix, exo.labels
    else:
        mat = np.asarray(exo, dtype=float)
        labels = tuple(f"x{i + 1}" for i in range(mat.shape[1]))
    if mat.shape[0] != n_rows:
        raise ValueError(f"exogenous block has {mat.shape[0]} rows, series has {n_rows}")
    return mat, labels


def _check_rank(design: np.ndarray, labels: Sequence[str]) -> None:
    # Pivoted QR flags which columns are linearly dependent.
    from scipy.linalg import qr

    _, r, piv = qr(design, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag[0] == 0.0:
        raise CollinearityError("regressor matrix is identically zero")
    bad = diag < diag[0] * max(design.shape) * np.finfo(float).eps * 100
    if bad.any():
        offending = tuple(labels[piv[i]] for i in np.flatnonzero(bad))
        raise CollinearityError("rank-deficient regressor matrix", columns=offending)


def fit_varx(endo, exo=None, p: int = 1, sample_start: int | None = None) -> VarModel:
    """Least-squares fit of a VAR-X(p) on two gap-free series.

    ``exo`` is aligned to the full series index; estimation uses its rows
    for the target times (from ``sample_start``, default ``p``).
    Exogenous columns that are identically zero on the sample carry no
    information and are reported with zero coefficients, so a fit with an
    all-zero block reproduces the exogenous-free fit exactly.
    """
    if p < 1:
        raise ValueError("lag order p must be >= 1")
    y, names = _coerce_endo(endo)
    if np.isnan(y).any():
        raise ValueError("endogenous series must be gap-free")
    T = y.shape[0]
    exo_mat, exo_labels = _coerce_exo(exo, T)
    m = exo_mat.shape[1]
    start = p if sample_start is None else sample_start
    if start < p:
        raise ValueError(f"sample_start {start} cannot precede lag order {p}")
    n_obs = T - start
    if n_obs <= K_ENDO * p + m + 5:
        raise InsufficientDataError(
            f"need more than {K_ENDO * p + m + 5} effective observations for p={p}, m={m}; "
            f"have {n_obs}"
        )

    rows = np.arange(start, T)
    lag_cols = []
    labels = ["const"]
    for lag in range(1, p + 1):
        lag_cols.append(y[rows - lag])
        labels.extend([f"L{lag}.{names[0]}", f"L{lag}.{names[1]}"])
    exo_rows = exo_mat[rows]
    zero_exo = np.flatnonzero(~exo_rows.any(axis=0)) if m else np.array([], dtype=int)
    keep_exo = np.setdiff1d(np.arange(m), zero_exo)
    labels.extend(exo_labels[i] for i in keep_exo)

    design = np.column_stack([np.ones(n_obs)] + lag_cols + ([exo_rows[:, keep_exo]] if m else []))
    _check_rank(design, labels)
    targets = y[rows]
    beta, *_ = np.linalg.lstsq(design, targets, rcond=None)
    resid = targets - design @ beta
    q = design.shape[1]
    xtx_inv = np.linalg.inv(design.T @ design)
    sigma2_eq = (resid**2).sum(axis=0) / (n_obs - q)
    se = np.sqrt(np.outer(np.diag(xtx_inv), sigma2_eq))
    sigma_ml = resid.T @ resid / n_obs
    sign, logdet = np.linalg.slogdet(sigma_ml)
    loglik = (
        -0.5 * n_obs * (K_ENDO * np.log(2 * np.pi) + logdet + K_ENDO)
        if sign > 0
        else -np.inf
    )

    # Re-insert zero columns so B keeps the caller's column layout.
    full_q = 1 + K_ENDO * p + m
    params = np.zeros((full_q, K_ENDO))
    se_full = np.full((full_q, K_ENDO), np.nan)
    kept = list(range(1 + K_ENDO * p)) + [1 + K_ENDO * p + int(i) for i in keep_exo]
    params[kept] = beta
    se_full[kept] = se
    all_labels = (
        ["const"]
        + [f"L{lag}.{n}" for lag in range(1, p + 1) for n in names]
        + list(exo_labels)
    )
    return VarModel(
        names=names,
        p=p,
        column_labels=tuple(all_labels),
        params=params,
        se=se_full,
        residuals=resid,
        sigma=sigma_ml,
        n_obs=n_obs,
        loglik=float(loglik),
        n_exo=m,
        design=design,
        targets=targets,
    )


def information_criteria(loglik: float, n_params: int, n_obs: int) -> tuple[float, float, float]:
    """(AIC, BIC, HQIC) on the total-likelihood scale: -2*ll + penalty."""
    aic = -2.0 * loglik + 2.0 * n_params
    bic = -2.0 * loglik + n_params * np.log(n_obs)
    hqic = -2.0 * loglik + 2.0 * n_params * np.log(np.log(n_obs))
    return aic, bic, hqic


def select_lag(endo, exo=None, p_max: int = 1) -> LagSelection:
    """Choose the lag order by majority vote of AIC, BIC and HQIC.

    All candidates are fitted on the common sample trimmed at ``p_max``
    so the criteria are comparable; on a three-way disagreement the
    AIC-optimal lag is used.
    """
    if p_max < 1:
        raise ValueError("p_max must be >= 1")
    criteria: dict[int, tuple[float, float, float]] = {}
    n_obs = None
    failures = []
    for p in range(1, p_max + 1):
        try:
            model = fit_varx(endo, exo, p=p, sample_start=p_max)
        except (InsufficientDataError, CollinearityError) as exc:
            failures.append((p, exc))
            continue
        n_params = K_ENDO * model.n_params_per_eq
        criteria[p] = information_criteria(model.loglik, n_params, model.n_obs)
        n_obs = model.n_obs
    if not criteria:
        raise InsufficientDataError(
            f"no candidate lag in 1..{p_max} could be fitted: {failures[-1][1]}"
        )
    aic_lag = min(criteria, key=lambda p: criteria[p][0])
    bic_lag = min(criteria, key=lambda p: criteria[p][1])
    hqic_lag = min(criteria, key=lambda p: criteria[p][2])
    votes = [aic_lag, bic_lag, hqic_lag]
    majority = [p for p in set(votes) if votes.count(p) >= 2]
    if majority:
        chosen, rule = majority[0], "majority"
    else:
        chosen, rule = aic_lag, "aic_fallback"
    return LagSelection(
        p_max=p_max,
        aic_lag=aic_lag,
        bic_lag=bic_lag,
        hqic_lag=hqic_lag,
        chosen=chosen,
        rule=rule,
        criteria=criteria,
        n_obs=n_obs,
    )


def granger_test(model: VarModel, direction: tuple[str, str]) -> GrangerResult:
    """F-test of whether the stimulus lags improve the response equation.

    The restricted model drops all p stimulus lags from the response
    equation while keeping its own lags and any exogenous columns, so
    the test isolates the cross-lag block.
    """
    stim_name, resp_name = direction
    try:
        stim = model.names.index(stim_name)
        resp = model.names.index(resp_name)
    except ValueError:
        raise ValueError(
            f"direction {stim_name!r}->{resp_name!r} does not match model series {model.names}"
        ) from None
    if stim == resp:
        raise ValueError("stimulus and response must differ")
    floor = K_ENDO * model.p + model.n_exo + MIN_TEST_MARGIN
    if model.n_obs < floor:
        raise InsufficientDataError(
            f"Granger test needs at least {floor} effective observations, have {model.n_obs}"
        )

    q_u = model.design.shape[1]
    df_denom = model.n_obs - q_u
    rss_u = float((model.residuals[:, resp] ** 2).sum())
    stim_cols = [1 + K_ENDO * (lag - 1) + stim for lag in range(1, model.p + 1)]
    keep = [c for c in range(q_u) if c not in stim_cols]
    restricted = model.design[:, keep]
    target = model.targets[:, resp]
    beta_r, *_ = np.linalg.lstsq(restricted, target, rcond=None)
    rss_r = float(((target - restricted @ beta_r) ** 2).sum())

    f_stat = max(0.0, ((rss_r - rss_u) / model.p) / (rss_u / df_denom))
    p_value = float(sps.f.sf(f_stat, model.p, df_denom))
    t_crit = sps.t.ppf(0.975, df_denom)
    per_lag = []
    for lag in range(1, model.p + 1):
        row = 1 + K_ENDO * (lag - 1) + stim
        coef = float(model.params[row, resp])
        se = float(model.se[row, resp])
        t_val = coef / se if se > 0 else 0.0
        per_lag.append(
            LagCoefficient(
                lag=lag,
                coefficient=coef,
                se=se,
                t_value=t_val,
                sign="+" if coef >= 0 else "-",
                significant=abs(t_val) > t_crit,
            )
        )
    return GrangerResult(
        stimulus=stim_name,
        response=resp_name,
        f_statistic=float(f_stat),
        p_value=p_value,
        lag_order=model.p,
        per_lag=tuple(per_lag),
        n_obs=model.n_obs,
        df_denom=df_denom,
        rss_restricted=rss_r,
        rss_unrestricted=rss_u,
    )


def diagnose(model: VarModel, granger: GrangerResult) -> GrangerResult:
    """Fill the residual diagnostics of a Granger result.

    Ljung-Box runs on each residual series with the horizon extended
    beyond the fitted lag count; ADF and KPSS check residual
    stationarity. One dagger marks a single Ljung-Box failure, two mark
    failures in both series.
    """
    stim = model.names.index(granger.stimulus)
    resp = model.names.index(granger.response)
    lags = default_lb_lags(model.n_obs, model.p)
    lb_pass = {}
    adf_pass = True
    kpss_pass = True
    for idx in (stim, resp):
        resid = model.residuals[:, idx]
        lb = ljung_box(resid, lags=lags, model_df=model.p)
        lb_pass[idx] = not lb.decision_at_5pct
        adf_pass = adf_pass and adf_test(resid).decision_at_5pct
        kpss_pass = kpss_pass and not kpss_test(resid).decision_at_5pct
    flags = DiagnosticFlags(
        ljung_box_stimulus_pass=lb_pass[stim],
        ljung_box_response_pass=lb_pass[resp],
        resid_adf_pass=adf_pass,
        resid_kpss_pass=kpss_pass,
    )
    return dataclasses.replace(granger, diagnostics=flags)


def lag_annotation(result: GrangerResult) -> str:
    """Compact report string for the significant cross-lag coefficients.

    Consecutive significant lags with a shared sign collapse into a
    range, e.g. ``1+-5+,8- (6/12)``; a dash marks none significant.
    """
    sig = [(c.lag, c.sign) for c in result.per_lag if c.significant]
    total = len(result.per_lag)
    if not sig:
        return f"- (0/{total})"
    parts = []
    run_start, run_sign = sig[0]
    prev = run_start
    for lag, sign in sig[1:] + [(None, None)]:
        if lag is not None and lag == prev + 1 and sign == run_sign:
            prev = lag
            continue
        parts.append(
            f"{run_start}{run_sign}" if run_start == prev else f"{run_start}{run_sign}-{prev}{run_sign}"
        )
        if lag is not None:
            run_start, run_sign, prev = lag, sign, lag
    return f"{','.join(parts)} ({len(sig)}/{total})"
