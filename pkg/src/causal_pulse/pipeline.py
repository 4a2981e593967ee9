"""End-to-end orchestration of the three analyses plus validation runs.

Each section (impact, granger_news, diffusion, lexicon, placebo) turns
loaded inputs into result rows, first-class skip records and FDR family
summaries, then writes CSV and JSON reports plus SVG panels. Work items
are independent and run through a deterministic parallel map: every
item derives its own seed from the run seed and its key path, and
results are gathered in declaration order, so output bytes do not
depend on the worker count.
"""

from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from itertools import combinations
from pathlib import Path

import numpy as np

from . import impact as impact_mod
from . import lexicon as lexicon_mod
from .config import COUNT_METRICS, AnalysisConfig
from .errors import (
    CausalPulseError,
    ConfigError,
    FitFailureError,
    InsufficientDataError,
    NonAnalysableError,
    TransformError,
    UndefinedEffectError,
)
from .io import (
    EventSpec,
    bundled_events,
    bundled_stopwords,
    read_events_csv,
    read_posts_jsonl,
    read_series_csv,
    read_stopwords,
)
from .plots import ImpactPlotData, write_impact_svg
from .seeds import derive_seed
from .series import (
    ExogenousBlock,
    Frequency,
    TimeSeries,
    build_exogenous,
    compute_affect_series,
    compute_engagement,
    first_difference,
    locf,
    log1p_transform,
)
from .stattests import PValueFamily, adf_test, bh_fdr, kpss_test, retain_pair
from .var import GrangerResult, diagnose, fit_varx, granger_test, lag_annotation, select_lag

ENGAGEMENT_METRICS = ("posters", "posts_per_poster")


@dataclass
class Section:
    name: str
    header: dict
    rows: list[dict] = field(default_factory=list)
    skips: list[dict] = field(default_factory=list)
    families: list[dict] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)


@dataclass
class Inputs:
    communities: tuple[str, ...]
    metric_series: dict[str, dict[str, TimeSeries]]
    entity_series: dict[str, TimeSeries]
    news_volume: TimeSeries | None
    events: list[EventSpec]
    stopwords: frozenset[str]
    posts: dict[str, list]


def _parallel_map(fn, items, jobs: int):
    """Order-preserving map; results are identical for any worker count."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        threadpool_limits = None
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        if threadpool_limits is not None:
            # Task-level threads would otherwise oversubscribe the BLAS pool.
            with threadpool_limits(limits=1):
                return list(pool.map(fn, items))
        return list(pool.map(fn, items))


def _slug(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")


def trim_leading_missing(series: TimeSeries) -> TimeSeries:
    """Drop the leading run of missing values so LOCF has a seed value."""
    present = np.flatnonzero(~np.isnan(series.values))
    if len(present) == 0:
        raise TransformError(f"{series.name!r} has no present values")
    k = int(present[0])
    if k == 0:
        return series
    return series.replace(values=series.values[k:], start=series.date_at(k))


def load_inputs(config: AnalysisConfig) -> Inputs:
    """Read every configured input up front; unreadable files fail here."""
    posts: dict[str, list] = {}
    for community, path in config.data.posts.items():
        posts[community] = read_posts_jsonl(path)

    metric_series: dict[str, dict[str, TimeSeries]] = {}
    for community in config.data.communities:
        metrics: dict[str, TimeSeries] = {}
        for metric, path in config.data.series.get(community, {}).items():
            metrics[metric] = read_series_csv(path, name=metric)
        if community in posts and posts[community]:
            days = [p.day for p in posts[community]]
            window = (min(days), max(days))
            if "posters" not in metrics or "posts_per_poster" not in metrics:
                posters, per_poster = compute_engagement(posts[community], window)
                metrics.setdefault("posters", posters)
                metrics.setdefault("posts_per_poster", per_poster)
            for label in config.data.affect_labels:
                if label not in metrics:
                    metrics[label] = compute_affect_series(posts[community], label, window)
        metric_series[community] = metrics

    entity_series = {
        name: read_series_csv(path, name=name) for name, path in config.data.entities.items()
    }
    news_volume = (
        read_series_csv(config.data.news_volume, name="news_volume")
        if config.data.news_volume
        else None
    )
    events = read_events_csv(config.data.events) if config.data.events else bundled_events()
    stopwords = (
        read_stopwords(config.data.stopwords) if config.data.stopwords else bundled_stopwords()
    )
    return Inputs(
        communities=config.data.communities,
        metric_series=metric_series,
        entity_series=entity_series,
        news_volume=news_volume,
        events=events,
        stopwords=stopwords,
        posts=posts,
    )


def prepare_impact_series(raw: TimeSeries, metric: str) -> tuple[TimeSeries, str]:
    """Impute and scale a signal for counterfactual analysis.

    Count signals are log1p-transformed (zero-count days stay finite);
    bounded signals keep their own scale. Returns the series plus the
    transform tag echoed into reports.
    """
    series = locf(trim_leading_missing(raw))
    if metric in COUNT_METRICS:
        return log1p_transform(series), "log1p"
    return series, "none"


def prepare_var_series(raw: TimeSeries, is_count: bool) -> TimeSeries:
    """LOCF, optional log1p, then first difference (change scale)."""
    series = locf(trim_leading_missing(raw))
    if is_count:
        series = log1p_transform(series)
    return first_difference(series)


def _overlap(a: TimeSeries, b: TimeSeries) -> tuple[date, date]:
    first = max(a.start, b.start)
    last = min(a.end, b.end)
    if last < first:
        raise InsufficientDataError(f"{a.name!r} and {b.name!r} have no overlapping dates")
    return first, last


def _stars(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


# ---------------------------------------------------------------------------
# impact


def run_impact(config: AnalysisConfig, inputs: Inputs, jobs: int = 1) -> tuple[Section, list]:
    """Counterfactual analysis of every event on every platform signal."""
    params = config.params
    section = Section(name="impact", header=config.param_header())
    if not inputs.events:
        section.notes.append("events file is empty; nothing to analyse")
        return section, []

    plot_payload = []
    for platform in inputs.communities:
        metrics = inputs.metric_series.get(platform, {})
        for signal_name in ENGAGEMENT_METRICS:
            if signal_name not in metrics:
                section.notes.append(f"{platform}: no {signal_name} series; skipped signal")
                continue
            signal, transform = prepare_impact_series(metrics[signal_name], signal_name)
            exo = None
            if inputs.news_volume is not None:
                try:
                    exo = build_exogenous((signal.start, signal.end), inputs.news_volume)
                except CausalPulseError as exc:
                    section.notes.append(
                        f"{platform}/{signal_name}: exogenous block unavailable ({exc})"
                    )

            def one_event(event, signal=signal, platform=platform, signal_name=signal_name,
                          transform=transform, exo=exo):
                seed = derive_seed(params.seed, "impact", platform, signal_name, event.name)
                try:
                    result, model, design = impact_mod.analyse_event(
                        signal,
                        event,
                        exo,
                        pre_weeks=params.pre_weeks,
                        post_days=params.post_days,
                        n_draws=params.mc_draws,
                        seed=seed,
                    )
                except (NonAnalysableError, FitFailureError, UndefinedEffectError) as exc:
                    return ("skip", event, str(exc))
                return ("ok", event, (result, model, design, transform))

            outcomes = _parallel_map(one_event, inputs.events, jobs)
            analysed = [(e, payload) for kind, e, payload in outcomes if kind == "ok"]
            for kind, event, reason in outcomes:
                if kind == "skip":
                    section.skips.append(
                        {
                            "platform": platform,
                            "signal": signal_name,
                            "event": event.name,
                            "date": event.date.isoformat(),
                            "reason": reason,
                        }
                    )
            family = PValueFamily(
                label=f"{platform}:{signal_name}",
                entries=tuple((e.name, payload[0].tail_p) for e, payload in analysed),
                q=params.q,
            )
            bh = bh_fdr(family)
            section.families.append(
                {
                    "label": family.label,
                    "size": family.size,
                    "n_rejected": len(bh.rejected),
                    "q": params.q,
                }
            )
            for event, (result, model, design, transform) in analysed:
                section.rows.append(
                    {
                        "platform": platform,
                        "signal": signal_name,
                        "event": event.name,
                        "date": event.date.isoformat(),
                        "effect_pct": round(100.0 * result.relative_effect, 4),
                        "ci99_low_pct": round(100.0 * result.effect_low, 4),
                        "ci99_high_pct": round(100.0 * result.effect_high, 4),
                        "tail_p": result.tail_p,
                        "adjusted_p": bh.adjusted[event.name],
                        "stars": result.stars,
                        "significant_99": result.significant,
                        "bh_significant": event.name in bh.rejected,
                        "transform": transform,
                    }
                )
                plot_payload.append((platform, signal_name, event, result, model, design))
    _warn_overlaps(section, inputs.events, config.params.post_days)
    return section, plot_payload


def _warn_overlaps(section: Section, events: list[EventSpec], post_days: int) -> None:
    ordered = sorted(events, key=lambda e: (e.date, e.name))
    for earlier, later in zip(ordered, ordered[1:]):
        gap = (later.date - earlier.date).days
        if 0 <= gap < post_days:
            section.notes.append(
                f"post-event windows overlap: {earlier.name!r} ({earlier.date}) and "
                f"{later.name!r} ({later.date}); both analysed, effects may be confounded"
            )


def emit_plots(plot_payload, outdir: Path, confidence: float = 0.99) -> list[str]:
    """Write the per-event SVG panels and their backing CSV data."""
    plots_dir = outdir / "plots"
    plots_dir.mkdir(parents=True, exist_ok=True)
    z = 2.5758293035489004  # 99% normal quantile for the pre-period band
    written = []
    for platform, signal_name, event, result, model, design in plot_payload:
        observed = np.concatenate([design.target_pre, design.observed_post])
        predicted = np.concatenate([model.onestep_mean, result.forecast])
        pre_sd = np.sqrt(model.onestep_var)
        lower = np.concatenate([model.onestep_mean - z * pre_sd, result.forecast_low])
        upper = np.concatenate([model.onestep_mean + z * pre_sd, result.forecast_high])
        data = ImpactPlotData(
            title=f"{event.name} - {platform}/{signal_name} ({event.date.isoformat()})",
            dates=design.dates(),
            observed=observed,
            predicted=predicted,
            lower=lower,
            upper=upper,
            post_start=design.n_pre,
        )
        stem = f"impact_{_slug(platform)}_{_slug(signal_name)}_{_slug(event.name)}"
        write_impact_svg(data, plots_dir / f"{stem}.svg")
        with open(plots_dir / f"{stem}.csv", "w", encoding="utf-8", newline="") as fh:
            fh.write("date,observed,predicted,lower,upper,difference\n")
            for k, day in enumerate(data.dates):
                fh.write(
                    f"{day.isoformat()},{observed[k]!r},{predicted[k]!r},"
                    f"{lower[k]!r},{upper[k]!r},{observed[k] - predicted[k]!r}\n"
                )
        written.extend([f"plots/{stem}.svg", f"plots/{stem}.csv"])
    return written


# ---------------------------------------------------------------------------
# granger news


def _granger_pair_rows(
    stimulus: TimeSeries,
    response: TimeSeries,
    exo: ExogenousBlock | None,
    p_max: int,
) -> tuple[list[GrangerResult], dict]:
    """Gate, select the lag and test both directions for one series pair."""
    model_sel = select_lag((stimulus, response), exo, p_max=p_max)
    model = fit_varx((stimulus, response), exo, p=model_sel.chosen)
    results = []
    for direction in ((stimulus.name, response.name), (response.name, stimulus.name)):
        res = granger_test(model, direction)
        results.append(diagnose(model, res))
    meta = {"chosen_lag": model_sel.chosen, "lag_rule": model_sel.rule, "n_obs": model.n_obs}
    return results, meta


def _gate_stats(stimulus: TimeSeries, response: TimeSeries) -> dict:
    out = {}
    for prefix, series in (("stim", stimulus), ("resp", response)):
        try:
            out[f"adf_{prefix}"] = round(adf_test(series).statistic, 6)
            out[f"kpss_{prefix}"] = round(kpss_test(series).statistic, 6)
        except CausalPulseError as exc:
            out[f"adf_{prefix}"] = f"error: {exc}"
            out[f"kpss_{prefix}"] = ""
    return out


def run_granger_news(config: AnalysisConfig, inputs: Inputs, jobs: int = 1) -> Section:
    """News-entity lead-lag tests against every community metric."""
    params = config.params
    section = Section(name="granger_news", header=config.param_header())
    if not inputs.entity_series:
        section.notes.append("no entity series configured; nothing to analyse")
        return section

    tasks = []
    for forum in inputs.communities:
        metrics = inputs.metric_series.get(forum, {})
        for metric_name in metrics:
            for entity in inputs.entity_series:
                tasks.append((forum, metric_name, entity))

    def one_task(task):
        forum, metric_name, entity = task
        raw_metric = inputs.metric_series[forum][metric_name]
        raw_entity = inputs.entity_series[entity]
        stim_name = entity if entity != metric_name else f"{entity}_news"
        try:
            first, last = _overlap(raw_entity, raw_metric)
            stim = prepare_var_series(
                raw_entity.window(first, last).replace(name=stim_name), is_count=True
            )
            resp = prepare_var_series(
                raw_metric.window(first, last), is_count=metric_name in COUNT_METRICS
            )
            first, last = _overlap(stim, resp)
            stim, resp = stim.window(first, last), resp.window(first, last)
            if not retain_pair(stim, resp):
                return ("skip", task, {"reason": "failed ADF/KPSS retention gate",
                                       **_gate_stats(stim, resp)})
            exo = None
            if inputs.news_volume is not None:
                exo = build_exogenous((stim.start, stim.end), inputs.news_volume)
            results, meta = _granger_pair_rows(stim, resp, exo, params.p_max_daily)
        except CausalPulseError as exc:
            return ("skip", task, {"reason": str(exc)})
        return ("ok", task, (results, meta))

    outcomes = _parallel_map(one_task, tasks, jobs)
    families: dict[tuple[str, str], list[tuple[str, float]]] = {}
    ok_rows = []
    for kind, task, payload in outcomes:
        forum, metric_name, entity = task
        if kind == "skip":
            section.skips.append(
                {"forum": forum, "response": metric_name, "entity": entity, **payload}
            )
            continue
        results, meta = payload
        for res in results:
            key = f"{entity}:{res.stimulus}->{res.response}"
            families.setdefault((forum, metric_name), []).append((key, res.p_value))
            ok_rows.append((forum, metric_name, entity, key, res, meta))

    adjusted: dict[tuple[str, str], dict[str, float]] = {}
    rejected: dict[tuple[str, str], frozenset[str]] = {}
    for fam_key, entries in families.items():
        family = PValueFamily(
            label=f"{fam_key[0]}:{fam_key[1]}", entries=tuple(entries), q=params.q
        )
        bh = bh_fdr(family)
        adjusted[fam_key] = bh.adjusted
        rejected[fam_key] = bh.rejected
        section.families.append(
            {
                "label": family.label,
                "size": family.size,
                "n_rejected": len(bh.rejected),
                "q": params.q,
            }
        )
    for forum, metric_name, entity, key, res, meta in ok_rows:
        fam_key = (forum, metric_name)
        section.rows.append(_granger_row(
            {"forum": forum, "response": metric_name, "entity": entity},
            res, meta, adjusted[fam_key][key], key in rejected[fam_key],
        ))
    return section


def _granger_row(prefix: dict, res: GrangerResult, meta: dict, p_adj: float, sig_fdr: bool) -> dict:
    diag = res.diagnostics
    return {
        **prefix,
        "direction": f"{res.stimulus}->{res.response}",
        "chosen_lag": meta["chosen_lag"],
        "lag_rule": meta["lag_rule"],
        "n_obs": meta["n_obs"],
        "f_statistic": round(res.f_statistic, 6),
        "p_raw": res.p_value,
        "p_adjusted": p_adj,
        "stars_raw": _stars(res.p_value),
        "significant_fdr": sig_fdr,
        "lag_annotation": lag_annotation(res),
        "daggers": diag.daggers if diag else "",
        "lb_stimulus_pass": diag.ljung_box_stimulus_pass if diag else "",
        "lb_response_pass": diag.ljung_box_response_pass if diag else "",
        "resid_adf_pass": diag.resid_adf_pass if diag else "",
        "resid_kpss_pass": diag.resid_kpss_pass if diag else "",
    }


# ---------------------------------------------------------------------------
# lexicon and diffusion


def _build_corpora(inputs: Inputs) -> dict[str, lexicon_mod.TokenCorpus]:
    corpora = {}
    for community, posts in inputs.posts.items():
        corpora[community] = lexicon_mod.tokenize(posts, inputs.stopwords, community=community)
    return corpora


def _rest_corpus(corpora: dict, target: str) -> lexicon_mod.TokenCorpus:
    rest = None
    for name, corpus in corpora.items():
        if name == target:
            continue
        rest = corpus if rest is None else rest.merge(corpus)
    if rest is None:
        raise ConfigError("one-vs-all contrast needs at least two communities with posts")
    return rest


@dataclass
class _PairData:
    target: str
    partner: str
    entries: list
    weeks_start: date
    weekly_target: dict[str, np.ndarray]
    weekly_partner: dict[str, np.ndarray]


def _pair_lexicon(config: AnalysisConfig, corpora, weekly, target: str,
                  partner: str) -> _PairData:
    """Target-community lexicon, sparsity-filtered against one partner."""
    params = config.params
    start_t, counts_t, weeks_t = weekly[target]
    start_p, counts_p, weeks_p = weekly[partner]
    first = max(start_t, start_p)
    last = min(start_t + timedelta(days=7 * (weeks_t - 1)), start_p + timedelta(days=7 * (weeks_p - 1)))
    n_weeks = ((last - first).days // 7) + 1
    if n_weeks < 2:
        raise InsufficientDataError(f"{target} and {partner} share fewer than two weeks of posts")
    off_t = (first - start_t).days // 7
    off_p = (first - start_p).days // 7

    def aligned(counts: dict, off: int) -> dict[str, np.ndarray]:
        return {term: arr[off : off + n_weeks] for term, arr in counts.items()}

    weekly_target = aligned(counts_t, off_t)
    weekly_partner = aligned(counts_p, off_p)
    zeros = np.zeros(n_weeks)
    entries = lexicon_mod.build_lexicon(
        corpora[target],
        _rest_corpus(corpora, target),
        {t: weekly_target.get(t, zeros) for t in corpora[target].counts},
        {t: weekly_partner.get(t, zeros) for t in corpora[target].counts},
        weeks_start=first,
        k=params.top_k,
        min_freq=params.min_freq,
        max_sparsity=params.max_sparsity,
    )
    return _PairData(target, partner, entries, first, weekly_target, weekly_partner)


def _weekly_counts(inputs: Inputs) -> dict[str, tuple[date, dict[str, np.ndarray], int]]:
    """Weekly term counts per community, with empty weeks set to missing."""
    out = {}
    for community, posts in inputs.posts.items():
        if not posts:
            continue
        start, counts = lexicon_mod.weekly_term_counts(posts, inputs.stopwords)
        n_weeks = len(next(iter(counts.values()))) if counts else 0
        weeks_with_posts = np.zeros(n_weeks, dtype=bool)
        for post in posts:
            weeks_with_posts[(post.day - start).days // 7] = True
        for term, arr in counts.items():
            arr[~weeks_with_posts] = np.nan
        out[community] = (start, counts, n_weeks)
    return out


def run_lexicon(config: AnalysisConfig, inputs: Inputs) -> tuple[Section, dict]:
    """Build per-pair community lexicons; rows mirror the lexicon CSV."""
    section = Section(name="lexicon", header=config.param_header())
    communities = [c for c in inputs.communities if inputs.posts.get(c)]
    if len(communities) < 2:
        section.notes.append("need posts for at least two communities; nothing to build")
        return section, {}
    corpora = _build_corpora(inputs)
    weekly = _weekly_counts(inputs)
    pair_data: dict[tuple[str, str], _PairData] = {}
    import warnings as _warnings

    for target, partner in [(a, b) for a, b in combinations(communities, 2)] + [
        (b, a) for a, b in combinations(communities, 2)
    ]:
        with _warnings.catch_warnings():
            _warnings.simplefilter("ignore")
            try:
                data = _pair_lexicon(config, corpora, weekly, target, partner)
            except CausalPulseError as exc:
                section.skips.append({"community": target, "partner": partner, "reason": str(exc)})
                continue
        pair_data[(target, partner)] = data
        if len(data.entries) < config.params.top_k:
            section.notes.append(
                f"{target} vs {partner}: only {len(data.entries)} of {config.params.top_k} "
                "terms survive the filters"
            )
        for entry in data.entries:
            section.rows.append(
                {
                    "community": target,
                    "partner": partner,
                    "term": entry.term,
                    "npmi": round(entry.npmi, 8),
                    "freq_target": entry.freq_in_community,
                    "freq_rest": entry.freq_in_rest,
                    "sparsity_target": round(entry.sparsity_target, 6),
                    "sparsity_rest": round(entry.sparsity_partner, 6),
                }
            )
    return section, pair_data


def run_diffusion(config: AnalysisConfig, inputs: Inputs, jobs: int = 1) -> Section:
    """Weekly lexical lead-lag tests within each community pair."""
    params = config.params
    section = Section(name="diffusion", header=config.param_header())
    lex_section, pair_data = run_lexicon(config, inputs)
    if not pair_data:
        section.notes.extend(lex_section.notes)
        section.notes.append("no community pair has a usable lexicon")
        return section

    communities = [c for c in inputs.communities if inputs.posts.get(c)]
    tasks = []
    for a, b in combinations(communities, 2):
        terms: dict[str, None] = {}
        for key in ((a, b), (b, a)):
            if key in pair_data:
                for entry in pair_data[key].entries:
                    terms.setdefault(entry.term)
        data_ab = pair_data.get((a, b))
        if data_ab is None:
            continue
        for term in terms:
            tasks.append((a, b, term, data_ab))

    def one_task(task):
        a, b, term, data = task
        counts_a = data.weekly_target.get(term)
        counts_b = data.weekly_partner.get(term)
        if counts_a is None or counts_b is None:
            return ("skip", task, {"reason": "term unseen in one community"})
        try:
            series_a = _weekly_log_diff(term, counts_a, data.weeks_start, a)
            series_b = _weekly_log_diff(term, counts_b, data.weeks_start, b)
            if not retain_pair(series_a, series_b):
                return ("skip", task, {"reason": "failed ADF/KPSS retention gate",
                                       **_gate_stats(series_a, series_b)})
            results, meta = _granger_pair_rows(series_a, series_b, None, params.p_max_weekly)
        except CausalPulseError as exc:
            return ("skip", task, {"reason": str(exc)})
        return ("ok", task, (results, meta))

    outcomes = _parallel_map(one_task, tasks, jobs)
    families: dict[tuple[str, str], list[tuple[str, float]]] = {}
    ok_rows = []
    for kind, task, payload in outcomes:
        a, b, term, _ = task
        pair_label = f"{a}|{b}"
        if kind == "skip":
            section.skips.append({"pair": pair_label, "term": term, **payload})
            continue
        results, meta = payload
        for res in results:
            key = f"{term}:{res.stimulus}->{res.response}"
            families.setdefault((a, b), []).append((key, res.p_value))
            ok_rows.append((pair_label, (a, b), term, key, res, meta))

    adjusted = {}
    rejected = {}
    for fam_key, entries in families.items():
        family = PValueFamily(label=f"{fam_key[0]}|{fam_key[1]}", entries=tuple(entries), q=params.q)
        bh = bh_fdr(family)
        adjusted[fam_key], rejected[fam_key] = bh.adjusted, bh.rejected
        section.families.append(
            {"label": family.label, "size": family.size, "n_rejected": len(bh.rejected), "q": params.q}
        )
    for pair_label, fam_key, term, key, res, meta in ok_rows:
        section.rows.append(_granger_row(
            {"pair": pair_label, "term": term}, res, meta,
            adjusted[fam_key][key], key in rejected[fam_key],
        ))
    return section


def _weekly_log_diff(term: str, counts: np.ndarray, start: date, community: str) -> TimeSeries:
    raw = TimeSeries(f"{community}:{term}", Frequency.WEEKLY, start, counts)
    series = locf(trim_leading_missing(raw))
    return first_difference(log1p_transform(series))


# ---------------------------------------------------------------------------
# placebo


def run_placebo(config: AnalysisConfig, inputs: Inputs, jobs: int = 1) -> Section:
    """False-positive analysis on pseudo-events shifted before real ones."""
    params = config.params
    section = Section(name="placebo", header=config.param_header())
    if params.placebo_shift_days == 0:
        raise ConfigError("placebo must not coincide with real events (shift of 0 days)")
    if not inputs.events:
        section.notes.append("no analysable pseudo-events: events file is empty")
        return section

    items = []
    for platform in inputs.communities:
        metrics = inputs.metric_series.get(platform, {})
        for signal_name in ENGAGEMENT_METRICS:
            if signal_name in metrics:
                items.append((platform, signal_name))

    def one_item(item):
        platform, signal_name = item
        signal, _ = prepare_impact_series(inputs.metric_series[platform][signal_name], signal_name)
        exo = None
        if inputs.news_volume is not None:
            try:
                exo = build_exogenous((signal.start, signal.end), inputs.news_volume)
            except CausalPulseError:
                exo = None
        table = impact_mod.placebo_run(
            inputs.events,
            signal,
            exo,
            shift_days=params.placebo_shift_days,
            pre_weeks=params.pre_weeks,
            post_days=params.post_days,
            n_draws=params.mc_draws,
            seed=derive_seed(params.seed, "placebo", platform, signal_name),
            q=params.q,
        )
        return item, table

    for (platform, signal_name), table in _parallel_map(one_item, items, jobs):
        if table.n_analysable == 0:
            section.notes.append(f"{platform}/{signal_name}: no analysable pseudo-events")
        section.rows.append(
            {
                "platform": platform,
                "signal": signal_name,
                "shift_days": table.shift_days,
                "n_events": table.n_events,
                "n_analysable": table.n_analysable,
                "fpr_95": _round_rate(table.fpr_95),
                "fpr_99": _round_rate(table.fpr_99),
                "raw_fpr_95": _round_rate(table.raw_fpr_95),
                "raw_fpr_99": _round_rate(table.raw_fpr_99),
            }
        )
        for dropped_name, reason in table.dropped:
            section.skips.append(
                {"platform": platform, "signal": signal_name, "event": dropped_name,
                 "reason": reason}
            )
        section.families.append(
            {
                "label": f"placebo:{platform}:{signal_name}",
                "size": table.n_analysable,
                "n_rejected": sum(1 for r in table.rows if r.significant_95),
                "q": params.q,
            }
        )
    return section


def _round_rate(x: float) -> float | str:
    return "" if isinstance(x, float) and np.isnan(x) else round(float(x), 6)


# ---------------------------------------------------------------------------
# report writing


_COLUMNS = {
    "impact": [
        "platform", "signal", "event", "date", "effect_pct", "ci99_low_pct", "ci99_high_pct",
        "tail_p", "adjusted_p", "stars", "significant_99", "bh_significant", "transform",
    ],
    "granger_news": [
        "forum", "response", "entity", "direction", "chosen_lag", "lag_rule", "n_obs",
        "f_statistic", "p_raw", "p_adjusted", "stars_raw", "significant_fdr",
        "lag_annotation", "daggers", "lb_stimulus_pass", "lb_response_pass",
        "resid_adf_pass", "resid_kpss_pass",
    ],
    "diffusion": [
        "pair", "term", "direction", "chosen_lag", "lag_rule", "n_obs", "f_statistic",
        "p_raw", "p_adjusted", "stars_raw", "significant_fdr", "lag_annotation", "daggers",
        "lb_stimulus_pass", "lb_response_pass", "resid_adf_pass", "resid_kpss_pass",
    ],
    "lexicon": [
        "community", "partner", "term", "npmi", "freq_target", "freq_rest",
        "sparsity_target", "sparsity_rest",
    ],
    "placebo": [
        "platform", "signal", "shift_days", "n_events", "n_analysable",
        "fpr_95", "fpr_99", "raw_fpr_95", "raw_fpr_99",
    ],
}


def _cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    import csv as _csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(col, "")) for col in columns])


def write_section(section: Section, outdir: Path) -> list[str]:
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    columns = _COLUMNS.get(section.name) or sorted({k for row in section.rows for k in row})
    csv_name = f"{section.name}.csv"
    _write_csv(outdir / csv_name, columns, section.rows)
    written.append(csv_name)
    if section.skips:
        skip_cols = list(dict.fromkeys(k for row in section.skips for k in row))
        skips_name = f"{section.name}_skips.csv"
        _write_csv(outdir / skips_name, skip_cols, section.skips)
        written.append(skips_name)
    payload = {
        "name": section.name,
        "header": section.header,
        "rows": section.rows,
        "skips": section.skips,
        "families": section.families,
        "notes": section.notes,
    }
    json_name = f"{section.name}.json"
    (outdir / json_name).write_text(
        json.dumps(payload, sort_keys=True, indent=2, default=_json_default) + "\n",
        encoding="utf-8",
    )
    written.append(json_name)
    return written


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (date, datetime)):
        return obj.isoformat()
    raise TypeError(f"cannot serialise {type(obj)!r}")


def run_analyses(config: AnalysisConfig, jobs: int = 1) -> dict[str, Section]:
    """Execute the configured analyses and write all reports.

    Returns the sections by name. The run manifest carries provenance
    (config hash, seed, wall-clock timestamps); all other report files
    are byte-deterministic for a given config and seed.
    """
    started = datetime.now(timezone.utc)
    inputs = load_inputs(config)
    outdir = config.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    sections: dict[str, Section] = {}
    outputs: list[str] = []
    for analysis in config.analyses:
        if analysis == "impact":
            section, plot_payload = run_impact(config, inputs, jobs)
            outputs.extend(sorted(emit_plots(plot_payload, outdir)))
        elif analysis == "granger_news":
            section = run_granger_news(config, inputs, jobs)
        elif analysis == "diffusion":
            section = run_diffusion(config, inputs, jobs)
        elif analysis == "lexicon":
            section, _ = run_lexicon(config, inputs)
        elif analysis == "placebo":
            section = run_placebo(config, inputs, jobs)
        else:  # pragma: no cover - load_config already validates
            raise ConfigError(f"unknown analysis {analysis!r}")
        sections[analysis] = section
        outputs.extend(write_section(section, outdir))
    manifest = {
        "config_hash": config.config_hash,
        "seed": config.params.seed,
        "jobs": jobs,
        "analyses": list(config.analyses),
        "parameters": config.param_header(),
        "outputs": outputs,
        "started": started.isoformat(),
        "finished": datetime.now(timezone.utc).isoformat(),
    }
    (outdir / "run_manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return sections
