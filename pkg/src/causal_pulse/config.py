"""Run configuration: one JSON file drives every analysis.

Parameter defaults are the pipeline's canonical constants; any value a
config file overrides is echoed into report headers so a report is
self-describing. Unknown keys anywhere in the file are hard errors.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

ANALYSES = ("impact", "granger_news", "diffusion", "lexicon", "placebo")

#: Signals treated as counts (log1p before modelling); everything else is
#: used on its own scale.
COUNT_METRICS = frozenset({"posters"})


@dataclass(frozen=True)
class Parameters:
    """Analysis constants. Defaults are the canonical values."""

    p_max_daily: int = 14
    p_max_weekly: int = 6
    pre_weeks: int = 11
    post_days: int = 7
    q: float = 0.05
    top_k: int = 100
    min_freq: int = 50
    max_sparsity: float = 0.25
    mc_draws: int = 10000
    seed: int = 0
    placebo_shift_days: int = -21
    confidence: float = 0.99


@dataclass(frozen=True)
class DataPaths:
    """Input locations; all paths are resolved relative to the config file."""

    posts: dict[str, Path] = field(default_factory=dict)
    series: dict[str, dict[str, Path]] = field(default_factory=dict)
    entities: dict[str, Path] = field(default_factory=dict)
    news_volume: Path | None = None
    events: Path | None = None
    stopwords: Path | None = None
    affect_labels: tuple[str, ...] = ()

    @property
    def communities(self) -> tuple[str, ...]:
        names = dict.fromkeys(list(self.posts) + list(self.series))
        return tuple(names)


@dataclass(frozen=True)
class AnalysisConfig:
    data: DataPaths
    analyses: tuple[str, ...]
    params: Parameters
    output_dir: Path
    overrides: dict[str, object] = field(default_factory=dict)
    config_hash: str = ""

    def param_header(self) -> dict[str, object]:
        """Full parameter echo plus which keys were overridden."""
        header = dataclasses.asdict(self.params)
        header["overridden"] = sorted(self.overrides)
        return header


def _expect_mapping(obj, where: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be a JSON object")
    return obj


def _reject_unknown(obj: dict, allowed: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


def _as_path(base: Path, value, where: str) -> Path:
    if not isinstance(value, str) or not value:
        raise ConfigError(f"{where} must be a non-empty path string")
    p = Path(value)
    return p if p.is_absolute() else base / p


def _load_data(obj: dict, base: Path) -> DataPaths:
    allowed = {"posts", "series", "entities", "news_volume", "events", "stopwords", "affect_labels"}
    _reject_unknown(obj, allowed, "data")
    posts = {
        str(k): _as_path(base, v, f"data.posts.{k}")
        for k, v in _expect_mapping(obj.get("posts", {}), "data.posts").items()
    }
    series: dict[str, dict[str, Path]] = {}
    for comm, metrics in _expect_mapping(obj.get("series", {}), "data.series").items():
        series[str(comm)] = {
            str(m): _as_path(base, v, f"data.series.{comm}.{m}")
            for m, v in _expect_mapping(metrics, f"data.series.{comm}").items()
        }
    entities = {
        str(k): _as_path(base, v, f"data.entities.{k}")
        for k, v in _expect_mapping(obj.get("entities", {}), "data.entities").items()
    }
    labels = obj.get("affect_labels", [])
    if not isinstance(labels, list) or not all(isinstance(x, str) for x in labels):
        raise ConfigError("data.affect_labels must be a list of strings")
    return DataPaths(
        posts=posts,
        series=series,
        entities=entities,
        news_volume=_as_path(base, obj["news_volume"], "data.news_volume")
        if "news_volume" in obj
        else None,
        events=_as_path(base, obj["events"], "data.events") if "events" in obj else None,
        stopwords=_as_path(base, obj["stopwords"], "data.stopwords")
        if "stopwords" in obj
        else None,
        affect_labels=tuple(labels),
    )


def _load_params(obj: dict) -> tuple[Parameters, dict[str, object]]:
    defaults = Parameters()
    names = {f.name for f in dataclasses.fields(Parameters)}
    _reject_unknown(obj, names, "params")
    overrides = {}
    for key, value in obj.items():
        default = getattr(defaults, key)
        caster = type(default)
        try:
            value = caster(value)
        except (TypeError, ValueError):
            raise ConfigError(f"params.{key} must be of type {caster.__name__}") from None
        if value != default:
            overrides[key] = value
    return dataclasses.replace(defaults, **overrides), overrides


def load_config(
    path: str | Path,
    out_override: str | None = None,
    seed_override: int | None = None,
) -> AnalysisConfig:
    """Parse and validate a config file, applying CLI overrides."""
    path = Path(path)
    try:
        raw_text = path.read_text(encoding="utf-8")
        raw = json.loads(raw_text)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    obj = _expect_mapping(raw, "config")
    _reject_unknown(obj, {"data", "analyses", "params", "output_dir"}, "config")
    base = path.parent

    data = _load_data(_expect_mapping(obj.get("data", {}), "data"), base)
    params, overrides = _load_params(_expect_mapping(obj.get("params", {}), "params"))

    analyses = obj.get("analyses", list(ANALYSES))
    if not isinstance(analyses, list) or not analyses:
        raise ConfigError("analyses must be a non-empty list")
    for a in analyses:
        if a not in ANALYSES:
            raise ConfigError(f"unknown analysis {a!r}; expected one of {ANALYSES}")

    if "output_dir" not in obj and out_override is None:
        raise ConfigError("output_dir is required (in the config or via --out)")
    out_dir = Path(out_override) if out_override else _as_path(base, obj["output_dir"], "output_dir")
    if seed_override is not None:
        if params.seed != seed_override:
            overrides = dict(overrides, seed=seed_override)
        params = dataclasses.replace(params, seed=seed_override)

    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()
    return AnalysisConfig(
        data=data,
        analyses=tuple(dict.fromkeys(analyses)),
        params=params,
        output_dir=out_dir,
        overrides=overrides,
        config_hash=hashlib.sha256(canonical).hexdigest(),
    )
