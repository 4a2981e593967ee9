"""Quantitative analysis of external influence on online communities.

Three complementary analyses over calendar-indexed activity series:
counterfactual event impact with a structural time-series model, news
lead-lag via VAR-X and Granger tests, and cross-community lexical
diffusion from NPMI-induced lexicons. The pipeline module ties them
together behind a single config file and the ``causal-pulse`` CLI.
"""

from .config import AnalysisConfig, DataPaths, Parameters, load_config
from .errors import (
    AlignmentError,
    CausalPulseError,
    CollinearityError,
    ConfigError,
    DegenerateSeriesError,
    FitFailureError,
    IngestError,
    InsufficientDataError,
    NonAnalysableError,
    TransformError,
    UndefinedEffectError,
)
from .impact import (
    AssembledDesign,
    ImpactResult,
    PlaceboTable,
    StructuralModel,
    analyse_event,
    assemble_design,
    fit_mle,
    forecast_and_effect,
    placebo_run,
)
from .io import EventSpec, read_events_csv, read_posts_jsonl, read_series_csv, write_series_csv
from .lexicon import LexiconEntry, TokenCorpus, build_lexicon, npmi_score, tokenize
from .series import (
    ExogenousBlock,
    Frequency,
    PostRecord,
    TimeSeries,
    TransformSpec,
    apply_transforms,
    build_exogenous,
    compute_affect_series,
    compute_engagement,
    first_difference,
    locf,
    weekly_aggregate,
)
from .stattests import (
    BhResult,
    PValueFamily,
    TestResult,
    adf_test,
    bh_fdr,
    kpss_test,
    ljung_box,
    retain_pair,
)
from .var import (
    GrangerResult,
    LagSelection,
    VarModel,
    diagnose,
    fit_varx,
    granger_test,
    lag_annotation,
    select_lag,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
