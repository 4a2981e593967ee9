"""Community lexicon induction via normalized pointwise mutual information.

Terms characteristic of one community are found by contrasting it with
the union of the others (one-vs-all). Probabilities come from the joint
token-community distribution over the combined corpora, which keeps the
normalized score inside [-1, 1] by construction. Terms must clear a
minimum frequency in the target community and a weekly sparsity bound
in both communities of a tested pair.
"""

from __future__ import annotations

import math
import re
import warnings
from collections import Counter
from dataclasses import dataclass
from datetime import date, timedelta
from typing import Iterable, Mapping, Sequence

import numpy as np

from .series import Frequency, PostRecord, TimeSeries

MIN_FREQUENCY = 50
TOP_K = 100
MAX_SPARSITY = 0.25

_TOKEN_RE = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True, eq=False)
class TokenCorpus:
    """Token counts for one community (unigrams plus joined bigrams)."""

    community: str
    counts: Counter
    total: int

    def count(self, term: str) -> int:
        return self.counts.get(term, 0)

    def merge(self, other: "TokenCorpus", community: str | None = None) -> "TokenCorpus":
        merged = Counter(self.counts)
        merged.update(other.counts)
        return TokenCorpus(
            community=community or f"{self.community}+{other.community}",
            counts=merged,
            total=self.total + other.total,
        )


@dataclass(frozen=True, eq=False)
class LexiconEntry:
    term: str
    npmi: float
    freq_in_community: int
    freq_in_rest: int
    sparsity_target: float
    sparsity_partner: float
    weekly: TimeSeries


def split_tokens(text: str) -> list[str]:
    """Lowercased alphanumeric tokens, split on everything else."""
    return _TOKEN_RE.findall(text.lower())


def term_stream(text: str, stopwords: frozenset[str] | set[str]) -> Iterable[str]:
    """Unigrams and adjacent-pair bigrams, with stopword rules applied.

    Stopword unigrams are dropped; a bigram is dropped when either side
    is a stopword. Bigrams join adjacent tokens of the raw sequence with
    an underscore and never cross post boundaries.
    """
    tokens = split_tokens(text)
    for tok in tokens:
        if tok not in stopwords:
            yield tok
    for left, right in zip(tokens, tokens[1:]):
        if left not in stopwords and right not in stopwords:
            yield f"{left}_{right}"


def tokenize(
    posts: Sequence[PostRecord], stopwords: frozenset[str] | set[str], community: str = ""
) -> TokenCorpus:
    counts: Counter = Counter()
    for post in posts:
        counts.update(term_stream(post.text, stopwords))
    return TokenCorpus(community=community, counts=counts, total=sum(counts.values()))


def npmi_score(term: str, target: TokenCorpus, rest: TokenCorpus) -> float:
    """NPMI of a term for the target community against the rest.

    With c_t and c_r the term counts and N_t, N_r the corpus totals:
    P(w|c) = c_t/N_t, P(w) = (c_t+c_r)/(N_t+N_r), P(w,c) = c_t/(N_t+N_r),
    and the score is log(P(w|c)/P(w)) / (-log P(w,c)).
    """
    c_t = target.count(term)
    c_r = rest.count(term)
    if c_t <= 0:
        raise ValueError(f"term {term!r} absent from target corpus")
    n_t, n_r = target.total, rest.total
    p_w_given_c = c_t / n_t
    p_w = (c_t + c_r) / (n_t + n_r)
    p_wc = c_t / (n_t + n_r)
    if p_wc >= 1.0:
        raise ValueError(f"term {term!r} is the entire combined corpus; score undefined")
    return math.log(p_w_given_c / p_w) / -math.log(p_wc)


def weekly_sparsity(counts: np.ndarray) -> float:
    """Fraction of weeks with a zero or missing count."""
    arr = np.asarray(counts, dtype=float)
    if len(arr) == 0:
        return 1.0
    return float(np.mean(np.isnan(arr) | (arr == 0.0)))


def log_weekly_series(term: str, counts: np.ndarray, start: date) -> TimeSeries:
    arr = np.asarray(counts, dtype=float)
    return TimeSeries(term, Frequency.WEEKLY, start, np.log1p(np.where(np.isnan(arr), np.nan, arr)))


def build_lexicon(
    target: TokenCorpus,
    rest: TokenCorpus,
    weekly_target: Mapping[str, np.ndarray],
    weekly_partner: Mapping[str, np.ndarray],
    weeks_start: date,
    k: int = TOP_K,
    min_freq: int = MIN_FREQUENCY,
    max_sparsity: float = MAX_SPARSITY,
) -> list[LexiconEntry]:
    """Top-k lexicon for the target community against one partner.

    Candidates must reach ``min_freq`` usages in the target community
    and stay under ``max_sparsity`` zero-or-missing weeks in both the
    target's and the partner's weekly series. Survivors are ranked by
    NPMI descending, ties broken by target frequency then term order.
    """
    candidates = []
    for term, c_t in target.counts.items():
        if c_t < min_freq:
            continue
        sp_t = weekly_sparsity(weekly_target.get(term, np.empty(0)))
        sp_p = weekly_sparsity(weekly_partner.get(term, np.empty(0)))
        if sp_t >= max_sparsity or sp_p >= max_sparsity:
            continue
        try:
            score = npmi_score(term, target, rest)
        except ValueError:
            continue
        candidates.append((term, score, c_t, sp_t, sp_p))
    candidates.sort(key=lambda item: (-item[1], -item[2], item[0]))
    if len(candidates) < k:
        warnings.warn(
            f"{target.community or 'target'}: only {len(candidates)} terms survive the "
            f"filters, {k} requested",
            stacklevel=2,
        )
    entries = []
    for term, score, c_t, sp_t, sp_p in candidates[:k]:
        entries.append(
            LexiconEntry(
                term=term,
                npmi=score,
                freq_in_community=c_t,
                freq_in_rest=rest.count(term),
                sparsity_target=sp_t,
                sparsity_partner=sp_p,
                weekly=log_weekly_series(term, weekly_target[term], weeks_start),
            )
        )
    return entries


def weekly_term_counts(
    posts: Sequence[PostRecord],
    stopwords: frozenset[str] | set[str],
    terms: set[str] | None = None,
) -> tuple[date, dict[str, np.ndarray]]:
    """Per-term counts over the ISO weeks spanned by the posts.

    When ``terms`` is given, only those terms are tracked. Returns the
    Monday of the first week and a term -> weekly-count-array mapping;
    weeks include every week between the first and last post.
    """
    if not posts:
        raise ValueError("no posts to bucket into weeks")
    days = [p.day for p in posts]
    first = min(days)
    last = max(days)
    start = first - timedelta(days=first.weekday())
    n_weeks = ((last - start).days // 7) + 1
    out: dict[str, np.ndarray] = {}
    for post in posts:
        week = (post.day - start).days // 7
        for term in term_stream(post.text, stopwords):
            if terms is not None and term not in terms:
                continue
            if term not in out:
                out[term] = np.zeros(n_weeks)
            out[term][week] += 1.0
    return start, out
