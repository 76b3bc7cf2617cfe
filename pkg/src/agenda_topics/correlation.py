"""Rank correlations of topic salience between corpora."""

import logging
from itertools import combinations_with_replacement
from typing import Literal, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from agenda_topics.errors import DataError
from agenda_topics.state_analysis import CorrelationEntry, SalienceTable

# Set up logger for this module
logger = logging.getLogger("agenda.stats")

EXACT_MAX_N = 10

SpearmanMethod = Literal["t", "exact"]


def significance_stars(p_value: Optional[float]) -> str:
    """Return ``***``, ``**`` or ``*`` at the 0.001, 0.01 and 0.05 levels."""
    if p_value is None or np.isnan(p_value):
        return ""
    if p_value < 0.001:
        return "***"
    if p_value < 0.01:
        return "**"
    if p_value < 0.05:
        return "*"
    return ""


def spearman_rho(
    x: Sequence[float],
    y: Sequence[float],
    method: SpearmanMethod = "t",
) -> tuple[Optional[float], Optional[float]]:
    """Spearman's rho with average ranks for ties and a two-sided p-value.

    Args:
        x: First sample
        y: Second sample, same length, at least 3
        method: ``"t"`` for the t approximation with n-2 degrees of freedom,
            ``"exact"`` for the full permutation distribution (n ≤ 10)

    Returns:
        ``(rho, p)``, both None when either input is constant
    """
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    n = len(x)
    if len(y) != n:
        raise DataError(f"Samples differ in length ({n} vs {len(y)})")
    if n < 3:
        raise DataError(f"Spearman's rho needs at least 3 pairs, got {n}")

    rx, ry = stats.rankdata(x), stats.rankdata(y)
    if np.ptp(rx) == 0 or np.ptp(ry) == 0:
        logger.warning("Constant input; Spearman's rho is undefined")
        return None, None

    ry_c = ry - ry.mean()
    ry_norm = np.sqrt(np.sum(ry_c**2))

    def rank_corr(r: np.ndarray, axis: int = -1) -> np.ndarray:
        r_c = r - r.mean(axis=axis, keepdims=True)
        return np.sum(r_c * ry_c, axis=axis) / (np.sqrt(np.sum(r_c**2, axis=axis)) * ry_norm)

    rho = float(np.clip(rank_corr(rx), -1.0, 1.0))

    if method == "exact":
        if n > EXACT_MAX_N:
            raise DataError(f"Exact permutation p-values are limited to n ≤ {EXACT_MAX_N}, got {n}")
        result = stats.permutation_test(
            (rx,), rank_corr, vectorized=True, permutation_type="pairings",
            n_resamples=np.inf, alternative="two-sided",
        )
        return rho, float(result.pvalue)

    if abs(rho) >= 1.0:
        return rho, 0.0
    t = rho * np.sqrt((n - 2) / (1.0 - rho**2))
    return rho, float(2.0 * stats.t.sf(abs(t), n - 2))


def rank_correlation_matrix(salience: SalienceTable, method: SpearmanMethod = "t") -> list[CorrelationEntry]:
    """Spearman correlation of salience for every pair of corpora, diagonal included.

    Pairs with the labeled corpus use the topics that have a labeled value
    (the seed topics); other pairs use every retained topic.
    """
    frame = salience.percentages
    entries = []
    for a, b in combinations_with_replacement(salience.corpora, 2):
        pair = frame[[a]].join(frame[[b]], rsuffix="_b") if a == b else frame[[a, b]]
        pair = pair.dropna()
        n = len(pair)
        entry = CorrelationEntry(corpus_a=a, corpus_b=b, n=n, method=method)
        if a in salience.undefined_corpora or b in salience.undefined_corpora:
            entry.note = "undefined salience column"
        elif n < 3:
            entry.note = f"only {n} topics"
        else:
            pair_method: SpearmanMethod = method if n <= EXACT_MAX_N else "t"
            rho, p = spearman_rho(pair.iloc[:, 0].to_numpy(), pair.iloc[:, 1].to_numpy(), pair_method)
            entry.method = pair_method
            if rho is None:
                entry.note = "constant salience"
            else:
                entry.rho, entry.p_value, entry.stars = rho, p, significance_stars(p)
        entries.append(entry)
    logger.info(f"Computed {len(entries)} rank correlations over {len(salience.corpora)} corpora")
    return entries


def correlation_table(entries: Sequence[CorrelationEntry]) -> pd.DataFrame:
    """Long-form table of correlation entries."""
    return pd.DataFrame([e.model_dump() for e in entries], columns=list(CorrelationEntry.model_fields))
