"""Regression of per-topic cosine similarities on corpus-pair covariates.

OLS is solved through a column-pivoted QR decomposition; standard errors
use a heteroskedasticity-consistent sandwich (HC0 to HC3, HC1 by default).
"""

import logging
from typing import Iterable, Literal, Sequence

import numpy as np
import pandas as pd
from scipy import linalg, stats

from agenda_topics.configuration import HCFlavor
from agenda_topics.correlation import significance_stars
from agenda_topics.errors import DataError, RankDeficiencyError
from agenda_topics.state_analysis import Coefficient, RegressionResult, SimilarityCell

# Set up logger for this module
logger = logging.getLogger("agenda.stats")

INTERCEPT = "const"

PREDICTOR_COLUMNS = [
    "survey", "fbpol", "twpol", "twaud", "log_tokens", "same_medium", "same_actor", "politics", "new",
]

_BASE = ["survey", "log_tokens", "same_medium", "same_actor", "politics", "new"]


def _ordered(names: Iterable[str]) -> list[str]:
    chosen = set(names)
    return [c for c in PREDICTOR_COLUMNS if c in chosen]


MODEL_SPECS: dict[str, list[str]] = {
    "model1": _ordered(_BASE),
    "model2": _ordered(_BASE + ["fbpol"]),
    "model3": _ordered(_BASE + ["fbpol", "twpol"]),
    "model4": _ordered(_BASE + ["twaud"]),
    "model5": _ordered(_BASE + ["twpol", "twaud"]),
}

# ===== DESIGN =====

def build_regression_frame(cells: Sequence[SimilarityCell]) -> tuple[pd.DataFrame, int]:
    """One row per cell: identifiers, the cosine response and every predictor.

    The token covariate is the natural log of the pair's combined token
    count. Cells with no tokens are excluded.

    Returns:
        The frame and the number of excluded cells
    """
    rows = []
    excluded = 0
    for cell in cells:
        if cell.token_total <= 0:
            excluded += 1
            continue
        rows.append({
            "topic_id": cell.topic_id,
            "corpus_a": cell.corpus_a,
            "corpus_b": cell.corpus_b,
            "cosine": cell.cosine,
            "survey": cell.survey_in_pair,
            "fbpol": cell.fbpol_in_pair,
            "twpol": cell.twpol_in_pair,
            "twaud": cell.twaud_in_pair,
            "log_tokens": float(np.log(cell.token_total)),
            "same_medium": cell.same_medium,
            "same_actor": cell.same_actor,
            "politics": cell.topic_is_politics,
            "new": cell.topic_is_new,
        })
    if excluded:
        logger.warning(f"Excluded {excluded} cells with no tokens from the regression frame")
    frame = pd.DataFrame(rows, columns=["topic_id", "corpus_a", "corpus_b", "cosine", *PREDICTOR_COLUMNS])
    return frame, excluded

# ===== ESTIMATION =====

def ols_hc_robust(
    frame: pd.DataFrame,
    predictors: Sequence[str],
    hc: HCFlavor = "HC1",
    response: str = "cosine",
    model: str = "model",
    subset: Literal["all", "seed", "new"] = "all",
) -> RegressionResult:
    """Fit OLS with an intercept and heteroskedasticity-consistent standard errors.

    Raises:
        DataError: If there are too few observations or the response is constant
        RankDeficiencyError: Naming the predictors that are linear
            combinations of the others
    """
    names = [INTERCEPT, *predictors]
    y = frame[response].to_numpy(dtype=float)
    X = np.column_stack([np.ones(len(frame)), frame[list(predictors)].to_numpy(dtype=float)]) if len(frame) else np.empty((0, len(names)))
    n, k = X.shape
    if n <= k:
        raise DataError(f"{model}: {n} observations for {k} coefficients")

    Q, R, piv = linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(n, k) * np.finfo(float).eps * diag[0]
    rank = int(np.sum(diag > tol))
    if rank < k:
        raise RankDeficiencyError([names[j] for j in piv[rank:]])

    beta = np.empty(k)
    beta[piv] = linalg.solve_triangular(R, Q.T @ y)
    resid = y - X @ beta

    r_inv = linalg.solve_triangular(R, np.eye(k))
    bread = np.empty((k, k))
    bread[np.ix_(piv, piv)] = r_inv @ r_inv.T

    leverage = np.sum(Q**2, axis=1)
    e2 = resid**2
    if hc == "HC0":
        omega = e2
    elif hc == "HC1":
        omega = e2 * n / (n - k)
    elif hc == "HC2":
        omega = e2 / (1.0 - leverage)
    else:
        omega = e2 / (1.0 - leverage) ** 2
    meat = (X * omega[:, None]).T @ X
    cov = bread @ meat @ bread
    se = np.sqrt(np.diag(cov))

    ssr = float(resid @ resid)
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0.0:
        raise DataError(f"{model}: response is constant")
    r2 = 1.0 - ssr / sst
    adj = 1.0 - (1.0 - r2) * (n - 1) / (n - k)

    with np.errstate(divide="ignore", invalid="ignore"):
        t_values = beta / se
    p_values = 2.0 * stats.t.sf(np.abs(t_values), n - k)
    coefficients = [
        Coefficient(
            name=name,
            estimate=float(b),
            std_error=float(s),
            t_value=float(t),
            p_value=float(p),
            stars=significance_stars(float(p)),
        )
        for name, b, s, t, p in zip(names, beta, se, t_values, p_values)
    ]
    logger.info(f"{model} ({subset}, {hc}): N={n}, R²={r2:.3f}")
    return RegressionResult(
        model=model, subset=subset, hc=hc, coefficients=coefficients,
        r_squared=float(r2), adj_r_squared=float(adj), n_obs=n,
    )


def fit_models(
    frame: pd.DataFrame,
    hc: HCFlavor = "HC1",
    subsets: bool = True,
    specs: dict[str, list[str]] | None = None,
) -> list[RegressionResult]:
    """Fit every model specification, optionally also on seed-only and new-only cells.

    Predictors that are constant within the fitted rows are dropped and
    listed in the result. A rank-deficient design on the full frame is an
    error; on a subset the fit is skipped with a warning.
    """
    specs = specs or MODEL_SPECS
    parts = [("all", frame)]
    if subsets:
        parts += [("seed", frame[frame["new"] == 0]), ("new", frame[frame["new"] == 1])]

    results = []
    for subset, rows in parts:
        if subset != "all" and rows.empty:
            logger.info(f"No {subset}-topic cells; skipping that subset")
            continue
        for model, predictors in specs.items():
            kept = [p for p in predictors if rows[p].nunique() > 1]
            dropped = [p for p in predictors if p not in kept]
            try:
                result = ols_hc_robust(rows, kept, hc=hc, model=model, subset=subset)  # type: ignore[arg-type]
            except DataError as e:
                if subset == "all":
                    raise
                logger.warning(f"{model} on {subset}-topic cells skipped: {e}")
                continue
            result.dropped_predictors = dropped
            if dropped:
                logger.info(f"{model} ({subset}): dropped constant predictors {dropped}")
            results.append(result)
    return results


def coefficient_table(result: RegressionResult) -> pd.DataFrame:
    """Coefficient rows of one fitted model."""
    return pd.DataFrame([c.model_dump() for c in result.coefficients], columns=list(Coefficient.model_fields))
