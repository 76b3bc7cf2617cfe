"""Plain-text rendering of an analysis bundle.

Each function takes the tables as written to the bundle (so ``report`` can
rebuild the text from files alone) and returns a string.
"""

import logging
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from agenda_topics import templates
from agenda_topics.errors import ConfigurationError
from agenda_topics.utils import read_table, read_table_header

# Set up logger for this module
logger = logging.getLogger("agenda.analysis")

BUNDLE_TABLES = {
    "topics": "topics.csv",
    "top_words": "top_words.csv",
    "salience": "salience.csv",
    "correlations": "correlations.csv",
    "regressions": "regressions.csv",
    "regression_fit": "regression_fit.csv",
}


def _cell(value: object, fmt: str = "{:.1f}") -> str:
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return ""
    return fmt.format(value)


def render_top_words(rows: Sequence[tuple[str, Sequence[str]]]) -> str:
    """Label followed by the top terms, one topic per line."""
    lines = [templates.top_words_title, ""]
    lines += [templates.top_words_line.format(label=label, words=", ".join(words)) for label, words in rows]
    return "\n".join(lines) + "\n"


def render_salience(salience: pd.DataFrame, corpora: Sequence[str]) -> str:
    """Topic rows, corpus columns, one decimal; undefined cells blank."""
    table = pd.DataFrame({"Topic": salience["label"]})
    for corpus in corpora:
        table[corpus] = [_cell(v) for v in salience[corpus]]
    return templates.salience_title + "\n\n" + table.to_string(index=False) + "\n"


def render_correlations(entries: pd.DataFrame, corpora: Sequence[str], labeled: str | None = None) -> str:
    """Lower-triangular matrix of rho with significance stars."""
    lookup = {}
    for row in entries.itertuples(index=False):
        text = "" if pd.isna(row.rho) else f"{row.rho:.2f}{row.stars if isinstance(row.stars, str) else ''}"
        lookup[(row.corpus_a, row.corpus_b)] = lookup[(row.corpus_b, row.corpus_a)] = text
    table = pd.DataFrame(
        [[lookup.get((a, b), "") if j <= i else "" for j, b in enumerate(corpora)] for i, a in enumerate(corpora)],
        index=list(corpora),
        columns=list(corpora),
    )
    out = templates.correlation_title + "\n\n" + table.to_string() + "\n"
    if labeled is not None and len(entries):
        n_seed = entries.loc[(entries.corpus_a == labeled) & (entries.corpus_b == labeled), "n"]
        others = entries.loc[(entries.corpus_a != labeled) & (entries.corpus_b != labeled), "n"]
        if len(n_seed) and len(others):
            out += templates.correlation_note.format(labeled=labeled, n_seed=int(n_seed.iloc[0]), n_all=int(others.max())) + "\n"
    return out


def render_regressions(coefficients: pd.DataFrame, fits: pd.DataFrame, subset: str = "all") -> str:
    """Side-by-side models, ``estimate (se)`` per cell, fit statistics below."""
    coefficients = coefficients[coefficients["subset"] == subset]
    fits = fits[fits["subset"] == subset]
    if coefficients.empty:
        return ""
    models = list(dict.fromkeys(coefficients["model"]))
    names = list(dict.fromkeys(coefficients["name"]))
    body = {}
    for model in models:
        rows = coefficients[coefficients["model"] == model].set_index("name")
        column = []
        for name in names:
            if name in rows.index:
                r = rows.loc[name]
                stars = r["stars"] if isinstance(r["stars"], str) else ""
                column.append(f"{r['estimate']:.2f}{stars} ({r['std_error']:.2f})")
            else:
                column.append("")
        fit = fits[fits["model"] == model].iloc[0]
        column += [f"{fit['r_squared']:.2f}", f"{fit['adj_r_squared']:.2f}", f"{int(fit['n_obs'])}"]
        body[model] = column
    table = pd.DataFrame(body, index=names + ["R2", "Adj. R2", "N"])
    hc = fits["hc"].iloc[0] if len(fits) else "HC1"
    title = templates.regression_title.format(hc=hc)
    if subset != "all":
        title += f" [{subset} topics]"
    return title + "\n\n" + table.to_string() + "\n" + templates.regression_footer + "\n"


def render_bundle(bundle_dir: Path) -> str:
    """Render the tables of a written analysis bundle."""
    missing = [name for name in BUNDLE_TABLES.values() if not (bundle_dir / name).exists()]
    if len(missing) == len(BUNDLE_TABLES):
        raise ConfigurationError(f"No analysis bundle found in {bundle_dir}")
    parts = []
    topics = read_table(bundle_dir / "topics.csv") if (bundle_dir / "topics.csv").exists() else None

    if topics is not None and (bundle_dir / "top_words.csv").exists():
        words = read_table(bundle_dir / "top_words.csv")
        labels = dict(zip(topics["topic_id"], topics["label"]))
        grouped = words.sort_values(["topic_id", "rank"]).groupby("topic_id", sort=False)["term"].apply(list)
        parts.append(render_top_words([(labels.get(k, str(k)), terms) for k, terms in grouped.items()]))

    corpora: list[str] = []
    if (bundle_dir / "salience.csv").exists():
        salience = read_table(bundle_dir / "salience.csv")
        corpora = [c for c in salience.columns if c not in ("topic_id", "label", "origin", "type")]
        parts.append(render_salience(salience, corpora))

    if (bundle_dir / "correlations.csv").exists():
        entries = read_table(bundle_dir / "correlations.csv")
        corpora = corpora or list(dict.fromkeys([*entries["corpus_a"], *entries["corpus_b"]]))
        labeled = read_table_header(bundle_dir / "correlations.csv").get("labeled_corpus") or None
        parts.append(render_correlations(entries, corpora, labeled))

    if (bundle_dir / "regressions.csv").exists() and (bundle_dir / "regression_fit.csv").exists():
        coefficients = read_table(bundle_dir / "regressions.csv")
        fits = read_table(bundle_dir / "regression_fit.csv")
        for subset in ("all", "seed", "new"):
            text = render_regressions(coefficients, fits, subset)
            if text:
                parts.append(text)

    for name in missing:
        logger.warning(f"Bundle table {name} not found in {bundle_dir}")
    return "\n".join(parts)
