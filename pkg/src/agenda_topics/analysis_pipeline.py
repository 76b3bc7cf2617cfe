"""Agenda Analysis Workflow.

This module runs every analysis on a fitted model state as one workflow:
- Topic pruning and top words, with a labeling report for new topics
- Topic metadata resolution
- Salience table and rank correlations
- Cosine-similarity grid and the cell regressions
- Daily volume series when raw records are available
- Writing the analysis bundle
"""

import logging
from pathlib import Path

import pandas as pd
from langgraph.graph import END, START, StateGraph

from agenda_topics import templates
from agenda_topics.analytics import (
    cosine_similarity_grid,
    labeling_samples,
    prune_topics,
    resolve_topic_meta,
    top_words,
    topic_salience,
    volume_frame,
)
from agenda_topics.configuration import RunConfig
from agenda_topics.correlation import correlation_table, rank_correlation_matrix
from agenda_topics.errors import DataError, RankDeficiencyError
from agenda_topics.regression import build_regression_frame, coefficient_table, fit_models
from agenda_topics.report import render_top_words
from agenda_topics.state_analysis import AnalysisState
from agenda_topics.utils import write_jsonl, write_table

# Set up logger for this module
logger = logging.getLogger("agenda.analysis")


def _header(state: AnalysisState, kind: str) -> dict:
    return {**state.get("header", {}), "kind": kind}


def _write_text(path: Path, header: dict, body: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for key, value in header.items():
            f.write(f"# {key}: {value}\n")
        f.write("\n" + body)

# ===== TOPICS =====

def prune(state: AnalysisState) -> dict:
    """Drop new topics below the smallest seed topic."""
    model_state = state["model_state"]
    config: RunConfig = state["config"]  # type: ignore[assignment]
    result = prune_topics(model_state, config.labeled_corpus, enabled=config.analysis.prune)
    message = templates.pruning_summary.format(
        threshold=result.threshold,
        n_dropped=len(result.dropped),
        residual=result.residual_docs,
        unlabeled=result.unlabeled_docs,
        n_retained=len(result.retained),
    )
    return {"prune": result, "retained": result.retained, "warnings": [] if not result.dropped else [message]}


def describe_topics(state: AnalysisState) -> dict:
    """Top words for every retained topic plus the labeling report for new ones."""
    model_state = state["model_state"]
    config: RunConfig = state["config"]  # type: ignore[assignment]
    vocabulary = state["vocabulary"]
    n = config.analysis.top_n
    words = {k: top_words(model_state, vocabulary, k, n) for k in state["retained"]}

    new_topics = [k for k in state["retained"] if not model_state.is_seed(k)]
    if not new_topics:
        return {"top_words": words}

    texts = {r.id: r.text for r in state.get("records") or []}
    by_id = {doc.id: doc for doc in model_state.docs}
    blocks = [templates.labeling_instructions]
    for k in new_topics:
        samples = []
        for doc_id in labeling_samples(model_state, k, config.analysis.sample_docs, config.model.rng_seed):
            doc = by_id[doc_id]
            text = texts.get(doc_id) or " ".join(vocabulary.terms[t] for t in doc.tokens)
            samples.append(templates.labeling_sample_line.format(corpus=doc.corpus, text=" ".join(text.split())))
        blocks.append(
            templates.labeling_topic_block.format(
                topic_id=k,
                n_docs=model_state.doc_count(k),
                words=", ".join(words[k].terms),
                samples="\n".join(samples),
            )
        )
    path = state["output_dir"] / "new_topics_for_labeling.txt"
    _write_text(path, _header(state, "labeling"), "\n".join(blocks))
    logger.info(f"Wrote labeling report for {len(new_topics)} new topics to {path}")
    return {"top_words": words, "written": [str(path)]}


def resolve_metadata(state: AnalysisState) -> dict:
    """Attach labels and types; fails when a retained new topic is unlabeled."""
    seed_meta = state.get("seed_meta", {})
    new_meta = state.get("topic_metadata") or {}
    metas = resolve_topic_meta(state["retained"], seed_meta, new_meta, state["top_words"])
    return {"topic_meta": {m.topic_id: m for m in metas}}

# ===== SALIENCE AND CORRELATION =====

def salience(state: AnalysisState) -> dict:
    """Percentages of each corpus per retained topic."""
    config: RunConfig = state["config"]  # type: ignore[assignment]
    table = topic_salience(state["model_state"], state["retained"], config.labeled_corpus)
    warnings = [f"Salience undefined for corpus {c} (no documents in retained topics)" for c in table.undefined_corpora]
    return {"salience": table, "warnings": warnings}


def correlations(state: AnalysisState) -> dict:
    """Spearman correlations of the salience columns."""
    return {"correlations": rank_correlation_matrix(state["salience"])}

# ===== SIMILARITY AND REGRESSION =====

def similarity(state: AnalysisState) -> dict:
    """Per-topic cosine similarities between corpus pairs."""
    config: RunConfig = state["config"]  # type: ignore[assignment]
    metas = [state["topic_meta"][k] for k in state["retained"]]
    return {"similarity": cosine_similarity_grid(state["model_state"], config.corpora, metas)}


def regressions(state: AnalysisState) -> dict:
    """Fit the cell regressions; too few cells is reported rather than fatal."""
    config: RunConfig = state["config"]  # type: ignore[assignment]
    frame, _ = build_regression_frame(state["similarity"].cells)
    try:
        results = fit_models(frame, hc=config.analysis.hc, subsets=config.analysis.subsets)
    except RankDeficiencyError:
        raise
    except DataError as e:
        logger.warning(f"Regressions skipped: {e}")
        return {"regressions": [], "warnings": [f"Regressions skipped: {e}"]}
    return {"regressions": results}


def volume(state: AnalysisState) -> dict:
    """Daily raw-record counts per corpus, when records are available."""
    records = state.get("records")
    if not records:
        return {"volume": None}
    config: RunConfig = state["config"]  # type: ignore[assignment]
    frame, _ = volume_frame(records, config.corpus_names)
    return {"volume": frame}

# ===== OUTPUT =====

def write_bundle(state: AnalysisState) -> dict:
    """Write every analysis table with run headers."""
    out = state["output_dir"]
    config: RunConfig = state["config"]  # type: ignore[assignment]
    model_state = state["model_state"]
    written: list[Path] = []

    prune_result = state["prune"]
    path = out / "pruning.jsonl"
    write_jsonl(path, [prune_result], header=_header(state, "pruning"))
    written.append(path)

    metas = [state["topic_meta"][k] for k in state["retained"]]
    topics = pd.DataFrame(
        [
            {"topic_id": m.topic_id, "label": m.label, "origin": m.origin, "type": m.topic_type,
             "documents": model_state.doc_count(m.topic_id), "tokens": model_state.token_total(m.topic_id)}
            for m in metas
        ],
        columns=["topic_id", "label", "origin", "type", "documents", "tokens"],
    )
    write_table(out / "topics.csv", topics, _header(state, "topics"))
    written.append(out / "topics.csv")

    words = pd.DataFrame(
        [
            {"topic_id": k, "rank": r + 1, "term": term, "score": score}
            for k, tw in state["top_words"].items()
            for r, (term, score) in enumerate(zip(tw.terms, tw.scores))
        ],
        columns=["topic_id", "rank", "term", "score"],
    )
    write_table(out / "top_words.csv", words, _header(state, "top_words"))
    _write_text(
        out / "top_words.txt",
        _header(state, "top_words"),
        render_top_words([(m.label, state["top_words"][m.topic_id].terms) for m in metas]),
    )
    written += [out / "top_words.csv", out / "top_words.txt"]

    table = state["salience"]
    labels = {m.topic_id: m for m in metas}
    salience_frame = table.percentages.copy()
    salience_frame.insert(0, "label", [labels[k].label for k in salience_frame.index])
    salience_frame.insert(1, "origin", [labels[k].origin for k in salience_frame.index])
    salience_frame.insert(2, "type", [labels[k].topic_type for k in salience_frame.index])
    salience_header = {**_header(state, "salience"), "undefined_corpora": ",".join(table.undefined_corpora)}
    write_table(out / "salience.csv", salience_frame.reset_index(), salience_header)
    write_table(out / "salience_counts.csv", table.counts.reset_index(), _header(state, "salience_counts"))
    written += [out / "salience.csv", out / "salience_counts.csv"]

    correlation_header = {**_header(state, "correlations"), "labeled_corpus": config.labeled_corpus or "", "method": "spearman"}
    write_table(out / "correlations.csv", correlation_table(state["correlations"]), correlation_header)
    written.append(out / "correlations.csv")

    grid = state["similarity"]
    write_table(out / "similarity.csv", grid.frame(), {**_header(state, "similarity"), "topic_order": " ".join(map(str, grid.topic_order))})
    write_jsonl(out / "similarity.jsonl", grid.cells, header=_header(state, "similarity"))
    omitted = pd.DataFrame([o.model_dump() for o in grid.omitted], columns=["topic_id", "corpus_a", "corpus_b", "reason"])
    write_table(out / "similarity_omitted.csv", omitted, _header(state, "similarity_omitted"))
    frame, excluded = build_regression_frame(grid.cells)
    write_table(out / "regression_frame.csv", frame, {**_header(state, "regression_frame"), "excluded_cells": excluded})
    written += [out / "similarity.csv", out / "similarity.jsonl", out / "similarity_omitted.csv", out / "regression_frame.csv"]

    results = state.get("regressions", [])
    if results:
        coefficients = pd.concat(
            [coefficient_table(r).assign(model=r.model, subset=r.subset, hc=r.hc) for r in results],
            ignore_index=True,
        )
        coefficients = coefficients[["model", "subset", "hc", "name", "estimate", "std_error", "t_value", "p_value", "stars"]]
        fits = pd.DataFrame(
            [
                {"model": r.model, "subset": r.subset, "hc": r.hc, "r_squared": r.r_squared,
                 "adj_r_squared": r.adj_r_squared, "n_obs": r.n_obs, "dropped": " ".join(r.dropped_predictors)}
                for r in results
            ]
        )
        regression_header = {**_header(state, "regressions"), "hc": config.analysis.hc}
        write_table(out / "regressions.csv", coefficients, regression_header)
        write_table(out / "regression_fit.csv", fits, regression_header)
        write_jsonl(out / "regressions.jsonl", results, header=regression_header)
        written += [out / "regressions.csv", out / "regression_fit.csv", out / "regressions.jsonl"]
        for r in results:
            path = out / f"regression_{r.model}_{r.subset}.csv"
            write_table(path, coefficient_table(r), {**regression_header, "model": r.model, "subset": r.subset,
                                                     "r_squared": f"{r.r_squared:.10g}", "n_obs": r.n_obs})
            written.append(path)

    volume_frame_ = state.get("volume")
    if volume_frame_ is not None:
        write_table(out / "daily_volume.csv", volume_frame_.reset_index(), _header(state, "daily_volume"))
        events = pd.DataFrame([e.model_dump() for e in config.analysis.events], columns=["day", "label"])
        write_table(out / "events.csv", events, _header(state, "events"))
        written += [out / "daily_volume.csv", out / "events.csv"]

    logger.info(f"Wrote {len(written)} analysis files to {out}")
    return {"written": [str(p) for p in written]}

# ===== GRAPH CONSTRUCTION =====

# Build the analysis workflow
analysis_builder = StateGraph(AnalysisState)

# Add workflow nodes
analysis_builder.add_node("prune", prune)
analysis_builder.add_node("describe_topics", describe_topics)
analysis_builder.add_node("resolve_metadata", resolve_metadata)
analysis_builder.add_node("salience", salience)
analysis_builder.add_node("correlations", correlations)
analysis_builder.add_node("similarity", similarity)
analysis_builder.add_node("regressions", regressions)
analysis_builder.add_node("volume", volume)
analysis_builder.add_node("write_bundle", write_bundle)

# Add workflow edges
analysis_builder.add_edge(START, "prune")
analysis_builder.add_edge("prune", "describe_topics")
analysis_builder.add_edge("describe_topics", "resolve_metadata")
analysis_builder.add_edge("resolve_metadata", "salience")
analysis_builder.add_edge("salience", "correlations")
analysis_builder.add_edge("correlations", "similarity")
analysis_builder.add_edge("similarity", "regressions")
analysis_builder.add_edge("regressions", "volume")
analysis_builder.add_edge("volume", "write_bundle")
analysis_builder.add_edge("write_bundle", END)

# Compile the workflow
analysis_pipeline = analysis_builder.compile()
