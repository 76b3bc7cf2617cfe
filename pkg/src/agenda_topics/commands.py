"""Command implementations behind the command-line surface.

Each command takes an effective RunConfig, reads its inputs from the
configured paths or the output directory, writes stamped outputs and
returns a CommandResult whose summary the CLI prints to standard output.
"""

import logging
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, Field

from agenda_topics import templates
from agenda_topics.analysis_pipeline import analysis_pipeline
from agenda_topics.analytics import load_topic_metadata, seed_topic_meta
from agenda_topics.configuration import (
    RunConfig,
    build_preprocess_config,
    check_paths,
    config_hash,
    ensure_output_dir,
    run_id,
)
from agenda_topics.errors import ConfigurationError, DataError, InvariantViolation
from agenda_topics.persistence import (
    load_state,
    read_documents,
    read_header,
    read_vocabulary,
    save_state,
    vocabulary_hash,
    write_documents,
    write_vocabulary,
)
from agenda_topics.report import render_bundle
from agenda_topics.sampler import log_joint, run_inference
from agenda_topics.state_model import SweepDiagnostics
from agenda_topics.state_text import RawRecord, TokenDocument, VocabularyIndex
from agenda_topics.text_pipeline import load_records, load_seed_scheme, preprocess_pipeline
from agenda_topics.utils import file_sha256, iter_jsonl, make_header, write_jsonl

# Set up logger for this module
logger = logging.getLogger("agenda.commands")

DOCUMENTS_FILE = "documents.jsonl"
VOCABULARY_FILE = "vocabulary.jsonl"
PREPROCESS_REPORT_FILE = "preprocess_report.jsonl"
STATE_FILE = "state.json"
DIAGNOSTICS_FILE = "diagnostics.jsonl"
ANALYSIS_DIR = "analysis"


class CommandResult(BaseModel):
    """What a command did, for the CLI to print."""

    command: str
    run_id: str
    summary: str = ""
    written: list[Path] = Field(default_factory=list)
    passed: bool = True


def run_header(config: RunConfig, kind: str, **extra: object) -> dict:
    """Header block for an output of this run."""
    return make_header(kind, run_id(config), config_hash(config), config.model.rng_seed, **extra)

# ===== HELPER FUNCTIONS =====

def _load_corpus(out: Path) -> tuple[list[TokenDocument], VocabularyIndex, dict]:
    documents_path = out / DOCUMENTS_FILE
    vocabulary_path = out / VOCABULARY_FILE
    for path in (documents_path, vocabulary_path):
        if not path.exists():
            raise ConfigurationError(f"{path} not found; run the preprocess command first")
    docs = read_documents(documents_path)
    vocabulary = read_vocabulary(vocabulary_path)
    header = read_header(documents_path)
    if not docs:
        raise DataError(f"{documents_path} holds no documents")
    return docs, vocabulary, header


def _n_seed(docs: list[TokenDocument], header: dict) -> int:
    if "n_seed" in header:
        return int(header["n_seed"])
    return max((d.seed_topic or 0 for d in docs), default=0)


def _warn_on_provenance(config: RunConfig, header: dict, what: str) -> None:
    current = config_hash(config)
    if header.get("config_hash") not in (None, current):
        logger.warning(f"{what} were produced under config hash {header['config_hash']}, current config hash is {current}")
    elif header.get("seed") is not None and header["seed"] != config.model.rng_seed:
        logger.warning(
            f"Seed {config.model.rng_seed} differs from seed {header['seed']} of the {what.lower()}; "
            f"config hash {current} is unchanged"
        )

# ===== PREPROCESS =====

def cmd_preprocess(config: RunConfig) -> CommandResult:
    """Run the text pipeline and write token documents, vocabulary and bookkeeping."""
    check_paths(config, "records")
    out = ensure_output_dir(config)
    records_path = config.resolve(config.paths.records)
    records = load_records(records_path)  # type: ignore[arg-type]

    unknown = sorted({r.corpus for r in records} - set(config.corpus_names))
    if unknown:
        raise DataError(f"{records_path}: records belong to unconfigured corpora {unknown}")

    scheme = None
    if config.paths.seed_scheme is not None:
        check_paths(config, "seed_scheme")
        scheme = load_seed_scheme(config.resolve(config.paths.seed_scheme))  # type: ignore[arg-type]

    preprocess_config = build_preprocess_config(config)
    result = preprocess_pipeline.invoke({
        "records": records,
        "config": preprocess_config,
        "scheme": scheme,
        "labeled_corpus": config.labeled_corpus or "",
    })
    documents = result["documents"]
    vocabulary = result["vocabulary"]
    if not documents:
        raise ConfigurationError("Every document was rejected; check the stop word lists and length thresholds")

    header = run_header(
        config,
        "documents",
        records_sha256=file_sha256(records_path),  # type: ignore[arg-type]
        n_seed=scheme.n_topics if scheme is not None else 0,
        vocab_hash=vocabulary_hash(vocabulary),
    )
    write_documents(out / DOCUMENTS_FILE, documents, header)
    write_vocabulary(out / VOCABULARY_FILE, vocabulary, run_header(config, "vocabulary"))

    bookkeeping = result["bookkeeping"]
    report_rows: list[dict] = [
        {"section": "corpus", "corpus": name, **book.model_dump()} for name, book in sorted(bookkeeping.items())
    ]
    report_rows += [{"section": "balance", **r.model_dump()} for r in result.get("balance_reports", [])]
    report_rows += [{"section": "excluded_code", "code": code, "records": n} for code, n in result.get("excluded_codes", {}).items()]
    write_jsonl(out / PREPROCESS_REPORT_FILE, report_rows, header=run_header(config, "preprocess_report"))

    lines = [
        templates.corpus_bookkeeping_line.format(corpus=name, **bookkeeping[name].model_dump())
        for name in config.corpus_names
        if name in bookkeeping
    ]
    parts = [
        templates.corpus_size_part.format(documents=bookkeeping[name].documents, corpus=name)
        for name in config.corpus_names
        if name in bookkeeping
    ]
    lines.append(templates.corpus_sizes_sentence.format(parts=", ".join(parts)))
    if result.get("excluded_codes"):
        codes = ", ".join(f"{code} ({n})" for code, n in result["excluded_codes"].items())
        lines.append(templates.excluded_codes_line.format(total=sum(result["excluded_codes"].values()), codes=codes))
    lines.append(templates.vocabulary_line.format(size=vocabulary.size, vocab_hash=vocabulary_hash(vocabulary)))
    for warning in result.get("warnings", []):
        logger.warning(warning)

    return CommandResult(
        command="preprocess",
        run_id=run_id(config),
        summary="\n".join(lines),
        written=[out / DOCUMENTS_FILE, out / VOCABULARY_FILE, out / PREPROCESS_REPORT_FILE],
    )

# ===== TRAIN =====

def cmd_train(config: RunConfig, resume: Optional[Path] = None) -> CommandResult:
    """Fit the model and write the state file and the diagnostics stream.

    Args:
        config: Effective configuration
        resume: State file to continue from; it is replay-verified first and
            its stored RNG stream continues
    """
    out = ensure_output_dir(config)
    docs, vocabulary, doc_header = _load_corpus(out)
    _warn_on_provenance(config, doc_header, "Documents")
    vocab_hash = vocabulary_hash(vocabulary)
    n_seed = _n_seed(docs, doc_header)
    params = config.model

    previous: list[dict] = []
    resume_from = None
    if resume is not None:
        state, rng, state_header = load_state(resume, docs, vocab_hash)
        _warn_on_provenance(config, state_header, "Resumed state")
        for name in ("alpha", "beta", "likelihood_mode"):
            if getattr(state.params, name) != getattr(params, name):
                raise ConfigurationError(
                    f"Cannot resume with {name}={getattr(params, name)}; the state was fitted with {getattr(state.params, name)}"
                )
        state.params = state.params.model_copy(update={"sweeps": params.sweeps, "shuffle_sweeps": params.shuffle_sweeps})
        resume_from = (state, rng)
        if (out / DIAGNOSTICS_FILE).exists():
            previous = [obj for _, obj in iter_jsonl(out / DIAGNOSTICS_FILE)]

    try:
        result = run_inference(
            docs,
            params,
            vocabulary.size,
            n_seed,
            corpora=config.corpus_names,
            resume=resume_from,
        )
    except InvariantViolation as e:
        logger.error(f"Training stopped: {e}", exc_info=True)
        raise

    state = result.state
    header = run_header(
        config,
        "model_state",
        alpha=params.alpha,
        beta=params.beta,
        sweeps=state.sweeps_completed,
        likelihood_mode=params.likelihood_mode,
        vocab_hash=vocab_hash,
    )
    save_state(out / STATE_FILE, state, result.rng, vocab_hash, header)
    diagnostics: list[SweepDiagnostics | dict] = [*previous, *result.diagnostics]
    write_jsonl(out / DIAGNOSTICS_FILE, diagnostics, header={**header, "kind": "diagnostics"})

    final = log_joint(state)
    summary = templates.train_summary.format(
        sweeps=state.sweeps_completed,
        mode=params.likelihood_mode,
        alpha=params.alpha,
        beta=params.beta,
        seed=params.rng_seed,
        n_topics=state.n_topics,
        n_seed=state.n_seed,
        n_new=state.n_new_topics,
        log_joint=final,
        state_path=out / STATE_FILE,
    )
    return CommandResult(
        command="train",
        run_id=run_id(config),
        summary=summary,
        written=[out / STATE_FILE, out / DIAGNOSTICS_FILE],
    )

# ===== ANALYZE =====

def cmd_analyze(config: RunConfig, state_path: Optional[Path] = None) -> CommandResult:
    """Run every analysis on a fitted state and write the report bundle."""
    out = ensure_output_dir(config)
    docs, vocabulary, _ = _load_corpus(out)
    state, _, state_header = load_state(state_path or out / STATE_FILE, docs, vocabulary_hash(vocabulary))
    _warn_on_provenance(config, state_header, "Model state")

    records: Optional[list[RawRecord]] = None
    records_path = config.resolve(config.paths.records)
    if records_path is not None and records_path.exists():
        records = load_records(records_path)
    else:
        logger.info("No records file available; labeling samples use token text and the volume series is skipped")

    scheme = None
    if config.paths.seed_scheme is not None:
        check_paths(config, "seed_scheme")
        scheme = load_seed_scheme(config.resolve(config.paths.seed_scheme))  # type: ignore[arg-type]
    metadata = {}
    if config.paths.topic_metadata is not None:
        metadata = load_topic_metadata(config.resolve(config.paths.topic_metadata))  # type: ignore[arg-type]

    bundle = out / ANALYSIS_DIR
    bundle.mkdir(parents=True, exist_ok=True)
    result = analysis_pipeline.invoke({
        "model_state": state,
        "vocabulary": vocabulary,
        "config": config,
        "header": run_header(config, "analysis"),
        "records": records,
        "seed_meta": seed_topic_meta(scheme, state.n_seed),
        "topic_metadata": metadata,
        "output_dir": bundle,
    })
    for warning in result.get("warnings", []):
        logger.warning(warning)

    grid = result["similarity"]
    retained = result["retained"]
    summary = templates.analysis_summary.format(
        output_dir=bundle,
        n_retained=len(retained),
        n_new=sum(1 for k in retained if not state.is_seed(k)),
        n_cells=len(grid.cells),
        n_omitted=len(grid.omitted),
        n_models=len(result.get("regressions", [])),
    )
    return CommandResult(
        command="analyze",
        run_id=run_id(config),
        summary=summary,
        written=[Path(p) for p in result.get("written", [])],
    )

# ===== REPORT =====

def cmd_report(config: RunConfig, bundle: Optional[Path] = None) -> CommandResult:
    """Render an analysis bundle as plain-text tables."""
    bundle = bundle or config.output_dir / ANALYSIS_DIR
    return CommandResult(command="report", run_id=run_id(config), summary=render_bundle(bundle))

# ===== VALIDATE =====

def cmd_validate(config: RunConfig, quick: bool = False, inject_fault: bool = False) -> CommandResult:
    """Run the acceptance suite and print its pass/fail table.

    With ``inject_fault`` the count tables are corrupted during the fuzzing
    check and the resulting InvariantViolation propagates.
    """
    from agenda_topics.validation import run_validation, validation_table

    results = run_validation(quick=quick, inject_fault=inject_fault, seed=config.model.rng_seed)
    out = ensure_output_dir(config)
    path = out / "validation.jsonl"
    write_jsonl(path, results, header=run_header(config, "validation", quick=quick))
    return CommandResult(
        command="validate",
        run_id=run_id(config),
        summary=validation_table(results),
        written=[path],
        passed=all(r.passed for r in results),
    )
