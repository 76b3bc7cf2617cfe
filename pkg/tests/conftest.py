"""Shared fixtures: tiny hand-checkable corpora and a ready output directory."""

import json
from pathlib import Path

import pytest
import yaml

from agenda_topics.configuration import load_config
from agenda_topics.model_state import ModelState
from agenda_topics.state_model import ModelParams
from agenda_topics.state_text import TokenDocument


def doc(doc_id: str, tokens: tuple[int, ...], corpus: str = "social", seed: int | None = None) -> TokenDocument:
    return TokenDocument(id=doc_id, corpus=corpus, tokens=tokens, seed_topic=seed)


@pytest.fixture
def conditional_state() -> tuple[ModelState, int]:
    """Two seed topics holding [a, a] and [b, b]; an unplaced query [a]; V=2, β=1.5, α=1."""
    docs = [
        doc("seed-a", (0, 0), corpus="survey", seed=1),
        doc("seed-b", (1, 1), corpus="survey", seed=2),
        doc("query", (0,)),
    ]
    state = ModelState(docs, ModelParams(alpha=1.0, beta=1.5), vocab_size=2, n_seed=2)
    for i in state.labeled_docs():
        state.add_doc(i, state.docs[i].seed_topic)
    return state, state.doc_index["query"]


@pytest.fixture
def enumeration_docs() -> list[TokenDocument]:
    """One labeled [a] in seed 1 plus unlabeled d1=[a], d2=[b] over V=2."""
    return [
        doc("labeled", (0,), corpus="survey", seed=1),
        doc("d1", (0,)),
        doc("d2", (1,)),
    ]


RECORDS = [
    # labeled survey answers
    {"id": "s1", "corpus": "survey", "text": "Steuern und Schulden senken", "seed_code": "4321"},
    {"id": "s2", "corpus": "survey", "text": "Steuern runter, Schulden runter", "seed_code": "4322"},
    {"id": "s3", "corpus": "survey", "text": "Euro retten, Schulden stoppen", "seed_code": "4331"},
    {"id": "s4", "corpus": "survey", "text": "Euro und Steuern", "seed_code": "4330"},
    {"id": "s5", "corpus": "survey", "text": "Weiss nicht", "seed_code": "9999"},
    # unlabeled posts
    {"id": "f1", "corpus": "facebook", "text": "Die Steuern muessen runter! https://example.org", "timestamp": "2013-09-01T10:00:00", "stratum": "a"},
    {"id": "f2", "corpus": "facebook", "text": "Schulden, Schulden, Schulden und Steuern", "timestamp": "2013-09-01T12:00:00", "stratum": "a"},
    {"id": "f3", "corpus": "facebook", "text": "Der Euro und die Schulden @someone", "timestamp": "2013-09-02", "stratum": "b"},
    {"id": "t1", "corpus": "twitter", "text": "Euro Euro Steuern runter", "timestamp": "2013-09-02", "stratum": "a"},
    {"id": "t2", "corpus": "twitter", "text": "Steuern runter, Euro retten, Schulden", "timestamp": "2013-09-03", "stratum": "b"},
    {"id": "t3", "corpus": "twitter", "text": "ok", "timestamp": "2013-09-03", "stratum": "b"},
]

SCHEME = "pattern,label,type\n432X,Taxes,policy\n431X,Budget & Debt,policy\n433X,Currency & Euro,policy\n"


@pytest.fixture
def run_dir(tmp_path: Path) -> Path:
    """A config directory with records, seed scheme and run.yaml for three corpora."""
    with open(tmp_path / "records.jsonl", "w", encoding="utf-8") as f:
        for record in RECORDS:
            f.write(json.dumps(record) + "\n")
    (tmp_path / "scheme.csv").write_text(SCHEME, encoding="utf-8")
    (tmp_path / "stopwords.txt").write_text("und\ndie\nder\n", encoding="utf-8")
    config = {
        "paths": {
            "records": "records.jsonl",
            "seed_scheme": "scheme.csv",
            "stopwords": "stopwords.txt",
            "topic_metadata": "new_topics.csv",
            "output_dir": "out",
        },
        "corpora": [
            {"name": "survey", "medium": "survey", "actor": "public", "labeled": True},
            {"name": "facebook", "medium": "facebook", "actor": "politicians"},
            {"name": "twitter", "medium": "twitter", "actor": "audience"},
        ],
        "preprocess": {
            "stopword_language": None,
            "min_tokens_unlabeled": 2,
            "min_doc_frequency": 1,
            "max_doc_frequency_fraction": 1.0,
        },
        "model": {"sweeps": 3, "rng_seed": 7},
    }
    (tmp_path / "run.yaml").write_text(yaml.safe_dump(config), encoding="utf-8")
    (tmp_path / "new_topics.csv").write_text("topic_id,label,type\n", encoding="utf-8")
    return tmp_path


@pytest.fixture
def run_config(run_dir: Path):
    return load_config(run_dir / "run.yaml")
