"""Acceptance suite for the sampler and the analytics.

Every check builds its own fixture, runs, and returns a CheckResult. The
quick mode shrinks sample sizes so the whole suite finishes within a minute;
thresholds are loosened only where the sample size shrinks.
"""

import logging
import shutil
import tempfile
import time
import tracemalloc
from collections import Counter
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd
import yaml
from pydantic import BaseModel
from sklearn.metrics.pairwise import cosine_similarity

from agenda_topics import templates
from agenda_topics.analytics import cosine_similarity_grid, prune_topics, seed_topic_meta, topic_salience
from agenda_topics.commands import DIAGNOSTICS_FILE, STATE_FILE, cmd_analyze, cmd_train
from agenda_topics.configuration import default_corpora, load_config
from agenda_topics.correlation import rank_correlation_matrix, spearman_rho
from agenda_topics.errors import InvariantViolation
from agenda_topics.model_state import ModelState
from agenda_topics.oracle import (
    SyntheticSpec,
    canonical_assignment,
    enumerate_exact_posterior,
    generate_synthetic,
    recovery_score,
)
from agenda_topics.persistence import load_state, read_documents, write_documents, write_vocabulary
from agenda_topics.regression import build_regression_frame, fit_models, ols_hc_robust
from agenda_topics.sampler import (
    conditional_topic_distribution,
    gibbs_sweep,
    init_state,
    run_inference,
    sample_assignment,
)
from agenda_topics.state_analysis import TopicMeta
from agenda_topics.state_model import ModelParams
from agenda_topics.state_text import TokenDocument

# Set up logger for this module
logger = logging.getLogger("agenda.validate")

STATIONARITY_TV = 0.02
CONDITIONAL_FIXTURE = (Fraction(7, 15), Fraction(3, 15), Fraction(5, 15))
RECOVERY_ARI = 0.8
OLS_RELATIVE_TOL = 1e-8
PERFORMANCE_BUDGET_SECONDS = 600.0
PEAK_MEMORY_BUDGET_MB = 1024.0
TRACED_SWEEPS = 5


class CheckResult(BaseModel):
    """Outcome of one acceptance check."""

    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

# ===== SAMPLER CHECKS =====

def check_stationarity(quick: bool, seed: int) -> tuple[bool, str]:
    """Empirical assignment vectors of exact-collapsed Gibbs against the enumerated posterior."""
    docs = [
        TokenDocument(id="labeled-0", corpus="survey", tokens=(0,), seed_topic=1),
        TokenDocument(id="doc-1", corpus="social", tokens=(0,)),
        TokenDocument(id="doc-2", corpus="social", tokens=(1,)),
        TokenDocument(id="doc-3", corpus="social", tokens=(2,)),
    ]
    params = ModelParams(alpha=1.0, beta=1.5, likelihood_mode="exact-collapsed", rng_seed=seed)
    posterior = enumerate_exact_posterior(docs, params, vocab_size=3, n_seed=1)

    n_samples, burn_in = (20_000, 500) if quick else (200_000, 1_000)
    tolerance = 0.05 if quick else STATIONARITY_TV
    rng = np.random.default_rng(seed)
    state = init_state(docs, params, 3, 1, rng=rng)
    counts: Counter = Counter()
    for sweep in range(burn_in + n_samples):
        for i in state.unlabeled_indices:
            sample_assignment(i, state, rng)
        if sweep >= burn_in:
            counts[canonical_assignment(state)] += 1
    state.verify()
    tv = posterior.total_variation(counts)
    return tv < tolerance, f"TV={tv:.4f} over {n_samples:,} sweeps and {posterior.support_size} states (limit {tolerance})"


def _conditional_fixture(alpha: float = 1.0) -> tuple[ModelState, int]:
    docs = [
        TokenDocument(id="seed-a", corpus="survey", tokens=(0, 0), seed_topic=1),
        TokenDocument(id="seed-b", corpus="survey", tokens=(1, 1), seed_topic=2),
        TokenDocument(id="query", corpus="social", tokens=(0,)),
    ]
    state = ModelState(docs, ModelParams(alpha=alpha, beta=1.5), vocab_size=2, n_seed=2)
    for i in state.labeled_docs():
        state.add_doc(i, state.docs[i].seed_topic)  # type: ignore[arg-type]
    return state, state.doc_index["query"]


def check_conditional(quick: bool, seed: int) -> tuple[bool, str]:
    """Hand-derived conditional, exactly in rationals and by Monte Carlo."""
    beta, v = Fraction(3, 2), 2
    weights = [
        Fraction(1) * (2 + beta) / (2 + v * beta),
        Fraction(1) * (0 + beta) / (2 + v * beta),
        Fraction(1) * beta / (v * beta),
    ]
    exact = tuple(w / sum(weights) for w in weights)
    if exact != CONDITIONAL_FIXTURE:
        return False, f"rational evaluation gave {exact}"

    state, query = _conditional_fixture()
    computed = conditional_topic_distribution(query, state).probabilities
    worst = max(abs(float(e) - p) for e, p in zip(exact, computed))
    if worst > 1e-12:
        return False, f"conditional differs from the rational fixture by {worst:.2e}"

    tiny, tiny_query = _conditional_fixture(alpha=1e-12)
    new_mass = conditional_topic_distribution(tiny_query, tiny).new_topic_probability
    if new_mass >= 1e-11:
        return False, f"new-topic mass {new_mass:.2e} with alpha=1e-12"

    n_draws = 20_000 if quick else 100_000
    tolerance = 0.02 if quick else 0.01
    rng = np.random.default_rng(seed)
    tally = Counter()
    for _ in range(n_draws):
        topic = sample_assignment(query, state, rng)
        tally[topic if state.is_seed(topic) else 0] += 1
        state.remove_doc(query)
    frequencies = [tally[1] / n_draws, tally[2] / n_draws, tally[0] / n_draws]
    worst_mc = max(abs(f - float(e)) for f, e in zip(frequencies, exact))
    detail = f"exact match; Monte Carlo max deviation {worst_mc:.4f} over {n_draws:,} draws (limit {tolerance})"
    return worst_mc <= tolerance, detail


def check_mode_equivalence(quick: bool, seed: int) -> tuple[bool, str]:
    """Length-1 corpora give identical chains in both likelihood modes."""
    corpus = generate_synthetic(
        SyntheticSpec(
            n_seed=3, extra_topics=2, vocab_size=30, labeled_docs=50, unlabeled_docs={"social": 450},
            min_length=1, mean_length=1.0, rng_seed=seed,
        )
    )
    sweeps = 5 if quick else 20
    runs = {}
    for mode in ("paper-approximate", "exact-collapsed"):
        params = ModelParams(sweeps=sweeps, likelihood_mode=mode, rng_seed=seed)
        runs[mode] = run_inference(corpus.documents, params, 30, 3).state.assignments
    differing = sum(runs["paper-approximate"][d] != runs["exact-collapsed"][d] for d in runs["paper-approximate"])
    return differing == 0, f"{differing} of {len(corpus.documents)} assignments differ after {sweeps} sweeps"


def check_recovery(quick: bool, seed: int) -> tuple[bool, str]:
    """Adjusted Rand index of the fitted partition against synthetic ground truth."""
    seeds = [seed] if quick else [seed + i for i in range(5)]
    sweeps = 50 if quick else 100
    scores = []
    for s in seeds:
        spec = SyntheticSpec(
            n_seed=5, extra_topics=3, vocab_size=200, labeled_docs=500, unlabeled_docs={"social": 2000},
            mean_length=8.0, alpha=1.0, beta=1.5, word_concentration=0.1, rng_seed=s,
        )
        corpus = generate_synthetic(spec)
        state = run_inference(corpus.documents, ModelParams(sweeps=sweeps, rng_seed=s), spec.vocab_size, spec.n_seed).state
        unlabeled = {d.id for d in corpus.documents if d.seed_topic is None}
        scores.append(
            recovery_score(
                {d: corpus.truth[d] for d in unlabeled},
                {d: state.assignments[d] for d in unlabeled},
            )
        )
    median = float(np.median(scores))
    return median >= RECOVERY_ARI, f"median ARI {median:.3f} over {len(scores)} seeds (scores {', '.join(f'{s:.3f}' for s in scores)})"


def check_count_fuzzing(quick: bool, seed: int, inject_fault: bool = False) -> tuple[bool, str]:
    """Random moves with full recounts in between; no integer may drift."""
    corpus = generate_synthetic(
        SyntheticSpec(n_seed=4, extra_topics=2, vocab_size=50, labeled_docs=40, unlabeled_docs={"social": 160}, rng_seed=seed)
    )
    rng = np.random.default_rng(seed)
    state = init_state(corpus.documents, ModelParams(rng_seed=seed), 50, 4, rng=rng)
    n_ops = 2_000 if quick else 10_000
    verify_every = 10
    for op in range(1, n_ops + 1):
        i = state.unlabeled_indices[int(rng.integers(len(state.unlabeled_indices)))]
        kind = rng.integers(3)
        if kind == 0:
            sample_assignment(i, state, rng)
        else:
            state.remove_doc(i)
            live = state.live_topic_ids
            target = state.open_topic() if kind == 2 else live[int(rng.integers(len(live)))]
            state.add_doc(i, target)
        if inject_fault and op == n_ops // 2:
            topic = state.live_topic_ids[0]
            logger.warning(f"Injecting a count fault into topic {topic}")
            state.corrupt_counts(topic, term=0, delta=1)
        if op % verify_every == 0:
            state.verify()
    state.verify()
    return True, f"{n_ops:,} operations, {n_ops // verify_every:,} full recounts, zero discrepancies"

# ===== ANALYTICS CHECKS =====

def _naive_hc1(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n, k = X.shape
    xtx_inv = np.linalg.inv(X.T @ X)
    beta = xtx_inv @ X.T @ y
    resid = y - X @ beta
    meat = X.T @ np.diag(resid**2) @ X
    cov = xtx_inv @ meat @ xtx_inv * n / (n - k)
    return beta, np.sqrt(np.diag(cov))


def check_analytics(quick: bool, seed: int) -> tuple[bool, str]:
    """Salience sums, Spearman fixtures, cosine properties and the OLS oracle."""
    rng = np.random.default_rng(seed)
    problems = []

    corpus = generate_synthetic(
        SyntheticSpec(
            n_seed=4, extra_topics=2, vocab_size=60, labeled_docs=80,
            unlabeled_docs={"facebook": 200, "twitter": 200}, rng_seed=seed,
        )
    )
    state = run_inference(corpus.documents, ModelParams(sweeps=5, rng_seed=seed), 60, 4).state
    salience = topic_salience(state, state.live_topic_ids, "survey")
    sums = salience.percentages.sum(axis=0, skipna=True)
    if not np.allclose(sums, 100.0, atol=0.1):
        problems.append(f"salience sums {sums.round(3).tolist()}")

    base = [1, 2, 3, 4, 5]
    for other, expected in (([1, 2, 3, 4, 5], 1.0), ([5, 4, 3, 2, 1], -1.0), ([1, 3, 2, 5, 4], 0.8)):
        rho, _ = spearman_rho(base, other)
        if rho is None or abs(rho - expected) > 1e-12:
            problems.append(f"spearman {other} gave {rho}, expected {expected}")

    n_pairs = 200 if quick else 1_000
    a = rng.gamma(0.5, size=(n_pairs, 40)) * rng.integers(0, 2, size=(n_pairs, 40))
    b = rng.gamma(0.5, size=(n_pairs, 40)) * rng.integers(0, 2, size=(n_pairs, 40))
    a[:, 0] += 1e-3
    b[:, 0] += 1e-3
    scale = rng.uniform(0.1, 100.0, size=(n_pairs, 1))
    plain = np.einsum("ij,ij->i", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
    sklearn_values = np.array([cosine_similarity(a[i : i + 1], b[i : i + 1])[0, 0] for i in range(n_pairs)])
    scaled = np.array([cosine_similarity(a[i : i + 1] * scale[i], b[i : i + 1])[0, 0] for i in range(n_pairs)])
    if sklearn_values.min() < -1e-12 or sklearn_values.max() > 1 + 1e-12:
        problems.append("cosine outside [0, 1]")
    if not np.allclose(sklearn_values, plain, atol=1e-12) or not np.allclose(scaled, sklearn_values, atol=1e-12):
        problems.append("cosine not scale invariant")

    n_fixtures = 5 if quick else 20
    worst = 0.0
    for _ in range(n_fixtures):
        X = rng.normal(size=(50, 4))
        y = X @ rng.normal(size=4) + rng.normal(scale=rng.uniform(0.5, 2.0), size=50) * (1 + np.abs(X[:, 0]))
        frame = pd.DataFrame(X, columns=["x1", "x2", "x3", "x4"]).assign(cosine=y)
        fitted = ols_hc_robust(frame, ["x1", "x2", "x3", "x4"], hc="HC1")
        beta, se = _naive_hc1(np.column_stack([np.ones(50), X]), y)
        ours_beta = np.array([c.estimate for c in fitted.coefficients])
        ours_se = np.array([c.std_error for c in fitted.coefficients])
        worst = max(worst, float(np.max(np.abs(ours_beta - beta) / np.maximum(np.abs(beta), 1e-6))), float(np.max(np.abs(ours_se - se) / se)))
    if worst > OLS_RELATIVE_TOL:
        problems.append(f"OLS/HC1 relative error {worst:.2e}")

    detail = "; ".join(problems) or f"all hold (OLS worst relative error {worst:.1e} over {n_fixtures} fixtures)"
    return not problems, detail


def check_table_shape(quick: bool, seed: int) -> tuple[bool, str]:
    """Five-corpus synthetic run with 18 seeds: every table has the expected dimensions."""
    corpora = default_corpora()
    labeled = corpora[0].name
    per_corpus = 150 if quick else 400
    spec = SyntheticSpec(
        n_seed=18, extra_topics=4, vocab_size=400, labeled_corpus=labeled, labeled_docs=18 * 20,
        unlabeled_docs={c.name: per_corpus for c in corpora[1:]}, word_concentration=0.1, rng_seed=seed,
    )
    corpus = generate_synthetic(spec)
    params = ModelParams(sweeps=10 if quick else 30, rng_seed=seed)
    state = run_inference(corpus.documents, params, spec.vocab_size, 18, corpora=[c.name for c in corpora]).state

    pruned = prune_topics(state, labeled)
    seed_meta = seed_topic_meta(None, 18)
    for k in (3, 7):
        seed_meta[k] = seed_meta[k].model_copy(update={"topic_type": "politics"})
    metas = [seed_meta[k] if k in seed_meta else TopicMeta(topic_id=k, label=f"New {k}", origin="new") for k in pruned.retained]
    n_new = sum(1 for m in metas if m.origin == "new")

    problems = []
    salience = topic_salience(state, pruned.retained, labeled)
    new_ids = [m.topic_id for m in metas if m.origin == "new"]
    if not salience.percentages.loc[new_ids, labeled].isna().all():
        problems.append("labeled column not blank for new topics")
    for entry in rank_correlation_matrix(salience):
        expected = 18 if labeled in (entry.corpus_a, entry.corpus_b) else 18 + n_new
        if entry.n != expected:
            problems.append(f"correlation ({entry.corpus_a}, {entry.corpus_b}) has N={entry.n}, expected {expected}")

    grid = cosine_similarity_grid(state, corpora, metas)
    zero_omitted = sum(1 for o in grid.omitted if o.reason.startswith("no tokens"))
    labeled_omitted = sum(1 for o in grid.omitted if not o.reason.startswith("no tokens"))
    expected_cells = 18 * 10 + n_new * 6
    if len(grid.cells) + zero_omitted != expected_cells or labeled_omitted != n_new * 4:
        problems.append(f"grid has {len(grid.cells)} cells + {zero_omitted} empty, expected {expected_cells}")
    frame, _ = build_regression_frame(grid.cells)
    results = fit_models(frame, subsets=False)
    if len(results) != 5:
        problems.append(f"{len(results)} regression models fitted, expected 5")

    detail = "; ".join(problems) or (
        f"18 seed + {n_new} new topics retained ({len(pruned.dropped)} pruned), {len(frame)} cells, 5 models"
    )
    return not problems, detail

# ===== SYSTEM CHECKS =====

def check_performance(quick: bool, seed: int) -> tuple[bool, str]:
    """Wall time of 100 sweeps at full scale and peak memory of the state build plus the opening sweeps.

    Memory is traced from the state build through the first
    ``TRACED_SWEEPS`` sweeps, where new topics open and the tables grow; the
    clock covers every sweep. The quick variant times two sweeps on a tenth
    of the corpus and projects.
    """
    if quick:
        n_docs, vocab_size, n_seed, extra, timed_sweeps = 15_000, 2_000, 40, 10, 2
        budget = PERFORMANCE_BUDGET_SECONDS / 10
    else:
        n_docs, vocab_size, n_seed, extra, timed_sweeps = 150_000, 20_000, 40, 10, 100
        budget = PERFORMANCE_BUDGET_SECONDS
    labeled = n_seed * 100
    per_corpus = (n_docs - labeled) // 4
    spec = SyntheticSpec(
        n_seed=n_seed, extra_topics=extra, vocab_size=vocab_size, labeled_docs=labeled,
        unlabeled_docs={f"corpus-{j}": per_corpus for j in range(4)}, word_concentration=0.05, rng_seed=seed,
    )
    corpus = generate_synthetic(spec)
    params = ModelParams(rng_seed=seed)
    rng = np.random.default_rng(seed)

    elapsed = 0.0
    tracemalloc.start()
    try:
        state = init_state(corpus.documents, params, vocab_size, n_seed, rng=rng)
        for _ in range(min(TRACED_SWEEPS, timed_sweeps)):
            start = time.perf_counter()
            gibbs_sweep(state, rng)
            elapsed += time.perf_counter() - start
        _, peak = tracemalloc.get_traced_memory()
    finally:
        tracemalloc.stop()
    peak_mb = peak / 2**20

    start = time.perf_counter()
    for _ in range(timed_sweeps - min(TRACED_SWEEPS, timed_sweeps)):
        gibbs_sweep(state, rng)
    elapsed += time.perf_counter() - start

    per_sweep = elapsed / timed_sweeps
    total = per_sweep * 100 if quick else elapsed
    passed = total <= budget and peak_mb <= PEAK_MEMORY_BUDGET_MB
    timing = f"100 sweeps projected {total:.0f}s" if quick else f"100 sweeps took {total:.0f}s"
    detail = (
        f"{len(corpus.documents):,} docs, V={vocab_size:,}, K={state.n_topics}: {per_sweep:.2f}s/sweep, "
        f"{timing} (budget {budget:.0f}s), peak {peak_mb:.0f} MB, {state.stored_term_cells:,} stored term cells"
    )
    return passed, detail


def check_determinism(quick: bool, seed: int) -> tuple[bool, str]:
    """Two train + analyze runs in separate directories give byte-identical bundles."""
    corpus = generate_synthetic(
        SyntheticSpec(
            n_seed=3, extra_topics=2, vocab_size=40, labeled_docs=60,
            unlabeled_docs={"facebook-politicians": 120, "twitter-audience": 120}, word_concentration=0.2, rng_seed=seed,
        )
    )
    config_data = {
        "paths": {"output_dir": "out", "topic_metadata": "topic_metadata.csv"},
        "corpora": [
            {"name": "survey", "medium": "survey", "actor": "public", "labeled": True},
            {"name": "facebook-politicians", "medium": "facebook", "actor": "politicians"},
            {"name": "twitter-audience", "medium": "twitter", "actor": "audience"},
        ],
        "model": {"sweeps": 3 if quick else 10, "rng_seed": seed},
    }
    root = Path(tempfile.mkdtemp(prefix="agenda-determinism-"))
    try:
        bundles = []
        for run in ("a", "b"):
            run_dir = root / run
            (run_dir / "out").mkdir(parents=True)
            (run_dir / "run.yaml").write_text(yaml.safe_dump(config_data), encoding="utf-8")
            write_documents(run_dir / "out" / "documents.jsonl", corpus.documents, {"kind": "documents", "n_seed": 3})
            write_vocabulary(run_dir / "out" / "vocabulary.jsonl", corpus.vocabulary, {"kind": "vocabulary"})
            config = load_config(run_dir / "run.yaml")
            cmd_train(config)

            state, _, _ = load_state(run_dir / "out" / STATE_FILE, read_documents(run_dir / "out" / "documents.jsonl"))
            rows = "".join(f"{k},New topic {k},policy\n" for k in state.live_topic_ids if not state.is_seed(k))
            (run_dir / "topic_metadata.csv").write_text("topic_id,label,type\n" + rows, encoding="utf-8")
            cmd_analyze(config)
            bundles.append({
                p.relative_to(run_dir / "out"): p.read_bytes()
                for p in sorted((run_dir / "out").rglob("*"))
                if p.is_file() and p.name != DIAGNOSTICS_FILE
            })
        a, b = bundles
        differing = sorted(str(p) for p in set(a) | set(b) if a.get(p) != b.get(p))
    finally:
        shutil.rmtree(root, ignore_errors=True)
    if differing:
        return False, f"{len(differing)} files differ: {', '.join(differing[:5])}"
    return True, f"{len(a)} output files byte-identical across two runs"

# ===== SUITE =====

CHECKS: list[tuple[str, Callable[[bool, int], tuple[bool, str]]]] = [
    ("stationarity", check_stationarity),
    ("conditional", check_conditional),
    ("mode-equivalence", check_mode_equivalence),
    ("synthetic-recovery", check_recovery),
    ("count-fuzzing", check_count_fuzzing),
    ("analytics-oracles", check_analytics),
    ("table-shape", check_table_shape),
    ("performance", check_performance),
    ("determinism", check_determinism),
]

QUICK_SKIP = {"performance"}


def run_validation(quick: bool = False, inject_fault: bool = False, seed: int = 0) -> list[CheckResult]:
    """Run every check, or the quick subset.

    A failing check is recorded and the suite continues. With
    ``inject_fault`` the count-fuzzing check corrupts the tables and its
    InvariantViolation is raised to the caller; that check runs first.
    """
    results = []
    checks = sorted(CHECKS, key=lambda c: c[0] != "count-fuzzing") if inject_fault else CHECKS
    for name, check in checks:
        if quick and name in QUICK_SKIP:
            continue
        logger.info(f"Running check {name}{' (quick)' if quick else ''}")
        start = time.perf_counter()
        try:
            if name == "count-fuzzing":
                passed, detail = check_count_fuzzing(quick, seed, inject_fault=inject_fault)
            else:
                passed, detail = check(quick, seed)
        except InvariantViolation:
            if inject_fault:
                raise
            logger.error(f"Check {name} hit an invariant violation", exc_info=True)
            passed, detail = False, "invariant violation"
        except Exception as e:
            logger.error(f"Check {name} raised", exc_info=True)
            passed, detail = False, f"{type(e).__name__}: {e}"
        result = CheckResult(name=name, passed=passed, detail=detail, seconds=time.perf_counter() - start)
        logger.info(f"{name}: {'PASS' if passed else 'FAIL'} ({detail})")
        results.append(result)
    return results


def validation_table(results: list[CheckResult]) -> str:
    """Pass/fail table with a closing summary line."""
    lines = [templates.validation_row.format(check="check", status="status", detail="detail")]
    lines += [
        templates.validation_row.format(check=r.name, status="PASS" if r.passed else "FAIL", detail=r.detail)
        for r in results
    ]
    lines.append(
        templates.validation_summary.format(
            passed=sum(r.passed for r in results), total=len(results), seconds=sum(r.seconds for r in results)
        )
    )
    return "\n".join(lines)
