"""Text templates for the agenda topic pipeline.

This module contains every human-facing text layout used across the
pipeline: command banners, preprocessing bookkeeping, training summaries,
the top-words and labeling reports, the plain-text rendering of the analysis
tables and the validation pass/fail table.
"""

banner = """
# Agenda Topics

Seeded Dirichlet-process topic model with cross-corpus agenda analytics.
Command: {command}    run: {run_id}
"""

# ===== PREPROCESSING =====

corpus_bookkeeping_line = (
    "{corpus:<24} records {records:>9,}  excluded-code {excluded_seed_code:>7,}  "
    "too-short {rejected_too_short:>7,}  empty {rejected_empty:>7,}  "
    "unsampled {dropped_by_balance:>7,}  documents {documents:>9,}  tokens {tokens:>11,}"
)

corpus_sizes_sentence = "The final corpora consist of {parts}."

corpus_size_part = "{documents:,} {corpus} documents"

excluded_codes_line = "Excluded {total:,} labeled records whose codes match no seed pattern: {codes}"

vocabulary_line = "Shared vocabulary: {size:,} terms (hash {vocab_hash})"

# ===== TRAINING =====

train_summary = """Training finished after {sweeps} sweeps ({mode}, alpha={alpha}, beta={beta}, seed={seed}).
Topics: {n_topics} live ({n_seed} seed, {n_new} new). Final log joint: {log_joint:.4f}
State written to {state_path}
"""

# ===== ANALYSIS =====

top_words_title = "Top words per topic"

top_words_line = "{label:<32} {words}"

labeling_instructions = """# New topics awaiting labels

Each block below lists a retained new topic with its top words and sample
documents. Label every topic in the metadata file with the columns
topic_id,label,type where type is one of policy, politics or polity.
"""

labeling_topic_block = """## Topic {topic_id} ({n_docs:,} documents)
Top words: {words}
Sample documents:
{samples}
"""

labeling_sample_line = "  - [{corpus}] {text}"

pruning_summary = (
    "Pruning threshold {threshold:,}: {n_dropped} new topics dropped covering "
    "{residual:,} of {unlabeled:,} unlabeled documents; {n_retained} topics retained."
)

salience_title = "Topic salience per corpus (in percent)"

correlation_title = "Rank correlations of topic salience (Spearman's rho)"

correlation_note = "Pairs with {labeled} use N={n_seed} seed topics; other pairs use N={n_all} retained topics."

similarity_title = "Cosine similarities between corpora by topic"

regression_title = "Models of cosine similarities between corpus pairs (OLS, {hc} robust standard errors)"

regression_footer = "Significance: * p<0.05, ** p<0.01, *** p<0.001"

analysis_summary = """Analysis bundle written to {output_dir}
  retained topics: {n_retained} ({n_new} new)
  similarity cells: {n_cells} ({n_omitted} omitted)
  regression fits: {n_models}
"""

# ===== VALIDATION =====

validation_row = "{check:<28} {status:<6} {detail}"

validation_summary = "{passed} of {total} checks passed in {seconds:.1f}s"
