#pragma once
// SPDX-License-Identifier: Apache-2.0

// Classification evaluation, label-variant sweeps, correlation analysis and
// the interpretability probes (key similarity, logit lens, perplexity).

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "loads/backend.hpp"
#include "loads/core_data.hpp"
#include "loads/labelpool.hpp"
#include "loads/prompting.hpp"
#include "loads/selector.hpp"
#include "loads/stats.hpp"

namespace loads {

// A prediction is a role id, or nullopt when the generation matched no label
// word (tracked as INVALID).
using Prediction = std::optional<std::string>;

// Greedy classification: the generation is mapped to a role by
// case-insensitive longest-prefix match against the set's words (leading
// whitespace ignored); no match means INVALID. max_tokens is the longest
// label token length + 2.
std::vector<Prediction> classify(const Backend& backend,
                                 const std::vector<Example>& examples,
                                 const ClassSchema& schema, const LabelSet& set,
                                 const PromptTemplate& tpl, int workers = 1);

// Maps one generation to a role under the rule above.
Prediction match_generation(const std::string& generated, const LabelSet& set);

// Per-role F1 in schema order. A role absent from both gold and predictions
// scores 0; INVALID predictions count as false negatives for the gold role.
std::vector<double> per_role_f1(const std::vector<std::string>& gold,
                                const std::vector<Prediction>& predicted,
                                const std::vector<std::string>& roles);

double macro_f1(const std::vector<std::string>& gold,
                const std::vector<Prediction>& predicted,
                const std::vector<std::string>& roles);

// Weighted per-class F1 combination; weights must cover all roles and sum
// to 1 within 1e-9.
double wf2(const std::vector<std::string>& gold,
           const std::vector<Prediction>& predicted,
           const std::vector<std::string>& roles,
           const std::map<std::string, double>& weights);
double wf2_from_f1(const std::vector<double>& f1s,
                   const std::vector<std::string>& roles,
                   const std::map<std::string, double>& weights);

// ---------------------------------------------------------------------------
// EvalReport

struct EvalReport {
    std::vector<std::string> roles;                       // schema order
    std::vector<std::pair<std::string, Prediction>> predictions; // (id, role)
    std::vector<std::vector<int>> confusion;              // rows: gold, cols: roles + INVALID
    double macro_f1 = 0.0;
    std::optional<double> wf2;
    double accuracy = 0.0;
    double invalid_rate = 0.0;
};

// Builds the report from gold labels (required on every example).
EvalReport evaluate(const ClassSchema& schema, const std::vector<Example>& examples,
                    const std::vector<Prediction>& predictions,
                    const std::map<std::string, double>* wf2_weights = nullptr);

nlohmann::json eval_report_to_json(const EvalReport& report);
std::string eval_report_to_csv(const EvalReport& report);

// ---------------------------------------------------------------------------
// Sweeps

enum class SweepKind { kLexical, kOrder, kElaboration };

std::string sweep_kind_name(SweepKind kind);

struct OrderStats {
    double default_score = 0.0;
    double max_gain = 0.0;   // best score improvement over the default order
    double max_drop = 0.0;   // worst drop (<= 0) versus the default order
};

struct SweepTable {
    SweepKind kind = SweepKind::kLexical;
    std::vector<LabelSet> variants;
    std::vector<double> scores;          // macro-F1 per variant
    double max = 0.0, min = 0.0, avg = 0.0, var = 0.0;  // population variance
    std::optional<OrderStats> order_stats;               // ORDER sweeps only
};

SweepTable sweep_lexical(const Backend& backend, const std::vector<Example>& examples,
                         const ClassSchema& schema, const std::vector<LabelSet>& pool,
                         const PromptTemplate& tpl, int workers = 1);

// Runs all n! orderings of `base` and reports max gain/drop vs the default.
SweepTable sweep_order(const Backend& backend, const std::vector<Example>& examples,
                       const ClassSchema& schema, const LabelSet& base,
                       const PromptTemplate& tpl, int workers = 1);

// Runs the base set plus its E1/E2/E3 elaborations.
SweepTable sweep_elaboration(const Backend& backend, const std::vector<Example>& examples,
                             const ClassSchema& schema, const LabelSet& base,
                             const ElaborationTemplates& templates,
                             const PromptTemplate& tpl, int workers = 1);

nlohmann::json sweep_to_json(const SweepTable& table);
std::string sweep_to_csv(const SweepTable& table);

// ---------------------------------------------------------------------------
// Correlation

struct CorrelationRow {
    std::string dataset;
    double rho = 0.0;
    double p = 1.0;
    bool significant = false;   // p < 0.05
};

// Spearman correlation between per-set performance and per-set mean
// kurtosis. Both inputs must cover the same candidate sets in the same
// order (matched by set identity).
CorrelationRow correlate(const std::string& dataset,
                         const std::vector<LabelSet>& sets,
                         const std::vector<double>& scores,
                         const KurtosisReport& report);

// "-0.4921*" style rendering (4 decimals, star when p < 0.05).
std::string format_rho(const CorrelationRow& row);
nlohmann::json correlation_to_json(const CorrelationRow& row);
std::string correlation_to_csv(const CorrelationRow& row);

// ---------------------------------------------------------------------------
// Interpretability probes

// Per-layer cosine similarity of the attention key vectors at two token
// positions, averaged over heads.
std::vector<double> keysim_at_positions(const Backend& backend, const std::string& prompt,
                                        int pos_a, int pos_b);

// Per-layer cosine similarity between the two label words' key vectors at
// their prompt positions, averaged over heads then samples. Binary schemas
// only.
std::vector<double> analyze_keysim(const Backend& backend, const ClassSchema& schema,
                                   const LabelSet& set, const PromptTemplate& tpl,
                                   const std::vector<Example>& sample);

// Rank of the finally predicted first token at every layer (logit lens).
std::vector<int> analyze_logitlens(const Backend& backend, const Example& ex,
                                   const ClassSchema& schema, const LabelSet& set,
                                   const PromptTemplate& tpl);

struct PerplexityReport {
    std::vector<std::pair<std::string, double>> per_example;  // (id, perplexity)
    double mean = 0.0;
};

// Mean prompt perplexity over examples for one label set.
PerplexityReport analyze_perplexity(const Backend& backend,
                                    const std::vector<Example>& examples,
                                    const ClassSchema& schema, const LabelSet& set,
                                    const PromptTemplate& tpl, int workers = 1);

} // namespace loads
