#pragma once
// SPDX-License-Identifier: Apache-2.0

// Label-set selection: kurtosis-ranked selection over a candidate pool and
// the three comparison strategies (original labels, verbalizer,
// self-generated).

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "loads/backend.hpp"
#include "loads/core_data.hpp"
#include "loads/labelpool.hpp"
#include "loads/prompting.hpp"
#include "loads/stats.hpp"

namespace loads {

enum class SelectionMethod { kLoads, kOriginal, kVerbalizer, kSelfgen };

std::string selection_method_name(SelectionMethod method);

struct SelectionResult {
    SelectionMethod method = SelectionMethod::kLoads;
    LabelSet chosen;
    std::optional<KurtosisReport> report;   // LOADS only
    nlohmann::json diagnostics;             // per-word probabilities etc.
};

nlohmann::json selection_result_to_json(const SelectionResult& result);

// Ranks every candidate set by the mean kurtosis of the last-layer FFN
// activation at the first generated token, over the given sample (already in
// draw order), and picks the minimum. Label-free: gold roles are never read.
// One greedy step per (set, example); parallel across units with canonical
// reduction order.
SelectionResult loads_select(const Backend& backend, const ClassSchema& schema,
                             const std::vector<Example>& sample,
                             const std::vector<LabelSet>& pool,
                             const PromptTemplate& tpl, int workers = 1);

enum class VerbalizerAggregation { kSum, kMax };

// Predicts one example's role by aggregating first-token probabilities of
// every candidate word of each class (prompted with the original labels).
// Shared first tokens within a class are counted once; ties between classes
// resolve in schema role order.
std::string verbalizer_predict(const Backend& backend, const Example& ex,
                               const ClassSchema& schema,
                               const std::vector<LabelSet>& pool,
                               const PromptTemplate& tpl,
                               VerbalizerAggregation agg = VerbalizerAggregation::kSum);

// Options-free prompting: per candidate word, the average over samples of
// the first-token probability of the word's first token; per role, the
// max-average word wins. Candidates come from the lexicon minus blocked.
SelectionResult selfgen_select(const Backend& backend, const ClassSchema& schema,
                               const std::vector<Example>& sample,
                               const Lexicon& lexicon,
                               const PromptTemplate& open_tpl, int workers = 1);

} // namespace loads
