// SPDX-License-Identifier: Apache-2.0

#include "loads/selector.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "loads/errors.hpp"
#include "loads/parallel.hpp"

namespace loads {

std::string selection_method_name(SelectionMethod method) {
    switch (method) {
        case SelectionMethod::kLoads: return "loads";
        case SelectionMethod::kOriginal: return "original";
        case SelectionMethod::kVerbalizer: return "verbalizer";
        case SelectionMethod::kSelfgen: return "selfgen";
    }
    return "loads";
}

nlohmann::json selection_result_to_json(const SelectionResult& result) {
    nlohmann::json j{{"method", selection_method_name(result.method)},
                     {"chosen", result.chosen.to_json()}};
    if (result.report) {
        nlohmann::json ranking = nlohmann::json::array();
        for (const auto& entry : result.report->entries) {
            ranking.push_back({{"words", entry.set.words},
                               {"mean_kurtosis", entry.mean_kurtosis},
                               {"rank", entry.rank}});
        }
        j["ranking"] = std::move(ranking);
    }
    if (!result.diagnostics.is_null()) {
        j["diagnostics"] = result.diagnostics;
    }
    return j;
}

// ---------------------------------------------------------------------------
// LOADS selection

SelectionResult loads_select(const Backend& backend, const ClassSchema& schema,
                             const std::vector<Example>& sample,
                             const std::vector<LabelSet>& pool,
                             const PromptTemplate& tpl, int workers) {
    if (pool.empty()) {
        throw validation_error("loads_select: empty candidate pool");
    }
    if (sample.empty()) {
        throw validation_error("loads_select: empty sample");
    }
    for (const auto& set : pool) {
        set.validate(schema);
        if (set.order_index != 0) {
            throw validation_error("loads_select: candidate sets must share the default "
                                   "order (set '" + set.key() + "' has order_index " +
                                   std::to_string(set.order_index) + ")");
        }
    }

    std::size_t n_sets = pool.size();
    std::size_t n_samples = sample.size();
    // per-(set, sample) kurtosis; gold labels are never consulted
    std::vector<double> values(n_sets * n_samples, 0.0);

    TapFlags taps;
    taps.ffn = true;
    parallel_for(n_sets * n_samples, workers, [&](std::size_t unit) {
        std::size_t s = unit / n_samples;
        std::size_t e = unit % n_samples;
        std::string prompt = render(tpl, schema, pool[s], sample[e]);
        GenerationTrace trace;
        try {
            trace = backend.generate_greedy(prompt, 1, taps);
        } catch (const unsupported_error&) {
            throw;
        } catch (const error& err) {
            throw validation_error("loads_select: generation failed for set '" + pool[s].key() +
                                   "', example '" + sample[e].id + "': " + err.what());
        }
        if (trace.steps.empty() || trace.steps.front().ffn_activation.empty()) {
            throw unsupported_error("loads_select: backend returned no ffn_activation tap");
        }
        try {
            values[unit] = kurtosis(trace.steps.front().ffn_activation);
        } catch (const numeric_error& err) {
            throw numeric_error("loads_select: set '" + pool[s].key() + "', example '" +
                                sample[e].id + "': " + err.what());
        }
    });

    KurtosisReport report;
    report.entries.resize(n_sets);
    for (std::size_t s = 0; s < n_sets; ++s) {
        auto& entry = report.entries[s];
        entry.set = pool[s];
        double sum = 0.0;
        // canonical reduction: sample-draw order
        for (std::size_t e = 0; e < n_samples; ++e) {
            double v = values[s * n_samples + e];
            entry.per_sample.emplace_back(sample[e].id, v);
            sum += v;
        }
        entry.mean_kurtosis = sum / static_cast<double>(n_samples);
    }
    assign_ranks(report);

    SelectionResult result;
    result.method = SelectionMethod::kLoads;
    result.chosen = report.entries[static_cast<std::size_t>(report.argmin())].set;
    result.report = std::move(report);
    return result;
}

// ---------------------------------------------------------------------------
// Verbalizer baseline

std::string verbalizer_predict(const Backend& backend, const Example& ex,
                               const ClassSchema& schema,
                               const std::vector<LabelSet>& pool,
                               const PromptTemplate& tpl, VerbalizerAggregation agg) {
    if (pool.empty()) {
        throw validation_error("verbalizer_predict: empty candidate pool");
    }
    // candidate words per role, across the whole pool
    std::map<std::string, std::vector<std::string>> candidates;
    for (const auto& set : pool) {
        set.validate(schema);
        for (std::size_t i = 0; i < set.words.size(); ++i) {
            auto& list = candidates[set.role_of[i]];
            if (std::find(list.begin(), list.end(), set.words[i]) == list.end()) {
                list.push_back(set.words[i]);
            }
        }
    }
    for (const auto& role : schema.class_roles) {
        if (candidates[role].empty()) {
            throw validation_error("verbalizer_predict: role '" + role +
                                   "' has no candidate words");
        }
    }

    // one forward pass: the full first-token distribution under the original labels
    std::string prompt = render(tpl, schema, original_label_set(schema), ex);
    TapFlags taps;
    taps.ffn = false;
    GenerationTrace trace = backend.generate_greedy(prompt, 1, taps);
    const auto& logprobs = trace.steps.front().logprobs;

    std::string best_role;
    double best_score = 0.0;
    for (const auto& role : schema.class_roles) {
        // distinct first tokens only; a token shared by two words counts once
        std::set<int> first_tokens;
        for (const auto& word : candidates[role]) {
            first_tokens.insert(backend.encode(word).front());
        }
        double score = 0.0;
        for (int token : first_tokens) {
            double p = std::exp(logprobs[static_cast<std::size_t>(token)]);
            score = agg == VerbalizerAggregation::kSum ? score + p : std::max(score, p);
        }
        // strict > keeps ties resolved in schema role order
        if (best_role.empty() || score > best_score) {
            best_role = role;
            best_score = score;
        }
    }
    return best_role;
}

// ---------------------------------------------------------------------------
// Self-generated baseline

SelectionResult selfgen_select(const Backend& backend, const ClassSchema& schema,
                               const std::vector<Example>& sample,
                               const Lexicon& lexicon,
                               const PromptTemplate& open_tpl, int workers) {
    if (sample.empty()) {
        throw validation_error("selfgen_select: empty sample");
    }
    lexicon.validate(schema);

    std::map<std::string, std::vector<std::string>> candidates;
    for (const auto& role : schema.class_roles) {
        auto it = lexicon.synonyms.find(role);
        if (it != lexicon.synonyms.end()) {
            for (const auto& word : it->second) {
                if (!lexicon.is_blocked(word)) {
                    candidates[role].push_back(word);
                }
            }
        }
        if (candidates[role].empty()) {
            throw validation_error("selfgen_select: role '" + role +
                                   "' has no scorable candidate words");
        }
    }

    // one options-free forward per sample
    std::vector<std::vector<double>> logprobs(sample.size());
    TapFlags taps;
    taps.ffn = false;
    parallel_for(sample.size(), workers, [&](std::size_t i) {
        std::string prompt = render_open(open_tpl, schema, sample[i]);
        logprobs[i] = backend.generate_greedy(prompt, 1, taps).steps.front().logprobs;
    });

    SelectionResult result;
    result.method = SelectionMethod::kSelfgen;
    nlohmann::json diag = nlohmann::json::object();

    for (const auto& role : schema.class_roles) {
        std::string best_word;
        double best_avg = -1.0;
        nlohmann::json role_diag = nlohmann::json::object();
        for (const auto& word : candidates[role]) {
            int token = backend.encode(word).front();
            double sum = 0.0;
            for (std::size_t i = 0; i < sample.size(); ++i) {
                sum += std::exp(logprobs[i][static_cast<std::size_t>(token)]);
            }
            double avg = sum / static_cast<double>(sample.size());
            role_diag[word] = avg;
            // strict > keeps ties resolved in candidate-list order
            if (avg > best_avg) {
                best_avg = avg;
                best_word = word;
            }
        }
        diag[role] = std::move(role_diag);
        result.chosen.words.push_back(best_word);
        result.chosen.role_of.push_back(role);
    }
    result.chosen.order_index = 0;
    result.chosen.elaboration = Elaboration::kNone;
    result.chosen.source = LabelSource::kLexicon;
    result.chosen.validate(schema);
    result.diagnostics = nlohmann::json{{"avg_first_token_probability", diag}};
    return result;
}

} // namespace loads
