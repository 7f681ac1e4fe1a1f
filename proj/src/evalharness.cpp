// SPDX-License-Identifier: Apache-2.0

#include "loads/evalharness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>

#include "loads/errors.hpp"
#include "loads/json_util.hpp"
#include "loads/nanoformer.hpp"
#include "loads/parallel.hpp"

namespace loads {

namespace {

std::string lower(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return std::string(buf);
}

} // namespace

// ---------------------------------------------------------------------------
// Classification

Prediction match_generation(const std::string& generated, const LabelSet& set) {
    // Longest case-insensitive label prefix wins; leading whitespace in the
    // generation is ignored.
    std::size_t start = generated.find_first_not_of(" \t\n\r");
    if (start == std::string::npos) {
        return std::nullopt;
    }
    std::string g = lower(generated.substr(start));
    std::size_t best_len = 0;
    std::size_t best_idx = 0;
    for (std::size_t i = 0; i < set.words.size(); ++i) {
        std::string w = lower(set.words[i]);
        if (w.size() > best_len && g.size() >= w.size() && g.compare(0, w.size(), w) == 0) {
            best_len = w.size();
            best_idx = i;
        }
    }
    if (best_len == 0) {
        return std::nullopt;
    }
    return set.role_of[best_idx];
}

namespace {

int classify_max_tokens(const Backend& backend, const LabelSet& set) {
    std::size_t longest = 1;
    for (const auto& word : set.words) {
        longest = std::max(longest, backend.encode(word).size());
    }
    return static_cast<int>(longest) + 2;
}

Prediction classify_one(const Backend& backend, const Example& ex, const ClassSchema& schema,
                        const LabelSet& set, const PromptTemplate& tpl, int max_tokens) {
    std::string prompt = render(tpl, schema, set, ex);
    TapFlags taps;
    taps.ffn = false;
    GenerationTrace trace;
    try {
        trace = backend.generate_greedy(prompt, max_tokens, taps);
    } catch (const error& err) {
        throw validation_error("classify: generation failed for example '" + ex.id +
                               "': " + err.what());
    }
    return match_generation(trace.generated_text, set);
}

} // namespace

std::vector<Prediction> classify(const Backend& backend, const std::vector<Example>& examples,
                                 const ClassSchema& schema, const LabelSet& set,
                                 const PromptTemplate& tpl, int workers) {
    set.validate(schema);
    int max_tokens = classify_max_tokens(backend, set);
    std::vector<Prediction> predictions(examples.size());
    parallel_for(examples.size(), workers, [&](std::size_t i) {
        predictions[i] = classify_one(backend, examples[i], schema, set, tpl, max_tokens);
    });
    return predictions;
}

// ---------------------------------------------------------------------------
// Metrics

std::vector<double> per_role_f1(const std::vector<std::string>& gold,
                                const std::vector<Prediction>& predicted,
                                const std::vector<std::string>& roles) {
    if (gold.size() != predicted.size()) {
        throw validation_error("per_role_f1: gold/predicted size mismatch");
    }
    if (gold.empty()) {
        throw validation_error("per_role_f1: no gold labels");
    }
    std::map<std::string, int> tp, fp, fn;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        const std::string& g = gold[i];
        if (std::find(roles.begin(), roles.end(), g) == roles.end()) {
            throw validation_error("per_role_f1: gold role '" + g + "' not in role list");
        }
        if (!predicted[i]) {
            // INVALID: a miss for the gold class, a hit for nothing
            ++fn[g];
            continue;
        }
        const std::string& p = *predicted[i];
        if (p == g) {
            ++tp[g];
        } else {
            ++fp[p];
            ++fn[g];
        }
    }
    std::vector<double> f1s;
    f1s.reserve(roles.size());
    for (const auto& role : roles) {
        double tpd = tp[role], fpd = fp[role], fnd = fn[role];
        double precision = tpd + fpd > 0 ? tpd / (tpd + fpd) : 0.0;
        double recall = tpd + fnd > 0 ? tpd / (tpd + fnd) : 0.0;
        double f1 = precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        f1s.push_back(f1);
    }
    return f1s;
}

double macro_f1(const std::vector<std::string>& gold, const std::vector<Prediction>& predicted,
                const std::vector<std::string>& roles) {
    auto f1s = per_role_f1(gold, predicted, roles);
    double sum = 0.0;
    for (double f1 : f1s) {
        sum += f1;
    }
    return sum / static_cast<double>(roles.size());
}

double wf2_from_f1(const std::vector<double>& f1s, const std::vector<std::string>& roles,
                   const std::map<std::string, double>& weights) {
    if (f1s.size() != roles.size()) {
        throw validation_error("wf2: per-role F1 count does not match role count");
    }
    double weight_sum = 0.0;
    for (const auto& role : roles) {
        auto it = weights.find(role);
        if (it == weights.end()) {
            throw validation_error("wf2: missing weight for role '" + role + "'");
        }
        weight_sum += it->second;
    }
    if (std::abs(weight_sum - 1.0) > 1e-9) {
        throw validation_error("wf2: weights must sum to 1 (got " + fmt(weight_sum) + ")");
    }
    double score = 0.0;
    for (std::size_t i = 0; i < roles.size(); ++i) {
        score += weights.at(roles[i]) * f1s[i];
    }
    return score;
}

double wf2(const std::vector<std::string>& gold, const std::vector<Prediction>& predicted,
           const std::vector<std::string>& roles,
           const std::map<std::string, double>& weights) {
    return wf2_from_f1(per_role_f1(gold, predicted, roles), roles, weights);
}

// ---------------------------------------------------------------------------
// EvalReport

EvalReport evaluate(const ClassSchema& schema, const std::vector<Example>& examples,
                    const std::vector<Prediction>& predictions,
                    const std::map<std::string, double>* wf2_weights) {
    if (examples.size() != predictions.size()) {
        throw validation_error("evaluate: examples/predictions size mismatch");
    }
    std::vector<std::string> gold;
    gold.reserve(examples.size());
    for (const auto& ex : examples) {
        if (!ex.gold_role) {
            throw validation_error("evaluate: example '" + ex.id + "' has no gold label");
        }
        gold.push_back(*ex.gold_role);
    }

    EvalReport report;
    report.roles = schema.class_roles;
    std::size_t n_roles = report.roles.size();
    report.confusion.assign(n_roles, std::vector<int>(n_roles + 1, 0));

    int correct = 0;
    int invalid = 0;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        int g = schema.role_index(gold[i]);
        int p;
        if (predictions[i]) {
            p = schema.role_index(*predictions[i]);
            if (p < 0) {
                throw validation_error("evaluate: predicted role '" + *predictions[i] +
                                       "' not in schema");
            }
            if (p == g) {
                ++correct;
            }
        } else {
            p = static_cast<int>(n_roles);  // INVALID column
            ++invalid;
        }
        ++report.confusion[static_cast<std::size_t>(g)][static_cast<std::size_t>(p)];
        report.predictions.emplace_back(examples[i].id, predictions[i]);
    }

    report.macro_f1 = macro_f1(gold, predictions, report.roles);
    if (wf2_weights) {
        report.wf2 = wf2(gold, predictions, report.roles, *wf2_weights);
    }
    report.accuracy = static_cast<double>(correct) / static_cast<double>(examples.size());
    report.invalid_rate = static_cast<double>(invalid) / static_cast<double>(examples.size());
    return report;
}

nlohmann::json eval_report_to_json(const EvalReport& report) {
    nlohmann::json preds = nlohmann::json::array();
    for (const auto& [id, role] : report.predictions) {
        preds.push_back({{"id", id}, {"predicted", role ? nlohmann::json(*role)
                                                        : nlohmann::json(kInvalidRole)}});
    }
    std::vector<std::string> cols = report.roles;
    cols.push_back(kInvalidRole);
    nlohmann::json j{{"roles", report.roles},
                     {"confusion", {{"rows", report.roles}, {"cols", cols},
                                    {"counts", report.confusion}}},
                     {"macro_f1", report.macro_f1},
                     {"accuracy", report.accuracy},
                     {"invalid_rate", report.invalid_rate},
                     {"predictions", preds}};
    if (report.wf2) {
        j["wf2"] = *report.wf2;
    }
    return j;
}

std::string eval_report_to_csv(const EvalReport& report) {
    std::string out = "metric,value\n";
    out += "macro_f1," + fmt(report.macro_f1) + "\n";
    if (report.wf2) {
        out += "wf2," + fmt(*report.wf2) + "\n";
    }
    out += "accuracy," + fmt(report.accuracy) + "\n";
    out += "invalid_rate," + fmt(report.invalid_rate) + "\n";
    out += "\ngold\\pred";
    for (const auto& role : report.roles) {
        out += "," + csv_field(role);
    }
    out += ",";
    out += kInvalidRole;
    out += "\n";
    for (std::size_t r = 0; r < report.roles.size(); ++r) {
        out += csv_field(report.roles[r]);
        for (int count : report.confusion[r]) {
            out += "," + std::to_string(count);
        }
        out += "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sweeps

std::string sweep_kind_name(SweepKind kind) {
    switch (kind) {
        case SweepKind::kLexical: return "lexical";
        case SweepKind::kOrder: return "order";
        case SweepKind::kElaboration: return "elaboration";
    }
    return "lexical";
}

namespace {

SweepTable run_sweep(SweepKind kind, const Backend& backend,
                     const std::vector<Example>& examples, const ClassSchema& schema,
                     std::vector<LabelSet> variants, const PromptTemplate& tpl, int workers) {
    if (variants.empty()) {
        throw validation_error("sweep: empty variant list");
    }
    if (examples.empty()) {
        throw validation_error("sweep: empty example list");
    }
    std::vector<std::string> gold;
    for (const auto& ex : examples) {
        if (!ex.gold_role) {
            throw validation_error("sweep: example '" + ex.id + "' has no gold label");
        }
        gold.push_back(*ex.gold_role);
    }

    std::size_t n_variants = variants.size();
    std::size_t n_examples = examples.size();
    std::vector<int> max_tokens(n_variants);
    for (std::size_t v = 0; v < n_variants; ++v) {
        variants[v].validate(schema);
        max_tokens[v] = classify_max_tokens(backend, variants[v]);
    }

    // flat (variant, example) units, reduced in canonical order
    std::vector<Prediction> flat(n_variants * n_examples);
    parallel_for(flat.size(), workers, [&](std::size_t unit) {
        std::size_t v = unit / n_examples;
        std::size_t e = unit % n_examples;
        flat[unit] = classify_one(backend, examples[e], schema, variants[v], tpl, max_tokens[v]);
    });

    SweepTable table;
    table.kind = kind;
    table.variants = std::move(variants);
    table.scores.reserve(n_variants);
    for (std::size_t v = 0; v < n_variants; ++v) {
        std::vector<Prediction> preds(flat.begin() + static_cast<std::ptrdiff_t>(v * n_examples),
                                      flat.begin() + static_cast<std::ptrdiff_t>((v + 1) * n_examples));
        table.scores.push_back(macro_f1(gold, preds, schema.class_roles));
    }

    table.max = *std::max_element(table.scores.begin(), table.scores.end());
    table.min = *std::min_element(table.scores.begin(), table.scores.end());
    double sum = 0.0;
    for (double s : table.scores) {
        sum += s;
    }
    table.avg = sum / static_cast<double>(table.scores.size());
    double ss = 0.0;
    for (double s : table.scores) {
        ss += (s - table.avg) * (s - table.avg);
    }
    table.var = ss / static_cast<double>(table.scores.size());  // population variance
    return table;
}

} // namespace

SweepTable sweep_lexical(const Backend& backend, const std::vector<Example>& examples,
                         const ClassSchema& schema, const std::vector<LabelSet>& pool,
                         const PromptTemplate& tpl, int workers) {
    return run_sweep(SweepKind::kLexical, backend, examples, schema, pool, tpl, workers);
}

SweepTable sweep_order(const Backend& backend, const std::vector<Example>& examples,
                       const ClassSchema& schema, const LabelSet& base,
                       const PromptTemplate& tpl, int workers) {
    if (base.order_index != 0) {
        throw validation_error("sweep_order: base set must be in the default order");
    }
    auto variants = permute_orders(base, schema);
    SweepTable table =
        run_sweep(SweepKind::kOrder, backend, examples, schema, variants, tpl, workers);

    OrderStats stats;
    stats.default_score = table.scores.front();  // order_index 0 comes first
    double gain = 0.0, drop = 0.0;
    for (std::size_t v = 1; v < table.scores.size(); ++v) {
        double delta = table.scores[v] - stats.default_score;
        gain = std::max(gain, delta);
        drop = std::min(drop, delta);
    }
    stats.max_gain = gain;
    stats.max_drop = drop;
    table.order_stats = stats;
    return table;
}

SweepTable sweep_elaboration(const Backend& backend, const std::vector<Example>& examples,
                             const ClassSchema& schema, const LabelSet& base,
                             const ElaborationTemplates& templates,
                             const PromptTemplate& tpl, int workers) {
    std::vector<LabelSet> variants{base};
    for (Elaboration level : {Elaboration::kE1, Elaboration::kE2, Elaboration::kE3}) {
        variants.push_back(elaborate(base, level, templates, schema));
    }
    return run_sweep(SweepKind::kElaboration, backend, examples, schema, variants, tpl, workers);
}

nlohmann::json sweep_to_json(const SweepTable& table) {
    nlohmann::json variants = nlohmann::json::array();
    for (std::size_t v = 0; v < table.variants.size(); ++v) {
        nlohmann::json entry = table.variants[v].to_json();
        entry["score"] = table.scores[v];
        variants.push_back(std::move(entry));
    }
    nlohmann::json j{{"kind", sweep_kind_name(table.kind)},
                     {"variants", variants},
                     {"aggregate", {{"max", table.max}, {"min", table.min},
                                    {"avg", table.avg}, {"var", table.var}}}};
    if (table.order_stats) {
        j["order_stats"] = {{"default_score", table.order_stats->default_score},
                            {"max_gain", table.order_stats->max_gain},
                            {"max_drop", table.order_stats->max_drop}};
    }
    return j;
}

std::string sweep_to_csv(const SweepTable& table) {
    std::string out = "variant,score\n";
    for (std::size_t v = 0; v < table.variants.size(); ++v) {
        out += csv_field(table.variants[v].key()) + "," + fmt(table.scores[v]) + "\n";
    }
    out += "max," + fmt(table.max) + "\n";
    out += "min," + fmt(table.min) + "\n";
    out += "avg," + fmt(table.avg) + "\n";
    out += "var," + fmt(table.var) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Correlation

CorrelationRow correlate(const std::string& dataset, const std::vector<LabelSet>& sets,
                         const std::vector<double>& scores, const KurtosisReport& report) {
    if (sets.size() != scores.size()) {
        throw validation_error("correlate: sets/scores size mismatch");
    }
    if (sets.size() != report.entries.size()) {
        throw validation_error("correlate: score list covers " + std::to_string(sets.size()) +
                               " sets but the kurtosis report has " +
                               std::to_string(report.entries.size()));
    }
    std::vector<double> means;
    means.reserve(sets.size());
    for (std::size_t i = 0; i < sets.size(); ++i) {
        if (sets[i].key() != report.entries[i].set.key()) {
            throw validation_error("correlate: candidate set mismatch at index " +
                                   std::to_string(i) + " ('" + sets[i].key() + "' vs '" +
                                   report.entries[i].set.key() + "')");
        }
        means.push_back(report.entries[i].mean_kurtosis);
    }
    SpearmanResult sr = spearman(scores, means);
    CorrelationRow row;
    row.dataset = dataset;
    row.rho = sr.rho;
    row.p = sr.p;
    row.significant = sr.p < 0.05;
    return row;
}

std::string format_rho(const CorrelationRow& row) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", row.rho);
    std::string out(buf);
    if (row.significant) {
        out += '*';
    }
    return out;
}

nlohmann::json correlation_to_json(const CorrelationRow& row) {
    return nlohmann::json{{"dataset", row.dataset},
                          {"rho", row.rho},
                          {"p", row.p},
                          {"significant", row.significant},
                          {"display", format_rho(row)}};
}

std::string correlation_to_csv(const CorrelationRow& row) {
    std::string out = "dataset,rho,p,display\n";
    out += csv_field(row.dataset) + "," + fmt(row.rho) + "," + fmt(row.p) + "," +
           format_rho(row) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Key-similarity probe

namespace {

double head_averaged_cosine(const std::vector<double>& ka, const std::vector<double>& kb,
                            int n_heads) {
    int d = static_cast<int>(ka.size());
    int d_head = d / n_heads;
    double sum = 0.0;
    for (int h = 0; h < n_heads; ++h) {
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (int j = 0; j < d_head; ++j) {
            std::size_t idx = static_cast<std::size_t>(h * d_head + j);
            dot += ka[idx] * kb[idx];
            na += ka[idx] * ka[idx];
            nb += kb[idx] * kb[idx];
        }
        double denom = std::sqrt(na) * std::sqrt(nb);
        sum += denom > 0.0 ? dot / denom : 0.0;
    }
    return sum / static_cast<double>(n_heads);
}

std::vector<double> keysim_from_trace(const GenerationTrace& trace, int n_heads, int pos_a,
                                      int pos_b) {
    if (trace.prompt_keys.empty()) {
        throw unsupported_error("keysim: trace carries no prompt key vectors");
    }
    std::vector<double> sims;
    sims.reserve(trace.prompt_keys.size());
    for (const auto& layer : trace.prompt_keys) {
        if (pos_a < 0 || pos_b < 0 || pos_a >= static_cast<int>(layer.size()) ||
            pos_b >= static_cast<int>(layer.size())) {
            throw validation_error("keysim: token position out of prompt range");
        }
        sims.push_back(head_averaged_cosine(layer[static_cast<std::size_t>(pos_a)],
                                            layer[static_cast<std::size_t>(pos_b)], n_heads));
    }
    return sims;
}

// Token index containing byte offset `byte` of the prompt.
int token_at_byte(const Backend& backend, const std::vector<int>& ids, std::size_t byte) {
    std::size_t end = 0;
    for (std::size_t t = 0; t < ids.size(); ++t) {
        end += backend.piece(ids[t]).size();
        if (byte < end) {
            return static_cast<int>(t);
        }
    }
    throw validation_error("keysim: byte offset beyond prompt end");
}

} // namespace

std::vector<double> keysim_at_positions(const Backend& backend, const std::string& prompt,
                                        int pos_a, int pos_b) {
    TapFlags taps;
    taps.ffn = false;
    taps.keys = true;
    GenerationTrace trace = backend.generate_greedy(prompt, 1, taps);
    return keysim_from_trace(trace, backend.n_heads(), pos_a, pos_b);
}

std::vector<double> analyze_keysim(const Backend& backend, const ClassSchema& schema,
                                   const LabelSet& set, const PromptTemplate& tpl,
                                   const std::vector<Example>& sample) {
    if (schema.n_classes() != 2) {
        throw validation_error("analyze_keysim: binary schemas only (got " +
                               std::to_string(schema.n_classes()) + " classes)");
    }
    if (sample.empty()) {
        throw validation_error("analyze_keysim: empty sample");
    }
    set.validate(schema);

    std::vector<double> acc;
    for (const auto& ex : sample) {
        std::string prompt = render(tpl, schema, set, ex);
        std::string options = options_clause(set);
        std::size_t options_off = prompt.find(options);
        if (options_off == std::string::npos) {
            throw validation_error("analyze_keysim: options clause not found in prompt");
        }
        // first byte of each label word inside the quoted options clause
        std::size_t a_off = options_off + options.find("\"" + set.words[0] + "\"") + 1;
        std::size_t b_off = options_off + options.find("\"" + set.words[1] + "\"") + 1;

        std::vector<int> ids = backend.encode(prompt);
        int pos_a = token_at_byte(backend, ids, a_off);
        int pos_b = token_at_byte(backend, ids, b_off);

        TapFlags taps;
        taps.ffn = false;
        taps.keys = true;
        GenerationTrace trace = backend.generate_greedy(prompt, 1, taps);
        auto sims = keysim_from_trace(trace, backend.n_heads(), pos_a, pos_b);
        if (acc.empty()) {
            acc.assign(sims.size(), 0.0);
        }
        if (sims.size() != acc.size()) {
            throw validation_error("analyze_keysim: inconsistent layer count across samples");
        }
        for (std::size_t l = 0; l < sims.size(); ++l) {
            acc[l] += sims[l];
        }
    }
    for (auto& v : acc) {
        v /= static_cast<double>(sample.size());
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Logit-lens probe

std::vector<int> analyze_logitlens(const Backend& backend, const Example& ex,
                                   const ClassSchema& schema, const LabelSet& set,
                                   const PromptTemplate& tpl) {
    set.validate(schema);
    std::string prompt = render(tpl, schema, set, ex);
    TapFlags taps;
    taps.ffn = false;
    taps.hidden = true;
    GenerationTrace trace = backend.generate_greedy(prompt, 1, taps);
    const StepRecord& step = trace.steps.front();
    if (step.per_layer_hidden.empty()) {
        throw unsupported_error("analyze_logitlens: backend returned no hidden-state taps");
    }
    std::vector<int> ranks;
    ranks.reserve(step.per_layer_hidden.size());
    for (const auto& hidden : step.per_layer_hidden) {
        auto logits = backend.lens_logits(hidden);
        ranks.push_back(rank_of_token(logits, step.chosen_token_id));
    }
    return ranks;
}

// ---------------------------------------------------------------------------
// Perplexity probe

PerplexityReport analyze_perplexity(const Backend& backend,
                                    const std::vector<Example>& examples,
                                    const ClassSchema& schema, const LabelSet& set,
                                    const PromptTemplate& tpl, int workers) {
    if (examples.empty()) {
        throw validation_error("analyze_perplexity: empty example list");
    }
    set.validate(schema);
    std::vector<double> values(examples.size(), 0.0);
    parallel_for(examples.size(), workers, [&](std::size_t i) {
        std::string prompt = render(tpl, schema, set, examples[i]);
        try {
            values[i] = backend.sequence_perplexity(prompt);
        } catch (const unsupported_error&) {
            throw;
        } catch (const error& err) {
            throw validation_error("analyze_perplexity: example '" + examples[i].id +
                                   "': " + err.what());
        }
    });
    PerplexityReport report;
    double sum = 0.0;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        report.per_example.emplace_back(examples[i].id, values[i]);
        sum += values[i];
    }
    report.mean = sum / static_cast<double>(examples.size());
    return report;
}

} // namespace loads
