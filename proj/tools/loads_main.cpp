// SPDX-License-Identifier: Apache-2.0

// Command-line surface for the label-set selection toolkit.
//
// Exit codes (also listed in --help):
//   0  success, all requested artifacts written
//   1  usage error (unknown flags, missing arguments)
//   2  missing or unreadable file
//   3  malformed input (JSON / JSONL / weight container)
//   4  schema, pool or contract violation
//   5  unsupported backend capability (tap, tokenizer, lens)
//   6  degenerate numeric input

#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "loads/backend.hpp"
#include "loads/core_data.hpp"
#include "loads/errors.hpp"
#include "loads/evalharness.hpp"
#include "loads/json_util.hpp"
#include "loads/labelpool.hpp"
#include "loads/nanoformer.hpp"
#include "loads/parallel.hpp"
#include "loads/prompting.hpp"
#include "loads/selector.hpp"
#include "loads/stats.hpp"
#include "loads/version.hpp"

namespace fs = std::filesystem;
using loads::json;

namespace {

constexpr const char* kExitCodeHelp =
    "Exit codes: 0 success; 1 usage; 2 missing file; 3 malformed input; "
    "4 validation failure; 5 unsupported backend capability; 6 numeric error.";

// ---------------------------------------------------------------------------
// Shared option bundles

struct BackendOptions {
    std::string kind = "nanoformer";
    std::string weights;
    std::string vocab;
    std::string trace;
    int replay_heads = 1;

    void attach(CLI::App* cmd) {
        cmd->add_option("--backend", kind, "Backend kind: nanoformer or replay")
            ->check(CLI::IsMember({"nanoformer", "replay"}))
            ->capture_default_str();
        cmd->add_option("--weights", weights, "Weight container (nanoformer backend)");
        cmd->add_option("--vocab", vocab, "Vocabulary file")->required();
        cmd->add_option("--trace", trace, "Trace JSONL file (replay backend)");
        cmd->add_option("--replay-heads", replay_heads,
                        "Head count assumed for replayed key vectors")
            ->capture_default_str();
    }

    std::unique_ptr<loads::Backend> make() const {
        if (kind == "replay") {
            if (trace.empty()) {
                throw loads::validation_error("replay backend requires --trace");
            }
            auto tokenizer = loads::Tokenizer::load(vocab);
            auto backend = std::make_unique<loads::ReplayBackend>(
                loads::ReplayBackend::from_file(trace, tokenizer));
            backend->set_n_heads(replay_heads);
            return backend;
        }
        if (weights.empty()) {
            throw loads::validation_error("nanoformer backend requires --weights");
        }
        return std::make_unique<loads::NanoBackend>(loads::NanoBackend::load(weights, vocab));
    }

    json describe() const {
        return json{{"backend", kind},
                    {"weights", weights},
                    {"vocab", vocab},
                    {"trace", trace},
                    {"replay_heads", replay_heads}};
    }
};

// Label-set source: a pool file entry or the schema's original labels.
struct SetSelection {
    std::string pool_path;
    int set_index = 0;
    bool use_original = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--pool", pool_path, "Candidate pool JSON");
        cmd->add_option("--set-index", set_index, "Index into the pool file")
            ->capture_default_str();
        cmd->add_flag("--use-original", use_original, "Use the schema's original labels");
    }

    loads::LabelSet resolve(const loads::ClassSchema& schema) const {
        if (use_original) {
            return loads::original_label_set(schema);
        }
        if (pool_path.empty()) {
            throw loads::validation_error(
                "pass --pool FILE with --set-index, or --use-original");
        }
        auto pool = loads::load_pool(pool_path, schema);
        if (set_index < 0 || set_index >= static_cast<int>(pool.size())) {
            throw loads::validation_error("--set-index " + std::to_string(set_index) +
                                          " out of range for a pool of " +
                                          std::to_string(pool.size()) + " sets");
        }
        return pool[static_cast<std::size_t>(set_index)];
    }

    json describe() const {
        return json{{"pool", pool_path},
                    {"set_index", set_index},
                    {"use_original", use_original}};
    }
};

// Provenance stamp embedded in every output file. The hash covers the
// semantic configuration only; worker counts and output paths are excluded
// so reports stay byte-identical across parallelism levels.
json make_meta(const json& semantic_config) {
    return json{{"tool_version", loads::kToolVersion},
                {"config_hash", loads::hex64(loads::fnv1a64(semantic_config.dump()))}};
}

void write_report(const fs::path& path, json body, const json& meta) {
    body["meta"] = meta;
    loads::write_text_file(path, body.dump(2) + "\n");
}

void write_csv(const fs::path& path, const std::string& csv, const json& meta) {
    std::string head = "# tool_version=" + meta.at("tool_version").get<std::string>() +
                       " config_hash=" + meta.at("config_hash").get<std::string>() + "\n";
    loads::write_text_file(path, head + csv);
}

std::vector<loads::Example> sampled_examples(const std::vector<loads::Example>& all,
                                             const loads::ClassSchema& schema, int sample_size,
                                             std::uint64_t seed, bool stratified) {
    auto draw = stratified
                    ? loads::draw_sample_stratified(all, schema, sample_size, seed)
                    : loads::draw_sample(all, sample_size, seed);
    return loads::select_examples(all, draw);
}

struct CommonEval {
    std::string schema_path;
    std::string dataset_path;
    std::string template_path;
    int workers = 1;
    std::string out_dir;
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Label-set selection and analysis toolkit for zero-shot classification"};
    app.set_version_flag("--version", loads::kToolVersion);
    app.footer(kExitCodeHelp);
    app.require_subcommand(1);

    // ---- model ----
    auto* model = app.add_subcommand("model", "Model container utilities");
    model->require_subcommand(1);
    auto* init_random_cmd =
        model->add_subcommand("init-random", "Create seeded random weights");
    struct {
        std::string config_path;
        std::uint64_t seed = 0;
        std::string out;
    } static init_opts;
    init_random_cmd->add_option("--config", init_opts.config_path, "Model config JSON")
        ->required();
    init_random_cmd->add_option("--seed", init_opts.seed, "PRNG seed")->capture_default_str();
    init_random_cmd->add_option("--out", init_opts.out, "Output weights path")->required();
    init_random_cmd->callback([] {
        auto cfg = loads::ModelConfig::load(init_opts.config_path);
        json semantic{{"cmd", "model init-random"},
                      {"config", init_opts.config_path},
                      {"seed", init_opts.seed}};
        auto container = loads::init_random(cfg, init_opts.seed);
        container.extra = make_meta(semantic);
        container.save(init_opts.out);
        std::cout << "wrote " << init_opts.out << "\n";
    });

    // ---- pool ----
    auto* pool_cmd = app.add_subcommand("pool", "Candidate pool construction");
    pool_cmd->require_subcommand(1);
    auto* pool_build = pool_cmd->add_subcommand("build", "Expand the lexicon into a pool");
    struct {
        std::string schema_path;
        std::string lexicon_path;
        std::string elaborate;
        std::string elaboration_templates;
        bool orders = false;
        std::string out;
    } static pool_opts;
    pool_build->add_option("--schema", pool_opts.schema_path, "Task schema JSON")->required();
    pool_build->add_option("--lexicon", pool_opts.lexicon_path, "Lexicon JSON")->required();
    pool_build->add_flag("--orders", pool_opts.orders,
                         "Also emit every order permutation of each set");
    pool_build->add_option("--elaborate", pool_opts.elaborate,
                           "Rewrite sets at an elaboration level (E1|E2|E3)")
        ->check(CLI::IsMember({"E1", "E2", "E3"}));
    pool_build->add_option("--elaboration-templates", pool_opts.elaboration_templates,
                           "Per-level, per-role format strings JSON");
    pool_build->add_option("--out", pool_opts.out, "Output pool JSON")->required();
    pool_build->callback([] {
        auto schema = loads::ClassSchema::load(pool_opts.schema_path);
        auto lexicon = loads::Lexicon::load(pool_opts.lexicon_path);
        if (pool_opts.orders && !pool_opts.elaborate.empty()) {
            throw loads::validation_error("--orders and --elaborate are mutually exclusive");
        }
        auto pool = loads::expand_pool(schema, lexicon);
        if (pool_opts.orders) {
            std::vector<loads::LabelSet> expanded;
            for (const auto& set : pool) {
                for (auto& variant : loads::permute_orders(set, schema)) {
                    expanded.push_back(std::move(variant));
                }
            }
            pool = std::move(expanded);
        } else if (!pool_opts.elaborate.empty()) {
            if (pool_opts.elaboration_templates.empty()) {
                throw loads::validation_error("--elaborate requires --elaboration-templates");
            }
            auto templates =
                loads::ElaborationTemplates::load(pool_opts.elaboration_templates);
            auto level = loads::elaboration_from_name(pool_opts.elaborate);
            for (auto& set : pool) {
                set = loads::elaborate(set, level, templates, schema);
            }
        }
        json semantic{{"cmd", "pool build"},
                      {"schema", pool_opts.schema_path},
                      {"lexicon", pool_opts.lexicon_path},
                      {"orders", pool_opts.orders},
                      {"elaborate", pool_opts.elaborate}};
        loads::save_pool(pool_opts.out, pool, make_meta(semantic));
        std::cout << "wrote " << pool_opts.out << " (" << pool.size() << " sets)\n";
    });

    // ---- select loads ----
    auto* select_cmd = app.add_subcommand("select", "Label-set selection");
    select_cmd->require_subcommand(1);

    auto* select_loads = select_cmd->add_subcommand(
        "loads", "Rank candidates by mean activation kurtosis and pick the minimum");
    struct {
        CommonEval common;
        std::string pool_path;
        BackendOptions backend;
        int sample_size = 100;
        std::uint64_t seed = 0;
        bool stratified = false;
    } static loads_opts;
    select_loads->add_option("--schema", loads_opts.common.schema_path)->required();
    select_loads->add_option("--dataset", loads_opts.common.dataset_path)->required();
    select_loads->add_option("--template", loads_opts.common.template_path)->required();
    select_loads->add_option("--pool", loads_opts.pool_path)->required();
    select_loads->add_option("--sample-size", loads_opts.sample_size)->capture_default_str();
    select_loads->add_option("--seed", loads_opts.seed)->capture_default_str();
    select_loads->add_flag("--stratified", loads_opts.stratified,
                           "Stratified sampling (requires gold labels)");
    select_loads->add_option("--workers", loads_opts.common.workers)->capture_default_str();
    select_loads->add_option("--out", loads_opts.common.out_dir, "Output directory")
        ->required();
    loads_opts.backend.attach(select_loads);
    select_loads->callback([] {
        auto schema = loads::ClassSchema::load(loads_opts.common.schema_path);
        auto dataset = loads::load_dataset(loads_opts.common.dataset_path, schema);
        auto tpl = loads::PromptTemplate::load(loads_opts.common.template_path);
        auto pool = loads::load_pool(loads_opts.pool_path, schema);
        auto backend = loads_opts.backend.make();
        auto sample = sampled_examples(dataset, schema, loads_opts.sample_size,
                                       loads_opts.seed, loads_opts.stratified);
        auto result = loads::loads_select(*backend, schema, sample, pool, tpl,
                                          loads_opts.common.workers);
        json semantic{{"cmd", "select loads"},
                      {"schema", loads_opts.common.schema_path},
                      {"dataset", loads_opts.common.dataset_path},
                      {"template", loads_opts.common.template_path},
                      {"pool", loads_opts.pool_path},
                      {"sample_size", loads_opts.sample_size},
                      {"seed", loads_opts.seed},
                      {"stratified", loads_opts.stratified},
                      {"io", loads_opts.backend.describe()}};
        auto meta = make_meta(semantic);
        fs::path out(loads_opts.common.out_dir);
        write_report(out / "selection.json", loads::selection_result_to_json(result), meta);
        write_report(out / "kurtosis_report.json",
                     loads::kurtosis_report_to_json(*result.report), meta);
        std::cout << "chosen: " << result.chosen.key() << "\n";
    });

    // ---- select baseline ----
    auto* select_baseline = select_cmd->add_subcommand("baseline", "Comparison strategies");
    struct {
        CommonEval common;
        std::string method;
        std::string pool_path;
        std::string lexicon_path;
        std::string open_template_path;
        BackendOptions backend;
        int sample_size = 100;
        std::uint64_t seed = 0;
        bool stratified = false;
    } static baseline_opts;
    select_baseline->add_option("--method", baseline_opts.method)
        ->check(CLI::IsMember({"original", "verbalizer", "selfgen"}))
        ->required();
    select_baseline->add_option("--schema", baseline_opts.common.schema_path)->required();
    select_baseline->add_option("--dataset", baseline_opts.common.dataset_path);
    select_baseline->add_option("--open-template", baseline_opts.open_template_path,
                                "Options-free template (selfgen)");
    select_baseline->add_option("--lexicon", baseline_opts.lexicon_path, "Lexicon (selfgen)");
    select_baseline->add_option("--pool", baseline_opts.pool_path,
                                "Candidate pool (verbalizer)");
    select_baseline->add_option("--sample-size", baseline_opts.sample_size)
        ->capture_default_str();
    select_baseline->add_option("--seed", baseline_opts.seed)->capture_default_str();
    select_baseline->add_flag("--stratified", baseline_opts.stratified);
    select_baseline->add_option("--workers", baseline_opts.common.workers)
        ->capture_default_str();
    select_baseline->add_option("--out", baseline_opts.common.out_dir)->required();
    select_baseline->add_option("--backend", baseline_opts.backend.kind)
        ->check(CLI::IsMember({"nanoformer", "replay"}))
        ->capture_default_str();
    select_baseline->add_option("--weights", baseline_opts.backend.weights);
    select_baseline->add_option("--vocab", baseline_opts.backend.vocab);
    select_baseline->add_option("--trace", baseline_opts.backend.trace);
    select_baseline->callback([] {
        auto schema = loads::ClassSchema::load(baseline_opts.common.schema_path);
        json semantic{{"cmd", "select baseline"},
                      {"method", baseline_opts.method},
                      {"schema", baseline_opts.common.schema_path},
                      {"dataset", baseline_opts.common.dataset_path},
                      {"pool", baseline_opts.pool_path},
                      {"lexicon", baseline_opts.lexicon_path},
                      {"open_template", baseline_opts.open_template_path},
                      {"sample_size", baseline_opts.sample_size},
                      {"seed", baseline_opts.seed},
                      {"io", baseline_opts.backend.describe()}};
        auto meta = make_meta(semantic);
        fs::path out(baseline_opts.common.out_dir);

        loads::SelectionResult result;
        if (baseline_opts.method == "original") {
            result.method = loads::SelectionMethod::kOriginal;
            result.chosen = loads::original_label_set(schema);
        } else if (baseline_opts.method == "verbalizer") {
            // the prompt keeps the original labels; the candidate pool only
            // reshapes class scores at prediction time
            if (baseline_opts.pool_path.empty()) {
                throw loads::validation_error("--method verbalizer requires --pool");
            }
            auto pool = loads::load_pool(baseline_opts.pool_path, schema);
            result.method = loads::SelectionMethod::kVerbalizer;
            result.chosen = loads::original_label_set(schema);
            result.diagnostics =
                json{{"note", "run `eval run --predictor verbalizer` with the same pool"},
                     {"pool_size", pool.size()}};
        } else {
            if (baseline_opts.common.dataset_path.empty() ||
                baseline_opts.open_template_path.empty() ||
                baseline_opts.lexicon_path.empty()) {
                throw loads::validation_error(
                    "--method selfgen requires --dataset, --open-template and --lexicon");
            }
            auto dataset = loads::load_dataset(baseline_opts.common.dataset_path, schema);
            auto open_tpl = loads::PromptTemplate::load(baseline_opts.open_template_path);
            auto lexicon = loads::Lexicon::load(baseline_opts.lexicon_path);
            auto backend = baseline_opts.backend.make();
            auto sample = sampled_examples(dataset, schema, baseline_opts.sample_size,
                                           baseline_opts.seed, baseline_opts.stratified);
            result = loads::selfgen_select(*backend, schema, sample, lexicon, open_tpl,
                                           baseline_opts.common.workers);
        }
        write_report(out / "selection.json", loads::selection_result_to_json(result), meta);
        std::cout << "chosen: " << result.chosen.key() << "\n";
    });

    // ---- eval run ----
    auto* eval_cmd = app.add_subcommand("eval", "Classification evaluation");
    eval_cmd->require_subcommand(1);
    auto* eval_run = eval_cmd->add_subcommand("run", "Classify a dataset and score it");
    struct {
        CommonEval common;
        SetSelection set;
        BackendOptions backend;
        std::string predictor = "greedy";
        std::string wf2_weights;
    } static eval_opts;
    eval_run->add_option("--schema", eval_opts.common.schema_path)->required();
    eval_run->add_option("--dataset", eval_opts.common.dataset_path)->required();
    eval_run->add_option("--template", eval_opts.common.template_path)->required();
    eval_run->add_option("--predictor", eval_opts.predictor,
                         "greedy generation matching or verbalizer aggregation")
        ->check(CLI::IsMember({"greedy", "verbalizer"}))
        ->capture_default_str();
    eval_run->add_option("--wf2-weights", eval_opts.wf2_weights,
                         "Per-role weight JSON enabling the weighted-F1 metric");
    eval_run->add_option("--workers", eval_opts.common.workers)->capture_default_str();
    eval_run->add_option("--out", eval_opts.common.out_dir)->required();
    eval_opts.set.attach(eval_run);
    eval_opts.backend.attach(eval_run);
    eval_run->callback([] {
        auto schema = loads::ClassSchema::load(eval_opts.common.schema_path);
        auto dataset = loads::load_dataset(eval_opts.common.dataset_path, schema);
        auto tpl = loads::PromptTemplate::load(eval_opts.common.template_path);
        auto backend = eval_opts.backend.make();

        std::vector<loads::Prediction> predictions;
        loads::LabelSet set;
        if (eval_opts.predictor == "verbalizer") {
            if (eval_opts.set.pool_path.empty()) {
                throw loads::validation_error("--predictor verbalizer requires --pool");
            }
            auto pool = loads::load_pool(eval_opts.set.pool_path, schema);
            predictions.resize(dataset.size());
            loads::parallel_for(dataset.size(), eval_opts.common.workers, [&](std::size_t i) {
                predictions[i] =
                    loads::verbalizer_predict(*backend, dataset[i], schema, pool, tpl);
            });
            set = loads::original_label_set(schema);
        } else {
            set = eval_opts.set.resolve(schema);
            predictions = loads::classify(*backend, dataset, schema, set, tpl,
                                          eval_opts.common.workers);
        }

        std::optional<std::map<std::string, double>> weights;
        if (!eval_opts.wf2_weights.empty()) {
            weights = loads::read_json_file(eval_opts.wf2_weights)
                          .get<std::map<std::string, double>>();
        }
        auto report =
            loads::evaluate(schema, dataset, predictions, weights ? &*weights : nullptr);

        json semantic{{"cmd", "eval run"},
                      {"schema", eval_opts.common.schema_path},
                      {"dataset", eval_opts.common.dataset_path},
                      {"template", eval_opts.common.template_path},
                      {"predictor", eval_opts.predictor},
                      {"set", eval_opts.set.describe()},
                      {"wf2_weights", eval_opts.wf2_weights},
                      {"io", eval_opts.backend.describe()}};
        auto meta = make_meta(semantic);
        fs::path out(eval_opts.common.out_dir);
        json body = loads::eval_report_to_json(report);
        body["label_set"] = set.to_json();
        write_report(out / "eval_report.json", body, meta);
        write_csv(out / "eval_report.csv", loads::eval_report_to_csv(report), meta);
        std::cout << "macro_f1: " << report.macro_f1 << "\n";
    });

    // ---- sweep ----
    auto* sweep_cmd = app.add_subcommand("sweep", "Label-variant sweeps");
    sweep_cmd->require_subcommand(1);
    struct SweepOpts {
        CommonEval common;
        SetSelection set;
        BackendOptions backend;
        std::string elaboration_templates;
    };
    static SweepOpts sweep_opts;
    auto add_sweep = [&](const char* name, const char* help) {
        auto* cmd = sweep_cmd->add_subcommand(name, help);
        cmd->add_option("--schema", sweep_opts.common.schema_path)->required();
        cmd->add_option("--dataset", sweep_opts.common.dataset_path)->required();
        cmd->add_option("--template", sweep_opts.common.template_path)->required();
        cmd->add_option("--workers", sweep_opts.common.workers)->capture_default_str();
        cmd->add_option("--out", sweep_opts.common.out_dir)->required();
        sweep_opts.set.attach(cmd);
        sweep_opts.backend.attach(cmd);
        return cmd;
    };
    auto run_sweep_command = [](const std::string& kind) {
        auto schema = loads::ClassSchema::load(sweep_opts.common.schema_path);
        auto dataset = loads::load_dataset(sweep_opts.common.dataset_path, schema);
        auto tpl = loads::PromptTemplate::load(sweep_opts.common.template_path);
        auto backend = sweep_opts.backend.make();

        loads::SweepTable table;
        if (kind == "lexical") {
            if (sweep_opts.set.pool_path.empty()) {
                throw loads::validation_error("sweep lexical requires --pool");
            }
            auto pool = loads::load_pool(sweep_opts.set.pool_path, schema);
            table = loads::sweep_lexical(*backend, dataset, schema, pool, tpl,
                                         sweep_opts.common.workers);
        } else if (kind == "order") {
            auto base = sweep_opts.set.resolve(schema);
            table = loads::sweep_order(*backend, dataset, schema, base, tpl,
                                       sweep_opts.common.workers);
        } else {
            auto base = sweep_opts.set.resolve(schema);
            auto templates =
                loads::ElaborationTemplates::load(sweep_opts.elaboration_templates);
            table = loads::sweep_elaboration(*backend, dataset, schema, base, templates, tpl,
                                             sweep_opts.common.workers);
        }
        json semantic{{"cmd", "sweep " + kind},
                      {"schema", sweep_opts.common.schema_path},
                      {"dataset", sweep_opts.common.dataset_path},
                      {"template", sweep_opts.common.template_path},
                      {"set", sweep_opts.set.describe()},
                      {"elaboration_templates", sweep_opts.elaboration_templates},
                      {"io", sweep_opts.backend.describe()}};
        auto meta = make_meta(semantic);
        fs::path out(sweep_opts.common.out_dir);
        write_report(out / "sweep.json", loads::sweep_to_json(table), meta);
        write_csv(out / "sweep.csv", loads::sweep_to_csv(table), meta);
        std::cout << "variants: " << table.variants.size() << " avg: " << table.avg << "\n";
    };
    add_sweep("lexical", "Score every candidate set in a pool")
        ->callback([run_sweep_command] { run_sweep_command("lexical"); });
    add_sweep("order", "Score every ordering of one set")
        ->callback([run_sweep_command] { run_sweep_command("order"); });
    auto* sweep_elab = add_sweep("elaboration", "Score a set at E1/E2/E3 elaborations");
    sweep_elab->add_option("--elaboration-templates", sweep_opts.elaboration_templates)
        ->required();
    sweep_elab->callback([run_sweep_command] { run_sweep_command("elaboration"); });

    // ---- analyze ----
    auto* analyze_cmd =
        app.add_subcommand("analyze", "Correlation and interpretability probes");
    analyze_cmd->require_subcommand(1);

    auto* corr = analyze_cmd->add_subcommand(
        "correlate", "Spearman correlation between sweep scores and kurtosis means");
    struct {
        std::string schema_path;
        std::string sweep_path;
        std::string report_path;
        std::string dataset_name;
        std::string out_dir;
    } static corr_opts;
    corr->add_option("--schema", corr_opts.schema_path)->required();
    corr->add_option("--sweep", corr_opts.sweep_path, "sweep.json from `sweep lexical`")
        ->required();
    corr->add_option("--report", corr_opts.report_path,
                     "kurtosis_report.json from `select loads`")
        ->required();
    corr->add_option("--dataset-name", corr_opts.dataset_name)->required();
    corr->add_option("--out", corr_opts.out_dir)->required();
    corr->callback([] {
        auto schema = loads::ClassSchema::load(corr_opts.schema_path);
        auto sweep_json = loads::read_json_file(corr_opts.sweep_path);
        std::vector<loads::LabelSet> sets;
        std::vector<double> scores;
        try {
            for (const auto& variant : sweep_json.at("variants")) {
                auto set = loads::LabelSet::from_json(variant);
                set.validate(schema);
                sets.push_back(std::move(set));
                scores.push_back(variant.at("score").get<double>());
            }
        } catch (const json::exception& e) {
            throw loads::parse_error(std::string("bad sweep JSON: ") + e.what());
        }
        auto report = loads::kurtosis_report_from_json(
            loads::read_json_file(corr_opts.report_path), schema);
        auto row = loads::correlate(corr_opts.dataset_name, sets, scores, report);
        json semantic{{"cmd", "analyze correlate"},
                      {"schema", corr_opts.schema_path},
                      {"sweep", corr_opts.sweep_path},
                      {"report", corr_opts.report_path},
                      {"dataset_name", corr_opts.dataset_name}};
        auto meta = make_meta(semantic);
        fs::path out(corr_opts.out_dir);
        write_report(out / "correlation.json", loads::correlation_to_json(row), meta);
        write_csv(out / "correlation.csv", loads::correlation_to_csv(row), meta);
        std::cout << corr_opts.dataset_name << ": " << loads::format_rho(row) << "\n";
    });

    auto* ppl = analyze_cmd->add_subcommand("perplexity", "Mean prompt perplexity for a set");
    struct {
        CommonEval common;
        SetSelection set;
        BackendOptions backend;
    } static ppl_opts;
    ppl->add_option("--schema", ppl_opts.common.schema_path)->required();
    ppl->add_option("--dataset", ppl_opts.common.dataset_path)->required();
    ppl->add_option("--template", ppl_opts.common.template_path)->required();
    ppl->add_option("--workers", ppl_opts.common.workers)->capture_default_str();
    ppl->add_option("--out", ppl_opts.common.out_dir)->required();
    ppl_opts.set.attach(ppl);
    ppl_opts.backend.attach(ppl);
    ppl->callback([] {
        auto schema = loads::ClassSchema::load(ppl_opts.common.schema_path);
        auto dataset = loads::load_dataset(ppl_opts.common.dataset_path, schema);
        auto tpl = loads::PromptTemplate::load(ppl_opts.common.template_path);
        auto backend = ppl_opts.backend.make();
        auto set = ppl_opts.set.resolve(schema);
        auto report = loads::analyze_perplexity(*backend, dataset, schema, set, tpl,
                                                ppl_opts.common.workers);
        json per_example = json::array();
        for (const auto& [id, value] : report.per_example) {
            per_example.push_back({{"id", id}, {"perplexity", value}});
        }
        json semantic{{"cmd", "analyze perplexity"},
                      {"schema", ppl_opts.common.schema_path},
                      {"dataset", ppl_opts.common.dataset_path},
                      {"template", ppl_opts.common.template_path},
                      {"set", ppl_opts.set.describe()},
                      {"io", ppl_opts.backend.describe()}};
        write_report(fs::path(ppl_opts.common.out_dir) / "perplexity.json",
                     json{{"mean", report.mean},
                          {"per_example", per_example},
                          {"label_set", set.to_json()}},
                     make_meta(semantic));
        std::cout << "mean perplexity: " << report.mean << "\n";
    });

    auto* keysim = analyze_cmd->add_subcommand(
        "keysim", "Per-layer cosine similarity of the two label words' key vectors");
    struct {
        CommonEval common;
        SetSelection set;
        BackendOptions backend;
        int sample_size = 100;
        std::uint64_t seed = 0;
    } static keysim_opts;
    keysim->add_option("--schema", keysim_opts.common.schema_path)->required();
    keysim->add_option("--dataset", keysim_opts.common.dataset_path)->required();
    keysim->add_option("--template", keysim_opts.common.template_path)->required();
    keysim->add_option("--sample-size", keysim_opts.sample_size)->capture_default_str();
    keysim->add_option("--seed", keysim_opts.seed)->capture_default_str();
    keysim->add_option("--out", keysim_opts.common.out_dir)->required();
    keysim_opts.set.attach(keysim);
    keysim_opts.backend.attach(keysim);
    keysim->callback([] {
        auto schema = loads::ClassSchema::load(keysim_opts.common.schema_path);
        auto dataset = loads::load_dataset(keysim_opts.common.dataset_path, schema);
        auto tpl = loads::PromptTemplate::load(keysim_opts.common.template_path);
        auto backend = keysim_opts.backend.make();
        auto set = keysim_opts.set.resolve(schema);
        auto sample = sampled_examples(dataset, schema, keysim_opts.sample_size,
                                       keysim_opts.seed, false);
        auto sims = loads::analyze_keysim(*backend, schema, set, tpl, sample);
        json semantic{{"cmd", "analyze keysim"},
                      {"schema", keysim_opts.common.schema_path},
                      {"dataset", keysim_opts.common.dataset_path},
                      {"template", keysim_opts.common.template_path},
                      {"set", keysim_opts.set.describe()},
                      {"sample_size", keysim_opts.sample_size},
                      {"seed", keysim_opts.seed},
                      {"io", keysim_opts.backend.describe()}};
        write_report(fs::path(keysim_opts.common.out_dir) / "keysim.json",
                     json{{"per_layer", sims}, {"label_set", set.to_json()}},
                     make_meta(semantic));
        std::cout << "layers: " << sims.size() << "\n";
    });

    auto* lens = analyze_cmd->add_subcommand(
        "logitlens", "Per-layer rank of the finally predicted label token");
    struct {
        CommonEval common;
        SetSelection set;
        BackendOptions backend;
        std::string example_id;
    } static lens_opts;
    lens->add_option("--schema", lens_opts.common.schema_path)->required();
    lens->add_option("--dataset", lens_opts.common.dataset_path)->required();
    lens->add_option("--template", lens_opts.common.template_path)->required();
    lens->add_option("--example-id", lens_opts.example_id, "Example to probe")->required();
    lens->add_option("--out", lens_opts.common.out_dir)->required();
    lens_opts.set.attach(lens);
    lens_opts.backend.attach(lens);
    lens->callback([] {
        auto schema = loads::ClassSchema::load(lens_opts.common.schema_path);
        auto dataset = loads::load_dataset(lens_opts.common.dataset_path, schema);
        auto tpl = loads::PromptTemplate::load(lens_opts.common.template_path);
        auto backend = lens_opts.backend.make();
        auto set = lens_opts.set.resolve(schema);
        const loads::Example* probe = nullptr;
        for (const auto& ex : dataset) {
            if (ex.id == lens_opts.example_id) {
                probe = &ex;
            }
        }
        if (!probe) {
            throw loads::validation_error("example id '" + lens_opts.example_id +
                                          "' not found in dataset");
        }
        auto ranks = loads::analyze_logitlens(*backend, *probe, schema, set, tpl);
        json semantic{{"cmd", "analyze logitlens"},
                      {"schema", lens_opts.common.schema_path},
                      {"dataset", lens_opts.common.dataset_path},
                      {"template", lens_opts.common.template_path},
                      {"example_id", lens_opts.example_id},
                      {"set", lens_opts.set.describe()},
                      {"io", lens_opts.backend.describe()}};
        write_report(fs::path(lens_opts.common.out_dir) / "logitlens.json",
                     json{{"example_id", lens_opts.example_id},
                          {"ranks", ranks},
                          {"label_set", set.to_json()}},
                     make_meta(semantic));
        std::cout << "final rank: " << ranks.back() << "\n";
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;  // usage errors share exit code 1
    } catch (const loads::io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const loads::parse_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const loads::validation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const loads::unsupported_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    } catch (const loads::numeric_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 6;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
