// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one criterion per line, pass/fail, with timings.
// Exit code 0 only when every criterion passes.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "loads/backend.hpp"
#include "loads/core_data.hpp"
#include "loads/errors.hpp"
#include "loads/evalharness.hpp"
#include "loads/json_util.hpp"
#include "loads/labelpool.hpp"
#include "loads/nanoformer.hpp"
#include "loads/prompting.hpp"
#include "loads/selector.hpp"
#include "loads/stats.hpp"
#include "../support/oracles.hpp"
#include "../support/paths.hpp"
#include "../support/synthetic.hpp"

using namespace loads;

namespace {

struct check_failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool cond, const std::string& msg) {
    if (!cond) {
        throw check_failure(msg);
    }
}

void require_close(double got, double want, double tol, const std::string& what) {
    if (!(std::abs(got - want) <= tol)) {
        std::ostringstream os;
        os << what << ": got " << got << ", want " << want << " +/- " << tol;
        throw check_failure(os.str());
    }
}

std::string fx(const std::string& rel) {
    return (testsupport::fixtures_dir() / rel).string();
}

int run_cli(const std::string& args) {
    std::string cmd = testsupport::cli_path().string() + " " + args + " > /dev/null 2>&1";
    return WEXITSTATUS(std::system(cmd.c_str()));
}

// Standard normals for the Monte-Carlo check, independent of the library's
// initialization stream.
struct GaussStream {
    SplitMix64 rng;
    bool have = false;
    double spare = 0.0;
    explicit GaussStream(std::uint64_t seed) : rng(seed) {}
    double next() {
        if (have) {
            have = false;
            return spare;
        }
        double u1 = (static_cast<double>(rng.next() >> 11) + 1.0) * 0x1.0p-53;
        double u2 = static_cast<double>(rng.next() >> 11) * 0x1.0p-53;
        double r = std::sqrt(-2.0 * std::log(u1));
        spare = r * std::sin(2.0 * M_PI * u2);
        have = true;
        return r * std::cos(2.0 * M_PI * u2);
    }
};

// ---------------------------------------------------------------------------
// Criterion 1: kurtosis oracle

void c1_kurtosis_oracle() {
    SplitMix64 rng(40430);
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t n = 2 + rng.next_below(4095);
        std::vector<double> v(n);
        for (auto& x : v) {
            x = rng.next_unit() * 40.0 - 20.0;
        }
        double got = kurtosis(v);
        double want = testsupport::naive_kurtosis(v);
        require(std::abs(got - want) <= 1e-12 * std::max(1.0, std::abs(want)),
                "kurtosis deviates from the naive reference beyond 1e-12 relative");
    }
    std::vector<double> two_point{1.0, -1.0, 1.0, -1.0};
    require(kurtosis(two_point) == 1.0, "kurtosis([1,-1,1,-1]) must be exactly 1");
    std::vector<double> spike{0.0, 0.0, 0.0, 10.0};
    require_close(kurtosis(spike), 7.0 / 3.0, 1e-12, "kurtosis([0,0,0,10])");

    GaussStream gauss(777);
    std::vector<double> normal(1000000);
    for (auto& x : normal) {
        x = gauss.next();
    }
    require_close(kurtosis(normal), 3.0, 0.05, "kurtosis of 1e6 standard normals");
}

// ---------------------------------------------------------------------------
// Criterion 2: gated-FFN tap fidelity

void c2_tap_fidelity() {
    for (auto act : {Activation::kSilu, Activation::kGelu}) {
        ModelConfig cfg;
        cfg.vocab_size = 269;  // 258 reserved + 11 vocab entries
        cfg.d_model = 8;
        cfg.n_layers = 2;
        cfg.n_heads = 2;
        cfg.d_ff = 16;
        cfg.max_context = 64;
        cfg.act_fn = act;
        auto wc = init_random(cfg, act == Activation::kSilu ? 11 : 22);
        std::vector<std::string> tokens{"the", " the", "claim", " claim", "an", " an",
                                        "stance", " stance", "of", " of", "."};
        NanoBackend backend(wc, Tokenizer::from_tokens(tokens));

        SplitMix64 rng(1234);
        TapFlags taps;
        for (int trial = 0; trial < 50; ++trial) {
            // random prompt over vocabulary words
            std::string prompt = "the";
            int len = 3 + static_cast<int>(rng.next_below(20));
            for (int i = 0; i < len; ++i) {
                prompt += " " + tokens[static_cast<std::size_t>(rng.next_below(5))];
            }
            auto trace = backend.generate_greedy(prompt, 1, taps);

            testsupport::ReferenceTaps ref;
            testsupport::reference_forward(wc, trace.prompt_token_ids, &ref);
            const auto& got = trace.steps.front().ffn_activation;
            const auto& want = ref.ffn_activation.back();
            require(got.size() == want.size(), "tap length mismatch");
            for (std::size_t i = 0; i < got.size(); ++i) {
                require(std::abs(got[i] - want[i]) <= 1e-9,
                        "ffn_activation deviates from the straight-line recomputation");
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Criterion 3: selection oracle on a replay backend

void c3_selection_oracle() {
    ClassSchema schema;
    schema.task_name = "oracle";
    schema.class_roles = {"positive", "negative"};
    schema.original_labels = {{"positive", "alpha0"}, {"negative", "beta0"}};
    schema.text1_name = "claim";
    schema.text2_name = "comment";
    auto tpl = PromptTemplate::load(fx("templates/default.json"));

    std::vector<LabelSet> pool;
    std::vector<double> spikes;
    SplitMix64 rng(9321);
    for (int k = 0; k < 30; ++k) {
        LabelSet set;
        set.words = {"alpha" + std::to_string(k), "beta" + std::to_string(k)};
        set.role_of = schema.class_roles;
        set.source = LabelSource::kLexicon;
        pool.push_back(std::move(set));
        spikes.push_back(3.0 + rng.next_unit() * 6.0);
    }
    auto examples = testsupport::synthetic_examples(100, "c3");
    auto backend = testsupport::make_spike_replay(schema, tpl, pool, spikes, examples, 64,
                                                  0.01, 5150);

    auto result = loads_select(backend, schema, examples, pool, tpl, 2);

    // naive loop: per-set mean of naive kurtosis, argmin, full ranking
    std::vector<double> means(pool.size(), 0.0);
    TapFlags taps;
    for (std::size_t s = 0; s < pool.size(); ++s) {
        for (const auto& ex : examples) {
            auto trace = backend.generate_greedy(render(tpl, schema, pool[s], ex), 1, taps);
            means[s] += testsupport::naive_kurtosis(trace.steps.front().ffn_activation);
        }
        means[s] /= static_cast<double>(examples.size());
    }
    std::size_t want_argmin = 0;
    for (std::size_t s = 1; s < means.size(); ++s) {
        if (means[s] < means[want_argmin]) {
            want_argmin = s;
        }
    }
    require(result.chosen.words == pool[want_argmin].words,
            "chosen set differs from the naive argmin");
    for (std::size_t s = 0; s < pool.size(); ++s) {
        int want_rank = 1;
        for (std::size_t t = 0; t < pool.size(); ++t) {
            if (means[t] < means[s] || (means[t] == means[s] && t < s)) {
                ++want_rank;
            }
        }
        require(result.report->entries[s].rank == want_rank,
                "ranking differs from the naive recomputation at index " + std::to_string(s));
        require(std::abs(result.report->entries[s].mean_kurtosis - means[s]) <= 1e-12,
                "per-set mean deviates from the naive loop");
    }
}

// ---------------------------------------------------------------------------
// Criterion 4: rank stability across nested sample sizes

void c4_rank_stability() {
    ClassSchema schema;
    schema.task_name = "rankstab";
    schema.class_roles = {"positive", "negative"};
    schema.original_labels = {{"positive", "calm"}, {"negative", "anticalm"}};
    schema.text1_name = "claim";
    schema.text2_name = "comment";
    auto tpl = PromptTemplate::load(fx("templates/default.json"));
    auto fixture = testsupport::load_rankstab_fixture(fx("synthetic/rankstab.json"), schema);

    auto examples = testsupport::synthetic_examples(fixture.n_examples, "rs");
    auto backend = testsupport::make_spike_replay(schema, tpl, fixture.sets, fixture.spikes,
                                                  examples, fixture.d_ff, fixture.noise,
                                                  fixture.base_seed);

    std::vector<std::vector<std::string>> top5_per_size;
    for (int size : {50, 100, 300, 500, 1000}) {
        auto draw = draw_sample(examples, size, 4242);
        auto sample = select_examples(examples, draw);
        auto result = loads_select(backend, schema, sample, fixture.sets, tpl, 2);
        std::vector<std::string> top5(5);
        for (const auto& entry : result.report->entries) {
            if (entry.rank <= 5) {
                top5[static_cast<std::size_t>(entry.rank - 1)] = entry.set.key();
            }
        }
        top5_per_size.push_back(std::move(top5));
    }
    for (std::size_t i = 1; i < top5_per_size.size(); ++i) {
        require(top5_per_size[i] == top5_per_size[0],
                "top-5 ranking changed between nested sample sizes");
    }
}

// ---------------------------------------------------------------------------
// Criterion 5: Spearman correlation

void c5_spearman() {
    std::vector<double> xs{1, 2, 3, 4, 5, 6};
    std::vector<double> up{2, 4, 6, 8, 10, 12};
    std::vector<double> down{12, 10, 8, 6, 4, 2};
    require(spearman(xs, up).rho == 1.0, "monotone rho must be exactly 1");
    require(spearman(xs, down).rho == -1.0, "reversed rho must be exactly -1");

    std::vector<double> tx{1, 2, 3, 4};
    std::vector<double> ty{1, 2, 2, 4};
    require_close(spearman(tx, ty).rho, 0.9486833, 1e-6, "midrank tie case");

    // exact permutation p versus full enumeration for n <= 10
    std::vector<std::pair<std::vector<double>, std::vector<double>>> cases = {
        {{1, 2, 3, 4, 5}, {2, 1, 4, 3, 5}},
        {{1, 2, 3, 4}, {1, 2, 2, 4}},
        {{1, 1, 2, 3, 5}, {4, 2, 2, 1, 3}},
        {{5, 1, 4, 2, 3, 6, 7}, {1, 2, 3, 4, 5, 6, 0}},
        {{1, 2, 3, 4, 5, 6, 7, 8}, {3, 1, 4, 1, 5, 9, 2, 6}},
    };
    for (const auto& [a, b] : cases) {
        auto got = spearman(a, b);
        require_close(got.p, testsupport::naive_exact_p(a, b), 1e-12,
                      "exact permutation p-value");
        require_close(got.rho, testsupport::naive_spearman_rho(a, b), 1e-12,
                      "midrank rho");
    }
}

// ---------------------------------------------------------------------------
// Criterion 6: classification metrics

void c6_metrics() {
    std::vector<std::string> gold{"A", "A", "B", "B"};
    std::vector<Prediction> pred{std::string("A"), std::string("B"), std::string("B"),
                                 std::string("B")};
    std::vector<std::string> roles{"A", "B"};
    require_close(macro_f1(gold, pred, roles), 0.733333, 1e-6 + 1e-9, "macro-F1 hand case");
    require(std::abs(macro_f1(gold, pred, roles) - 11.0 / 15.0) <= 1e-9,
            "macro-F1 hand case at 1e-9");

    std::vector<std::string> sroles{"support", "deny", "query", "comment"};
    std::map<std::string, double> weights{
        {"support", 0.40}, {"deny", 0.40}, {"query", 0.15}, {"comment", 0.05}};
    require(std::abs(wf2_from_f1({1.0, 0.5, 0.0, 1.0}, sroles, weights) - 0.65) <= 1e-12,
            "weighted F1 hand case");

    std::vector<Prediction> perfect{std::string("A"), std::string("A"), std::string("B"),
                                    std::string("B")};
    require(macro_f1(gold, perfect, roles) == 1.0, "perfect macro-F1 must be 1");
    std::map<std::string, double> ab_weights{{"A", 0.5}, {"B", 0.5}};
    require(std::abs(wf2(gold, perfect, roles, ab_weights) - 1.0) <= 1e-12,
            "perfect weighted F1 must be 1");
}

// ---------------------------------------------------------------------------
// Criterion 7: combinatorics

void c7_combinatorics() {
    auto scd = ClassSchema::load(fx("schemas/scd.json"));
    auto lexicon = Lexicon::load(fx("lexicons/scd.json"));
    auto pool = expand_pool(scd, lexicon);
    require(pool.size() == 31, "scd fixture pool must have 31 sets, got " +
                                   std::to_string(pool.size()));

    require(permute_orders(original_label_set(scd), scd).size() == 2, "2! orderings");

    ClassSchema s3;
    s3.task_name = "t3";
    s3.class_roles = {"a", "b", "c"};
    s3.original_labels = {{"a", "x"}, {"b", "y"}, {"c", "z"}};
    s3.text1_name = "claim";
    s3.text2_name = "comment";
    require(permute_orders(original_label_set(s3), s3).size() == 6, "3! orderings");

    ClassSchema s4;
    s4.task_name = "t4";
    s4.class_roles = {"a", "b", "c", "d"};
    s4.original_labels = {{"a", "w"}, {"b", "x"}, {"c", "y"}, {"d", "z"}};
    s4.text1_name = "claim";
    s4.text2_name = "comment";
    require(permute_orders(original_label_set(s4), s4).size() == 24, "4! orderings");
}

// ---------------------------------------------------------------------------
// Criterion 8: verbalizer degeneracy

void c8_verbalizer_degeneracy() {
    auto schema = ClassSchema::load(fx("schemas/scd.json"));
    auto tpl = PromptTemplate::load(fx("templates/default.json"));
    auto dataset = load_dataset(fx("datasets/verbalizer_200.jsonl"), schema);
    require(dataset.size() == 200, "fixture must hold 200 prompts");

    auto cfg = ModelConfig::load(fx("configs/nano_small.json"));
    auto tok = Tokenizer::load(fx("vocab/tiny_en.vocab"));
    NanoBackend backend(init_random(cfg, 31337), tok);

    auto original = original_label_set(schema);
    std::vector<LabelSet> degenerate_pool{original};
    int tok_for = tok.first_token(original.word_for_role("positive"));
    int tok_against = tok.first_token(original.word_for_role("negative"));
    require(tok_for != tok_against, "fixture label first tokens must differ");

    TapFlags taps;
    taps.ffn = false;
    for (const auto& ex : dataset) {
        std::string predicted = verbalizer_predict(backend, ex, schema, degenerate_pool, tpl);
        auto trace = backend.generate_greedy(render(tpl, schema, original, ex), 1, taps);
        const auto& lp = trace.steps.front().logprobs;
        std::string want = lp[static_cast<std::size_t>(tok_for)] >=
                                   lp[static_cast<std::size_t>(tok_against)]
                               ? "positive"
                               : "negative";
        require(predicted == want,
                "verbalizer with the degenerate pool deviates from the first-token argmax "
                "on example " + ex.id);
    }
}

// ---------------------------------------------------------------------------
// Criterion 9: CLI determinism under parallelism

void c9_cli_determinism() {
    auto dir = testsupport::make_temp_dir("acc_cli");
    std::string weights = (dir / "w.bin").string();
    std::string pool_scd = (dir / "pool_scd.json").string();
    std::string pool_em = (dir / "pool_em.json").string();

    require(run_cli("model init-random --config " + fx("configs/nano_small.json") +
                    " --seed 17 --out " + weights) == 0,
            "model init-random failed");
    require(run_cli("pool build --schema " + fx("schemas/scd.json") + " --lexicon " +
                    fx("lexicons/scd.json") + " --out " + pool_scd) == 0,
            "pool build failed");
    require(run_cli("pool build --schema " + fx("schemas/emergent.json") + " --lexicon " +
                    fx("lexicons/emergent.json") + " --out " + pool_em) == 0,
            "pool build (emergent) failed");

    std::string nano = " --weights " + weights + " --vocab " + fx("vocab/tiny_en.vocab");
    std::string scd_io = " --schema " + fx("schemas/scd.json") + " --dataset " +
                         fx("datasets/scd_val.jsonl") + " --template " +
                         fx("templates/default.json") + nano;
    std::string em_io = " --schema " + fx("schemas/emergent.json") + " --dataset " +
                        fx("datasets/emergent_val.jsonl") + " --template " +
                        fx("templates/default.json") + nano;

    struct Invocation {
        std::string name;
        std::string args;                       // without --workers/--out
        std::vector<std::string> artifacts;
    };
    std::vector<Invocation> runs = {
        {"select-loads",
         "select loads" + scd_io + " --pool " + pool_scd + " --sample-size 12 --seed 5",
         {"selection.json", "kurtosis_report.json"}},
        {"select-baseline-selfgen",
         "select baseline --method selfgen --schema " + fx("schemas/scd.json") +
             " --dataset " + fx("datasets/scd_val.jsonl") + " --open-template " +
             fx("templates/open.json") + " --lexicon " + fx("lexicons/scd.json") + nano +
             " --sample-size 10 --seed 5",
         {"selection.json"}},
        {"eval-run-greedy", "eval run" + scd_io + " --pool " + pool_scd + " --set-index 1",
         {"eval_report.json", "eval_report.csv"}},
        {"eval-run-verbalizer",
         "eval run" + scd_io + " --predictor verbalizer --pool " + pool_scd,
         {"eval_report.json", "eval_report.csv"}},
        {"sweep-lexical", "sweep lexical" + em_io + " --pool " + pool_em,
         {"sweep.json", "sweep.csv"}},
        {"sweep-order", "sweep order" + scd_io + " --use-original",
         {"sweep.json", "sweep.csv"}},
        {"sweep-elaboration",
         "sweep elaboration" + em_io + " --use-original --elaboration-templates " +
             fx("templates/elaborations.json"),
         {"sweep.json", "sweep.csv"}},
        {"analyze-perplexity", "analyze perplexity" + scd_io + " --use-original",
         {"perplexity.json"}},
    };

    for (const auto& run : runs) {
        auto out1 = dir / (run.name + "_w1");
        auto out8 = dir / (run.name + "_w8");
        require(run_cli(run.args + " --workers 1 --out " + out1.string()) == 0,
                run.name + " failed with --workers 1");
        require(run_cli(run.args + " --workers 8 --out " + out8.string()) == 0,
                run.name + " failed with --workers 8");
        for (const auto& artifact : run.artifacts) {
            require(read_text_file(out1 / artifact) == read_text_file(out8 / artifact),
                    run.name + ": " + artifact + " differs between worker counts");
        }
    }

    // worker-free subcommands must still be run-to-run reproducible
    auto pool2 = dir / "pool_scd_2.json";
    require(run_cli("pool build --schema " + fx("schemas/scd.json") + " --lexicon " +
                    fx("lexicons/scd.json") + " --out " + pool2.string()) == 0,
            "pool build rerun failed");
    require(read_text_file(pool_scd) == read_text_file(pool2),
            "pool build output not byte-stable");

    for (const std::string method : {"original", "verbalizer"}) {
        auto b1 = dir / ("baseline_" + method + "_a");
        auto b2 = dir / ("baseline_" + method + "_b");
        std::string cmd = "select baseline --method " + method + " --schema " +
                          fx("schemas/scd.json") +
                          (method == "verbalizer" ? " --pool " + pool_scd : "") + " --out ";
        require(run_cli(cmd + b1.string()) == 0, "select baseline " + method + " failed");
        require(run_cli(cmd + b2.string()) == 0, "select baseline " + method + " rerun failed");
        require(read_text_file(b1 / "selection.json") == read_text_file(b2 / "selection.json"),
                "select baseline " + method + " output not reproducible");
    }

    auto ks1 = dir / "keysim_a";
    auto ks2 = dir / "keysim_b";
    std::string keysim_cmd = "analyze keysim" + scd_io + " --use-original "
                             "--sample-size 6 --seed 3 --out ";
    require(run_cli(keysim_cmd + ks1.string()) == 0, "analyze keysim failed");
    require(run_cli(keysim_cmd + ks2.string()) == 0, "analyze keysim rerun failed");
    require(read_text_file(ks1 / "keysim.json") == read_text_file(ks2 / "keysim.json"),
            "analyze keysim output not reproducible");

    auto ll1 = dir / "lens_a";
    auto ll2 = dir / "lens_b";
    std::string lens_cmd = "analyze logitlens" + scd_io + " --use-original "
                           "--example-id scd-0001 --out ";
    require(run_cli(lens_cmd + ll1.string()) == 0, "analyze logitlens failed");
    require(run_cli(lens_cmd + ll2.string()) == 0, "analyze logitlens rerun failed");
    require(read_text_file(ll1 / "logitlens.json") == read_text_file(ll2 / "logitlens.json"),
            "analyze logitlens output not reproducible");

    auto w2 = dir / "w2.bin";
    require(run_cli("model init-random --config " + fx("configs/nano_small.json") +
                    " --seed 17 --out " + w2.string()) == 0,
            "model init-random rerun failed");
    require(read_text_file(weights) == read_text_file(w2), "weight files differ across runs");

    // correlate over synthetic sweep/report files with real score variation
    // (a random desk-scale model scores every variant 0, which leaves the
    // rank correlation undefined)
    ClassSchema schema = ClassSchema::load(fx("schemas/scd.json"));
    SweepTable table;
    table.kind = SweepKind::kLexical;
    KurtosisReport report;
    for (int k = 0; k < 12; ++k) {
        LabelSet set;
        set.words = {"pos" + std::to_string(k), "neg" + std::to_string(k)};
        set.role_of = schema.class_roles;
        set.source = LabelSource::kLexicon;
        table.variants.push_back(set);
        table.scores.push_back(0.85 - 0.03 * k);
        SetKurtosis entry;
        entry.set = set;
        entry.mean_kurtosis = 3.0 + 0.5 * k;
        report.entries.push_back(std::move(entry));
    }
    table.max = table.scores.front();
    table.min = table.scores.back();
    assign_ranks(report);
    loads::write_text_file(dir / "syn_sweep.json", sweep_to_json(table).dump(2));
    loads::write_text_file(dir / "syn_report.json", kurtosis_report_to_json(report).dump(2));

    auto corr1 = dir / "corr_a";
    auto corr2 = dir / "corr_b";
    std::string corr_cmd = "analyze correlate --schema " + fx("schemas/scd.json") +
                           " --sweep " + (dir / "syn_sweep.json").string() + " --report " +
                           (dir / "syn_report.json").string() +
                           " --dataset-name synthetic --out ";
    require(run_cli(corr_cmd + corr1.string()) == 0, "analyze correlate failed");
    require(run_cli(corr_cmd + corr2.string()) == 0, "analyze correlate rerun failed");
    require(read_text_file(corr1 / "correlation.json") ==
                read_text_file(corr2 / "correlation.json"),
            "analyze correlate output not reproducible");
}

// ---------------------------------------------------------------------------
// Criterion 10: end-to-end kurtosis/performance correlation harness

void c10_correlation_harness() {
    ClassSchema schema;
    schema.task_name = "coupled";
    schema.class_roles = {"positive", "negative"};
    schema.original_labels = {{"positive", "set0a"}, {"negative", "set0b"}};
    schema.text1_name = "claim";
    schema.text2_name = "comment";
    auto tpl = PromptTemplate::load(fx("templates/default.json"));

    // 20 sets whose activation tail weight grows with the set index while a
    // synthetic accuracy signal falls with it (mild deterministic jitter)
    const int n_sets = 20;
    std::vector<LabelSet> pool;
    std::vector<double> spikes;
    std::vector<double> accuracy;
    for (int k = 0; k < n_sets; ++k) {
        LabelSet set;
        set.words = {"set" + std::to_string(k) + "a", "set" + std::to_string(k) + "b"};
        set.role_of = schema.class_roles;
        pool.push_back(std::move(set));
        spikes.push_back(3.0 + 0.4 * k);
        double jitter = (k % 3 == 0 ? 0.004 : 0.0) - (k % 5 == 0 ? 0.003 : 0.0);
        accuracy.push_back(0.9 - 0.02 * k + jitter);
    }
    auto examples = testsupport::synthetic_examples(100, "c10");
    auto backend = testsupport::make_spike_replay(schema, tpl, pool, spikes, examples, 128,
                                                  0.005, 606060);

    auto selection = loads_select(backend, schema, examples, pool, tpl, 2);
    auto row = correlate("coupled", pool, accuracy, *selection.report);
    require(row.rho < -0.9, "correlation harness rho must be below -0.9, got " +
                                std::to_string(row.rho));
    require(row.p < 0.05, "correlation harness p must be below 0.05, got " +
                              std::to_string(row.p));
    require(row.significant, "row must carry the significance star");
}

} // namespace

int main() {
    struct Criterion {
        std::string name;
        std::function<void()> run;
    };
    std::vector<Criterion> criteria = {
        {"C1 kurtosis oracle (naive reference, exact cases, 1e6 normals)", c1_kurtosis_oracle},
        {"C2 gated-FFN tap fidelity vs straight-line recomputation", c2_tap_fidelity},
        {"C3 selection argmin/ranking equals the naive loop", c3_selection_oracle},
        {"C4 top-5 ranking stable across nested sample sizes", c4_rank_stability},
        {"C5 Spearman rho and exact permutation p-values", c5_spearman},
        {"C6 macro-F1 and weighted-F1 hand cases", c6_metrics},
        {"C7 pool and ordering combinatorics (31-set fixture, n! orders)", c7_combinatorics},
        {"C8 verbalizer degeneracy equals first-token argmax on 200 prompts",
         c8_verbalizer_degeneracy},
        {"C9 CLI outputs byte-identical across --workers 1 and 8", c9_cli_determinism},
        {"C10 coupled-backend correlation below -0.9 with p < 0.05", c10_correlation_harness},
    };

    int failures = 0;
    for (const auto& criterion : criteria) {
        auto start = std::chrono::steady_clock::now();
        std::string verdict = "PASS";
        std::string detail;
        try {
            criterion.run();
        } catch (const std::exception& e) {
            verdict = "FAIL";
            detail = e.what();
            ++failures;
        }
        auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - start)
                           .count();
        std::cout << "[" << verdict << "] " << criterion.name << " ("
                  << static_cast<double>(elapsed) / 1000.0 << "s)";
        if (!detail.empty()) {
            std::cout << " - " << detail;
        }
        std::cout << "\n";
    }
    std::cout << (failures == 0 ? "ACCEPTANCE: all criteria passed"
                                : "ACCEPTANCE: " + std::to_string(failures) + " criterion(s) failed")
              << "\n";
    return failures == 0 ? 0 : 1;
}
