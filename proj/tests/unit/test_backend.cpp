// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstring>

#include "doctest.h"
#include "loads/backend.hpp"
#include "loads/errors.hpp"
#include "loads/json_util.hpp"
#include "loads/nanoformer.hpp"
#include "loads/parallel.hpp"
#include "../support/oracles.hpp"
#include "../support/paths.hpp"
#include "../support/synthetic.hpp"

using namespace loads;

namespace {

NanoBackend fixture_backend(std::uint64_t seed = 2025) {
    auto cfg = ModelConfig::load(testsupport::fixtures_dir() / "configs" / "nano_small.json");
    auto tok = Tokenizer::load(testsupport::fixtures_dir() / "vocab" / "tiny_en.vocab");
    return NanoBackend(init_random(cfg, seed), tok);
}

// Shared contract checks run against any backend.
void check_conformance(const Backend& backend, const std::string& prompt, bool has_tokenizer) {
    TapFlags taps;
    taps.ffn = true;
    auto a = backend.generate_greedy(prompt, 4, taps);
    auto b = backend.generate_greedy(prompt, 4, taps);
    CHECK(trace_to_json(a).dump() == trace_to_json(b).dump());  // determinism

    CHECK_NOTHROW(validate_trace(a));  // nonempty steps, normalized, greedy argmax
    REQUIRE(!a.steps.empty());
    CHECK(!a.steps.front().ffn_activation.empty());

    // first_token_logprob consistency with step 0
    int probe = a.steps.front().chosen_token_id;
    CHECK(backend.first_token_logprob(prompt, probe) ==
          doctest::Approx(a.steps.front().logprobs[static_cast<std::size_t>(probe)])
              .epsilon(1e-15));

    // full first-token distribution sums to 1
    double sum = 0.0;
    for (double lp : a.steps.front().logprobs) {
        sum += std::exp(lp);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));

    if (has_tokenizer) {
        std::vector<int> chosen;
        for (const auto& step : a.steps) {
            chosen.push_back(step.chosen_token_id);
        }
        CHECK(backend.decode(chosen) == a.generated_text);
    }
}

} // namespace

TEST_CASE("nanoformer backend satisfies the generation contract") {
    auto backend = fixture_backend();
    check_conformance(backend, "Given a claim and a comment, pick one.", true);
}

TEST_CASE("replay backend satisfies the generation contract") {
    auto tok = Tokenizer::load(testsupport::fixtures_dir() / "vocab" / "tiny_en.vocab");
    ReplayBackend replay;
    replay.set_tokenizer(tok);

    std::string prompt = "Given a claim and a comment, pick one.";
    GenerationTrace trace;
    trace.prompt_token_ids = tok.encode(prompt);
    StepRecord step;
    step.logprobs = testsupport::uniform_logprobs(558);
    step.chosen_token_id = 0;  // argmax tie -> lowest id
    step.ffn_activation = {1.0, -1.0, 2.0, -2.0};
    trace.steps.push_back(step);
    trace.generated_text = "";
    replay.put(prompt, trace);

    check_conformance(replay, prompt, true);
}

TEST_CASE("replay returns stored traces verbatim and rejects unknown prompts") {
    ReplayBackend replay;
    auto trace = testsupport::make_activation_trace({3.0, 1.0, -2.0, 0.5});
    replay.put("known prompt", trace);
    TapFlags taps;
    auto out = replay.generate_greedy("known prompt", 1, taps);
    CHECK(trace_to_json(out).dump() == trace_to_json(trace).dump());
    CHECK_THROWS_AS(replay.generate_greedy("unknown prompt", 1, taps), validation_error);
}

TEST_CASE("replay rejects tap requests its traces cannot serve") {
    ReplayBackend replay;
    GenerationTrace trace = testsupport::make_activation_trace({1.0, 2.0, -1.0, 0.0});
    replay.put("p", trace);
    TapFlags want_hidden;
    want_hidden.hidden = true;
    CHECK_THROWS_AS(replay.generate_greedy("p", 1, want_hidden), unsupported_error);
    TapFlags want_keys;
    want_keys.keys = true;
    CHECK_THROWS_AS(replay.generate_greedy("p", 1, want_keys), unsupported_error);
}

TEST_CASE("replay refuses traces that violate the greedy contract") {
    ReplayBackend replay;
    GenerationTrace trace = testsupport::make_activation_trace({1.0, 2.0, -1.0, 0.0});
    trace.steps.front().chosen_token_id = 2;  // not the argmax tie-break winner
    CHECK_THROWS_AS(replay.put("p", trace), validation_error);

    GenerationTrace unnormalized = testsupport::make_activation_trace({1.0, 2.0, -1.0, 0.0});
    for (auto& lp : unnormalized.steps.front().logprobs) {
        lp += 0.5;
    }
    CHECK_THROWS_AS(replay.put("q", unnormalized), validation_error);
}

TEST_CASE("trace files round-trip floating point values exactly") {
    auto dir = testsupport::make_temp_dir("traces");
    SplitMix64 rng(404);
    std::vector<GenerationTrace> traces;
    for (int t = 0; t < 5; ++t) {
        GenerationTrace trace;
        trace.prompt_token_ids = {static_cast<int>(rng.next_below(100)), 3, 7};
        StepRecord step;
        step.logprobs = testsupport::uniform_logprobs(16);
        step.chosen_token_id = 0;
        // f32-valued activations must survive the text round trip bit-exactly
        step.ffn_activation.resize(64);
        for (auto& v : step.ffn_activation) {
            v = static_cast<double>(static_cast<float>(rng.next_unit() * 2000.0 - 1000.0));
        }
        step.per_layer_hidden = {{0.1, -0.25, 1e-30}, {3.5, 2.25, -0.75}};
        trace.steps.push_back(step);
        trace.generated_text = "gen " + std::to_string(t);
        trace.perplexity = 12.25 + t;
        traces.push_back(trace);
    }
    save_traces(dir / "t.jsonl", traces);
    auto reloaded = load_traces(dir / "t.jsonl");
    REQUIRE(reloaded.size() == traces.size());
    for (std::size_t t = 0; t < traces.size(); ++t) {
        const auto& a = traces[t].steps.front();
        const auto& b = reloaded[t].steps.front();
        REQUIRE(a.ffn_activation.size() == b.ffn_activation.size());
        for (std::size_t i = 0; i < a.ffn_activation.size(); ++i) {
            CHECK(std::memcmp(&a.ffn_activation[i], &b.ffn_activation[i], sizeof(double)) == 0);
        }
        for (std::size_t l = 0; l < a.per_layer_hidden.size(); ++l) {
            CHECK(a.per_layer_hidden[l] == b.per_layer_hidden[l]);
        }
        CHECK(reloaded[t].perplexity == traces[t].perplexity);
        CHECK(reloaded[t].generated_text == traces[t].generated_text);
    }
}

TEST_CASE("replay loads trace files keyed by decoded prompts") {
    auto tok = Tokenizer::load(testsupport::fixtures_dir() / "vocab" / "tiny_en.vocab");
    auto dir = testsupport::make_temp_dir("traces");
    std::string prompt = "Given a claim and a comment, decide.";
    GenerationTrace trace;
    trace.prompt_token_ids = tok.encode(prompt);
    StepRecord step;
    step.logprobs = testsupport::uniform_logprobs(558);
    step.chosen_token_id = 0;
    step.ffn_activation = {4.0, -1.0, 1.0, -1.0};
    trace.steps.push_back(step);
    save_traces(dir / "r.jsonl", {trace});

    auto replay = ReplayBackend::from_file(dir / "r.jsonl", tok);
    TapFlags taps;
    auto out = replay.generate_greedy(prompt, 1, taps);
    CHECK(out.steps.front().ffn_activation == step.ffn_activation);
}

TEST_CASE("all-equal logits resolve to the lowest token id through the real decode path") {
    auto cfg = ModelConfig::load(testsupport::fixtures_dir() / "configs" / "nano_small.json");
    auto wc = init_random(cfg, 12);
    for (auto& entry : wc.directory) {
        if (entry.name == "lm_head") {
            std::size_t start = entry.offset / sizeof(float);
            for (std::size_t i = 0; i < entry.element_count(); ++i) {
                wc.payload[start + i] = 0.0f;
            }
        }
    }
    auto tok = Tokenizer::load(testsupport::fixtures_dir() / "vocab" / "tiny_en.vocab");
    NanoBackend backend(std::move(wc), tok);
    TapFlags taps;
    taps.ffn = false;
    auto trace = backend.generate_greedy("Given a claim and a comment, decide.", 5, taps);
    // token 0 is <eos>, so the tie-break also ends the generation immediately
    REQUIRE(trace.steps.size() == 1);
    CHECK(trace.steps.front().chosen_token_id == Tokenizer::kEosId);
    CHECK(trace.generated_text.empty());
}

TEST_CASE("greedy generation stops at eos or max_tokens") {
    auto backend = fixture_backend();
    TapFlags taps;
    taps.ffn = false;
    auto trace = backend.generate_greedy("Given a claim and a comment, decide now.", 6, taps);
    CHECK(trace.steps.size() <= 6);
    REQUIRE(!trace.steps.empty());
    for (std::size_t i = 0; i + 1 < trace.steps.size(); ++i) {
        CHECK(trace.steps[i].chosen_token_id != backend.eos_id());
    }
}

TEST_CASE("first chosen token equals the argmax of an independent reference forward") {
    auto cfg = ModelConfig::load(testsupport::fixtures_dir() / "configs" / "nano_small.json");
    auto tok = Tokenizer::load(testsupport::fixtures_dir() / "vocab" / "tiny_en.vocab");
    auto wc = init_random(cfg, 808);
    NanoBackend backend(init_random(cfg, 808), tok);

    std::string prompt = "Given a claim and a comment, detect the stance now.";
    TapFlags taps;
    taps.ffn = false;
    auto trace = backend.generate_greedy(prompt, 1, taps);

    auto logits = testsupport::reference_forward(wc, tok.encode(prompt));
    int argmax = 0;
    for (std::size_t v = 1; v < logits.size(); ++v) {
        if (logits[v] > logits[static_cast<std::size_t>(argmax)]) {
            argmax = static_cast<int>(v);
        }
    }
    CHECK(trace.steps.front().chosen_token_id == argmax);
}

TEST_CASE("prompts differing only in label words give different first-token distributions") {
    auto backend = fixture_backend();
    std::string a = "Options: \"pro\", and \"con\". Decide.";
    std::string b = "Options: \"for\", and \"against\". Decide.";
    TapFlags taps;
    taps.ffn = false;
    auto ta = backend.generate_greedy(a, 1, taps);
    auto tb = backend.generate_greedy(b, 1, taps);
    CHECK(ta.steps.front().logprobs != tb.steps.front().logprobs);
}

TEST_CASE("prompt exceeding the context length is an error") {
    auto backend = fixture_backend();
    std::string giant(2000, 'x');  // byte-fallback: 2000 tokens > max_context
    TapFlags taps;
    CHECK_THROWS_AS(backend.generate_greedy(giant, 1, taps), validation_error);
}

TEST_CASE("first_token_logprob rejects unknown token ids") {
    auto backend = fixture_backend();
    CHECK_THROWS_AS(backend.first_token_logprob("Given a claim.", -1), validation_error);
    CHECK_THROWS_AS(backend.first_token_logprob("Given a claim.", 100000), validation_error);
}

TEST_CASE("uniform-logit model has perplexity V") {
    auto cfg = ModelConfig::load(testsupport::fixtures_dir() / "configs" / "nano_small.json");
    auto wc = init_random(cfg, 5);
    // zero the output head -> logits identically zero -> uniform next-token law
    for (auto& entry : wc.directory) {
        if (entry.name == "lm_head") {
            std::size_t start = entry.offset / sizeof(float);
            for (std::size_t i = 0; i < entry.element_count(); ++i) {
                wc.payload[start + i] = 0.0f;
            }
        }
    }
    auto tok = Tokenizer::load(testsupport::fixtures_dir() / "vocab" / "tiny_en.vocab");
    NanoBackend backend(std::move(wc), tok);
    double ppl = backend.sequence_perplexity("Given a claim and a comment, decide.");
    CHECK(ppl == doctest::Approx(558.0).epsilon(1e-6 / 558.0));
}

TEST_CASE("perplexity matches a token-by-token reference computation") {
    auto cfg = ModelConfig::load(testsupport::fixtures_dir() / "configs" / "nano_small.json");
    cfg.n_layers = 2;
    auto tok = Tokenizer::load(testsupport::fixtures_dir() / "vocab" / "tiny_en.vocab");
    auto wc = init_random(cfg, 6);
    NanoBackend backend(init_random(cfg, 6), tok);

    std::string text = "Given a claim now";
    auto ids = tok.encode(text);
    REQUIRE(ids.size() >= 3);

    double nll = 0.0;
    for (std::size_t t = 1; t < ids.size(); ++t) {
        std::vector<int> prefix(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(t));
        auto logits = testsupport::reference_forward(wc, prefix);
        double m = *std::max_element(logits.begin(), logits.end());
        double z = 0.0;
        for (double v : logits) {
            z += std::exp(v - m);
        }
        nll -= logits[static_cast<std::size_t>(ids[t])] - m - std::log(z);
    }
    double want = std::exp(nll / static_cast<double>(ids.size() - 1));
    CHECK(backend.sequence_perplexity(text) == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("perplexity bounds and short-text error") {
    auto backend = fixture_backend();
    CHECK(backend.sequence_perplexity("Given a claim and a comment.") >= 1.0);
    CHECK_THROWS_AS(backend.sequence_perplexity("a"), validation_error);
}

TEST_CASE("concurrent inference calls match serial results exactly") {
    auto backend = fixture_backend(909);
    std::vector<std::string> prompts;
    for (int i = 0; i < 16; ++i) {
        prompts.push_back("Given a claim and a comment number " + std::to_string(i) +
                          ", decide.");
    }
    TapFlags taps;
    std::vector<std::string> serial(prompts.size());
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        serial[i] = trace_to_json(backend.generate_greedy(prompts[i], 3, taps)).dump();
    }
    std::vector<std::string> concurrent(prompts.size());
    parallel_for(prompts.size(), 8, [&](std::size_t i) {
        concurrent[i] = trace_to_json(backend.generate_greedy(prompts[i], 3, taps)).dump();
    });
    CHECK(serial == concurrent);
}

TEST_CASE("replay serves stored perplexities and errors otherwise") {
    ReplayBackend replay;
    auto trace = testsupport::make_activation_trace({1.0, -1.0, 2.0, -2.0});
    trace.perplexity = 17.5;
    replay.put("text with stored ppl", trace);
    CHECK(replay.sequence_perplexity("text with stored ppl") == 17.5);

    auto bare = testsupport::make_activation_trace({1.0, -1.0, 2.0, -2.0});
    replay.put("text without ppl", bare);
    CHECK_THROWS_AS(replay.sequence_perplexity("text without ppl"), unsupported_error);
}
