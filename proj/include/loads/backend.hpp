#pragma once
// SPDX-License-Identifier: Apache-2.0

// The model abstraction every analysis runs against: greedy generation with
// activation taps, first-token scoring and perplexity. Two implementations
// ship: the nanoformer (nanoformer.hpp) and a trace-replay backend for
// oracle testing. Both satisfy the same contract (see the conformance
// tests under tests/).

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "loads/tokenizer.hpp"

namespace loads {

struct TapFlags {
    bool ffn = true;      // last-layer FFN post-activation at each step
    bool hidden = false;  // per-layer residual-stream states at the emitting position
    bool keys = false;    // per-layer attention key vectors (steps + prompt positions)
};

// One greedy decode step. logprobs hold the full normalized next-token log
// distribution (logsumexp == 0 within tolerance); chosen_token_id is its
// argmax with ties broken by lowest token id. ffn_activation is the last
// decoder layer's post-activation vector (length d_ff) at the position that
// emits this token.
struct StepRecord {
    int chosen_token_id = 0;
    std::vector<double> logprobs;
    std::vector<double> ffn_activation;                   // empty when tap off
    std::vector<std::vector<double>> per_layer_hidden;    // [n_layers][d_model], optional
    std::vector<std::vector<double>> key_vectors;         // [n_layers][d_model], optional
};

struct GenerationTrace {
    std::vector<int> prompt_token_ids;
    std::vector<StepRecord> steps;
    std::string generated_text;
    // Per-layer, per-prompt-position key vectors ([n_layers][prompt_len][d_model]);
    // captured under the keys tap and consumed by the key-similarity probe.
    std::vector<std::vector<std::vector<double>>> prompt_keys;
    // Optional stored perplexity of the prompt text (replay files only).
    std::optional<double> perplexity;
};

nlohmann::json trace_to_json(const GenerationTrace& trace);
GenerationTrace trace_from_json(const nlohmann::json& j);

// Trace files are JSONL: one GenerationTrace object per line. Serialized
// floating-point values round-trip exactly (shortest-round-trip formatting).
void save_traces(const std::filesystem::path& path,
                 const std::vector<GenerationTrace>& traces);
std::vector<GenerationTrace> load_traces(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Backend interface

class Backend {
public:
    virtual ~Backend() = default;

    // Deterministic greedy decoding; stops at <eos> or max_tokens. Requested
    // taps are populated or an unsupported_error is raised.
    virtual GenerationTrace generate_greedy(const std::string& prompt, int max_tokens,
                                            const TapFlags& taps) const = 0;

    // Log-probability of token_id at the first generated position. Equals
    // steps[0].logprobs[token_id] of generate_greedy on the same prompt.
    virtual double first_token_logprob(const std::string& prompt, int token_id) const;

    // exp of the mean negative log-likelihood of tokens 2..T given prefixes.
    virtual double sequence_perplexity(const std::string& text) const = 0;

    // Tokenizer surface (unsupported_error when the backend has none).
    virtual std::vector<int> encode(const std::string& text) const = 0;
    virtual std::string decode(std::span<const int> ids) const = 0;
    virtual std::string piece(int id) const = 0;

    virtual int vocab_size() const = 0;
    virtual int d_ff() const = 0;
    virtual int n_layers() const = 0;
    virtual int n_heads() const = 0;
    virtual int eos_id() const = 0;

    // Logit-lens capability: final norm + output head applied to a residual
    // hidden state. Default: unsupported.
    virtual std::vector<double> lens_logits(const std::vector<double>& hidden) const;
};

// ---------------------------------------------------------------------------
// ReplayBackend: serves stored traces verbatim, keyed by exact prompt text.

class ReplayBackend : public Backend {
public:
    ReplayBackend() = default;
    explicit ReplayBackend(std::vector<GenerationTrace> traces,
                           std::vector<std::string> prompts);

    // Loads a JSONL trace file; the prompt key of each trace is recovered by
    // decoding prompt_token_ids with the given tokenizer, or must be supplied
    // explicitly via put().
    static ReplayBackend from_file(const std::filesystem::path& path,
                                   const Tokenizer& tokenizer);

    void put(const std::string& prompt, GenerationTrace trace);
    void set_tokenizer(Tokenizer tokenizer);
    void set_n_heads(int n_heads) { n_heads_ = n_heads; }

    GenerationTrace generate_greedy(const std::string& prompt, int max_tokens,
                                    const TapFlags& taps) const override;
    double sequence_perplexity(const std::string& text) const override;

    std::vector<int> encode(const std::string& text) const override;
    std::string decode(std::span<const int> ids) const override;
    std::string piece(int id) const override;

    int vocab_size() const override;
    int d_ff() const override;
    int n_layers() const override;
    int n_heads() const override { return n_heads_; }
    int eos_id() const override { return Tokenizer::kEosId; }

private:
    const GenerationTrace& lookup(const std::string& prompt) const;

    std::map<std::string, GenerationTrace> traces_;
    std::optional<Tokenizer> tokenizer_;
    int n_heads_ = 1;
};

// Validates the StepRecord contract of a trace: nonempty steps, normalized
// logprobs, greedy argmax with lowest-id tie-break. Throws validation_error.
void validate_trace(const GenerationTrace& trace);

} // namespace loads
