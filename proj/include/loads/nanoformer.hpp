#pragma once
// SPDX-License-Identifier: Apache-2.0

// Desk-scale decoder-only transformer with a gated feed-forward block and
// full instrumentation. Weights are f32; all forward math accumulates in
// f64 with reductions in fixed index order, so results are bit-stable
// across runs and thread counts.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "loads/backend.hpp"
#include "loads/tokenizer.hpp"

namespace loads {

enum class Activation { kSilu, kGelu };

std::string activation_name(Activation act);
Activation activation_from_name(const std::string& name);

// Scalar activation functions. GELU is the exact erf form (not the tanh
// approximation).
double silu(double x);
double gelu(double x);

struct ModelConfig {
    int vocab_size = 0;
    int d_model = 0;
    int n_layers = 0;
    int n_heads = 0;
    int d_ff = 0;
    int max_context = 0;
    Activation act_fn = Activation::kSilu;
    bool use_positions = true;   // sinusoidal absolute positions; off for probes

    int d_head() const { return d_model / n_heads; }
    void validate() const;

    static ModelConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    static ModelConfig load(const std::filesystem::path& path);
};

// ---------------------------------------------------------------------------
// WeightContainer: binary weight file.
//
// Layout: magic "NFWT" | version u32 LE | header length u32 LE | header JSON
// | contiguous little-endian f32 payload. The header holds the config, the
// tensor directory (name, shape, byte offset into the payload) and optional
// metadata. save/load round-trips are byte-identical.

struct TensorEntry {
    std::string name;
    std::vector<int> shape;
    std::uint64_t offset = 0;    // byte offset into payload

    std::size_t element_count() const;
};

struct WeightContainer {
    ModelConfig config;
    std::vector<TensorEntry> directory;
    std::vector<float> payload;
    nlohmann::json extra;        // provenance metadata, preserved verbatim

    std::span<const float> tensor(const std::string& name) const;
    void validate() const;

    void save(const std::filesystem::path& path) const;
    static WeightContainer load(const std::filesystem::path& path);
};

// Seeded scaled-normal initialization (splitmix64 + Box-Muller; matrices are
// N(0, 1/fan_in), embeddings N(0, 1), norm gains 1). Deterministic: the same
// (config, seed) yields a byte-identical container.
WeightContainer init_random(const ModelConfig& config, std::uint64_t seed);

// ---------------------------------------------------------------------------
// NanoModel: the forward pass with taps.

// Values tapped at the final position of a forward pass, per layer.
struct ForwardTaps {
    std::vector<std::vector<double>> ffn_input;       // h-tilde per layer
    std::vector<std::vector<double>> ffn_activation;  // act_fn(h-tilde W1), last entry = N_I
    std::vector<std::vector<double>> hidden;          // residual stream after each layer
    std::vector<std::vector<double>> keys_final;      // key vector at the final position
    // Keys at every context position ([layer][pos][d_model]); filled only
    // when want_all_keys is set.
    std::vector<std::vector<std::vector<double>>> keys_all;
};

class NanoModel {
public:
    explicit NanoModel(WeightContainer weights);

    const ModelConfig& config() const { return config_; }

    // Logits at the final position. Causal masking throughout; taps optional.
    std::vector<double> forward(std::span<const int> tokens, ForwardTaps* taps,
                                bool want_all_keys = false) const;

    // Logits at every position (teacher forcing; used for perplexity).
    std::vector<std::vector<double>> forward_all(std::span<const int> tokens) const;

    // The gated FFN of one layer: activation = act_fn(h W1),
    // h_out = (activation .* (h W3)) W2, elementwise product.
    void ffn_forward(std::span<const double> h_tilde, int layer,
                     std::vector<double>& h_out, std::vector<double>& activation) const;

    // Final norm + output head over an arbitrary residual state.
    std::vector<double> project_to_vocab(std::span<const double> hidden) const;

    // Rank (1-based, ties by lowest token id) of token_id when layer `layer`'s
    // residual state is projected through the output head.
    int logit_lens_rank(std::span<const double> hidden, int token_id) const;

private:
    std::vector<double> run(std::span<const int> tokens, ForwardTaps* taps,
                            bool want_all_keys,
                            std::vector<std::vector<double>>* all_logits) const;

    WeightContainer weights_;
    ModelConfig config_;
};

// Descending-logit rank with ties broken by lowest token id.
int rank_of_token(std::span<const double> logits, int token_id);

// Numerically stable softmax (max-subtracted, fixed reduction order). The
// same routine normalizes every attention row.
std::vector<double> softmax(std::span<const double> logits);

// ---------------------------------------------------------------------------
// NanoBackend: Backend over a NanoModel plus a Tokenizer.

class NanoBackend : public Backend {
public:
    NanoBackend(WeightContainer weights, Tokenizer tokenizer);
    static NanoBackend load(const std::filesystem::path& weights_path,
                            const std::filesystem::path& vocab_path);

    const NanoModel& model() const { return model_; }
    const Tokenizer& tokenizer() const { return tokenizer_; }

    GenerationTrace generate_greedy(const std::string& prompt, int max_tokens,
                                    const TapFlags& taps) const override;
    double sequence_perplexity(const std::string& text) const override;

    std::vector<int> encode(const std::string& text) const override;
    std::string decode(std::span<const int> ids) const override;
    std::string piece(int id) const override;

    int vocab_size() const override { return model_.config().vocab_size; }
    int d_ff() const override { return model_.config().d_ff; }
    int n_layers() const override { return model_.config().n_layers; }
    int n_heads() const override { return model_.config().n_heads; }
    int eos_id() const override { return Tokenizer::kEosId; }

    std::vector<double> lens_logits(const std::vector<double>& hidden) const override;

private:
    NanoModel model_;
    Tokenizer tokenizer_;
};

} // namespace loads
