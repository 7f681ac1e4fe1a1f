// SPDX-License-Identifier: Apache-2.0

#include "loads/nanoformer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "loads/core_data.hpp"
#include "loads/errors.hpp"
#include "loads/json_util.hpp"

namespace loads {

namespace {

constexpr char kMagic[4] = {'N', 'F', 'W', 'T'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr double kRmsEps = 1e-6;

} // namespace

std::string activation_name(Activation act) {
    return act == Activation::kSilu ? "silu" : "gelu";
}

Activation activation_from_name(const std::string& name) {
    if (name == "silu") return Activation::kSilu;
    if (name == "gelu") return Activation::kGelu;
    throw parse_error("unknown activation: " + name + " (expected silu or gelu)");
}

double silu(double x) {
    return x / (1.0 + std::exp(-x));
}

// Exact erf-based GELU.
double gelu(double x) {
    return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)));
}

// ---------------------------------------------------------------------------
// ModelConfig

void ModelConfig::validate() const {
    if (vocab_size < 1 || d_model < 1 || n_layers < 1 || n_heads < 1 || d_ff < 1 ||
        max_context < 1) {
        throw validation_error("model config: all dimensions must be >= 1");
    }
    if (d_model % n_heads != 0) {
        throw validation_error("model config: d_model must be divisible by n_heads");
    }
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    try {
        cfg.vocab_size = j.at("vocab_size").get<int>();
        cfg.d_model = j.at("d_model").get<int>();
        cfg.n_layers = j.at("n_layers").get<int>();
        cfg.n_heads = j.at("n_heads").get<int>();
        cfg.d_ff = j.at("d_ff").get<int>();
        cfg.max_context = j.at("max_context").get<int>();
        cfg.act_fn = activation_from_name(j.at("act_fn").get<std::string>());
        cfg.use_positions = j.value("use_positions", true);
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(std::string("bad model config JSON: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

nlohmann::json ModelConfig::to_json() const {
    return nlohmann::json{{"vocab_size", vocab_size}, {"d_model", d_model},
                          {"n_layers", n_layers},     {"n_heads", n_heads},
                          {"d_ff", d_ff},             {"max_context", max_context},
                          {"act_fn", activation_name(act_fn)},
                          {"use_positions", use_positions}};
}

ModelConfig ModelConfig::load(const std::filesystem::path& path) {
    return from_json(read_json_file(path));
}

// ---------------------------------------------------------------------------
// WeightContainer

std::size_t TensorEntry::element_count() const {
    std::size_t n = 1;
    for (int d : shape) {
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

std::span<const float> WeightContainer::tensor(const std::string& name) const {
    for (const auto& entry : directory) {
        if (entry.name == name) {
            std::size_t start = entry.offset / sizeof(float);
            return std::span<const float>(payload.data() + start, entry.element_count());
        }
    }
    throw validation_error("weight container: no tensor named '" + name + "'");
}

void WeightContainer::validate() const {
    config.validate();
    std::vector<std::pair<std::uint64_t, std::uint64_t>> ranges;  // (offset, bytes)
    std::uint64_t total = 0;
    std::set<std::string> names;
    for (const auto& entry : directory) {
        if (!names.insert(entry.name).second) {
            throw validation_error("weight container: duplicate tensor '" + entry.name + "'");
        }
        if (entry.offset % sizeof(float) != 0) {
            throw validation_error("weight container: tensor '" + entry.name +
                                   "' offset not 4-byte aligned");
        }
        std::uint64_t bytes = entry.element_count() * sizeof(float);
        ranges.emplace_back(entry.offset, bytes);
        total += bytes;
    }
    std::sort(ranges.begin(), ranges.end());
    for (std::size_t i = 1; i < ranges.size(); ++i) {
        if (ranges[i - 1].first + ranges[i - 1].second > ranges[i].first) {
            throw validation_error("weight container: overlapping tensor ranges");
        }
    }
    if (total != payload.size() * sizeof(float)) {
        throw validation_error("weight container: payload size " +
                               std::to_string(payload.size() * sizeof(float)) +
                               " bytes does not match directory total " + std::to_string(total));
    }
}

void WeightContainer::save(const std::filesystem::path& path) const {
    validate();
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& entry : directory) {
        tensors.push_back({{"name", entry.name}, {"shape", entry.shape}, {"offset", entry.offset}});
    }
    nlohmann::json header{{"config", config.to_json()}, {"tensors", tensors}};
    if (!extra.is_null()) {
        header["extra"] = extra;
    }
    std::string header_bytes = header.dump();

    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw io_error("cannot open weights file for writing: " + path.string());
    }
    out.write(kMagic, 4);
    auto write_u32 = [&](std::uint32_t v) {
        unsigned char buf[4] = {static_cast<unsigned char>(v & 0xff),
                                static_cast<unsigned char>((v >> 8) & 0xff),
                                static_cast<unsigned char>((v >> 16) & 0xff),
                                static_cast<unsigned char>((v >> 24) & 0xff)};
        out.write(reinterpret_cast<const char*>(buf), 4);
    };
    write_u32(kFormatVersion);
    write_u32(static_cast<std::uint32_t>(header_bytes.size()));
    out.write(header_bytes.data(), static_cast<std::streamsize>(header_bytes.size()));
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(float)));
    if (!out) {
        throw io_error("failed writing weights file: " + path.string());
    }
}

WeightContainer WeightContainer::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw io_error("cannot open weights file: " + path.string());
    }
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw parse_error("weights file " + path.string() + ": bad magic");
    }
    auto read_u32 = [&]() -> std::uint32_t {
        unsigned char buf[4];
        in.read(reinterpret_cast<char*>(buf), 4);
        if (!in) {
            throw parse_error("weights file " + path.string() + ": truncated header");
        }
        return static_cast<std::uint32_t>(buf[0]) | (static_cast<std::uint32_t>(buf[1]) << 8) |
               (static_cast<std::uint32_t>(buf[2]) << 16) |
               (static_cast<std::uint32_t>(buf[3]) << 24);
    };
    std::uint32_t version = read_u32();
    if (version != kFormatVersion) {
        throw parse_error("weights file " + path.string() + ": unsupported format version " +
                          std::to_string(version));
    }
    std::uint32_t header_len = read_u32();
    std::string header_bytes(header_len, '\0');
    in.read(header_bytes.data(), header_len);
    if (!in) {
        throw parse_error("weights file " + path.string() + ": truncated header");
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_bytes);
    } catch (const nlohmann::json::parse_error& e) {
        throw parse_error("weights file " + path.string() + ": bad header JSON: " + e.what());
    }

    WeightContainer container;
    try {
        container.config = ModelConfig::from_json(header.at("config"));
        for (const auto& t : header.at("tensors")) {
            TensorEntry entry;
            entry.name = t.at("name").get<std::string>();
            entry.shape = t.at("shape").get<std::vector<int>>();
            entry.offset = t.at("offset").get<std::uint64_t>();
            container.directory.push_back(std::move(entry));
        }
        if (header.contains("extra")) {
            container.extra = header.at("extra");
        }
    } catch (const nlohmann::json::exception& e) {
        throw parse_error("weights file " + path.string() + ": bad header: " + e.what());
    }

    std::vector<char> rest((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (rest.size() % sizeof(float) != 0) {
        throw parse_error("weights file " + path.string() + ": payload not a multiple of 4 bytes");
    }
    container.payload.resize(rest.size() / sizeof(float));
    std::memcpy(container.payload.data(), rest.data(), rest.size());
    container.validate();
    return container;
}

// ---------------------------------------------------------------------------
// init_random

namespace {

// Box-Muller over the splitmix64 stream; one continuous stream per container,
// consumed only by normal-initialized tensors, in directory order.
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) : rng_(seed) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] so log is finite
        double u1 = (static_cast<double>(rng_.next() >> 11) + 1.0) * 0x1.0p-53;
        double u2 = static_cast<double>(rng_.next() >> 11) * 0x1.0p-53;
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

private:
    SplitMix64 rng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace

WeightContainer init_random(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    WeightContainer container;
    container.config = config;

    NormalStream normals(seed);
    std::uint64_t offset = 0;

    auto add_normal = [&](const std::string& name, std::vector<int> shape, double scale) {
        TensorEntry entry{name, std::move(shape), offset};
        std::size_t n = entry.element_count();
        for (std::size_t i = 0; i < n; ++i) {
            container.payload.push_back(static_cast<float>(normals.next() * scale));
        }
        offset += n * sizeof(float);
        container.directory.push_back(std::move(entry));
    };
    auto add_ones = [&](const std::string& name, std::vector<int> shape) {
        TensorEntry entry{name, std::move(shape), offset};
        std::size_t n = entry.element_count();
        container.payload.insert(container.payload.end(), n, 1.0f);
        offset += n * sizeof(float);
        container.directory.push_back(std::move(entry));
    };

    int d = config.d_model;
    add_normal("embedding", {config.vocab_size, d}, 1.0);
    for (int i = 0; i < config.n_layers; ++i) {
        std::string prefix = "layers." + std::to_string(i) + ".";
        add_ones(prefix + "attn_norm", {d});
        double attn_scale = 1.0 / std::sqrt(static_cast<double>(d));
        add_normal(prefix + "wq", {d, d}, attn_scale);
        add_normal(prefix + "wk", {d, d}, attn_scale);
        add_normal(prefix + "wv", {d, d}, attn_scale);
        add_normal(prefix + "wo", {d, d}, attn_scale);
        add_ones(prefix + "ffn_norm", {d});
        add_normal(prefix + "w1", {d, config.d_ff}, attn_scale);
        add_normal(prefix + "w3", {d, config.d_ff}, attn_scale);
        add_normal(prefix + "w2", {config.d_ff, d},
                   1.0 / std::sqrt(static_cast<double>(config.d_ff)));
    }
    add_ones("final_norm", {d});
    add_normal("lm_head", {d, config.vocab_size}, 1.0 / std::sqrt(static_cast<double>(d)));

    container.validate();
    return container;
}

// ---------------------------------------------------------------------------
// NanoModel

namespace {

// y = rmsnorm(x) * gain, accumulation in f64, fixed index order.
void rmsnorm(std::span<const double> x, std::span<const float> gain,
             std::vector<double>& out) {
    double ss = 0.0;
    for (double v : x) {
        ss += v * v;
    }
    double inv = 1.0 / std::sqrt(ss / static_cast<double>(x.size()) + kRmsEps);
    out.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] * inv * static_cast<double>(gain[i]);
    }
}

// y[j] = sum_i x[i] * W[i, j] with W row-major [rows, cols].
void matvec(std::span<const double> x, std::span<const float> w, int rows, int cols,
            std::vector<double>& out) {
    out.assign(static_cast<std::size_t>(cols), 0.0);
    for (int i = 0; i < rows; ++i) {
        double xi = x[static_cast<std::size_t>(i)];
        const float* row = w.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(cols);
        for (int j = 0; j < cols; ++j) {
            out[static_cast<std::size_t>(j)] += xi * static_cast<double>(row[j]);
        }
    }
}

std::vector<double> sinusoidal_position(int pos, int d_model) {
    std::vector<double> out(static_cast<std::size_t>(d_model), 0.0);
    for (int k = 0; 2 * k < d_model; ++k) {
        double freq = std::pow(10000.0, -2.0 * static_cast<double>(k) / static_cast<double>(d_model));
        double angle = static_cast<double>(pos) * freq;
        out[static_cast<std::size_t>(2 * k)] = std::sin(angle);
        if (2 * k + 1 < d_model) {
            out[static_cast<std::size_t>(2 * k + 1)] = std::cos(angle);
        }
    }
    return out;
}

} // namespace

std::vector<double> softmax(std::span<const double> logits) {
    double m = logits[0];
    for (double v : logits) {
        m = std::max(m, v);
    }
    double sum = 0.0;
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        sum += out[i];
    }
    for (auto& v : out) {
        v /= sum;
    }
    return out;
}

NanoModel::NanoModel(WeightContainer weights)
    : weights_(std::move(weights)), config_(weights_.config) {
    weights_.validate();
    // every expected tensor must be present with the right shape
    auto expect = [&](const std::string& name, std::size_t count) {
        if (weights_.tensor(name).size() != count) {
            throw validation_error("weight container: tensor '" + name + "' has wrong size");
        }
    };
    std::size_t d = static_cast<std::size_t>(config_.d_model);
    expect("embedding", static_cast<std::size_t>(config_.vocab_size) * d);
    for (int i = 0; i < config_.n_layers; ++i) {
        std::string prefix = "layers." + std::to_string(i) + ".";
        expect(prefix + "attn_norm", d);
        expect(prefix + "wq", d * d);
        expect(prefix + "wk", d * d);
        expect(prefix + "wv", d * d);
        expect(prefix + "wo", d * d);
        expect(prefix + "ffn_norm", d);
        expect(prefix + "w1", d * static_cast<std::size_t>(config_.d_ff));
        expect(prefix + "w3", d * static_cast<std::size_t>(config_.d_ff));
        expect(prefix + "w2", static_cast<std::size_t>(config_.d_ff) * d);
    }
    expect("final_norm", d);
    expect("lm_head", d * static_cast<std::size_t>(config_.vocab_size));
}

void NanoModel::ffn_forward(std::span<const double> h_tilde, int layer,
                            std::vector<double>& h_out,
                            std::vector<double>& activation) const {
    if (layer < 0 || layer >= config_.n_layers) {
        throw validation_error("ffn_forward: layer index out of range");
    }
    std::string prefix = "layers." + std::to_string(layer) + ".";
    auto w1 = weights_.tensor(prefix + "w1");
    auto w3 = weights_.tensor(prefix + "w3");
    auto w2 = weights_.tensor(prefix + "w2");

    matvec(h_tilde, w1, config_.d_model, config_.d_ff, activation);
    for (auto& v : activation) {
        v = config_.act_fn == Activation::kSilu ? silu(v) : gelu(v);
    }
    std::vector<double> gate;
    matvec(h_tilde, w3, config_.d_model, config_.d_ff, gate);
    std::vector<double> gated(activation.size());
    for (std::size_t i = 0; i < activation.size(); ++i) {
        gated[i] = activation[i] * gate[i];
    }
    matvec(gated, w2, config_.d_ff, config_.d_model, h_out);
}

std::vector<double> NanoModel::run(std::span<const int> tokens, ForwardTaps* taps,
                                   bool want_all_keys,
                                   std::vector<std::vector<double>>* all_logits) const {
    std::size_t n = tokens.size();
    if (n == 0) {
        throw validation_error("forward: empty token context");
    }
    if (n > static_cast<std::size_t>(config_.max_context)) {
        throw validation_error("forward: context length " + std::to_string(n) +
                               " exceeds max_context " + std::to_string(config_.max_context));
    }
    std::size_t d = static_cast<std::size_t>(config_.d_model);
    auto embedding = weights_.tensor("embedding");

    // residual stream per position
    std::vector<std::vector<double>> x(n);
    for (std::size_t p = 0; p < n; ++p) {
        int tok = tokens[p];
        if (tok < 0 || tok >= config_.vocab_size) {
            throw validation_error("forward: token id " + std::to_string(tok) +
                                   " outside vocabulary");
        }
        x[p].resize(d);
        const float* row = embedding.data() + static_cast<std::size_t>(tok) * d;
        for (std::size_t j = 0; j < d; ++j) {
            x[p][j] = static_cast<double>(row[j]);
        }
        if (config_.use_positions) {
            auto pos = sinusoidal_position(static_cast<int>(p), config_.d_model);
            for (std::size_t j = 0; j < d; ++j) {
                x[p][j] += pos[j];
            }
        }
    }

    if (taps) {
        taps->ffn_input.clear();
        taps->ffn_activation.clear();
        taps->hidden.clear();
        taps->keys_final.clear();
        taps->keys_all.clear();
    }

    int n_heads = config_.n_heads;
    int d_head = config_.d_head();
    double scale = 1.0 / std::sqrt(static_cast<double>(d_head));

    std::vector<double> normed, q, attn_out, f_in, ffn_out, activation;
    std::vector<std::vector<double>> k(n), v(n);

    for (int layer = 0; layer < config_.n_layers; ++layer) {
        std::string prefix = "layers." + std::to_string(layer) + ".";
        auto attn_norm = weights_.tensor(prefix + "attn_norm");
        auto wq = weights_.tensor(prefix + "wq");
        auto wk = weights_.tensor(prefix + "wk");
        auto wv = weights_.tensor(prefix + "wv");
        auto wo = weights_.tensor(prefix + "wo");
        auto ffn_norm = weights_.tensor(prefix + "ffn_norm");

        // keys/values for every position, queries on demand
        std::vector<std::vector<double>> a_in(n);
        for (std::size_t p = 0; p < n; ++p) {
            rmsnorm(x[p], attn_norm, a_in[p]);
            matvec(a_in[p], wk, config_.d_model, config_.d_model, k[p]);
            matvec(a_in[p], wv, config_.d_model, config_.d_model, v[p]);
        }
        if (taps && want_all_keys) {
            taps->keys_all.push_back(k);
        }
        if (taps) {
            taps->keys_final.push_back(k[n - 1]);
        }

        for (std::size_t p = 0; p < n; ++p) {
            matvec(a_in[p], wq, config_.d_model, config_.d_model, q);
            std::vector<double> concat(d, 0.0);
            for (int h = 0; h < n_heads; ++h) {
                std::size_t base = static_cast<std::size_t>(h) * static_cast<std::size_t>(d_head);
                // causal attention over positions 0..p
                std::vector<double> scores(p + 1);
                for (std::size_t t = 0; t <= p; ++t) {
                    double dot = 0.0;
                    for (int j = 0; j < d_head; ++j) {
                        dot += q[base + static_cast<std::size_t>(j)] *
                               k[t][base + static_cast<std::size_t>(j)];
                    }
                    scores[t] = dot * scale;
                }
                auto probs = softmax(scores);
                for (std::size_t t = 0; t <= p; ++t) {
                    double w = probs[t];
                    for (int j = 0; j < d_head; ++j) {
                        concat[base + static_cast<std::size_t>(j)] +=
                            w * v[t][base + static_cast<std::size_t>(j)];
                    }
                }
            }
            matvec(concat, wo, config_.d_model, config_.d_model, attn_out);
            for (std::size_t j = 0; j < d; ++j) {
                x[p][j] += attn_out[j];
            }
        }

        for (std::size_t p = 0; p < n; ++p) {
            rmsnorm(x[p], ffn_norm, f_in);
            if (taps && p == n - 1) {
                taps->ffn_input.push_back(f_in);
            }
            ffn_forward(f_in, layer, ffn_out, activation);
            if (taps && p == n - 1) {
                taps->ffn_activation.push_back(activation);
            }
            for (std::size_t j = 0; j < d; ++j) {
                x[p][j] += ffn_out[j];
            }
        }
        if (taps) {
            taps->hidden.push_back(x[n - 1]);
        }
    }

    auto final_norm = weights_.tensor("final_norm");
    auto lm_head = weights_.tensor("lm_head");
    std::vector<double> y, logits;
    if (all_logits) {
        all_logits->clear();
        all_logits->reserve(n);
        for (std::size_t p = 0; p < n; ++p) {
            rmsnorm(x[p], final_norm, y);
            matvec(y, lm_head, config_.d_model, config_.vocab_size, logits);
            all_logits->push_back(logits);
        }
        return all_logits->back();
    }
    rmsnorm(x[n - 1], final_norm, y);
    matvec(y, lm_head, config_.d_model, config_.vocab_size, logits);
    return logits;
}

std::vector<double> NanoModel::forward(std::span<const int> tokens, ForwardTaps* taps,
                                       bool want_all_keys) const {
    return run(tokens, taps, want_all_keys, nullptr);
}

std::vector<std::vector<double>> NanoModel::forward_all(std::span<const int> tokens) const {
    std::vector<std::vector<double>> all;
    run(tokens, nullptr, false, &all);
    return all;
}

std::vector<double> NanoModel::project_to_vocab(std::span<const double> hidden) const {
    if (hidden.size() != static_cast<std::size_t>(config_.d_model)) {
        throw validation_error("project_to_vocab: hidden state has wrong dimension");
    }
    auto final_norm = weights_.tensor("final_norm");
    auto lm_head = weights_.tensor("lm_head");
    std::vector<double> y, logits;
    rmsnorm(hidden, final_norm, y);
    matvec(y, lm_head, config_.d_model, config_.vocab_size, logits);
    return logits;
}

int rank_of_token(std::span<const double> logits, int token_id) {
    if (token_id < 0 || token_id >= static_cast<int>(logits.size())) {
        throw validation_error("rank_of_token: token id out of range");
    }
    double target = logits[static_cast<std::size_t>(token_id)];
    int rank = 1;
    for (std::size_t j = 0; j < logits.size(); ++j) {
        if (logits[j] > target ||
            (logits[j] == target && static_cast<int>(j) < token_id)) {
            ++rank;
        }
    }
    return rank;
}

int NanoModel::logit_lens_rank(std::span<const double> hidden, int token_id) const {
    auto logits = project_to_vocab(hidden);
    return rank_of_token(logits, token_id);
}

// ---------------------------------------------------------------------------
// NanoBackend

NanoBackend::NanoBackend(WeightContainer weights, Tokenizer tokenizer)
    : model_(std::move(weights)), tokenizer_(std::move(tokenizer)) {
    if (tokenizer_.vocab_size() != model_.config().vocab_size) {
        throw validation_error("backend: tokenizer vocab size " +
                               std::to_string(tokenizer_.vocab_size()) +
                               " does not match model vocab size " +
                               std::to_string(model_.config().vocab_size));
    }
}

NanoBackend NanoBackend::load(const std::filesystem::path& weights_path,
                              const std::filesystem::path& vocab_path) {
    return NanoBackend(WeightContainer::load(weights_path), Tokenizer::load(vocab_path));
}

namespace {

std::vector<double> log_softmax(std::span<const double> logits) {
    double m = logits[0];
    for (double v : logits) {
        m = std::max(m, v);
    }
    double sum = 0.0;
    for (double v : logits) {
        sum += std::exp(v - m);
    }
    double lse = m + std::log(sum);
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = logits[i] - lse;
    }
    return out;
}

int argmax_lowest_id(std::span<const double> values) {
    int best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[static_cast<std::size_t>(best)]) {
            best = static_cast<int>(i);
        }
    }
    return best;
}

} // namespace

GenerationTrace NanoBackend::generate_greedy(const std::string& prompt, int max_tokens,
                                             const TapFlags& taps) const {
    if (max_tokens < 1) {
        throw validation_error("generate_greedy: max_tokens must be >= 1");
    }
    std::vector<int> context = tokenizer_.encode(prompt);
    if (context.empty()) {
        throw validation_error("generate_greedy: prompt encodes to zero tokens");
    }
    if (context.size() > static_cast<std::size_t>(model_.config().max_context)) {
        throw validation_error("generate_greedy: prompt length " +
                               std::to_string(context.size()) + " exceeds context length " +
                               std::to_string(model_.config().max_context));
    }

    GenerationTrace trace;
    trace.prompt_token_ids = context;

    std::vector<int> generated;
    for (int step = 0; step < max_tokens; ++step) {
        if (context.size() > static_cast<std::size_t>(model_.config().max_context)) {
            break;
        }
        ForwardTaps fwd;
        bool want_all_keys = taps.keys && step == 0;
        auto logits = model_.forward(context, &fwd, want_all_keys);

        StepRecord rec;
        rec.logprobs = log_softmax(logits);
        rec.chosen_token_id = argmax_lowest_id(rec.logprobs);
        if (taps.ffn) {
            rec.ffn_activation = fwd.ffn_activation.back();
        }
        if (taps.hidden) {
            rec.per_layer_hidden = fwd.hidden;
        }
        if (taps.keys) {
            rec.key_vectors = fwd.keys_final;
            if (step == 0) {
                // keys over the prompt positions only
                trace.prompt_keys.resize(fwd.keys_all.size());
                for (std::size_t l = 0; l < fwd.keys_all.size(); ++l) {
                    trace.prompt_keys[l].assign(
                        fwd.keys_all[l].begin(),
                        fwd.keys_all[l].begin() +
                            static_cast<std::ptrdiff_t>(trace.prompt_token_ids.size()));
                }
            }
        }
        trace.steps.push_back(std::move(rec));
        int chosen = trace.steps.back().chosen_token_id;
        generated.push_back(chosen);
        if (chosen == eos_id()) {
            break;
        }
        context.push_back(chosen);
    }
    trace.generated_text = tokenizer_.decode(generated);
    return trace;
}

double NanoBackend::sequence_perplexity(const std::string& text) const {
    std::vector<int> ids = tokenizer_.encode(text);
    if (ids.size() < 2) {
        throw validation_error("sequence_perplexity: text tokenizes to fewer than 2 tokens");
    }
    if (ids.size() > static_cast<std::size_t>(model_.config().max_context)) {
        throw validation_error("sequence_perplexity: text exceeds context length");
    }
    auto all_logits = model_.forward_all(ids);
    double nll = 0.0;
    for (std::size_t t = 1; t < ids.size(); ++t) {
        auto lp = log_softmax(all_logits[t - 1]);
        nll -= lp[static_cast<std::size_t>(ids[t])];
    }
    return std::exp(nll / static_cast<double>(ids.size() - 1));
}

std::vector<int> NanoBackend::encode(const std::string& text) const {
    return tokenizer_.encode(text);
}

std::string NanoBackend::decode(std::span<const int> ids) const {
    return tokenizer_.decode(ids);
}

std::string NanoBackend::piece(int id) const {
    return tokenizer_.piece(id);
}

std::vector<double> NanoBackend::lens_logits(const std::vector<double>& hidden) const {
    return model_.project_to_vocab(hidden);
}

} // namespace loads
