// SPDX-License-Identifier: Apache-2.0

#include "loads/backend.hpp"

#include <cmath>
#include <fstream>

#include "loads/errors.hpp"
#include "loads/json_util.hpp"

namespace loads {

// ---------------------------------------------------------------------------
// Trace serialization

namespace {

// Generated text may contain arbitrary bytes (byte-fallback tokens). JSON
// strings must be valid UTF-8, so bytes are stored as Latin-1 codepoints
// (U+0000..U+00FF); the mapping is reversible for every byte sequence and
// leaves ASCII text readable.
std::string bytes_to_json_text(const std::string& bytes) {
    std::string out;
    out.reserve(bytes.size());
    for (unsigned char c : bytes) {
        if (c < 0x80) {
            out += static_cast<char>(c);
        } else {
            out += static_cast<char>(0xC0 | (c >> 6));
            out += static_cast<char>(0x80 | (c & 0x3F));
        }
    }
    return out;
}

std::string json_text_to_bytes(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        if (c < 0x80) {
            out += static_cast<char>(c);
            i += 1;
        } else if ((c & 0xE0) == 0xC0 && i + 1 < text.size()) {
            unsigned char c2 = static_cast<unsigned char>(text[i + 1]);
            out += static_cast<char>(((c & 0x1F) << 6) | (c2 & 0x3F));
            i += 2;
        } else {
            throw parse_error("trace: generated_text holds a codepoint above U+00FF");
        }
    }
    return out;
}

nlohmann::json matrix_to_json(const std::vector<std::vector<double>>& m) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& row : m) {
        out.push_back(row);
    }
    return out;
}

std::vector<std::vector<double>> matrix_from_json(const nlohmann::json& j) {
    std::vector<std::vector<double>> out;
    for (const auto& row : j) {
        out.push_back(row.get<std::vector<double>>());
    }
    return out;
}

} // namespace

nlohmann::json trace_to_json(const GenerationTrace& trace) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& step : trace.steps) {
        nlohmann::json s{{"chosen_token_id", step.chosen_token_id},
                         {"logprobs", step.logprobs}};
        if (!step.ffn_activation.empty()) {
            s["ffn_activation"] = step.ffn_activation;
        }
        if (!step.per_layer_hidden.empty()) {
            s["per_layer_hidden"] = matrix_to_json(step.per_layer_hidden);
        }
        if (!step.key_vectors.empty()) {
            s["key_vectors"] = matrix_to_json(step.key_vectors);
        }
        steps.push_back(std::move(s));
    }
    nlohmann::json j{{"prompt_token_ids", trace.prompt_token_ids},
                     {"steps", steps},
                     {"generated_text", bytes_to_json_text(trace.generated_text)}};
    if (!trace.prompt_keys.empty()) {
        nlohmann::json layers = nlohmann::json::array();
        for (const auto& layer : trace.prompt_keys) {
            layers.push_back(matrix_to_json(layer));
        }
        j["prompt_keys"] = std::move(layers);
    }
    if (trace.perplexity) {
        j["perplexity"] = *trace.perplexity;
    }
    return j;
}

GenerationTrace trace_from_json(const nlohmann::json& j) {
    GenerationTrace trace;
    try {
        trace.prompt_token_ids = j.at("prompt_token_ids").get<std::vector<int>>();
        trace.generated_text = json_text_to_bytes(j.at("generated_text").get<std::string>());
        for (const auto& s : j.at("steps")) {
            StepRecord step;
            step.chosen_token_id = s.at("chosen_token_id").get<int>();
            step.logprobs = s.at("logprobs").get<std::vector<double>>();
            if (s.contains("ffn_activation")) {
                step.ffn_activation = s.at("ffn_activation").get<std::vector<double>>();
            }
            if (s.contains("per_layer_hidden")) {
                step.per_layer_hidden = matrix_from_json(s.at("per_layer_hidden"));
            }
            if (s.contains("key_vectors")) {
                step.key_vectors = matrix_from_json(s.at("key_vectors"));
            }
            trace.steps.push_back(std::move(step));
        }
        if (j.contains("prompt_keys")) {
            for (const auto& layer : j.at("prompt_keys")) {
                trace.prompt_keys.push_back(matrix_from_json(layer));
            }
        }
        if (j.contains("perplexity")) {
            trace.perplexity = j.at("perplexity").get<double>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(std::string("bad trace JSON: ") + e.what());
    }
    return trace;
}

void save_traces(const std::filesystem::path& path,
                 const std::vector<GenerationTrace>& traces) {
    std::string out;
    for (const auto& trace : traces) {
        out += trace_to_json(trace).dump();
        out += '\n';
    }
    write_text_file(path, out);
}

std::vector<GenerationTrace> load_traces(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw io_error("cannot open trace file: " + path.string());
    }
    std::vector<GenerationTrace> traces;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw parse_error(path.string() + ":" + std::to_string(line_no) +
                              ": malformed trace line: " + e.what());
        }
        traces.push_back(trace_from_json(j));
    }
    return traces;
}

void validate_trace(const GenerationTrace& trace) {
    if (trace.steps.empty()) {
        throw validation_error("trace: steps must be nonempty");
    }
    for (std::size_t i = 0; i < trace.steps.size(); ++i) {
        const auto& step = trace.steps[i];
        if (step.logprobs.empty()) {
            throw validation_error("trace step " + std::to_string(i) + ": empty logprobs");
        }
        // normalized: logsumexp == 0 within tolerance
        double m = step.logprobs[0];
        for (double v : step.logprobs) {
            if (!std::isfinite(v)) {
                throw validation_error("trace step " + std::to_string(i) +
                                       ": non-finite logprob");
            }
            m = std::max(m, v);
        }
        double sum = 0.0;
        for (double v : step.logprobs) {
            sum += std::exp(v - m);
        }
        double lse = m + std::log(sum);
        if (std::abs(lse) > 1e-6) {
            throw validation_error("trace step " + std::to_string(i) +
                                   ": logprobs not normalized (logsumexp = " +
                                   std::to_string(lse) + ")");
        }
        // greedy contract: chosen = argmax, ties to the lowest token id
        int best = 0;
        for (std::size_t v = 1; v < step.logprobs.size(); ++v) {
            if (step.logprobs[v] > step.logprobs[static_cast<std::size_t>(best)]) {
                best = static_cast<int>(v);
            }
        }
        if (step.chosen_token_id != best) {
            throw validation_error("trace step " + std::to_string(i) +
                                   ": chosen_token_id violates the greedy argmax contract");
        }
    }
}

// ---------------------------------------------------------------------------
// Backend defaults

double Backend::first_token_logprob(const std::string& prompt, int token_id) const {
    if (token_id < 0 || token_id >= vocab_size()) {
        throw validation_error("first_token_logprob: unknown token id " +
                               std::to_string(token_id));
    }
    TapFlags taps;
    taps.ffn = false;
    GenerationTrace trace = generate_greedy(prompt, 1, taps);
    return trace.steps.front().logprobs[static_cast<std::size_t>(token_id)];
}

std::vector<double> Backend::lens_logits(const std::vector<double>&) const {
    throw unsupported_error("backend does not support logit-lens projection");
}

// ---------------------------------------------------------------------------
// ReplayBackend

ReplayBackend::ReplayBackend(std::vector<GenerationTrace> traces,
                             std::vector<std::string> prompts) {
    if (traces.size() != prompts.size()) {
        throw validation_error("replay backend: traces/prompts size mismatch");
    }
    for (std::size_t i = 0; i < traces.size(); ++i) {
        put(prompts[i], std::move(traces[i]));
    }
}

ReplayBackend ReplayBackend::from_file(const std::filesystem::path& path,
                                       const Tokenizer& tokenizer) {
    ReplayBackend backend;
    backend.tokenizer_ = tokenizer;
    for (auto& trace : load_traces(path)) {
        std::string prompt = tokenizer.decode(trace.prompt_token_ids);
        backend.put(prompt, std::move(trace));
    }
    return backend;
}

void ReplayBackend::put(const std::string& prompt, GenerationTrace trace) {
    validate_trace(trace);
    traces_[prompt] = std::move(trace);
}

void ReplayBackend::set_tokenizer(Tokenizer tokenizer) {
    tokenizer_ = std::move(tokenizer);
}

const GenerationTrace& ReplayBackend::lookup(const std::string& prompt) const {
    auto it = traces_.find(prompt);
    if (it == traces_.end()) {
        throw validation_error("replay backend: no stored trace for prompt: " +
                               prompt.substr(0, 120));
    }
    return it->second;
}

GenerationTrace ReplayBackend::generate_greedy(const std::string& prompt, int max_tokens,
                                               const TapFlags& taps) const {
    if (max_tokens < 1) {
        throw validation_error("generate_greedy: max_tokens must be >= 1");
    }
    const GenerationTrace& trace = lookup(prompt);
    if (taps.ffn && trace.steps.front().ffn_activation.empty()) {
        throw unsupported_error("replay backend: stored trace has no ffn_activation tap");
    }
    if (taps.hidden && trace.steps.front().per_layer_hidden.empty()) {
        throw unsupported_error("replay backend: stored trace has no hidden-state tap");
    }
    if (taps.keys && trace.prompt_keys.empty()) {
        throw unsupported_error("replay backend: stored trace has no key tap");
    }
    return trace;  // verbatim
}

double ReplayBackend::sequence_perplexity(const std::string& text) const {
    const GenerationTrace& trace = lookup(text);
    if (!trace.perplexity) {
        throw unsupported_error("replay backend: stored trace carries no perplexity");
    }
    return *trace.perplexity;
}

std::vector<int> ReplayBackend::encode(const std::string& text) const {
    if (!tokenizer_) {
        throw unsupported_error("replay backend: no tokenizer configured");
    }
    return tokenizer_->encode(text);
}

std::string ReplayBackend::decode(std::span<const int> ids) const {
    if (!tokenizer_) {
        throw unsupported_error("replay backend: no tokenizer configured");
    }
    return tokenizer_->decode(ids);
}

std::string ReplayBackend::piece(int id) const {
    if (!tokenizer_) {
        throw unsupported_error("replay backend: no tokenizer configured");
    }
    return tokenizer_->piece(id);
}

int ReplayBackend::vocab_size() const {
    if (tokenizer_) {
        return tokenizer_->vocab_size();
    }
    if (!traces_.empty()) {
        return static_cast<int>(traces_.begin()->second.steps.front().logprobs.size());
    }
    throw unsupported_error("replay backend: vocabulary size unknown (no traces)");
}

int ReplayBackend::d_ff() const {
    for (const auto& [prompt, trace] : traces_) {
        (void)prompt;
        if (!trace.steps.front().ffn_activation.empty()) {
            return static_cast<int>(trace.steps.front().ffn_activation.size());
        }
    }
    throw unsupported_error("replay backend: no trace carries an ffn_activation tap");
}

int ReplayBackend::n_layers() const {
    for (const auto& [prompt, trace] : traces_) {
        (void)prompt;
        if (!trace.steps.front().per_layer_hidden.empty()) {
            return static_cast<int>(trace.steps.front().per_layer_hidden.size());
        }
        if (!trace.prompt_keys.empty()) {
            return static_cast<int>(trace.prompt_keys.size());
        }
    }
    throw unsupported_error("replay backend: no trace carries per-layer taps");
}

} // namespace loads
