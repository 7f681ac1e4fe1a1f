// SPDX-License-Identifier: Apache-2.0

// Python bindings for the main operations. Structured values cross the
// boundary as JSON strings; scalars and flat vectors map natively.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
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
#include "loads/version.hpp"

namespace py = pybind11;
using loads::json;

namespace {

json parse(const std::string& text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw loads::parse_error(std::string("invalid ") + what + " JSON: " + e.what());
    }
}

std::string py_expand_pool(const std::string& schema_json, const std::string& lexicon_json) {
    auto schema = loads::ClassSchema::from_json(parse(schema_json, "schema"));
    auto lexicon = loads::Lexicon::from_json(parse(lexicon_json, "lexicon"));
    json out = json::array();
    for (const auto& set : loads::expand_pool(schema, lexicon)) {
        out.push_back(set.to_json());
    }
    return out.dump();
}

std::string py_permute_orders(const std::string& set_json, const std::string& schema_json) {
    auto schema = loads::ClassSchema::from_json(parse(schema_json, "schema"));
    auto set = loads::LabelSet::from_json(parse(set_json, "label set"));
    json out = json::array();
    for (const auto& variant : loads::permute_orders(set, schema)) {
        out.push_back(variant.to_json());
    }
    return out.dump();
}

std::string py_elaborate(const std::string& set_json, const std::string& level,
                         const std::string& templates_json, const std::string& schema_json) {
    auto schema = loads::ClassSchema::from_json(parse(schema_json, "schema"));
    auto set = loads::LabelSet::from_json(parse(set_json, "label set"));
    auto templates =
        loads::ElaborationTemplates::from_json(parse(templates_json, "elaboration templates"));
    return loads::elaborate(set, loads::elaboration_from_name(level), templates, schema)
        .to_json()
        .dump();
}

std::string py_render(const std::string& template_json, const std::string& schema_json,
                      const std::string& set_json, const std::string& example_json) {
    auto tpl = loads::PromptTemplate::from_json(parse(template_json, "template"));
    auto schema = loads::ClassSchema::from_json(parse(schema_json, "schema"));
    auto set = loads::LabelSet::from_json(parse(set_json, "label set"));
    auto ex_j = parse(example_json, "example");
    loads::Example ex;
    ex.id = ex_j.value("id", "example");
    ex.text1 = ex_j.at("text1").get<std::string>();
    ex.text2 = ex_j.at("text2").get<std::string>();
    return loads::render(tpl, schema, set, ex);
}

std::vector<std::string> py_draw_sample(const std::vector<std::string>& ids, int size,
                                        std::uint64_t seed) {
    std::vector<loads::Example> examples;
    examples.reserve(ids.size());
    for (const auto& id : ids) {
        loads::Example ex;
        ex.id = id;
        examples.push_back(std::move(ex));
    }
    return loads::draw_sample(examples, size, seed).example_ids;
}

double py_macro_f1(const std::vector<std::string>& gold,
                   const std::vector<std::optional<std::string>>& predicted,
                   const std::vector<std::string>& roles) {
    return loads::macro_f1(gold, predicted, roles);
}

double py_wf2(const std::vector<std::string>& gold,
              const std::vector<std::optional<std::string>>& predicted,
              const std::vector<std::string>& roles,
              const std::map<std::string, double>& weights) {
    return loads::wf2(gold, predicted, roles, weights);
}

void py_init_random(const std::string& config_json, std::uint64_t seed,
                    const std::string& out_path) {
    auto cfg = loads::ModelConfig::from_json(parse(config_json, "model config"));
    loads::init_random(cfg, seed).save(out_path);
}

std::string py_select_loads(const std::string& schema_path, const std::string& dataset_path,
                            const std::string& pool_path, const std::string& template_path,
                            const std::string& weights_path, const std::string& vocab_path,
                            int sample_size, std::uint64_t seed, int workers) {
    auto schema = loads::ClassSchema::load(schema_path);
    auto dataset = loads::load_dataset(dataset_path, schema);
    auto pool = loads::load_pool(pool_path, schema);
    auto tpl = loads::PromptTemplate::load(template_path);
    auto backend = loads::NanoBackend::load(weights_path, vocab_path);
    auto sample = loads::select_examples(dataset, loads::draw_sample(dataset, sample_size, seed));
    auto result = loads::loads_select(backend, schema, sample, pool, tpl, workers);
    return loads::selection_result_to_json(result).dump();
}

class PyNanoBackend {
public:
    PyNanoBackend(const std::string& weights_path, const std::string& vocab_path)
        : backend_(loads::NanoBackend::load(weights_path, vocab_path)) {}

    std::string generate_greedy(const std::string& prompt, int max_tokens, bool ffn,
                                bool hidden, bool keys) const {
        loads::TapFlags taps;
        taps.ffn = ffn;
        taps.hidden = hidden;
        taps.keys = keys;
        return loads::trace_to_json(backend_.generate_greedy(prompt, max_tokens, taps)).dump();
    }

    double first_token_logprob(const std::string& prompt, int token_id) const {
        return backend_.first_token_logprob(prompt, token_id);
    }

    double sequence_perplexity(const std::string& text) const {
        return backend_.sequence_perplexity(text);
    }

    std::vector<int> encode(const std::string& text) const { return backend_.encode(text); }

    std::string decode(const std::vector<int>& ids) const { return backend_.decode(ids); }

    int vocab_size() const { return backend_.vocab_size(); }
    int d_ff() const { return backend_.d_ff(); }
    int n_layers() const { return backend_.n_layers(); }

private:
    loads::NanoBackend backend_;
};

} // namespace

PYBIND11_MODULE(loadskit, m) {
    m.doc() = "Label-set selection via feed-forward activation kurtosis";
    m.attr("__version__") = loads::kToolVersion;

    py::register_exception<loads::error>(m, "LoadsError");

    m.def("kurtosis",
          [](const std::vector<double>& v) { return loads::kurtosis(v); },
          py::arg("values"),
          "Population kurtosis E[(v-mu)^4] / E[(v-mu)^2]^2 of a vector");
    m.def("spearman",
          [](const std::vector<double>& xs, const std::vector<double>& ys) {
              auto r = loads::spearman(xs, ys);
              return py::make_tuple(r.rho, r.p);
          },
          py::arg("xs"), py::arg("ys"),
          "Spearman rank correlation with midrank ties; returns (rho, p)");
    m.def("macro_f1", &py_macro_f1, py::arg("gold"), py::arg("predicted"), py::arg("roles"),
          "Unweighted mean per-role F1; None predictions count as invalid");
    m.def("wf2", &py_wf2, py::arg("gold"), py::arg("predicted"), py::arg("roles"),
          py::arg("weights"), "Weighted per-role F1 combination");
    m.def("draw_sample", &py_draw_sample, py::arg("ids"), py::arg("size"), py::arg("seed"),
          "Seeded uniform sample without replacement (splitmix64 + Fisher-Yates)");
    m.def("expand_pool", &py_expand_pool, py::arg("schema_json"), py::arg("lexicon_json"),
          "Candidate pool as a JSON array string");
    m.def("permute_orders", &py_permute_orders, py::arg("set_json"), py::arg("schema_json"),
          "All order permutations of a label set as a JSON array string");
    m.def("elaborate", &py_elaborate, py::arg("set_json"), py::arg("level"),
          py::arg("templates_json"), py::arg("schema_json"),
          "Rewrite a label set through elaboration templates");
    m.def("render_prompt", &py_render, py::arg("template_json"), py::arg("schema_json"),
          py::arg("set_json"), py::arg("example_json"),
          "Render the classification prompt for one example");
    m.def("init_random", &py_init_random, py::arg("config_json"), py::arg("seed"),
          py::arg("out_path"), "Write a seeded random weight container");
    m.def("select_loads", &py_select_loads, py::arg("schema_path"), py::arg("dataset_path"),
          py::arg("pool_path"), py::arg("template_path"), py::arg("weights_path"),
          py::arg("vocab_path"), py::arg("sample_size") = 100, py::arg("seed") = 0,
          py::arg("workers") = 1,
          "Run kurtosis-based selection over a candidate pool; returns the result JSON");

    py::class_<PyNanoBackend>(m, "NanoBackend")
        .def(py::init<const std::string&, const std::string&>(), py::arg("weights_path"),
             py::arg("vocab_path"))
        .def("generate_greedy", &PyNanoBackend::generate_greedy, py::arg("prompt"),
             py::arg("max_tokens") = 8, py::arg("ffn") = true, py::arg("hidden") = false,
             py::arg("keys") = false, "Greedy decode; returns the trace as a JSON string")
        .def("first_token_logprob", &PyNanoBackend::first_token_logprob, py::arg("prompt"),
             py::arg("token_id"))
        .def("sequence_perplexity", &PyNanoBackend::sequence_perplexity, py::arg("text"))
        .def("encode", &PyNanoBackend::encode, py::arg("text"))
        .def("decode", &PyNanoBackend::decode, py::arg("ids"))
        .def_property_readonly("vocab_size", &PyNanoBackend::vocab_size)
        .def_property_readonly("d_ff", &PyNanoBackend::d_ff)
        .def_property_readonly("n_layers", &PyNanoBackend::n_layers);
}
