// SPDX-License-Identifier: Apache-2.0

#include "loads/core_data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "loads/errors.hpp"
#include "loads/json_util.hpp"

namespace loads {

namespace {

std::string lower(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

} // namespace

std::string elaboration_name(Elaboration level) {
    switch (level) {
        case Elaboration::kNone: return "NONE";
        case Elaboration::kE1: return "E1";
        case Elaboration::kE2: return "E2";
        case Elaboration::kE3: return "E3";
    }
    return "NONE";
}

Elaboration elaboration_from_name(const std::string& name) {
    if (name == "NONE") return Elaboration::kNone;
    if (name == "E1") return Elaboration::kE1;
    if (name == "E2") return Elaboration::kE2;
    if (name == "E3") return Elaboration::kE3;
    throw parse_error("unknown elaboration level: " + name);
}

namespace {

std::string source_name(LabelSource source) {
    switch (source) {
        case LabelSource::kOriginal: return "ORIGINAL";
        case LabelSource::kLexicon: return "LEXICON";
        case LabelSource::kManual: return "MANUAL";
    }
    return "ORIGINAL";
}

LabelSource source_from_name(const std::string& name) {
    if (name == "ORIGINAL") return LabelSource::kOriginal;
    if (name == "LEXICON") return LabelSource::kLexicon;
    if (name == "MANUAL") return LabelSource::kManual;
    throw parse_error("unknown label source: " + name);
}

} // namespace

// ---------------------------------------------------------------------------
// ClassSchema

int ClassSchema::role_index(const std::string& role) const {
    for (std::size_t i = 0; i < class_roles.size(); ++i) {
        if (class_roles[i] == role) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

void ClassSchema::validate() const {
    if (class_roles.size() < 2) {
        throw validation_error("schema '" + task_name + "': needs at least 2 class roles");
    }
    std::set<std::string> seen;
    for (const auto& role : class_roles) {
        if (role.empty()) {
            throw validation_error("schema '" + task_name + "': empty role id");
        }
        if (role == kInvalidRole) {
            throw validation_error("schema '" + task_name + "': role id '" +
                                   std::string(kInvalidRole) + "' is reserved");
        }
        if (!seen.insert(role).second) {
            throw validation_error("schema '" + task_name + "': duplicate role id '" + role + "'");
        }
        auto it = original_labels.find(role);
        if (it == original_labels.end() || it->second.empty()) {
            throw validation_error("schema '" + task_name + "': role '" + role +
                                   "' has no original label");
        }
    }
    for (const auto& [role, word] : original_labels) {
        (void)word;
        if (role_index(role) < 0) {
            throw validation_error("schema '" + task_name + "': original label for unknown role '" +
                                   role + "'");
        }
    }
    if (text1_name.empty() || text2_name.empty()) {
        throw validation_error("schema '" + task_name + "': text field names must be nonempty");
    }
}

ClassSchema ClassSchema::from_json(const nlohmann::json& j) {
    ClassSchema schema;
    try {
        schema.task_name = j.at("task_name").get<std::string>();
        schema.class_roles = j.at("class_roles").get<std::vector<std::string>>();
        schema.original_labels =
            j.at("original_labels").get<std::map<std::string, std::string>>();
        schema.text1_name = j.at("text1_name").get<std::string>();
        schema.text2_name = j.at("text2_name").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(std::string("bad schema JSON: ") + e.what());
    }
    schema.validate();
    return schema;
}

nlohmann::json ClassSchema::to_json() const {
    return nlohmann::json{{"task_name", task_name},
                          {"class_roles", class_roles},
                          {"original_labels", original_labels},
                          {"text1_name", text1_name},
                          {"text2_name", text2_name}};
}

ClassSchema ClassSchema::load(const std::filesystem::path& path) {
    return from_json(read_json_file(path));
}

// ---------------------------------------------------------------------------
// LabelSet

std::string LabelSet::word_for_role(const std::string& role) const {
    for (std::size_t i = 0; i < role_of.size(); ++i) {
        if (role_of[i] == role) {
            return words[i];
        }
    }
    throw validation_error("label set has no word for role '" + role + "'");
}

std::string LabelSet::key() const {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i > 0) out += '|';
        out += words[i];
    }
    return out;
}

void LabelSet::validate(const ClassSchema& schema) const {
    if (static_cast<int>(words.size()) != schema.n_classes()) {
        throw validation_error("label set '" + key() + "': expected " +
                               std::to_string(schema.n_classes()) + " words, got " +
                               std::to_string(words.size()));
    }
    if (role_of.size() != words.size()) {
        throw validation_error("label set '" + key() + "': role_of size mismatch");
    }
    std::set<std::string> seen_words;
    for (const auto& w : words) {
        if (w.empty()) {
            throw validation_error("label set '" + key() + "': empty word");
        }
        if (!seen_words.insert(lower(w)).second) {
            throw validation_error("label set '" + key() +
                                   "': words must be pairwise distinct (case-insensitive)");
        }
        if (elaboration == Elaboration::kNone &&
            w.find_first_of(" \t\n\r") != std::string::npos) {
            throw validation_error("label set '" + key() +
                                   "': single-word sets cannot contain whitespace ('" + w + "')");
        }
    }
    std::set<std::string> seen_roles;
    for (const auto& role : role_of) {
        if (schema.role_index(role) < 0) {
            throw validation_error("label set '" + key() + "': unknown role '" + role + "'");
        }
        if (!seen_roles.insert(role).second) {
            throw validation_error("label set '" + key() + "': duplicate role '" + role + "'");
        }
    }
}

LabelSet LabelSet::from_json(const nlohmann::json& j) {
    LabelSet set;
    try {
        set.words = j.at("words").get<std::vector<std::string>>();
        set.role_of = j.at("role_of").get<std::vector<std::string>>();
        set.order_index = j.value("order_index", 0);
        set.elaboration = elaboration_from_name(j.value("elaboration", "NONE"));
        set.source = source_from_name(j.value("source", "LEXICON"));
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(std::string("bad label set JSON: ") + e.what());
    }
    return set;
}

nlohmann::json LabelSet::to_json() const {
    return nlohmann::json{{"words", words},
                          {"role_of", role_of},
                          {"order_index", order_index},
                          {"elaboration", elaboration_name(elaboration)},
                          {"source", source_name(source)}};
}

LabelSet original_label_set(const ClassSchema& schema) {
    LabelSet set;
    for (const auto& role : schema.class_roles) {
        set.words.push_back(schema.original_labels.at(role));
        set.role_of.push_back(role);
    }
    set.order_index = 0;
    set.elaboration = Elaboration::kNone;
    set.source = LabelSource::kOriginal;
    return set;
}

// ---------------------------------------------------------------------------
// Dataset I/O

std::vector<Example> load_dataset(const std::filesystem::path& path,
                                  const ClassSchema& schema) {
    std::ifstream in(path);
    if (!in) {
        throw io_error("cannot open dataset: " + path.string());
    }
    std::vector<Example> examples;
    std::set<std::string> seen_ids;
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
                              ": malformed JSON line: " + e.what());
        }
        Example ex;
        try {
            ex.id = j.at("id").get<std::string>();
            ex.text1 = j.at("text1").get<std::string>();
            ex.text2 = j.at("text2").get<std::string>();
            if (j.contains("label") && !j.at("label").is_null()) {
                ex.gold_role = j.at("label").get<std::string>();
            }
        } catch (const nlohmann::json::exception& e) {
            throw parse_error(path.string() + ":" + std::to_string(line_no) +
                              ": bad example object: " + e.what());
        }
        if (!seen_ids.insert(ex.id).second) {
            throw validation_error(path.string() + ":" + std::to_string(line_no) +
                                   ": duplicate example id '" + ex.id + "'");
        }
        if (ex.gold_role && schema.role_index(*ex.gold_role) < 0) {
            throw validation_error(path.string() + ":" + std::to_string(line_no) +
                                   ": unknown gold role '" + *ex.gold_role + "'");
        }
        examples.push_back(std::move(ex));
    }
    return examples;
}

void save_dataset(const std::filesystem::path& path, const std::vector<Example>& examples) {
    std::string out;
    for (const auto& ex : examples) {
        nlohmann::json j{{"id", ex.id}, {"text1", ex.text1}, {"text2", ex.text2}};
        if (ex.gold_role) {
            j["label"] = *ex.gold_role;
        }
        out += j.dump();
        out += '\n';
    }
    write_text_file(path, out);
}

// ---------------------------------------------------------------------------
// Sampling

std::uint64_t SplitMix64::next_below(std::uint64_t bound) {
    if (bound == 0) {
        throw numeric_error("next_below: zero bound");
    }
    // Rejection sampling: accept x < 2^64 - (2^64 mod bound).
    std::uint64_t rem = (UINT64_MAX % bound + 1) % bound;
    std::uint64_t x;
    do {
        x = next();
    } while (rem != 0 && x > UINT64_MAX - rem);
    return x % bound;
}

namespace {

// Partial Fisher-Yates: the first `size` slots after `size` swap steps are
// the draw. Smaller same-seed draws are prefixes of larger ones.
std::vector<std::string> partial_shuffle(std::vector<std::string> ids, int size,
                                         SplitMix64& rng) {
    std::size_t n = ids.size();
    for (int i = 0; i < size; ++i) {
        std::uint64_t j = static_cast<std::uint64_t>(i) +
                          rng.next_below(static_cast<std::uint64_t>(n - static_cast<std::size_t>(i)));
        std::swap(ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(j)]);
    }
    ids.resize(static_cast<std::size_t>(size));
    return ids;
}

} // namespace

SampleDraw draw_sample(const std::vector<Example>& examples, int size, std::uint64_t seed) {
    if (size < 1 || size > static_cast<int>(examples.size())) {
        throw validation_error("draw_sample: size " + std::to_string(size) +
                               " out of range [1, " + std::to_string(examples.size()) + "]");
    }
    std::vector<std::string> ids;
    ids.reserve(examples.size());
    for (const auto& ex : examples) {
        ids.push_back(ex.id);
    }
    SplitMix64 rng(seed);
    SampleDraw draw;
    draw.seed = seed;
    draw.size = size;
    draw.example_ids = partial_shuffle(std::move(ids), size, rng);
    return draw;
}

SampleDraw draw_sample_stratified(const std::vector<Example>& examples,
                                  const ClassSchema& schema, int size,
                                  std::uint64_t seed) {
    if (size < 1 || size > static_cast<int>(examples.size())) {
        throw validation_error("draw_sample_stratified: size " + std::to_string(size) +
                               " out of range [1, " + std::to_string(examples.size()) + "]");
    }
    std::map<std::string, std::vector<std::string>> by_role;
    for (const auto& ex : examples) {
        if (!ex.gold_role) {
            throw validation_error("stratified sampling requires gold labels; example '" +
                                   ex.id + "' has none");
        }
        by_role[*ex.gold_role].push_back(ex.id);
    }

    // Quotas by largest remainder, clamped to group sizes; leftover seats go
    // to roles in schema order.
    double total = static_cast<double>(examples.size());
    std::vector<int> quota(schema.class_roles.size(), 0);
    std::vector<double> frac(schema.class_roles.size(), 0.0);
    int assigned = 0;
    for (std::size_t r = 0; r < schema.class_roles.size(); ++r) {
        auto it = by_role.find(schema.class_roles[r]);
        std::size_t avail = it == by_role.end() ? 0 : it->second.size();
        double share = static_cast<double>(size) * static_cast<double>(avail) / total;
        quota[r] = static_cast<int>(share);
        frac[r] = share - static_cast<double>(quota[r]);
        quota[r] = std::min<int>(quota[r], static_cast<int>(avail));
        assigned += quota[r];
    }
    while (assigned < size) {
        std::size_t best = schema.class_roles.size();
        for (std::size_t r = 0; r < schema.class_roles.size(); ++r) {
            auto it = by_role.find(schema.class_roles[r]);
            std::size_t avail = it == by_role.end() ? 0 : it->second.size();
            if (quota[r] >= static_cast<int>(avail)) {
                continue;
            }
            if (best == schema.class_roles.size() || frac[r] > frac[best]) {
                best = r;
            }
        }
        if (best == schema.class_roles.size()) {
            break;
        }
        ++quota[best];
        frac[best] = -1.0;
        ++assigned;
    }

    SplitMix64 rng(seed);
    SampleDraw draw;
    draw.seed = seed;
    draw.size = size;
    for (std::size_t r = 0; r < schema.class_roles.size(); ++r) {
        if (quota[r] == 0) {
            continue;
        }
        auto ids = partial_shuffle(by_role[schema.class_roles[r]], quota[r], rng);
        draw.example_ids.insert(draw.example_ids.end(), ids.begin(), ids.end());
    }
    return draw;
}

std::vector<Example> select_examples(const std::vector<Example>& examples,
                                     const SampleDraw& draw) {
    std::map<std::string, const Example*> by_id;
    for (const auto& ex : examples) {
        by_id[ex.id] = &ex;
    }
    std::vector<Example> out;
    out.reserve(draw.example_ids.size());
    for (const auto& id : draw.example_ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) {
            throw validation_error("sample draw references unknown example id '" + id + "'");
        }
        out.push_back(*it->second);
    }
    return out;
}

} // namespace loads
