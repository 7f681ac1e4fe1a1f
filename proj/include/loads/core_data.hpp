#pragma once
// SPDX-License-Identifier: Apache-2.0

// Domain types for classification tasks: schemas, examples, label sets and
// reproducible validation-set sampling.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace loads {

// Role id reserved for generations that match no label word.
inline constexpr const char* kInvalidRole = "INVALID";

enum class Elaboration { kNone, kE1, kE2, kE3 };
enum class LabelSource { kOriginal, kLexicon, kManual };

std::string elaboration_name(Elaboration level);
Elaboration elaboration_from_name(const std::string& name);

// ---------------------------------------------------------------------------
// ClassSchema: a task's class roles, original label words and text fields.

struct ClassSchema {
    std::string task_name;
    std::vector<std::string> class_roles;                 // ordered role ids
    std::map<std::string, std::string> original_labels;   // role -> surface word
    std::string text1_name;
    std::string text2_name;

    int n_classes() const { return static_cast<int>(class_roles.size()); }
    int role_index(const std::string& role) const;        // -1 when unknown
    void validate() const;

    static ClassSchema from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    static ClassSchema load(const std::filesystem::path& path);
};

// ---------------------------------------------------------------------------
// Example: one classification instance.

struct Example {
    std::string id;
    std::string text1;
    std::string text2;
    std::optional<std::string> gold_role;
};

// ---------------------------------------------------------------------------
// LabelSet: an ordered list of label surface forms, one per class role.

struct LabelSet {
    std::vector<std::string> words;     // position -> surface form
    std::vector<std::string> role_of;   // position -> role id (bijection onto class_roles)
    int order_index = 0;                // 0 = default order
    Elaboration elaboration = Elaboration::kNone;
    LabelSource source = LabelSource::kOriginal;

    int size() const { return static_cast<int>(words.size()); }
    std::string word_for_role(const std::string& role) const;
    // Canonical identity used to align pools, reports and sweeps.
    std::string key() const;
    void validate(const ClassSchema& schema) const;

    static LabelSet from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// The schema's original labels in default order.
LabelSet original_label_set(const ClassSchema& schema);

// ---------------------------------------------------------------------------
// Sampling

struct SampleDraw {
    std::uint64_t seed = 0;
    int size = 0;
    std::vector<std::string> example_ids;   // draw order
};

// splitmix64: the fixed PRNG behind all sampling and weight initialization.
// Algorithm and constants are documented in docs/FORMATS.md so draws can be
// reproduced in any language.
struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Unbiased draw in [0, bound) via rejection sampling.
    std::uint64_t next_below(std::uint64_t bound);

    // Uniform double in [0, 1) using the top 53 bits.
    double next_unit() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }
};

// Loads a JSONL dataset (one object per line: id, text1, text2, optional
// label). Preserves input order; validates gold roles and id uniqueness.
std::vector<Example> load_dataset(const std::filesystem::path& path,
                                  const ClassSchema& schema);

// Serializes examples back to the JSONL dataset format (round-trip safe).
void save_dataset(const std::filesystem::path& path,
                  const std::vector<Example>& examples);

// Uniform sampling without replacement: splitmix64 + partial Fisher-Yates.
// Pure function of (seed, size, input order); draws with the same seed are
// nested, i.e. draw(seed, s1) is a prefix of draw(seed, s2) for s1 <= s2.
SampleDraw draw_sample(const std::vector<Example>& examples, int size,
                       std::uint64_t seed);

// Stratified variant (requires gold roles): per-role quotas by largest
// remainder, then a partial Fisher-Yates within each role in schema order.
SampleDraw draw_sample_stratified(const std::vector<Example>& examples,
                                  const ClassSchema& schema, int size,
                                  std::uint64_t seed);

// Resolves a draw back to examples, in draw order.
std::vector<Example> select_examples(const std::vector<Example>& examples,
                                     const SampleDraw& draw);

} // namespace loads
