#pragma once
// SPDX-License-Identifier: Apache-2.0

// Candidate label-set pool construction: lexicon expansion, order
// permutations and elaboration variants.

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "loads/core_data.hpp"

namespace loads {

// ---------------------------------------------------------------------------
// Lexicon: static synonym/antonym resources plus a manual block list.

struct Lexicon {
    std::map<std::string, std::vector<std::string>> synonyms;      // role -> words
    std::vector<std::pair<std::string, std::string>> antonym_pairs; // (pos word, neg word)
    std::vector<std::string> blocked;                               // manual filter

    void validate(const ClassSchema& schema) const;
    bool is_blocked(const std::string& word) const;

    static Lexicon from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    static Lexicon load(const std::filesystem::path& path);
};

// Per-level, per-role format strings with one {word} placeholder.
struct ElaborationTemplates {
    std::map<Elaboration, std::map<std::string, std::string>> formats;

    void validate() const;
    static ElaborationTemplates from_json(const nlohmann::json& j);
    static ElaborationTemplates load(const std::filesystem::path& path);
};

// ---------------------------------------------------------------------------
// Pool operations

// All combinations of one word per role, in default order. Roles covered by
// antonym pairs vary jointly (one pair = one unit); remaining roles vary
// independently over their synonym lists. Blocked words are removed first.
// Output is sorted lexicographically by words so pool files are byte-stable.
std::vector<LabelSet> expand_pool(const ClassSchema& schema, const Lexicon& lexicon);

// All n! orderings of a single-word label set, each carrying its permutation
// index. Variant 0 equals the input (default order).
std::vector<LabelSet> permute_orders(const LabelSet& set, const ClassSchema& schema);

// Rewrites every word through its role's template at the given level.
LabelSet elaborate(const LabelSet& set, Elaboration level,
                   const ElaborationTemplates& templates, const ClassSchema& schema);

// Pool files: {"meta": ..., "sets": [{words, role_of, order_index, elaboration}]}.
// load_pool also accepts a bare JSON array of set objects.
void save_pool(const std::filesystem::path& path, const std::vector<LabelSet>& pool,
               const nlohmann::json& meta);
std::vector<LabelSet> load_pool(const std::filesystem::path& path,
                                const ClassSchema& schema);

} // namespace loads
