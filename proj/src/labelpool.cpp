// SPDX-License-Identifier: Apache-2.0

#include "loads/labelpool.hpp"

#include <algorithm>
#include <set>

#include "loads/errors.hpp"
#include "loads/json_util.hpp"

namespace loads {

// ---------------------------------------------------------------------------
// Lexicon

bool Lexicon::is_blocked(const std::string& word) const {
    return std::find(blocked.begin(), blocked.end(), word) != blocked.end();
}

void Lexicon::validate(const ClassSchema& schema) const {
    for (const auto& [role, words] : synonyms) {
        (void)words;
        if (schema.role_index(role) < 0) {
            throw validation_error("lexicon: synonyms for unknown role '" + role + "'");
        }
    }
    for (const auto& [a, b] : antonym_pairs) {
        std::string role_a, role_b;
        for (const auto& [role, words] : synonyms) {
            if (std::find(words.begin(), words.end(), a) != words.end() && role_a.empty()) {
                role_a = role;
            }
            if (std::find(words.begin(), words.end(), b) != words.end() && role_b.empty()) {
                role_b = role;
            }
        }
        if (role_a.empty() || role_b.empty()) {
            throw validation_error("lexicon: antonym pair (" + a + ", " + b +
                                   ") has a member outside every synonym list");
        }
        if (role_a == role_b) {
            throw validation_error("lexicon: antonym pair (" + a + ", " + b +
                                   ") must span two distinct roles");
        }
    }
}

Lexicon Lexicon::from_json(const nlohmann::json& j) {
    Lexicon lex;
    try {
        lex.synonyms = j.at("synonyms").get<std::map<std::string, std::vector<std::string>>>();
        if (j.contains("antonym_pairs")) {
            for (const auto& pair : j.at("antonym_pairs")) {
                if (!pair.is_array() || pair.size() != 2) {
                    throw parse_error("lexicon: antonym_pairs entries must be [pos, neg] pairs");
                }
                lex.antonym_pairs.emplace_back(pair[0].get<std::string>(),
                                               pair[1].get<std::string>());
            }
        }
        if (j.contains("blocked")) {
            lex.blocked = j.at("blocked").get<std::vector<std::string>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(std::string("bad lexicon JSON: ") + e.what());
    }
    return lex;
}

nlohmann::json Lexicon::to_json() const {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& [a, b] : antonym_pairs) {
        pairs.push_back({a, b});
    }
    return nlohmann::json{{"synonyms", synonyms}, {"antonym_pairs", pairs}, {"blocked", blocked}};
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
    return from_json(read_json_file(path));
}

// ---------------------------------------------------------------------------
// ElaborationTemplates

void ElaborationTemplates::validate() const {
    for (const auto& [level, by_role] : formats) {
        for (const auto& [role, fmt] : by_role) {
            std::size_t first = fmt.find("{word}");
            if (first == std::string::npos || fmt.find("{word}", first + 1) != std::string::npos) {
                throw validation_error("elaboration template " + elaboration_name(level) + "/" +
                                       role + " must contain {word} exactly once");
            }
        }
    }
}

ElaborationTemplates ElaborationTemplates::from_json(const nlohmann::json& j) {
    ElaborationTemplates templates;
    try {
        for (const auto& [level_name, by_role] : j.items()) {
            Elaboration level = elaboration_from_name(level_name);
            templates.formats[level] = by_role.get<std::map<std::string, std::string>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(std::string("bad elaboration template JSON: ") + e.what());
    }
    templates.validate();
    return templates;
}

ElaborationTemplates ElaborationTemplates::load(const std::filesystem::path& path) {
    return from_json(read_json_file(path));
}

// ---------------------------------------------------------------------------
// expand_pool

namespace {

std::vector<std::string> filtered_candidates(const Lexicon& lexicon, const std::string& role) {
    std::vector<std::string> out;
    auto it = lexicon.synonyms.find(role);
    if (it == lexicon.synonyms.end()) {
        return out;
    }
    std::set<std::string> seen;
    for (const auto& word : it->second) {
        if (lexicon.is_blocked(word)) {
            continue;
        }
        if (seen.insert(word).second) {
            out.push_back(word);
        }
    }
    return out;
}

std::string role_of_word(const Lexicon& lexicon, const std::string& word) {
    for (const auto& [role, words] : lexicon.synonyms) {
        if (std::find(words.begin(), words.end(), word) != words.end()) {
            return role;
        }
    }
    return {};
}

} // namespace

std::vector<LabelSet> expand_pool(const ClassSchema& schema, const Lexicon& lexicon) {
    schema.validate();
    lexicon.validate(schema);

    // Pairs vary jointly across the two roles they span; everything else is
    // an independent axis over the role's candidate words.
    std::vector<std::pair<std::string, std::string>> pairs;
    std::string pair_role_a, pair_role_b;
    for (const auto& [a, b] : lexicon.antonym_pairs) {
        if (lexicon.is_blocked(a) || lexicon.is_blocked(b)) {
            continue;
        }
        std::string role_a = role_of_word(lexicon, a);
        std::string role_b = role_of_word(lexicon, b);
        if (pair_role_a.empty()) {
            pair_role_a = role_a;
            pair_role_b = role_b;
        } else if (role_a != pair_role_a || role_b != pair_role_b) {
            throw validation_error("lexicon: all antonym pairs must span the same two roles "
                                   "in the same orientation; pair (" + a + ", " + b +
                                   ") spans (" + role_a + ", " + role_b + ")");
        }
        pairs.emplace_back(a, b);
    }

    // One axis per schema role, in schema order. Paired roles share a single
    // joint axis realized through `pairs`.
    std::vector<std::string> free_roles;
    for (const auto& role : schema.class_roles) {
        if (!pairs.empty() && (role == pair_role_a || role == pair_role_b)) {
            continue;
        }
        free_roles.push_back(role);
    }

    std::map<std::string, std::vector<std::string>> free_candidates;
    for (const auto& role : free_roles) {
        auto words = filtered_candidates(lexicon, role);
        if (words.empty()) {
            throw validation_error("expand_pool: role '" + role +
                                   "' has no candidate words after filtering");
        }
        free_candidates[role] = std::move(words);
    }
    if (lexicon.antonym_pairs.size() > 0 && pairs.empty()) {
        throw validation_error("expand_pool: every antonym pair was blocked; paired roles "
                               "have no candidates left");
    }

    std::vector<LabelSet> pool;

    // Odometer over (pair axis, free role axes).
    std::size_t n_pair_choices = pairs.empty() ? 1 : pairs.size();
    std::vector<std::size_t> idx(free_roles.size(), 0);
    for (std::size_t p = 0; p < n_pair_choices; ++p) {
        std::fill(idx.begin(), idx.end(), 0);
        for (;;) {
            LabelSet set;
            bool ok = true;
            std::set<std::string> seen;
            for (const auto& role : schema.class_roles) {
                std::string word;
                if (!pairs.empty() && role == pair_role_a) {
                    word = pairs[p].first;
                } else if (!pairs.empty() && role == pair_role_b) {
                    word = pairs[p].second;
                } else {
                    std::size_t axis = static_cast<std::size_t>(
                        std::find(free_roles.begin(), free_roles.end(), role) - free_roles.begin());
                    word = free_candidates[role][idx[axis]];
                }
                std::string folded = word;
                std::transform(folded.begin(), folded.end(), folded.begin(), ::tolower);
                if (!seen.insert(folded).second) {
                    ok = false;  // colliding words cannot form a valid set
                    break;
                }
                set.words.push_back(word);
                set.role_of.push_back(role);
            }
            if (ok) {
                set.order_index = 0;
                set.elaboration = Elaboration::kNone;
                set.source = set.words == original_label_set(schema).words
                                 ? LabelSource::kOriginal
                                 : LabelSource::kLexicon;
                pool.push_back(std::move(set));
            }
            // advance odometer
            std::size_t axis = 0;
            for (; axis < idx.size(); ++axis) {
                if (++idx[axis] < free_candidates[free_roles[axis]].size()) {
                    break;
                }
                idx[axis] = 0;
            }
            if (axis == idx.size()) {
                break;
            }
        }
    }

    std::sort(pool.begin(), pool.end(),
              [](const LabelSet& a, const LabelSet& b) { return a.words < b.words; });
    pool.erase(std::unique(pool.begin(), pool.end(),
                           [](const LabelSet& a, const LabelSet& b) { return a.words == b.words; }),
               pool.end());

    for (const auto& set : pool) {
        set.validate(schema);
    }
    return pool;
}

// ---------------------------------------------------------------------------
// permute_orders

std::vector<LabelSet> permute_orders(const LabelSet& set, const ClassSchema& schema) {
    if (set.elaboration != Elaboration::kNone) {
        throw validation_error("permute_orders: only single-word (non-elaborated) sets "
                               "can be reordered");
    }
    set.validate(schema);

    int n = set.size();
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        perm[static_cast<std::size_t>(i)] = i;
    }

    std::vector<LabelSet> out;
    int order_index = 0;
    do {
        LabelSet variant;
        for (int i = 0; i < n; ++i) {
            variant.words.push_back(set.words[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])]);
            variant.role_of.push_back(set.role_of[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])]);
        }
        variant.order_index = order_index++;
        variant.elaboration = set.elaboration;
        variant.source = set.source;
        out.push_back(std::move(variant));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return out;
}

// ---------------------------------------------------------------------------
// elaborate

LabelSet elaborate(const LabelSet& set, Elaboration level,
                   const ElaborationTemplates& templates, const ClassSchema& schema) {
    if (set.elaboration != Elaboration::kNone) {
        throw validation_error("elaborate: input set is already elaborated");
    }
    if (level == Elaboration::kNone) {
        throw validation_error("elaborate: level must be E1, E2 or E3");
    }
    auto level_it = templates.formats.find(level);
    LabelSet out = set;
    out.elaboration = level;
    for (std::size_t i = 0; i < set.words.size(); ++i) {
        const std::string& role = set.role_of[i];
        if (level_it == templates.formats.end() ||
            level_it->second.find(role) == level_it->second.end()) {
            throw validation_error("elaborate: missing template for role '" + role +
                                   "' at level " + elaboration_name(level));
        }
        std::string fmt = level_it->second.at(role);
        std::size_t pos = fmt.find("{word}");
        out.words[i] = fmt.substr(0, pos) + set.words[i] + fmt.substr(pos + 6);
    }
    out.validate(schema);
    return out;
}

// ---------------------------------------------------------------------------
// Pool files

void save_pool(const std::filesystem::path& path, const std::vector<LabelSet>& pool,
               const nlohmann::json& meta) {
    nlohmann::json sets = nlohmann::json::array();
    for (const auto& set : pool) {
        sets.push_back(set.to_json());
    }
    nlohmann::json j{{"meta", meta}, {"sets", sets}};
    write_text_file(path, j.dump(2) + "\n");
}

std::vector<LabelSet> load_pool(const std::filesystem::path& path, const ClassSchema& schema) {
    nlohmann::json j = read_json_file(path);
    const nlohmann::json* sets = nullptr;
    if (j.is_array()) {
        sets = &j;
    } else if (j.is_object() && j.contains("sets")) {
        sets = &j.at("sets");
    } else {
        throw parse_error("pool file " + path.string() +
                          ": expected a JSON array or an object with a 'sets' key");
    }
    std::vector<LabelSet> pool;
    for (const auto& item : *sets) {
        LabelSet set = LabelSet::from_json(item);
        set.validate(schema);
        pool.push_back(std::move(set));
    }
    return pool;
}

} // namespace loads
