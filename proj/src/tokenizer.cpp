// SPDX-License-Identifier: Apache-2.0

#include "loads/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "loads/errors.hpp"
#include "loads/json_util.hpp"

namespace loads {

Tokenizer Tokenizer::from_tokens(const std::vector<std::string>& tokens) {
    Tokenizer tok;
    tok.entries_.reserve(tokens.size());
    for (const auto& t : tokens) {
        if (t.empty()) {
            throw validation_error("tokenizer: empty vocabulary entry");
        }
        if (t.find('\t') != std::string::npos || t.find('\n') != std::string::npos) {
            throw validation_error("tokenizer: vocabulary entry contains tab or newline");
        }
        int id = kFirstVocabId + static_cast<int>(tok.entries_.size());
        if (!tok.lookup_.emplace(t, id).second) {
            throw validation_error("tokenizer: duplicate vocabulary entry '" + t + "'");
        }
        tok.entries_.push_back(t);
        tok.max_token_len_ = std::max(tok.max_token_len_, t.size());
    }
    return tok;
}

Tokenizer Tokenizer::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw io_error("cannot open vocabulary file: " + path.string());
    }
    std::vector<std::pair<int, std::string>> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        std::size_t tab = line.rfind('\t');
        if (tab == std::string::npos || tab == 0) {
            throw parse_error(path.string() + ":" + std::to_string(line_no) +
                              ": expected 'token<TAB>id'");
        }
        std::string token = line.substr(0, tab);
        int id;
        try {
            id = std::stoi(line.substr(tab + 1));
        } catch (const std::exception&) {
            throw parse_error(path.string() + ":" + std::to_string(line_no) + ": bad token id");
        }
        if (id < kFirstVocabId) {
            throw validation_error(path.string() + ":" + std::to_string(line_no) + ": id " +
                                   std::to_string(id) + " collides with reserved range [0, " +
                                   std::to_string(kFirstVocabId) + ")");
        }
        rows.emplace_back(id, std::move(token));
    }
    std::sort(rows.begin(), rows.end());
    std::vector<std::string> tokens;
    tokens.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].first != kFirstVocabId + static_cast<int>(i)) {
            throw validation_error(path.string() + ": vocabulary ids must be dense starting at " +
                                   std::to_string(kFirstVocabId));
        }
        tokens.push_back(std::move(rows[i].second));
    }
    return from_tokens(tokens);
}

void Tokenizer::save(const std::filesystem::path& path) const {
    std::string out;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        out += entries_[i];
        out += '\t';
        out += std::to_string(kFirstVocabId + static_cast<int>(i));
        out += '\n';
    }
    write_text_file(path, out);
}

std::vector<int> Tokenizer::encode(const std::string& text) const {
    std::vector<int> ids;
    std::size_t i = 0;
    while (i < text.size()) {
        // longest vocabulary match at position i, else one byte-fallback token
        std::size_t best_len = 0;
        int best_id = -1;
        std::size_t limit = std::min(max_token_len_, text.size() - i);
        for (std::size_t len = limit; len >= 1; --len) {
            auto it = lookup_.find(text.substr(i, len));
            if (it != lookup_.end()) {
                best_len = len;
                best_id = it->second;
                break;
            }
        }
        if (best_id >= 0) {
            ids.push_back(best_id);
            i += best_len;
        } else {
            ids.push_back(kByteBase + static_cast<int>(static_cast<unsigned char>(text[i])));
            ++i;
        }
    }
    return ids;
}

std::string Tokenizer::piece(int id) const {
    if (id == kEosId || id == kUnkId) {
        return "";
    }
    if (id >= kByteBase && id < kFirstVocabId) {
        return std::string(1, static_cast<char>(id - kByteBase));
    }
    int idx = id - kFirstVocabId;
    if (idx < 0 || idx >= static_cast<int>(entries_.size())) {
        throw validation_error("tokenizer: unknown token id " + std::to_string(id));
    }
    return entries_[static_cast<std::size_t>(idx)];
}

std::string Tokenizer::decode(std::span<const int> ids) const {
    std::string out;
    for (int id : ids) {
        out += piece(id);
    }
    return out;
}

int Tokenizer::first_token(const std::string& word) const {
    if (word.empty()) {
        throw validation_error("tokenizer: cannot take first token of an empty word");
    }
    return encode(word).front();
}

} // namespace loads
