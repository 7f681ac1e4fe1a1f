#pragma once
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace loads {

// Greedy longest-match subword tokenizer with byte fallback.
//
// Id layout (documented in docs/FORMATS.md):
//   0          <eos>   (decodes to "")
//   1          <unk>   (reserved; never emitted by encode, decodes to "")
//   2..257     byte tokens for 0x00..0xFF
//   258..      vocabulary entries from the vocab file, dense
//
// encode() tries the longest vocabulary match at each position and falls
// back to byte tokens, so encode(decode) and decode(encode) are identities
// on arbitrary byte strings.
class Tokenizer {
public:
    static constexpr int kEosId = 0;
    static constexpr int kUnkId = 1;
    static constexpr int kByteBase = 2;
    static constexpr int kFirstVocabId = 258;

    // Vocab file: UTF-8 lines "token<TAB>id" with dense ids starting at 258.
    static Tokenizer load(const std::filesystem::path& path);
    // Builds a tokenizer from entry strings (ids assigned 258, 259, ...).
    static Tokenizer from_tokens(const std::vector<std::string>& tokens);

    std::vector<int> encode(const std::string& text) const;
    std::string decode(std::span<const int> ids) const;
    std::string piece(int id) const;           // surface of one token
    int first_token(const std::string& word) const;

    int vocab_size() const { return kFirstVocabId + static_cast<int>(entries_.size()); }

    void save(const std::filesystem::path& path) const;

private:
    std::vector<std::string> entries_;                       // index = id - 258
    std::unordered_map<std::string, int> lookup_;            // token -> id
    std::size_t max_token_len_ = 0;
};

} // namespace loads
