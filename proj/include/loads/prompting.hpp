#pragma once
// SPDX-License-Identifier: Apache-2.0

// Byte-deterministic rendering of the zero-shot classification prompt.

#include <filesystem>
#include <string>

#include "loads/core_data.hpp"

namespace loads {

// A prompt template. `body` holds placeholders in braces:
//   {text1_name} {text2_name} {n} {options} {text1} {text2}
// options_style "quoted_and" renders the option list as
//   "w0", "w1", ... , and "w{n-1}"
// (for n=2: "w0", and "w1"). options_style "none" marks an options-free
// template: {n} and {options} must be absent and rendering takes no label
// set. The name placeholders may repeat; {n}, {options}, {text1} and
// {text2} must appear exactly once each (when present at all).
struct PromptTemplate {
    std::string body;
    std::string options_style = "quoted_and";

    bool has_options() const { return options_style != "none"; }
    void validate() const;

    static PromptTemplate from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    static PromptTemplate load(const std::filesystem::path& path);
};

// The options clause for a label set under the "quoted_and" rule.
std::string options_clause(const LabelSet& set);

// Renders the classification prompt. Pure and byte-deterministic; errors on
// placeholder mismatch or when the template has no options slot.
std::string render(const PromptTemplate& tpl, const ClassSchema& schema,
                   const LabelSet& set, const Example& ex);

// Renders an options-free prompt (used by the self-generated baseline).
std::string render_open(const PromptTemplate& tpl, const ClassSchema& schema,
                        const Example& ex);

} // namespace loads
