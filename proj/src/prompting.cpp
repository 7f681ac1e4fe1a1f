// SPDX-License-Identifier: Apache-2.0

#include "loads/prompting.hpp"

#include <map>

#include "loads/errors.hpp"
#include "loads/json_util.hpp"

namespace loads {

namespace {

const char* kPlaceholders[] = {"text1_name", "text2_name", "n", "options", "text1", "text2"};

int count_placeholder(const std::string& body, const std::string& name) {
    std::string needle = "{" + name + "}";
    int count = 0;
    std::size_t pos = 0;
    while ((pos = body.find(needle, pos)) != std::string::npos) {
        ++count;
        pos += needle.size();
    }
    return count;
}

// Single-pass substitution; values are inserted raw and never re-scanned.
std::string substitute(const std::string& body,
                       const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(body.size() * 2);
    std::size_t i = 0;
    while (i < body.size()) {
        char c = body[i];
        if (c != '{') {
            out += c;
            ++i;
            continue;
        }
        std::size_t close = body.find('}', i + 1);
        if (close == std::string::npos) {
            throw validation_error("template body has an unterminated '{' placeholder");
        }
        std::string name = body.substr(i + 1, close - i - 1);
        auto it = values.find(name);
        if (it == values.end()) {
            throw validation_error("template body uses unknown placeholder '{" + name + "}'");
        }
        out += it->second;
        i = close + 1;
    }
    return out;
}

} // namespace

void PromptTemplate::validate() const {
    if (options_style != "quoted_and" && options_style != "none") {
        throw validation_error("unknown options_style '" + options_style + "'");
    }
    for (const char* name : kPlaceholders) {
        int count = count_placeholder(body, name);
        std::string n(name);
        if (n == "text1_name" || n == "text2_name") {
            if (count < 1) {
                throw validation_error("template body must mention {" + n + "}");
            }
        } else if (n == "n" || n == "options") {
            int expected = has_options() ? 1 : 0;
            if (count != expected) {
                throw validation_error("template body must contain {" + n + "} exactly " +
                                       std::to_string(expected) + " time(s) for options_style '" +
                                       options_style + "'");
            }
        } else {
            if (count != 1) {
                throw validation_error("template body must contain {" + n + "} exactly once");
            }
        }
    }
}

PromptTemplate PromptTemplate::from_json(const nlohmann::json& j) {
    PromptTemplate tpl;
    try {
        tpl.body = j.at("body").get<std::string>();
        tpl.options_style = j.value("options_style", "quoted_and");
    } catch (const nlohmann::json::exception& e) {
        throw parse_error(std::string("bad template JSON: ") + e.what());
    }
    tpl.validate();
    return tpl;
}

nlohmann::json PromptTemplate::to_json() const {
    return nlohmann::json{{"body", body}, {"options_style", options_style}};
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
    return from_json(read_json_file(path));
}

std::string options_clause(const LabelSet& set) {
    // "w0", "w1", ... , and "w{n-1}": every word double-quoted, final item
    // preceded by "and"; for n=2 the clause is "w0", and "w1".
    std::string out;
    int n = set.size();
    for (int i = 0; i < n; ++i) {
        if (i > 0) {
            out += ", ";
        }
        if (i == n - 1) {
            out += "and ";
        }
        out += '"';
        out += set.words[static_cast<std::size_t>(i)];
        out += '"';
    }
    return out;
}

std::string render(const PromptTemplate& tpl, const ClassSchema& schema,
                   const LabelSet& set, const Example& ex) {
    tpl.validate();
    if (!tpl.has_options()) {
        throw validation_error("render: template has no options slot; use render_open");
    }
    set.validate(schema);
    std::map<std::string, std::string> values{
        {"text1_name", schema.text1_name},
        {"text2_name", schema.text2_name},
        {"n", std::to_string(set.size())},
        {"options", options_clause(set)},
        {"text1", ex.text1},
        {"text2", ex.text2},
    };
    return substitute(tpl.body, values);
}

std::string render_open(const PromptTemplate& tpl, const ClassSchema& schema,
                        const Example& ex) {
    tpl.validate();
    if (tpl.has_options()) {
        throw validation_error("render_open: template has an options slot; use render");
    }
    std::map<std::string, std::string> values{
        {"text1_name", schema.text1_name},
        {"text2_name", schema.text2_name},
        {"text1", ex.text1},
        {"text2", ex.text2},
    };
    return substitute(tpl.body, values);
}

} // namespace loads
