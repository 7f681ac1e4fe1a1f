#pragma once
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <string>

#include "json.hpp"

namespace loads {

using json = nlohmann::json;

// Reads and parses a JSON file, mapping failures to io_error / parse_error.
json read_json_file(const std::filesystem::path& path);

// Reads a whole file as bytes; io_error on failure.
std::string read_text_file(const std::filesystem::path& path);

// Writes bytes to a file, creating parent directories; io_error on failure.
void write_text_file(const std::filesystem::path& path, const std::string& content);

// Escapes a field for CSV output (quotes when needed).
std::string csv_field(const std::string& field);

} // namespace loads
