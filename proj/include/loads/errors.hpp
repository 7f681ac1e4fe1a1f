#pragma once
// SPDX-License-Identifier: Apache-2.0

#include <stdexcept>
#include <string>

namespace loads {

// Error taxonomy. The CLI maps each class to a distinct nonzero exit code
// (see tools/loads_main.cpp and the --help footer).
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Missing or unreadable files.
struct io_error : error {
    using error::error;
};

// Malformed JSON / JSONL / binary containers.
struct parse_error : error {
    using error::error;
};

// Schema, pool, or contract violations in otherwise well-formed inputs.
struct validation_error : error {
    using error::error;
};

// A backend capability (tap, tokenizer, lens) that is not available.
struct unsupported_error : error {
    using error::error;
};

// Degenerate numeric inputs (zero variance, too-short vectors, ...).
struct numeric_error : error {
    using error::error;
};

} // namespace loads
