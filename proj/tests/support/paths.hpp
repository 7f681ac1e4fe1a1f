#pragma once
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <filesystem>
#include <string>

namespace testsupport {

inline std::filesystem::path fixtures_dir() {
    return std::filesystem::path(LOADS_FIXTURES_DIR);
}

inline std::filesystem::path cli_path() {
    return std::filesystem::path(LOADS_CLI_PATH);
}

// Fresh directory under the system temp root, unique per call.
inline std::filesystem::path make_temp_dir(const std::string& tag) {
    static int counter = 0;
    auto dir = std::filesystem::temp_directory_path() /
               ("loads_test_" + tag + "_" + std::to_string(++counter) + "_" +
                std::to_string(static_cast<long>(::getpid())));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace testsupport
