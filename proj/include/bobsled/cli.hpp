#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace bobsled::cli {

// Stable exit codes.
enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumerical = 3 };

int exit_code_for(const std::exception& e);

std::uint64_t fnv1a64(std::string_view bytes);

// Entry point shared by the executable and the tests. Diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bobsled::cli
