#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ocrisk::cli {

// Exit codes besides 0 and CLI11's own usage codes.
inline constexpr int kCheckFailed = 1;
inline constexpr int kInvalidInput = 2;
inline constexpr int kTrainingFailed = 3;

// Entry point shared by the executable and the tests. args[0] is the
// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Reads a flat key=value file into "--key=value" arguments. Blank lines
// and lines starting with '#' are skipped; '_' in keys maps to '-'.
std::vector<std::string> config_arguments(const std::string& path);

}  // namespace ocrisk::cli
