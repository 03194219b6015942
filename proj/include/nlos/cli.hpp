#pragma once

#include <string>
#include <vector>

namespace nlos::cli {

/// Entry point of the command-line tool. args excludes the program name.
/// Returns the process exit code; never throws.
int run(const std::vector<std::string>& args);

}  // namespace nlos::cli
