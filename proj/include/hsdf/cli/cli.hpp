#pragma once

#include <string>
#include <vector>

namespace hsdf::cli {

/// Entry point of the `hsdf` tool. Exit codes: 0 success, 1 usage error,
/// 2 runtime failure.
int run(int argc, char** argv);
/// Same, with the arguments after the program name.
int run(const std::vector<std::string>& args);

} // namespace hsdf::cli
