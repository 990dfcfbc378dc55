#pragma once

#include <string>
#include <vector>

namespace qdm::cli {

/// Entry point shared by the executable and the tests. Returns the exit code:
/// 0 success, 2 configuration error, 3 numeric failure, 1 anything else.
int run_cli(const std::vector<std::string>& args);

}  // namespace qdm::cli
