#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace hprm::cli {

/// Runs one hprm invocation; args exclude the program name. Returns the
/// process exit code (0 ok, 1 usage, 2 validation, 3 backend, 4 metric).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hprm::cli
