#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nidsllm::cli {

// Entry point shared by the binary and the tests. Returns the exit code:
// 0 on success, 1 when a pipeline step fails, 2 on usage or config errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nidsllm::cli
