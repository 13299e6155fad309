#pragma once

#include <string>
#include <vector>

namespace nidsllm::detail {

// Pipe-separated plain text table; column 0 is left aligned, the rest right.
std::string render_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows);

std::string fixed(double value, int decimals);

}  // namespace nidsllm::detail
