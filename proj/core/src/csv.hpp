#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace nidsllm::csv {

// Reads one RFC 4180 record. Returns false at end of input. Quoted fields may
// span lines; a trailing '\r' is dropped.
bool read_record(std::istream& in, std::vector<std::string>& fields);

// Quotes the value only when it contains a comma, quote or line break.
std::string escape(std::string_view value);

}  // namespace nidsllm::csv
