#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "nidsllm/netflow_data.hpp"

namespace nidsllm::testing {

// Synthetic flows in the NF-UNSW-NB15-v2 layout. Malicious rows cycle through
// `attacks`; `overlap` is the fraction of rows whose features are drawn from
// the other class's profile, so classifiers cannot reach 100%.
struct SyntheticSpec {
    std::size_t rows = 1000;
    double malicious_fraction = 0.5;
    std::vector<std::string> attacks = {"Exploits", "Fuzzers", "Generic", "DoS",
                                        "Reconnaissance"};
    double overlap = 0.0;
    std::uint64_t seed = 1;
};

std::string synthetic_csv(const SyntheticSpec& spec);
FlowTable synthetic_flows(const SyntheticSpec& spec);

// Small table over an arbitrary schema, rows given as feature values.
struct RowSpec {
    std::vector<std::string> values;
    int label = 0;
    std::string attack = "Benign";
};
FlowTable make_table(const DatasetSchema& schema, const std::vector<RowSpec>& rows);

// Schema "F0".."F{n-1}" with Label/Attack columns.
DatasetSchema numbered_schema(std::size_t features, std::string id = "test");

// Table over numbered_schema where stratum i ("S<i>") has sizes[i] rows; the
// first stratum is benign, the rest malicious. Feature values encode the row
// number so rows are distinguishable.
FlowTable strata_table(const std::vector<std::size_t>& sizes, std::size_t features = 3);

// One UNSW flow with the given features set and the rest "0".
FlowRecord unsw_flow(const std::map<std::string, std::string>& values, int label = 0,
                     std::string attack = "Benign");

// The true-negative DNS explanation and a matching flow.
std::string dns_explanation();
FlowRecord dns_flow();

class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace nidsllm::testing
