#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nidsllm::cli {

// Sectioned key = value configuration:
//
//   [backend]
//   kind = replay
//   transcript = runs/gpt4.jsonl
//
// Only known keys are accepted. Relative paths resolve against the directory
// of the file that set them.
class RunConfig {
public:
    static RunConfig defaults();
    static RunConfig parse(std::string_view text, const std::filesystem::path& base_dir,
                           const std::string& source);
    static RunConfig load(const std::filesystem::path& path);

    // Later layers win. Unknown keys are rejected.
    void merge(const RunConfig& other);
    // "section.key=value" from the command line; paths resolve against cwd.
    void set(std::string_view assignment);
    void set(const std::string& section, const std::string& key, std::string value);

    bool has(const std::string& section, const std::string& key) const;
    std::string str(const std::string& section, const std::string& key) const;
    std::int64_t integer(const std::string& section, const std::string& key) const;
    std::uint64_t u64(const std::string& section, const std::string& key) const;
    double real(const std::string& section, const std::string& key) const;
    bool boolean(const std::string& section, const std::string& key) const;
    std::vector<std::string> list(const std::string& section, const std::string& key) const;

    // Fills every absent seed from run.seed, generating run.seed when absent.
    // Returns the resolved seeds by "section.seed" name.
    std::map<std::string, std::uint64_t> resolve_seeds();

    // Canonical text: every section and key, sorted.
    std::string serialize() const;
    // SHA-256 of the canonical text without run.out, so moving the output
    // directory keeps the digest.
    std::string digest() const;

    std::filesystem::path out_dir() const;

private:
    std::map<std::string, std::map<std::string, std::string>> values_;
};

bool is_path_key(const std::string& section, const std::string& key);

}  // namespace nidsllm::cli
