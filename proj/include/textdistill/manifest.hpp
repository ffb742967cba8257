#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace textdistill {

inline constexpr const char* kToolVersion = "0.1.0";

std::string sha256_hex(const std::string& bytes);
std::string sha256_file_hex(const std::string& path);

// Audit record written next to every command's outputs. Digests recompute
// identically on unchanged inputs; no timestamps or host entropy.
struct RunManifest {
    std::string command;
    std::string config_path;
    std::uint64_t seed = 0;
    std::string tool_version = kToolVersion;
    std::vector<std::pair<std::string, std::string>> input_digests;  // path, sha256
    std::vector<std::string> output_paths;

    void add_input(const std::string& path);
    std::string to_json() const;
    void write(const std::string& path) const;
};

}  // namespace textdistill
