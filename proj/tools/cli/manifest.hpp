#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace nnwd::cli {

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_text(const std::string& text);

struct ArtifactEntry {
    std::string stage;
    std::string sha256;
    std::uintmax_t bytes = 0;
};

struct StageRecord {
    std::string config_hash;
    double seconds = 0.0;
};

/// manifest.json at the root of an output directory. Paths are relative to
/// that root. Every listed file exists with the recorded checksum once a
/// stage has finished writing.
struct RunManifest {
    std::string tool_version;
    std::string config_hash;  // of the most recent stage
    std::map<std::string, ArtifactEntry> artifacts;
    std::map<std::string, StageRecord> stages;

    static std::filesystem::path file(const std::filesystem::path& out_dir);
    /// Empty manifest when the file does not exist.
    static RunManifest load(const std::filesystem::path& out_dir);
    void save(const std::filesystem::path& out_dir) const;

    /// Replaces every entry owned by `stage` with checksums of `files`.
    void record(const std::string& stage, const std::filesystem::path& out_dir,
                const std::vector<std::filesystem::path>& files, const std::string& config_hash, double seconds);

    /// Problems found re-verifying the artifacts; empty when all match.
    std::vector<std::string> audit(const std::filesystem::path& out_dir) const;
};

}  // namespace nnwd::cli
