#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "config.hpp"

namespace nnwd::cli {

/// A stage ran before the stage that produces its inputs.
class MissingStageError : public std::runtime_error {
public:
    MissingStageError(const std::string& stage, const std::filesystem::path& artifact)
        : std::runtime_error("missing " + artifact.string() + "; run '" + stage + "' first"), stage_(stage) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

/// Another command holds the output directory.
class LockError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct StageContext {
    ExperimentConfig config;
    std::filesystem::path out;
    bool quiet = false;

    void log(const std::string& stage, const std::string& message) const;
};

/// Exclusive advisory lock on <out>/.lock held for the object's lifetime.
class OutputLock {
public:
    explicit OutputLock(const std::filesystem::path& out);
    ~OutputLock();
    OutputLock(const OutputLock&) = delete;
    OutputLock& operator=(const OutputLock&) = delete;

private:
    int fd_ = -1;
};

/// Stage names in dependency order.
const std::vector<std::string>& stage_names();

/// Runs one stage and records its artifacts in the run manifest.
void run_stage(const std::string& stage, const StageContext& ctx);

struct ScoreRequest {
    std::filesystem::path image;
    std::optional<std::filesystem::path> autoencoder;
    std::optional<std::filesystem::path> binary;
    std::optional<std::filesystem::path> core;
};

/// Single-image diagnostic as a JSON document.
std::string score_image(const StageContext& ctx, const ScoreRequest& request);

/// Re-verifies every manifest entry. Returns the problems found.
std::vector<std::string> audit(const StageContext& ctx);

}  // namespace nnwd::cli
