#pragma once

#include <json.hpp>

#include "nnwd/autoencoder.hpp"
#include "nnwd/generator.hpp"
#include "nnwd/pipeline.hpp"
#include "nnwd/training.hpp"

namespace nnwd {

// Report serialization. The +inf ROC sentinel threshold is written as the
// string "inf" since JSON has no infinity.

nlohmann::json to_json(const RocCurve& curve);
nlohmann::json to_json(const AccuracyReport& report);
nlohmann::json to_json(const GuardCounters& counters);
nlohmann::json to_json(const GateCounts& counts);
nlohmann::json to_json(const RunReport& report);
nlohmann::json to_json(const EvaluationReport& report);
nlohmann::json to_json(const Comparison& comparison);
nlohmann::json to_json(const CalibrationReport& report);
nlohmann::json to_json(const History& history);
nlohmann::json to_json(const Verdict& verdict);
nlohmann::json generation_summary(const GeneratedBatch& batch, const GeneratorConfig& config);

/// Hashes are written as 16 hex digits.
std::string hex64(std::uint64_t value);

}  // namespace nnwd
