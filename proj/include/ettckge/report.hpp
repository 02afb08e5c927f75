#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ettckge/config.hpp"
#include "ettckge/eval.hpp"
#include "ettckge/telemetry.hpp"

namespace ettckge {

inline constexpr const char* kVersion = "0.1.0";

struct RunReport {
  TrainConfig config;
  std::vector<EvalResult> evals;
  std::vector<SnapshotMetrics> metrics;
  std::vector<std::vector<double>> forgetting;  // lower-triangular, NaN above
  std::string timestamp;  // ISO-8601, the only field allowed to differ between reruns
};

nlohmann::json report_to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& j);

// Writes report.json, metrics.csv and forgetting.csv under `dir`.
void emit_report(const std::filesystem::path& dir, const RunReport& report);
RunReport load_report(const std::filesystem::path& dir);

void write_rank_dump(const std::filesystem::path& file,
                     const std::vector<QueryRank>& ranks);

}  // namespace ettckge
