#include "ettckge/report.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "ettckge/error.hpp"

namespace ettckge {

namespace {

std::string now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

nlohmann::json eval_to_json(const EvalResult& e) {
  return {{"mrr", e.mrr}, {"hits1", e.hits1}, {"hits10", e.hits10},
          {"query_count", e.query_count}};
}

EvalResult eval_from_json(const nlohmann::json& j) {
  EvalResult e;
  e.mrr = j.at("mrr").get<double>();
  e.hits1 = j.at("hits1").get<double>();
  e.hits10 = j.at("hits10").get<double>();
  e.query_count = j.at("query_count").get<std::size_t>();
  return e;
}

nlohmann::json metrics_to_json(const SnapshotMetrics& m) {
  return {{"snapshot", m.snapshot},
          {"stage1_s", m.stage1_s},
          {"stage2_s", m.stage2_s},
          {"wall_time_s", m.wall_time_s},
          {"cumulative_time_s", m.cumulative_time_s},
          {"eval_time_s", m.eval_time_s},
          {"peak_memory_bytes", m.peak_memory_bytes},
          {"live_table_bytes", m.live_table_bytes},
          {"stage1_updated_parameters", m.stage1_updated_parameters},
          {"stage2_updated_parameters", m.stage2_updated_parameters}};
}

SnapshotMetrics metrics_from_json(const nlohmann::json& j) {
  SnapshotMetrics m;
  m.snapshot = j.at("snapshot").get<std::size_t>();
  m.stage1_s = j.at("stage1_s").get<double>();
  m.stage2_s = j.at("stage2_s").get<double>();
  m.wall_time_s = j.at("wall_time_s").get<double>();
  m.cumulative_time_s = j.at("cumulative_time_s").get<double>();
  m.eval_time_s = j.at("eval_time_s").get<double>();
  m.peak_memory_bytes = j.at("peak_memory_bytes").get<std::uint64_t>();
  m.live_table_bytes = j.at("live_table_bytes").get<std::uint64_t>();
  m.stage1_updated_parameters = j.at("stage1_updated_parameters").get<std::uint64_t>();
  m.stage2_updated_parameters = j.at("stage2_updated_parameters").get<std::uint64_t>();
  return m;
}

}  // namespace

nlohmann::json report_to_json(const RunReport& report) {
  nlohmann::json evals = nlohmann::json::array();
  for (const EvalResult& e : report.evals) evals.push_back(eval_to_json(e));
  nlohmann::json metrics = nlohmann::json::array();
  for (const SnapshotMetrics& m : report.metrics) metrics.push_back(metrics_to_json(m));
  // JSON has no NaN; the upper triangle is emitted as null.
  nlohmann::json forgetting = nlohmann::json::array();
  for (const auto& row : report.forgetting) {
    nlohmann::json jrow = nlohmann::json::array();
    for (double v : row) {
      if (std::isnan(v)) jrow.push_back(nullptr);
      else jrow.push_back(v);
    }
    forgetting.push_back(jrow);
  }
  return {{"version", kVersion},
          {"config", report.config.to_json()},
          {"config_hash", report.config.hash()},
          {"evals", evals},
          {"metrics", metrics},
          {"forgetting", forgetting},
          {"timestamp", report.timestamp.empty() ? now_iso8601() : report.timestamp}};
}

RunReport report_from_json(const nlohmann::json& j) {
  RunReport r;
  r.config.merge_json(j.at("config"));
  for (const auto& e : j.at("evals")) r.evals.push_back(eval_from_json(e));
  for (const auto& m : j.at("metrics")) r.metrics.push_back(metrics_from_json(m));
  for (const auto& jrow : j.at("forgetting")) {
    std::vector<double> row;
    for (const auto& v : jrow) row.push_back(v.is_null() ? std::nan("") : v.get<double>());
    r.forgetting.push_back(row);
  }
  r.timestamp = j.at("timestamp").get<std::string>();
  return r;
}

void emit_report(const std::filesystem::path& dir, const RunReport& report) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "report.json");
    if (!out) throw FormatError("cannot write " + (dir / "report.json").string());
    out << report_to_json(report).dump(2) << "\n";
  }
  {
    std::ofstream out(dir / "metrics.csv");
    if (!out) throw FormatError("cannot write " + (dir / "metrics.csv").string());
    out << "snapshot,mrr,hits1,hits10,query_count,stage1_s,stage2_s,wall_time_s,"
           "cumulative_time_s,eval_time_s,peak_memory_bytes,live_table_bytes,"
           "stage1_updated_parameters,stage2_updated_parameters\n";
    for (std::size_t i = 0; i < report.metrics.size(); ++i) {
      const SnapshotMetrics& m = report.metrics[i];
      const EvalResult& e = report.evals.at(i);
      out << m.snapshot << ',' << e.mrr << ',' << e.hits1 << ',' << e.hits10 << ','
          << e.query_count << ',' << m.stage1_s << ',' << m.stage2_s << ','
          << m.wall_time_s << ',' << m.cumulative_time_s << ',' << m.eval_time_s << ','
          << m.peak_memory_bytes << ',' << m.live_table_bytes << ','
          << m.stage1_updated_parameters << ',' << m.stage2_updated_parameters << '\n';
    }
  }
  {
    std::ofstream out(dir / "forgetting.csv");
    if (!out) throw FormatError("cannot write " + (dir / "forgetting.csv").string());
    out << "model_snapshot,test_snapshot,mrr\n";
    for (std::size_t i = 0; i < report.forgetting.size(); ++i) {
      for (std::size_t j = 0; j <= i && j < report.forgetting[i].size(); ++j) {
        out << i << ',' << j << ',' << report.forgetting[i][j] << '\n';
      }
    }
  }
}

RunReport load_report(const std::filesystem::path& dir) {
  std::ifstream in(dir / "report.json");
  if (!in) throw FormatError("cannot open " + (dir / "report.json").string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad report JSON: ") + e.what());
  }
  return report_from_json(j);
}

void write_rank_dump(const std::filesystem::path& file, const std::vector<QueryRank>& ranks) {
  std::ofstream out(file);
  if (!out) throw FormatError("cannot write " + file.string());
  out << "direction,head,relation,tail,rank\n";
  for (const QueryRank& q : ranks) {
    out << (q.direction == QueryDirection::Tail ? "tail" : "head") << ','
        << q.triple.head << ',' << q.triple.relation << ',' << q.triple.tail << ','
        << q.fractional_rank << '\n';
  }
}

}  // namespace ettckge
