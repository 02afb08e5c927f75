#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "ettckge/report.hpp"

using namespace ettckge;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("ck-report-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  static inline int counter = 0;
};

RunReport sample_report() {
  RunReport r;
  r.config.dim = 16;
  r.config.seed = 42;
  r.config.mode = TrainMode::Ett;
  for (std::size_t i = 0; i < 3; ++i) {
    EvalResult e;
    e.mrr = 0.5 + 0.1 * double(i);
    e.hits1 = 0.3;
    e.hits10 = 0.8;
    e.query_count = 100 + i;
    r.evals.push_back(e);
    SnapshotMetrics m;
    m.snapshot = i;
    m.stage1_s = 0.5 * double(i);
    m.stage2_s = 2.0;
    m.wall_time_s = m.stage1_s + m.stage2_s;
    m.cumulative_time_s = m.wall_time_s * double(i + 1);
    m.eval_time_s = 0.25;
    m.peak_memory_bytes = 1 << 20;
    m.live_table_bytes = 4096;
    m.stage1_updated_parameters = i == 0 ? 0 : 1600;
    m.stage2_updated_parameters = 12800;
    r.metrics.push_back(m);
  }
  r.forgetting = {{0.5, std::nan(""), std::nan("")},
                  {0.45, 0.6, std::nan("")},
                  {0.4, 0.55, 0.7}};
  r.timestamp = "2024-01-02T03:04:05Z";
  return r;
}

std::size_t line_count(const std::filesystem::path& file) {
  std::ifstream in(file);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

}  // namespace

TEST_CASE("report JSON round trip preserves everything, NaN included") {
  RunReport orig = sample_report();
  nlohmann::json j = report_to_json(orig);
  CHECK(j.at("version") == kVersion);
  CHECK(j.at("config_hash") == orig.config.hash());
  // the upper triangle serializes as null, not NaN
  CHECK(j.at("forgetting")[0][1].is_null());
  CHECK(j.dump().find("nan") == std::string::npos);

  RunReport back = report_from_json(j);
  CHECK(back.config.to_json() == orig.config.to_json());
  REQUIRE(back.evals.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.evals[i].mrr == orig.evals[i].mrr);
    CHECK(back.evals[i].query_count == orig.evals[i].query_count);
    CHECK(back.metrics[i].stage1_s == orig.metrics[i].stage1_s);
    CHECK(back.metrics[i].peak_memory_bytes == orig.metrics[i].peak_memory_bytes);
  }
  CHECK(back.forgetting[1][0] == 0.45);
  CHECK(std::isnan(back.forgetting[0][2]));
  CHECK(back.timestamp == orig.timestamp);
}

TEST_CASE("emit_report writes the three artifacts") {
  TempDir dir;
  RunReport r = sample_report();
  emit_report(dir.path, r);

  CHECK(std::filesystem::exists(dir.path / "report.json"));
  CHECK(std::filesystem::exists(dir.path / "metrics.csv"));
  CHECK(std::filesystem::exists(dir.path / "forgetting.csv"));

  // metrics: header + one row per snapshot
  CHECK(line_count(dir.path / "metrics.csv") == 1 + 3);
  // forgetting: header + lower triangle, I(I+1)/2 cells
  CHECK(line_count(dir.path / "forgetting.csv") == 1 + 6);

  std::ifstream in(dir.path / "metrics.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header.rfind("snapshot,mrr,hits1,hits10,query_count,", 0) == 0);

  RunReport back = load_report(dir.path);
  CHECK(back.config.hash() == r.config.hash());
  CHECK(back.evals.size() == 3);
  CHECK(back.forgetting[2][1] == 0.55);
}

TEST_CASE("identical reports serialize identically apart from the timestamp") {
  RunReport r = sample_report();
  std::string a = report_to_json(r).dump();
  std::string b = report_to_json(r).dump();
  CHECK(a == b);

  r.timestamp.clear();  // emit_report stamps the current time
  nlohmann::json j = report_to_json(r);
  CHECK(j.at("timestamp").get<std::string>().size() == 20);
  j.erase("timestamp");
  nlohmann::json k = report_to_json(sample_report());
  k.erase("timestamp");
  CHECK(j == k);
}

TEST_CASE("load_report rejects garbage") {
  TempDir dir;
  CHECK_THROWS_AS(load_report(dir.path), FormatError);
  std::ofstream(dir.path / "report.json") << "{not json";
  CHECK_THROWS_AS(load_report(dir.path), FormatError);
}

TEST_CASE("rank dump CSV layout") {
  TempDir dir;
  const auto file = dir.path / "ranks.csv";
  std::vector<QueryRank> ranks = {{QueryDirection::Tail, {1, 0, 2}, 1.0},
                                  {QueryDirection::Head, {1, 0, 2}, 3.5}};
  write_rank_dump(file, ranks);
  std::ifstream in(file);
  std::string line;
  std::getline(in, line);
  CHECK(line == "direction,head,relation,tail,rank");
  std::getline(in, line);
  CHECK(line == "tail,1,0,2,1");
  std::getline(in, line);
  CHECK(line == "head,1,0,2,3.5");
}
